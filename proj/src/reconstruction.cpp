#include "tea/reconstruction.hpp"

namespace tea {

double reconstruction_loss(const std::vector<float>& original, const std::vector<float>& reconstructed, int frames,
                           const std::vector<bool>& valid_mask) {
  if (original.size() != reconstructed.size()) throw InvalidInput("reconstruction_loss: shape mismatch");
  if (frames <= 0 || original.size() % static_cast<std::size_t>(frames) != 0 ||
      valid_mask.size() != static_cast<std::size_t>(frames))
    throw InvalidInput("reconstruction_loss: frame count does not divide the arrays");
  const std::size_t per_frame = original.size() / static_cast<std::size_t>(frames);
  double total = 0;
  std::size_t count = 0;
  for (int t = 0; t < frames; ++t) {
    if (!valid_mask[static_cast<std::size_t>(t)]) continue;
    for (std::size_t i = t * per_frame; i < (t + 1) * per_frame; ++i) {
      const double d = static_cast<double>(reconstructed[i]) - original[i];
      total += d * d;
    }
    count += per_frame;
  }
  if (count == 0) throw InvalidInput("reconstruction_loss: no valid frames");
  return total / static_cast<double>(count);
}

}  // namespace tea
