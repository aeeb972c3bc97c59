#pragma once

#include "tea/autograd.hpp"
#include "tea/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace tea::testing {

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Worst relative error between backward() and central differences of `loss`
// over every entry of the given parameters.
inline double max_gradient_error(const std::function<ad::Var<double>()>& loss,
                                 const std::vector<ad::Var<double>>& params, double h = 1e-6) {
  for (const auto& p : params) p.zero_grad();
  ad::backward(loss());
  double worst = 0;
  for (const auto& p : params) {
    const Matrix<double> analytic = p.grad().size() ? p.grad() : Matrix<double>::Zero(p.rows(), p.cols());
    for (Index i = 0; i < p.value().size(); ++i) {
      double& x = p.mutable_value().data()[i];
      const double keep = x;
      x = keep + h;
      const double up = loss().item();
      x = keep - h;
      const double down = loss().item();
      x = keep;
      worst = std::max(worst, relative_error(analytic.data()[i], (up - down) / (2 * h)));
    }
  }
  return worst;
}

template <typename Scalar>
Matrix<Scalar> random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix<Scalar> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(u(rng));
  return m;
}

// A sample with random standardized values and the given labels source.
inline SitsSample random_sample(int frames, int channels, int height, int width, int classes, std::uint64_t seed,
                                int revisit = 15) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0, 1);
  SitsSample s;
  s.sample_id = "toy_" + std::to_string(seed);
  s.frames = frames;
  s.channels = channels;
  s.height = height;
  s.width = width;
  s.values.resize(static_cast<std::size_t>(frames) * channels * height * width);
  for (auto& v : s.values) v = static_cast<float>(normal(rng));
  for (int t = 0; t < frames; ++t) {
    s.day_offsets.push_back(t * revisit + static_cast<int>(rng() % 3));
    s.valid_mask.push_back(true);
  }
  s.labels.resize(static_cast<std::size_t>(height) * width);
  for (auto& l : s.labels) l = static_cast<int>(rng() % static_cast<std::uint64_t>(classes));
  return s;
}

// Unique scratch directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("tea_test_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace tea::testing
