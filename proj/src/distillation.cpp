#include "tea/distillation.hpp"

#include <algorithm>
#include <cmath>

namespace tea {

namespace {
// Gap to final_decay left at the last step; half the 1e-4 tolerance.
constexpr double kFinalGap = 5e-5;
}  // namespace

void DecaySchedule::validate() const {
  if (!(warmup_fraction >= 0 && warmup_fraction <= 1)) throw ConfigError("decay: warmup_fraction must be in [0, 1]");
  if (!(0 < warmup_start && warmup_start <= warmup_end && warmup_end < final_decay && final_decay < 1))
    throw ConfigError("decay: need 0 < warmup_start <= warmup_end < final < 1");
  if (total_steps < 1) throw ConfigError("decay: total_steps must be positive");
}

long long DecaySchedule::warmup_steps() const {
  return std::llround(warmup_fraction * static_cast<double>(total_steps));
}

double DecaySchedule::rate() const {
  const long long span = total_steps - warmup_steps();
  if (span <= 0) return 0.0;
  return std::log((final_decay - warmup_end) / kFinalGap) / static_cast<double>(span);
}

double decay_at(long long step, const DecaySchedule& s) {
  if (step < 0 || step > s.total_steps) throw InvalidInput("decay_at: step outside [0, total_steps]");
  const long long warm = s.warmup_steps();
  if (step == warm) return s.warmup_end;
  if (step < warm) {
    const double f = static_cast<double>(step) / static_cast<double>(warm);
    return s.warmup_start + (s.warmup_end - s.warmup_start) * f;
  }
  return s.final_decay - (s.final_decay - s.warmup_end) * std::exp(-s.rate() * static_cast<double>(step - warm));
}

}  // namespace tea
