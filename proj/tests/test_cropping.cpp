#include "helpers.hpp"

#include "tea/cropping.hpp"
#include "tea/errors.hpp"

#include <doctest.h>

#include <map>

using namespace tea;
using tea::testing::random_sample;

TEST_CASE("crop length rounds half up with a one-frame minimum") {
  CHECK(crop_length(80, 0.2) == 16);
  CHECK(crop_length(46, 0.1) == 5);  // 4.6
  CHECK(crop_length(24, 0.1) == 2);  // 2.4
  CHECK(crop_length(10, 0.25) == 3);  // 2.5
  CHECK(crop_length(3, 0.1) == 1);
  CHECK(crop_length(80, 1.0) == 80);
  CHECK_THROWS_AS(crop_length(80, 0.0), InvalidInput);
  CHECK_THROWS_AS(crop_length(80, 1.1), InvalidInput);
}

TEST_CASE("ratio schedule defaults to ten graduated levels") {
  const auto r = default_ratio_schedule();
  REQUIRE(r.size() == 10);
  CHECK(r.front() == 0.1);
  CHECK(r.back() == 1.0);
  validate_ratio_schedule(r);
  CHECK_THROWS_AS(validate_ratio_schedule({0.5, 0.5}), InvalidInput);
  CHECK_THROWS_AS(validate_ratio_schedule({}), InvalidInput);
  CHECK_THROWS_AS(validate_ratio_schedule({0.0, 0.5}), InvalidInput);
}

TEST_CASE("prefix crop keeps the first round(ratio T) frames") {
  const SitsSample s80 = random_sample(80, 1, 2, 2, 2, 1, 5);
  CHECK(prefix_crop(s80, 1.0) == s80);
  const SitsSample p = prefix_crop(s80, 0.2);
  CHECK(p.frames == 16);
  CHECK(std::equal(p.day_offsets.begin(), p.day_offsets.end(), s80.day_offsets.begin()));
  CHECK(prefix_crop(random_sample(46, 1, 1, 1, 2, 2), 0.1).frames == 5);
  CHECK_THROWS_AS(prefix_crop(s80, 0.0), InvalidInput);
  CHECK_THROWS_AS(prefix_crop(s80, 1.5), InvalidInput);
}

TEST_CASE("min_ratio 1 always yields the full sequence from frame 0") {
  std::mt19937_64 rng(3);
  const SitsSample s = random_sample(24, 2, 2, 2, 2, 3);
  for (int i = 0; i < 50; ++i) {
    const auto r = random_crop(s, rng, RandomCropPolicy{1.0, true});
    CHECK(r.window.start == 0);
    CHECK(r.window.length == 24);
    CHECK(r.sample == s);
  }
}

TEST_CASE("a 20% crop of 80 frames has length 16 and a start uniform over [0, 64]") {
  std::mt19937_64 rng(11);
  std::map<int, int> starts;
  int overruns = 0;
  for (int i = 0; i < 300000; ++i) {
    const auto w = random_crop_window(80, rng, RandomCropPolicy{0.1, true});
    overruns += w.start + w.length > 80;
    if (w.length == 16) ++starts[w.start];
  }
  CHECK(overruns == 0);
  REQUIRE(starts.size() == 65);
  CHECK(starts.begin()->first == 0);
  CHECK(starts.rbegin()->first == 64);
  int lo = 1 << 30, hi = 0, n = 0;
  for (auto [s, c] : starts) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
    n += c;
  }
  // Each start expects n/65 hits; allow generous sampling noise.
  CHECK(lo > 0.5 * n / 65.0);
  CHECK(hi < 1.5 * n / 65.0);
}

TEST_CASE("random ratio is drawn from [min_ratio, 1] and random_start off pins the start") {
  std::mt19937_64 rng(5);
  double lo = 1, hi = 0;
  for (int i = 0; i < 5000; ++i) {
    const auto w = random_crop_window(40, rng, RandomCropPolicy{0.3, false});
    CHECK(w.start == 0);
    lo = std::min(lo, w.ratio);
    hi = std::max(hi, w.ratio);
    CHECK(w.length == crop_length(40, w.ratio));
  }
  CHECK(lo >= 0.3);
  CHECK(lo < 0.31);
  CHECK(hi <= 1.0);
  CHECK(hi > 0.99);
}

TEST_CASE("cropping preserves retained frames, labels and day offsets") {
  std::mt19937_64 rng(8);
  SitsSample s = zero_pad(random_sample(18, 2, 3, 3, 4, 8), 24, 15);
  for (int i = 0; i < 200; ++i) {
    const auto r = random_crop(s, rng, RandomCropPolicy{});
    const auto& w = r.window;
    const auto& c = r.sample;
    CHECK(c.labels == s.labels);
    CHECK(c.frames == w.length);
    for (int t = 0; t < w.length; ++t) {
      CHECK(c.day_offsets[t] == s.day_offsets[w.start + t]);
      CHECK(c.valid_mask[t] == s.valid_mask[w.start + t]);
    }
    CHECK(std::equal(c.values.begin(), c.values.end(), s.values.begin() + w.start * s.frame_size()));
  }
}

TEST_CASE("random crops are reproducible for a fixed seed") {
  const SitsSample s = random_sample(30, 1, 2, 2, 2, 9);
  std::mt19937_64 a(77), b(77);
  for (int i = 0; i < 100; ++i) CHECK(random_crop(s, a, {}).window == random_crop(s, b, {}).window);
}

TEST_CASE("sliding windows enumerate start x length cells") {
  const auto w80 = sliding_windows(80, 0.8, 0.1);
  REQUIRE(w80.size() == 3);
  CHECK(w80[0].start == 0);
  CHECK(w80[1].start == 8);
  CHECK(w80[2].start == 16);
  for (const auto& w : w80) CHECK(w.length == 64);

  const auto full = sliding_windows(24, 1.0, 0.1);
  REQUIRE(full.size() == 1);
  CHECK(full[0] == CropWindow{0, 24, 1.0});

  const auto w40 = sliding_windows(40, 0.2, 0.1);
  CHECK(w40.size() == 9);
  for (const auto& w : w40) CHECK(w.length == 8);

  // Cell counts of the multi-mode sweep table on an 80-frame series.
  CHECK(sliding_windows(80, 0.1, 0.1).size() == 10);
  CHECK(sliding_windows(80, 0.2, 0.1).size() == 9);
  CHECK(sliding_windows(80, 0.4, 0.1).size() == 7);
  CHECK(sliding_windows(80, 0.6, 0.1).size() == 5);
  // The window starting at 80% with length 10% covers 80%..90%.
  const auto w10 = sliding_windows(80, 0.1, 0.1);
  CHECK(w10[8].start == 64);
  CHECK(w10[8].start + w10[8].length == 72);
  CHECK_THROWS_AS(sliding_windows(80, 0.1, 0.0), InvalidInput);
}
