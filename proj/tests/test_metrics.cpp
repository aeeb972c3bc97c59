#include "helpers.hpp"

#include "tea/errors.hpp"
#include "tea/metrics.hpp"

#include <doctest.h>

#include <numeric>
#include <sstream>

using namespace tea;

namespace {

const std::vector<double> kRatios{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
// Published per-ratio mIoU rows (percent).
const std::vector<double> kPastisTea{21.5, 26.22, 28.43, 32.70, 37.57, 45.82, 56.45, 65.36, 66.37, 66.77};
const std::vector<double> kPastisBaseline{3.81, 5.60, 6.10, 6.48, 11.20, 20.34, 34.42, 56.46, 62.65, 64.08};
const std::vector<double> kGermanyTea{2.49, 30.25, 34.64, 46.92, 66.87, 72.20, 84.18, 85.69, 86.24, 86.36};

}  // namespace

TEST_CASE("published ladder rows reproduce their mmIoU and LDIoU") {
  CHECK(std::abs(ldiou(kPastisTea, kRatios) - 33.36) <= 0.01);
  CHECK(std::abs(mmiou(kPastisTea) - 44.72) <= 0.01);
  CHECK(std::abs(ldiou(kPastisBaseline, kRatios) - 14.08) <= 0.01);
  CHECK(std::abs(mmiou(kPastisBaseline) - 27.11) <= 0.01);
  CHECK(std::abs(ldiou(kGermanyTea, kRatios) - 36.62) <= 0.01);
  CHECK(std::abs(mmiou(kGermanyTea) - 59.58) <= 0.01);
}

TEST_CASE("confusion matrix arithmetic") {
  ConfusionMatrix cm(2);
  cm.add(0, 0, 2);
  cm.add(0, 1, 2);
  cm.add(1, 1, 4);
  CHECK(cm.total() == 8);
  CHECK(miou(cm) == doctest::Approx((2.0 / 4 + 4.0 / 6) / 2));
  CHECK(miou(cm) == doctest::Approx(0.5833).epsilon(1e-4));

  ConfusionMatrix perfect(3);
  perfect.add({0, 1, 2, 2}, {0, 1, 2, 2});
  CHECK(miou(perfect) == 1.0);

  // Class 2 never appears: excluded, not counted as zero.
  ConfusionMatrix absent(3);
  absent.add({0, 0, 1}, {0, 1, 1});
  const auto iou = absent.class_iou();
  CHECK(std::isnan(iou[2]));
  CHECK(miou(absent) == doctest::Approx((0.5 + 0.5) / 2));

  CHECK_THROWS(miou(ConfusionMatrix(2)));
  CHECK_THROWS(cm.add(2, 0));
  CHECK_THROWS(cm.add(std::vector<int>{0}, std::vector<int>{0, 1}));
}

TEST_CASE("merging confusion matrices sums entries") {
  std::mt19937_64 rng(1);
  ConfusionMatrix a(4), b(4), all(4);
  for (int i = 0; i < 500; ++i) {
    const int t = static_cast<int>(rng() % 4), p = static_cast<int>(rng() % 4);
    (i % 2 ? a : b).add(t, p);
    all.add(t, p);
  }
  a.merge(b);
  CHECK(a == all);
  CHECK_THROWS(a.merge(ConfusionMatrix(3)));
}

TEST_CASE("mIoU is invariant to consistent class relabeling") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int K = 2 + static_cast<int>(rng() % 5);
    std::vector<int> perm(static_cast<std::size_t>(K));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> t(200), p(200), tp(200), pp(200);
    for (int i = 0; i < 200; ++i) {
      t[i] = static_cast<int>(rng() % K);
      p[i] = rng() % 3 ? t[i] : static_cast<int>(rng() % K);
      tp[i] = perm[t[i]];
      pp[i] = perm[p[i]];
    }
    ConfusionMatrix a(K), b(K);
    a.add(t, p);
    b.add(tp, pp);
    CHECK(miou(a) == doctest::Approx(miou(b)).epsilon(1e-12));
  }
}

TEST_CASE("length-decay weights: sum to one, scale-free, convex bounds") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1), tau(0.01, 10);
  int sum_ok = 0, scale_ok = 0, bounds_ok = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<double> m(n), lengths(n), scaled(n);
    const double c = tau(rng);
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = u(rng);
      lengths[i] = tau(rng);
      scaled[i] = lengths[i] * c;
    }
    const auto w = length_decay_weights(lengths);
    sum_ok += std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) < 1e-12;
    const double l = ldiou(m, lengths);
    scale_ok += std::abs(l - ldiou(m, scaled)) < 1e-12;
    bounds_ok += l >= *std::min_element(m.begin(), m.end()) - 1e-12 && l <= *std::max_element(m.begin(), m.end()) + 1e-12;
  }
  CHECK(sum_ok == 1000);
  CHECK(scale_ok == 1000);
  CHECK(bounds_ok == 1000);
}

TEST_CASE("constant ladders and non-decreasing ladders") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> m(kRatios.size());
    for (auto& v : m) v = std::uniform_real_distribution<double>(0, 1)(rng);
    std::sort(m.begin(), m.end());
    CHECK(ldiou(m, kRatios) <= mmiou(m) + 1e-12);
    const std::vector<double> flat(kRatios.size(), m[3]);
    CHECK(ldiou(flat, kRatios) == doctest::Approx(m[3]).epsilon(1e-12));
  }
  CHECK(mmiou({0.42}) == 0.42);
  CHECK_THROWS(mmiou({}));
  CHECK_THROWS(ldiou({0.1, 0.2}, {0.5}));
  CHECK_THROWS(length_decay_weights({0.5, 0.0}));
}

TEST_CASE("reports round-trip through JSON and render as CSV and tables") {
  EvalReport r;
  r.ratios = kRatios;
  for (double v : kPastisTea) r.per_ratio_miou.push_back(v / 100);
  finalize_report(r);
  CHECK(r.ldiou == doctest::Approx(ldiou(r.per_ratio_miou, r.ratios)));
  r.sweep = {{0.0, 0.1, 0.25}, {0.1, 0.1, 0.3}};
  CHECK(report_from_json(report_to_json(r)) == r);

  tea::testing::ScratchDir dir("metrics");
  const std::string path = (dir.path() / "report.json").string();
  save_report(r, path);
  CHECK(load_report(path) == r);

  const std::string csv = report_to_csv(r);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "kind,start,length,miou");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 10 + 2 + 2);

  const std::string table = report_to_table(r, "tea");
  CHECK(table.find("33.36") != std::string::npos);
  CHECK(table.find("44.72") != std::string::npos);
  CHECK_THROWS(report_from_json("{\"ratios\": [0.1]}"));
}
