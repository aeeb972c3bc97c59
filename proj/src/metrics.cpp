#include "tea/metrics.hpp"

#include "tea/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace tea {
using json = nlohmann::json;

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : k_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
  if (num_classes < 0) throw InvalidInput("ConfusionMatrix: negative class count");
}

std::size_t ConfusionMatrix::index(int truth, int predicted) const {
  if (truth < 0 || truth >= k_ || predicted < 0 || predicted >= k_)
    throw InvalidInput("ConfusionMatrix: class index out of range");
  return static_cast<std::size_t>(truth) * k_ + predicted;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

void ConfusionMatrix::add(int truth, int predicted, std::uint64_t count) { counts_[index(truth, predicted)] += count; }

void ConfusionMatrix::add(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size()) throw InvalidInput("ConfusionMatrix: label/prediction size mismatch");
  for (std::size_t i = 0; i < truth.size(); ++i) add(truth[i], predicted[i]);
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw InvalidInput("ConfusionMatrix: cannot merge different class counts");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::vector<double> ConfusionMatrix::class_iou() const {
  std::vector<double> iou(static_cast<std::size_t>(k_), std::numeric_limits<double>::quiet_NaN());
  for (int c = 0; c < k_; ++c) {
    std::uint64_t row = 0, col = 0;
    for (int j = 0; j < k_; ++j) {
      row += at(c, j);
      col += at(j, c);
    }
    const std::uint64_t tp = at(c, c);
    const std::uint64_t uni = row + col - tp;
    if (uni > 0) iou[static_cast<std::size_t>(c)] = static_cast<double>(tp) / static_cast<double>(uni);
  }
  return iou;
}

double miou(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw InvalidInput("miou: empty confusion matrix");
  double sum = 0;
  int n = 0;
  for (double v : cm.class_iou()) {
    if (std::isnan(v)) continue;
    sum += v;
    ++n;
  }
  return sum / n;
}

std::vector<double> length_decay_weights(const std::vector<double>& lengths) {
  if (lengths.empty()) throw InvalidInput("length_decay_weights: no lengths");
  double norm = 0;
  for (double tau : lengths) {
    if (!(tau > 0)) throw InvalidInput("length_decay_weights: lengths must be positive");
    norm += 1.0 / tau;
  }
  std::vector<double> w;
  w.reserve(lengths.size());
  for (double tau : lengths) w.push_back((1.0 / tau) / norm);
  return w;
}

double ldiou(const std::vector<double>& per_ratio_miou, const std::vector<double>& lengths) {
  if (per_ratio_miou.size() != lengths.size()) throw InvalidInput("ldiou: mIoU and length lists differ in size");
  const auto w = length_decay_weights(lengths);
  double out = 0;
  for (std::size_t j = 0; j < w.size(); ++j) out += w[j] * per_ratio_miou[j];
  return out;
}

double mmiou(const std::vector<double>& per_ratio_miou) {
  if (per_ratio_miou.empty()) throw InvalidInput("mmiou: empty list");
  return std::accumulate(per_ratio_miou.begin(), per_ratio_miou.end(), 0.0) / static_cast<double>(per_ratio_miou.size());
}

void finalize_report(EvalReport& r) {
  r.mmiou = mmiou(r.per_ratio_miou);
  r.ldiou = ldiou(r.per_ratio_miou, r.ratios);
}

std::string report_to_json(const EvalReport& r) {
  json j;
  j["ratios"] = r.ratios;
  j["per_ratio_miou"] = r.per_ratio_miou;
  j["mmiou"] = r.mmiou;
  j["ldiou"] = r.ldiou;
  json cells = json::array();
  for (const auto& c : r.sweep) cells.push_back({{"start", c.start}, {"length", c.length}, {"miou", c.miou}});
  j["sweep"] = cells;
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  EvalReport r;
  try {
    json j = json::parse(text);
    r.ratios = j.at("ratios").get<std::vector<double>>();
    r.per_ratio_miou = j.at("per_ratio_miou").get<std::vector<double>>();
    r.mmiou = j.at("mmiou").get<double>();
    r.ldiou = j.at("ldiou").get<double>();
    if (j.contains("sweep")) {
      for (const auto& c : j.at("sweep"))
        r.sweep.push_back({c.at("start").get<double>(), c.at("length").get<double>(), c.at("miou").get<double>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("eval report: ") + e.what());
  }
  if (r.ratios.size() != r.per_ratio_miou.size()) throw ParseError("eval report: ratios and mIoU lists differ");
  return r;
}

void save_report(const EvalReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(path + ": cannot write");
  out << report_to_json(r) << "\n";
}

EvalReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return report_from_json(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string report_to_csv(const EvalReport& r) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "kind,start,length,miou\n";
  for (std::size_t i = 0; i < r.ratios.size(); ++i) out << "ratio,0," << r.ratios[i] << "," << r.per_ratio_miou[i] << "\n";
  for (const auto& c : r.sweep) out << "sweep," << c.start << "," << c.length << "," << c.miou << "\n";
  if (!r.ratios.empty()) {
    out << "mmiou,,," << r.mmiou << "\n";
    out << "ldiou,,," << r.ldiou << "\n";
  }
  return out.str();
}

std::string report_to_table(const EvalReport& r, const std::string& label) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  const int w = 8;
  out << std::left << std::setw(12) << "method" << std::right;
  for (double ratio : r.ratios) out << std::setw(w) << (std::to_string(static_cast<int>(std::lround(ratio * 100))) + "%");
  out << std::setw(w) << "mmIoU" << std::setw(w) << "LDIoU" << "\n";
  out << std::left << std::setw(12) << label << std::right;
  for (double m : r.per_ratio_miou) out << std::setw(w) << m * 100;
  out << std::setw(w) << r.mmiou * 100 << std::setw(w) << r.ldiou * 100 << "\n";
  if (!r.sweep.empty()) {
    out << "\nsliding windows (rows: length, columns: start)\n";
    std::map<double, std::vector<SweepCell>> rows;
    for (const auto& c : r.sweep) rows[c.length].push_back(c);
    for (const auto& [length, cells] : rows) {
      out << std::left << std::setw(12) << (std::to_string(static_cast<int>(std::lround(length * 100))) + "%")
          << std::right;
      for (const auto& c : cells) out << std::setw(w) << c.miou * 100;
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace tea
