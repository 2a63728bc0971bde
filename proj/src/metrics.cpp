#include "ifgnet/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "ifgnet/error.hpp"

namespace ifgnet {

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : classes_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw ConfigError("confusion matrix needs at least one class");
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes, std::vector<std::uint64_t> counts)
    : classes_(classes), counts_(std::move(counts)) {
  if (classes == 0 || counts_.size() != classes * classes) {
    throw ShapeError("confusion matrix: expected " + std::to_string(classes * classes) + " cells");
  }
  for (auto c : counts_) total_ += c;
}

void ConfusionMatrix::accumulate(int true_label, int predicted_label) {
  const auto n = static_cast<int>(classes_);
  if (true_label < 0 || true_label >= n || predicted_label < 0 || predicted_label >= n) {
    throw ConfigError("confusion matrix: label pair (" + std::to_string(true_label) + ", " +
                      std::to_string(predicted_label) + ") outside [0, " + std::to_string(n) + ")");
  }
  ++counts_[static_cast<std::size_t>(true_label) * classes_ + static_cast<std::size_t>(predicted_label)];
  ++total_;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw ShapeError("confusion matrix: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < classes_; ++p) s += at(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t predicted) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < classes_; ++t) s += at(t, predicted);
  return s;
}

Scores oa_aa_kappa(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ConfigError("metrics: empty confusion matrix");
  const std::size_t n = cm.classes();
  const double total = static_cast<double>(cm.total());
  Scores s;
  s.per_class.assign(n, std::numeric_limits<double>::quiet_NaN());
  double trace = 0.0;
  double chance = 0.0;
  double recall_sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < n; ++c) {
    trace += static_cast<double>(cm.at(c, c));
    const double row = static_cast<double>(cm.row_sum(c));
    chance += row * static_cast<double>(cm.col_sum(c));
    if (row > 0.0) {
      s.per_class[c] = static_cast<double>(cm.at(c, c)) / row;
      recall_sum += s.per_class[c];
      ++counted;
    } else {
      s.excluded_classes.push_back(static_cast<int>(c));
    }
  }
  s.oa = trace / total;
  s.aa = recall_sum / static_cast<double>(counted);
  const double p_e = chance / (total * total);
  // p_e == 1 only when every sample sits in one cell; agreement is then total.
  s.kappa = p_e < 1.0 ? (s.oa - p_e) / (1.0 - p_e) : 1.0;
  return s;
}

namespace {

std::string pct(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

std::string format_report_table(const Scores& scores) {
  std::ostringstream os;
  os << "Class    Accuracy (%)\n";
  for (std::size_t c = 0; c < scores.per_class.size(); ++c) {
    char line[64];
    std::snprintf(line, sizeof line, "%-8zu %s\n", c + 1, pct(scores.per_class[c]).c_str());
    os << line;
  }
  os << "-----------------------\n";
  os << "OA       " << pct(scores.oa) << "\n";
  os << "AA       " << pct(scores.aa) << "\n";
  os << "Kappa    " << pct(scores.kappa) << "\n";
  if (!scores.excluded_classes.empty()) {
    os << "warning: classes without test samples excluded from AA:";
    for (int c : scores.excluded_classes) os << ' ' << c + 1;
    os << "\n";
  }
  return os.str();
}

std::string format_report_kv(const Scores& scores) {
  std::ostringstream os;
  os << "oa=" << pct(scores.oa) << "\n";
  os << "aa=" << pct(scores.aa) << "\n";
  os << "kappa=" << pct(scores.kappa) << "\n";
  for (std::size_t c = 0; c < scores.per_class.size(); ++c) {
    os << "class_" << c + 1 << "=" << pct(scores.per_class[c]) << "\n";
  }
  os << "excluded=";
  for (std::size_t i = 0; i < scores.excluded_classes.size(); ++i) {
    os << (i ? "," : "") << scores.excluded_classes[i] + 1;
  }
  os << "\n";
  return os.str();
}

}  // namespace ifgnet
