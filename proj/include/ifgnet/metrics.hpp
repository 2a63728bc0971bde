#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ifgnet {

// Rows are true classes, columns predictions (both 0-based).
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);
  ConfusionMatrix(std::size_t classes, std::vector<std::uint64_t> counts);

  void accumulate(int true_label, int predicted_label);
  // Cell-wise addition; matrices must have the same class count.
  void merge(const ConfusionMatrix& other);

  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * classes_ + predicted];
  }
  std::uint64_t total() const { return total_; }
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t col_sum(std::size_t predicted) const;
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

struct Scores {
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  // Recall per class; NaN for classes with no samples.
  std::vector<double> per_class;
  // Classes left out of AA because their row is empty.
  std::vector<int> excluded_classes;
};

// oa = trace / total, aa = mean per-class recall over nonempty rows,
// kappa = (oa - p_e) / (1 - p_e), p_e = sum_c row_c col_c / total^2.
Scores oa_aa_kappa(const ConfusionMatrix& cm);

// Table I style report, percentages with two decimals.
std::string format_report_table(const Scores& scores);
// key=value lines: oa, aa, kappa, class_<k>, excluded.
std::string format_report_kv(const Scores& scores);

}  // namespace ifgnet
