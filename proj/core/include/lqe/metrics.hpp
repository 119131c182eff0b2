#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lqe {

/// K x K counts, rows = true grade, columns = predicted grade.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);
  static ConfusionMatrix from_labels(std::span<const int> truth, std::span<const int> pred, int num_classes);

  void add(int truth, int pred, std::int64_t count = 1);
  std::int64_t at(int truth, int pred) const { return counts_[static_cast<std::size_t>(truth) * k_ + pred]; }
  int num_classes() const noexcept { return k_; }
  std::int64_t total() const noexcept;
  std::int64_t trace() const noexcept;
  ConfusionMatrix transposed() const;

 private:
  int k_;
  std::vector<std::int64_t> counts_;
};

/// 1 - sum(w O) / sum(w E) with w_ij = (i-j)^2/(K-1)^2. Returns 1 when both
/// weighted disagreements are zero. Throws InvalidInput on an empty matrix.
double quadratic_weighted_kappa(const ConfusionMatrix& cm);
double accuracy(const ConfusionMatrix& cm);

struct PrecisionRecall {
  std::vector<double> precision;  // per class, 0 when never predicted
  std::vector<double> recall;     // per class, 0 when never present
  double macro_precision = 0.0;
  double macro_recall = 0.0;
};

PrecisionRecall macro_precision_recall(const ConfusionMatrix& cm);

/// One evaluated image.
struct SampleLog {
  std::string id;
  int true_grade = 0;
  int pred_grade = 0;
  std::vector<double> probs;
  std::vector<double> pi_hat;
  std::vector<double> strength;
  double u_mean = 0.0;

  bool correct() const noexcept { return true_grade == pred_grade; }
};

/// Single-line JSON object with keys id, true_grade, pred_grade, P, pi_hat, S, u_mean.
std::string to_json_line(const SampleLog& log);

struct UncertaintySplit {
  std::optional<double> correct;
  std::optional<double> incorrect;
  std::size_t n_correct = 0;
  std::size_t n_incorrect = 0;
};

UncertaintySplit uncertainty_split(std::span<const SampleLog> logs);

struct TriageRow {
  double threshold = 0.0;
  std::size_t auto_count = 0;
  double auto_fraction = 0.0;
  std::optional<double> auto_accuracy;
};

/// Auto-report set at u* = { logs with u_mean <= u* }. Thresholds must be ascending.
std::vector<TriageRow> triage_sweep(std::span<const SampleLog> logs, std::span<const double> thresholds);
std::vector<double> default_triage_thresholds();

struct EvalReport {
  int num_classes = 0;
  std::size_t num_samples = 0;
  double accuracy = 0.0;
  double qwk = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  double u_mean_overall = 0.0;
  std::optional<double> u_mean_correct;
  std::optional<double> u_mean_incorrect;
  std::vector<TriageRow> triage;
  std::vector<std::vector<std::int64_t>> confusion;
};

EvalReport build_report(std::span<const SampleLog> logs, int num_classes,
                        std::span<const double> triage_thresholds);

std::string report_table(const EvalReport& report);
std::string report_json(const EvalReport& report);
std::string triage_csv(const std::vector<TriageRow>& rows);

}  // namespace lqe
