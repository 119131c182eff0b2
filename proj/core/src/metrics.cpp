#include "lqe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "lqe/error.hpp"

namespace lqe {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : k_(num_classes), counts_(static_cast<std::size_t>(std::max(num_classes, 0)) * std::max(num_classes, 0), 0) {
  if (num_classes < 2) throw InvalidInput("confusion matrix needs at least two classes");
}

ConfusionMatrix ConfusionMatrix::from_labels(std::span<const int> truth, std::span<const int> pred,
                                             int num_classes) {
  if (truth.size() != pred.size()) throw InvalidInput("label and prediction counts differ");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], pred[i]);
  return cm;
}

void ConfusionMatrix::add(int truth, int pred, std::int64_t count) {
  if (truth < 0 || truth >= k_ || pred < 0 || pred >= k_) throw InvalidInput("grade outside confusion matrix");
  if (count < 0) throw InvalidInput("negative count");
  counts_[static_cast<std::size_t>(truth) * k_ + pred] += count;
}

std::int64_t ConfusionMatrix::total() const noexcept {
  std::int64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

std::int64_t ConfusionMatrix::trace() const noexcept {
  std::int64_t s = 0;
  for (int i = 0; i < k_; ++i) s += at(i, i);
  return s;
}

ConfusionMatrix ConfusionMatrix::transposed() const {
  ConfusionMatrix t(k_);
  for (int i = 0; i < k_; ++i)
    for (int j = 0; j < k_; ++j) t.add(j, i, at(i, j));
  return t;
}

double quadratic_weighted_kappa(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total <= 0) throw InvalidInput("quadratic_weighted_kappa on an empty confusion matrix");
  const int k = cm.num_classes();
  const double n = static_cast<double>(total);
  std::vector<double> rows(k, 0.0), cols(k, 0.0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      rows[i] += static_cast<double>(cm.at(i, j)) / n;
      cols[j] += static_cast<double>(cm.at(i, j)) / n;
    }
  const double norm = static_cast<double>(k - 1) * (k - 1);
  double observed = 0.0, expected = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const double w = static_cast<double>((i - j) * (i - j)) / norm;
      observed += w * static_cast<double>(cm.at(i, j)) / n;
      expected += w * rows[i] * cols[j];
    }
  if (expected == 0.0) return observed == 0.0 ? 1.0 : 0.0;
  return 1.0 - observed / expected;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total <= 0) throw InvalidInput("accuracy on an empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

PrecisionRecall macro_precision_recall(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) throw InvalidInput("precision/recall on an empty confusion matrix");
  const int k = cm.num_classes();
  PrecisionRecall pr;
  pr.precision.assign(k, 0.0);
  pr.recall.assign(k, 0.0);
  for (int c = 0; c < k; ++c) {
    std::int64_t predicted = 0, actual = 0;
    for (int i = 0; i < k; ++i) {
      predicted += cm.at(i, c);
      actual += cm.at(c, i);
    }
    if (predicted > 0) pr.precision[c] = static_cast<double>(cm.at(c, c)) / static_cast<double>(predicted);
    if (actual > 0) pr.recall[c] = static_cast<double>(cm.at(c, c)) / static_cast<double>(actual);
  }
  for (int c = 0; c < k; ++c) {
    pr.macro_precision += pr.precision[c] / k;
    pr.macro_recall += pr.recall[c] / k;
  }
  return pr;
}

std::string to_json_line(const SampleLog& log) {
  nlohmann::ordered_json j;
  j["id"] = log.id;
  j["true_grade"] = log.true_grade;
  j["pred_grade"] = log.pred_grade;
  j["P"] = log.probs;
  j["pi_hat"] = log.pi_hat;
  j["S"] = log.strength;
  j["u_mean"] = log.u_mean;
  return j.dump();
}

UncertaintySplit uncertainty_split(std::span<const SampleLog> logs) {
  if (logs.empty()) throw InvalidInput("uncertainty_split needs at least one log");
  UncertaintySplit s;
  double sc = 0.0, si = 0.0;
  for (const SampleLog& l : logs) {
    if (l.correct()) {
      sc += l.u_mean;
      ++s.n_correct;
    } else {
      si += l.u_mean;
      ++s.n_incorrect;
    }
  }
  if (s.n_correct) s.correct = sc / static_cast<double>(s.n_correct);
  if (s.n_incorrect) s.incorrect = si / static_cast<double>(s.n_incorrect);
  return s;
}

std::vector<TriageRow> triage_sweep(std::span<const SampleLog> logs, std::span<const double> thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw InvalidInput("triage thresholds must be sorted ascending");
  }
  std::vector<TriageRow> rows;
  for (double u : thresholds) {
    TriageRow r;
    r.threshold = u;
    std::size_t hits = 0;
    for (const SampleLog& l : logs) {
      if (l.u_mean <= u) {
        ++r.auto_count;
        hits += l.correct();
      }
    }
    r.auto_fraction = logs.empty() ? 0.0 : static_cast<double>(r.auto_count) / static_cast<double>(logs.size());
    if (r.auto_count) r.auto_accuracy = static_cast<double>(hits) / static_cast<double>(r.auto_count);
    rows.push_back(r);
  }
  return rows;
}

std::vector<double> default_triage_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 20; ++i) t.push_back(i * 0.05);
  return t;
}

EvalReport build_report(std::span<const SampleLog> logs, int num_classes,
                        std::span<const double> triage_thresholds) {
  if (logs.empty()) throw InvalidInput("cannot build a report from zero samples");
  ConfusionMatrix cm(num_classes);
  double u_sum = 0.0;
  for (const SampleLog& l : logs) {
    cm.add(l.true_grade, l.pred_grade);
    u_sum += l.u_mean;
  }
  EvalReport r;
  r.num_classes = num_classes;
  r.num_samples = logs.size();
  r.accuracy = accuracy(cm);
  r.qwk = quadratic_weighted_kappa(cm);
  const PrecisionRecall pr = macro_precision_recall(cm);
  r.macro_precision = pr.macro_precision;
  r.macro_recall = pr.macro_recall;
  r.precision = pr.precision;
  r.recall = pr.recall;
  r.u_mean_overall = u_sum / static_cast<double>(logs.size());
  const UncertaintySplit split = uncertainty_split(logs);
  r.u_mean_correct = split.correct;
  r.u_mean_incorrect = split.incorrect;
  r.triage = triage_sweep(logs, triage_thresholds);
  r.confusion.assign(num_classes, std::vector<std::int64_t>(num_classes, 0));
  for (int i = 0; i < num_classes; ++i)
    for (int j = 0; j < num_classes; ++j) r.confusion[i][j] = cm.at(i, j);
  return r;
}

namespace {

std::string fmt_opt(const std::optional<double>& v, int precision = 4) {
  if (!v) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << *v;
  return os.str();
}

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string report_table(const EvalReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "samples            " << r.num_samples << '\n'
     << "accuracy           " << r.accuracy << '\n'
     << "qwk                " << r.qwk << '\n'
     << "macro precision    " << r.macro_precision << '\n'
     << "macro recall       " << r.macro_recall << '\n'
     << "u_mean (all)       " << r.u_mean_overall << '\n'
     << "u_mean (correct)   " << fmt_opt(r.u_mean_correct) << '\n'
     << "u_mean (incorrect) " << fmt_opt(r.u_mean_incorrect) << '\n';
  os << "\ngrade  precision  recall\n";
  for (int c = 0; c < r.num_classes; ++c) {
    os << std::setw(5) << c << "  " << std::setw(9) << r.precision[c] << "  " << std::setw(6) << r.recall[c] << '\n';
  }
  os << "\nconfusion (rows = true, cols = predicted)\n";
  for (const auto& row : r.confusion) {
    for (auto v : row) os << std::setw(6) << v;
    os << '\n';
  }
  return os.str();
}

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["num_samples"] = r.num_samples;
  j["num_classes"] = r.num_classes;
  j["accuracy"] = r.accuracy;
  j["qwk"] = r.qwk;
  j["macro_precision"] = r.macro_precision;
  j["macro_recall"] = r.macro_recall;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["u_mean_overall"] = r.u_mean_overall;
  j["u_mean_correct"] = opt_json(r.u_mean_correct);
  j["u_mean_incorrect"] = opt_json(r.u_mean_incorrect);
  j["confusion"] = r.confusion;
  auto& triage = j["triage"] = nlohmann::ordered_json::array();
  for (const TriageRow& t : r.triage) {
    triage.push_back({{"u_threshold", t.threshold},
                      {"auto_count", t.auto_count},
                      {"auto_fraction", t.auto_fraction},
                      {"auto_accuracy", opt_json(t.auto_accuracy)}});
  }
  return j.dump(2);
}

std::string triage_csv(const std::vector<TriageRow>& rows) {
  std::ostringstream os;
  os << "u_threshold,auto_count,auto_fraction,auto_accuracy\n";
  os << std::setprecision(10);
  for (const TriageRow& t : rows) {
    os << t.threshold << ',' << t.auto_count << ',' << t.auto_fraction << ',';
    if (t.auto_accuracy) os << *t.auto_accuracy;
    os << '\n';
  }
  return os.str();
}

}  // namespace lqe
