#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mcdn {

struct ConfusionCounts {
  long tp = 0, tn = 0, fp = 0, fn = 0;
  long total() const { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Positive iff score >= threshold.
ConfusionCounts confusion_at_threshold(const std::vector<double>& scores, const std::vector<int>& labels,
                                       double threshold);

/// Undefined ratios (no positives or no negatives) are NaN.
struct Rates {
  double sen = 0.0;
  double spe = 0.0;
  double bacc = 0.0;
};

Rates sen_spe_bacc(const ConfusionCounts& c);
Rates sen_spe_bacc(double sen, double spe);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

/// Starts at the sentinel threshold max(score) + 1 with (0,0); one point per
/// unique score in decreasing order, the last being (1,1).
using RocCurve = std::vector<RocPoint>;

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels);

/// Trapezoidal area over fpr.
double auc(const RocCurve& curve);

struct MethodResult {
  std::string method;
  double auc = 0.0;
  double bacc = 0.0;
  double sen = 0.0;
  double spe = 0.0;
  double threshold = 0.0;
  RocCurve roc;
};

/// Metrics at the B-Acc-maximizing curve threshold (ties: lowest threshold).
MethodResult evaluate_method(const std::string& method, const std::vector<double>& scores,
                             const std::vector<int>& labels);

/// `method,auc,bacc,sen,spe` with one row per method. Commas in names are rejected.
std::string results_csv(const std::vector<MethodResult>& rows);
std::string results_table(const std::vector<MethodResult>& rows);
std::string roc_csv(const RocCurve& curve);

/// `roc_<slug>.csv`, slug = lower-cased name with runs of other characters as '_'.
std::string roc_filename(const std::string& method);

/// Writes results.csv and one ROC file per method into `dir`.
void write_results(const std::vector<MethodResult>& rows, const std::filesystem::path& dir);

}  // namespace mcdn
