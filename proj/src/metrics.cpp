#include "mcdn/metrics.hpp"

#include "mcdn/tensor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace mcdn {

namespace {

void check_inputs(const std::vector<double>& scores, const std::vector<int>& labels, const char* what) {
  require(!scores.empty(), std::string(what) + ": empty input");
  require(scores.size() == labels.size(), std::string(what) + ": " + std::to_string(scores.size()) +
                                              " scores for " + std::to_string(labels.size()) + " labels");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] == 0 || labels[i] == 1, std::string(what) + ": label at index " + std::to_string(i) + " is not 0/1");
    require(std::isfinite(scores[i]), std::string(what) + ": score at index " + std::to_string(i) + " is not finite");
  }
}

std::string fixed(double v, int digits = 4) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

ConfusionCounts confusion_at_threshold(const std::vector<double>& scores, const std::vector<int>& labels,
                                       double threshold) {
  check_inputs(scores, labels, "confusion_at_threshold");
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) (predicted ? c.tp : c.fn) += 1;
    else (predicted ? c.fp : c.tn) += 1;
  }
  return c;
}

Rates sen_spe_bacc(const ConfusionCounts& c) {
  require(c.tp >= 0 && c.tn >= 0 && c.fp >= 0 && c.fn >= 0, "sen_spe_bacc: negative count");
  require(c.total() > 0, "sen_spe_bacc: both classes absent");
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  const double sen = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : nan;
  const double spe = c.tn + c.fp > 0 ? static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp) : nan;
  return sen_spe_bacc(sen, spe);
}

Rates sen_spe_bacc(double sen, double spe) { return {sen, spe, 0.5 * (sen + spe)}; }

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_inputs(scores, labels, "roc_curve");
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  const auto neg = static_cast<long>(labels.size()) - pos;
  require(pos > 0 && neg > 0, "roc_curve: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.push_back({0.0, 0.0, scores[order.front()] + 1.0});
  long tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == t; ++i) (labels[order[i]] == 1 ? tp : fp) += 1;
    curve.push_back({static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos), t});
  }
  return curve;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) * 0.5;
  return area;
}

MethodResult evaluate_method(const std::string& method, const std::vector<double>& scores,
                             const std::vector<int>& labels) {
  MethodResult r;
  r.method = method;
  r.roc = roc_curve(scores, labels);
  r.auc = auc(r.roc);
  const long pos = std::count(labels.begin(), labels.end(), 1);
  const long neg = static_cast<long>(labels.size()) - pos;
  // B-Acc * 2 * pos * neg in integers, so equal B-Acc values compare equal.
  long best = -1;
  // Thresholds decrease along the curve, so >= keeps the lowest among ties.
  for (const auto& p : r.roc) {
    ConfusionCounts c;
    c.tp = std::lround(p.tpr * static_cast<double>(pos));
    c.fp = std::lround(p.fpr * static_cast<double>(neg));
    c.fn = pos - c.tp;
    c.tn = neg - c.fp;
    const long key = c.tp * neg + c.tn * pos;
    if (key >= best) {
      best = key;
      const Rates rates = sen_spe_bacc(c);
      r.bacc = rates.bacc;
      r.sen = rates.sen;
      r.spe = rates.spe;
      r.threshold = p.threshold;
    }
  }
  return r;
}

std::string results_csv(const std::vector<MethodResult>& rows) {
  std::ostringstream os;
  os << "method,auc,bacc,sen,spe\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    require(r.method.find_first_of(",\"\n\r") == std::string::npos,
            "results_csv: method name '" + r.method + "' contains a comma, quote or newline");
    os << r.method << ',' << r.auc << ',' << r.bacc << ',' << r.sen << ',' << r.spe << '\n';
  }
  return os.str();
}

std::string results_table(const std::vector<MethodResult>& rows) {
  std::size_t width = std::string("Method").size();
  for (const auto& r : rows) width = std::max(width, r.method.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "Method" << "  " << std::right << std::setw(7) << "AUC"
     << "  " << std::setw(10) << "B-Accuracy" << "  " << std::setw(11) << "Sensitivity" << "  " << std::setw(11)
     << "Specificity" << '\n';
  for (const auto& r : rows)
    os << std::left << std::setw(static_cast<int>(width)) << r.method << "  " << std::right << std::setw(7)
       << fixed(r.auc) << "  " << std::setw(10) << fixed(r.bacc) << "  " << std::setw(11) << fixed(r.sen) << "  "
       << std::setw(11) << fixed(r.spe) << '\n';
  return os.str();
}

std::string roc_csv(const RocCurve& curve) {
  std::ostringstream os;
  os << "fpr,tpr,threshold\n" << std::setprecision(17);
  for (const auto& p : curve) os << p.fpr << ',' << p.tpr << ',' << p.threshold << '\n';
  return os.str();
}

std::string roc_filename(const std::string& method) {
  std::string slug;
  bool gap = false;
  for (const unsigned char ch : method) {
    if (std::isalnum(ch)) {
      if (gap && !slug.empty()) slug += '_';
      slug += static_cast<char>(std::tolower(ch));
      gap = false;
    } else {
      gap = true;
    }
  }
  require(!slug.empty(), "roc_filename: method name '" + method + "' has no alphanumerics");
  return "roc_" + slug + ".csv";
}

void write_results(const std::vector<MethodResult>& rows, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string csv = results_csv(rows);
  std::vector<std::string> names;
  for (const auto& r : rows) {
    const std::string name = roc_filename(r.method);
    require(std::find(names.begin(), names.end(), name) == names.end(),
            "write_results: two methods map to " + name);
    names.push_back(name);
  }
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + p.string());
  };
  write(dir / "results.csv", csv);
  for (std::size_t i = 0; i < rows.size(); ++i) write(dir / names[i], roc_csv(rows[i].roc));
}

}  // namespace mcdn
