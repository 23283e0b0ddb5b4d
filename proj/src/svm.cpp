#include "mcdn/svm.hpp"

#include "mcdn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace mcdn {

void SvmConfig::validate() const {
  require(std::isfinite(lambda) && lambda > 0, "SvmConfig.lambda must be positive");
  require(iterations >= 2, "SvmConfig.iterations must be at least 2");
}

void LinearSvmModel::validate() const {
  const Index d = weights.size();
  require(d > 0, "LinearSvmModel: empty weight vector");
  require(featureMeans.size() == d && featureScales.size() == d,
          "LinearSvmModel: standardization constants do not match " + std::to_string(d) + " weights");
  require((featureScales.array() > 0.0f).all(), "LinearSvmModel: featureScales must be strictly positive");
}

double LinearSvmModel::margin(const Eigen::VectorXd& x) const {
  validate();
  if (x.size() != weights.size())
    throw ContractError("svm: feature vector has " + std::to_string(x.size()) + " entries, model expects " +
                        std::to_string(weights.size()));
  const Eigen::VectorXd z =
      (x - featureMeans.cast<double>()).cwiseQuotient(featureScales.cast<double>());
  return z.dot(weights.cast<double>()) + static_cast<double>(biasTerm);
}

namespace {

void check_training_set(const std::vector<Eigen::VectorXd>& x, const std::vector<int>& y) {
  require(x.size() >= 2, "train_svm: need at least two samples");
  require(x.size() == y.size(), "train_svm: feature and label counts differ");
  const Index d = x.front().size();
  require(d > 0, "train_svm: empty feature vectors");
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i].size() == d, "train_svm: sample " + std::to_string(i) + " has a different dimension");
    require(x[i].allFinite(), "train_svm: sample " + std::to_string(i) + " has non-finite features");
    require(y[i] == 0 || y[i] == 1, "train_svm: labels must be 0 or 1");
  }
}

}  // namespace

LinearSvmModel fit_linear_svm(const std::vector<Eigen::VectorXd>& x, const std::vector<int>& y,
                              const SvmConfig& config) {
  config.validate();
  check_training_set(x, y);
  const Index n = static_cast<Index>(x.size());
  const Index d = x.front().size();

  Eigen::MatrixXd data(n, d);
  for (Index i = 0; i < n; ++i) data.row(i) = x[static_cast<std::size_t>(i)].transpose();
  const Eigen::VectorXd mean = data.colwise().mean().transpose();
  Eigen::VectorXd scale = ((data.rowwise() - mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
  for (Index j = 0; j < d; ++j)
    if (!(scale(j) > 1e-12)) scale(j) = 1.0;

  LinearSvmModel model;
  model.featureMeans = mean.cast<float>();
  model.featureScales = scale.cast<float>();
  // Standardize with the stored single-precision constants so margins match inference.
  Eigen::MatrixXd z(n, d + 1);
  for (Index i = 0; i < n; ++i) {
    z.row(i).head(d) = (data.row(i).transpose() - model.featureMeans.cast<double>())
                           .cwiseQuotient(model.featureScales.cast<double>())
                           .transpose();
    z(i, d) = 1.0;
  }
  Eigen::VectorXd sign(n);
  for (Index i = 0; i < n; ++i) sign(i) = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;

  const double lambda = config.lambda;
  const double radius = 1.0 / std::sqrt(lambda);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(d + 1);
  const Index t_avg = config.iterations / 2;
  for (Index t = 1; t <= config.iterations; ++t) {
    const Eigen::VectorXd margins = sign.cwiseProduct(z * w);
    Eigen::VectorXd g = lambda * w;
    for (Index i = 0; i < n; ++i)
      if (margins(i) < 1.0) g -= (sign(i) / static_cast<double>(n)) * z.row(i).transpose();
    w -= g / (lambda * static_cast<double>(t));
    const double norm = w.norm();
    if (norm > radius) w *= radius / norm;
    if (t > t_avg) avg += w;
  }
  avg /= static_cast<double>(config.iterations - t_avg);
  model.weights = avg.head(d).cast<float>();
  model.biasTerm = static_cast<float>(avg(d));
  return model;
}

void calibrate_platt(LinearSvmModel& model, const std::vector<Eigen::VectorXd>& x, const std::vector<int>& y) {
  check_training_set(x, y);
  const auto pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double neg = static_cast<double>(y.size()) - pos;
  if (pos == 0 || neg == 0)
    throw CalibrationError("svm calibration needs both classes; training set holds only " +
                           std::string(pos == 0 ? "open" : "closure") + " samples");
  const double hi = (pos + 1.0) / (pos + 2.0);
  const double lo = 1.0 / (neg + 2.0);
  std::vector<double> f(x.size()), t(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    f[i] = model.margin(x[i]);
    t[i] = y[i] == 1 ? hi : lo;
  }
  // Newton with backtracking on F(A,B) = sum t*(Af+B) + log(1+exp(-(Af+B))).
  auto objective = [&](double a, double b) {
    double v = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double fa = f[i] * a + b;
      v += fa >= 0 ? t[i] * fa + std::log1p(std::exp(-fa)) : (t[i] - 1.0) * fa + std::log1p(std::exp(fa));
    }
    return v;
  };
  double a = 0.0;
  double b = std::log((neg + 1.0) / (pos + 1.0));
  double fval = objective(a, b);
  constexpr double sigma = 1e-12;
  for (int iter = 0; iter < 100; ++iter) {
    double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double fa = f[i] * a + b;
      double p, q;
      if (fa >= 0) {
        p = std::exp(-fa) / (1.0 + std::exp(-fa));
        q = 1.0 / (1.0 + std::exp(-fa));
      } else {
        p = 1.0 / (1.0 + std::exp(fa));
        q = std::exp(fa) / (1.0 + std::exp(fa));
      }
      const double d2 = p * q;
      h11 += f[i] * f[i] * d2;
      h22 += d2;
      h21 += f[i] * d2;
      const double d1 = t[i] - p;
      g1 += f[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    bool moved = false;
    while (step >= 1e-10) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) break;
  }
  model.plattA = static_cast<float>(a);
  model.plattB = static_cast<float>(b);
  model.calibrated = true;
}

LinearSvmModel train_svm(const std::vector<Eigen::VectorXd>& x, const std::vector<int>& y, const SvmConfig& config) {
  LinearSvmModel model = fit_linear_svm(x, y, config);
  calibrate_platt(model, x, y);
  return model;
}

double svm_probability(const LinearSvmModel& model, const Eigen::VectorXd& features) {
  if (!model.calibrated) throw ContractError("svm_probability: model is not calibrated");
  const double m = model.margin(features);
  return logistic(-(static_cast<double>(model.plattA) * m + static_cast<double>(model.plattB)));
}

double svm_probability(const LinearSvmModel& model, const ClinicalParams& params) {
  return svm_probability(model, params.as_vector());
}

double fuse_probabilities(double pDeep, double pClinical) {
  require(pDeep >= 0.0 && pDeep <= 1.0, "fuse_probabilities: pDeep outside [0,1]");
  require(pClinical >= 0.0 && pClinical <= 1.0, "fuse_probabilities: pClinical outside [0,1]");
  return 0.5 * (pDeep + pClinical);
}

}  // namespace mcdn
