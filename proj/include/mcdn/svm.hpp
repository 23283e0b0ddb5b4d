#pragma once

#include "mcdn/anterior.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <vector>

namespace mcdn {

struct SvmConfig {
  double lambda = 0.01;
  Index iterations = 2000;
  void validate() const;
};

/// Linear SVM over standardized features with a Platt sigmoid on its margin.
/// Parameters are single precision so the model container round-trips bitwise.
struct LinearSvmModel {
  Eigen::VectorXf weights;
  float biasTerm = 0.0f;
  float plattA = 0.0f;  // P(closure | m) = 1 / (1 + exp(plattA * m + plattB)), plattA < 0
  float plattB = 0.0f;
  bool calibrated = false;
  Eigen::VectorXf featureMeans;
  Eigen::VectorXf featureScales;

  Index dimension() const { return weights.size(); }
  void validate() const;
  double margin(const Eigen::VectorXd& features) const;
};

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Standardizes by the training mean and population deviation (1 for constant
/// features), then minimizes lambda/2 |[w,b]|^2 + mean hinge by full-batch Pegasos
/// subgradient steps (eta_t = 1/(lambda t), projected onto the 1/sqrt(lambda)
/// ball). Returns the average of the second-half iterates. Uncalibrated.
LinearSvmModel fit_linear_svm(const std::vector<Eigen::VectorXd>& features, const std::vector<int>& labels,
                              const SvmConfig& config = {});

/// Fits plattA/plattB by Newton's method on the regularized-target logistic
/// likelihood of the training margins. Throws CalibrationError on one class.
void calibrate_platt(LinearSvmModel& model, const std::vector<Eigen::VectorXd>& features,
                     const std::vector<int>& labels);

/// fit_linear_svm followed by calibrate_platt.
LinearSvmModel train_svm(const std::vector<Eigen::VectorXd>& features, const std::vector<int>& labels,
                         const SvmConfig& config = {});

double svm_probability(const LinearSvmModel& model, const Eigen::VectorXd& features);
double svm_probability(const LinearSvmModel& model, const ClinicalParams& params);

/// Arithmetic mean of two probabilities.
double fuse_probabilities(double pDeep, double pClinical);

}  // namespace mcdn
