#pragma once

#include "mcdn/dataset.hpp"
#include "mcdn/metrics.hpp"
#include "mcdn/serialize.hpp"
#include "mcdn/train.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mcdn {

struct ScreeningResult {
  double pFused = 0.0;
  double pDeep = 0.0;
  std::optional<double> pClinical;
  AcaLocation aca;
  std::optional<ClinicalParams> clinical;
  bool degraded = false;
  std::string degradation;  // why, when degraded
};

/// locate_aca -> crop -> clinical parameters -> both probabilities -> fusion. If the
/// anatomy cannot be segmented the patch is taken at the image center, pClinical
/// is omitted and pFused = pDeep.
ScreeningResult screen_sample(const McdnModel<float>& mcdn, const LinearSvmModel& svm, const Image& aca_image);

/// A dataset sample after localization and clinical measurement.
struct PreparedSample {
  LabeledSample sample;
  std::optional<ClinicalParams> clinical;
  bool localized = false;
};

/// Runs the analysis front end on every record of `split`, in manifest order.
std::vector<PreparedSample> prepare_split(const Dataset& dataset, Split split, unsigned threads = 1);

struct PipelineConfig {
  StreamConfig globalStream;
  StreamConfig localStream;
  TrainConfig train;
  bool trainAblations = true;  // separately trained single-stream models
};

struct PipelineTrainResult {
  ScreeningBundle bundle;
  std::vector<double> lossTrace;  // of the two-stream MCDN
  std::vector<std::string> warnings;
};

/// SVM on the clinical parameters of localized samples, then the MCDN (and the
/// single-stream ablations) on all samples.
PipelineTrainResult train_pipeline(const std::vector<PreparedSample>& train, const PipelineConfig& config);

/// Method names in results order.
inline const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names{"Global Image", "Local Region", "Clinical Parameter", "Our MCDN w/o CP",
                                              "Our MCDN"};
  return names;
}

struct VariantScores {
  std::vector<int> labels;
  std::vector<std::vector<double>> scores;  // parallel to variant_names()
};

/// Per-sample scores of every variant. Samples without clinical parameters get
/// pClinical 0.5 and a fused score equal to the deep score.
VariantScores score_variants(const ScreeningBundle& bundle, const std::vector<PreparedSample>& samples,
                             unsigned threads = 1);

std::vector<MethodResult> evaluate_variants(const VariantScores& scores);

}  // namespace mcdn
