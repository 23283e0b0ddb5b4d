#pragma once

#include "mcdn/augment.hpp"
#include "mcdn/mcdn_model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mcdn {

struct TrainConfig {
  double learningRate = 0.01;
  double momentumCoeff = 0.9;
  Index batchSize = 8;
  Index iterationCount = 200;
  std::uint64_t rngSeed = 1;
  double svmRegularization = 0.01;
  bool classWeighting = false;  // inverse class frequency loss weights
  AugmentConfig augment;

  void validate() const;
};

/// Stream inputs for one batch of samples.
struct BatchInputs {
  TensorF global;  // (N,1,gs,gs)
  TensorF local;   // (N,1,ls,ls)
};

/// Whole image resized for the global stream; the 120 px patch at `aca` resized
/// for the local stream. Unused streams get a 1x1 placeholder.
void write_sample_inputs(const McdnModel<float>& model, const Image& global, const Image& patch, BatchInputs& batch,
                         Index slot);
BatchInputs allocate_inputs(const McdnModel<float>& model, Index batch);

struct TrainResult {
  McdnModel<float> model;
  std::vector<double> lossTrace;  // one mean minibatch loss per iteration
  std::vector<std::string> warnings;
};

/// Minibatch SGD with momentum on the augmented expansion of `samples`. Batches are
/// consecutive slices of a per-epoch shuffle drawn from mt19937_64(rngSeed).
TrainResult train_mcdn(McdnModel<float> model, const std::vector<LabeledSample>& samples, const TrainConfig& config);

/// Inference-mode probabilities, one per (image, aca). `threads` > 1 fans out over
/// fixed contiguous chunks; results do not depend on the thread count.
std::vector<double> predict_mcdn(const McdnModel<float>& model, const std::vector<Image>& images,
                                 const std::vector<AcaLocation>& acas, unsigned threads = 1);

double predict_mcdn(const McdnModel<float>& model, const Image& image, const AcaLocation& aca);

/// Order-sensitive FNV-1a digest of every stored tensor value, for determinism checks.
std::uint64_t parameter_checksum(const McdnModel<float>& model);

}  // namespace mcdn
