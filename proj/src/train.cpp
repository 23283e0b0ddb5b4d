#include "mcdn/train.hpp"

#include "mcdn/optim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <thread>

namespace mcdn {

void TrainConfig::validate() const {
  require(std::isfinite(learningRate) && learningRate > 0, "TrainConfig.learningRate must be positive");
  require(momentumCoeff >= 0 && momentumCoeff < 1, "TrainConfig.momentumCoeff must lie in [0,1)");
  require(batchSize >= 2, "TrainConfig.batchSize must be at least 2 (batch normalization)");
  require(iterationCount > 0, "TrainConfig.iterationCount must be positive");
  require(std::isfinite(svmRegularization) && svmRegularization > 0, "TrainConfig.svmRegularization must be positive");
  augment.validate();
}

BatchInputs allocate_inputs(const McdnModel<float>& model, Index batch) {
  const Index gs = model.uses_global() ? model.global.config.inputSidePx : 1;
  const Index ls = model.uses_local() ? model.local.config.inputSidePx : 1;
  return {TensorF({batch, 1, gs, gs}), TensorF({batch, 1, ls, ls})};
}

void write_sample_inputs(const McdnModel<float>& model, const Image& global, const Image& patch, BatchInputs& batch,
                         Index slot) {
  if (model.uses_global()) write_network_input(global, model.global.config.inputSidePx, batch.global, slot);
  if (model.uses_local()) write_network_input(patch, model.local.config.inputSidePx, batch.local, slot);
}

TrainResult train_mcdn(McdnModel<float> model, const std::vector<LabeledSample>& samples, const TrainConfig& config) {
  config.validate();
  model.validate();
  require(samples.size() >= 2, "train_mcdn: need at least two training samples");
  TrainResult result;

  const auto plan = expand_training_set(samples, config.augment);
  const auto positives = static_cast<std::size_t>(
      std::count_if(plan.begin(), plan.end(), [](const AugmentedSample& s) { return s.label == 1; }));
  if (positives == 0 || positives == plan.size())
    result.warnings.push_back("training set holds a single class");
  std::array<double, 2> class_weight{1.0, 1.0};
  if (config.classWeighting && positives > 0 && positives < plan.size()) {
    const double n = static_cast<double>(plan.size());
    class_weight[1] = n / (2.0 * static_cast<double>(positives));
    class_weight[0] = n / (2.0 * static_cast<double>(plan.size() - positives));
  }

  std::mt19937_64 rng(config.rngSeed);
  std::vector<std::size_t> order(plan.size());
  std::size_t cursor = order.size();
  const Index batch = std::min<Index>(config.batchSize, static_cast<Index>(plan.size()));
  GradientStore<float> velocity;
  BatchInputs inputs = allocate_inputs(model, batch);
  TensorF labels({batch, 1});
  std::vector<double> weights(static_cast<std::size_t>(batch), 1.0);

  for (Index it = 0; it < config.iterationCount; ++it) {
    for (Index b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const AugmentedSample& entry = plan[order[cursor++]];
      const MaterializedSample m = materialize(entry, samples);
      write_sample_inputs(model, m.global, m.patch, inputs, b);
      labels[b] = static_cast<float>(entry.label);
      weights[static_cast<std::size_t>(b)] = class_weight[static_cast<std::size_t>(entry.label)];
    }
    McdnCache<float> cache;
    const TensorF logits = mcdn_logits(model, inputs.global, inputs.local, Mode::Train, cache);
    const auto loss = logistic_bce(logits, labels, config.classWeighting ? &weights : nullptr);
    if (!std::isfinite(loss.loss)) throw std::runtime_error("train_mcdn: loss became non-finite at iteration " + std::to_string(it));
    result.lossTrace.push_back(loss.loss);
    const auto grads = mcdn_backward(model, cache, loss.logit_grad);
    update_running_statistics(model, cache);
    sgd_step(model.trainable(), grads, config.learningRate, config.momentumCoeff, velocity);
  }
  result.model = std::move(model);
  return result;
}

namespace {

constexpr std::size_t kChunk = 16;

void predict_range(const McdnModel<float>& model, const std::vector<Image>& images, const std::vector<AcaLocation>& acas,
                   std::size_t begin, std::size_t end, std::vector<double>& out) {
  for (std::size_t start = begin; start < end; start += kChunk) {
    const std::size_t stop = std::min(end, start + kChunk);
    BatchInputs inputs = allocate_inputs(model, static_cast<Index>(stop - start));
    for (std::size_t i = start; i < stop; ++i) {
      const Image patch = model.uses_local() ? crop_patch(images[i], acas[i]) : Image();
      write_sample_inputs(model, images[i], patch, inputs, static_cast<Index>(i - start));
    }
    const TensorF logits = mcdn_logits(model, inputs.global, inputs.local, Mode::Infer);
    for (std::size_t i = start; i < stop; ++i) out[i] = logistic(logits[static_cast<Index>(i - start)]);
  }
}

}  // namespace

std::vector<double> predict_mcdn(const McdnModel<float>& model, const std::vector<Image>& images,
                                 const std::vector<AcaLocation>& acas, unsigned threads) {
  require(images.size() == acas.size(), "predict_mcdn: image and location counts differ");
  std::vector<double> out(images.size(), 0.0);
  const std::size_t n = images.size();
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    predict_range(model, images, acas, 0, n, out);
    return out;
  }
  // Inference-mode BN is per-sample, so chunking cannot change any probability.
  std::vector<std::thread> pool;
  // Worker ranges follow the chunk grid, so every chunk holds the same samples
  // whatever the thread count.
  const std::size_t per = ((n + workers - 1) / workers + kChunk - 1) / kChunk * kChunk;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * per, e = std::min(n, b + per);
    if (b >= e) break;
    pool.emplace_back([&, b, e] { predict_range(model, images, acas, b, e, out); });
  }
  for (auto& t : pool) t.join();
  return out;
}

double predict_mcdn(const McdnModel<float>& model, const Image& image, const AcaLocation& aca) {
  return predict_mcdn(model, std::vector<Image>{image}, std::vector<AcaLocation>{aca}).front();
}

std::uint64_t parameter_checksum(const McdnModel<float>& model) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const TensorF& t) {
    for (Index i = 0; i < t.size(); ++i) {
      std::uint32_t bits;
      const float v = t[i];
      std::memcpy(&bits, &v, sizeof bits);
      for (int k = 0; k < 4; ++k) {
        h ^= (bits >> (8 * k)) & 0xffu;
        h *= 1099511628211ULL;
      }
    }
  };
  for (const auto* s : {&model.global, &model.local}) {
    for (const auto& u : s->units)
      for (const auto* t : {&u.weights, &u.bias, &u.gamma, &u.beta, &u.running_mean, &u.running_var}) mix(*t);
    if (!s->empty()) {
      mix(s->projection.weights);
      mix(s->projection.bias);
    }
  }
  mix(model.head.weights);
  mix(model.head.bias);
  return h;
}

}  // namespace mcdn
