#pragma once

#include "mcdn/gradcheck.hpp"
#include "mcdn/layers.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mcdn {

struct ConvUnitSpec {
  Index outChannels = 8;
  Index kernel = 3;
  Index stride = 1;
  friend bool operator==(const ConvUnitSpec&, const ConvUnitSpec&) = default;
};

struct StreamConfig {
  Index inputSidePx = 64;
  std::vector<ConvUnitSpec> convUnits{{8, 5, 2}, {16, 3, 2}, {32, 3, 2}};
  Index featureDim = 128;

  void validate(const std::string& what = "StreamConfig") const;
  /// (channels, height, width) after the conv stack; padding is kernel/2 throughout.
  Shape conv_output_dims() const;
  Index flatten_width() const {
    const Shape d = conv_output_dims();
    return d[0] * d[1] * d[2];
  }
  friend bool operator==(const StreamConfig&, const StreamConfig&) = default;
};

enum class StreamLayout { Both, GlobalOnly, LocalOnly };

std::string to_string(StreamLayout layout);
StreamLayout stream_layout_from_string(const std::string& s);

// ---------------------------------------------------------------- stream

template <typename Scalar>
struct StreamParams {
  StreamConfig config;
  std::vector<ConvUnitParams<Scalar>> units;
  LinearParams<Scalar> projection;

  static StreamParams make(const StreamConfig& config) {
    config.validate();
    StreamParams p;
    p.config = config;
    Index channels = 1;
    for (const auto& u : config.convUnits) {
      p.units.push_back(ConvUnitParams<Scalar>::make(channels, u.outChannels, u.kernel, u.stride, u.kernel / 2));
      channels = u.outChannels;
    }
    p.projection = LinearParams<Scalar>::make(config.flatten_width(), config.featureDim);
    return p;
  }

  bool empty() const { return units.empty(); }
  Index feature_dim() const { return empty() ? 0 : projection.out_features(); }

  template <typename Visitor>
  void visit_trainable(const std::string& prefix, Visitor&& visit) {
    for (std::size_t i = 0; i < units.size(); ++i) units[i].visit_trainable(prefix + "unit" + std::to_string(i) + "/", visit);
    projection.visit_trainable(prefix + "projection/", visit);
  }

  template <typename Other>
  StreamParams<Other> cast() const {
    StreamParams<Other> p;
    p.config = config;
    for (const auto& u : units) p.units.push_back(u.template cast<Other>());
    if (!empty()) p.projection = projection.template cast<Other>();
    return p;
  }
};

template <typename Scalar>
struct StreamCache {
  std::vector<ConvUnitCache<Scalar>> units;
  Shape conv_output_dims;
  LinearCache<Scalar> projection;
};

template <typename Scalar>
Tensor<Scalar> stream_forward(const StreamParams<Scalar>& params, const Tensor<Scalar>& input, Mode mode,
                              StreamCache<Scalar>& cache) {
  require_rank(input, 4, "stream input");
  const Index side = params.config.inputSidePx;
  if (input.dim(1) != 1 || input.dim(2) != side || input.dim(3) != side)
    throw ContractError("stream input has dims " + shape_string(input.dims()) + ", expected (N,1," +
                        std::to_string(side) + "," + std::to_string(side) + ")");
  cache.units.clear();
  Tensor<Scalar> h = input;
  for (const auto& unit : params.units) {
    auto f = conv_unit_forward(h, unit, mode);
    h = std::move(f.output);
    cache.units.push_back(std::move(f.cache));
  }
  cache.conv_output_dims = h.dims();
  const Index n = h.dim(0);
  auto lf = linear_forward(h.reshaped({n, h.size() / n}), params.projection);
  cache.projection = std::move(lf.cache);
  return std::move(lf.output);
}

template <typename Scalar>
void stream_backward(const Tensor<Scalar>& feature_grad, const StreamCache<Scalar>& cache, const std::string& prefix,
                     GradientStore<Scalar>& grads) {
  auto lb = linear_backward(feature_grad, cache.projection);
  for (auto& [name, g] : lb.param_grads) grads.insert_or_assign(prefix + "projection/" + name, std::move(g));
  Tensor<Scalar> d = lb.input_grad.reshaped(cache.conv_output_dims);
  for (std::size_t i = cache.units.size(); i-- > 0;) {
    auto ub = conv_unit_backward(d, cache.units[i]);
    for (auto& [name, g] : ub.param_grads)
      grads.insert_or_assign(prefix + "unit" + std::to_string(i) + "/" + name, std::move(g));
    d = std::move(ub.input_grad);
  }
}

// ---------------------------------------------------------------- model

/// Global-image stream and local-patch stream, features concatenated into a
/// single-logit head. Single-stream layouts leave the unused stream empty.
template <typename Scalar>
struct McdnModel {
  StreamLayout layout = StreamLayout::Both;
  StreamParams<Scalar> global;
  StreamParams<Scalar> local;
  LinearParams<Scalar> head;

  bool uses_global() const { return layout != StreamLayout::LocalOnly; }
  bool uses_local() const { return layout != StreamLayout::GlobalOnly; }

  void validate() const {
    require(uses_global() == !global.empty(), "McdnModel: global stream presence does not match layout");
    require(uses_local() == !local.empty(), "McdnModel: local stream presence does not match layout");
    head.validate();
    const Index width = global.feature_dim() + local.feature_dim();
    require(head.in_features() == width && head.out_features() == 1,
            "McdnModel: head expects " + std::to_string(head.in_features()) + " features, streams provide " +
                std::to_string(width));
  }

  ParameterRefs<Scalar> trainable() {
    ParameterRefs<Scalar> refs;
    auto visit = [&](const std::string& name, Tensor<Scalar>& t) { refs.emplace_back(name, &t); };
    if (uses_global()) global.visit_trainable("global/", visit);
    if (uses_local()) local.visit_trainable("local/", visit);
    head.visit_trainable("head/", visit);
    return refs;
  }

  template <typename Other>
  McdnModel<Other> cast() const {
    McdnModel<Other> m;
    m.layout = layout;
    m.global = global.template cast<Other>();
    m.local = local.template cast<Other>();
    m.head = head.template cast<Other>();
    return m;
  }
};

/// He-normal conv weights, 1/sqrt(fan-in) projections, head weights N(0, 0.01^2),
/// zero biases; drawn in parameter order from mt19937_64(seed).
template <typename Scalar>
McdnModel<Scalar> make_mcdn(const StreamConfig& global, const StreamConfig& local, StreamLayout layout,
                            std::uint64_t seed) {
  McdnModel<Scalar> m;
  m.layout = layout;
  std::mt19937_64 rng(seed);
  auto init = [&](StreamParams<Scalar>& s, const StreamConfig& cfg) {
    s = StreamParams<Scalar>::make(cfg);
    for (auto& u : s.units)
      fill_normal(u.weights, std::sqrt(2.0 / static_cast<double>(u.in_channels() * u.kernel() * u.kernel())), rng);
    fill_normal(s.projection.weights, 1.0 / std::sqrt(static_cast<double>(s.projection.in_features())), rng);
  };
  if (m.uses_global()) init(m.global, global);
  if (m.uses_local()) init(m.local, local);
  m.head = LinearParams<Scalar>::make(m.global.feature_dim() + m.local.feature_dim(), 1);
  fill_normal(m.head.weights, 0.01, rng);
  return m;
}

template <typename Scalar>
struct McdnCache {
  StreamCache<Scalar> global;
  StreamCache<Scalar> local;
  LinearCache<Scalar> head;
  Index global_width = 0;
};

/// Logits (N,1). Inputs are (N,1,side,side) per stream config; the input of an
/// unused stream is ignored.
template <typename Scalar>
Tensor<Scalar> mcdn_logits(const McdnModel<Scalar>& model, const Tensor<Scalar>& global_input,
                           const Tensor<Scalar>& local_input, Mode mode, McdnCache<Scalar>& cache) {
  model.validate();
  Tensor<Scalar> fg, fl;
  Index n = 0;
  if (model.uses_global()) {
    fg = stream_forward(model.global, global_input, mode, cache.global);
    n = fg.dim(0);
  }
  if (model.uses_local()) {
    fl = stream_forward(model.local, local_input, mode, cache.local);
    if (n != 0 && fl.dim(0) != n)
      throw ContractError("mcdn: global batch " + std::to_string(n) + " differs from local batch " +
                          std::to_string(fl.dim(0)));
    n = fl.dim(0);
  }
  const Index wg = model.global.feature_dim();
  const Index wl = model.local.feature_dim();
  Tensor<Scalar> features({n, wg + wl});
  auto fm = features.as_matrix();
  if (wg > 0) fm.leftCols(wg) = fg.as_matrix();
  if (wl > 0) fm.rightCols(wl) = fl.as_matrix();
  cache.global_width = wg;
  auto hf = linear_forward(features, model.head);
  cache.head = std::move(hf.cache);
  return std::move(hf.output);
}

template <typename Scalar>
Tensor<Scalar> mcdn_logits(const McdnModel<Scalar>& model, const Tensor<Scalar>& global_input,
                           const Tensor<Scalar>& local_input, Mode mode) {
  McdnCache<Scalar> cache;
  return mcdn_logits(model, global_input, local_input, mode, cache);
}

template <typename Scalar>
GradientStore<Scalar> mcdn_backward(const McdnModel<Scalar>& model, const McdnCache<Scalar>& cache,
                                    const Tensor<Scalar>& logit_grad) {
  GradientStore<Scalar> grads;
  auto hb = linear_backward(logit_grad, cache.head);
  for (auto& [name, g] : hb.param_grads) grads.insert_or_assign("head/" + name, std::move(g));
  const auto dfeat = hb.input_grad.as_matrix();
  const Index n = dfeat.rows();
  const Index wg = cache.global_width;
  if (model.uses_global()) {
    Tensor<Scalar> dg({n, wg});
    dg.as_matrix() = dfeat.leftCols(wg);
    stream_backward(dg, cache.global, "global/", grads);
  }
  if (model.uses_local()) {
    const Index wl = dfeat.cols() - wg;
    Tensor<Scalar> dl({n, wl});
    dl.as_matrix() = dfeat.rightCols(wl);
    stream_backward(dl, cache.local, "local/", grads);
  }
  return grads;
}

/// Folds the batch statistics of a train-mode forward pass into the running
/// estimates of every conv unit.
template <typename Scalar>
void update_running_statistics(McdnModel<Scalar>& model, const McdnCache<Scalar>& cache) {
  auto fold = [](StreamParams<Scalar>& s, const StreamCache<Scalar>& c) {
    for (std::size_t i = 0; i < s.units.size(); ++i) update_running_statistics(s.units[i], c.units[i]);
  };
  if (model.uses_global()) fold(model.global, cache.global);
  if (model.uses_local()) fold(model.local, cache.local);
}

// ---------------------------------------------------------------- gradient check

/// Mean BCE of a double-precision MCDN on a fixed batch, with train-mode batch
/// normalization. `corrupt` names a parameter whose analytic gradient is scaled
/// by 1.5 (a negative control for the checker).
class McdnLossFragment : public DiffFragment {
 public:
  McdnLossFragment(McdnModel<double> model, TensorD global_input, TensorD local_input, TensorD labels)
      : model_(std::move(model)),
        global_(std::move(global_input)),
        local_(std::move(local_input)),
        labels_(std::move(labels)) {}

  void corrupt_gradient(std::string name) { corrupt_ = std::move(name); }
  McdnModel<double>& model() { return model_; }

  ParameterRefs<double> parameters() override { return model_.trainable(); }

  Evaluation evaluate() override {
    McdnCache<double> cache;
    const TensorD logits = mcdn_logits(model_, global_, local_, Mode::Train, cache);
    Evaluation e;
    e.value = logistic_bce(logits, labels_).loss;
    auto sign_bits = [&](const StreamCache<double>& s) {
      for (const auto& u : s.units)
        for (Index i = 0; i < u.activation.size(); ++i)
          e.activation_signature = mix_signature(e.activation_signature, u.activation[i] > 0.0 ? 1u : 0u);
    };
    sign_bits(cache.global);
    sign_bits(cache.local);
    return e;
  }

  GradientStore<double> analytic_gradients() override {
    McdnCache<double> cache;
    const TensorD logits = mcdn_logits(model_, global_, local_, Mode::Train, cache);
    auto grads = mcdn_backward(model_, cache, logistic_bce(logits, labels_).logit_grad);
    if (!corrupt_.empty()) {
      const auto it = grads.find(corrupt_);
      if (it == grads.end()) throw ContractError("gradcheck: unknown parameter '" + corrupt_ + "' to corrupt");
      it->second.values() *= 1.5;
    }
    return grads;
  }

 private:
  McdnModel<double> model_;
  TensorD global_;
  TensorD local_;
  TensorD labels_;
  std::string corrupt_;
};

}  // namespace mcdn
