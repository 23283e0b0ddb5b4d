#pragma once

#include "mcdn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

namespace mcdn {

enum class Mode { Train, Infer };

enum class ConvAlgorithm { Im2col, Direct };

// ---------------------------------------------------------------- parameters

/// Convolution -> batch normalization -> ReLU.
template <typename Scalar>
struct ConvUnitParams {
  Tensor<Scalar> weights;  // (out, in, k, k)
  Tensor<Scalar> bias;     // (out)
  Tensor<Scalar> gamma;
  Tensor<Scalar> beta;
  Tensor<Scalar> running_mean;
  Tensor<Scalar> running_var;
  Scalar epsilon = Scalar(1e-5);
  Scalar momentum = Scalar(0.9);
  Index stride = 1;
  Index padding = 0;

  static ConvUnitParams make(Index in_channels, Index out_channels, Index kernel, Index stride,
                            Index padding) {
    require(in_channels > 0 && out_channels > 0 && kernel > 0, "conv unit: channel/kernel sizes must be positive");
    require(stride > 0, "conv unit: stride must be positive");
    require(padding >= 0, "conv unit: padding must be non-negative");
    ConvUnitParams p;
    p.weights = Tensor<Scalar>({out_channels, in_channels, kernel, kernel});
    p.bias = Tensor<Scalar>({out_channels});
    p.gamma = Tensor<Scalar>::constant({out_channels}, Scalar(1));
    p.beta = Tensor<Scalar>({out_channels});
    p.running_mean = Tensor<Scalar>({out_channels});
    p.running_var = Tensor<Scalar>::constant({out_channels}, Scalar(1));
    p.stride = stride;
    p.padding = padding;
    return p;
  }

  Index out_channels() const { return weights.dim(0); }
  Index in_channels() const { return weights.dim(1); }
  Index kernel() const { return weights.dim(2); }

  void validate() const {
    require_rank(weights, 4, "conv unit weights");
    require(weights.dim(2) == weights.dim(3), "conv unit: kernel must be square");
    const Index oc = out_channels();
    for (const auto* t : {&bias, &gamma, &beta, &running_mean, &running_var})
      require(t->rank() == 1 && t->dim(0) == oc,
              "conv unit: per-channel tensor has dims " + shape_string(t->dims()) +
                  ", expected (" + std::to_string(oc) + ")");
    require(epsilon > 0, "conv unit: bnEpsilon must be positive");
    require(momentum >= 0 && momentum <= 1, "conv unit: bnMomentum must lie in [0,1]");
    require((running_var.values().array() > 0).all(), "conv unit: running variance must be positive");
  }

  template <typename Visitor>
  void visit_trainable(const std::string& prefix, Visitor&& visit) {
    visit(prefix + "weights", weights);
    visit(prefix + "bias", bias);
    visit(prefix + "gamma", gamma);
    visit(prefix + "beta", beta);
  }

  template <typename Other>
  ConvUnitParams<Other> cast() const {
    ConvUnitParams<Other> p;
    p.weights = weights.template cast<Other>();
    p.bias = bias.template cast<Other>();
    p.gamma = gamma.template cast<Other>();
    p.beta = beta.template cast<Other>();
    p.running_mean = running_mean.template cast<Other>();
    p.running_var = running_var.template cast<Other>();
    p.epsilon = static_cast<Other>(epsilon);
    p.momentum = static_cast<Other>(momentum);
    p.stride = stride;
    p.padding = padding;
    return p;
  }
};

template <typename Scalar>
struct LinearParams {
  Tensor<Scalar> weights;  // (out, in)
  Tensor<Scalar> bias;     // (out)

  static LinearParams make(Index in_features, Index out_features) {
    return {Tensor<Scalar>({out_features, in_features}), Tensor<Scalar>({out_features})};
  }

  Index in_features() const { return weights.dim(1); }
  Index out_features() const { return weights.dim(0); }

  void validate() const {
    require_rank(weights, 2, "linear weights");
    require(bias.rank() == 1 && bias.dim(0) == weights.dim(0),
            "linear: bias dims " + shape_string(bias.dims()) + " do not match weights " +
                shape_string(weights.dims()));
  }

  template <typename Visitor>
  void visit_trainable(const std::string& prefix, Visitor&& visit) {
    visit(prefix + "weights", weights);
    visit(prefix + "bias", bias);
  }

  template <typename Other>
  LinearParams<Other> cast() const {
    return {weights.template cast<Other>(), bias.template cast<Other>()};
  }
};

// ---------------------------------------------------------------- convolution

struct ConvGeometry {
  Index batch, in_channels, height, width;
  Index out_channels, kernel, stride, padding;
  Index out_height, out_width;

  Index patch_size() const { return in_channels * kernel * kernel; }
  Index out_plane() const { return out_height * out_width; }
};

template <typename Scalar>
ConvGeometry conv_geometry(const Tensor<Scalar>& input, const Tensor<Scalar>& weights, Index stride,
                           Index padding) {
  require_rank(input, 4, "conv input");
  require_rank(weights, 4, "conv weights");
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_channels = input.dim(1);
  g.height = input.dim(2);
  g.width = input.dim(3);
  g.out_channels = weights.dim(0);
  g.kernel = weights.dim(2);
  g.stride = stride;
  g.padding = padding;
  if (weights.dim(1) != g.in_channels)
    throw ContractError("conv: channel axis mismatch, input has " + std::to_string(g.in_channels) +
                        " channels but weights expect " + std::to_string(weights.dim(1)));
  const Index span_h = g.height + 2 * padding - g.kernel;
  const Index span_w = g.width + 2 * padding - g.kernel;
  if (span_h < 0)
    throw ContractError("conv: height axis " + std::to_string(g.height) + " too small for kernel " +
                        std::to_string(g.kernel) + " with padding " + std::to_string(padding));
  if (span_w < 0)
    throw ContractError("conv: width axis " + std::to_string(g.width) + " too small for kernel " +
                        std::to_string(g.kernel) + " with padding " + std::to_string(padding));
  g.out_height = span_h / stride + 1;
  g.out_width = span_w / stride + 1;
  return g;
}

/// Unfolds one sample into a (C*k*k, OH*OW) column matrix; out-of-bounds taps are zero.
template <typename Scalar>
void im2col(const Scalar* sample, const ConvGeometry& g, RowMatrix<Scalar>& cols) {
  cols.resize(g.patch_size(), g.out_plane());
  for (Index c = 0; c < g.in_channels; ++c)
    for (Index ky = 0; ky < g.kernel; ++ky)
      for (Index kx = 0; kx < g.kernel; ++kx) {
        const Index row = (c * g.kernel + ky) * g.kernel + kx;
        Scalar* out = cols.row(row).data();
        for (Index oy = 0; oy < g.out_height; ++oy) {
          const Index iy = oy * g.stride + ky - g.padding;
          for (Index ox = 0; ox < g.out_width; ++ox) {
            const Index ix = ox * g.stride + kx - g.padding;
            const bool inside = iy >= 0 && iy < g.height && ix >= 0 && ix < g.width;
            out[oy * g.out_width + ox] = inside ? sample[(c * g.height + iy) * g.width + ix] : Scalar(0);
          }
        }
      }
}

/// Adjoint of im2col: scatters column gradients back onto the input plane.
template <typename Scalar>
void col2im(const RowMatrix<Scalar>& cols, const ConvGeometry& g, Scalar* sample_grad) {
  for (Index c = 0; c < g.in_channels; ++c)
    for (Index ky = 0; ky < g.kernel; ++ky)
      for (Index kx = 0; kx < g.kernel; ++kx) {
        const Index row = (c * g.kernel + ky) * g.kernel + kx;
        const Scalar* in = cols.row(row).data();
        for (Index oy = 0; oy < g.out_height; ++oy) {
          const Index iy = oy * g.stride + ky - g.padding;
          if (iy < 0 || iy >= g.height) continue;
          for (Index ox = 0; ox < g.out_width; ++ox) {
            const Index ix = ox * g.stride + kx - g.padding;
            if (ix < 0 || ix >= g.width) continue;
            sample_grad[(c * g.height + iy) * g.width + ix] += in[oy * g.out_width + ox];
          }
        }
      }
}

/// Plain convolution plus bias, no normalization.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weights, const Tensor<Scalar>& bias,
                      Index stride, Index padding, ConvAlgorithm algorithm = ConvAlgorithm::Im2col) {
  const ConvGeometry g = conv_geometry(input, weights, stride, padding);
  require(g.batch > 0, "conv: batch size must be positive");
  require(bias.rank() == 1 && bias.dim(0) == g.out_channels, "conv: bias dims " + shape_string(bias.dims()) +
                                                                  " do not match output channels");
  Tensor<Scalar> out({g.batch, g.out_channels, g.out_height, g.out_width});
  const Index in_stride = g.in_channels * g.height * g.width;
  const Index out_stride = g.out_channels * g.out_plane();

  if (algorithm == ConvAlgorithm::Direct) {
    for (Index n = 0; n < g.batch; ++n)
      for (Index o = 0; o < g.out_channels; ++o)
        for (Index oy = 0; oy < g.out_height; ++oy)
          for (Index ox = 0; ox < g.out_width; ++ox) {
            Scalar acc = bias[o];
            for (Index c = 0; c < g.in_channels; ++c)
              for (Index ky = 0; ky < g.kernel; ++ky) {
                const Index iy = oy * stride + ky - padding;
                if (iy < 0 || iy >= g.height) continue;
                for (Index kx = 0; kx < g.kernel; ++kx) {
                  const Index ix = ox * stride + kx - padding;
                  if (ix < 0 || ix >= g.width) continue;
                  acc += weights(o, c, ky, kx) * input(n, c, iy, ix);
                }
              }
            out(n, o, oy, ox) = acc;
          }
    return out;
  }

  const auto w = weights.matrix(g.out_channels, g.patch_size());
  RowMatrix<Scalar> cols;
  for (Index n = 0; n < g.batch; ++n) {
    im2col(input.data() + n * in_stride, g, cols);
    Eigen::Map<RowMatrix<Scalar>> y(out.data() + n * out_stride, g.out_channels, g.out_plane());
    y.noalias() = w * cols;
    y.colwise() += bias.values();
  }
  return out;
}

// ---------------------------------------------------------------- conv unit

template <typename Scalar>
struct ConvUnitCache {
  ConvGeometry geometry{};
  Mode mode = Mode::Infer;
  std::vector<RowMatrix<Scalar>> columns;  // per-sample im2col
  Tensor<Scalar> weights;
  Tensor<Scalar> gamma;
  Tensor<Scalar> normalized;   // x-hat, (N, OC, OH, OW)
  Tensor<Scalar> activation;   // BN output before ReLU
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> batch_mean;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> batch_var;  // biased
};

template <typename Scalar>
struct ConvUnitForward {
  Tensor<Scalar> output;
  ConvUnitCache<Scalar> cache;
};

template <typename Scalar>
ConvUnitForward<Scalar> conv_unit_forward(const Tensor<Scalar>& input, const ConvUnitParams<Scalar>& params,
                                          Mode mode) {
  params.validate();
  require_rank(input, 4, "conv unit input");
  if (input.dim(0) == 0) throw ContractError("conv unit: batch size 0");
  const ConvGeometry g = conv_geometry(input, params.weights, params.stride, params.padding);

  ConvUnitForward<Scalar> result;
  auto& cache = result.cache;
  cache.geometry = g;
  cache.mode = mode;
  cache.weights = params.weights;
  cache.gamma = params.gamma;

  const Index in_stride = g.in_channels * g.height * g.width;
  const Index plane = g.out_plane();
  Tensor<Scalar> conv({g.batch, g.out_channels, g.out_height, g.out_width});
  const auto w = params.weights.matrix(g.out_channels, g.patch_size());
  cache.columns.resize(static_cast<std::size_t>(g.batch));
  for (Index n = 0; n < g.batch; ++n) {
    auto& cols = cache.columns[static_cast<std::size_t>(n)];
    im2col(input.data() + n * in_stride, g, cols);
    Eigen::Map<RowMatrix<Scalar>> y(conv.data() + n * g.out_channels * plane, g.out_channels, plane);
    y.noalias() = w * cols;
    y.colwise() += params.bias.values();
  }

  const Index oc = g.out_channels;
  cache.batch_mean.resize(oc);
  cache.batch_var.resize(oc);
  cache.inv_std.resize(oc);
  const double count = static_cast<double>(g.batch * plane);
  for (Index c = 0; c < oc; ++c) {
    double mean, var;
    if (mode == Mode::Train) {
      double sum = 0.0;
      for (Index n = 0; n < g.batch; ++n)
        for (Index i = 0; i < plane; ++i) sum += conv.data()[(n * oc + c) * plane + i];
      mean = sum / count;
      double sq = 0.0;
      for (Index n = 0; n < g.batch; ++n)
        for (Index i = 0; i < plane; ++i) {
          const double d = conv.data()[(n * oc + c) * plane + i] - mean;
          sq += d * d;
        }
      var = sq / count;
    } else {
      mean = params.running_mean[c];
      var = params.running_var[c];
    }
    cache.batch_mean[c] = static_cast<Scalar>(mean);
    cache.batch_var[c] = static_cast<Scalar>(var);
    cache.inv_std[c] = static_cast<Scalar>(1.0 / std::sqrt(var + static_cast<double>(params.epsilon)));
  }

  cache.normalized = Tensor<Scalar>(conv.dims());
  cache.activation = Tensor<Scalar>(conv.dims());
  result.output = Tensor<Scalar>(conv.dims());
  for (Index n = 0; n < g.batch; ++n)
    for (Index c = 0; c < oc; ++c) {
      const Scalar mean = cache.batch_mean[c];
      const Scalar inv = cache.inv_std[c];
      const Scalar gm = params.gamma[c];
      const Scalar bt = params.beta[c];
      for (Index i = 0; i < plane; ++i) {
        const Index k = (n * oc + c) * plane + i;
        const Scalar xhat = (conv[k] - mean) * inv;
        const Scalar y = gm * xhat + bt;
        cache.normalized[k] = xhat;
        cache.activation[k] = y;
        result.output[k] = y > Scalar(0) ? y : Scalar(0);
      }
    }
  return result;
}

/// Folds the batch statistics of a train-mode forward into the running estimates:
/// running <- momentum * running + (1 - momentum) * batch (unbiased variance).
template <typename Scalar>
void update_running_statistics(ConvUnitParams<Scalar>& params, const ConvUnitCache<Scalar>& cache) {
  require(cache.mode == Mode::Train, "running statistics update needs a train-mode cache");
  const double count = static_cast<double>(cache.geometry.batch * cache.geometry.out_plane());
  const double unbias = count > 1 ? count / (count - 1) : 1.0;
  const double m = params.momentum;
  for (Index c = 0; c < params.out_channels(); ++c) {
    params.running_mean[c] =
        static_cast<Scalar>(m * params.running_mean[c] + (1 - m) * static_cast<double>(cache.batch_mean[c]));
    const double v = m * params.running_var[c] + (1 - m) * unbias * static_cast<double>(cache.batch_var[c]);
    params.running_var[c] = static_cast<Scalar>(std::max(v, 1e-12));
  }
}

template <typename Scalar>
struct LayerBackward {
  Tensor<Scalar> input_grad;
  GradientStore<Scalar> param_grads;
};

template <typename Scalar>
LayerBackward<Scalar> conv_unit_backward(const Tensor<Scalar>& upstream, const ConvUnitCache<Scalar>& cache) {
  const ConvGeometry& g = cache.geometry;
  const Shape out_dims{g.batch, g.out_channels, g.out_height, g.out_width};
  if (upstream.dims() != out_dims)
    throw ContractError("conv unit backward: upstream gradient dims " + shape_string(upstream.dims()) +
                        " do not match forward output " + shape_string(out_dims));
  require(static_cast<Index>(cache.columns.size()) == g.batch, "conv unit backward: cache is incomplete");

  const Index oc = g.out_channels;
  const Index plane = g.out_plane();
  const double count = static_cast<double>(g.batch * plane);

  Tensor<Scalar> dgamma({oc}), dbeta({oc});
  Tensor<Scalar> dconv(out_dims);
  for (Index c = 0; c < oc; ++c) {
    // ReLU mask, then BN affine part.
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (Index n = 0; n < g.batch; ++n)
      for (Index i = 0; i < plane; ++i) {
        const Index k = (n * oc + c) * plane + i;
        const double dy = cache.activation[k] > Scalar(0) ? static_cast<double>(upstream[k]) : 0.0;
        sum_dy += dy;
        sum_dy_xhat += dy * cache.normalized[k];
      }
    dgamma[c] = static_cast<Scalar>(sum_dy_xhat);
    dbeta[c] = static_cast<Scalar>(sum_dy);

    const double gm = cache.gamma[c];
    const double inv = cache.inv_std[c];
    for (Index n = 0; n < g.batch; ++n)
      for (Index i = 0; i < plane; ++i) {
        const Index k = (n * oc + c) * plane + i;
        const double dy = cache.activation[k] > Scalar(0) ? static_cast<double>(upstream[k]) : 0.0;
        double dx;
        if (cache.mode == Mode::Train) {
          // Mean and variance are functions of the input: full backprop through both.
          dx = gm * inv * (dy - sum_dy / count - cache.normalized[k] * sum_dy_xhat / count);
        } else {
          dx = gm * inv * dy;
        }
        dconv[k] = static_cast<Scalar>(dx);
      }
  }

  LayerBackward<Scalar> result;
  Tensor<Scalar> dweights(cache.weights.dims());
  Tensor<Scalar> dbias({oc});
  result.input_grad = Tensor<Scalar>({g.batch, g.in_channels, g.height, g.width});
  auto dw = dweights.matrix(oc, g.patch_size());
  const auto w = cache.weights.matrix(oc, g.patch_size());
  const Index in_stride = g.in_channels * g.height * g.width;
  RowMatrix<Scalar> dcols;
  for (Index n = 0; n < g.batch; ++n) {
    Eigen::Map<const RowMatrix<Scalar>> dz(dconv.data() + n * oc * plane, oc, plane);
    const auto& cols = cache.columns[static_cast<std::size_t>(n)];
    dw.noalias() += dz * cols.transpose();
    dbias.values() += dz.rowwise().sum();
    dcols.noalias() = w.transpose() * dz;
    col2im(dcols, g, result.input_grad.data() + n * in_stride);
  }
  result.param_grads.emplace("weights", std::move(dweights));
  result.param_grads.emplace("bias", std::move(dbias));
  result.param_grads.emplace("gamma", std::move(dgamma));
  result.param_grads.emplace("beta", std::move(dbeta));
  return result;
}

// ---------------------------------------------------------------- linear

template <typename Scalar>
struct LinearCache {
  Tensor<Scalar> input;
  Tensor<Scalar> weights;
};

template <typename Scalar>
struct LinearForward {
  Tensor<Scalar> output;
  LinearCache<Scalar> cache;
};

template <typename Scalar>
LinearForward<Scalar> linear_forward(const Tensor<Scalar>& input, const LinearParams<Scalar>& params) {
  params.validate();
  require_rank(input, 2, "linear input");
  if (input.dim(1) != params.in_features())
    throw ContractError("linear: feature axis mismatch, input has " + std::to_string(input.dim(1)) +
                        " features but weights expect " + std::to_string(params.in_features()));
  LinearForward<Scalar> result;
  result.output = Tensor<Scalar>({input.dim(0), params.out_features()});
  auto y = result.output.as_matrix();
  y.noalias() = input.as_matrix() * params.weights.as_matrix().transpose();
  y.rowwise() += params.bias.values().transpose();
  result.cache.input = input;
  result.cache.weights = params.weights;
  return result;
}

template <typename Scalar>
LayerBackward<Scalar> linear_backward(const Tensor<Scalar>& upstream, const LinearCache<Scalar>& cache) {
  const Shape out_dims{cache.input.dim(0), cache.weights.dim(0)};
  if (upstream.dims() != out_dims)
    throw ContractError("linear backward: upstream gradient dims " + shape_string(upstream.dims()) +
                        " do not match forward output " + shape_string(out_dims));
  LayerBackward<Scalar> result;
  const auto dy = upstream.as_matrix();
  result.input_grad = Tensor<Scalar>(cache.input.dims());
  result.input_grad.as_matrix().noalias() = dy * cache.weights.as_matrix();
  Tensor<Scalar> dw(cache.weights.dims());
  dw.as_matrix().noalias() = dy.transpose() * cache.input.as_matrix();
  Tensor<Scalar> db({cache.weights.dim(0)});
  db.values() = dy.colwise().sum().transpose();
  result.param_grads.emplace("weights", std::move(dw));
  result.param_grads.emplace("bias", std::move(db));
  return result;
}

// ---------------------------------------------------------------- loss

inline constexpr double kLogitClamp = 30.0;

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

template <typename Scalar>
struct LossResult {
  double loss = 0.0;
  Tensor<Scalar> logit_grad;
};

/// Mean binary cross-entropy of logistic outputs. Logits are clamped to |z| <= 30
/// before evaluation. Optional per-sample weights scale each term (and its gradient).
template <typename Scalar>
LossResult<Scalar> logistic_bce(const Tensor<Scalar>& logits, const Tensor<Scalar>& labels,
                                const std::vector<double>* sample_weights = nullptr) {
  require(logits.rank() == 2 && logits.dim(1) == 1, "logistic_bce: logits must be (batch,1), got " +
                                                        shape_string(logits.dims()));
  require(labels.dims() == logits.dims(), "logistic_bce: labels dims " + shape_string(labels.dims()) +
                                              " do not match logits " + shape_string(logits.dims()));
  const Index n = logits.dim(0);
  if (sample_weights) require(static_cast<Index>(sample_weights->size()) == n, "logistic_bce: weight count mismatch");
  LossResult<Scalar> r;
  r.logit_grad = Tensor<Scalar>(logits.dims());
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double y = labels[i];
    if (y != 0.0 && y != 1.0)
      throw ContractError("logistic_bce: label at index " + std::to_string(i) + " is " + std::to_string(y) +
                          ", expected 0 or 1");
    const double z = std::clamp(static_cast<double>(logits[i]), -kLogitClamp, kLogitClamp);
    const double wgt = sample_weights ? (*sample_weights)[static_cast<std::size_t>(i)] : 1.0;
    // -[y log g(z) + (1-y) log(1-g(z))] = softplus(z) - y z
    const double term = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y * z;
    total += wgt * term;
    r.logit_grad[i] = static_cast<Scalar>(wgt * (logistic(z) - y) / static_cast<double>(n));
  }
  r.loss = total / static_cast<double>(n);
  return r;
}

// ---------------------------------------------------------------- init

template <typename Scalar>
void fill_normal(Tensor<Scalar>& t, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(dist(rng));
}

}  // namespace mcdn
