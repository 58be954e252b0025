#pragma once

// The three parameterized layer kinds -- plain Conv1d, KAConv1d (spline
// kernel taps + activation base path), KAN layer (per-edge spline + SiLU
// base) -- plus the linear head and the [n -> 2n+1 -> 1] two-stage KAN
// stack used as a function-fitting harness.

#include <functional>
#include <string>
#include <utility>

#include "kaconv/adam.hpp"
#include "kaconv/ops.hpp"

namespace kaconv {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// Initialization scales for spline layers. scale_noise drives the
// least-squares noise fit of spline weights; scale_base / scale_spline
// scale the Kaiming-uniform bounds of the linear parts.
struct KanScales {
  Scalar scale_noise = 0.1;
  Scalar scale_base = 1.0;
  Scalar scale_spline = 1.0;
};

// Uniform in (-scale*sqrt(6/fan_in), +scale*sqrt(6/fan_in)).
void fill_kaiming_uniform(Tensor& tensor, Index fan_in, Scalar scaling,
                          Rng& rng);

struct Conv1dLayer {
  Tensor weight;  // [C_out x C_in x k]
  Tensor bias;    // [C_out]
  Conv1dOptions options;

  Tensor forward(Tape* tape, const Tensor& x) const;
  Index param_count() const { return weight.numel() + bias.numel(); }
  NamedParams named_params() const;
};

Conv1dLayer make_conv1d(Index c_in, Index c_out, Index k, Rng& rng);

struct KAConv1dLayer {
  // Spline tap coefficients stored conv-ready as
  // [C_out x C_in*n_basis x k]; entry (c_out, c_in*n_basis + t, tap) is the
  // coefficient of basis function t for input channel c_in at kernel tap
  // `tap`. No bias anywhere on this layer.
  Tensor spline_weight;
  Tensor base_weight;  // [C_out x C_in x k]
  Tensor prelu_slope;  // single shared scalar
  SplineGrid grid;     // shared across taps, not trainable
  Index c_in = 0, c_out = 0, kernel = 0;

  // instance_norm -> (spline path: basis expansion + conv) +
  //                  (base path: PReLU(GELU(.)) + conv)
  Tensor forward(Tape* tape, const Tensor& x) const;
  Index param_count() const {
    return spline_weight.numel() + base_weight.numel() + prelu_slope.numel();
  }
  NamedParams named_params() const;
};

KAConv1dLayer make_kaconv1d(Index c_in, Index c_out, Index k,
                            const SplineGrid& grid, Rng& rng,
                            const KanScales& scales = {});

struct KANLayer {
  Tensor base_weight;    // [n_out x n_in]
  Tensor spline_weight;  // [n_out x n_in x n_basis]
  Tensor spline_scaler;  // [n_out x n_in]
  SplineGrid grid;
  Index n_in = 0, n_out = 0;

  // out_j = sum_i base_weight[j,i]*silu(x_i)
  //       + sum_i spline_scaler[j,i]*sum_t spline_weight[j,i,t]*B_t(x_i)
  // Accepts [B x n_in] or a single [n_in] vector.
  Tensor forward(Tape* tape, const Tensor& x) const;
  Index param_count() const {
    return base_weight.numel() + spline_weight.numel() +
           spline_scaler.numel();
  }
  NamedParams named_params() const;
};

KANLayer make_kan_layer(Index n_in, Index n_out, const SplineGrid& grid,
                        Rng& rng, const KanScales& scales = {});

struct MLPHead {
  Tensor weight;  // [n_classes x n_features]
  Tensor bias;    // [n_classes]

  Tensor forward(Tape* tape, const Tensor& x) const;
  Index param_count() const { return weight.numel() + bias.numel(); }
  NamedParams named_params() const;
};

MLPHead make_mlp_head(Index n_features, Index n_classes, Rng& rng);

// Two-stage KAN stack of widths [n, 2n+1, 1].
struct KartStack {
  KANLayer hidden;
  KANLayer output;

  Tensor forward(Tape* tape, const Tensor& x) const;  // x [B x n]
  std::vector<Tensor> parameters() const;
};

KartStack make_kart_stack(Index n_inputs, const SplineGrid& grid, Rng& rng,
                          const KanScales& scales = {});

// Full-batch Adam on mean squared error, run through `schedule` stages of
// (steps, lr). Returns per-step losses plus the final MSE evaluated without
// dropout/tape.
struct FitStage {
  int steps;
  Scalar lr;
};

struct RegressionFit {
  std::vector<Scalar> loss_history;
  Scalar final_mse = 0.0;
};

RegressionFit fit_mse(std::vector<Tensor> params,
                      const std::function<Tensor(Tape*, const Tensor&)>& model,
                      const MatX& inputs, const VecX& targets,
                      const std::vector<FitStage>& schedule);

}  // namespace kaconv
