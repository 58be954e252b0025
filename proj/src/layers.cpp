#include "kaconv/layers.hpp"

#include <cmath>

namespace kaconv {

void fill_kaiming_uniform(Tensor& tensor, Index fan_in, Scalar scaling,
                          Rng& rng) {
  require(fan_in >= 1, ErrorKind::invalid_argument,
          "fan_in must be positive");
  const Scalar bound =
      scaling * std::sqrt(6.0 / static_cast<Scalar>(fan_in));
  ArrayX& v = tensor.value();
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-bound, bound);
}

namespace {

void fill_uniform(Tensor& tensor, Scalar bound, Rng& rng) {
  ArrayX& v = tensor.value();
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-bound, bound);
}

// Draws the per-edge noise targets at the G+1 interior grid points and
// least-squares fits them onto the basis. Edges are visited in storage
// order; each edge consumes G+1 uniform draws. scale_noise = 0 yields
// exactly zero coefficients.
MatX noise_fit_coeffs(Index n_edges, const SplineGrid& grid,
                      Scalar scale_noise, Rng& rng) {
  const VecX points = grid.interior_points();
  MatX targets(points.size(), n_edges);
  const Scalar amplitude = scale_noise / static_cast<Scalar>(grid.grid_size);
  for (Index e = 0; e < n_edges; ++e)
    for (Index j = 0; j < points.size(); ++j)
      targets(j, e) = (rng.uniform() - 0.5) * amplitude;
  if (scale_noise == 0.0) return MatX::Zero(n_edges, grid.n_basis());
  return fit_spline_coeffs(points, targets, grid).coeffs;
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv1d
// ---------------------------------------------------------------------------

Tensor Conv1dLayer::forward(Tape* tape, const Tensor& x) const {
  return conv1d_raw(tape, x, weight, &bias, options);
}

NamedParams Conv1dLayer::named_params() const {
  return {{"weight", weight}, {"bias", bias}};
}

Conv1dLayer make_conv1d(Index c_in, Index c_out, Index k, Rng& rng) {
  Conv1dLayer layer;
  layer.weight = Tensor::zeros({c_out, c_in, k}, /*requires_grad=*/true);
  layer.bias = Tensor::zeros({c_out}, /*requires_grad=*/true);
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(c_in * k));
  fill_uniform(layer.weight, bound, rng);
  fill_uniform(layer.bias, bound, rng);
  return layer;
}

// ---------------------------------------------------------------------------
// KAConv1d
// ---------------------------------------------------------------------------

Tensor KAConv1dLayer::forward(Tape* tape, const Tensor& x) const {
  Tensor z = instance_norm_1d(tape, x);
  Tensor spline_path =
      conv1d_raw(tape, basis_expand(tape, z, grid), spline_weight, nullptr);
  Tensor base_in = prelu(tape, gelu(tape, z), prelu_slope);
  Tensor base_path = conv1d_raw(tape, base_in, base_weight, nullptr);
  return add(tape, spline_path, base_path);
}

NamedParams KAConv1dLayer::named_params() const {
  return {{"spline_weight", spline_weight},
          {"base_weight", base_weight},
          {"prelu_slope", prelu_slope}};
}

KAConv1dLayer make_kaconv1d(Index c_in, Index c_out, Index k,
                            const SplineGrid& grid, Rng& rng,
                            const KanScales& scales) {
  KAConv1dLayer layer;
  layer.grid = grid;
  layer.c_in = c_in;
  layer.c_out = c_out;
  layer.kernel = k;
  const Index n_b = grid.n_basis();
  layer.spline_weight =
      Tensor::zeros({c_out, c_in * n_b, k}, /*requires_grad=*/true);
  layer.base_weight = Tensor::zeros({c_out, c_in, k}, /*requires_grad=*/true);
  layer.prelu_slope = Tensor::full({1}, 0.25, /*requires_grad=*/true);

  fill_kaiming_uniform(layer.base_weight, c_in * k, scales.scale_base, rng);

  // One edge per (c_out, c_in, tap); coefficients land at
  // (c_out, c_in*n_b + t, tap) in the conv-ready layout.
  const Index n_edges = c_out * c_in * k;
  const MatX coeffs = noise_fit_coeffs(n_edges, grid, scales.scale_noise, rng);
  ArrayX& sw = layer.spline_weight.value();
  for (Index co = 0; co < c_out; ++co)
    for (Index ci = 0; ci < c_in; ++ci)
      for (Index tap = 0; tap < k; ++tap) {
        const Index edge = (co * c_in + ci) * k + tap;
        for (Index t = 0; t < n_b; ++t)
          sw[(co * c_in * n_b + ci * n_b + t) * k + tap] = coeffs(edge, t);
      }
  return layer;
}

// ---------------------------------------------------------------------------
// KAN layer
// ---------------------------------------------------------------------------

Tensor KANLayer::forward(Tape* tape, const Tensor& x) const {
  const bool vector_input = x.ndim() == 1;
  Tensor input = vector_input ? reshape_copy(tape, x, {1, x.dim(0)}) : x;
  require(input.ndim() == 2 && input.dim(1) == n_in,
          ErrorKind::invalid_argument,
          "KAN layer expects " + std::to_string(n_in) + " inputs, got " +
              shape_str(x.shape()));
  Tensor base = linear(tape, silu(tape, input), base_weight, nullptr);
  Tensor spline = kan_spline(tape, input, spline_weight, spline_scaler, grid);
  Tensor out = add(tape, base, spline);
  if (vector_input) out = reshape_copy(tape, out, {n_out});
  return out;
}

NamedParams KANLayer::named_params() const {
  return {{"base_weight", base_weight},
          {"spline_weight", spline_weight},
          {"spline_scaler", spline_scaler}};
}

KANLayer make_kan_layer(Index n_in, Index n_out, const SplineGrid& grid,
                        Rng& rng, const KanScales& scales) {
  KANLayer layer;
  layer.grid = grid;
  layer.n_in = n_in;
  layer.n_out = n_out;
  const Index n_b = grid.n_basis();
  layer.base_weight = Tensor::zeros({n_out, n_in}, /*requires_grad=*/true);
  layer.spline_weight =
      Tensor::zeros({n_out, n_in, n_b}, /*requires_grad=*/true);
  layer.spline_scaler = Tensor::zeros({n_out, n_in}, /*requires_grad=*/true);

  fill_kaiming_uniform(layer.base_weight, n_in, scales.scale_base, rng);
  const MatX coeffs =
      noise_fit_coeffs(n_out * n_in, grid, scales.scale_noise, rng);
  ArrayX& sw = layer.spline_weight.value();
  for (Index e = 0; e < n_out * n_in; ++e)
    for (Index t = 0; t < n_b; ++t) sw[e * n_b + t] = coeffs(e, t);
  fill_kaiming_uniform(layer.spline_scaler, n_in, scales.scale_spline, rng);
  return layer;
}

// ---------------------------------------------------------------------------
// MLP head
// ---------------------------------------------------------------------------

Tensor MLPHead::forward(Tape* tape, const Tensor& x) const {
  return linear(tape, x, weight, &bias);
}

NamedParams MLPHead::named_params() const {
  return {{"weight", weight}, {"bias", bias}};
}

MLPHead make_mlp_head(Index n_features, Index n_classes, Rng& rng) {
  MLPHead head;
  head.weight = Tensor::zeros({n_classes, n_features}, /*requires_grad=*/true);
  head.bias = Tensor::zeros({n_classes}, /*requires_grad=*/true);
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(n_features));
  fill_uniform(head.weight, bound, rng);
  fill_uniform(head.bias, bound, rng);
  return head;
}

// ---------------------------------------------------------------------------
// KART harness
// ---------------------------------------------------------------------------

Tensor KartStack::forward(Tape* tape, const Tensor& x) const {
  return output.forward(tape, hidden.forward(tape, x));
}

std::vector<Tensor> KartStack::parameters() const {
  return {hidden.base_weight,  hidden.spline_weight,  hidden.spline_scaler,
          output.base_weight, output.spline_weight, output.spline_scaler};
}

KartStack make_kart_stack(Index n_inputs, const SplineGrid& grid, Rng& rng,
                          const KanScales& scales) {
  require(n_inputs >= 1, ErrorKind::invalid_argument,
          "kart stack needs at least one input");
  KartStack stack;
  stack.hidden = make_kan_layer(n_inputs, 2 * n_inputs + 1, grid, rng, scales);
  stack.output = make_kan_layer(2 * n_inputs + 1, 1, grid, rng, scales);
  return stack;
}

RegressionFit fit_mse(std::vector<Tensor> params,
                      const std::function<Tensor(Tape*, const Tensor&)>& model,
                      const MatX& inputs, const VecX& targets,
                      const std::vector<FitStage>& schedule) {
  require(inputs.rows() == targets.size(), ErrorKind::invalid_argument,
          "inputs and targets disagree on sample count");
  const Index n = inputs.rows();
  ArrayX flat(inputs.size());
  RowMatMap(flat.data(), inputs.rows(), inputs.cols()) = inputs;
  const Tensor x = Tensor::from_array({inputs.rows(), inputs.cols()}, flat);
  const Tensor y = Tensor::from_array({n, 1}, targets.array());

  auto mse_loss = [&](Tape* tape) {
    Tensor diff = sub(tape, model(tape, x), y);
    return scale(tape, sum_all(tape, mul(tape, diff, diff)),
                 1.0 / static_cast<Scalar>(n));
  };

  RegressionFit fit;
  Adam adam(std::move(params), {});
  for (const FitStage& stage : schedule) {
    adam.set_lr(stage.lr);
    for (int step = 0; step < stage.steps; ++step) {
      Tape tape;
      Tensor loss = mse_loss(&tape);
      fit.loss_history.push_back(loss.item());
      tape.backward(loss);
      adam.step();
    }
  }
  fit.final_mse = mse_loss(nullptr).item();
  return fit;
}

}  // namespace kaconv
