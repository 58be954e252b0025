#pragma once

// Differentiable tensor operations. Each op validates shapes, computes the
// forward value, checks the result for NaN/Inf (numeric-failure), and -- when
// a recording tape is supplied and any input is tracked -- registers a
// backward rule. Pass tape = nullptr (or a disabled tape) for pure forward
// evaluation.
//
// Shape conventions: sequence tensors are [channels x length] or, batched,
// [batch x channels x length]; feature tensors are [batch x features].

#include <vector>

#include "kaconv/rng.hpp"
#include "kaconv/spline.hpp"
#include "kaconv/tensor.hpp"

namespace kaconv {

// Elementwise with NumPy-style broadcasting (trailing dimensions aligned).
Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape* tape, const Tensor& a, Scalar factor);

Tensor sum_all(Tape* tape, const Tensor& a);  // -> shape {1}
Tensor reshape_copy(Tape* tape, const Tensor& a, Shape new_shape);

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);  // [m x k] * [k x n]
// x [B x F], weight [C x F], bias [C] (pass nullptr for none) -> [B x C]
Tensor linear(Tape* tape, const Tensor& x, const Tensor& weight,
              const Tensor* bias);

Tensor relu(Tape* tape, const Tensor& x);
Tensor prelu(Tape* tape, const Tensor& x, const Tensor& slope);  // scalar slope
Tensor gelu(Tape* tape, const Tensor& x);  // exact erf form
Tensor silu(Tape* tape, const Tensor& x);

struct Conv1dOptions {
  Index stride = 1;
  Index padding = 0;
  Index dilation = 1;
  Index groups = 1;
};

Index conv1d_output_length(Index length, Index kernel, const Conv1dOptions& o);

// Cross-correlation. x [C_in x L] or [B x C_in x L]; kernel
// [C_out x C_in/groups x k]; bias [C_out] or nullptr.
Tensor conv1d_raw(Tape* tape, const Tensor& x, const Tensor& kernel,
                  const Tensor* bias, const Conv1dOptions& options = {});

// Per-channel normalization over the length axis, biased variance, no affine.
Tensor instance_norm_1d(Tape* tape, const Tensor& x, Scalar eps = 1e-5);

// Mean over the length axis: [.. x C x L] -> [.. x C].
Tensor adaptive_avg_pool_to_1(Tape* tape, const Tensor& x);

// Inverted scaling: at train time kept values are divided by 1 - p, so
// inference applies no rescale. train = false (or p = 0) is the identity.
Tensor dropout(Tape* tape, const Tensor& x, Scalar p, bool train, Rng& rng);

// table [V x d], indices length batch*length (row-major) -> [B x d x L].
// frozen_row (the PAD row) never receives gradient; pass -1 to disable.
Tensor embedding_lookup(Tape* tape, const Tensor& table,
                        const std::vector<int32_t>& indices, Index batch,
                        Index length, Index frozen_row = -1);

// Expands every element through the B-spline basis: [.. x C x L] ->
// [.. x C*n_basis x L], row c*n_basis + t holding B_t applied to channel c.
Tensor basis_expand(Tape* tape, const Tensor& x, const SplineGrid& grid);

// Spline half of a KAN layer: x [B x n_in], spline_weight
// [n_out x n_in x n_basis], spline_scaler [n_out x n_in] -> [B x n_out],
// out[b,j] = sum_i scaler[j,i] * sum_t weight[j,i,t] * B_t(x[b,i]).
Tensor kan_spline(Tape* tape, const Tensor& x, const Tensor& spline_weight,
                  const Tensor& spline_scaler, const SplineGrid& grid);

// Mean cross-entropy between softmax(logits) and integer labels.
// logits [B x C] (or [C] with a single label) -> scalar.
Tensor softmax_cross_entropy(Tape* tape, const Tensor& logits,
                             const std::vector<int32_t>& labels);

}  // namespace kaconv
