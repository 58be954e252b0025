#pragma once

// B-spline grids, Cox-de Boor basis evaluation, and least-squares fitting
// of spline coefficients. Everything here is a pure function of its inputs;
// grids are immutable once constructed.

#include "kaconv/common.hpp"

namespace kaconv {

// Uniform knot grid over [range_lo, range_hi] with G intervals and degree k,
// extended by k uniformly spaced knots on each side. G intervals of degree k
// yield G + k basis functions.
struct SplineGrid {
  int grid_size = 5;     // G, number of interior intervals
  int spline_order = 3;  // k, B-spline degree
  Scalar range_lo = -1.0;
  Scalar range_hi = 1.0;
  Scalar grid_eps = 0.02;  // adaptive/uniform blend factor; stored, not acted on
  VecX knots;              // G + 2k + 1 strictly increasing values

  int n_basis() const { return grid_size + spline_order; }
  Scalar spacing() const {
    return (range_hi - range_lo) / static_cast<Scalar>(grid_size);
  }
  // The G + 1 uniformly spaced points lo, lo + h, ..., hi.
  VecX interior_points() const;
};

SplineGrid make_uniform_grid(int grid_size, int spline_order, Scalar lo,
                             Scalar hi, Scalar grid_eps = 0.02);

// Cox-de Boor recursion over the full extended knot vector, templated on the
// scalar type. Writes n_basis = n_knots - 1 - degree values to `basis`; if
// `deriv` is non-null, also writes the analytic first derivative. `work`
// must hold at least 2 * (n_knots - 1) scalars. Points outside the extended
// knot range produce all-zero rows.
template <class T>
void bspline_basis_core(T x, const T* knots, Index n_knots, int degree,
                        T* basis, T* deriv, T* work) {
  const Index n_cells = n_knots - 1;
  T* current = work;
  T* previous = work + n_cells;
  for (Index t = 0; t < n_cells; ++t)
    current[t] = (x >= knots[t] && x < knots[t + 1]) ? T(1) : T(0);
  for (int d = 1; d <= degree; ++d) {
    std::swap(current, previous);
    const Index width = n_cells - d;
    if (deriv != nullptr && d == degree) {
      // B'_{t,k}(x) = k * (B_{t,k-1}/(t_{t+k}-t_t) - B_{t+1,k-1}/(t_{t+k+1}-t_{t+1}))
      for (Index t = 0; t < width; ++t) {
        deriv[t] = static_cast<T>(degree) *
                   (previous[t] / (knots[t + degree] - knots[t]) -
                    previous[t + 1] / (knots[t + degree + 1] - knots[t + 1]));
      }
    }
    for (Index t = 0; t < width; ++t) {
      current[t] = (x - knots[t]) / (knots[t + d] - knots[t]) * previous[t] +
                   (knots[t + d + 1] - x) / (knots[t + d + 1] - knots[t + 1]) *
                       previous[t + 1];
    }
  }
  const Index n_basis = n_cells - degree;
  for (Index t = 0; t < n_basis; ++t) basis[t] = current[t];
  if (deriv != nullptr && degree == 0)
    for (Index t = 0; t < n_basis; ++t) deriv[t] = T(0);
}

// Scratch-owning convenience wrappers.
VecX bspline_basis(Scalar x, const SplineGrid& grid);
VecX bspline_basis_derivative(Scalar x, const SplineGrid& grid);
// One row per evaluation point, n_basis columns.
MatX bspline_basis_matrix(const VecX& xs, const SplineGrid& grid);

// spline(x) = sum_t coeffs[t] * B_t(x)
Scalar eval_spline(const VecX& coeffs, Scalar x, const SplineGrid& grid);

struct SplineFit {
  MatX coeffs;            // one row of n_basis coefficients per target function
  Scalar residual = 0.0;  // Frobenius norm of (B * coeffs^T - ys)
  bool ridge_applied = false;
};

// Least squares of ys (one column per target function, sampled at xs) onto
// the basis. A rank-deficient system falls back to ridge-regularized normal
// equations with lambda = 1e-8, reported via `ridge_applied`.
SplineFit fit_spline_coeffs(const VecX& xs, const MatX& ys,
                            const SplineGrid& grid);

}  // namespace kaconv
