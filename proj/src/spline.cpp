#include "kaconv/spline.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <sstream>

namespace kaconv {

VecX SplineGrid::interior_points() const {
  VecX points(grid_size + 1);
  const Scalar h = spacing();
  for (int j = 0; j <= grid_size; ++j)
    points[j] = range_lo + h * static_cast<Scalar>(j);
  points[grid_size] = range_hi;
  return points;
}

SplineGrid make_uniform_grid(int grid_size, int spline_order, Scalar lo,
                             Scalar hi, Scalar grid_eps) {
  require(grid_size >= 1, ErrorKind::invalid_argument,
          "grid_size must be >= 1, got " + std::to_string(grid_size));
  require(spline_order >= 0, ErrorKind::invalid_argument,
          "spline_order must be >= 0, got " + std::to_string(spline_order));
  require(lo < hi, ErrorKind::invalid_argument,
          "grid range must satisfy lo < hi, got [" + std::to_string(lo) +
              ", " + std::to_string(hi) + "]");
  require(grid_eps >= 0.0 && grid_eps <= 1.0, ErrorKind::invalid_argument,
          "grid_eps must lie in [0, 1]");

  SplineGrid grid;
  grid.grid_size = grid_size;
  grid.spline_order = spline_order;
  grid.range_lo = lo;
  grid.range_hi = hi;
  grid.grid_eps = grid_eps;

  const Scalar h = (hi - lo) / static_cast<Scalar>(grid_size);
  const Index n_knots = grid_size + 2 * spline_order + 1;
  grid.knots.resize(n_knots);
  for (Index i = 0; i < n_knots; ++i)
    grid.knots[i] = lo + h * static_cast<Scalar>(i - spline_order);
  return grid;
}

namespace {

void check_grid(const SplineGrid& grid) {
  require(grid.knots.size() ==
              static_cast<Index>(grid.grid_size + 2 * grid.spline_order + 1),
          ErrorKind::invalid_argument, "grid knot vector has wrong length");
}

}  // namespace

VecX bspline_basis(Scalar x, const SplineGrid& grid) {
  check_grid(grid);
  VecX basis(grid.n_basis());
  VecX work(2 * (grid.knots.size() - 1));
  bspline_basis_core<Scalar>(x, grid.knots.data(), grid.knots.size(),
                             grid.spline_order, basis.data(), nullptr,
                             work.data());
  return basis;
}

VecX bspline_basis_derivative(Scalar x, const SplineGrid& grid) {
  check_grid(grid);
  VecX basis(grid.n_basis());
  VecX deriv(grid.n_basis());
  VecX work(2 * (grid.knots.size() - 1));
  bspline_basis_core<Scalar>(x, grid.knots.data(), grid.knots.size(),
                             grid.spline_order, basis.data(), deriv.data(),
                             work.data());
  return deriv;
}

MatX bspline_basis_matrix(const VecX& xs, const SplineGrid& grid) {
  check_grid(grid);
  MatX out(xs.size(), grid.n_basis());
  VecX row(grid.n_basis());
  VecX work(2 * (grid.knots.size() - 1));
  for (Index i = 0; i < xs.size(); ++i) {
    bspline_basis_core<Scalar>(xs[i], grid.knots.data(), grid.knots.size(),
                               grid.spline_order, row.data(), nullptr,
                               work.data());
    out.row(i) = row.transpose();
  }
  return out;
}

Scalar eval_spline(const VecX& coeffs, Scalar x, const SplineGrid& grid) {
  require(coeffs.size() == grid.n_basis(), ErrorKind::invalid_argument,
          "coefficient count " + std::to_string(coeffs.size()) +
              " does not match basis count " + std::to_string(grid.n_basis()));
  return bspline_basis(x, grid).dot(coeffs);
}

SplineFit fit_spline_coeffs(const VecX& xs, const MatX& ys,
                            const SplineGrid& grid) {
  require(xs.size() >= 1, ErrorKind::invalid_argument,
          "fit_spline_coeffs needs at least one sample point");
  require(ys.rows() == xs.size(), ErrorKind::invalid_argument,
          "ys has " + std::to_string(ys.rows()) + " rows but xs has " +
              std::to_string(xs.size()) + " points");

  const MatX design = bspline_basis_matrix(xs, grid);
  const Index n = grid.n_basis();

  SplineFit fit;
  MatX solution;  // [n_basis x n_funcs]
  if (xs.size() >= n) {
    Eigen::ColPivHouseholderQR<MatX> qr(design);
    if (qr.rank() == n) {
      solution = qr.solve(ys);
    } else {
      fit.ridge_applied = true;
    }
  } else {
    fit.ridge_applied = true;
  }
  if (fit.ridge_applied) {
    MatX gram = design.transpose() * design;
    gram.diagonal().array() += 1e-8;
    solution = Eigen::LDLT<MatX>(gram).solve(design.transpose() * ys);
  }

  fit.residual = (design * solution - ys).norm();
  fit.coeffs = solution.transpose();
  return fit;
}

}  // namespace kaconv
