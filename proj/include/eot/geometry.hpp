#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "eot/errors.hpp"

namespace eot {

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;
template <int D>
using Mat = Eigen::Matrix<double, D, D>;

enum class ShapeKind { GaussianExtent, UniformEllipse, UniformCube };

inline const char* to_string(ShapeKind s) {
  switch (s) {
    case ShapeKind::GaussianExtent: return "gaussian";
    case ShapeKind::UniformEllipse: return "ellipse";
    case ShapeKind::UniformCube: return "cube";
  }
  return "?";
}

inline ShapeKind shape_from_string(const std::string& s) {
  if (s == "gaussian") return ShapeKind::GaussianExtent;
  if (s == "ellipse") return ShapeKind::UniformEllipse;
  if (s == "cube") return ShapeKind::UniformCube;
  throw Error(ErrorCode::InvalidConfig, "unknown shape '" + s + "'");
}

/// Number of unique entries of a symmetric D x D matrix.
constexpr int extent_vector_size(int d) { return d * (d + 1) / 2; }

/// Lower-triangle concatenation, column by column: (e11, e21, e22) in 2-D.
template <int D>
Eigen::Matrix<double, extent_vector_size(D), 1> extent_to_vector(const Mat<D>& E) {
  Eigen::Matrix<double, extent_vector_size(D), 1> e;
  int idx = 0;
  for (int c = 0; c < D; ++c)
    for (int r = c; r < D; ++r) e(idx++) = E(r, c);
  return e;
}

template <int D>
Mat<D> extent_from_vector(const Eigen::Matrix<double, extent_vector_size(D), 1>& e) {
  Mat<D> E;
  int idx = 0;
  for (int c = 0; c < D; ++c)
    for (int r = c; r < D; ++r) {
      E(r, c) = e(idx);
      E(c, r) = e(idx);
      ++idx;
    }
  return E;
}

template <int D>
bool is_symmetric(const Mat<D>& E, double rel_tol = 1e-12) {
  const double scale = std::max(E.cwiseAbs().maxCoeff(), 1e-300);
  return ((E - E.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale) && E.allFinite();
}

template <int D>
struct EigenStructure {
  Vec<D> values;   // descending
  Mat<D> vectors;  // columns, first nonzero component positive
};

template <int D>
EigenStructure<D> eigen_decompose(const Mat<D>& E) {
  if (!is_symmetric<D>(E)) throw Error(ErrorCode::InvalidExtent, "extent matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat<D>> solver;
  const Mat<D> S = 0.5 * (E + E.transpose());
  if constexpr (D == 2)
    solver.computeDirect(S);
  else
    solver.compute(S);
  EigenStructure<D> out;
  for (int i = 0; i < D; ++i) {
    out.values(i) = solver.eigenvalues()(D - 1 - i);
    Vec<D> v = solver.eigenvectors().col(D - 1 - i);
    for (int r = 0; r < D; ++r) {
      if (v(r) != 0.0) {
        if (v(r) < 0.0) v = -v;
        break;
      }
    }
    out.vectors.col(i) = v;
  }
  return out;
}

/// Rebuilds V diag(max(lambda, floor)) V^T; leaves the input untouched when
/// no eigenvalue is below the floor.
template <int D>
Mat<D> clamp_psd(const Mat<D>& M, double floor = 0.0) {
  Mat<D> S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Mat<D>> solver;
  solver.computeDirect(S);
  if (solver.eigenvalues().minCoeff() >= floor) return S;
  const Vec<D> lam = solver.eigenvalues().cwiseMax(floor);
  return solver.eigenvectors() * lam.asDiagonal() * solver.eigenvectors().transpose();
}

template <int D>
double support_volume_from_eigenvalues(const Vec<D>& lambda, ShapeKind shape) {
  if (!(lambda.minCoeff() > 1e-12 * std::max(lambda.maxCoeff(), 0.0)) || !(lambda.minCoeff() > 0.0))
    throw Error(ErrorCode::DegenerateSupport, "extent has a zero eigenvalue");
  const double prod = lambda.prod();
  if (shape == ShapeKind::UniformCube) return prod;
  if constexpr (D == 2) return std::numbers::pi * prod;
  return 4.0 / 3.0 * std::numbers::pi * prod;
}

/// Area or volume of the support. GaussianExtent is measured as the ellipse
/// with semi-axes equal to the eigenvalues.
template <int D>
double support_volume(const Mat<D>& E, ShapeKind shape) {
  return support_volume_from_eigenvalues<D>(eigen_decompose<D>(E).values, shape);
}

/// Precomputed local frame of a uniform support: principal axes plus
/// half-extents along them (ellipse semi-axes, or half the cube sides).
template <int D>
struct Support {
  ShapeKind shape = ShapeKind::UniformEllipse;
  Mat<D> axes = Mat<D>::Identity();
  Vec<D> half = Vec<D>::Ones();
  double volume = 0.0;
};

template <int D>
Support<D> make_support(const Mat<D>& E, ShapeKind shape) {
  const auto es = eigen_decompose<D>(E);
  Support<D> s;
  s.shape = shape;
  s.axes = es.vectors;
  s.volume = support_volume_from_eigenvalues<D>(es.values, shape);
  s.half = shape == ShapeKind::UniformCube ? Vec<D>(0.5 * es.values) : es.values;
  return s;
}

template <int D>
struct BoundaryInfo {
  double distance = 0.0;
  bool inside = false;
  Vec<D> normal = Vec<D>::Zero();
};

namespace detail {

/// Closest boundary point of the axis-aligned ellipsoid with semi-axes a
/// (descending) to y, all coordinates of y nonnegative. Only the first n
/// axes are active.
template <int D>
void ellipse_closest_first_orthant(const std::array<double, D>& a, const std::array<double, D>& y,
                                   std::array<double, D>& x, int n) {
  if (n == 1) {
    x[0] = a[0];
    return;
  }
  const int last = n - 1;
  if (y[last] > 0.0) {
    bool all_positive = true;
    for (int i = 0; i < last; ++i) all_positive = all_positive && y[i] > 0.0;
    if (!all_positive) {
      // Zero coordinates on the larger axes stay zero; solve on the rest.
      std::array<double, D> as{}, ys{}, xs{};
      int m = 0;
      for (int i = 0; i < n; ++i) {
        if (i == last || y[i] > 0.0) {
          as[m] = a[i];
          ys[m] = y[i];
          ++m;
        }
      }
      ellipse_closest_first_orthant<D>(as, ys, xs, m);
      m = 0;
      for (int i = 0; i < n; ++i) x[i] = (i == last || y[i] > 0.0) ? xs[m++] : 0.0;
      return;
    }
    // F(t) = sum (a_i y_i / (t + a_i^2))^2 - 1 is convex and decreasing;
    // Newton from the left bracket approaches the root monotonically.
    auto F = [&](double t, double& dF) {
      double f = -1.0;
      dF = 0.0;
      for (int i = 0; i < n; ++i) {
        const double r = a[i] * y[i] / (t + a[i] * a[i]);
        f += r * r;
        dF -= 2.0 * r * r / (t + a[i] * a[i]);
      }
      return f;
    };
    double norm_ay = 0.0;
    for (int i = 0; i < n; ++i) norm_ay += a[i] * a[i] * y[i] * y[i];
    double lo = -a[last] * a[last] + a[last] * y[last];
    double hi = std::sqrt(norm_ay) - a[last] * a[last];
    double t = lo;
    for (int iter = 0; iter < 200; ++iter) {
      double dF = 0.0;
      const double f = F(t, dF);
      if (f == 0.0) break;
      if (f > 0.0)
        lo = t;
      else
        hi = t;
      double next = (dF < 0.0) ? t - f / dF : 0.5 * (lo + hi);
      if (!(next > lo && next < hi) || iter >= 50) next = 0.5 * (lo + hi);
      const double scale = std::max(1.0, std::abs(t));
      if (std::abs(next - t) <= 1e-14 * scale || hi - lo <= 1e-14 * scale) {
        t = next;
        break;
      }
      t = next;
    }
    for (int i = 0; i < n; ++i) x[i] = a[i] * a[i] * y[i] / (t + a[i] * a[i]);
    return;
  }
  // y on the plane of the smallest axis: the closest point may leave it.
  bool interior = true;
  double discr = 1.0;
  std::array<double, D> xde{};
  for (int i = 0; i < last; ++i) {
    const double denom = a[i] * a[i] - a[last] * a[last];
    const double numer = a[i] * y[i];
    if (!(numer < denom)) {
      interior = false;
      break;
    }
    xde[i] = numer / denom;
    discr -= xde[i] * xde[i];
  }
  if (interior && discr > 0.0) {
    for (int i = 0; i < last; ++i) x[i] = a[i] * xde[i];
    x[last] = a[last] * std::sqrt(discr);
    return;
  }
  x[last] = 0.0;
  ellipse_closest_first_orthant<D>(a, y, x, last);
}

template <int D>
BoundaryInfo<D> ellipse_boundary_local(const Vec<D>& half, const Vec<D>& y_local) {
  std::array<double, D> a{}, y{}, x{};
  for (int i = 0; i < D; ++i) {
    a[i] = half(i);
    y[i] = std::abs(y_local(i));
  }
  ellipse_closest_first_orthant<D>(a, y, x, D);
  BoundaryInfo<D> out;
  Vec<D> xp;
  double level = 0.0;
  for (int i = 0; i < D; ++i) {
    xp(i) = std::copysign(x[i], y_local(i));
    level += (y_local(i) / a[i]) * (y_local(i) / a[i]);
  }
  out.inside = level <= 1.0;
  out.distance = (y_local - xp).norm();
  if (out.distance > 0.0) {
    out.normal = out.inside ? Vec<D>((xp - y_local) / out.distance) : Vec<D>((y_local - xp) / out.distance);
  } else {
    for (int i = 0; i < D; ++i) out.normal(i) = xp(i) / (a[i] * a[i]);
    out.normal.normalize();
  }
  return out;
}

template <int D>
BoundaryInfo<D> cube_boundary_local(const Vec<D>& half, const Vec<D>& y) {
  BoundaryInfo<D> out;
  out.inside = true;
  for (int i = 0; i < D; ++i) out.inside = out.inside && std::abs(y(i)) <= half(i);
  if (!out.inside) {
    const Vec<D> q = y.cwiseMax(-half).cwiseMin(half);
    out.distance = (y - q).norm();
    out.normal = (y - q) / out.distance;
    return out;
  }
  int best = 0;
  double best_d = half(0) - std::abs(y(0));
  for (int i = 1; i < D; ++i) {
    const double d = half(i) - std::abs(y(i));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  out.distance = best_d;
  out.normal = Vec<D>::Zero();
  out.normal(best) = y(best) < 0.0 ? -1.0 : 1.0;
  return out;
}

}  // namespace detail

/// Distance from z to the boundary of the support centred at `center`, with
/// the unit normal used to project the measurement noise.
template <int D>
BoundaryInfo<D> boundary_distance(const Support<D>& s, const Vec<D>& center, const Vec<D>& z) {
  const Vec<D> y = s.axes.transpose() * (z - center);
  BoundaryInfo<D> local = s.shape == ShapeKind::UniformCube ? detail::cube_boundary_local<D>(s.half, y)
                                                             : detail::ellipse_boundary_local<D>(s.half, y);
  local.normal = s.axes * local.normal;
  return local;
}

template <int D>
BoundaryInfo<D> boundary_distance(const Mat<D>& E, const Vec<D>& center, const Vec<D>& z, ShapeKind shape) {
  if (shape == ShapeKind::GaussianExtent)
    throw Error(ErrorCode::InvalidModel, "boundary distance needs a uniform shape");
  return boundary_distance<D>(make_support<D>(E, shape), center, z);
}

/// Distances from z to the two faces of a cube perpendicular to principal
/// axis `axis` (0-based): first the face along +eigenvector, then the other.
template <int D>
std::pair<double, double> cube_edge_distances(const Support<D>& s, const Vec<D>& center, const Vec<D>& z, int axis) {
  const double y = s.axes.col(axis).dot(z - center);
  const double h = s.half(axis);
  return {std::abs(h - y), std::abs(y + h)};
}

template <int D>
std::pair<double, double> cube_edge_distances(const Mat<D>& E, const Vec<D>& center, const Vec<D>& z, int axis) {
  return cube_edge_distances<D>(make_support<D>(E, ShapeKind::UniformCube), center, z, axis);
}

}  // namespace eot
