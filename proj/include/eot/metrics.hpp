#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "eot/errors.hpp"
#include "eot/geometry.hpp"

namespace eot {

enum class BaseDistance { GaussianWasserstein, Euclidean };

struct MetricConfig {
  double p = 1.0;
  double c = 20.0;
  BaseDistance base = BaseDistance::GaussianWasserstein;
  double gospa_alpha = 2.0;

  void validate() const {
    if (!(p >= 1.0) || !(c > 0.0)) throw Error(ErrorCode::InvalidConfig, "metric needs p >= 1 and c > 0");
    if (gospa_alpha != 2.0) throw Error(ErrorCode::InvalidConfig, "only alpha = 2 is supported for GOSPA");
  }
};

template <int D>
struct MetricObject {
  Vec<D> p = Vec<D>::Zero();
  Mat<D> E = Mat<D>::Zero();
};

template <int D>
Mat<D> psd_sqrtm(const Mat<D>& X) {
  Eigen::SelfAdjointEigenSolver<Mat<D>> es(0.5 * (X + X.transpose()));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

/// Gaussian-Wasserstein distance between N(p_a, E_a^2) and N(p_b, E_b^2).
template <int D>
double gaussian_wasserstein(const MetricObject<D>& a, const MetricObject<D>& b) {
  const Mat<D> Xa = a.E * a.E;
  const Mat<D> Xb = b.E * b.E;
  const Mat<D> Sa = psd_sqrtm<D>(Xa);
  const Mat<D> cross = psd_sqrtm<D>(Mat<D>(Sa * Xb * Sa));
  const double d2 = (a.p - b.p).squaredNorm() + (Xa + Xb - 2.0 * cross).trace();
  return std::sqrt(std::max(d2, 0.0));
}

template <int D>
double base_distance(const MetricObject<D>& a, const MetricObject<D>& b, BaseDistance base) {
  return base == BaseDistance::Euclidean ? (a.p - b.p).norm() : gaussian_wasserstein<D>(a, b);
}

/// Minimum-cost assignment for a rectangular cost matrix. Returns, for
/// every row, the assigned column or -1; exactly min(rows, cols) rows are
/// assigned.
inline std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);
  if (rows > cols) {
    const std::vector<int> t = hungarian(cost.transpose());
    std::vector<int> out(rows, -1);
    for (int c = 0; c < cols; ++c)
      if (t[c] >= 0) out[t[c]] = c;
    return out;
  }
  // potentials method, rows <= cols, 1-based internals
  const int n = rows, m = cols;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) out[p[j] - 1] = j - 1;
  return out;
}

struct OspaResult {
  double total = 0.0;
  double state = 0.0;
  double cardinality = 0.0;
  /// truth index -> estimate index (or -1)
  std::vector<int> assignment;
};

template <int D>
OspaResult ospa(const std::vector<MetricObject<D>>& truth, const std::vector<MetricObject<D>>& est,
                const MetricConfig& cfg) {
  OspaResult out;
  const auto n = truth.size(), m = est.size();
  out.assignment.assign(n, -1);
  if (n == 0 && m == 0) return out;
  const double cp = std::pow(cfg.c, cfg.p);
  const std::size_t big = std::max(n, m), small = std::min(n, m);
  double loc = 0.0;
  if (small > 0) {
    Eigen::MatrixXd C(n, m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        C(i, j) = std::pow(std::min(base_distance<D>(truth[i], est[j], cfg.base), cfg.c), cfg.p);
    out.assignment = hungarian(C);
    for (std::size_t i = 0; i < n; ++i)
      if (out.assignment[i] >= 0) loc += C(i, out.assignment[i]);
  }
  const double card = cp * static_cast<double>(big - small);
  const double b = static_cast<double>(big);
  out.state = std::pow(loc / b, 1.0 / cfg.p);
  out.cardinality = std::pow(card / b, 1.0 / cfg.p);
  out.total = std::pow((loc + card) / b, 1.0 / cfg.p);
  return out;
}

/// GOSPA with alpha = 2. The parts are p-th power contributions, so that
/// total^p = state + missed + false.
struct GospaResult {
  double total = 0.0;
  double state = 0.0;
  double missed = 0.0;
  double false_alarm = 0.0;
  std::vector<int> assignment;
};

template <int D>
GospaResult gospa(const std::vector<MetricObject<D>>& truth, const std::vector<MetricObject<D>>& est,
                  const MetricConfig& cfg) {
  GospaResult out;
  const auto n = truth.size(), m = est.size();
  out.assignment.assign(n, -1);
  const double cp = std::pow(cfg.c, cfg.p);
  std::size_t matched = 0;
  if (n > 0 && m > 0) {
    Eigen::MatrixXd C(n, m), Dm(n, m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        Dm(i, j) = base_distance<D>(truth[i], est[j], cfg.base);
        C(i, j) = std::min(std::pow(Dm(i, j), cfg.p), cp);
      }
    const auto a = hungarian(C);
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] >= 0 && Dm(i, a[i]) < cfg.c) {
        out.assignment[i] = a[i];
        out.state += std::pow(Dm(i, a[i]), cfg.p);
        ++matched;
      }
    }
  }
  out.missed = 0.5 * cp * static_cast<double>(n - matched);
  out.false_alarm = 0.5 * cp * static_cast<double>(m - matched);
  out.total = std::pow(out.state + out.missed + out.false_alarm, 1.0 / cfg.p);
  return out;
}

struct ShapeError {
  double size = 0.0;
  double orientation = 0.0;
};

/// Angular distance between two orientations defined modulo pi.
inline double orientation_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), std::numbers::pi);
  return std::min(d, std::numbers::pi - d);
}

template <int D>
std::vector<ShapeError> orientation_size_errors(const std::vector<MetricObject<D>>& truth,
                                                const std::vector<MetricObject<D>>& est,
                                                const std::vector<int>& assignment, ShapeKind shape) {
  std::vector<ShapeError> out;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (i >= assignment.size() || assignment[i] < 0) continue;
    const auto ta = eigen_decompose<D>(truth[i].E);
    const auto ea = eigen_decompose<D>(est[assignment[i]].E);
    auto size = [&](const Vec<D>& l) {
      const double prod = l.cwiseMax(0.0).prod();
      if (shape == ShapeKind::UniformCube) return prod;
      return D == 2 ? std::numbers::pi * prod : 4.0 / 3.0 * std::numbers::pi * prod;
    };
    auto angle = [](const Vec<D>& v) {
      double a = std::atan2(v(1), v(0));
      if (a < 0.0) a += std::numbers::pi;
      return a >= std::numbers::pi ? a - std::numbers::pi : a;
    };
    out.push_back({std::abs(size(ta.values) - size(ea.values)),
                   orientation_distance(angle(ta.vectors.col(0)), angle(ea.vectors.col(0)))});
  }
  return out;
}

}  // namespace eot
