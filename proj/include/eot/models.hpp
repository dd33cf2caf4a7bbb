#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "eot/errors.hpp"
#include "eot/geometry.hpp"
#include "eot/random.hpp"

namespace eot {

template <int D>
struct KinematicState {
  Vec<D> p = Vec<D>::Zero();
  Vec<D> v = Vec<D>::Zero();
  /// Optional per-object measurement rate, used with RateKind::StateComponent.
  double rate = 0.0;
};

template <int D>
struct Particle {
  KinematicState<D> x;
  Mat<D> E = Mat<D>::Identity();
  double w = 0.0;
};

/// Axis-aligned rectangle (or box) used as region of interest.
template <int D>
struct Box {
  Vec<D> lo = Vec<D>::Constant(-150.0);
  Vec<D> hi = Vec<D>::Constant(150.0);

  [[nodiscard]] double volume() const { return (hi - lo).prod(); }
  [[nodiscard]] bool contains(const Vec<D>& z) const {
    return (z.array() >= lo.array()).all() && (z.array() <= hi.array()).all();
  }
};

enum class RotationPolicy { Identity, HeadingAligned };

template <int D>
struct TransitionModel {
  double T = 0.2;
  double sigma_c = 1.0;
  double q = 20000.0;
  RotationPolicy rotation = RotationPolicy::Identity;

  void validate() const {
    if (!(q > D - 1)) throw Error(ErrorCode::InvalidModel, "Wishart degrees of freedom must exceed d-1");
    if (!(sigma_c > 0.0) || !(T > 0.0)) throw Error(ErrorCode::InvalidModel, "sigma_c and T must be positive");
    if (D != 2 && rotation == RotationPolicy::HeadingAligned)
      throw Error(ErrorCode::InvalidModel, "heading-aligned rotation is only defined in 2-D");
  }
};

enum class RateKind { Fixed, Density, StateComponent };

struct RateSpec {
  RateKind kind = RateKind::Fixed;
  /// mu_m for Fixed, rho for Density; unused for StateComponent.
  double value = 8.0;
};

template <int D>
struct MeasurementModel {
  ShapeKind shape = ShapeKind::GaussianExtent;
  Mat<D> sigma_u = Mat<D>::Identity();  // noise covariance
  double mu_fa = 10.0;
  Box<D> roi;
  RateSpec rate;

  [[nodiscard]] double clutter_pdf(const Vec<D>& z) const { return roi.contains(z) ? 1.0 / roi.volume() : 0.0; }

  /// mu_fa * f_fa(z), strictly positive on the ROI for a valid model.
  [[nodiscard]] double clutter_intensity(const Vec<D>& z) const { return mu_fa * clutter_pdf(z); }

  [[nodiscard]] bool iid_noise() const {
    const double s = sigma_u(0, 0);
    for (int r = 0; r < D; ++r)
      for (int c = 0; c < D; ++c) {
        const double expect = r == c ? s : 0.0;
        if (std::abs(sigma_u(r, c) - expect) > 1e-12 * s) return false;
      }
    return true;
  }

  void validate() const {
    if (!(mu_fa > 0.0)) throw Error(ErrorCode::InvalidModel, "clutter intensity mu_fa * f_fa must be positive");
    if (!(roi.volume() > 0.0)) throw Error(ErrorCode::InvalidModel, "ROI is empty");
    if (!is_symmetric<D>(sigma_u)) throw Error(ErrorCode::InvalidModel, "noise covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat<D>> es(sigma_u);
    if (!(es.eigenvalues().minCoeff() > 0.0)) throw Error(ErrorCode::InvalidModel, "noise covariance must be PD");
    if (rate.kind != RateKind::StateComponent && !(rate.value >= 0.0))
      throw Error(ErrorCode::InvalidModel, "measurement rate must be nonnegative");
  }
};

template <int D>
struct BirthModel {
  double mu_n = 0.01;
  Box<D> roi;
  Mat<D> velocity_cov = 100.0 * Mat<D>::Identity();
  Mat<D> extent_mean = 3.0 * Mat<D>::Identity();
  double extent_dof = 100.0;
  /// Gamma prior for the rate component (only used with StateComponent rates).
  double rate_shape = 8.0;
  double rate_scale = 1.0;

  void validate() const {
    if (!(mu_n > 0.0)) throw Error(ErrorCode::InvalidModel, "mu_n must be positive");
    if (!(extent_dof > D + 1)) throw Error(ErrorCode::InvalidModel, "extent prior dof must exceed d+1");
    if (!(roi.volume() > 0.0)) throw Error(ErrorCode::InvalidModel, "birth ROI is empty");
  }
};

// ---------------------------------------------------------------- special fns

/// Gaussian tail probability Q(x) = P(N(0,1) > x).
inline double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double log_multivariate_gamma(int d, double a) {
  double out = 0.25 * d * (d - 1) * std::log(std::numbers::pi);
  for (int j = 0; j < d; ++j) out += std::lgamma(a - 0.5 * j);
  return out;
}

template <int D>
double log_gaussian_pdf(const Vec<D>& x, const Vec<D>& mean, const Mat<D>& cov) {
  Eigen::LLT<Mat<D>> llt(cov);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Vec<D> r = llt.matrixL().solve(x - mean);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (r.squaredNorm() + logdet + D * std::log(2.0 * std::numbers::pi));
}

// ---------------------------------------------------------- Wishart family

/// Square-root factor L with L L^T = S; Cholesky when S is PD, symmetric
/// eigen square root otherwise.
template <int D>
Mat<D> psd_sqrt_factor(const Mat<D>& S) {
  Eigen::LLT<Mat<D>> llt(S);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Mat<D>> es(0.5 * (S + S.transpose()));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

/// Wishart draw with `dof` degrees of freedom and the given scale (mean
/// dof * scale) via the Bartlett decomposition.
template <int D>
Mat<D> sample_wishart(double dof, const Mat<D>& scale, Rng& rng) {
  if (!(dof > D - 1)) throw Error(ErrorCode::InvalidModel, "Wishart dof must exceed d-1");
  Mat<D> A = Mat<D>::Zero();
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < D; ++i) {
    std::chi_squared_distribution<double> chi2(dof - i);
    A(i, i) = std::sqrt(chi2(rng));
    for (int j = 0; j < i; ++j) A(i, j) = normal(rng);
  }
  const Mat<D> B = psd_sqrt_factor<D>(scale) * A;
  return clamp_psd<D>(B * B.transpose(), 1e-12);
}

template <int D>
double wishart_log_pdf(const Mat<D>& X, double dof, const Mat<D>& scale) {
  Eigen::LLT<Mat<D>> lx(X), ls(scale);
  if (lx.info() != Eigen::Success || ls.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const double logdet_x = 2.0 * Mat<D>(lx.matrixL()).diagonal().array().log().sum();
  const double logdet_s = 2.0 * Mat<D>(ls.matrixL()).diagonal().array().log().sum();
  const double tr = ls.solve(X).trace();
  return 0.5 * (dof - D - 1) * logdet_x - 0.5 * tr - 0.5 * dof * D * std::log(2.0) - 0.5 * dof * logdet_s -
         log_multivariate_gamma(D, 0.5 * dof);
}

/// Inverse-Wishart parameterised by its mean; requires dof > d + 1.
template <int D>
Mat<D> sample_inverse_wishart_mean(const Mat<D>& mean, double dof, Rng& rng) {
  if (!(dof > D + 1)) throw Error(ErrorCode::InvalidModel, "inverse-Wishart dof must exceed d+1");
  const Mat<D> psi = mean * (dof - D - 1);
  const Mat<D> X = sample_wishart<D>(dof, Mat<D>(psi.inverse()), rng);
  return clamp_psd<D>(Mat<D>(X.inverse()), 1e-12);
}

template <int D>
double inverse_wishart_mean_log_pdf(const Mat<D>& E, const Mat<D>& mean, double dof) {
  const Mat<D> psi = mean * (dof - D - 1);
  Eigen::LLT<Mat<D>> le(E);
  if (le.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const double logdet_e = 2.0 * Mat<D>(le.matrixL()).diagonal().array().log().sum();
  const double logdet_psi = std::log(psi.determinant());
  const double tr = le.solve(psi).trace();
  return 0.5 * dof * logdet_psi - 0.5 * dof * D * std::log(2.0) - log_multivariate_gamma(D, 0.5 * dof) -
         0.5 * (dof + D + 1) * logdet_e - 0.5 * tr;
}

// ---------------------------------------------------------- transition

template <int D>
Mat<D> rotation_for(const TransitionModel<D>& model, const Vec<D>& v_old, const Vec<D>& v_new) {
  if constexpr (D == 2) {
    if (model.rotation == RotationPolicy::HeadingAligned && v_old.norm() > 0.0 && v_new.norm() > 0.0) {
      const double a = std::atan2(v_new(1), v_new(0)) - std::atan2(v_old(1), v_old(0));
      Mat<D> R;
      R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
      return R;
    }
  }
  return Mat<D>::Identity();
}

/// Nearly-constant-velocity propagation of the kinematic state followed by a
/// Wishart draw of the extent around V E V^T.
template <int D>
void sample_transition_inplace(KinematicState<D>& x, Mat<D>& E, const TransitionModel<D>& model, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec<D> nu;
  for (int i = 0; i < D; ++i) nu(i) = model.sigma_c * normal(rng);
  const Vec<D> v_old = x.v;
  x.p += model.T * x.v + 0.5 * model.T * model.T * nu;
  x.v += model.T * nu;
  const Mat<D> V = rotation_for<D>(model, v_old, x.v);
  E = sample_wishart<D>(model.q, Mat<D>(V * E * V.transpose() / model.q), rng);
}

template <int D>
std::pair<KinematicState<D>, Mat<D>> sample_transition(const KinematicState<D>& x, const Mat<D>& E,
                                                       const TransitionModel<D>& model, Rng& rng) {
  model.validate();
  KinematicState<D> xn = x;
  Mat<D> En = E;
  sample_transition_inplace<D>(xn, En, model, rng);
  return {xn, En};
}

/// Transition density f(x', E' | x, E). The kinematic noise lives on a D-dim
/// subspace of the 2D-dim state, so the density is taken with respect to the
/// measure on that subspace; states off it get density zero.
template <int D>
double transition_density(const KinematicState<D>& xn, const Mat<D>& En, const KinematicState<D>& x, const Mat<D>& E,
                          const TransitionModel<D>& model) {
  if (xn.rate != x.rate) return 0.0;
  Eigen::Matrix<double, 2 * D, D> W;
  W.template topRows<D>() = 0.5 * model.T * model.T * Mat<D>::Identity();
  W.template bottomRows<D>() = model.T * Mat<D>::Identity();
  Eigen::Matrix<double, 2 * D, 1> r;
  r.template head<D>() = xn.p - (x.p + model.T * x.v);
  r.template tail<D>() = xn.v - x.v;
  const Vec<D> c = (W.transpose() * W).ldlt().solve(W.transpose() * r);
  if ((W * c - r).norm() > 1e-9 * std::max(1.0, r.norm())) return 0.0;
  const double jac = 1.0 / std::sqrt((W.transpose() * W).determinant());
  const double log_kin = log_gaussian_pdf<D>(c, Vec<D>::Zero(), Mat<D>(model.sigma_c * model.sigma_c * Mat<D>::Identity()));
  const Mat<D> V = rotation_for<D>(model, x.v, xn.v);
  const double log_ext = wishart_log_pdf<D>(En, model.q, Mat<D>(V * E * V.transpose() / model.q));
  return jac * std::exp(log_kin + log_ext);
}

/// Augmented transition including the existence variable. r = 0 cannot turn
/// into r' = 1; the dummy pdf for nonexistent states is marginalised out.
template <int D>
double survival_transition_density(const KinematicState<D>& xn, const Mat<D>& En, int rn, const KinematicState<D>& x,
                                   const Mat<D>& E, int r, double p_s, const TransitionModel<D>& model) {
  if (r == 0) return rn == 0 ? 1.0 : 0.0;
  if (rn == 0) return 1.0 - p_s;
  return p_s * transition_density<D>(xn, En, x, E, model);
}

// ---------------------------------------------------------- measurement

template <int D>
double measurement_rate(const KinematicState<D>& x, const Mat<D>& E, const MeasurementModel<D>& model) {
  switch (model.rate.kind) {
    case RateKind::Fixed: return model.rate.value;
    case RateKind::Density: {
      const ShapeKind s = model.shape == ShapeKind::GaussianExtent ? ShapeKind::UniformEllipse : model.shape;
      return model.rate.value * support_volume<D>(E, s);
    }
    case RateKind::StateComponent: return x.rate;
  }
  return 0.0;
}

/// Per-particle quantities of the likelihood that do not depend on z.
template <int D>
struct PreparedExtent {
  // GaussianExtent
  Mat<D> chol_inv = Mat<D>::Identity();
  double log_norm = 0.0;
  // uniform shapes
  Support<D> support;
  double inv_volume = 0.0;
  bool exact_cube = false;
  double sigma = 0.0;
  // rate of this particle
  double mu_m = 0.0;
};

template <int D>
PreparedExtent<D> prepare_extent(const KinematicState<D>& x, const Mat<D>& E, const MeasurementModel<D>& model) {
  PreparedExtent<D> pe;
  if (model.shape == ShapeKind::GaussianExtent) {
    const Mat<D> cov = E * E + model.sigma_u;
    Eigen::LLT<Mat<D>> llt(cov);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::NumericalFailure, "likelihood covariance not PD");
    const Mat<D> L = llt.matrixL();
    pe.chol_inv = L.inverse();
    pe.log_norm = -L.diagonal().array().log().sum() - 0.5 * D * std::log(2.0 * std::numbers::pi);
    pe.mu_m = model.rate.kind == RateKind::Density ? model.rate.value * support_volume<D>(E, ShapeKind::UniformEllipse)
                                                   : measurement_rate<D>(x, E, model);
  } else {
    pe.support = make_support<D>(E, model.shape);
    pe.inv_volume = 1.0 / pe.support.volume;
    pe.exact_cube = model.shape == ShapeKind::UniformCube && model.iid_noise();
    pe.sigma = std::sqrt(model.sigma_u(0, 0));
    pe.mu_m = model.rate.kind == RateKind::Density ? model.rate.value * pe.support.volume
                                                   : measurement_rate<D>(x, E, model);
  }
  return pe;
}

/// Q-function approximation of the uniform-support convolution: the noise is
/// projected onto the boundary normal through the closest boundary point.
template <int D>
double uniform_q_approx(const Support<D>& s, const Vec<D>& center, const Vec<D>& z, const Mat<D>& sigma_u) {
  const auto b = boundary_distance<D>(s, center, z);
  const double sz = std::sqrt(b.normal.dot(sigma_u * b.normal));
  const double arg = b.inside ? -b.distance / sz : b.distance / sz;
  return q_function(arg) / s.volume;
}

/// Per-axis probability that a uniform coordinate in [-h, h] plus N(0, s^2)
/// noise lands at y, times 2h (i.e. P(|y - n| <= h)).
inline double slab_mass(double y, double h, double sigma) {
  if (y > h) return q_function((y - h) / sigma) - q_function((y + h) / sigma);
  if (y < -h) return q_function((-y - h) / sigma) - q_function((h - y) / sigma);
  return 1.0 - q_function((h - y) / sigma) - q_function((h + y) / sigma);
}

/// Exact cube likelihood for isotropic noise with standard deviation sigma.
template <int D>
double cube_exact(const Support<D>& s, const Vec<D>& center, const Vec<D>& z, double sigma) {
  const Vec<D> y = s.axes.transpose() * (z - center);
  double out = 1.0 / s.volume;
  for (int i = 0; i < D; ++i) out *= std::max(0.0, slab_mass(y(i), s.half(i), sigma));
  return out;
}

template <int D>
double likelihood(const PreparedExtent<D>& pe, const Vec<D>& p, const Vec<D>& z, const MeasurementModel<D>& model) {
  if (model.shape == ShapeKind::GaussianExtent) {
    const Vec<D> r = pe.chol_inv.template triangularView<Eigen::Lower>() * (z - p);
    return std::exp(pe.log_norm - 0.5 * r.squaredNorm());
  }
  if (pe.exact_cube) return cube_exact<D>(pe.support, p, z, pe.sigma);
  return uniform_q_approx<D>(pe.support, p, z, model.sigma_u);
}

template <int D>
double likelihood(const Vec<D>& z, const KinematicState<D>& x, const Mat<D>& E, const MeasurementModel<D>& model) {
  return likelihood<D>(prepare_extent<D>(x, E, model), x.p, z, model);
}

// ---------------------------------------------------------- birth

template <int D>
std::pair<KinematicState<D>, Mat<D>> birth_sample(const BirthModel<D>& birth, bool with_rate, Rng& rng) {
  KinematicState<D> x;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < D; ++i) x.p(i) = birth.roi.lo(i) + (birth.roi.hi(i) - birth.roi.lo(i)) * u(rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec<D> n;
  for (int i = 0; i < D; ++i) n(i) = normal(rng);
  x.v = psd_sqrt_factor<D>(birth.velocity_cov) * n;
  if (with_rate) {
    std::gamma_distribution<double> g(birth.rate_shape, birth.rate_scale);
    x.rate = g(rng);
  }
  return {x, sample_inverse_wishart_mean<D>(birth.extent_mean, birth.extent_dof, rng)};
}

template <int D>
double birth_position_pdf(const BirthModel<D>& birth, const Vec<D>& p) {
  return birth.roi.contains(p) ? 1.0 / birth.roi.volume() : 0.0;
}

/// log f_n(x, E); -inf outside the prior support.
template <int D>
double birth_log_density(const BirthModel<D>& birth, const KinematicState<D>& x, const Mat<D>& E, bool with_rate) {
  const double pp = birth_position_pdf<D>(birth, x.p);
  if (pp <= 0.0) return -std::numeric_limits<double>::infinity();
  double out = std::log(pp) + log_gaussian_pdf<D>(x.v, Vec<D>::Zero(), birth.velocity_cov) +
               inverse_wishart_mean_log_pdf<D>(E, birth.extent_mean, birth.extent_dof);
  if (with_rate) {
    if (!(x.rate > 0.0)) return -std::numeric_limits<double>::infinity();
    const double k = birth.rate_shape, th = birth.rate_scale;
    out += (k - 1.0) * std::log(x.rate) - x.rate / th - std::lgamma(k) - k * std::log(th);
  }
  return out;
}

template <int D>
double birth_density(const BirthModel<D>& birth, const KinematicState<D>& x, const Mat<D>& E, bool with_rate = false) {
  return std::exp(birth_log_density<D>(birth, x, E, with_rate));
}

/// Everything the tracker needs about the world, bundled.
template <int D>
struct Models {
  TransitionModel<D> transition;
  MeasurementModel<D> measurement;
  BirthModel<D> birth;
  double p_s = 0.99;

  [[nodiscard]] bool uses_rate_state() const { return measurement.rate.kind == RateKind::StateComponent; }

  void validate() const {
    transition.validate();
    measurement.validate();
    birth.validate();
    if (!(p_s >= 0.0 && p_s <= 1.0)) throw Error(ErrorCode::InvalidModel, "p_s must lie in [0,1]");
  }
};

}  // namespace eot
