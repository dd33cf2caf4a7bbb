#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "eot/errors.hpp"
#include "eot/models.hpp"
#include "eot/random.hpp"

namespace eot {

/// Tiny single-step problem with finite supports treated as exact.
/// Legacy supports carry prior weights w^- at their predicted states (the
/// transition is taken as the identity); new-PO supports carry the
/// initial new-PO weights.
template <int D>
struct DiscretizedInstance {
  std::vector<std::vector<Particle<D>>> legacy;
  std::vector<std::vector<Particle<D>>> fresh;
  std::vector<Vec<D>> z;
  Models<D> models;
};

struct EnumerationResult {
  /// assoc[l][v] = p(b_l = v), v in {0 (clutter), 1..K (legacy), K+1..K+l+1 (new)}.
  std::vector<std::vector<double>> assoc;
  std::vector<double> legacy_existence;
  std::vector<double> new_existence;
};

/// Exhaustive sum over all association vectors of the single-step joint
/// posterior. Factors are normalised by the clutter intensity of each
/// measurement, which is common to all configurations.
template <int D>
EnumerationResult enumerate_posterior(const DiscretizedInstance<D>& inst) {
  const int K = static_cast<int>(inst.legacy.size());
  const int M = static_cast<int>(inst.z.size());
  if (K > 3 || M > 4) throw Error(ErrorCode::TooLarge, "enumeration limited to K <= 3 and M <= 4");
  if (static_cast<int>(inst.fresh.size()) != M) throw Error(ErrorCode::InvalidModel, "one new PO per measurement");
  const auto& mm = inst.models.measurement;
  const int subsets = 1 << M;

  auto ratios = [&](const Particle<D>& p) {
    std::vector<double> r(M);
    const auto pe = prepare_extent<D>(p.x, p.E, mm);
    for (int l = 0; l < M; ++l) {
      const double c = mm.clutter_intensity(inst.z[l]);
      if (!(c > 0.0)) throw Error(ErrorCode::InvalidModel, "clutter intensity is zero at a measurement");
      r[l] = pe.mu_m * likelihood<D>(pe, p.x.p, inst.z[l], mm) / c;
    }
    return r;
  };

  // subset sums F[mask] = sum_j w_j prod_{l in mask} r_jl
  std::vector<std::vector<double>> F_legacy(K, std::vector<double>(subsets, 0.0));
  std::vector<double> alpha_n(K), exist_mass(K);
  for (int k = 0; k < K; ++k) {
    double prior = 0.0;
    for (const auto& p : inst.legacy[k]) prior += p.w;
    alpha_n[k] = std::max(0.0, 1.0 - prior) + (1.0 - inst.models.p_s) * prior;
    for (const auto& p : inst.legacy[k]) {
      const double w1 = inst.models.p_s * std::exp(-measurement_rate<D>(p.x, p.E, mm)) * p.w;
      const auto r = ratios(p);
      for (int mask = 0; mask < subsets; ++mask) {
        double t = w1;
        for (int l = 0; l < M; ++l)
          if (mask & (1 << l)) t *= r[l];
        F_legacy[k][mask] += t;
      }
    }
    exist_mass[k] = F_legacy[k][0];
  }
  std::vector<std::vector<double>> F_new(M, std::vector<double>(subsets, 0.0));
  for (int k = 0; k < M; ++k) {
    for (const auto& p : inst.fresh[k]) {
      const auto r = ratios(p);
      for (int mask = 0; mask < subsets; ++mask) {
        double t = p.w;
        for (int l = 0; l < M; ++l)
          if (mask & (1 << l)) t *= r[l];
        F_new[k][mask] += t;
      }
    }
  }

  EnumerationResult out;
  out.assoc.resize(M);
  for (int l = 0; l < M; ++l) out.assoc[l].assign(K + l + 2, 0.0);
  out.legacy_existence.assign(K, 0.0);
  out.new_existence.assign(M, 0.0);
  double total = 0.0;

  std::vector<int> b(M, 0);
  while (true) {
    bool valid = true;
    for (int l = 0; l < M && valid; ++l) {
      if (b[l] > K) {
        const int owner = b[l] - K - 1;
        valid = owner <= l && b[owner] == K + 1 + owner;
      }
    }
    if (valid) {
      std::vector<int> mask_legacy(K, 0), mask_new(M, 0);
      for (int l = 0; l < M; ++l) {
        if (b[l] >= 1 && b[l] <= K) mask_legacy[b[l] - 1] |= 1 << l;
        if (b[l] > K) mask_new[b[l] - K - 1] |= 1 << l;
      }
      std::vector<double> fac(K), fac_exist(K);
      double weight = 1.0;
      for (int k = 0; k < K; ++k) {
        if (mask_legacy[k]) {
          fac[k] = F_legacy[k][mask_legacy[k]];
          fac_exist[k] = fac[k];
        } else {
          fac[k] = alpha_n[k] + exist_mass[k];
          fac_exist[k] = exist_mass[k];
        }
        weight *= fac[k];
      }
      for (int k = 0; k < M; ++k)
        if (mask_new[k]) weight *= F_new[k][mask_new[k]];
      total += weight;
      for (int l = 0; l < M; ++l) out.assoc[l][b[l]] += weight;
      for (int k = 0; k < K; ++k) {
        double other = fac_exist[k];
        for (int k2 = 0; k2 < K; ++k2)
          if (k2 != k) other *= fac[k2];
        for (int k2 = 0; k2 < M; ++k2)
          if (mask_new[k2]) other *= F_new[k2][mask_new[k2]];
        out.legacy_existence[k] += other;
      }
      for (int k = 0; k < M; ++k)
        if (mask_new[k]) out.new_existence[k] += weight;
    }
    int l = 0;
    while (l < M) {
      if (++b[l] <= K + l + 1) break;
      b[l] = 0;
      ++l;
    }
    if (l == M) break;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::NumericalFailure, "enumeration normaliser is zero");
  for (auto& row : out.assoc)
    for (double& v : row) v /= total;
  for (double& v : out.legacy_existence) v /= total;
  for (double& v : out.new_existence) v /= total;
  return out;
}

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo value of the measurement density: the Gaussian extent
/// integrates over the reflection point, uniform shapes over the noise
/// (the indicator form has lower variance than averaging Gaussian kernels).
template <int D>
McEstimate mc_likelihood(const Vec<D>& z, const KinematicState<D>& x, const Mat<D>& E, ShapeKind shape,
                         const Mat<D>& sigma_u, std::int64_t N, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  double sum = 0.0, sum_sq = 0.0;
  if (shape == ShapeKind::GaussianExtent) {
    Eigen::LLT<Mat<D>> llt(sigma_u);
    const Mat<D> Linv = Mat<D>(llt.matrixL()).inverse();
    const double log_norm = -Mat<D>(llt.matrixL()).diagonal().array().log().sum() - 0.5 * D * std::log(2.0 * std::numbers::pi);
    for (std::int64_t i = 0; i < N; ++i) {
      Vec<D> n;
      for (int d = 0; d < D; ++d) n(d) = normal(rng);
      const Vec<D> r = Linv * (z - x.p - E * n);
      const double f = std::exp(log_norm - 0.5 * r.squaredNorm());
      sum += f;
      sum_sq += f * f;
    }
  } else {
    const auto s = make_support<D>(E, shape);
    const Mat<D> L = psd_sqrt_factor<D>(sigma_u);
    const double f_in = 1.0 / s.volume;
    for (std::int64_t i = 0; i < N; ++i) {
      Vec<D> n;
      for (int d = 0; d < D; ++d) n(d) = normal(rng);
      const Vec<D> y = s.axes.transpose() * (z - L * n - x.p);
      bool in = true;
      if (shape == ShapeKind::UniformCube) {
        for (int d = 0; d < D; ++d) in = in && std::abs(y(d)) <= s.half(d);
      } else {
        in = (y.array() / s.half.array()).square().sum() <= 1.0;
      }
      if (in) {
        sum += f_in;
        sum_sq += f_in * f_in;
      }
    }
  }
  McEstimate out;
  const double n = static_cast<double>(N);
  out.value = sum / n;
  const double var = std::max(0.0, sum_sq / n - out.value * out.value);
  out.std_error = std::sqrt(var / n);
  return out;
}

}  // namespace eot
