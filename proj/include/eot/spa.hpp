#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "eot/errors.hpp"
#include "eot/models.hpp"
#include "eot/parallel.hpp"
#include "eot/random.hpp"

namespace eot {

struct Label {
  std::int64_t step = 0;
  std::int64_t index = 0;
  auto operator<=>(const Label&) const = default;
};

enum class PoKind { Legacy, New };

template <int D>
struct PoBelief {
  std::vector<Particle<D>> particles;
  Label label;
  PoKind kind = PoKind::Legacy;

  /// Existence probability: the particle weights are not normalised to one.
  [[nodiscard]] double existence() const {
    double s = 0.0;
    for (const auto& p : particles) s += p.w;
    return s;
  }
};

struct SpaConfig {
  int P = 3;
  int J = 1000;
  double P_th = 0.5;
  double P_pr = 1e-3;
  std::optional<double> gate_radius;
  bool sort_measurements = false;
  int threads = 1;

  void validate() const {
    if (P < 1) throw Error(ErrorCode::InvalidConfig, "P must be at least 1");
    if (J < 2) throw Error(ErrorCode::InvalidConfig, "J must be at least 2");
    if (!(P_th > 0.0 && P_th < 1.0) || !(P_pr > 0.0 && P_pr < 1.0))
      throw Error(ErrorCode::InvalidConfig, "thresholds must lie in (0,1)");
    if (gate_radius && !(*gate_radius > 0.0)) throw Error(ErrorCode::InvalidConfig, "gate radius must be positive");
  }
};

/// A PO after prediction (legacy) or initialisation (new). Particle weights
/// hold w^(1); alpha_n is the "does not exist" mass (1 for new POs).
template <int D>
struct PredictedPo {
  std::vector<Particle<D>> particles;
  double alpha_n = 1.0;
  Label label;
  PoKind kind = PoKind::Legacy;

  [[nodiscard]] double alpha() const {
    double s = alpha_n;
    for (const auto& p : particles) s += p.w;
    return s;
  }
};

/// Number of beta messages exchanged in one iteration.
inline std::int64_t messages_per_iteration(std::int64_t K, std::int64_t M) { return K * M + M * (M + 1) / 2; }

/// Scalar tables of one message-passing iteration. beta_new and xi_new are
/// M x M with only the upper triangle (l >= k) in use.
struct MessageTables {
  Eigen::MatrixXd beta_legacy;
  Eigen::MatrixXd beta_new;
  Eigen::MatrixXd xi_legacy;
  Eigen::MatrixXd xi_new;
};

/// xi for every (PO, measurement) pair from per-measurement running sums;
/// exclusive sums come from prefix and suffix totals so each xi is a sum of
/// nonnegative terms plus one.
inline void compute_xi(const Eigen::MatrixXd& beta_legacy, const Eigen::MatrixXd& beta_new, Eigen::MatrixXd& xi_legacy,
                       Eigen::MatrixXd& xi_new) {
  const Eigen::Index K = beta_legacy.rows();
  const Eigen::Index M = beta_new.cols();
  xi_legacy.setOnes(K, M);
  xi_new.setOnes(M, M);
  std::vector<double> prefix(std::max<Eigen::Index>(K, M) + 1), suffix(std::max<Eigen::Index>(K, M) + 2);
  for (Eigen::Index l = 0; l < M; ++l) {
    // legacy column l
    prefix[0] = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) prefix[k + 1] = prefix[k] + beta_legacy(k, l);
    suffix[K] = 0.0;
    for (Eigen::Index k = K; k-- > 0;) suffix[k] = suffix[k + 1] + beta_legacy(k, l);
    const double legacy_total = prefix[K];
    // new POs 0..l
    std::vector<double> np(l + 2), ns(l + 2);
    np[0] = 0.0;
    for (Eigen::Index k = 0; k <= l; ++k) np[k + 1] = np[k] + beta_new(k, l);
    ns[l + 1] = 0.0;
    for (Eigen::Index k = l + 1; k-- > 0;) ns[k] = ns[k + 1] + beta_new(k, l);
    const double new_total = np[l + 1];
    for (Eigen::Index k = 0; k < K; ++k) xi_legacy(k, l) = 1.0 + (prefix[k] + suffix[k + 1]) + new_total;
    for (Eigen::Index k = 0; k <= l; ++k) xi_new(k, l) = 1.0 + legacy_total + (np[k] + ns[k + 1]);
  }
}

namespace detail {
constexpr double kLogFloor = -745.0;

inline double safe_log(double x) { return x > 0.0 ? std::max(std::log(x), kLogFloor) : kLogFloor; }
inline double log_or_ninf(double x) { return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity(); }
}  // namespace detail

/// The loopy message-passing core for one time step, operating on already
/// predicted / initialised particle sets. Likelihood ratios
/// mu_m f(z_l | x) / (mu_fa f_fa(z_l)) are tabulated once, as they do not
/// change across iterations.
template <int D>
class MessagePassing {
 public:
  MessagePassing(const std::vector<PredictedPo<D>>& legacy, const std::vector<PredictedPo<D>>& fresh,
                 const std::vector<Vec<D>>& z, const MeasurementModel<D>& model, std::optional<double> gate = {},
                 int threads = 1)
      : legacy_(legacy), fresh_(fresh), z_(z), model_(model), gate_(gate), threads_(threads) {
    K_ = static_cast<Eigen::Index>(legacy.size());
    M_ = static_cast<Eigen::Index>(z.size());
    if (static_cast<Eigen::Index>(fresh.size()) != M_)
      throw Error(ErrorCode::InvalidModel, "need exactly one new PO per measurement");
    clutter_.resize(M_);
    for (Eigen::Index l = 0; l < M_; ++l) {
      clutter_(l) = model.clutter_intensity(z[l]);
      if (!(clutter_(l) > 0.0)) throw Error(ErrorCode::InvalidModel, "clutter intensity is zero at a measurement");
    }
    ratio_legacy_.resize(K_);
    ratio_new_.resize(M_);
    lw1_legacy_.resize(K_);
    lw1_new_.resize(M_);
    parallel_for(static_cast<std::size_t>(K_ + M_), threads_, [&](std::size_t i) {
      if (static_cast<Eigen::Index>(i) < K_)
        tabulate(legacy_[i], 0, ratio_legacy_[i], lw1_legacy_[i]);
      else {
        const auto k = static_cast<Eigen::Index>(i) - K_;
        tabulate(fresh_[k], k, ratio_new_[k], lw1_new_[k]);
      }
    });
    tables_.beta_legacy.setZero(K_, M_);
    tables_.beta_new.setZero(M_, M_);
    tables_.xi_legacy.setOnes(K_, M_);
    tables_.xi_new.setOnes(M_, M_);
  }

  [[nodiscard]] Eigen::Index num_legacy() const { return K_; }
  [[nodiscard]] Eigen::Index num_measurements() const { return M_; }
  [[nodiscard]] int iteration() const { return iteration_; }
  [[nodiscard]] const MessageTables& tables() const { return tables_; }
  [[nodiscard]] std::int64_t messages() const { return messages_; }

  /// Ratio table of legacy PO k (J x M) and new PO k (J x (M - k), column 0
  /// is the PO's own measurement).
  [[nodiscard]] const Eigen::MatrixXd& ratio_legacy(Eigen::Index k) const { return ratio_legacy_[k]; }
  [[nodiscard]] const Eigen::MatrixXd& ratio_new(Eigen::Index k) const { return ratio_new_[k]; }

  /// Measurement evaluation of the next iteration followed by the xi update.
  /// Legacy POs are evaluated in parallel against the previous xi table.
  /// From the second iteration on, new POs are swept in measurement order
  /// and each sees the messages already refreshed by the new POs before it;
  /// updating them all at once lets a cluster of measurements from one
  /// object flip between "every new PO exists" and "none exists".
  void iterate() {
    ++iteration_;
    Eigen::MatrixXd beta_legacy(K_, M_), beta_new = Eigen::MatrixXd::Zero(M_, M_);
    parallel_for(static_cast<std::size_t>(K_), threads_,
                 [&](std::size_t k) { legacy_betas(static_cast<Eigen::Index>(k), beta_legacy); });
    if (iteration_ == 1) {
      parallel_for(static_cast<std::size_t>(M_), threads_,
                   [&](std::size_t k) { new_betas_initial(static_cast<Eigen::Index>(k), beta_new); });
    } else {
      const Eigen::VectorXd legacy_total = beta_legacy.colwise().sum().transpose();
      // old_suffix(k, l) = sum of previous-iteration beta_new(k'..l, l) for k' >= k
      Eigen::MatrixXd old_suffix = Eigen::MatrixXd::Zero(M_ + 1, M_);
      for (Eigen::Index l = 0; l < M_; ++l)
        for (Eigen::Index k = l + 1; k-- > 0;) old_suffix(k, l) = old_suffix(k + 1, l) + tables_.beta_new(k, l);
      Eigen::VectorXd fresh_prefix = Eigen::VectorXd::Zero(M_);
      Eigen::VectorXd xi_row(M_);
      for (Eigen::Index k = 0; k < M_; ++k) {
        for (Eigen::Index l = k; l < M_; ++l)
          xi_row(l) = 1.0 + legacy_total(l) + (fresh_prefix(l) + old_suffix(k + 1, l));
        new_betas(k, xi_row, beta_new);
        for (Eigen::Index l = k; l < M_; ++l) fresh_prefix(l) += beta_new(k, l);
      }
    }
    tables_.beta_legacy = std::move(beta_legacy);
    tables_.beta_new = std::move(beta_new);
    compute_xi(tables_.beta_legacy, tables_.beta_new, tables_.xi_legacy, tables_.xi_new);
    messages_ += messages_per_iteration(K_, M_);
  }

  void run(int P) {
    for (int p = 0; p < P; ++p) iterate();
  }

  /// Extrinsic log-weights of legacy PO k towards measurement l for the next
  /// iteration, computed from the current xi table.
  void legacy_extrinsic(Eigen::Index k, Eigen::Index l, Eigen::VectorXd& log_w, double& log_alpha_n) const {
    const auto& R = ratio_legacy_[k];
    Eigen::VectorXd S;
    double Sx = 0.0;
    legacy_sums(k, S, Sx);
    log_w = lw1_legacy_[k].array() + S.array() - (R.col(l).array() + tables_.xi_legacy(k, l)).log();
    log_alpha_n = detail::log_or_ninf(legacy_[k].alpha_n) + Sx - std::log(tables_.xi_legacy(k, l));
  }

  /// Extrinsic log-weights of new PO k towards measurement l >= k.
  void new_extrinsic(Eigen::Index k, Eigen::Index l, Eigen::VectorXd& log_w, double& log_alpha_n) const {
    const auto& R = ratio_new_[k];
    Eigen::VectorXd T;
    double Tx = 0.0;
    new_sums(k, tables_.xi_new.row(k).transpose(), T, Tx);
    if (l == k) {
      log_w = lw1_new_[k] + T;
      log_alpha_n = Tx;
      return;
    }
    const Eigen::Index c = l - k;
    log_w = lw1_new_[k].array() + own_log_ratio(k).array() + T.array() - (R.col(c).array() + tables_.xi_new(k, l)).log();
    log_alpha_n = std::log(tables_.xi_new(k, k)) + Tx - std::log(tables_.xi_new(k, l));
  }

  /// Posterior particle weights (summing to the existence probability).
  [[nodiscard]] Eigen::VectorXd legacy_belief_weights(Eigen::Index k) const {
    Eigen::VectorXd S;
    double Sx = 0.0;
    legacy_sums(k, S, Sx);
    const Eigen::VectorXd la = lw1_legacy_[k] + S;
    return normalise(la, detail::log_or_ninf(legacy_[k].alpha_n) + Sx);
  }

  [[nodiscard]] Eigen::VectorXd new_belief_weights(Eigen::Index k) const {
    Eigen::VectorXd T;
    double Tx = 0.0;
    new_sums(k, tables_.xi_new.row(k).transpose(), T, Tx);
    const Eigen::VectorXd la = lw1_new_[k] + own_log_ratio(k) + T;
    return normalise(la, std::log(tables_.xi_new(k, k)) + Tx);
  }

  /// Association probabilities p(b_l = v), v in {0, 1..K, K+1..K+l+1}.
  [[nodiscard]] std::vector<std::vector<double>> association_marginals() const {
    std::vector<std::vector<double>> out(M_);
    for (Eigen::Index l = 0; l < M_; ++l) {
      auto& row = out[l];
      row.assign(static_cast<std::size_t>(K_ + l + 2), 0.0);
      row[0] = 1.0;
      for (Eigen::Index k = 0; k < K_; ++k) row[1 + k] = tables_.beta_legacy(k, l);
      for (Eigen::Index k = 0; k <= l; ++k) row[1 + K_ + k] = tables_.beta_new(k, l);
      double s = 0.0;
      for (double v : row) s += v;
      for (double& v : row) v /= s;
    }
    return out;
  }

 private:
  void tabulate(const PredictedPo<D>& po, Eigen::Index first, Eigen::MatrixXd& R, Eigen::VectorXd& lw1) const {
    const auto J = static_cast<Eigen::Index>(po.particles.size());
    const Eigen::Index cols = M_ - first;
    R.setZero(J, cols);
    lw1.resize(J);
    std::vector<PreparedExtent<D>> prepared;
    prepared.reserve(J);
    for (Eigen::Index j = 0; j < J; ++j) {
      const auto& p = po.particles[j];
      lw1(j) = detail::log_or_ninf(p.w);
      prepared.push_back(prepare_extent<D>(p.x, p.E, model_));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Eigen::Index l = first + c;
      const bool own = po.kind == PoKind::New && c == 0;
      if (gate_ && !own) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : po.particles) best = std::min(best, (p.x.p - z_[l]).norm());
        if (best > *gate_) continue;
      }
      const double inv_clutter = 1.0 / clutter_(l);
      for (Eigen::Index j = 0; j < J; ++j) {
        const auto& pe = prepared[j];
        if (pe.mu_m <= 0.0) continue;
        R(j, c) = pe.mu_m * likelihood<D>(pe, po.particles[j].x.p, z_[l], model_) * inv_clutter;
      }
    }
  }

  void legacy_sums(Eigen::Index k, Eigen::VectorXd& S, double& Sx) const {
    const auto& R = ratio_legacy_[k];
    S.setZero(R.rows());
    Sx = 0.0;
    for (Eigen::Index l = 0; l < M_; ++l) {
      const double xi = tables_.xi_legacy(k, l);
      S.array() += (R.col(l).array() + xi).log();
      Sx += std::log(xi);
    }
  }

  void new_sums(Eigen::Index k, const Eigen::Ref<const Eigen::VectorXd>& xi_row, Eigen::VectorXd& T,
                double& Tx) const {
    const auto& R = ratio_new_[k];
    T.setZero(R.rows());
    Tx = 0.0;
    for (Eigen::Index l = k + 1; l < M_; ++l) {
      const double xi = xi_row(l);
      T.array() += (R.col(l - k).array() + xi).log();
      Tx += std::log(xi);
    }
  }

  [[nodiscard]] Eigen::VectorXd own_log_ratio(Eigen::Index k) const {
    return ratio_new_[k].col(0).unaryExpr([](double r) { return detail::safe_log(r); });
  }

  /// beta = sum_j w_j r_j / (sum_j w_j + alpha_n), evaluated with a common
  /// shift of the log-weights.
  static double beta_from_logs(const Eigen::VectorXd& log_w, double log_alpha_n,
                               const Eigen::Ref<const Eigen::VectorXd>& r) {
    double m = log_alpha_n;
    if (log_w.size() > 0) m = std::max(m, log_w.maxCoeff());
    if (!std::isfinite(m)) return 0.0;
    const Eigen::ArrayXd w = (log_w.array() - m).exp();
    const double denom = w.sum() + std::exp(log_alpha_n - m);
    return denom > 0.0 ? (w * r.array()).sum() / denom : 0.0;
  }

  static Eigen::VectorXd normalise(const Eigen::VectorXd& la, double lb) {
    double m = lb;
    if (la.size() > 0) m = std::max(m, la.maxCoeff());
    if (!std::isfinite(m)) return Eigen::VectorXd::Zero(la.size());
    const Eigen::ArrayXd a = (la.array() - m).exp();
    const double denom = a.sum() + std::exp(lb - m);
    if (!(denom > 0.0)) return Eigen::VectorXd::Zero(la.size());
    Eigen::VectorXd w = (a / denom).matrix();
    // rounding can leave the total a few ulp above one when the
    // non-existence term is negligible; shrink until the particle-order sum,
    // as used by PoBelief::existence, is at most one
    auto total = [&] {
      double s = 0.0;
      for (Eigen::Index j = 0; j < w.size(); ++j) s += w(j);
      return s;
    };
    while (total() > 1.0) w *= std::nextafter(1.0, 0.0);
    return w;
  }

  void legacy_betas(Eigen::Index k, Eigen::MatrixXd& beta) const {
    const auto& R = ratio_legacy_[k];
    const double log_an = detail::log_or_ninf(legacy_[k].alpha_n);
    if (iteration_ == 1) {
      for (Eigen::Index l = 0; l < M_; ++l) beta(k, l) = beta_from_logs(lw1_legacy_[k], log_an, R.col(l));
      return;
    }
    Eigen::VectorXd S;
    double Sx = 0.0;
    legacy_sums(k, S, Sx);
    const Eigen::VectorXd base = lw1_legacy_[k] + S;
    for (Eigen::Index l = 0; l < M_; ++l) {
      const double xi = tables_.xi_legacy(k, l);
      const Eigen::VectorXd lw = base.array() - (R.col(l).array() + xi).log();
      beta(k, l) = beta_from_logs(lw, log_an + Sx - std::log(xi), R.col(l));
    }
  }

  void new_betas_initial(Eigen::Index k, Eigen::MatrixXd& beta) const {
    const auto& R = ratio_new_[k];
    const auto& lw1 = lw1_new_[k];
    // own measurement: divided by the nonexistence mass only, which is 1
    const Eigen::ArrayXd w1 = lw1.array().exp();
    beta(k, k) = (w1 * R.col(0).array()).sum();
    for (Eigen::Index l = k + 1; l < M_; ++l) beta(k, l) = beta_from_logs(lw1, 0.0, R.col(l - k));
  }

  void new_betas(Eigen::Index k, const Eigen::VectorXd& xi_row, Eigen::MatrixXd& beta) const {
    const auto& R = ratio_new_[k];
    const auto& lw1 = lw1_new_[k];
    Eigen::VectorXd T;
    double Tx = 0.0;
    new_sums(k, xi_row, T, Tx);
    const Eigen::VectorXd base = lw1 + own_log_ratio(k) + T;
    const double log_xi_own = std::log(xi_row(k));
    const Eigen::VectorXd own = lw1 + T;
    const double own_shift = Tx;
    parallel_for(static_cast<std::size_t>(M_ - k), M_ - k > 64 ? threads_ : 1, [&](std::size_t c) {
      const Eigen::Index l = k + static_cast<Eigen::Index>(c);
      if (l == k) {
        beta(k, k) = ((own.array() - own_shift).exp() * R.col(0).array()).sum();
        return;
      }
      const double xi = xi_row(l);
      const Eigen::VectorXd lw = base.array() - (R.col(l - k).array() + xi).log();
      beta(k, l) = beta_from_logs(lw, log_xi_own + Tx - std::log(xi), R.col(l - k));
    });
  }

  const std::vector<PredictedPo<D>>& legacy_;
  const std::vector<PredictedPo<D>>& fresh_;
  const std::vector<Vec<D>>& z_;
  const MeasurementModel<D>& model_;
  std::optional<double> gate_;
  int threads_ = 1;
  Eigen::Index K_ = 0, M_ = 0;
  Eigen::VectorXd clutter_;
  std::vector<Eigen::MatrixXd> ratio_legacy_, ratio_new_;
  std::vector<Eigen::VectorXd> lw1_legacy_, lw1_new_;
  MessageTables tables_;
  int iteration_ = 0;
  std::int64_t messages_ = 0;
};

// ---------------------------------------------------------- prediction

template <int D>
PredictedPo<D> predict_legacy(const PoBelief<D>& prev, const Models<D>& models, Rng& rng) {
  PredictedPo<D> out;
  out.label = prev.label;
  out.kind = PoKind::Legacy;
  out.particles = prev.particles;
  const double pe = prev.existence();
  for (auto& p : out.particles) {
    sample_transition_inplace<D>(p.x, p.E, models.transition, rng);
    p.w = models.p_s * std::exp(-measurement_rate<D>(p.x, p.E, models.measurement)) * p.w;
  }
  out.alpha_n = std::max(0.0, 1.0 - pe) + (1.0 - models.p_s) * pe;
  return out;
}

/// Covariance of the position proposal around a measurement: noise plus the
/// spread of measurement sources over the prior-mean extent.
template <int D>
Mat<D> new_po_proposal_cov(const Models<D>& models) {
  const Mat<D>& Em = models.birth.extent_mean;
  Mat<D> spread;
  switch (models.measurement.shape) {
    case ShapeKind::GaussianExtent: spread = Em * Em; break;
    case ShapeKind::UniformEllipse: spread = Em * Em / (D + 2.0); break;
    case ShapeKind::UniformCube: spread = Em * Em / 12.0; break;
  }
  return models.measurement.sigma_u + spread;
}

/// New PO for measurement z: position from a Gaussian proposal around z,
/// velocity, extent (and rate) from the birth prior, so the importance weight
/// reduces to the position prior over the proposal density (divided by J so
/// that weighted sums estimate integrals).
template <int D>
PredictedPo<D> init_new_po(const Vec<D>& z, const Models<D>& models, int J, Label label, Rng& rng) {
  PredictedPo<D> out;
  out.label = label;
  out.kind = PoKind::New;
  out.alpha_n = 1.0;
  out.particles.resize(J);
  const Mat<D> C = new_po_proposal_cov<D>(models);
  const Mat<D> L = psd_sqrt_factor<D>(C);
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool with_rate = models.uses_rate_state();
  for (auto& p : out.particles) {
    auto [x, E] = birth_sample<D>(models.birth, with_rate, rng);
    Vec<D> n;
    for (int i = 0; i < D; ++i) n(i) = normal(rng);
    x.p = z + L * n;
    const double fp = std::exp(log_gaussian_pdf<D>(x.p, z, C));
    if (!(fp > 0.0)) throw Error(ErrorCode::NumericalFailure, "proposal density vanished at its own sample");
    const double mu = measurement_rate<D>(x, E, models.measurement);
    const double detect_odds = mu > 0.0 ? 1.0 / std::expm1(mu) : 0.0;
    p.x = x;
    p.E = E;
    p.w = models.birth.mu_n * birth_position_pdf<D>(models.birth, x.p) / fp * detect_odds / J;
  }
  return out;
}

struct SpaDiagnostics {
  std::int64_t messages_per_iteration = 0;
  std::int64_t messages_total = 0;
  int iterations = 0;
};

template <int D>
struct SpaStepResult {
  std::vector<PoBelief<D>> legacy;
  std::vector<PoBelief<D>> fresh;
  MessageTables tables;
  SpaDiagnostics diagnostics;
};

/// Message passing and belief computation on given predicted sets.
template <int D>
SpaStepResult<D> spa_core(const std::vector<PredictedPo<D>>& legacy, const std::vector<PredictedPo<D>>& fresh,
                          const std::vector<Vec<D>>& z, const MeasurementModel<D>& model, const SpaConfig& config) {
  MessagePassing<D> mp(legacy, fresh, z, model, config.gate_radius, config.threads);
  mp.run(config.P);
  SpaStepResult<D> out;
  out.legacy.resize(legacy.size());
  out.fresh.resize(fresh.size());
  parallel_for(legacy.size() + fresh.size(), config.threads, [&](std::size_t i) {
    const bool is_legacy = i < legacy.size();
    const auto k = static_cast<Eigen::Index>(is_legacy ? i : i - legacy.size());
    const auto& src = is_legacy ? legacy[k] : fresh[k];
    auto& dst = is_legacy ? out.legacy[k] : out.fresh[k];
    const Eigen::VectorXd w = is_legacy ? mp.legacy_belief_weights(k) : mp.new_belief_weights(k);
    dst.label = src.label;
    dst.kind = src.kind;
    dst.particles = src.particles;
    for (std::size_t j = 0; j < dst.particles.size(); ++j) dst.particles[j].w = w(static_cast<Eigen::Index>(j));
  });
  out.tables = mp.tables();
  out.diagnostics.iterations = config.P;
  out.diagnostics.messages_per_iteration =
      messages_per_iteration(static_cast<std::int64_t>(legacy.size()), static_cast<std::int64_t>(z.size()));
  out.diagnostics.messages_total = mp.messages();
  return out;
}

/// One full time step: prediction of legacy POs, one new PO per
/// measurement, P message-passing iterations and beliefs. Random streams are
/// keyed by (seed, step, label) so the result is independent of threading.
template <int D>
SpaStepResult<D> spa_step(const std::vector<PoBelief<D>>& state, std::vector<Vec<D>> z, const Models<D>& models,
                          const SpaConfig& config, std::uint64_t seed, std::int64_t step) {
  if (config.sort_measurements)
    std::sort(z.begin(), z.end(), [](const Vec<D>& a, const Vec<D>& b) {
      return std::lexicographical_compare(a.data(), a.data() + D, b.data(), b.data() + D);
    });
  std::vector<PredictedPo<D>> legacy(state.size()), fresh(z.size());
  parallel_for(state.size() + z.size(), config.threads, [&](std::size_t i) {
    if (i < state.size()) {
      const auto& b = state[i];
      Rng rng = make_rng(seed, {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(b.label.step),
                                static_cast<std::uint64_t>(b.label.index), 1});
      legacy[i] = predict_legacy<D>(b, models, rng);
    } else {
      const std::size_t l = i - state.size();
      Rng rng = make_rng(seed, {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(l), 2});
      fresh[l] = init_new_po<D>(z[l], models, config.J, Label{step, static_cast<std::int64_t>(l)}, rng);
    }
  });
  return spa_core<D>(legacy, fresh, z, models.measurement, config);
}

}  // namespace eot
