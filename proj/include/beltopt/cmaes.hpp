// cmaes.hpp — (mu/mu_w, lambda) covariance matrix adaptation, ask/tell form.
//
// Canonical strategy parameters (log-rank weights, cumulation paths, rank-1
// plus rank-mu covariance update). The search itself is unconstrained; gear
// ratio bounds and the ordering rule are enforced by the fitness penalty.
// All randomness flows from the seed in the config.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "beltopt/model.hpp"

namespace beltopt {

struct CmaesConfig {
  int lambda = 100;
  int generations = 30;
  double sigma0 = 0.3;
  std::uint64_t seed = 0;
  VecX initial_mean;           // search-space dimension follows this vector
  VecX bounds_lo, bounds_hi;   // used by penalized_fitness, not by sampling
  double penalty_value = 1e6;

  void validate() const {
    if (lambda < 4) throw std::invalid_argument("cmaes: lambda must be >= 4");
    if (!(sigma0 > 0.0)) throw std::invalid_argument("cmaes: sigma0 must be > 0");
    if (initial_mean.size() == 0) throw std::invalid_argument("cmaes: initial_mean is required");
    if (bounds_lo.size() != bounds_hi.size()) {
      throw std::invalid_argument("cmaes: bound vectors must have equal size");
    }
    for (int i = 0; i < bounds_lo.size(); ++i) {
      if (!(bounds_lo[i] < bounds_hi[i])) {
        throw std::invalid_argument("cmaes: bounds_lo must be elementwise below bounds_hi");
      }
    }
  }
};

class Cmaes {
 public:
  explicit Cmaes(const CmaesConfig& config) : cfg_(config) {
    cfg_.validate();
    n_ = static_cast<int>(cfg_.initial_mean.size());
    lambda_ = cfg_.lambda;
    mu_ = lambda_ / 2;
    weights_.resize(mu_);
    for (int i = 0; i < mu_; ++i) {
      weights_[i] = std::log(mu_ + 0.5) - std::log(static_cast<double>(i + 1));
    }
    const double wsum = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    for (double& w : weights_) w /= wsum;
    double w2 = 0.0;
    for (double w : weights_) w2 += w * w;
    mu_eff_ = 1.0 / w2;

    c_sigma_ = (mu_eff_ + 2.0) / (n_ + mu_eff_ + 5.0);
    d_sigma_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff_ - 1.0) / (n_ + 1.0)) - 1.0) + c_sigma_;
    c_c_ = (4.0 + mu_eff_ / n_) / (n_ + 4.0 + 2.0 * mu_eff_ / n_);
    c_1_ = 2.0 / ((n_ + 1.3) * (n_ + 1.3) + mu_eff_);
    c_mu_ = std::min(1.0 - c_1_, 2.0 * (mu_eff_ - 2.0 + 1.0 / mu_eff_) /
                                     ((n_ + 2.0) * (n_ + 2.0) + mu_eff_));
    chi_n_ = std::sqrt(static_cast<double>(n_)) *
             (1.0 - 1.0 / (4.0 * n_) + 1.0 / (21.0 * n_ * n_));

    mean_ = cfg_.initial_mean;
    sigma_ = cfg_.sigma0;
    C_ = MatX::Identity(n_, n_);
    B_ = MatX::Identity(n_, n_);
    D_ = VecX::Ones(n_);
    p_sigma_ = VecX::Zero(n_);
    p_c_ = VecX::Zero(n_);
    rng_.seed(cfg_.seed);
  }

  int dimension() const { return n_; }
  int generation() const { return generation_; }
  int evaluations() const { return evaluations_; }
  double sigma() const { return sigma_; }
  const VecX& mean() const { return mean_; }
  const MatX& covariance() const { return C_; }
  double best_fitness() const { return best_fitness_; }
  const VecX& best_candidate() const { return best_x_; }

  // Samples lambda candidates; a matching tell() must follow.
  const std::vector<VecX>& ask() {
    if (pending_) throw std::logic_error("cmaes: ask called twice without tell");
    candidates_.assign(lambda_, VecX(n_));
    ys_.assign(lambda_, VecX(n_));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < lambda_; ++i) {
      VecX zn(n_);
      for (int d = 0; d < n_; ++d) zn[d] = normal(rng_);
      ys_[i] = B_ * (D_.cwiseProduct(zn));
      candidates_[i] = mean_ + sigma_ * ys_[i];
    }
    pending_ = true;
    return candidates_;
  }

  void tell(const std::vector<double>& fitnesses) {
    if (!pending_) throw std::logic_error("cmaes: tell called without a pending ask");
    if (static_cast<int>(fitnesses.size()) != lambda_) {
      throw std::invalid_argument("cmaes: fitness batch size does not match lambda");
    }
    for (double f : fitnesses) {
      if (!std::isfinite(f)) {
        throw std::invalid_argument("cmaes: non-finite fitness (caller must pre-penalize)");
      }
    }
    pending_ = false;
    evaluations_ += lambda_;
    ++generation_;

    std::vector<int> idx(lambda_);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return fitnesses[a] < fitnesses[b]; });
    if (fitnesses[idx[0]] < best_fitness_) {
      best_fitness_ = fitnesses[idx[0]];
      best_x_ = candidates_[idx[0]];
    }

    const bool flat =
        fitnesses[idx[0]] == fitnesses[idx[static_cast<size_t>(lambda_) - 1]];

    VecX y_w = VecX::Zero(n_);
    for (int i = 0; i < mu_; ++i) y_w += weights_[i] * ys_[idx[i]];

    // Step-size path and sigma always update; on a flat landscape the mean
    // and covariance are left untouched.
    const MatX inv_sqrt_C = B_ * D_.cwiseInverse().asDiagonal() * B_.transpose();
    p_sigma_ = (1.0 - c_sigma_) * p_sigma_ +
               std::sqrt(c_sigma_ * (2.0 - c_sigma_) * mu_eff_) * (inv_sqrt_C * y_w);
    sigma_ *= std::exp((c_sigma_ / d_sigma_) * (p_sigma_.norm() / chi_n_ - 1.0));

    if (flat) return;

    mean_ += sigma_ * y_w;

    const double ps_norm = p_sigma_.norm();
    const double denom =
        std::sqrt(1.0 - std::pow(1.0 - c_sigma_, 2.0 * generation_));
    const bool h_sigma = ps_norm / denom / chi_n_ < 1.4 + 2.0 / (n_ + 1.0);
    p_c_ = (1.0 - c_c_) * p_c_;
    if (h_sigma) p_c_ += std::sqrt(c_c_ * (2.0 - c_c_) * mu_eff_) * y_w;

    MatX rank_mu = MatX::Zero(n_, n_);
    for (int i = 0; i < mu_; ++i) {
      rank_mu += weights_[i] * ys_[idx[i]] * ys_[idx[i]].transpose();
    }
    const double delta_h = h_sigma ? 0.0 : c_c_ * (2.0 - c_c_);
    C_ = (1.0 - c_1_ - c_mu_) * C_ +
         c_1_ * (p_c_ * p_c_.transpose() + delta_h * C_) + c_mu_ * rank_mu;

    refresh_eigensystem();
  }

 private:
  // Symmetrize and eigendecompose C; floor tiny/negative eigenvalues so the
  // sampling system stays positive definite.
  void refresh_eigensystem() {
    C_ = 0.5 * (C_ + C_.transpose());
    Eigen::SelfAdjointEigenSolver<MatX> es(C_);
    VecX evals = es.eigenvalues();
    const double floor_val = std::max(evals.maxCoeff(), 1.0) * 1e-14;
    bool repaired = false;
    for (int i = 0; i < n_; ++i) {
      if (evals[i] < floor_val) {
        evals[i] = floor_val;
        repaired = true;
      }
    }
    B_ = es.eigenvectors();
    D_ = evals.cwiseSqrt();
    if (repaired) C_ = B_ * evals.asDiagonal() * B_.transpose();
  }

  CmaesConfig cfg_;
  int n_ = 0, lambda_ = 0, mu_ = 0;
  std::vector<double> weights_;
  double mu_eff_ = 0.0, c_sigma_ = 0.0, d_sigma_ = 0.0, c_c_ = 0.0, c_1_ = 0.0, c_mu_ = 0.0;
  double chi_n_ = 0.0;

  VecX mean_;
  double sigma_ = 0.0;
  MatX C_, B_;
  VecX D_;
  VecX p_sigma_, p_c_;
  std::mt19937_64 rng_;
  int generation_ = 0;
  int evaluations_ = 0;
  bool pending_ = false;
  std::vector<VecX> candidates_, ys_;

  double best_fitness_ = std::numeric_limits<double>::infinity();
  VecX best_x_;
};

struct DesignCandidate {
  Vec4 gear_ratios = Vec4::Ones();
  double fitness = std::numeric_limits<double>::infinity();
  bool feasible = false;
  std::string solve_status = "not_evaluated";
};

inline bool design_within_bounds(const Vec4& g, const Vec4& lo, const Vec4& hi) {
  return (g.array() >= lo.array()).all() && (g.array() <= hi.array()).all();
}

inline bool design_ordering_ok(const Vec4& g) { return g[2] <= g[1] && g[1] < g[0]; }

// Folds every failure mode into the flat penalty: out-of-bounds or
// mis-ordered gear ratios are penalized without running the inner solve;
// an infeasible inner solve is penalized after the fact.
inline double penalized_fitness(
    const Vec4& g, const Vec4& bounds_lo, const Vec4& bounds_hi, double penalty_value,
    const std::function<std::pair<double, bool>(const Vec4&)>& inner) {
  if (!design_within_bounds(g, bounds_lo, bounds_hi) || !design_ordering_ok(g)) {
    return penalty_value;
  }
  const auto [cost, feasible] = inner(g);
  if (!feasible || !std::isfinite(cost)) return penalty_value;
  return cost;
}

}  // namespace beltopt
