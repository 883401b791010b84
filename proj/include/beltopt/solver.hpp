// solver.hpp — augmented-Lagrangian solver for bound-constrained NLPs with
// equality constraints.
//
// Outer loop: classic multiplier updates with a geometrically growing
// penalty on the equality constraints. Inner loop: projected Gauss-Newton
// on the bound-constrained augmented Lagrangian, with an active-set mask
// that pins bound-active coordinates (including the degenerate lo == hi
// boxes the transmission mapping produces) and a backtracking line search
// on the projected arc. Fully deterministic: no randomness anywhere.
//
// The solver core works on a GenericNlp of callables, so the backend is
// swappable and unit-testable on closed-form problems; solve(Nlp, ...) wraps
// the transcription from ocp.hpp.
#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>
#include <json.hpp>

#include "beltopt/ocp.hpp"

namespace beltopt {

struct SolverConfig {
  int max_outer_iters = 30;
  int max_inner_iters = 200;
  double tol_constraint = 1e-6;    // equality violation, infinity-norm
  double tol_stationarity = 1e-5;  // projected gradient, infinity-norm
  double penalty_init = 10.0;
  double penalty_growth = 10.0;
  double penalty_max = 1e8;
  // Outer iterations with < 10% violation progress at the penalty cap
  // before the problem is declared infeasible.
  int stall_limit = 3;
};

enum class SolveStatus { converged, max_iters, infeasible, numerical_failure };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iters: return "max_iters";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

// Problem description the solver core consumes. objective_gn_hessian and
// solution_deviation are optional; the deviation hook is an independent
// feasibility audit that must agree before convergence is claimed (for the
// transcription it is the open-loop rollout).
struct GenericNlp {
  int n_vars = 0;
  int n_eq = 0;
  VecX z_lo, z_hi;
  std::function<double(const VecX&)> objective;
  std::function<VecX(const VecX&)> objective_gradient;
  std::function<SpMat(const VecX&)> objective_gn_hessian;
  std::function<VecX(const VecX&)> constraints;
  std::function<SpMat(const VecX&)> constraint_jacobian;
  std::function<double(const VecX&)> solution_deviation;
};

struct GenericSolveResult {
  VecX z;
  double objective = std::numeric_limits<double>::infinity();
  SolveStatus status = SolveStatus::numerical_failure;
  double constraint_violation = std::numeric_limits<double>::infinity();
  double deviation = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int outer_iterations = 0;
  // Merit value after every accepted inner step, one sequence per outer
  // round (the merit function changes with the multipliers).
  std::vector<std::vector<double>> merit_traces;
};

namespace detail {

inline VecX clip_to_bounds(const VecX& z, const VecX& lo, const VecX& hi) {
  return z.cwiseMax(lo).cwiseMin(hi);
}

// Gradient with bound-active components removed; its infinity-norm is the
// stationarity measure for the bound-constrained subproblem.
inline VecX projected_gradient(const VecX& z, const VecX& g, const VecX& lo, const VecX& hi) {
  VecX pg = g;
  const double eps = 1e-10;
  for (int i = 0; i < z.size(); ++i) {
    if (z[i] <= lo[i] + eps && g[i] > 0.0) pg[i] = 0.0;
    else if (z[i] >= hi[i] - eps && g[i] < 0.0) pg[i] = 0.0;
  }
  return pg;
}

inline double inf_norm(const VecX& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace detail

inline GenericSolveResult solve_generic(const GenericNlp& nlp, const VecX& z0,
                                        const SolverConfig& config) {
  const VecX& lo = nlp.z_lo;
  const VecX& hi = nlp.z_hi;

  GenericSolveResult result;
  auto finish = [&](SolveStatus status, const VecX& z) {
    result.status = status;
    result.z = z;
    try {
      result.objective = nlp.objective(z);
      result.constraint_violation = detail::inf_norm(nlp.constraints(z));
      result.deviation = nlp.solution_deviation ? nlp.solution_deviation(z)
                                                : result.constraint_violation;
    } catch (const NumericalError&) {
      result.status = SolveStatus::numerical_failure;
    }
    return result;
  };

  VecX z = detail::clip_to_bounds(z0, lo, hi);
  VecX lambda = VecX::Zero(nlp.n_eq);
  double mu = config.penalty_init;

  auto merit = [&](const VecX& zz) {
    const VecX c = nlp.constraints(zz);
    return nlp.objective(zz) + lambda.dot(c) + 0.5 * mu * c.squaredNorm();
  };
  auto merit_gradient = [&](const VecX& zz, const VecX& c, const SpMat& J) {
    return VecX(nlp.objective_gradient(zz) + J.transpose() * (lambda + mu * c));
  };

  double prev_viol = std::numeric_limits<double>::infinity();
  int stall_count = 0;

  try {
    for (int outer = 0; outer < config.max_outer_iters; ++outer) {
      result.outer_iterations = outer + 1;
      const double inner_tol = std::max(config.tol_stationarity, 1e-2 * std::pow(0.1, outer));

      // --- inner: projected Gauss-Newton on the augmented Lagrangian ---
      result.merit_traces.emplace_back();
      double phi = merit(z);
      result.merit_traces.back().push_back(phi);
      for (int it = 0; it < config.max_inner_iters; ++it) {
        const VecX c = nlp.constraints(z);
        const SpMat J = nlp.constraint_jacobian(z);
        const VecX g = merit_gradient(z, c, J);
        if (detail::inf_norm(detail::projected_gradient(z, g, lo, hi)) <= inner_tol) break;

        SpMat H(nlp.n_vars, nlp.n_vars);
        if (nlp.objective_gn_hessian) H = nlp.objective_gn_hessian(z);
        H += SpMat((mu * (J.transpose() * J)).pruned());

        // Pin bound-active coordinates: zero their rows/columns, unit
        // diagonal, zero right-hand side.
        const double eps = 1e-10;
        std::vector<char> active(nlp.n_vars, 0);
        for (int i = 0; i < nlp.n_vars; ++i) {
          if (hi[i] - lo[i] < eps) active[i] = 1;
          else if (z[i] <= lo[i] + eps && g[i] > 0.0) active[i] = 1;
          else if (z[i] >= hi[i] - eps && g[i] < 0.0) active[i] = 1;
        }
        VecX rhs = -g;
        for (int col = 0; col < H.outerSize(); ++col) {
          for (SpMat::InnerIterator itH(H, col); itH; ++itH) {
            if (active[itH.row()] || active[itH.col()]) {
              itH.valueRef() = (itH.row() == itH.col()) ? 1.0 : 0.0;
            }
          }
        }
        for (int i = 0; i < nlp.n_vars; ++i) {
          if (active[i]) rhs[i] = 0.0;
        }

        VecX dz;
        double damping = 0.0;
        for (int attempt = 0;; ++attempt) {
          SpMat Hd = H;
          if (damping > 0.0) {
            for (int i = 0; i < nlp.n_vars; ++i) Hd.coeffRef(i, i) += damping;
          }
          Eigen::SimplicialLDLT<SpMat> ldlt(Hd);
          if (ldlt.info() == Eigen::Success) {
            dz = ldlt.solve(rhs);
            if (dz.allFinite()) break;
          }
          if (attempt >= 8) throw NumericalError("Newton system factorization failed");
          damping = (damping == 0.0) ? 1e-6 : damping * 100.0;
        }

        // Backtracking Armijo search along the projected arc.
        bool accepted = false;
        for (double alpha = 1.0; alpha >= 1e-10; alpha *= 0.5) {
          const VecX z_trial = detail::clip_to_bounds(z + alpha * dz, lo, hi);
          const VecX d = z_trial - z;
          if (detail::inf_norm(d) == 0.0) break;
          const double phi_trial = merit(z_trial);
          if (std::isfinite(phi_trial) && phi_trial <= phi + 1e-4 * std::min(0.0, g.dot(d))) {
            z = z_trial;
            phi = phi_trial;
            result.merit_traces.back().push_back(phi);
            ++result.iterations;
            accepted = true;
            break;
          }
        }
        if (!accepted) break;  // no descent available at this penalty level
      }

      // --- outer: multiplier and penalty updates ---
      const VecX c = nlp.constraints(z);
      const double viol = detail::inf_norm(c);

      if (viol <= config.tol_constraint) {
        const SpMat J = nlp.constraint_jacobian(z);
        const VecX g = merit_gradient(z, c, J);
        const double stat = detail::inf_norm(detail::projected_gradient(z, g, lo, hi));
        const double dev = nlp.solution_deviation ? nlp.solution_deviation(z) : viol;
        if (stat <= config.tol_stationarity && dev < 10.0 * config.tol_constraint) {
          return finish(SolveStatus::converged, z);
        }
      }

      lambda += mu * c;
      if (viol > 0.25 * prev_viol) {
        if (mu >= config.penalty_max) {
          stall_count = (viol > 0.9 * prev_viol) ? stall_count + 1 : 0;
          if (stall_count >= config.stall_limit && viol > config.tol_constraint) {
            return finish(SolveStatus::infeasible, z);
          }
        }
        mu = std::min(mu * config.penalty_growth, config.penalty_max);
      }
      prev_viol = viol;
    }
  } catch (const NumericalError&) {
    return finish(SolveStatus::numerical_failure, z);
  }
  return finish(SolveStatus::max_iters, z);
}

// --- transcription front end --------------------------------------------

struct SolveResult {
  Trajectory trajectory;
  double objective = std::numeric_limits<double>::infinity();
  SolveStatus status = SolveStatus::numerical_failure;
  double constraint_violation = std::numeric_limits<double>::infinity();
  double rollout_deviation = std::numeric_limits<double>::infinity();
  int iterations = 0;  // accepted inner iterations, all outer rounds
  int outer_iterations = 0;
  double wall_time = 0.0;  // s
  std::vector<std::vector<double>> merit_traces;

  bool converged() const { return status == SolveStatus::converged; }
};

inline nlohmann::ordered_json solve_result_to_json(const SolveResult& r) {
  nlohmann::ordered_json j;
  j["status"] = to_string(r.status);
  j["objective"] = r.objective;
  j["constraint_violation"] = r.constraint_violation;
  j["rollout_deviation"] = r.rollout_deviation;
  j["iterations"] = r.iterations;
  j["outer_iterations"] = r.outer_iterations;
  j["wall_time"] = r.wall_time;
  return j;
}

inline GenericNlp as_generic(const Nlp& nlp) {
  GenericNlp p;
  p.n_vars = nlp.n_vars();
  p.n_eq = nlp.n_eq();
  p.z_lo = nlp.z_lo();
  p.z_hi = nlp.z_hi();
  p.objective = [&nlp](const VecX& z) { return nlp.objective(z); };
  p.objective_gradient = [&nlp](const VecX& z) { return nlp.objective_gradient(z); };
  p.objective_gn_hessian = [&nlp](const VecX& z) { return nlp.objective_gn_hessian(z); };
  p.constraints = [&nlp](const VecX& z) { return nlp.constraints(z); };
  p.constraint_jacobian = [&nlp](const VecX& z) { return nlp.constraint_jacobian(z); };
  p.solution_deviation = [&nlp](const VecX& z) { return nlp.rollout_deviation(z); };
  return p;
}

inline SolveResult solve(const Nlp& nlp, const Trajectory& guess, const SolverConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  const GenericSolveResult gr = solve_generic(as_generic(nlp), nlp.pack(guess), config);
  SolveResult result;
  result.trajectory = nlp.unpack(gr.z);
  result.objective = gr.objective;
  result.status = gr.status;
  result.constraint_violation = gr.constraint_violation;
  result.rollout_deviation = gr.deviation;
  result.iterations = gr.iterations;
  result.outer_iterations = gr.outer_iterations;
  result.merit_traces = gr.merit_traces;
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

inline SolveResult solve(const RobotModel& model, const TransmissionSpec& trans,
                         const OcProblemSpec& spec, const SolverConfig& config = {}) {
  const Nlp nlp(model, trans, spec);
  return solve(nlp, initial_guess(model, trans, spec), config);
}

// --- independent feasibility audit ------------------------------------------

struct RolloutReport {
  double max_state_deviation = 0.0;  // re-simulated states vs solver states
  double max_bound_violation = 0.0;  // q/qd/u boxes along the solver trajectory
  double terminal_error = 0.0;       // re-simulated final state vs x_final
};

inline nlohmann::ordered_json rollout_report_to_json(const RolloutReport& r) {
  nlohmann::ordered_json j;
  j["max_state_deviation"] = r.max_state_deviation;
  j["max_bound_violation"] = r.max_bound_violation;
  j["terminal_error"] = r.terminal_error;
  return j;
}

inline RolloutReport verify_by_rollout(const RobotModel& model, const TransmissionSpec& trans,
                                       const OcProblemSpec& spec, const Trajectory& traj) {
  const Nlp nlp(model, trans, spec);
  RolloutReport report;

  const VecX z = nlp.pack(traj);
  for (int i = 0; i < nlp.n_vars(); ++i) {
    report.max_bound_violation = std::max(
        report.max_bound_violation, std::max(nlp.z_lo()[i] - z[i], z[i] - nlp.z_hi()[i]));
  }
  report.max_bound_violation = std::max(report.max_bound_violation, 0.0);

  VecX x = spec.x_init;
  report.max_state_deviation = (x - VecX(traj.states.row(0).transpose())).cwiseAbs().maxCoeff();
  for (int k = 0; k < spec.N; ++k) {
    x = step(model, trans, spec.space, x, traj.controls.row(k), spec.h(), spec.integrator);
    report.max_state_deviation = std::max(
        report.max_state_deviation,
        (x - VecX(traj.states.row(k + 1).transpose())).cwiseAbs().maxCoeff());
  }
  report.terminal_error = (x - spec.x_final).cwiseAbs().maxCoeff();
  return report;
}

inline RolloutReport verify_by_rollout(const RobotModel& model, const TransmissionSpec& trans,
                                       const OcProblemSpec& spec, const SolveResult& result) {
  return verify_by_rollout(model, trans, spec, result.trajectory);
}

}  // namespace beltopt
