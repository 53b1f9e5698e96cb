#pragma once

// Discrete optimal transport: entropic (Sinkhorn) and exact (network
// simplex) solvers plus the mass-repulsive self-transport composite.

#include <cstddef>
#include <span>
#include <vector>

#include "mrot/cost_engineering.hpp"
#include "mrot/matrix.hpp"

namespace mrot {

enum class LogDomain {
  Auto,  // on when eps < 1e-2 * median(C) or when exp(-C/eps) would underflow
  Off,
  On,
};

struct SolverConfig {
  double epsilon = 0.1;  // 0 selects the exact solver
  int max_iters = 10000;
  double tol = 1e-9;  // max marginal violation (L-infinity)
  LogDomain log_domain = LogDomain::Auto;
  int check_every = 10;

  void validate() const;
};

struct TransportPlan {
  Matrix coupling;
  std::vector<double> source_weights;
  std::vector<double> target_weights;
  double objective = 0.0;     // <gamma, C>_F
  double entropy_term = 0.0;  // eps * sum gamma (log gamma - 1); 0 for exact plans
  double epsilon = 0.0;
  double max_marginal_violation = 0.0;
  bool converged = false;
  int iterations = 0;
  bool log_domain = false;
};

/// Max L-infinity deviation of the row / column sums of `coupling` from
/// `p` / `q`.
double marginal_violation(const Matrix& coupling, std::span<const double> p, std::span<const double> q);

/// <gamma, C>_F
double transport_cost(const Matrix& coupling, const Matrix& cost);

/// Entropic OT, eps > 0. Never throws on non-convergence; the plan carries
/// converged=false. In plain mode a kernel underflow or scaling overflow
/// raises NumericalError (retry with LogDomain::On).
TransportPlan sinkhorn(const CostMatrix& cost, std::span<const double> p, std::span<const double> q,
                       const SolverConfig& config);

/// Exact OT via network simplex on the bipartite transportation graph.
/// Returns a basic optimal plan (at most n+m-1 positive entries).
TransportPlan exact_ot(const CostMatrix& cost, std::span<const double> p, std::span<const double> q);

/// Largest n*m accepted by exact_ot.
inline constexpr std::size_t kExactOtMaxEntries = 4'000'000;

/// Routes eps == 0 to exact_ot, eps > 0 to sinkhorn.
TransportPlan solve(const CostMatrix& cost, std::span<const double> p, std::span<const double> q,
                    const SolverConfig& config);

struct MrotSolution {
  TransportPlan plan;
  CostMatrix engineered;
  NeighborhoodGraph graph;
};

/// pairwise_cost -> knn_neighborhood(k) -> engineer_cost(rule) -> solve with
/// p = q = data.weights().
MrotSolution solve_mrot(const Dataset& data, std::size_t k, const SolverConfig& config,
                        const CapRule& rule = CapRule::row_max());

namespace detail {
/// Raw network simplex on a dense cost; returns the n x m flow matrix.
Matrix network_simplex_transport(const Matrix& cost, std::span<const double> p, std::span<const double> q);
}  // namespace detail

}  // namespace mrot
