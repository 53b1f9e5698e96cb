#include "mrot/ot_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mrot/diagnostics.hpp"
#include "mrot/errors.hpp"
#include "mrot/simd/kernels.hpp"

namespace mrot {

void SolverConfig::validate() const {
  if (!std::isfinite(epsilon) || epsilon < 0.0) throw DataError("epsilon must be finite and >= 0");
  if (max_iters < 1) throw DataError("max_iters must be >= 1");
  if (!(tol > 0.0)) throw DataError("tol must be > 0");
  if (check_every < 1) throw DataError("check_every must be >= 1");
}

double marginal_violation(const Matrix& coupling, std::span<const double> p, std::span<const double> q) {
  const std::size_t n = coupling.rows(), m = coupling.cols();
  std::vector<double> col(m, 0.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      row += coupling(i, j);
      col[j] += coupling(i, j);
    }
    worst = std::max(worst, std::abs(row - p[i]));
  }
  for (std::size_t j = 0; j < m; ++j) worst = std::max(worst, std::abs(col[j] - q[j]));
  return worst;
}

double transport_cost(const Matrix& coupling, const Matrix& cost) {
  double total = 0.0;
  const auto a = coupling.values();
  const auto c = cost.values();
  for (std::size_t k = 0; k < a.size(); ++k) total += a[k] * c[k];
  return total;
}

namespace {

void check_problem(const CostMatrix& cost, std::span<const double> p, std::span<const double> q) {
  if (p.size() != cost.rows() || q.size() != cost.cols()) {
    throw DataError("weights (" + std::to_string(p.size()) + ", " + std::to_string(q.size()) +
                    ") do not match cost shape " + std::to_string(cost.rows()) + "x" +
                    std::to_string(cost.cols()));
  }
  validate_weights(p, "p");
  validate_weights(q, "q");
}

double median_entry(const Matrix& c) {
  std::vector<double> v(c.values().begin(), c.values().end());
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

bool want_log_domain(const CostMatrix& cost, double eps) {
  const double med = median_entry(cost.values());
  const double max = simd::kernels().max(cost.values().data(), cost.values().values().size());
  // exp(-C/eps) loses everything below ~1e-300 and the scalings then
  // overflow, so large cost ranges also go to log domain.
  return eps < 1e-2 * med || max / eps > 500.0;
}

TransportPlan finish_plan(Matrix coupling, const CostMatrix& cost, std::span<const double> p,
                          std::span<const double> q, double eps) {
  TransportPlan plan;
  plan.coupling = std::move(coupling);
  plan.source_weights.assign(p.begin(), p.end());
  plan.target_weights.assign(q.begin(), q.end());
  plan.epsilon = eps;
  plan.objective = transport_cost(plan.coupling, cost.values());
  if (eps > 0.0) {
    double ent = 0.0;
    for (double g : plan.coupling.values())
      if (g > 0.0) ent += g * (std::log(g) - 1.0);
    plan.entropy_term = eps * ent;
  }
  plan.max_marginal_violation = marginal_violation(plan.coupling, p, q);
  return plan;
}

struct ScalingState {
  Matrix kernel;  // n x m
  std::vector<double> u, v;
  std::vector<double> col_acc;
};

// u = p / (K v); v = q / (K^T u). Returns false on a zero / non-finite scaling.
bool scaling_step(ScalingState& s, std::span<const double> p, std::span<const double> q) {
  const auto& kern = simd::kernels();
  const std::size_t n = s.kernel.rows(), m = s.kernel.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const double kv = kern.dot(s.kernel.row(i).data(), s.v.data(), m);
    s.u[i] = p[i] / kv;
    if (!(std::isfinite(s.u[i]) && s.u[i] > 0.0)) return false;
  }
  std::fill(s.col_acc.begin(), s.col_acc.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) kern.axpy(s.u[i], s.kernel.row(i).data(), s.col_acc.data(), m);
  for (std::size_t j = 0; j < m; ++j) {
    s.v[j] = q[j] / s.col_acc[j];
    if (!(std::isfinite(s.v[j]) && s.v[j] > 0.0)) return false;
  }
  return true;
}

double row_violation(const ScalingState& s, std::span<const double> p) {
  const auto& kern = simd::kernels();
  const std::size_t n = s.kernel.rows(), m = s.kernel.cols();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double row = s.u[i] * kern.dot(s.kernel.row(i).data(), s.v.data(), m);
    worst = std::max(worst, std::abs(row - p[i]));
  }
  return worst;
}

Matrix scaled_coupling(const ScalingState& s) {
  Matrix g(s.kernel.rows(), s.kernel.cols());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    auto k = s.kernel.row(i);
    auto out = g.row(i);
    for (std::size_t j = 0; j < g.cols(); ++j) out[j] = s.u[i] * k[j] * s.v[j];
  }
  return g;
}

TransportPlan sinkhorn_plain(const CostMatrix& cost, std::span<const double> p, std::span<const double> q,
                             const SolverConfig& cfg) {
  const auto& kern = simd::kernels();
  const std::size_t n = cost.rows(), m = cost.cols();
  ScalingState s{Matrix(n, m), std::vector<double>(n, 1.0), std::vector<double>(m, 1.0),
                 std::vector<double>(m, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    kern.exp_scaled(cost.values().row(i).data(), -1.0 / cfg.epsilon, m, s.kernel.row(i).data());
  }

  int it = 0;
  bool converged = false;
  while (it < cfg.max_iters) {
    ++it;
    if (!scaling_step(s, p, q)) {
      throw NumericalError("plain Sinkhorn scaling underflow/overflow at iteration " + std::to_string(it) +
                           " (eps=" + std::to_string(cfg.epsilon) + "); use log-domain stabilization");
    }
    if (it % cfg.check_every == 0 || it == cfg.max_iters) {
      if (row_violation(s, p) < cfg.tol) {
        converged = true;
        break;
      }
    }
  }
  TransportPlan plan = finish_plan(scaled_coupling(s), cost, p, q, cfg.epsilon);
  plan.iterations = it;
  plan.converged = converged && plan.max_marginal_violation < cfg.tol;
  plan.log_domain = false;
  return plan;
}

// Log-stabilized scaling: the kernel is K_ij = exp((f_i + g_j - C_ij) / eps)
// and the scalings u, v are absorbed into the dual potentials f, g whenever
// they leave [1/tau, tau].
TransportPlan sinkhorn_log(const CostMatrix& cost, std::span<const double> p, std::span<const double> q,
                           const SolverConfig& cfg) {
  const auto& kern = simd::kernels();
  const std::size_t n = cost.rows(), m = cost.cols();
  const double eps = cfg.epsilon;
  const double inv_eps = 1.0 / eps;
  constexpr double tau = 1e30;

  // c-transform start: every row and column of K has an entry equal to 1.
  std::vector<double> f(n), g(m, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) f[i] = *std::min_element(cost.values().row(i).begin(), cost.values().row(i).end());
  for (std::size_t i = 0; i < n; ++i) {
    auto row = cost.values().row(i);
    for (std::size_t j = 0; j < m; ++j) g[j] = std::min(g[j], row[j] - f[i]);
  }

  ScalingState s{Matrix(n, m), std::vector<double>(n, 1.0), std::vector<double>(m, 1.0),
                 std::vector<double>(m, 0.0)};
  auto rebuild = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      kern.gibbs_row(cost.values().row(i).data(), g.data(), f[i], inv_eps, m, s.kernel.row(i).data());
    }
  };
  auto absorb = [&] {
    for (std::size_t i = 0; i < n; ++i) f[i] += eps * std::log(s.u[i]);
    for (std::size_t j = 0; j < m; ++j) g[j] += eps * std::log(s.v[j]);
    std::fill(s.u.begin(), s.u.end(), 1.0);
    std::fill(s.v.begin(), s.v.end(), 1.0);
    rebuild();
  };
  auto out_of_range = [&](const std::vector<double>& x) {
    for (double a : x)
      if (a > tau || a < 1.0 / tau) return true;
    return false;
  };
  rebuild();

  int it = 0;
  bool converged = false;
  while (it < cfg.max_iters) {
    ++it;
    if (!scaling_step(s, p, q)) {
      // A row or column of the stabilized kernel vanished; recover from the
      // last finite potentials by restarting the scalings.
      for (auto& a : s.u)
        if (!(std::isfinite(a) && a > 0.0)) a = 1.0;
      for (auto& b : s.v)
        if (!(std::isfinite(b) && b > 0.0)) b = 1.0;
      absorb();
      if (!scaling_step(s, p, q)) {
        throw NumericalError("log-domain Sinkhorn failed to recover a finite scaling");
      }
    }
    if (out_of_range(s.u) || out_of_range(s.v)) absorb();
    if (it % cfg.check_every == 0 || it == cfg.max_iters) {
      if (row_violation(s, p) < cfg.tol) {
        converged = true;
        break;
      }
    }
  }
  TransportPlan plan = finish_plan(scaled_coupling(s), cost, p, q, eps);
  plan.iterations = it;
  plan.converged = converged && plan.max_marginal_violation < cfg.tol;
  plan.log_domain = true;
  return plan;
}

}  // namespace

TransportPlan sinkhorn(const CostMatrix& cost, std::span<const double> p, std::span<const double> q,
                       const SolverConfig& config) {
  config.validate();
  if (!(config.epsilon > 0.0)) throw DataError("sinkhorn needs epsilon > 0");
  check_problem(cost, p, q);
  switch (config.log_domain) {
    case LogDomain::On:
      return sinkhorn_log(cost, p, q, config);
    case LogDomain::Off:
      return sinkhorn_plain(cost, p, q, config);
    case LogDomain::Auto:
      break;
  }
  if (want_log_domain(cost, config.epsilon)) return sinkhorn_log(cost, p, q, config);
  try {
    return sinkhorn_plain(cost, p, q, config);
  } catch (const NumericalError& e) {
    warn(std::string(e.what()) + "; retrying in log domain");
    return sinkhorn_log(cost, p, q, config);
  }
}

TransportPlan exact_ot(const CostMatrix& cost, std::span<const double> p, std::span<const double> q) {
  check_problem(cost, p, q);
  if (cost.rows() * cost.cols() > kExactOtMaxEntries) {
    throw DataError("exact OT is limited to n*m <= " + std::to_string(kExactOtMaxEntries) + " (got " +
                    std::to_string(cost.rows()) + "x" + std::to_string(cost.cols()) + "); use epsilon > 0");
  }
  Matrix flow = detail::network_simplex_transport(cost.values(), p, q);
  TransportPlan plan = finish_plan(std::move(flow), cost, p, q, 0.0);
  plan.converged = true;
  plan.iterations = 0;
  return plan;
}

TransportPlan solve(const CostMatrix& cost, std::span<const double> p, std::span<const double> q,
                    const SolverConfig& config) {
  config.validate();
  if (config.epsilon == 0.0) return exact_ot(cost, p, q);
  return sinkhorn(cost, p, q, config);
}

MrotSolution solve_mrot(const Dataset& data, std::size_t k, const SolverConfig& config, const CapRule& rule) {
  config.validate();
  if (k < 1 || k >= data.size()) {
    throw DataError("k must satisfy 1 <= k < n (k=" + std::to_string(k) + ", n=" + std::to_string(data.size()) +
                    ")");
  }
  CostMatrix base = pairwise_cost(data);
  NeighborhoodGraph graph = knn_neighborhood(base, k);
  CostMatrix engineered = engineer_cost(base, graph, rule);
  TransportPlan plan = solve(engineered, data.weights(), data.weights(), config);
  return MrotSolution{std::move(plan), std::move(engineered), std::move(graph)};
}

}  // namespace mrot
