// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance --only N   run criterion N (1-10)
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mrot/eval_harness.hpp"
#include "mrot/io.hpp"
#include "mrot/ot_solver.hpp"
#include "mrot/rng.hpp"
#include "mrot/score_model.hpp"
#include "mrot/scoring.hpp"
#include "oracles/oracles.hpp"

using namespace mrot;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> uniform(std::size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

std::vector<double> random_simplex(Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  double s = 0.0;
  for (auto& v : w) s += v = 0.05 + rng.uniform();
  for (auto& v : w) v /= s;
  return w;
}

CostMatrix random_cost(Rng& rng, std::size_t n, std::size_t m) {
  Matrix c(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) c(i, j) = 10.0 * rng.uniform();
  return CostMatrix(std::move(c), CostKind::Base);
}

oracle::Dense to_dense(const Matrix& m) {
  oracle::Dense out(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

double mean_gap(std::span<const double> s, std::span<const int> y) {
  double a = 0, na = 0, b = 0, nb = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i]) {
      a += s[i];
      na += 1;
    } else {
      b += s[i];
      nb += 1;
    }
  }
  return a / na - b / nb;
}

MrotConfig toy_config(double eps, std::size_t k, RegressorSpec reg) {
  MrotConfig cfg;
  cfg.k = k;
  cfg.solver.epsilon = eps;
  cfg.cap = CapRule::row_max();
  cfg.regressor = reg;
  return cfg;
}

// 1. Toy separation with k = 10, eps = 0.1.
void toy_separation(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto toy = synth_toy(500, 25, 0);
  const auto krr = MrotModel::fit(toy.dataset, toy_config(0.1, 10, RegressorSpec::kernel_ridge()));
  const auto gbt = MrotModel::fit(toy.dataset, toy_config(0.1, 10, RegressorSpec::gbt()));
  const double secs = seconds_since(t0);
  const double train = auc_roc(krr.training_scores(), toy.labels);
  const double auc_krr = auc_roc(krr.predict(toy.dataset.features()), toy.labels);
  const double auc_gbt = auc_roc(gbt.predict(toy.dataset.features()), toy.labels);
  const double gap = mean_gap(krr.training_scores(), toy.labels);
  o.detail << "train_auc=" << train << " krr_auc=" << auc_krr << " gbt_auc=" << auc_gbt << " score_gap=" << gap
           << " converged=" << krr.diagnostics().converged << " runtime=" << secs << "s";
  o.require(train >= 0.99, "training AUC >= 0.99");
  o.require(auc_krr >= 0.95, "kernel ridge AUC >= 0.95");
  o.require(auc_gbt >= 0.95, "gbt AUC >= 0.95");
  o.require(gap >= 0.5, "mean anomaly - mean normal score >= 0.5");
  o.require(secs < 10.0, "runtime < 10 s");
}

// 2. Coulomb cost ranks anomalies low.
void coulomb_inversion(Outcome& o) {
  const auto toy = synth_toy(500, 25, 0);
  auto cfg = toy_config(0.1, 10, RegressorSpec::kernel_ridge());
  cfg.cost = CostKind::Coulomb;
  const auto ts = training_scores(toy.dataset, cfg);
  const double auc = auc_roc(ts.scores, toy.labels);
  o.detail << "train_auc=" << auc << " inverted=" << 1.0 - auc;
  o.require(auc <= 0.3, "AUC <= 0.3");
  o.require(1.0 - auc >= 0.7, "1 - AUC >= 0.7");
}

// 3. Exact solver vs LP oracle; small-eps Sinkhorn vs exact.
void oracle_equivalence(Outcome& o) {
  Rng rng(2024);
  double worst_exact = 0.0, worst_sink = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(6), m = 1 + rng.uniform_index(6);
    const auto c = random_cost(rng, n, m);
    const auto p = random_simplex(rng, n), q = random_simplex(rng, m);
    const double lp = oracle::transport_lp(to_dense(c.values()), p, q);
    const auto ex = exact_ot(c, p, q);
    worst_exact = std::max(worst_exact, std::abs(ex.objective - lp) / std::max(std::abs(lp), 1e-300));
    const auto& v = c.values().values();
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    SolverConfig cfg;
    cfg.epsilon = 1e-3 * mean;
    const auto sk = sinkhorn(c, p, q, cfg);
    worst_sink = std::max(worst_sink, std::abs(sk.objective - ex.objective) / std::max(std::abs(ex.objective), 1e-300));
  }
  o.detail << "max_rel_exact_vs_lp=" << worst_exact << " max_rel_sinkhorn_vs_exact=" << worst_sink;
  o.require(worst_exact <= 1e-8, "exact within 1e-8 of LP oracle");
  o.require(worst_sink <= 0.01, "sinkhorn within 1% of exact");
}

// 4. Feasibility of every returned plan.
void feasibility(Outcome& o) {
  Rng rng(77);
  double worst_sink = 0.0, worst_exact = 0.0, min_entry = 0.0;
  int sinkhorn_plans = 0, unconverged = 0, exact_plans = 0;
  const auto track = [&](const TransportPlan& plan, std::span<const double> p, std::span<const double> q) {
    for (double v : plan.coupling.values()) min_entry = std::min(min_entry, v);
    const double viol = marginal_violation(plan.coupling, p, q);
    if (plan.epsilon == 0.0) {
      worst_exact = std::max(worst_exact, viol);
      ++exact_plans;
    } else if (plan.converged) {
      worst_sink = std::max(worst_sink, viol);
      ++sinkhorn_plans;
    } else {
      ++unconverged;
    }
  };
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(40), m = 2 + rng.uniform_index(40);
    const auto c = random_cost(rng, n, m);
    const auto p = random_simplex(rng, n), q = random_simplex(rng, m);
    for (double eps : {0.0, 1e-2, 1e-1, 1.0}) {
      SolverConfig cfg;
      cfg.epsilon = eps;
      track(solve(c, p, q, cfg), p, q);
    }
  }
  const auto toy = synth_toy(150, 8, 5);
  const Dataset std_toy(Standardizer::fit(toy.dataset.features()).apply(toy.dataset.features()));
  for (std::size_t k : {5u, 10u, 20u}) {
    for (double eps : {0.0, 1e-2, 1e-1, 1.0}) {
      SolverConfig cfg;
      cfg.epsilon = eps;
      const auto sol = solve_mrot(std_toy, k, cfg);
      track(sol.plan, std_toy.weights(), std_toy.weights());
    }
  }
  o.detail << "exact_plans=" << exact_plans << " max_violation=" << worst_exact << " sinkhorn_plans=" << sinkhorn_plans
           << " max_violation=" << worst_sink << " unconverged=" << unconverged << " min_entry=" << min_entry;
  o.require(worst_exact <= 1e-10, "exact violation <= 1e-10");
  o.require(worst_sink <= 1e-9, "sinkhorn violation <= 1e-9");
  o.require(min_entry >= 0.0, "all entries >= 0");
}

// 5. Large-eps limit on an engineered cost.
void large_eps(Outcome& o) {
  const auto toy = synth_toy(500, 25, 0);
  const Dataset data(Standardizer::fit(toy.dataset.features()).apply(toy.dataset.features()));
  const auto base = pairwise_cost(data);
  const auto eng = engineer_cost(base, knn_neighborhood(base, 10));
  const auto& v = eng.values().values();
  const double cmax = *std::max_element(v.begin(), v.end());
  SolverConfig cfg;
  cfg.epsilon = 1e3 * cmax;
  const auto p = data.weights();
  const auto plan = sinkhorn(eng, p, p, cfg);
  double plan_dev = 0.0;
  for (std::size_t i = 0; i < eng.rows(); ++i)
    for (std::size_t j = 0; j < eng.cols(); ++j) plan_dev = std::max(plan_dev, std::abs(plan.coupling(i, j) - p[i] * p[j]));
  const auto eff = transport_effort(plan, eng, p).efforts;
  // First order in 1/eps the effort drops by the row variance of the cost
  // over eps, which is reported next to the measured deviation.
  double eff_dev = 0.0, predicted = 0.0;
  const double m = static_cast<double>(eng.cols());
  for (std::size_t i = 0; i < eng.rows(); ++i) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t j = 0; j < eng.cols(); ++j) {
      mean += eng(i, j);
      sq += eng(i, j) * eng(i, j);
    }
    mean /= m;
    eff_dev = std::max(eff_dev, std::abs(eff[i] - mean));
    predicted = std::max(predicted, (sq / m - mean * mean) / cfg.epsilon);
  }
  o.detail << "max_cost=" << cmax << " max_plan_dev=" << plan_dev << " max_effort_dev=" << eff_dev
           << " first_order_var_over_eps=" << predicted;
  o.require(plan.converged, "converged");
  o.require(plan_dev <= 1e-3, "plan within 1e-3 of product coupling");
  o.require(eff_dev <= 1e-3, "efforts within 1e-3 of row means");
}

// 6. Identity optimality on the un-engineered self cost.
void identity_optimality(Outcome& o) {
  Rng rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 5 + rng.uniform_index(60);
    Matrix x(n, 3);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < 3; ++c) x(i, c) = rng.normal();
    worst = std::max(worst, exact_ot(pairwise_cost(x), uniform(n), uniform(n)).objective);
  }
  const auto toy = synth_toy(500, 25, 0);
  worst = std::max(worst, exact_ot(pairwise_cost(toy.dataset), toy.dataset.weights(), toy.dataset.weights()).objective);
  o.detail << "max_objective=" << worst;
  o.require(worst < 1e-12, "objective < 1e-12");
}

// 7. KDE / CDF suite.
void kde_suite(Outcome& o) {
  Rng rng(7);
  double worst_quad = 0.0;
  long violations = 0;
  double lo = 1.0, hi = 0.0;
  for (int model = 0; model < 20; ++model) {
    std::vector<double> centers(2 + rng.uniform_index(30));
    for (auto& c : centers) c = std::abs(rng.normal(1.0, 2.0));
    const auto kde = KdeModel::fit(centers);
    for (int q = 0; q < 25; ++q) {
      const double t = rng.normal(1.0, 4.0);
      worst_quad = std::max(worst_quad, std::abs(kde.cdf(t) - oracle::kde_cdf_quadrature(centers, kde.bandwidth(), t)));
    }
    for (int pair = 0; pair < 500; ++pair) {
      double a = rng.normal(1.0, 6.0), b = rng.normal(1.0, 6.0);
      if (a > b) std::swap(a, b);
      const double fa = kde.cdf(a), fb = kde.cdf(b);
      violations += fa > fb;
      lo = std::min({lo, fa, fb});
      hi = std::max({hi, fa, fb});
    }
  }
  o.detail << "max_quadrature_err=" << worst_quad << " monotonicity_violations=" << violations << "/10000 range=[" << lo
           << "," << hi << "]";
  o.require(worst_quad <= 1e-6, "quadrature agreement 1e-6");
  o.require(violations == 0, "monotone");
  o.require(lo >= 0.0 && hi <= 1.0, "range [0,1]");
}

// 8. Full default ablation grid on toy data.
void ablation(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = ablation_run(synth_toy(500, 25, 0), AblationGrid{});
  const double secs = seconds_since(t0);
  double worst = 1.0;
  int below = 0, failed = 0;
  std::ostringstream bad;
  for (const auto& r : rows) {
    if (!r.auc_roc) {
      ++failed;
      continue;
    }
    worst = std::min(worst, *r.auc_roc);
    if (*r.auc_roc < 0.95) {
      ++below;
      bad << " (eps=" << r.epsilon << ",k=" << r.k << ")=" << *r.auc_roc;
    }
  }
  o.detail << "cells=" << rows.size() << " failed=" << failed << " below_0.95=" << below << " min_auc=" << worst
           << " runtime=" << secs << "s" << bad.str();
  o.require(rows.size() == 24, "24 cells");
  o.require(failed == 0 && below == 0, "every cell AUC >= 0.95");
  o.require(secs < 300.0, "runtime < 5 min");
}

// 9. Persistence round trips.
void persistence(Outcome& o) {
  Rng rng(9);
  int mismatched = 0;
  const RegressorKind kinds[] = {RegressorKind::Knn, RegressorKind::KernelRidge, RegressorKind::GradientBoostedTrees};
  for (int model = 0; model < 100; ++model) {
    const std::size_t n = 20 + rng.uniform_index(30), d = 1 + rng.uniform_index(4);
    Matrix x(n, d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) x(i, c) = rng.normal(0.0, 1.0 + c);
    MrotConfig cfg;
    cfg.k = 1 + rng.uniform_index(std::min<std::uint64_t>(n - 1, 10));
    const double eps_grid[] = {0.0, 0.05, 0.5};
    cfg.solver.epsilon = eps_grid[rng.uniform_index(3)];
    cfg.cost = rng.uniform() < 0.2 ? CostKind::Coulomb : CostKind::Engineered;
    cfg.regressor.kind = kinds[rng.uniform_index(3)];
    cfg.regressor.n_trees = 20;
    cfg.seed = rng.next_u64() >> 1;
    const auto fitted = MrotModel::fit(Dataset(x), cfg);
    const auto back = deserialize_model(serialize_model(fitted));
    Matrix q(100, d);
    for (std::size_t i = 0; i < 100; ++i)
      for (std::size_t c = 0; c < d; ++c) q(i, c) = rng.normal(0.0, 3.0);
    mismatched += fitted.predict(q) != back.predict(q);
  }
  o.detail << "models=100 queries_per_model=100 mismatched_models=" << mismatched;
  o.require(mismatched == 0, "bit-exact predictions after reload");
}

// 10. Window features.
void windows(Outcome& o) {
  double worst = 0.0;
  const auto f = window_features(Matrix::from_rows({{1.0}, {2.0}, {3.0}, {4.0}}), {2, 2});
  const double expect[2][2] = {{1.5, std::sqrt(0.5)}, {3.5, std::sqrt(0.5)}};
  bool shape = f.rows() == 2 && f.cols() == 2;
  if (shape)
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) worst = std::max(worst, std::abs(f(r, c) - expect[r][c]));
  // Two sensors, window of 3: values hand-computed with the 1/(L-1) divisor.
  const auto g = window_features(Matrix::from_rows({{0, 10}, {3, 10}, {6, 13}, {9, 16}, {12, 10}}), {3, 2});
  const double expect_g[2][4] = {{3, 11, 3, std::sqrt(3.0)}, {9, 13, 3, 3}};
  shape = shape && g.rows() == 2 && g.cols() == 4;
  if (g.rows() == 2 && g.cols() == 4)
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 4; ++c) worst = std::max(worst, std::abs(g(r, c) - expect_g[r][c]));
  const auto constant = window_features(Matrix(20, 2, -1.5), {5, 5});
  for (std::size_t r = 0; r < constant.rows(); ++r) {
    worst = std::max(worst, std::abs(constant(r, 0) + 1.5));
    worst = std::max(worst, std::abs(constant(r, 3)));
  }
  Rng rng(10);
  Matrix series(600, 34);
  for (double& v : std::span<double>(series.data(), 600 * 34)) v = rng.normal();
  const auto wide = window_features(series, {60, 30});
  o.detail << "max_hand_err=" << worst << " sensor_rows=" << wide.rows() << "x" << wide.cols();
  o.require(shape, "hand-case shapes");
  o.require(worst <= 1e-12, "hand cases within 1e-12");
  o.require(wide.cols() == 68 && wide.rows() == 19, "34 sensors -> 68-dim rows");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"toy separation (k=10, eps=0.1)", toy_separation},
      {"coulomb inversion", coulomb_inversion},
      {"solver oracle equivalence", oracle_equivalence},
      {"plan feasibility", feasibility},
      {"large-eps limit", large_eps},
      {"identity optimality", identity_optimality},
      {"KDE/CDF suite", kde_suite},
      {"ablation robustness", ablation},
      {"persistence round trip", persistence},
      {"window features", windows},
  };
  int only = 0;
  for (int a = 1; a < argc; ++a) {
    if (std::strcmp(argv[a], "--only") == 0 && a + 1 < argc) {
      only = std::atoi(argv[++a]);
    } else {
      std::cerr << "usage: acceptance [--only N]\n";
      return 1;
    }
  }
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::cerr << "criterion must be in 1.." << criteria.size() << "\n";
    return 1;
  }
  bool all = true;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    if (only != 0 && static_cast<int>(c) + 1 != only) continue;
    Outcome o;
    try {
      criteria[c].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    std::cout << "criterion " << c + 1 << " " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[c].first << ": "
              << o.detail.str() << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
