#include "mrot/score_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mrot/diagnostics.hpp"
#include "mrot/errors.hpp"
#include "mrot/rng.hpp"

namespace mrot {

namespace {

std::string log_domain_name(LogDomain m) {
  switch (m) {
    case LogDomain::Auto:
      return "auto";
    case LogDomain::Off:
      return "off";
    case LogDomain::On:
      return "on";
  }
  return "auto";
}

LogDomain log_domain_from_name(const std::string& s) {
  if (s == "auto") return LogDomain::Auto;
  if (s == "off") return LogDomain::Off;
  if (s == "on") return LogDomain::On;
  throw DataError("unknown log_domain '" + s + "'");
}

std::string cap_kind_name(CapRule::Kind k) {
  switch (k) {
    case CapRule::Kind::RowMax:
      return "row-max";
    case CapRule::Kind::GlobalMax:
      return "global-max";
    case CapRule::Kind::Fixed:
      return "fixed";
  }
  return "row-max";
}

CapRule cap_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "row-max") return CapRule::row_max();
  if (kind == "global-max") return CapRule::global_max();
  if (kind == "fixed") return CapRule::fixed(j.at("value").get<double>());
  throw DataError("unknown cap rule '" + kind + "'");
}

struct PipelineOutput {
  Standardizer standardizer;
  TrainingScores training;
};

PipelineOutput run_pipeline(const Dataset& data, const MrotConfig& config) {
  config.validate();
  const std::size_t n = data.size();
  if (n < 10) throw DataError("fit needs at least 10 samples (got " + std::to_string(n) + ")");
  if (config.cost == CostKind::Engineered && config.k >= n) {
    throw DataError("k must be smaller than the number of samples (k=" + std::to_string(config.k) +
                    ", n=" + std::to_string(n) + ")");
  }

  PipelineOutput out;
  out.standardizer = config.standardize ? Standardizer::fit(data.features()) : Standardizer::identity(data.dim());
  const Dataset work(out.standardizer.apply(data.features()),
                     std::vector<double>(data.weights().begin(), data.weights().end()));
  const auto p = work.weights();

  TransportPlan plan;
  std::optional<CostMatrix> cost;
  if (config.cost == CostKind::Engineered) {
    auto sol = solve_mrot(work, config.k, config.solver, config.cap);
    plan = std::move(sol.plan);
    cost.emplace(std::move(sol.engineered));
  } else {
    cost.emplace(coulomb_cost(work));
    plan = solve(*cost, p, p, config.solver);
  }

  auto& diag = out.training.diagnostics;
  diag.converged = plan.converged;
  diag.max_marginal_violation = plan.max_marginal_violation;
  diag.iterations = plan.iterations;
  diag.log_domain = plan.log_domain;
  diag.objective = plan.objective;
  if (!plan.converged) {
    std::ostringstream msg;
    msg << "transport solver did not converge (max marginal violation " << plan.max_marginal_violation << " after "
        << plan.iterations << " iterations); scores may be unreliable";
    warn(msg.str());
  }

  out.training.efforts = transport_effort(plan, *cost, p).efforts;
  out.training.scores = scores_from_efforts(out.training.efforts);
  return out;
}

}  // namespace

void MrotConfig::validate() const {
  solver.validate();
  if (cost != CostKind::Engineered && cost != CostKind::Coulomb) {
    throw DataError("model cost must be engineered or coulomb");
  }
  if (cost == CostKind::Engineered && k < 1) throw DataError("k must be >= 1");
}

MrotModel::MrotModel(MrotConfig config, Standardizer standardizer, EffortVector efforts, std::vector<double> scores,
                     KdeModel kde, Regressor regressor, FitDiagnostics diagnostics)
    : config_(std::move(config)),
      standardizer_(std::move(standardizer)),
      efforts_(std::move(efforts)),
      scores_(std::move(scores)),
      kde_(std::move(kde)),
      regressor_(std::move(regressor)),
      diagnostics_(diagnostics) {}

TrainingScores training_scores(const Dataset& data, const MrotConfig& config) {
  return run_pipeline(data, config).training;
}

MrotModel MrotModel::fit(const Dataset& data, const MrotConfig& config) {
  auto out = run_pipeline(data, config);
  auto kde = KdeModel::fit(out.training.efforts);

  EffortVector efforts;
  efforts.efforts = out.training.efforts;
  efforts.source_epsilon = config.solver.epsilon;
  efforts.source_k = config.cost == CostKind::Engineered ? config.k : 0;

  std::optional<Regressor> regressor;
  try {
    regressor.emplace(Regressor::fit(data.features(), out.training.scores, config.regressor));
  } catch (const std::exception& e) {
    throw Error("regression stage (" + to_string(config.regressor.kind) + ") failed: " + e.what());
  }
  return MrotModel(config, std::move(out.standardizer), std::move(efforts), std::move(out.training.scores),
                   std::move(kde), std::move(*regressor), out.training.diagnostics);
}

std::vector<double> MrotModel::predict(const Matrix& x) const {
  if (x.cols() != dim()) {
    throw DataError("input has " + std::to_string(x.cols()) + " columns, model expects " + std::to_string(dim()));
  }
  if (!x.all_finite()) throw DataError("input contains non-finite values");
  if (x.rows() == 0) return {};
  return regressor_.predict(x);
}

void MrotModel::set_column_names(std::vector<std::string> names) {
  if (!names.empty() && names.size() != dim()) throw DataError("column name count does not match model dimension");
  column_names_ = std::move(names);
}

nlohmann::json MrotModel::to_document() const {
  nlohmann::json doc;
  doc["config"] = {{"k", config_.k},
                   {"epsilon", config_.solver.epsilon},
                   {"max_iters", config_.solver.max_iters},
                   {"tol", config_.solver.tol},
                   {"log_domain", log_domain_name(config_.solver.log_domain)},
                   {"check_every", config_.solver.check_every},
                   {"cap", {{"kind", cap_kind_name(config_.cap.kind)}, {"value", config_.cap.value}}},
                   {"cost", to_string(config_.cost)},
                   {"standardize", config_.standardize},
                   {"seed", config_.seed}};
  doc["standardizer"] = {{"mean", standardizer_.mean}, {"scale", standardizer_.scale}};
  doc["kde"] = {{"centers", std::vector<double>(kde_.centers().begin(), kde_.centers().end())},
                {"bandwidth", kde_.bandwidth()}};
  doc["training"] = {{"efforts", efforts_.efforts}, {"scores", scores_}};
  doc["diagnostics"] = {{"converged", diagnostics_.converged},
                        {"max_marginal_violation", diagnostics_.max_marginal_violation},
                        {"iterations", diagnostics_.iterations},
                        {"log_domain", diagnostics_.log_domain},
                        {"objective", diagnostics_.objective}};
  doc["regressor"] = regressor_.to_json();
  doc["schema"] = {{"d", dim()}, {"columns", column_names_}};
  return doc;
}

MrotModel MrotModel::from_document(const nlohmann::json& doc) {
  try {
    MrotConfig cfg;
    const auto& c = doc.at("config");
    cfg.k = c.at("k").get<std::size_t>();
    cfg.solver.epsilon = c.at("epsilon").get<double>();
    cfg.solver.max_iters = c.at("max_iters").get<int>();
    cfg.solver.tol = c.at("tol").get<double>();
    cfg.solver.log_domain = log_domain_from_name(c.at("log_domain").get<std::string>());
    cfg.solver.check_every = c.at("check_every").get<int>();
    cfg.cap = cap_from_json(c.at("cap"));
    cfg.cost = cost_kind_from_string(c.at("cost").get<std::string>());
    cfg.standardize = c.at("standardize").get<bool>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.validate();

    Standardizer st{doc.at("standardizer").at("mean").get<std::vector<double>>(),
                    doc.at("standardizer").at("scale").get<std::vector<double>>()};
    const auto d = doc.at("schema").at("d").get<std::size_t>();
    if (st.mean.size() != d || st.scale.size() != d || d == 0) throw DataError("standardizer does not match schema");

    KdeModel kde(doc.at("kde").at("centers").get<std::vector<double>>(), doc.at("kde").at("bandwidth").get<double>());
    EffortVector efforts;
    efforts.efforts = doc.at("training").at("efforts").get<std::vector<double>>();
    efforts.source_epsilon = cfg.solver.epsilon;
    efforts.source_k = cfg.cost == CostKind::Engineered ? cfg.k : 0;
    auto scores = doc.at("training").at("scores").get<std::vector<double>>();
    if (scores.size() != efforts.efforts.size()) throw DataError("training scores and efforts differ in length");

    FitDiagnostics diag;
    const auto& dj = doc.at("diagnostics");
    diag.converged = dj.at("converged").get<bool>();
    diag.max_marginal_violation = dj.at("max_marginal_violation").get<double>();
    diag.iterations = dj.at("iterations").get<int>();
    diag.log_domain = dj.at("log_domain").get<bool>();
    diag.objective = dj.at("objective").get<double>();

    auto reg = Regressor::from_json(doc.at("regressor"));
    if (reg.dim() != d) throw DataError("regressor dimension does not match schema");
    cfg.regressor = reg.spec();

    MrotModel model(std::move(cfg), std::move(st), std::move(efforts), std::move(scores), std::move(kde),
                    std::move(reg), diag);
    model.set_column_names(doc.at("schema").at("columns").get<std::vector<std::string>>());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model document schema violation: ") + e.what());
  }
}

CrossValidationResult cross_validate_regressor(const Matrix& x, std::span<const double> scores,
                                               std::span<const RegressorSpec> candidates, std::size_t folds,
                                               std::uint64_t seed) {
  const std::size_t n = x.rows();
  if (candidates.empty()) throw DataError("cross-validation needs at least one candidate");
  if (folds < 2) throw DataError("cross-validation needs folds >= 2");
  if (n < folds) throw DataError("cross-validation needs at least as many samples as folds");
  if (scores.size() != n) throw DataError("score vector length does not match the number of rows");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  CrossValidationResult result;
  result.mse.assign(candidates.size(), std::nullopt);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double total = 0.0;
    try {
      for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t lo = f * n / folds;
        const std::size_t hi = (f + 1) * n / folds;
        std::vector<std::size_t> train, valid;
        for (std::size_t r = 0; r < n; ++r) (r >= lo && r < hi ? valid : train).push_back(order[r]);
        std::sort(train.begin(), train.end());
        std::sort(valid.begin(), valid.end());
        std::vector<double> y_train;
        y_train.reserve(train.size());
        for (std::size_t i : train) y_train.push_back(scores[i]);
        const auto model = Regressor::fit(x.select_rows(train), y_train, candidates[c]);
        const auto pred = model.predict(x.select_rows(valid));
        double sse = 0.0;
        for (std::size_t r = 0; r < valid.size(); ++r) {
          const double e = pred[r] - scores[valid[r]];
          sse += e * e;
        }
        total += sse / static_cast<double>(valid.size());
      }
      result.mse[c] = total / static_cast<double>(folds);
    } catch (const std::exception& e) {
      warn("regressor candidate " + to_string(candidates[c].kind) + " excluded: " + e.what());
    }
  }

  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (!result.mse[c]) continue;
    if (!best) {
      best = c;
      continue;
    }
    const double a = *result.mse[c];
    const double b = *result.mse[*best];
    // Differences at rounding level count as ties.
    const bool tie = std::abs(a - b) <= 1e-12 * std::max(a, b) + 1e-24;
    if ((!tie && a < b) || (tie && candidates[c].kind < candidates[*best].kind)) best = c;
  }
  if (!best) throw Error("every regressor candidate failed to train");
  result.best = candidates[*best];
  return result;
}

}  // namespace mrot
