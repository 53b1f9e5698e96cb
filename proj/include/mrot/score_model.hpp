#pragma once

// The fitted detector: self-transport under the engineered (or Coulomb)
// cost, per-sample efforts, their KDE-CDF scores and a regressor that
// extends those scores to unseen points.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrot/cost_engineering.hpp"
#include "mrot/ot_solver.hpp"
#include "mrot/regressors.hpp"
#include "mrot/scoring.hpp"
#include "mrot/standardizer.hpp"

namespace mrot {

struct MrotConfig {
  std::size_t k = 10;
  SolverConfig solver;
  CapRule cap = CapRule::row_max();
  // Engineered or Coulomb.
  CostKind cost = CostKind::Engineered;
  // Standardize columns before computing costs.
  bool standardize = true;
  RegressorSpec regressor;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FitDiagnostics {
  bool converged = true;
  double max_marginal_violation = 0.0;
  int iterations = 0;
  bool log_domain = false;
  double objective = 0.0;
};

class MrotModel {
 public:
  /// Runs the full pipeline. Requires n >= 10 and n > k. A solver that does
  /// not converge still yields a model, with diagnostics().converged false
  /// and a warning. Regressor failures are rethrown as Error naming the
  /// stage.
  static MrotModel fit(const Dataset& data, const MrotConfig& config);

  /// Scores in [0, 1]; throws DataError when the column count differs.
  std::vector<double> predict(const Matrix& x) const;

  const MrotConfig& config() const noexcept { return config_; }
  const Standardizer& standardizer() const noexcept { return standardizer_; }
  const EffortVector& training_efforts() const noexcept { return efforts_; }
  std::span<const double> training_scores() const noexcept { return scores_; }
  const KdeModel& kde() const noexcept { return kde_; }
  const Regressor& regressor() const noexcept { return regressor_; }
  const FitDiagnostics& diagnostics() const noexcept { return diagnostics_; }
  std::size_t dim() const noexcept { return standardizer_.dim(); }
  const std::vector<std::string>& column_names() const noexcept { return column_names_; }
  void set_column_names(std::vector<std::string> names);

  nlohmann::json to_document() const;
  /// Throws DataError on missing or inconsistent fields.
  static MrotModel from_document(const nlohmann::json& doc);

 private:
  MrotModel(MrotConfig config, Standardizer standardizer, EffortVector efforts, std::vector<double> scores,
            KdeModel kde, Regressor regressor, FitDiagnostics diagnostics);

  MrotConfig config_;
  Standardizer standardizer_;
  EffortVector efforts_;
  std::vector<double> scores_;
  KdeModel kde_;
  Regressor regressor_;
  FitDiagnostics diagnostics_;
  std::vector<std::string> column_names_;
};

/// Training scores only (no regressor), as used by evaluation code that
/// never scores new points.
struct TrainingScores {
  std::vector<double> efforts;
  std::vector<double> scores;
  FitDiagnostics diagnostics;
};

TrainingScores training_scores(const Dataset& data, const MrotConfig& config);

struct CrossValidationResult {
  RegressorSpec best;
  // Mean validation MSE per candidate, same order as the input. Candidates
  // that failed to train hold nullopt.
  std::vector<std::optional<double>> mse;
};

/// k-fold cross-validation over regressor candidates. Folds come from a
/// seeded shuffle. The lowest mean MSE wins; ties go to the earlier
/// RegressorKind, then to the earlier candidate.
CrossValidationResult cross_validate_regressor(const Matrix& x, std::span<const double> scores,
                                               std::span<const RegressorSpec> candidates, std::size_t folds,
                                               std::uint64_t seed);

}  // namespace mrot
