#pragma once

// Synthetic data, ranking metrics, anomaly downsampling and (eps, k,
// regressor) ablation grids.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrot/cost_engineering.hpp"
#include "mrot/regressors.hpp"
#include "mrot/score_model.hpp"

namespace mrot {

/// Dataset plus binary ground truth (1 = anomaly).
struct LabeledDataset {
  Dataset dataset;
  std::vector<int> labels;

  LabeledDataset(Dataset data, std::vector<int> labels);
  std::size_t anomaly_count() const;
};

/// n_normal draws from N(0, 0.25 I2) followed by n_anom draws from
/// N((-3, -3), 0.01 I2). Normals come first.
LabeledDataset synth_toy(std::size_t n_normal = 500, std::size_t n_anom = 25, std::uint64_t seed = 0);

/// Mann-Whitney estimate of P(score_anomaly > score_normal), ties count 1/2.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

/// Average precision: sum over distinct thresholds (descending) of
/// (recall_t - recall_{t-1}) * precision_t.
double auc_pr(std::span<const double> scores, std::span<const int> labels);

/// Either an absolute number of anomalies or a fraction in (0, 1] of the
/// available ones (rounded to nearest, at least one).
using AnomalyRequest = std::variant<std::size_t, double>;

/// Keeps every normal sample and a seeded subset of anomalies, preserving
/// the original row order. Weights are reset to uniform.
LabeledDataset downsample_anomalies(const LabeledDataset& data, AnomalyRequest request, std::uint64_t seed);

/// Seeded uniform subsample of rows (order preserved) when n > max_rows.
LabeledDataset subsample_rows(const LabeledDataset& data, std::size_t max_rows, std::uint64_t seed);

inline constexpr std::size_t kMaxFitSamples = 20000;

struct AblationGrid {
  std::vector<double> epsilons{0.0, 1e-2, 1e-1, 1.0};
  std::vector<std::size_t> ks{5, 10, 20, 30, 40, 50};
  std::vector<RegressorSpec> regressors{RegressorSpec::kernel_ridge()};

  void validate() const;
};

struct AblationRow {
  double epsilon = 0.0;
  std::size_t k = 0;
  RegressorKind regressor = RegressorKind::KernelRidge;
  // Empty when the cell failed.
  std::optional<double> auc_roc;
  std::optional<double> auc_pr;
  std::optional<double> train_auc_roc;
  bool converged = false;
  double runtime_seconds = 0.0;
  std::string error;
};

struct AblationOptions {
  // Template for everything the grid does not vary.
  MrotConfig base;
  std::uint64_t seed = 0;
  std::size_t max_rows = kMaxFitSamples;
};

/// One fit + in-sample scoring per cell, in (eps, k, regressor) order.
/// Failing cells are recorded with their message and the run continues.
std::vector<AblationRow> ablation_run(const LabeledDataset& data, const AblationGrid& grid,
                                      const AblationOptions& options = {});

/// CSV with header epsilon,k,regressor,auc_roc,auc_pr,train_auc_roc,converged,error
/// (plus runtime_seconds when requested). Missing metrics are empty fields.
void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows, bool include_runtime = false);
nlohmann::json ablation_to_json(std::span<const AblationRow> rows, bool include_runtime = false);

}  // namespace mrot
