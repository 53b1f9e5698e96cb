#pragma once

// Nonlinear regressors used to extend training-set anomaly scores to new
// points: k-NN averaging, RBF kernel ridge and shallow gradient-boosted
// regression trees. All three are deterministic.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrot/matrix.hpp"
#include "mrot/standardizer.hpp"

namespace mrot {

/// Declaration order is the tie-break order used by model selection.
enum class RegressorKind { Knn, KernelRidge, GradientBoostedTrees };

std::string to_string(RegressorKind kind);
/// Accepts "knn", "kernel-ridge", "gbt" (and the snake_case spellings).
RegressorKind regressor_kind_from_string(const std::string& s);

struct RegressorSpec {
  RegressorKind kind = RegressorKind::KernelRidge;
  std::size_t knn_k = 5;
  std::optional<double> gamma_rbf;  // default: median heuristic
  double lambda_reg = 1e-3;
  std::size_t max_kernel_samples = 4000;
  std::size_t n_trees = 100;
  std::size_t depth = 3;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 1;
  bool standardize = true;

  static RegressorSpec knn(std::size_t k = 5);
  static RegressorSpec kernel_ridge();
  static RegressorSpec gbt();

  bool operator==(const RegressorSpec&) const = default;
};

struct KnnModel {
  std::size_t k = 5;
  Matrix points;
  std::vector<double> targets;
};

struct KernelRidgeModel {
  double gamma = 1.0;
  double intercept = 0.0;
  Matrix support;
  std::vector<double> alpha;
};

struct TreeNode {
  // Leaf when feature < 0.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct GbtModel {
  double base = 0.0;
  double learning_rate = 0.1;
  std::vector<std::vector<TreeNode>> trees;
};

/// 1 / (2 * median pairwise squared distance), over at most `max_points`
/// evenly strided rows.
double median_heuristic_gamma(const Matrix& x, std::size_t max_points = 1000);

class Regressor {
 public:
  /// Fits on (x, y). Throws DataError on invalid input.
  static Regressor fit(const Matrix& x, std::span<const double> y, const RegressorSpec& spec);

  /// Predictions clamped to [0, 1].
  std::vector<double> predict(const Matrix& x) const;
  /// Unclamped model output.
  std::vector<double> predict_raw(const Matrix& x) const;

  const RegressorSpec& spec() const noexcept { return spec_; }
  RegressorKind kind() const noexcept { return spec_.kind; }
  const Standardizer& standardizer() const noexcept { return standardizer_; }
  std::size_t dim() const noexcept { return standardizer_.dim(); }

  nlohmann::json to_json() const;
  static Regressor from_json(const nlohmann::json& doc);

 private:
  using Model = std::variant<KnnModel, KernelRidgeModel, GbtModel>;
  Regressor(RegressorSpec spec, Standardizer standardizer, Model model);

  RegressorSpec spec_;
  Standardizer standardizer_;
  Model model_;
};

}  // namespace mrot
