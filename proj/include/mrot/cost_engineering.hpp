#pragma once

// Ground costs for the self-transport problem: squared-Euclidean base costs,
// k-NN / rho-ball exclusion zones, the mass-repulsive engineered cost and the
// regularized Coulomb baseline.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrot/matrix.hpp"

namespace mrot {

/// Empirical measure: n samples in R^d with strictly positive weights
/// summing to one.
class Dataset {
 public:
  /// Uniform weights 1/n.
  explicit Dataset(Matrix features);
  Dataset(Matrix features, std::vector<double> weights);

  const Matrix& features() const noexcept { return features_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return features_.rows(); }
  std::size_t dim() const noexcept { return features_.cols(); }

 private:
  Matrix features_;
  std::vector<double> weights_;
};

/// Throws DataError unless `w` is a strictly positive vector summing to 1
/// within 1e-12. `what` names the vector in the message.
void validate_weights(std::span<const double> w, const std::string& what);

enum class CostKind { Base, Engineered, Coulomb };

std::string to_string(CostKind kind);
CostKind cost_kind_from_string(const std::string& s);

/// Dense nonnegative cost matrix. For engineered costs `caps[i]` is the
/// value written into row i's exclusion zone.
class CostMatrix {
 public:
  CostMatrix(Matrix values, CostKind kind, std::vector<double> caps = {});

  const Matrix& values() const noexcept { return values_; }
  CostKind kind() const noexcept { return kind_; }
  std::span<const double> caps() const noexcept { return caps_; }
  std::size_t rows() const noexcept { return values_.rows(); }
  std::size_t cols() const noexcept { return values_.cols(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return values_(i, j); }

 private:
  Matrix values_;
  CostKind kind_;
  std::vector<double> caps_;
};

enum class NeighborhoodMode { Knn, RhoBall };

struct NeighborhoodGraph {
  /// neighbor_sets[i] lists N(x_i): i first, then the others by ascending
  /// cost (ties by ascending index).
  std::vector<std::vector<std::size_t>> neighbor_sets;
  std::size_t k = 0;
  NeighborhoodMode mode = NeighborhoodMode::Knn;
  double rho = 0.0;

  std::size_t size() const noexcept { return neighbor_sets.size(); }
  bool contains(std::size_t i, std::size_t j) const;
};

/// Rule for the value L written into each exclusion zone.
struct CapRule {
  enum class Kind { RowMax, GlobalMax, Fixed };
  Kind kind = Kind::RowMax;
  double value = 0.0;  // used by Fixed only

  static CapRule row_max() { return {Kind::RowMax, 0.0}; }
  static CapRule global_max() { return {Kind::GlobalMax, 0.0}; }
  static CapRule fixed(double L) { return {Kind::Fixed, L}; }

  bool operator==(const CapRule&) const = default;
};

/// "row-max", "global-max" or "fixed:<L>".
std::string to_string(const CapRule& rule);
CapRule cap_rule_from_string(const std::string& s);

/// C_ij = ||x_i - y_j||^2. With `other` empty this is the self-cost.
CostMatrix pairwise_cost(const Matrix& x, const std::optional<Matrix>& other = std::nullopt);
CostMatrix pairwise_cost(const Dataset& data);

/// N(x_i) = {i} plus the k smallest off-diagonal entries of row i.
NeighborhoodGraph knn_neighborhood(const CostMatrix& cost, std::size_t k);

/// N(x_i) = { j : C_ij <= rho^2 }.
NeighborhoodGraph rho_ball_neighborhood(const CostMatrix& cost, double rho);

/// Mass-repulsive cost: entries inside N(x_i) are replaced by the cap L_i,
/// everything else is copied bit-for-bit from `cost`.
CostMatrix engineer_cost(const CostMatrix& cost, const NeighborhoodGraph& graph,
                         const CapRule& rule = CapRule::row_max());

/// C_ij = 1 / (1 + ||x_i - x_j||).
CostMatrix coulomb_cost(const Matrix& x);
CostMatrix coulomb_cost(const Dataset& data);

}  // namespace mrot
