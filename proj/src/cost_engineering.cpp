#include "mrot/cost_engineering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mrot/diagnostics.hpp"
#include "mrot/errors.hpp"
#include "mrot/simd/kernels.hpp"

namespace mrot {

void validate_weights(std::span<const double> w, const std::string& what) {
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i]) || w[i] <= 0.0) {
      throw DataError(what + "[" + std::to_string(i) + "] must be finite and > 0");
    }
    total += w[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << " must sum to 1 (got " << total << ")";
    throw DataError(msg.str());
  }
}

Dataset::Dataset(Matrix features)
    : Dataset(std::move(features), {}) {}

Dataset::Dataset(Matrix features, std::vector<double> weights)
    : features_(std::move(features)), weights_(std::move(weights)) {
  const std::size_t n = features_.rows();
  if (n < 2) throw DataError("a dataset needs at least 2 samples (got " + std::to_string(n) + ")");
  if (features_.cols() < 1) throw DataError("a dataset needs at least 1 feature");
  if (!features_.all_finite()) throw DataError("dataset contains non-finite feature values");
  if (weights_.empty()) weights_.assign(n, 1.0 / static_cast<double>(n));
  if (weights_.size() != n) {
    throw DataError("weights have length " + std::to_string(weights_.size()) + ", expected " +
                    std::to_string(n));
  }
  validate_weights(weights_, "weights");
}

std::string to_string(CostKind kind) {
  switch (kind) {
    case CostKind::Base:
      return "base";
    case CostKind::Engineered:
      return "engineered";
    case CostKind::Coulomb:
      return "coulomb";
  }
  return "unknown";
}

CostKind cost_kind_from_string(const std::string& s) {
  if (s == "base") return CostKind::Base;
  if (s == "engineered") return CostKind::Engineered;
  if (s == "coulomb") return CostKind::Coulomb;
  throw DataError("unknown cost kind '" + s + "'");
}

CostMatrix::CostMatrix(Matrix values, CostKind kind, std::vector<double> caps)
    : values_(std::move(values)), kind_(kind), caps_(std::move(caps)) {
  for (double v : values_.values()) {
    if (!std::isfinite(v) || v < 0.0) throw DataError("cost entries must be finite and >= 0");
  }
  if (kind_ == CostKind::Engineered && caps_.size() != values_.rows()) {
    throw DataError("engineered cost needs one cap per row");
  }
}

bool NeighborhoodGraph::contains(std::size_t i, std::size_t j) const {
  const auto& set = neighbor_sets.at(i);
  return std::find(set.begin(), set.end(), j) != set.end();
}

std::string to_string(const CapRule& rule) {
  switch (rule.kind) {
    case CapRule::Kind::RowMax:
      return "row-max";
    case CapRule::Kind::GlobalMax:
      return "global-max";
    case CapRule::Kind::Fixed: {
      std::ostringstream out;
      out.precision(17);
      out << "fixed:" << rule.value;
      return out.str();
    }
  }
  return "unknown";
}

CapRule cap_rule_from_string(const std::string& s) {
  if (s == "row-max" || s == "row_max") return CapRule::row_max();
  if (s == "global-max" || s == "global_max") return CapRule::global_max();
  if (s.rfind("fixed:", 0) == 0) {
    const std::string tail = s.substr(6);
    std::size_t used = 0;
    double L = 0.0;
    try {
      L = std::stod(tail, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != tail.size() || !std::isfinite(L) || L < 0.0) {
      throw DataError("invalid fixed cap '" + s + "': expected fixed:<nonnegative number>");
    }
    return CapRule::fixed(L);
  }
  throw DataError("unknown cap rule '" + s + "' (expected row-max, global-max or fixed:L)");
}

namespace {

void require_finite(const Matrix& x, const char* what) {
  if (!x.all_finite()) throw DataError(std::string(what) + " contains non-finite values");
}

// Calls fn(i, row_of_squared_distances) for every row of x against y.
template <typename Fn>
void for_each_distance_row(const Matrix& x, const Matrix& y, Fn&& fn) {
  const auto& k = simd::kernels();
  const Matrix y_t = y.transposed();  // feature-major for the kernel
  std::vector<double> buf(y.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    k.squared_distances(x.row(i).data(), y_t.data(), y.rows(), y.cols(), buf.data());
    fn(i, std::span<const double>(buf));
  }
}

}  // namespace

CostMatrix pairwise_cost(const Matrix& x, const std::optional<Matrix>& other) {
  require_finite(x, "features");
  const bool self = !other.has_value();
  const Matrix& y = self ? x : *other;
  if (!self) require_finite(y, "other features");
  if (x.cols() != y.cols()) {
    throw DataError("feature dimension mismatch: " + std::to_string(x.cols()) + " vs " +
                    std::to_string(y.cols()));
  }
  Matrix c(x.rows(), y.rows());
  for_each_distance_row(x, y, [&](std::size_t i, std::span<const double> d2) {
    std::copy(d2.begin(), d2.end(), c.row(i).begin());
  });
  if (self) {
    // Exact symmetry and a zero diagonal regardless of kernel rounding.
    for (std::size_t i = 0; i < c.rows(); ++i) {
      c(i, i) = 0.0;
      for (std::size_t j = i + 1; j < c.cols(); ++j) c(j, i) = c(i, j);
    }
  }
  return CostMatrix(std::move(c), CostKind::Base);
}

CostMatrix pairwise_cost(const Dataset& data) { return pairwise_cost(data.features()); }

NeighborhoodGraph knn_neighborhood(const CostMatrix& cost, std::size_t k) {
  const std::size_t n = cost.rows();
  if (cost.cols() != n) throw DataError("k-NN neighborhoods need a square self-cost matrix");
  if (cost.kind() != CostKind::Base) throw DataError("k-NN neighborhoods need a base cost matrix");
  if (k < 1 || k >= n) {
    throw DataError("k must satisfy 1 <= k < n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }
  NeighborhoodGraph g;
  g.k = k;
  g.mode = NeighborhoodMode::Knn;
  g.neighbor_sets.resize(n);
  std::vector<std::size_t> order;
  order.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    auto row = cost.values().row(i);
    auto before = [&](std::size_t a, std::size_t b) {
      return row[a] < row[b] || (row[a] == row[b] && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), before);
    auto& set = g.neighbor_sets[i];
    set.reserve(k + 1);
    set.push_back(i);
    set.insert(set.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return g;
}

NeighborhoodGraph rho_ball_neighborhood(const CostMatrix& cost, double rho) {
  const std::size_t n = cost.rows();
  if (cost.cols() != n) throw DataError("rho-ball neighborhoods need a square self-cost matrix");
  if (!(rho >= 0.0)) throw DataError("rho must be >= 0");
  const double r2 = rho * rho;
  NeighborhoodGraph g;
  g.mode = NeighborhoodMode::RhoBall;
  g.rho = rho;
  g.neighbor_sets.resize(n);
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = cost.values().row(i);
    others.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && row[j] <= r2) others.push_back(j);
    std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) { return row[a] < row[b]; });
    auto& set = g.neighbor_sets[i];
    set.push_back(i);
    set.insert(set.end(), others.begin(), others.end());
  }
  return g;
}

CostMatrix engineer_cost(const CostMatrix& cost, const NeighborhoodGraph& graph, const CapRule& rule) {
  const std::size_t n = cost.rows();
  if (cost.cols() != n) throw DataError("cost engineering needs a square self-cost matrix");
  if (graph.size() != n) {
    throw DataError("neighborhood graph has " + std::to_string(graph.size()) + " rows, cost has " +
                    std::to_string(n));
  }
  const auto& k = simd::kernels();
  std::vector<double> caps(n);
  switch (rule.kind) {
    case CapRule::Kind::RowMax:
      for (std::size_t i = 0; i < n; ++i) caps[i] = k.max(cost.values().row(i).data(), n);
      break;
    case CapRule::Kind::GlobalMax: {
      const double m = k.max(cost.values().data(), n * n);
      std::fill(caps.begin(), caps.end(), m);
      break;
    }
    case CapRule::Kind::Fixed:
      if (!std::isfinite(rule.value) || rule.value < 0.0) throw DataError("fixed cap must be finite and >= 0");
      std::fill(caps.begin(), caps.end(), rule.value);
      break;
  }

  Matrix out = cost.values();
  std::size_t violating_rows = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool violates = false;
    for (std::size_t j : graph.neighbor_sets[i]) {
      if (j >= n) throw DataError("neighbor index out of range");
      if (cost(i, j) > caps[i]) violates = true;
      out(i, j) = caps[i];
    }
    if (violates) ++violating_rows;
  }
  if (violating_rows > 0) {
    warn("fixed cap L=" + to_string(rule).substr(6) + " is below the largest in-neighborhood cost in " +
         std::to_string(violating_rows) + " row(s); exclusion zones are cheaper than their boundary");
  }
  return CostMatrix(std::move(out), CostKind::Engineered, std::move(caps));
}

CostMatrix coulomb_cost(const Matrix& x) {
  require_finite(x, "features");
  const std::size_t n = x.rows();
  Matrix c(n, n);
  for_each_distance_row(x, x, [&](std::size_t i, std::span<const double> d2) {
    auto out = c.row(i);
    for (std::size_t j = 0; j < n; ++j) out[j] = 1.0 / (1.0 + std::sqrt(d2[j]));
  });
  for (std::size_t i = 0; i < n; ++i) {
    c(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) c(j, i) = c(i, j);
  }
  return CostMatrix(std::move(c), CostKind::Coulomb);
}

CostMatrix coulomb_cost(const Dataset& data) { return coulomb_cost(data.features()); }

}  // namespace mrot
