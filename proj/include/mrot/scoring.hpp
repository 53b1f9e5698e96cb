#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mrot/cost_engineering.hpp"
#include "mrot/ot_solver.hpp"

namespace mrot {

struct EffortVector {
  std::vector<double> efforts;
  double source_epsilon = 0.0;
  std::size_t source_k = 0;
};

/// t_i = sum_j (gamma_ij / p_i) * C_ij, the expected cost of sample i's
/// destinations under the conditional plan.
EffortVector transport_effort(const TransportPlan& plan, const CostMatrix& engineered, std::span<const double> p);

/// Gaussian kernel density estimate over scalar efforts.
///
/// Bandwidth follows Scott's rule for one dimension, sigma = std(t) n^{-1/5},
/// with the population (1/n) standard deviation. When the efforts have no
/// spread the bandwidth is floored at 1e-9 (1 + |mean(t)|).
class KdeModel {
 public:
  KdeModel(std::vector<double> centers, double bandwidth);

  static KdeModel fit(std::span<const double> efforts);
  static double scott_bandwidth(std::span<const double> efforts);

  double density(double t) const;
  /// (1/n) sum_i Phi((t - t_i) / sigma); monotone, in [0, 1].
  double cdf(double t) const;

  std::span<const double> centers() const noexcept { return centers_; }
  double bandwidth() const noexcept { return bandwidth_; }

 private:
  std::vector<double> centers_;
  double bandwidth_;
};

/// s_i = cdf(fit_kde(t), t_i)
std::vector<double> score_training_samples(const TransportPlan& plan, const CostMatrix& engineered,
                                           std::span<const double> p);

/// Scores of already-computed efforts under their own KDE.
std::vector<double> scores_from_efforts(std::span<const double> efforts);

}  // namespace mrot
