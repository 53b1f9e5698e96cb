#include "mrot/scoring.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mrot/errors.hpp"
#include "mrot/simd/kernels.hpp"

namespace mrot {

EffortVector transport_effort(const TransportPlan& plan, const CostMatrix& engineered, std::span<const double> p) {
  const Matrix& g = plan.coupling;
  if (g.rows() != engineered.rows() || g.cols() != engineered.cols()) {
    throw DataError("plan and cost shapes differ");
  }
  if (p.size() != g.rows()) throw DataError("weight vector length does not match the plan");
  const auto& kern = simd::kernels();
  EffortVector out;
  out.source_epsilon = plan.epsilon;
  out.efforts.resize(g.rows());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    if (!(p[i] > 0.0)) throw DataError("p[" + std::to_string(i) + "] must be > 0");
    const double t = kern.dot(g.row(i).data(), engineered.values().row(i).data(), g.cols()) / p[i];
    out.efforts[i] = std::max(t, 0.0);
  }
  return out;
}

KdeModel::KdeModel(std::vector<double> centers, double bandwidth)
    : centers_(std::move(centers)), bandwidth_(bandwidth) {
  if (centers_.empty()) throw DataError("KDE needs at least one center");
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) throw DataError("KDE bandwidth must be finite and > 0");
  for (double c : centers_)
    if (!std::isfinite(c)) throw DataError("KDE centers must be finite");
}

double KdeModel::scott_bandwidth(std::span<const double> t) {
  const double n = static_cast<double>(t.size());
  double mean = 0.0;
  for (double x : t) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : t) var += (x - mean) * (x - mean);
  var /= n;
  const double sigma = std::sqrt(var) * std::pow(n, -0.2);
  const double floor = 1e-9 * (1.0 + std::abs(mean));
  return sigma > floor ? sigma : floor;
}

KdeModel KdeModel::fit(std::span<const double> efforts) {
  if (efforts.size() < 2) throw DataError("KDE needs at least 2 efforts");
  return KdeModel(std::vector<double>(efforts.begin(), efforts.end()), scott_bandwidth(efforts));
}

double KdeModel::density(double t) const {
  const double inv = 1.0 / bandwidth_;
  double acc = 0.0;
  for (double c : centers_) {
    const double z = (t - c) * inv;
    acc += std::exp(-0.5 * z * z);
  }
  return acc * inv * std::numbers::inv_sqrtpi / std::numbers::sqrt2 / static_cast<double>(centers_.size());
}

double KdeModel::cdf(double t) const {
  const double scale = 1.0 / (bandwidth_ * std::numbers::sqrt2);
  double acc = 0.0;
  for (double c : centers_) acc += 0.5 * std::erfc(-(t - c) * scale);
  const double v = acc / static_cast<double>(centers_.size());
  return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

std::vector<double> scores_from_efforts(std::span<const double> efforts) {
  const KdeModel kde = KdeModel::fit(efforts);
  std::vector<double> s(efforts.size());
  for (std::size_t i = 0; i < efforts.size(); ++i) s[i] = kde.cdf(efforts[i]);
  return s;
}

std::vector<double> score_training_samples(const TransportPlan& plan, const CostMatrix& engineered,
                                           std::span<const double> p) {
  return scores_from_efforts(transport_effort(plan, engineered, p).efforts);
}

}  // namespace mrot
