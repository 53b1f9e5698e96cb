#include "mrot/eval_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mrot/diagnostics.hpp"
#include "mrot/errors.hpp"
#include "mrot/rng.hpp"

namespace mrot {

namespace {

void check_labels(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw DataError("scores must be finite");
    pos += static_cast<std::size_t>(labels[i]);
  }
  if (pos == 0 || pos == labels.size()) throw DataError("metrics need both classes present");
}

LabeledDataset select(const LabeledDataset& data, const std::vector<std::size_t>& rows) {
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (std::size_t r : rows) labels.push_back(data.labels[r]);
  return LabeledDataset(Dataset(data.dataset.features().select_rows(rows)), std::move(labels));
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

LabeledDataset::LabeledDataset(Dataset data, std::vector<int> l) : dataset(std::move(data)), labels(std::move(l)) {
  if (labels.size() != dataset.size()) throw DataError("label count does not match sample count");
  for (int v : labels)
    if (v != 0 && v != 1) throw DataError("labels must be 0 or 1");
}

std::size_t LabeledDataset::anomaly_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

LabeledDataset synth_toy(std::size_t n_normal, std::size_t n_anom, std::uint64_t seed) {
  if (n_normal < 1 || n_anom < 1) throw DataError("synth_toy needs at least one sample per class");
  Rng rng(seed);
  const std::size_t n = n_normal + n_anom;
  Matrix x(n, 2, 0.0);
  std::vector<int> labels(n, 0);
  for (std::size_t i = 0; i < n_normal; ++i) {
    x(i, 0) = rng.normal(0.0, 0.5);
    x(i, 1) = rng.normal(0.0, 0.5);
  }
  for (std::size_t i = n_normal; i < n; ++i) {
    x(i, 0) = rng.normal(-3.0, 0.1);
    x(i, 1) = rng.normal(-3.0, 0.1);
    labels[i] = 1;
  }
  return LabeledDataset(Dataset(std::move(x)), std::move(labels));
}

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  check_labels(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mid-ranks over tie groups.
  double rank_sum = 0.0;
  double pos = 0.0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi < n && scores[order[hi]] == scores[order[lo]]) ++hi;
    const double mid = 0.5 * static_cast<double>(lo + 1 + hi);
    for (std::size_t r = lo; r < hi; ++r) {
      if (labels[order[r]] == 1) {
        rank_sum += mid;
        pos += 1.0;
      }
    }
    lo = hi;
  }
  const double neg = static_cast<double>(n) - pos;
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double auc_pr(std::span<const double> scores, std::span<const int> labels) {
  check_labels(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double total_pos = 0.0;
  for (int l : labels) total_pos += l;
  double tp = 0.0, seen = 0.0, prev_recall = 0.0, ap = 0.0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi < n && scores[order[hi]] == scores[order[lo]]) {
      tp += labels[order[hi]];
      seen += 1.0;
      ++hi;
    }
    const double recall = tp / total_pos;
    ap += (recall - prev_recall) * (tp / seen);
    prev_recall = recall;
    lo = hi;
  }
  return ap;
}

LabeledDataset downsample_anomalies(const LabeledDataset& data, AnomalyRequest request, std::uint64_t seed) {
  std::vector<std::size_t> anomalies, keep;
  for (std::size_t i = 0; i < data.labels.size(); ++i) (data.labels[i] == 1 ? anomalies : keep).push_back(i);
  const std::size_t available = anomalies.size();
  std::size_t want = 0;
  if (const auto* count = std::get_if<std::size_t>(&request)) {
    want = *count;
  } else {
    const double f = std::get<double>(request);
    if (!(f > 0.0 && f <= 1.0)) throw DataError("anomaly fraction must be in (0, 1]");
    want = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * static_cast<double>(available))));
  }
  if (want == 0) throw DataError("downsampling to zero anomalies leaves a single class");
  if (want > available) {
    throw DataError("requested " + std::to_string(want) + " anomalies but only " + std::to_string(available) +
                    " are available");
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(anomalies));
  keep.insert(keep.end(), anomalies.begin(), anomalies.begin() + static_cast<std::ptrdiff_t>(want));
  std::sort(keep.begin(), keep.end());
  return select(data, keep);
}

LabeledDataset subsample_rows(const LabeledDataset& data, std::size_t max_rows, std::uint64_t seed) {
  const std::size_t n = data.labels.size();
  if (n <= max_rows) return data;
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(rows));
  rows.resize(max_rows);
  std::sort(rows.begin(), rows.end());
  return select(data, rows);
}

void AblationGrid::validate() const {
  if (epsilons.empty() || ks.empty() || regressors.empty()) throw DataError("ablation grid lists must be nonempty");
  for (double e : epsilons)
    if (!(e >= 0.0) || !std::isfinite(e)) throw DataError("ablation epsilons must be finite and >= 0");
  for (std::size_t k : ks)
    if (k < 1) throw DataError("ablation k values must be >= 1");
}

std::vector<AblationRow> ablation_run(const LabeledDataset& data, const AblationGrid& grid,
                                      const AblationOptions& options) {
  grid.validate();
  const LabeledDataset work = subsample_rows(data, options.max_rows, options.seed);
  if (work.labels.size() < data.labels.size()) {
    warn("ablation: subsampled " + std::to_string(data.labels.size()) + " rows to " +
         std::to_string(work.labels.size()));
  }
  std::vector<AblationRow> rows;
  for (double eps : grid.epsilons) {
    for (std::size_t k : grid.ks) {
      for (const auto& reg : grid.regressors) {
        AblationRow row;
        row.epsilon = eps;
        row.k = k;
        row.regressor = reg.kind;
        MrotConfig cfg = options.base;
        cfg.solver.epsilon = eps;
        cfg.k = k;
        cfg.regressor = reg;
        cfg.seed = options.seed;
        const auto start = std::chrono::steady_clock::now();
        try {
          const auto model = MrotModel::fit(work.dataset, cfg);
          row.train_auc_roc = auc_roc(model.training_scores(), work.labels);
          const auto pred = model.predict(work.dataset.features());
          row.auc_roc = auc_roc(pred, work.labels);
          row.auc_pr = auc_pr(pred, work.labels);
          row.converged = model.diagnostics().converged;
        } catch (const std::exception& e) {
          row.error = e.what();
          warn("ablation cell eps=" + format_double(eps) + " k=" + std::to_string(k) + " failed: " + e.what());
        }
        row.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows, bool include_runtime) {
  out << "epsilon,k,regressor,auc_roc,auc_pr,train_auc_roc,converged,error";
  if (include_runtime) out << ",runtime_seconds";
  out << '\n';
  const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& r : rows) {
    out << format_double(r.epsilon) << ',' << r.k << ',' << to_string(r.regressor) << ',' << opt(r.auc_roc) << ','
        << opt(r.auc_pr) << ',' << opt(r.train_auc_roc) << ',' << (r.converged ? 1 : 0) << ',' << csv_quote(r.error);
    if (include_runtime) out << ',' << format_double(r.runtime_seconds);
    out << '\n';
  }
}

nlohmann::json ablation_to_json(std::span<const AblationRow> rows, bool include_runtime) {
  nlohmann::json arr = nlohmann::json::array();
  const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  for (const auto& r : rows) {
    nlohmann::json j = {{"epsilon", r.epsilon},
                        {"k", r.k},
                        {"regressor", to_string(r.regressor)},
                        {"auc_roc", opt(r.auc_roc)},
                        {"auc_pr", opt(r.auc_pr)},
                        {"train_auc_roc", opt(r.train_auc_roc)},
                        {"converged", r.converged},
                        {"error", r.error.empty() ? nlohmann::json(nullptr) : nlohmann::json(r.error)}};
    if (include_runtime) j["runtime_seconds"] = r.runtime_seconds;
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace mrot
