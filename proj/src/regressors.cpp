#include "mrot/regressors.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "mrot/errors.hpp"
#include "mrot/simd/kernels.hpp"

namespace mrot {

std::string to_string(RegressorKind kind) {
  switch (kind) {
    case RegressorKind::Knn:
      return "knn";
    case RegressorKind::KernelRidge:
      return "kernel-ridge";
    case RegressorKind::GradientBoostedTrees:
      return "gbt";
  }
  return "unknown";
}

RegressorKind regressor_kind_from_string(const std::string& s) {
  if (s == "knn" || s == "knn_regressor") return RegressorKind::Knn;
  if (s == "kernel-ridge" || s == "kernel_ridge") return RegressorKind::KernelRidge;
  if (s == "gbt" || s == "gradient_boosted_trees") return RegressorKind::GradientBoostedTrees;
  throw DataError("unknown regressor '" + s + "' (expected kernel-ridge, knn or gbt)");
}

RegressorSpec RegressorSpec::knn(std::size_t k) {
  RegressorSpec s;
  s.kind = RegressorKind::Knn;
  s.knn_k = k;
  return s;
}

RegressorSpec RegressorSpec::kernel_ridge() { return RegressorSpec{}; }

RegressorSpec RegressorSpec::gbt() {
  RegressorSpec s;
  s.kind = RegressorKind::GradientBoostedTrees;
  return s;
}

namespace {

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

std::vector<std::size_t> strided_indices(std::size_t n, std::size_t max_points) {
  std::vector<std::size_t> idx;
  if (n <= max_points) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  }
  idx.reserve(max_points);
  for (std::size_t r = 0; r < max_points; ++r) idx.push_back(r * n / max_points);
  return idx;
}

// ---- k-NN -----------------------------------------------------------------

std::vector<double> knn_predict(const KnnModel& m, const Matrix& x) {
  const auto& kern = simd::kernels();
  const std::size_t n = m.points.rows();
  const std::size_t k = std::min(m.k, n);
  const Matrix pts_t = m.points.transposed();
  std::vector<double> d2(n), out(x.rows());
  std::vector<std::size_t> order(n);
  for (std::size_t q = 0; q < x.rows(); ++q) {
    kern.squared_distances(x.row(q).data(), pts_t.data(), n, m.points.cols(), d2.data());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); });
    double acc = 0.0;
    for (std::size_t r = 0; r < k; ++r) acc += m.targets[order[r]];
    out[q] = acc / static_cast<double>(k);
  }
  return out;
}

// ---- kernel ridge -----------------------------------------------------------

KernelRidgeModel fit_kernel_ridge(const Matrix& x, std::span<const double> y, const RegressorSpec& spec) {
  if (!(spec.lambda_reg > 0.0)) throw DataError("kernel ridge lambda must be > 0");
  const auto idx = strided_indices(x.rows(), spec.max_kernel_samples);
  KernelRidgeModel m;
  m.support = x.select_rows(idx);
  const std::size_t n = m.support.rows();
  m.gamma = spec.gamma_rbf ? *spec.gamma_rbf : median_heuristic_gamma(m.support);
  if (!(m.gamma > 0.0) || !std::isfinite(m.gamma)) throw DataError("kernel ridge gamma must be finite and > 0");

  double mean = 0.0;
  for (std::size_t r : idx) mean += y[r];
  mean /= static_cast<double>(n);
  m.intercept = mean;

  const auto& kern = simd::kernels();
  const Matrix sup_t = m.support.transposed();
  Eigen::MatrixXd gram(n, n);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    kern.squared_distances(m.support.row(i).data(), sup_t.data(), n, m.support.cols(), row.data());
    kern.exp_scaled(row.data(), -m.gamma, n, row.data());
    for (std::size_t j = 0; j < n; ++j) gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
  }
  // Symmetrize exactly so the Cholesky factor sees a symmetric matrix.
  gram = 0.5 * (gram + gram.transpose()).eval();
  gram.diagonal().array() += spec.lambda_reg;

  Eigen::VectorXd rhs(n);
  for (std::size_t r = 0; r < n; ++r) rhs(static_cast<Eigen::Index>(r)) = y[idx[r]] - mean;

  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  Eigen::VectorXd alpha;
  if (llt.info() == Eigen::Success) {
    alpha = llt.solve(rhs);
  } else {
    alpha = gram.ldlt().solve(rhs);
  }
  m.alpha.assign(alpha.data(), alpha.data() + alpha.size());
  for (double a : m.alpha)
    if (!std::isfinite(a)) throw Error("kernel ridge solve produced non-finite coefficients");
  return m;
}

std::vector<double> kernel_ridge_predict(const KernelRidgeModel& m, const Matrix& x) {
  const auto& kern = simd::kernels();
  const std::size_t n = m.support.rows();
  const Matrix sup_t = m.support.transposed();
  std::vector<double> row(n), out(x.rows());
  for (std::size_t q = 0; q < x.rows(); ++q) {
    kern.squared_distances(x.row(q).data(), sup_t.data(), n, m.support.cols(), row.data());
    kern.exp_scaled(row.data(), -m.gamma, n, row.data());
    out[q] = m.intercept + kern.dot(row.data(), m.alpha.data(), n);
  }
  return out;
}

// ---- gradient-boosted trees -------------------------------------------------

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const double> residual, const RegressorSpec& spec)
      : x_(x), r_(residual), spec_(spec) {}

  std::vector<TreeNode> build() {
    std::vector<std::size_t> idx(x_.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    nodes_.clear();
    grow(idx, 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t>& idx, std::size_t depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    double total = 0.0;
    for (std::size_t i : idx) total += r_[i];
    const double count = static_cast<double>(idx.size());
    nodes_[id].value = total / count;

    const std::size_t leaf = std::max<std::size_t>(spec_.min_samples_leaf, 1);
    if (depth >= spec_.depth || idx.size() < 2 * leaf) return id;

    const double parent_score = total * total / count;
    double best_score = parent_score;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> sorted = idx;
    for (std::size_t f = 0; f < x_.cols(); ++f) {
      std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) { return x_(a, f) < x_(b, f); });
      double left = 0.0;
      for (std::size_t s = 1; s < sorted.size(); ++s) {
        left += r_[sorted[s - 1]];
        if (s < leaf || sorted.size() - s < leaf) continue;
        const double a = x_(sorted[s - 1], f);
        const double b = x_(sorted[s], f);
        if (!(a < b)) continue;
        const double nl = static_cast<double>(s);
        const double nr = count - nl;
        const double right = total - left;
        const double score = left * left / nl + right * right / nr;
        if (score > best_score) {
          best_score = score;
          best_feature = static_cast<int>(f);
          double t = a + 0.5 * (b - a);
          if (!(t < b)) t = a;
          best_threshold = t;
        }
      }
    }
    // Require a reduction of the squared error beyond rounding noise.
    if (best_feature < 0 || best_score - parent_score <= 1e-12 * (std::abs(parent_score) + 1e-300)) return id;

    std::vector<std::size_t> lhs, rhs;
    for (std::size_t i : idx) (x_(i, static_cast<std::size_t>(best_feature)) <= best_threshold ? lhs : rhs).push_back(i);
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    const int l = grow(lhs, depth + 1);
    const int r = grow(rhs, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  const Matrix& x_;
  std::span<const double> r_;
  const RegressorSpec& spec_;
  std::vector<TreeNode> nodes_;
};

double tree_value(const std::vector<TreeNode>& tree, std::span<const double> x) {
  int node = 0;
  while (tree[node].feature >= 0) {
    node = x[static_cast<std::size_t>(tree[node].feature)] <= tree[node].threshold ? tree[node].left : tree[node].right;
  }
  return tree[node].value;
}

GbtModel fit_gbt(const Matrix& x, std::span<const double> y, const RegressorSpec& spec) {
  if (spec.n_trees < 1) throw DataError("gbt needs at least one tree");
  if (!(spec.learning_rate > 0.0)) throw DataError("gbt learning rate must be > 0");
  GbtModel m;
  m.learning_rate = spec.learning_rate;
  const std::size_t n = x.rows();
  m.base = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  std::vector<double> pred(n, m.base), residual(n);
  for (std::size_t t = 0; t < spec.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - pred[i];
    TreeBuilder builder(x, residual, spec);
    m.trees.push_back(builder.build());
    const auto& tree = m.trees.back();
    for (std::size_t i = 0; i < n; ++i) pred[i] += m.learning_rate * tree_value(tree, x.row(i));
  }
  return m;
}

std::vector<double> gbt_predict(const GbtModel& m, const Matrix& x) {
  std::vector<double> out(x.rows(), m.base);
  for (std::size_t q = 0; q < x.rows(); ++q)
    for (const auto& tree : m.trees) out[q] += m.learning_rate * tree_value(tree, x.row(q));
  return out;
}

// ---- JSON helpers -----------------------------------------------------------

nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", std::vector<double>(m.values().begin(), m.values().end())}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(), j.at("values").get<std::vector<double>>());
}

}  // namespace

double median_heuristic_gamma(const Matrix& x, std::size_t max_points) {
  const auto idx = strided_indices(x.rows(), std::max<std::size_t>(max_points, 2));
  const Matrix pts = x.select_rows(idx);
  const std::size_t n = pts.rows();
  std::vector<double> d2;
  d2.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < pts.cols(); ++c) {
        const double diff = pts(i, c) - pts(j, c);
        acc += diff * diff;
      }
      d2.push_back(acc);
    }
  }
  if (d2.empty()) return 1.0;
  auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  double median = *mid;
  if (d2.size() % 2 == 0) {
    const double lower = *std::max_element(d2.begin(), mid);
    median = 0.5 * (median + lower);
  }
  // All points coincide: any bandwidth interpolates a constant.
  if (!(median > 0.0)) return 1.0;
  return 1.0 / (2.0 * median);
}

Regressor::Regressor(RegressorSpec spec, Standardizer standardizer, Model model)
    : spec_(std::move(spec)), standardizer_(std::move(standardizer)), model_(std::move(model)) {}

Regressor Regressor::fit(const Matrix& x, std::span<const double> y, const RegressorSpec& spec) {
  if (x.rows() == 0 || x.cols() == 0) throw DataError("regression needs a non-empty design matrix");
  if (y.size() != x.rows()) throw DataError("regression targets do not match the number of rows");
  if (!x.all_finite()) throw DataError("regression features contain non-finite values");
  for (double v : y)
    if (!std::isfinite(v)) throw DataError("regression targets contain non-finite values");

  Standardizer st = spec.standardize ? Standardizer::fit(x) : Standardizer::identity(x.cols());
  const Matrix xs = st.apply(x);
  switch (spec.kind) {
    case RegressorKind::Knn: {
      if (spec.knn_k < 1) throw DataError("knn regressor needs k >= 1");
      KnnModel m{spec.knn_k, xs, std::vector<double>(y.begin(), y.end())};
      return Regressor(spec, std::move(st), std::move(m));
    }
    case RegressorKind::KernelRidge:
      return Regressor(spec, std::move(st), fit_kernel_ridge(xs, y, spec));
    case RegressorKind::GradientBoostedTrees:
      return Regressor(spec, std::move(st), fit_gbt(xs, y, spec));
  }
  throw Error("unhandled regressor kind");
}

std::vector<double> Regressor::predict_raw(const Matrix& x) const {
  const Matrix xs = standardizer_.apply(x);
  return std::visit(
      [&](const auto& m) -> std::vector<double> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KnnModel>) {
          return knn_predict(m, xs);
        } else if constexpr (std::is_same_v<T, KernelRidgeModel>) {
          return kernel_ridge_predict(m, xs);
        } else {
          return gbt_predict(m, xs);
        }
      },
      model_);
}

std::vector<double> Regressor::predict(const Matrix& x) const {
  auto out = predict_raw(x);
  for (double& v : out) v = clamp01(v);
  return out;
}

nlohmann::json Regressor::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(spec_.kind);
  j["spec"] = {{"knn_k", spec_.knn_k},
               {"lambda_reg", spec_.lambda_reg},
               {"max_kernel_samples", spec_.max_kernel_samples},
               {"n_trees", spec_.n_trees},
               {"depth", spec_.depth},
               {"learning_rate", spec_.learning_rate},
               {"min_samples_leaf", spec_.min_samples_leaf},
               {"standardize", spec_.standardize}};
  if (spec_.gamma_rbf) j["spec"]["gamma_rbf"] = *spec_.gamma_rbf;
  j["standardizer"] = {{"mean", standardizer_.mean}, {"scale", standardizer_.scale}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KnnModel>) {
          j["params"] = {{"k", m.k}, {"points", matrix_to_json(m.points)}, {"targets", m.targets}};
        } else if constexpr (std::is_same_v<T, KernelRidgeModel>) {
          j["params"] = {{"gamma", m.gamma}, {"intercept", m.intercept}, {"support", matrix_to_json(m.support)}, {"alpha", m.alpha}};
        } else {
          nlohmann::json trees = nlohmann::json::array();
          for (const auto& tree : m.trees) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& node : tree) {
              nodes.push_back({node.feature, node.threshold, node.left, node.right, node.value});
            }
            trees.push_back(std::move(nodes));
          }
          j["params"] = {{"base", m.base}, {"learning_rate", m.learning_rate}, {"trees", std::move(trees)}};
        }
      },
      model_);
  return j;
}

Regressor Regressor::from_json(const nlohmann::json& j) {
  RegressorSpec spec;
  spec.kind = regressor_kind_from_string(j.at("kind").get<std::string>());
  const auto& s = j.at("spec");
  spec.knn_k = s.at("knn_k").get<std::size_t>();
  spec.lambda_reg = s.at("lambda_reg").get<double>();
  spec.max_kernel_samples = s.at("max_kernel_samples").get<std::size_t>();
  spec.n_trees = s.at("n_trees").get<std::size_t>();
  spec.depth = s.at("depth").get<std::size_t>();
  spec.learning_rate = s.at("learning_rate").get<double>();
  spec.min_samples_leaf = s.at("min_samples_leaf").get<std::size_t>();
  spec.standardize = s.at("standardize").get<bool>();
  if (s.contains("gamma_rbf")) spec.gamma_rbf = s.at("gamma_rbf").get<double>();

  Standardizer st{j.at("standardizer").at("mean").get<std::vector<double>>(),
                  j.at("standardizer").at("scale").get<std::vector<double>>()};
  if (st.mean.size() != st.scale.size() || st.mean.empty()) throw DataError("regressor standardizer is malformed");
  const auto& p = j.at("params");
  switch (spec.kind) {
    case RegressorKind::Knn: {
      KnnModel m{p.at("k").get<std::size_t>(), matrix_from_json(p.at("points")), p.at("targets").get<std::vector<double>>()};
      if (m.points.cols() != st.dim() || m.targets.size() != m.points.rows() || m.points.rows() == 0) {
        throw DataError("knn regressor parameters are inconsistent");
      }
      return Regressor(spec, std::move(st), std::move(m));
    }
    case RegressorKind::KernelRidge: {
      KernelRidgeModel m;
      m.gamma = p.at("gamma").get<double>();
      m.intercept = p.at("intercept").get<double>();
      m.support = matrix_from_json(p.at("support"));
      m.alpha = p.at("alpha").get<std::vector<double>>();
      if (m.support.cols() != st.dim() || m.alpha.size() != m.support.rows()) {
        throw DataError("kernel ridge parameters are inconsistent");
      }
      return Regressor(spec, std::move(st), std::move(m));
    }
    case RegressorKind::GradientBoostedTrees: {
      GbtModel m;
      m.base = p.at("base").get<double>();
      m.learning_rate = p.at("learning_rate").get<double>();
      for (const auto& tree_json : p.at("trees")) {
        std::vector<TreeNode> tree;
        for (const auto& nj : tree_json) {
          TreeNode node{nj.at(0).get<int>(), nj.at(1).get<double>(), nj.at(2).get<int>(), nj.at(3).get<int>(), nj.at(4).get<double>()};
          tree.push_back(node);
        }
        const int size = static_cast<int>(tree.size());
        if (size == 0) throw DataError("gbt tree has no nodes");
        for (const auto& node : tree) {
          if (node.feature >= 0 && (node.feature >= static_cast<int>(st.dim()) || node.left <= 0 || node.right <= 0 ||
                                    node.left >= size || node.right >= size)) {
            throw DataError("gbt tree node is malformed");
          }
        }
        m.trees.push_back(std::move(tree));
      }
      return Regressor(spec, std::move(st), std::move(m));
    }
  }
  throw DataError("unhandled regressor kind");
}

}  // namespace mrot
