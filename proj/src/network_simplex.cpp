// Primal network simplex for the uncapacitated transportation problem
//
//   min <gamma, C>  s.t.  gamma 1 = p,  gamma^T 1 = q,  gamma >= 0
//
// The spanning-tree bookkeeping (parent / thread / successor counts, strongly
// feasible trees, block-search pricing) follows the classical LEMON-style
// network simplex, specialised to a dense bipartite graph with no arc
// capacities. Node i < n is a supply node, node n + j a demand node, and an
// extra root node carries one artificial arc per node.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mrot/errors.hpp"
#include "mrot/ot_solver.hpp"

namespace mrot::detail {
namespace {

constexpr int kDirUp = 1;
constexpr int kDirDown = -1;
constexpr std::int8_t kStateTree = 0;
constexpr std::int8_t kStateLower = 1;

class TransportSimplex {
 public:
  TransportSimplex(const Matrix& cost, std::span<const double> p, std::span<const double> q)
      : n_(static_cast<int>(cost.rows())),
        m_(static_cast<int>(cost.cols())),
        node_num_(n_ + m_),
        arc_num_(n_ * m_),
        root_(node_num_) {
    const int all_arcs = arc_num_ + node_num_;
    source_.resize(all_arcs);
    target_.resize(all_arcs);
    cost_.resize(all_arcs);
    flow_.assign(all_arcs, 0.0);
    state_.assign(all_arcs, kStateLower);

    double max_cost = 0.0;
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < m_; ++j) {
        const int e = i * m_ + j;
        source_[e] = i;
        target_[e] = n_ + j;
        cost_[e] = cost(i, j);
        max_cost = std::max(max_cost, std::abs(cost_[e]));
      }
    }
    art_cost_ = (max_cost + 1.0) * node_num_;
    price_tol_ = 64.0 * std::numeric_limits<double>::epsilon() * art_cost_;

    supply_.resize(node_num_ + 1);
    for (int i = 0; i < n_; ++i) supply_[i] = p[i];
    for (int j = 0; j < m_; ++j) supply_[n_ + j] = -q[j];

    const int nodes = node_num_ + 1;
    pi_.assign(nodes, 0.0);
    parent_.assign(nodes, -1);
    pred_.assign(nodes, -1);
    thread_.assign(nodes, 0);
    rev_thread_.assign(nodes, 0);
    succ_num_.assign(nodes, 0);
    last_succ_.assign(nodes, 0);
    pred_dir_.assign(nodes, 0);

    block_size_ = std::max(static_cast<int>(std::sqrt(static_cast<double>(arc_num_))), 10);
    init_tree();
  }

  void run() {
    // Pivot budget is generous; exceeding it signals a numerical stall.
    const long long max_pivots = 200LL * (static_cast<long long>(arc_num_) + node_num_) + 100000;
    long long pivots = 0;
    bool recomputed = false;
    while (true) {
      if (!find_entering_arc()) {
        // Potentials are maintained incrementally; confirm optimality against
        // potentials rebuilt from the tree before stopping.
        if (recomputed) break;
        recompute_potentials();
        recomputed = true;
        continue;
      }
      recomputed = false;
      find_join_node();
      const bool change = find_leaving_arc();
      if (delta_ >= std::numeric_limits<double>::infinity()) {
        throw Error("network simplex: unbounded transportation problem (internal error)");
      }
      change_flow(change);
      if (change) {
        update_tree_structure();
        update_potential();
      }
      if (++pivots > max_pivots) throw Error("network simplex: pivot limit exceeded");
    }
  }

  Matrix coupling() const {
    Matrix out(static_cast<std::size_t>(n_), static_cast<std::size_t>(m_));
    for (int e = 0; e < arc_num_; ++e) out(source_[e], target_[e] - n_) = std::max(flow_[e], 0.0);
    return out;
  }

  double artificial_flow() const {
    double worst = 0.0;
    for (int e = arc_num_; e < arc_num_ + node_num_; ++e) worst = std::max(worst, std::abs(flow_[e]));
    return worst;
  }

 private:
  void init_tree() {
    parent_[root_] = -1;
    pred_[root_] = -1;
    thread_[root_] = 0;
    rev_thread_[0] = root_;
    succ_num_[root_] = node_num_ + 1;
    last_succ_[root_] = root_ - 1;
    pi_[root_] = 0.0;

    for (int u = 0, e = arc_num_; u != node_num_; ++u, ++e) {
      parent_[u] = root_;
      pred_[u] = e;
      thread_[u] = u + 1;
      rev_thread_[u + 1] = u;
      succ_num_[u] = 1;
      last_succ_[u] = u;
      state_[e] = kStateTree;
      if (supply_[u] >= 0) {
        pred_dir_[u] = kDirUp;
        pi_[u] = 0.0;
        source_[e] = u;
        target_[e] = root_;
        flow_[e] = supply_[u];
        cost_[e] = 0.0;
      } else {
        pred_dir_[u] = kDirDown;
        pi_[u] = art_cost_;
        source_[e] = root_;
        target_[e] = u;
        flow_[e] = -supply_[u];
        cost_[e] = art_cost_;
      }
    }
  }

  bool find_entering_arc() {
    double min = -price_tol_;
    int cnt = block_size_;
    int e;
    bool found = false;
    for (e = next_arc_; e != arc_num_; ++e) {
      const double c = state_[e] * (cost_[e] + pi_[source_[e]] - pi_[target_[e]]);
      if (c < min) {
        min = c;
        in_arc_ = e;
        found = true;
      }
      if (--cnt == 0) {
        if (found) goto search_end;
        cnt = block_size_;
      }
    }
    for (e = 0; e != next_arc_; ++e) {
      const double c = state_[e] * (cost_[e] + pi_[source_[e]] - pi_[target_[e]]);
      if (c < min) {
        min = c;
        in_arc_ = e;
        found = true;
      }
      if (--cnt == 0) {
        if (found) goto search_end;
        cnt = block_size_;
      }
    }
    if (!found) return false;
  search_end:
    next_arc_ = e;
    return true;
  }

  void find_join_node() {
    int u = source_[in_arc_];
    int v = target_[in_arc_];
    while (u != v) {
      if (succ_num_[u] < succ_num_[v]) {
        u = parent_[u];
      } else {
        v = parent_[v];
      }
    }
    join_ = u;
  }

  bool find_leaving_arc() {
    // Entering arcs are always at their lower bound (no capacities).
    const int first = source_[in_arc_];
    const int second = target_[in_arc_];
    delta_ = std::numeric_limits<double>::infinity();
    int result = 0;
    for (int u = first; u != join_; u = parent_[u]) {
      const int e = pred_[u];
      const double d = pred_dir_[u] == kDirDown ? std::numeric_limits<double>::infinity() : flow_[e];
      if (d < delta_) {
        delta_ = d;
        u_out_ = u;
        result = 1;
      }
    }
    for (int u = second; u != join_; u = parent_[u]) {
      const int e = pred_[u];
      const double d = pred_dir_[u] == kDirUp ? std::numeric_limits<double>::infinity() : flow_[e];
      if (d <= delta_) {
        delta_ = d;
        u_out_ = u;
        result = 2;
      }
    }
    if (result == 1) {
      u_in_ = first;
      v_in_ = second;
    } else {
      u_in_ = second;
      v_in_ = first;
    }
    return result != 0;
  }

  void change_flow(bool change) {
    if (delta_ > 0) {
      const double val = state_[in_arc_] * delta_;
      flow_[in_arc_] += val;
      for (int u = source_[in_arc_]; u != join_; u = parent_[u]) flow_[pred_[u]] -= pred_dir_[u] * val;
      for (int u = target_[in_arc_]; u != join_; u = parent_[u]) flow_[pred_[u]] += pred_dir_[u] * val;
    }
    if (change) {
      state_[in_arc_] = kStateTree;
      const int out = pred_[u_out_];
      state_[out] = kStateLower;
      flow_[out] = 0.0;
    } else {
      state_[in_arc_] = static_cast<std::int8_t>(-state_[in_arc_]);
    }
  }

  void update_tree_structure() {
    const int old_rev_thread = rev_thread_[u_out_];
    const int old_succ_num = succ_num_[u_out_];
    const int old_last_succ = last_succ_[u_out_];
    v_out_ = parent_[u_out_];

    if (u_in_ == u_out_) {
      parent_[u_in_] = v_in_;
      pred_[u_in_] = in_arc_;
      pred_dir_[u_in_] = u_in_ == source_[in_arc_] ? kDirUp : kDirDown;

      if (thread_[v_in_] != u_out_) {
        int after = thread_[old_last_succ];
        thread_[old_rev_thread] = after;
        rev_thread_[after] = old_rev_thread;
        after = thread_[v_in_];
        thread_[v_in_] = u_out_;
        rev_thread_[u_out_] = v_in_;
        thread_[old_last_succ] = after;
        rev_thread_[after] = old_last_succ;
      }
    } else {
      const int thread_continue = old_rev_thread == v_in_ ? thread_[old_last_succ] : thread_[v_in_];

      // Re-hang the stem u_in -> ... -> u_out under v_in.
      int stem = u_in_;
      int par_stem = v_in_;
      int next_stem;
      int last = last_succ_[u_in_];
      int before;
      int after = thread_[last];
      thread_[v_in_] = u_in_;
      dirty_revs_.clear();
      dirty_revs_.push_back(v_in_);
      while (stem != u_out_) {
        next_stem = parent_[stem];
        thread_[last] = next_stem;
        dirty_revs_.push_back(last);

        before = rev_thread_[stem];
        thread_[before] = after;
        rev_thread_[after] = before;

        parent_[stem] = par_stem;
        par_stem = stem;
        stem = next_stem;

        last = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem] : last_succ_[stem];
        after = thread_[last];
      }
      parent_[u_out_] = par_stem;
      thread_[last] = thread_continue;
      rev_thread_[thread_continue] = last;
      last_succ_[u_out_] = last;

      if (old_rev_thread != v_in_) {
        thread_[old_rev_thread] = after;
        rev_thread_[after] = old_rev_thread;
      }

      for (int u : dirty_revs_) rev_thread_[thread_[u]] = u;

      int tmp_sc = 0;
      const int tmp_ls = last_succ_[u_out_];
      for (int u = u_out_, p = parent_[u]; u != u_in_; u = p, p = parent_[u]) {
        pred_[u] = pred_[p];
        pred_dir_[u] = -pred_dir_[p];
        tmp_sc += succ_num_[u] - succ_num_[p];
        succ_num_[u] = tmp_sc;
        last_succ_[p] = tmp_ls;
      }
      pred_[u_in_] = in_arc_;
      pred_dir_[u_in_] = u_in_ == source_[in_arc_] ? kDirUp : kDirDown;
      succ_num_[u_in_] = old_succ_num;
    }

    const int up_limit_out = last_succ_[join_] == v_in_ ? join_ : -1;
    const int last_succ_out = last_succ_[u_out_];
    for (int u = v_in_; u != -1 && last_succ_[u] == v_in_; u = parent_[u]) last_succ_[u] = last_succ_out;

    if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
      for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
        last_succ_[u] = old_rev_thread;
      }
    } else if (last_succ_out != old_last_succ) {
      for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
        last_succ_[u] = last_succ_out;
      }
    }

    for (int u = v_in_; u != join_; u = parent_[u]) succ_num_[u] += old_succ_num;
    for (int u = v_out_; u != join_; u = parent_[u]) succ_num_[u] -= old_succ_num;
  }

  void update_potential() {
    const double sigma = pi_[v_in_] - pi_[u_in_] - pred_dir_[u_in_] * cost_[in_arc_];
    const int end = thread_[last_succ_[u_in_]];
    for (int u = u_in_; u != end; u = thread_[u]) pi_[u] += sigma;
  }

  void recompute_potentials() {
    pi_[root_] = 0.0;
    for (int u = thread_[root_]; u != root_; u = thread_[u]) {
      pi_[u] = pi_[parent_[u]] - pred_dir_[u] * cost_[pred_[u]];
    }
  }

  int n_, m_, node_num_, arc_num_, root_;
  double art_cost_ = 0.0;
  double price_tol_ = 0.0;
  int block_size_ = 10;
  int next_arc_ = 0;

  std::vector<int> source_, target_;
  std::vector<double> cost_, flow_;
  std::vector<std::int8_t> state_;
  std::vector<double> supply_, pi_;
  std::vector<int> parent_, pred_, thread_, rev_thread_, succ_num_, last_succ_, pred_dir_;
  std::vector<int> dirty_revs_;

  int in_arc_ = 0, join_ = 0, u_in_ = 0, v_in_ = 0, u_out_ = 0, v_out_ = 0;
  double delta_ = 0.0;
};

}  // namespace

Matrix network_simplex_transport(const Matrix& cost, std::span<const double> p, std::span<const double> q) {
  if (p.size() != cost.rows() || q.size() != cost.cols()) {
    throw DataError("weight vectors do not match the cost matrix shape");
  }
  if (cost.rows() * cost.cols() > static_cast<std::size_t>(std::numeric_limits<int>::max() / 2)) {
    throw DataError("transportation problem too large for the exact solver");
  }
  TransportSimplex simplex(cost, p, q);
  simplex.run();
  if (simplex.artificial_flow() > 1e-9) {
    throw Error("network simplex finished with flow on artificial arcs (" +
                std::to_string(simplex.artificial_flow()) + "); marginals are inconsistent");
  }
  return simplex.coupling();
}

}  // namespace mrot::detail
