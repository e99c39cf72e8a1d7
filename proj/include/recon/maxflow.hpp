// Dinic max-flow on double capacities; the min-cut engine behind the
// alpha-expansion moves. After solve(), source_side() reports the residual
// reachability that defines the cut.

#pragma once

#include <limits>
#include <queue>
#include <vector>

namespace recon {

class MaxFlowGraph {
 public:
  explicit MaxFlowGraph(int node_count)
      : head_(node_count + 2, -1), source_(node_count), sink_(node_count + 1) {
    head_.shrink_to_fit();
  }

  int source() const { return source_; }
  int sink() const { return sink_; }

  // Directed edge with capacity cap (and an optional reverse capacity).
  void add_edge(int u, int v, double cap, double rev_cap = 0.0) {
    if (cap <= 0 && rev_cap <= 0) return;
    edges_.push_back({v, head_[u], std::max(cap, 0.0)});
    head_[u] = int(edges_.size()) - 1;
    edges_.push_back({u, head_[v], std::max(rev_cap, 0.0)});
    head_[v] = int(edges_.size()) - 1;
  }

  void add_source_edge(int v, double cap) { add_edge(source_, v, cap); }
  void add_sink_edge(int u, double cap) { add_edge(u, sink_, cap); }

  double solve() {
    double flow = 0;
    while (bfs_levels()) {
      iter_ = head_;
      double pushed;
      while ((pushed = dfs(source_, std::numeric_limits<double>::infinity())) > kEps) {
        flow += pushed;
      }
    }
    mark_source_side();
    return flow;
  }

  bool source_side(int node) const { return side_[node]; }

 private:
  static constexpr double kEps = 1e-12;

  struct Edge {
    int to;
    int next;
    double cap;
  };

  bool bfs_levels() {
    level_.assign(head_.size(), -1);
    std::queue<int> q;
    q.push(source_);
    level_[source_] = 0;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int e = head_[u]; e != -1; e = edges_[e].next) {
        if (edges_[e].cap > kEps && level_[edges_[e].to] < 0) {
          level_[edges_[e].to] = level_[u] + 1;
          q.push(edges_[e].to);
        }
      }
    }
    return level_[sink_] >= 0;
  }

  double dfs(int u, double limit) {
    if (u == sink_) return limit;
    for (int& e = iter_[u]; e != -1; e = edges_[e].next) {
      Edge& edge = edges_[e];
      if (edge.cap > kEps && level_[edge.to] == level_[u] + 1) {
        const double pushed = dfs(edge.to, std::min(limit, edge.cap));
        if (pushed > kEps) {
          edge.cap -= pushed;
          edges_[e ^ 1].cap += pushed;
          return pushed;
        }
      }
    }
    level_[u] = -1;  // dead end
    return 0;
  }

  void mark_source_side() {
    side_.assign(head_.size(), false);
    std::queue<int> q;
    q.push(source_);
    side_[source_] = true;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int e = head_[u]; e != -1; e = edges_[e].next) {
        if (edges_[e].cap > kEps && !side_[edges_[e].to]) {
          side_[edges_[e].to] = true;
          q.push(edges_[e].to);
        }
      }
    }
  }

  std::vector<Edge> edges_;
  std::vector<int> head_;
  std::vector<int> level_;
  std::vector<int> iter_;
  std::vector<bool> side_;
  int source_, sink_;
};

}  // namespace recon
