#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace gomea {

// Undirected simple graph over variable indices 0..n-1. Used both for the
// ground-truth interaction graph of a problem and for learned graphs.
class InteractionGraph {
 public:
  InteractionGraph() = default;
  explicit InteractionGraph(std::size_t n) : n_(n), adjacency_(n * n, 0), neighbors_(n) {}

  std::size_t size() const { return n_; }

  bool has_edge(std::size_t u, std::size_t v) const { return adjacency_[u * n_ + v] != 0; }

  // Self-loops are ignored; duplicate insertions are no-ops.
  void add_edge(std::size_t u, std::size_t v) {
    if (u >= n_ || v >= n_) throw std::out_of_range("edge endpoint out of range");
    if (u == v || has_edge(u, v)) return;
    adjacency_[u * n_ + v] = 1;
    adjacency_[v * n_ + u] = 1;
    insert_sorted(neighbors_[u], v);
    insert_sorted(neighbors_[v], u);
    ++edges_;
  }

  // Ascending neighbor list.
  const std::vector<std::size_t>& neighbors(std::size_t v) const { return neighbors_[v]; }

  std::size_t edge_count() const { return edges_; }

  // All edges (u, v) with u < v in lexicographic order.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(edges_);
    for (std::size_t u = 0; u < n_; ++u)
      for (std::size_t v : neighbors_[u])
        if (u < v) out.emplace_back(u, v);
    return out;
  }

  friend bool operator==(const InteractionGraph& a, const InteractionGraph& b) {
    return a.n_ == b.n_ && a.adjacency_ == b.adjacency_;
  }

 private:
  static void insert_sorted(std::vector<std::size_t>& list, std::size_t value) {
    auto it = list.begin();
    while (it != list.end() && *it < value) ++it;
    list.insert(it, value);
  }

  std::size_t n_ = 0;
  std::size_t edges_ = 0;
  std::vector<char> adjacency_;
  std::vector<std::vector<std::size_t>> neighbors_;
};

}  // namespace gomea
