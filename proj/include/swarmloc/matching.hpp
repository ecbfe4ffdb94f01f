#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "swarmloc/datamodel.hpp"
#include "swarmloc/overlay.hpp"
#include "swarmloc/rng.hpp"

namespace swarmloc {

/// Perturbs speeds by a tiny random relative amount so that no two are
/// equal. Each value moves up by less than epsilon relative and by less than
/// half the gap to the next larger distinct value, so the order of values
/// that were already distinct is preserved.
inline std::vector<double> tiebreak_speeds(std::span<const double> speeds, double epsilon, std::uint64_t seed) {
  const std::size_t n = speeds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return speeds[a] != speeds[b] ? speeds[a] < speeds[b] : a < b;
  });
  Rng rng(derive_seed(seed, "tiebreak"));
  std::vector<double> out(speeds.begin(), speeds.end());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && speeds[order[j]] == speeds[order[i]]) ++j;
    const double v = speeds[order[i]];
    double room = std::abs(v) * epsilon * 0.5;
    if (j < n) room = std::min(room, (speeds[order[j]] - v) * 0.5);
    // Random offsets, then sorted so equal inputs map to strictly increasing
    // outputs in a random assignment.
    std::vector<double> offsets(j - i);
    for (auto& o : offsets) o = rng.uniform() * room;
    std::sort(offsets.begin(), offsets.end());
    std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(i),
                                     order.begin() + static_cast<std::ptrdiff_t>(j));
    rng.shuffle(members);
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < members.size(); ++m) {
      double x = v + offsets[m];
      if (x <= prev) x = std::nextafter(prev, std::numeric_limits<double>::infinity());
      out[members[m]] = x;
      prev = x;
    }
    i = j;
  }
  return out;
}

/// b-matching instance with a global preference: every node ranks a
/// partner by the partner's (tie-broken) uplink. `nodes` carries caller
/// labels; `allowed` is expressed in positions 0..n-1.
struct MatchingProblem {
  std::vector<NodeId> nodes;
  std::vector<std::vector<std::uint32_t>> allowed;  // sorted, symmetric, no self
  std::vector<std::size_t> slots;
  std::vector<double> preference;

  std::size_t size() const { return nodes.size(); }

  void validate() const {
    const std::size_t n = nodes.size();
    if (allowed.size() != n || slots.size() != n || preference.size() != n)
      throw validation_error("matching problem: inconsistent sizes");
    for (std::size_t v = 0; v < n; ++v) {
      if (slots[v] < 1) throw validation_error("matching problem: slots must be >= 1");
      for (auto u : allowed[v]) {
        if (u == v || u >= n) throw validation_error("matching problem: bad allowed entry");
        if (!std::binary_search(allowed[u].begin(), allowed[u].end(), static_cast<std::uint32_t>(v)))
          throw validation_error("matching problem: allowed relation is not symmetric");
      }
    }
    std::vector<double> p = preference;
    std::sort(p.begin(), p.end());
    if (std::adjacent_find(p.begin(), p.end()) != p.end())
      throw validation_error("matching problem: preferences must be pairwise distinct");
  }

  bool is_allowed(std::uint32_t a, std::uint32_t b) const {
    return std::binary_search(allowed[a].begin(), allowed[a].end(), b);
  }
};

/// Unordered pairs in problem positions, each stored (low, high) and sorted.
struct Matching {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;

  std::vector<std::vector<std::uint32_t>> partners(std::size_t n) const {
    std::vector<std::vector<std::uint32_t>> out(n);
    for (auto [a, b] : pairs) {
      out[a].push_back(b);
      out[b].push_back(a);
    }
    return out;
  }

  /// Pairs translated to caller labels, canonically ordered.
  std::vector<std::pair<NodeId, NodeId>> labeled(const MatchingProblem& p) const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (auto [a, b] : pairs) out.push_back(ordered(p.nodes[a], p.nodes[b]));
    std::sort(out.begin(), out.end());
    return out;
  }

  friend bool operator==(const Matching&, const Matching&) = default;
};

/// Greedy construction of the unique stable b-matching under a global
/// preference. Nodes are visited from most to least preferred; each takes
/// its most preferred allowed partners among the not-yet-visited nodes that
/// still have a free slot. Any pair left out is rejected by its better
/// endpoint (full with better partners) or by its worse endpoint (filled by
/// nodes that were visited earlier, hence preferred), so no blocking pair
/// survives.
inline Matching solve_bmatching(const MatchingProblem& p) {
  const std::size_t n = p.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return p.preference[a] > p.preference[b]; });
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;

  std::vector<std::size_t> free(p.slots.begin(), p.slots.end());
  Matching m;
  std::vector<std::uint32_t> candidates;
  for (std::uint32_t v : order) {
    if (free[v] == 0) continue;
    candidates.clear();
    for (auto u : p.allowed[v])
      if (rank[u] > rank[v] && free[u] > 0) candidates.push_back(u);
    std::sort(candidates.begin(), candidates.end(), [&](auto a, auto b) { return rank[a] < rank[b]; });
    for (auto u : candidates) {
      if (free[v] == 0) break;
      --free[v];
      --free[u];
      m.pairs.emplace_back(std::min(v, u), std::max(v, u));
    }
  }
  std::sort(m.pairs.begin(), m.pairs.end());
  return m;
}

/// Exhaustive scan for pairs (v,u) in `allowed`, not matched together, where
/// each endpoint has a free slot or prefers the other to its worst partner.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> verify_stability(const MatchingProblem& p,
                                                                              const Matching& m) {
  const std::size_t n = p.size();
  const auto partners = m.partners(n);
  auto wants = [&](std::uint32_t v, std::uint32_t u) {
    if (partners[v].size() < p.slots[v]) return true;
    double worst = std::numeric_limits<double>::infinity();
    for (auto w : partners[v]) worst = std::min(worst, p.preference[w]);
    return p.preference[u] > worst;
  };
  std::vector<std::pair<std::uint32_t, std::uint32_t>> blocking;
  for (std::uint32_t v = 0; v < n; ++v) {
    for (auto u : p.allowed[v]) {
      if (u <= v) continue;
      if (std::find(partners[v].begin(), partners[v].end(), u) != partners[v].end()) continue;
      if (wants(v, u) && wants(u, v)) blocking.emplace_back(v, u);
    }
  }
  return blocking;
}

/// Capacity and allowed-relation check, separate from stability.
inline bool is_feasible(const MatchingProblem& p, const Matching& m) {
  const auto partners = m.partners(p.size());
  for (std::size_t v = 0; v < p.size(); ++v)
    if (partners[v].size() > p.slots[v]) return false;
  auto sorted = m.pairs;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return false;
  return std::all_of(m.pairs.begin(), m.pairs.end(), [&](auto pr) { return pr.first != pr.second && p.is_allowed(pr.first, pr.second); });
}

/// Leechers of `t` and the overlay edges among them. Seeders never
/// reciprocate, so they stay out of the matching.
inline MatchingProblem leecher_problem(const OverlayGraph& g, const TorrentRecord& t,
                                       std::span<const double> speeds, std::size_t k) {
  MatchingProblem p;
  std::vector<std::int64_t> pos(t.size(), -1);
  for (NodeId v = 0; v < t.size(); ++v) {
    if (t.peers[v].is_seeder()) continue;
    pos[v] = static_cast<std::int64_t>(p.nodes.size());
    p.nodes.push_back(v);
  }
  p.allowed.resize(p.nodes.size());
  p.slots.assign(p.nodes.size(), k);
  for (std::size_t i = 0; i < p.nodes.size(); ++i) {
    const NodeId v = p.nodes[i];
    p.preference.push_back(speeds[v]);
    for (NodeId u : g.adjacency[v])
      if (pos[u] >= 0) p.allowed[i].push_back(static_cast<std::uint32_t>(pos[u]));
  }
  return p;
}

/// Fully connected problem over `speeds` (positions are labels).
inline MatchingProblem complete_problem(std::span<const double> speeds, std::size_t k) {
  MatchingProblem p;
  const std::size_t n = speeds.size();
  p.preference.assign(speeds.begin(), speeds.end());
  p.slots.assign(n, k);
  p.allowed.resize(n);
  for (std::uint32_t v = 0; v < n; ++v) {
    p.nodes.push_back(v);
    for (std::uint32_t u = 0; u < n; ++u)
      if (u != v) p.allowed[v].push_back(u);
  }
  return p;
}

/// Pair list `label_a,label_b` for unchoke-pattern plots.
inline void write_matching(std::ostream& out, const MatchingProblem& p, const Matching& m) {
  out << "# node_a,node_b\n";
  for (auto [a, b] : m.labeled(p)) out << a << ',' << b << '\n';
}

}  // namespace swarmloc
