#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "swarmloc/datamodel.hpp"
#include "swarmloc/rng.hpp"

namespace swarmloc {

using NodeId = std::uint32_t;

enum class Scope { Internal, Peering, Transit };

inline const char* to_string(Scope s) {
  switch (s) {
    case Scope::Internal: return "internal";
    case Scope::Peering: return "peering";
    case Scope::Transit: return "transit";
  }
  return "?";
}

/// Random, or a member of the Locality(delta, mu) family. `delta` bounds the
/// relative speed loss tolerated when a remote neighbor is swapped for a
/// local one; `mu` caps remote neighbors (nullopt = unbounded).
struct OverlayPolicy {
  enum class Kind { Random, Family };

  Kind kind = Kind::Random;
  double delta = 0.0;
  std::optional<std::size_t> mu;
  std::string name = "random";

  static OverlayPolicy random() { return {}; }
  static OverlayPolicy family(double delta, std::optional<std::size_t> mu, std::string name = {}) {
    if (!(delta >= 0.0 && delta <= 1.0)) throw validation_error("policy delta must lie in [0,1]");
    if (name.empty()) {
      name = "family(" + text::fmt(delta) + ";" + (mu ? std::to_string(*mu) : std::string("inf")) + ")";
    }
    return {Kind::Family, delta, mu, std::move(name)};
  }
  static OverlayPolicy loif() { return family(0.0, std::nullopt, "loif"); }
  static OverlayPolicy locality() { return family(1.0, std::nullopt, "locality"); }
  static OverlayPolicy strict(std::size_t mu = 1) {
    return family(1.0, mu, mu == 1 ? "strict" : "strict(" + std::to_string(mu) + ")");
  }

  bool is_random() const { return kind == Kind::Random; }
  std::size_t remote_cap() const { return mu.value_or(std::numeric_limits<std::size_t>::max()); }
};

/// Parses `random`, `loif`, `locality`, `strict`, `strict(MU)` or
/// `family(DELTA,MU|inf)`.
inline OverlayPolicy parse_policy(std::string_view s) {
  s = text::trim(s);
  if (s == "random") return OverlayPolicy::random();
  if (s == "loif") return OverlayPolicy::loif();
  if (s == "locality") return OverlayPolicy::locality();
  if (s == "strict") return OverlayPolicy::strict();
  auto args_of = [&](std::string_view prefix) -> std::optional<std::vector<std::string>> {
    if (s.substr(0, prefix.size()) != prefix || s.back() != ')') return std::nullopt;
    return text::split(s.substr(prefix.size(), s.size() - prefix.size() - 1), ',');
  };
  if (auto a = args_of("strict(")) {
    auto mu = text::to_int((*a)[0]);
    if (a->size() == 1 && mu && *mu >= 0) return OverlayPolicy::strict(static_cast<std::size_t>(*mu));
  }
  if (auto a = args_of("family(")) {
    if (a->size() == 2) {
      auto delta = text::to_double((*a)[0]);
      std::optional<std::size_t> mu;
      bool ok = delta.has_value();
      if ((*a)[1] != "inf") {
        auto m = text::to_int((*a)[1]);
        ok = ok && m && *m >= 0;
        if (ok) mu = static_cast<std::size_t>(*m);
      }
      if (ok) return OverlayPolicy::family(*delta, mu);
    }
  }
  throw validation_error("unknown overlay policy '" + std::string(s) +
                         "' (expected random, loif, locality, strict, strict(MU), family(DELTA,MU|inf))");
}

struct Edge {
  NodeId a;  // a < b
  NodeId b;
  Scope scope = Scope::Internal;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected neighbor relation over the peers of one torrent. Node i is
/// `TorrentRecord::peers[i]`.
struct OverlayGraph {
  std::string torrent_id;
  std::vector<std::vector<NodeId>> adjacency;  // sorted, symmetric
  std::vector<Edge> edges;                     // sorted by (a, b)
  bool singleton = false;                      // set when the torrent has one peer

  std::size_t node_count() const { return adjacency.size(); }
  std::size_t degree(NodeId v) const { return adjacency[v].size(); }

  bool has_edge(NodeId a, NodeId b) const {
    const auto& n = adjacency[a];
    return std::binary_search(n.begin(), n.end(), b);
  }

  std::size_t count(Scope s) const {
    return static_cast<std::size_t>(
        std::count_if(edges.begin(), edges.end(), [s](const Edge& e) { return e.scope == s; }));
  }

  static OverlayGraph from_pairs(std::string torrent_id, std::size_t n, std::set<std::pair<NodeId, NodeId>> pairs) {
    OverlayGraph g;
    g.torrent_id = std::move(torrent_id);
    g.adjacency.assign(n, {});
    for (auto [a, b] : pairs) {
      g.edges.push_back({a, b, Scope::Internal});
      g.adjacency[a].push_back(b);
      g.adjacency[b].push_back(a);
    }
    for (auto& adj : g.adjacency) std::sort(adj.begin(), adj.end());
    return g;
  }

  friend bool operator==(const OverlayGraph&, const OverlayGraph&) = default;
};

inline std::pair<NodeId, NodeId> ordered(NodeId a, NodeId b) { return a < b ? std::make_pair(a, b) : std::make_pair(b, a); }

/// Tags every edge: same ISP is Internal, same country is Peering,
/// otherwise Transit.
inline OverlayGraph classify_edges(OverlayGraph g, const TorrentRecord& t, const GeoMap& geo) {
  auto country = [&](NodeId v) -> const std::string& {
    const auto& p = t.peers[v];
    auto it = geo.find(p.isp_id);
    return it != geo.end() ? it->second : p.country_code;
  };
  for (auto& e : g.edges) {
    if (t.peers[e.a].isp_id == t.peers[e.b].isp_id) {
      e.scope = Scope::Internal;
    } else if (country(e.a) == country(e.b)) {
      e.scope = Scope::Peering;
    } else {
      e.scope = Scope::Transit;
    }
  }
  return g;
}

inline GeoMap geo_of(const TorrentRecord& t) {
  GeoMap geo;
  for (const auto& p : t.peers) geo.emplace(p.isp_id, p.country_code);
  return geo;
}

/// Bootstrap draws: node v picks min(W, |V(T)|-1) distinct other peers
/// uniformly at random. The stream for v depends only on (seed, torrent,
/// peer_id), so every policy sees the same draw for the same seed.
inline std::vector<std::vector<NodeId>> random_selections(const TorrentRecord& t, std::size_t W, std::uint64_t seed) {
  const std::size_t n = t.size();
  std::vector<std::vector<NodeId>> sel(n);
  if (n < 2) return sel;
  const std::size_t m = std::min(W, n - 1);
  for (std::size_t v = 0; v < n; ++v) {
    Rng rng(derive_seed(seed, t.torrent_id, t.peers[v].peer_id, "neighborhood"));
    // Floyd's sampling of m values from [0, n-1), then skip over v.
    std::unordered_set<std::size_t> chosen;
    for (std::size_t j = n - 1 - m; j < n - 1; ++j) {
      const std::size_t r = static_cast<std::size_t>(rng.below(j + 1));
      if (!chosen.insert(r).second) chosen.insert(j);
    }
    for (std::size_t r : chosen) sel[v].push_back(static_cast<NodeId>(r >= v ? r + 1 : r));
    std::sort(sel[v].begin(), sel[v].end());
  }
  return sel;
}

inline OverlayGraph build_random(const TorrentRecord& t, std::size_t W, std::uint64_t seed) {
  std::set<std::pair<NodeId, NodeId>> pairs;
  const auto sel = random_selections(t, W, seed);
  for (NodeId v = 0; v < sel.size(); ++v)
    for (NodeId u : sel[v]) pairs.insert(ordered(v, u));
  auto g = OverlayGraph::from_pairs(t.torrent_id, t.size(), std::move(pairs));
  g.singleton = t.size() < 2;
  return classify_edges(std::move(g), t, geo_of(t));
}

namespace detail {

struct FilteredNeighborhood {
  std::vector<NodeId> nodes;
  std::size_t locals = 0;
  std::size_t remotes = 0;
  double slowest_local = std::numeric_limits<double>::infinity();
};

// Whether `v` would keep remote `u` if it showed up in its neighborhood: v
// still has room under mu, and either it did not fill its neighborhood with
// locals or one of its locals is one the switch rule would not have preferred
// over u.
inline bool accepts_remote(const FilteredNeighborhood& f, std::size_t remote_degree, std::size_t full_size,
                           const OverlayPolicy& policy, double u_speed) {
  if (remote_degree >= policy.remote_cap()) return false;
  if (f.locals < full_size) return true;
  return !(1.0 - f.slowest_local / u_speed < policy.delta);
}

}  // namespace detail

/// Locality(delta, mu) overlay. Each node starts from its bootstrap draw and
/// filters it against the unused locals of its own ISP:
///   - while it holds more than mu remotes, the slowest remote is replaced by
///     the fastest unused local, or dropped when no local is left;
///   - then each remaining remote u (slowest first) is replaced by the
///     fastest unused local w only if 1 - U(w)/U(u) < delta.
/// The graph is the union of the filtered neighborhoods, where a one-sided
/// remote connection needs the target's consent (see accepts_remote). The mu
/// cap is then re-enforced by pruning the slowest remote edges, and isolated
/// nodes are reattached to any peer that would still accept them.
inline OverlayGraph build_family(const TorrentRecord& t, const OverlayPolicy& policy, std::span<const double> speeds,
                                 std::size_t W, std::uint64_t seed) {
  if (policy.is_random()) return build_random(t, W, seed);
  const std::size_t n = t.size();
  if (speeds.size() != n) throw validation_error("speed vector does not match torrent '" + t.torrent_id + "'");
  if (n < 2) return build_random(t, W, seed);

  const auto sel = random_selections(t, W, seed);
  const std::size_t full_size = std::min(W, n - 1);
  const std::size_t cap = policy.remote_cap();
  auto is_local = [&](NodeId a, NodeId b) { return t.peers[a].isp_id == t.peers[b].isp_id; };
  auto slower = [&](NodeId a, NodeId b) { return speeds[a] != speeds[b] ? speeds[a] < speeds[b] : a < b; };
  auto faster = [&](NodeId a, NodeId b) { return speeds[a] != speeds[b] ? speeds[a] > speeds[b] : a < b; };

  std::vector<detail::FilteredNeighborhood> filtered(n);
  for (NodeId v = 0; v < n; ++v) {
    std::vector<NodeId> kept_locals, remotes, unused;
    for (NodeId u : sel[v]) (is_local(v, u) ? kept_locals : remotes).push_back(u);
    for (NodeId w = 0; w < n; ++w)
      if (w != v && is_local(v, w) && !std::binary_search(sel[v].begin(), sel[v].end(), w)) unused.push_back(w);
    std::sort(remotes.begin(), remotes.end(), slower);
    std::sort(unused.begin(), unused.end(), faster);

    std::size_t next_remote = 0, next_local = 0;  // remotes[0, next_remote) are gone
    while (remotes.size() - next_remote > cap) {
      ++next_remote;
      if (next_local < unused.size()) kept_locals.push_back(unused[next_local++]);
    }
    while (next_remote < remotes.size() && next_local < unused.size()) {
      const NodeId u = remotes[next_remote], w = unused[next_local];
      if (!(1.0 - speeds[w] / speeds[u] < policy.delta)) break;
      ++next_remote;
      ++next_local;
      kept_locals.push_back(w);
    }

    auto& f = filtered[v];
    f.locals = kept_locals.size();
    f.remotes = remotes.size() - next_remote;
    for (NodeId w : kept_locals) f.slowest_local = std::min(f.slowest_local, speeds[w]);
    f.nodes = std::move(kept_locals);
    f.nodes.insert(f.nodes.end(), remotes.begin() + static_cast<std::ptrdiff_t>(next_remote), remotes.end());
    std::sort(f.nodes.begin(), f.nodes.end());
  }

  auto selected = [&](NodeId a, NodeId b) {
    return std::binary_search(filtered[a].nodes.begin(), filtered[a].nodes.end(), b);
  };
  std::set<std::pair<NodeId, NodeId>> pairs;
  for (NodeId v = 0; v < n; ++v) {
    for (NodeId u : filtered[v].nodes) {
      if (is_local(v, u) || selected(u, v) ||
          detail::accepts_remote(filtered[u], filtered[u].remotes, full_size, policy, speeds[v]))
        pairs.insert(ordered(v, u));
    }
  }

  // Re-enforce the remote cap on the union.
  std::vector<std::set<NodeId>> adj(n);
  for (auto [a, b] : pairs) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  auto remote_degree = [&](NodeId v) {
    return static_cast<std::size_t>(
        std::count_if(adj[v].begin(), adj[v].end(), [&](NodeId u) { return !is_local(v, u); }));
  };
  for (NodeId v = 0; v < n; ++v) {
    std::size_t excess = remote_degree(v);
    if (excess <= cap) continue;
    excess -= cap;
    std::vector<NodeId> remote_nbrs;
    for (NodeId u : adj[v])
      if (!is_local(v, u)) remote_nbrs.push_back(u);
    // Slowest first, but keep edges that are some neighbor's only link for last.
    std::sort(remote_nbrs.begin(), remote_nbrs.end(), [&](NodeId a, NodeId b) {
      const bool a_last = adj[a].size() == 1, b_last = adj[b].size() == 1;
      if (a_last != b_last) return !a_last;
      return slower(a, b);
    });
    for (std::size_t i = 0; i < excess; ++i) {
      adj[v].erase(remote_nbrs[i]);
      adj[remote_nbrs[i]].erase(v);
    }
  }

  // Reattach isolated nodes where some peer still accepts them.
  for (NodeId v = 0; v < n; ++v) {
    if (!adj[v].empty()) continue;
    std::vector<NodeId> candidates(n);
    for (NodeId u = 0; u < n; ++u) candidates[u] = u;
    std::sort(candidates.begin(), candidates.end(), faster);
    for (NodeId u : candidates) {
      if (u == v) continue;
      const bool ok = is_local(v, u) ||
                      (remote_degree(v) < cap &&
                       detail::accepts_remote(filtered[u], remote_degree(u), full_size, policy, speeds[v]));
      if (ok) {
        adj[v].insert(u);
        adj[u].insert(v);
        break;
      }
    }
  }

  pairs.clear();
  for (NodeId v = 0; v < n; ++v)
    for (NodeId u : adj[v])
      if (v < u) pairs.emplace(v, u);
  return classify_edges(OverlayGraph::from_pairs(t.torrent_id, n, std::move(pairs)), t, geo_of(t));
}

inline OverlayGraph build_overlay(const TorrentRecord& t, const OverlayPolicy& policy, std::span<const double> speeds,
                                  std::size_t W, std::uint64_t seed) {
  return policy.is_random() ? build_random(t, W, seed) : build_family(t, policy, speeds, W, seed);
}

/// Edge-list CSV rows: torrent_id,peer_a,peer_b,scope.
inline void write_edges(std::ostream& out, const OverlayGraph& g, const TorrentRecord& t) {
  for (const auto& e : g.edges)
    out << g.torrent_id << ',' << t.peers[e.a].peer_id << ',' << t.peers[e.b].peer_id << ',' << to_string(e.scope)
        << '\n';
}

}  // namespace swarmloc
