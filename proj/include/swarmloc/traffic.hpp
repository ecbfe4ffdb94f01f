#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "swarmloc/datamodel.hpp"
#include "swarmloc/matching.hpp"
#include "swarmloc/overlay.hpp"

namespace swarmloc {

enum class SeederPolicy { Uniform, Proportional };

inline const char* to_string(SeederPolicy p) { return p == SeederPolicy::Uniform ? "uniform" : "proportional"; }

inline SeederPolicy parse_seeder_policy(std::string_view s) {
  if (s == "uniform") return SeederPolicy::Uniform;
  if (s == "proportional") return SeederPolicy::Proportional;
  throw validation_error("unknown seeder policy '" + std::string(s) + "'");
}

struct RateEntry {
  NodeId from;
  NodeId to;
  double kbps;
};

/// Directed steady-state rates of one torrent.
struct RateMatrix {
  std::string torrent_id;
  std::vector<RateEntry> entries;
  std::vector<NodeId> idle_uploaders;  // peers with no eligible recipient

  double outgoing(NodeId v) const {
    double s = 0;
    for (const auto& e : entries)
      if (e.from == v) s += e.kbps;
    return s;
  }
  double incoming(NodeId v) const {
    double s = 0;
    for (const auto& e : entries)
      if (e.to == v) s += e.kbps;
    return s;
  }
  double total() const {
    double s = 0;
    for (const auto& e : entries) s += e.kbps;
    return s;
  }
};

/// Leecher uploads. A matched neighbor gets U(v)/(k+1); the optimistic pool,
/// which also absorbs the slots v could not fill, is (k - m_v + 1)U(v)/(k+1)
/// and is spread evenly over the choked neighbors, or over the matched ones
/// when nothing is choked. Leechers upload to leecher neighbors only.
inline std::vector<RateEntry> leecher_rates(const OverlayGraph& g, const TorrentRecord& t, const MatchingProblem& p,
                                            const Matching& m, std::span<const double> speeds, std::size_t k,
                                            std::vector<NodeId>* idle = nullptr) {
  std::vector<std::vector<NodeId>> matched(t.size());
  for (auto [a, b] : m.labeled(p)) {
    matched[a].push_back(b);
    matched[b].push_back(a);
  }
  const double share = 1.0 / static_cast<double>(k + 1);
  std::vector<RateEntry> out;
  for (NodeId v = 0; v < t.size(); ++v) {
    if (t.peers[v].is_seeder()) continue;
    std::vector<NodeId> choked;
    std::size_t neighbors = 0;
    for (NodeId u : g.adjacency[v]) {
      if (t.peers[u].is_seeder()) continue;
      ++neighbors;
      if (std::find(matched[v].begin(), matched[v].end(), u) == matched[v].end()) choked.push_back(u);
    }
    if (neighbors == 0) {
      if (idle) idle->push_back(v);
      continue;
    }
    const double U = speeds[v];
    const auto mv = matched[v].size();
    const double pool = static_cast<double>(k - mv + 1) * U * share;
    if (choked.empty()) {
      const double each = U * share + pool / static_cast<double>(mv);
      for (NodeId u : matched[v]) out.push_back({v, u, each});
    } else {
      for (NodeId u : matched[v]) out.push_back({v, u, U * share});
      const double each = pool / static_cast<double>(choked.size());
      for (NodeId u : choked) out.push_back({v, u, each});
    }
  }
  return out;
}

/// Seeder uploads, split over leecher neighbors evenly (Uniform) or in
/// proportion to their uplinks (Proportional).
inline std::vector<RateEntry> seeder_rates(const OverlayGraph& g, const TorrentRecord& t, std::span<const double> speeds,
                                           SeederPolicy policy, std::vector<NodeId>* idle = nullptr) {
  std::vector<RateEntry> out;
  for (NodeId s = 0; s < t.size(); ++s) {
    if (!t.peers[s].is_seeder()) continue;
    std::vector<NodeId> targets;
    double weight = 0;
    for (NodeId u : g.adjacency[s]) {
      if (t.peers[u].is_seeder()) continue;
      targets.push_back(u);
      weight += speeds[u];
    }
    if (targets.empty()) {
      if (idle) idle->push_back(s);
      continue;
    }
    for (NodeId u : targets) {
      const double rate = policy == SeederPolicy::Uniform ? speeds[s] / static_cast<double>(targets.size())
                                                          : speeds[s] * speeds[u] / weight;
      out.push_back({s, u, rate});
    }
  }
  return out;
}

struct TorrentTraffic {
  RateMatrix matrix;
  MatchingProblem problem;
  Matching matching;
};

/// Steady-state traffic matrix of one torrent over overlay `g`.
inline TorrentTraffic torrent_matrix(const OverlayGraph& g, const TorrentRecord& t, std::span<const double> speeds,
                                     std::size_t k, SeederPolicy seeder_policy) {
  TorrentTraffic r;
  r.problem = leecher_problem(g, t, speeds, k);
  r.matching = solve_bmatching(r.problem);
  r.matrix.torrent_id = t.torrent_id;
  r.matrix.entries = leecher_rates(g, t, r.problem, r.matching, speeds, k, &r.matrix.idle_uploaders);
  auto seeds = seeder_rates(g, t, speeds, seeder_policy, &r.matrix.idle_uploaders);
  r.matrix.entries.insert(r.matrix.entries.end(), seeds.begin(), seeds.end());
  std::sort(r.matrix.idle_uploaders.begin(), r.matrix.idle_uploaders.end());
  return r;
}

struct ScopeTotals {
  double internal_kbps = 0, peering_kbps = 0, transit_kbps = 0;

  double& operator[](Scope s) {
    return s == Scope::Internal ? internal_kbps : s == Scope::Peering ? peering_kbps : transit_kbps;
  }
  double total() const { return internal_kbps + peering_kbps + transit_kbps; }
};

struct TorrentBreakdown {
  std::string torrent_id;
  ScopeTotals totals;
  std::size_t home_nodes = 0;
};

struct TrafficReport {
  std::string home_isp;
  ScopeTotals totals;
  std::vector<double> leecher_download_kbps;  // home-ISP leechers, one per (torrent, peer)
  std::vector<TorrentBreakdown> torrents;
};

/// Scope of a directed rate as seen by `home`: Internal when both ends are
/// home clients, Peering/Transit when exactly one is (by the other end's
/// country), nothing otherwise.
inline std::optional<Scope> home_scope(const Peer& a, const Peer& b, const std::string& home, const GeoMap& geo) {
  const bool ah = a.isp_id == home, bh = b.isp_id == home;
  if (ah && bh) return Scope::Internal;
  if (!ah && !bh) return std::nullopt;
  const Peer& other = ah ? b : a;
  auto country = [&](const Peer& p) {
    auto it = geo.find(p.isp_id);
    return it != geo.end() ? it->second : p.country_code;
  };
  return country(other) == country(ah ? a : b) ? Scope::Peering : Scope::Transit;
}

/// Folds one torrent's matrix into `report`.
inline void accumulate(TrafficReport& report, const RateMatrix& m, const TorrentRecord& t, const GeoMap& geo) {
  TorrentBreakdown b;
  b.torrent_id = t.torrent_id;
  for (const auto& e : m.entries)
    if (auto s = home_scope(t.peers[e.from], t.peers[e.to], report.home_isp, geo)) b.totals[*s] += e.kbps;
  std::vector<double> down(t.size(), 0.0);
  for (const auto& e : m.entries) down[e.to] += e.kbps;
  for (NodeId v = 0; v < t.size(); ++v) {
    if (t.peers[v].isp_id != report.home_isp) continue;
    ++b.home_nodes;
    if (!t.peers[v].is_seeder()) report.leecher_download_kbps.push_back(down[v]);
  }
  report.totals.internal_kbps += b.totals.internal_kbps;
  report.totals.peering_kbps += b.totals.peering_kbps;
  report.totals.transit_kbps += b.totals.transit_kbps;
  report.torrents.push_back(std::move(b));
}

inline TrafficReport aggregate(const std::vector<std::pair<const RateMatrix*, const TorrentRecord*>>& matrices,
                               const std::string& home_isp, const GeoMap& geo) {
  TrafficReport r;
  r.home_isp = home_isp;
  for (const auto& [m, t] : matrices) accumulate(r, *m, *t, geo);
  return r;
}

/// (Transit(Random) - Transit(policy)) / Transit(Random); nullopt when the
/// Random baseline has no transit.
inline std::optional<double> transit_reduction(const TrafficReport& policy, const TrafficReport& random) {
  if (!(random.totals.transit_kbps > 0)) return std::nullopt;
  return (random.totals.transit_kbps - policy.totals.transit_kbps) / random.totals.transit_kbps;
}

/// Nearest-rank percentile, `pct` in [0,100].
inline double percentile(std::vector<double> v, double pct) {
  if (v.empty()) throw validation_error("percentile of an empty sample");
  std::sort(v.begin(), v.end());
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(v.size())));
  rank = std::clamp<std::size_t>(rank, 1, v.size());
  return v[rank - 1];
}

/// (q_x(Random) - q_x(policy)) / q_x(Random); negative means a speed-up.
inline std::optional<double> qos_reduction(const std::vector<double>& policy, const std::vector<double>& random,
                                           double pct) {
  if (policy.empty() || random.empty()) return std::nullopt;
  const double base = percentile(random, pct);
  if (!(base > 0)) return std::nullopt;
  return (base - percentile(policy, pct)) / base;
}

struct UnlocalizableCurve {
  // (cumulative share of home nodes, cumulative share of transit), torrents
  // taken in decreasing transit order.
  std::vector<std::pair<double, double>> points;
  double node_share_at_threshold = 0;
};

/// How concentrated transit is: smallest share of home-ISP nodes whose
/// torrents account for `threshold` of the transit traffic.
inline UnlocalizableCurve unlocalizable_analysis(const TrafficReport& report, double threshold) {
  std::vector<const TorrentBreakdown*> ranked;
  std::size_t total_nodes = 0;
  for (const auto& t : report.torrents) {
    ranked.push_back(&t);
    total_nodes += t.home_nodes;
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto* a, const auto* b) {
    if (a->totals.transit_kbps != b->totals.transit_kbps) return a->totals.transit_kbps > b->totals.transit_kbps;
    return a->home_nodes < b->home_nodes;
  });
  UnlocalizableCurve c;
  const double transit = report.totals.transit_kbps;
  double cum_t = 0, cum_n = 0;
  c.points.emplace_back(0.0, 0.0);
  bool reached = !(transit > 0);
  for (const auto* t : ranked) {
    if (!(t->totals.transit_kbps > 0)) break;
    cum_t += t->totals.transit_kbps;
    cum_n += static_cast<double>(t->home_nodes);
    const double ns = total_nodes ? cum_n / static_cast<double>(total_nodes) : 0.0;
    const double ts = cum_t / transit;
    c.points.emplace_back(ns, ts);
    if (!reached && ts >= threshold - 1e-12) {
      c.node_share_at_threshold = ns;
      reached = true;
    }
  }
  return c;
}

}  // namespace swarmloc
