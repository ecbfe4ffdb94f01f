#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "swarmloc/datamodel.hpp"

namespace swarmloc {

struct LocalizabilityQuery {
  std::string isp_id;
  double q = 0.25;
  std::optional<double> speed_override_kbps;  // replaces U(A) only

  void validate() const {
    if (!(q >= 0.0 && q <= 1.0)) throw validation_error("q must lie in [0,1]");
    if (speed_override_kbps && !(*speed_override_kbps > 0))
      throw validation_error("speed override must be positive");
  }
};

/// 1 iff U(A)(1-q) <= U(A') <= U(A)(1+q), both ends inclusive.
inline int indicator(double ua, double ua2, double q) {
  return (ua * (1.0 - q) <= ua2 && ua2 <= ua * (1.0 + q)) ? 1 : 0;
}

namespace detail {

inline double home_speed(const SpeedModel& s, const LocalizabilityQuery& query) {
  return query.speed_override_kbps ? *query.speed_override_kbps : s.isp_speed(query.isp_id);
}

// Per-ISP peer counts of one torrent.
inline std::map<std::string, std::size_t> isp_counts(const TorrentRecord& t) {
  std::map<std::string, std::size_t> counts;
  for (const auto& p : t.peers) ++counts[p.isp_id];
  return counts;
}

inline double localizability_of(const TorrentRecord& t, const SpeedModel& s, const LocalizabilityQuery& query,
                                double ua) {
  const auto counts = isp_counts(t);
  auto self = counts.find(query.isp_id);
  if (self == counts.end())
    throw validation_error("isp '" + query.isp_id + "' has no peers in torrent '" + t.torrent_id + "'");
  std::size_t denom = 0;
  for (const auto& [isp, n] : counts) {
    // The home ISP is always in its own band, even under a speed override.
    if (isp == query.isp_id || indicator(ua, s.isp_speed(isp), query.q)) denom += n;
  }
  return static_cast<double>(self->second) / static_cast<double>(denom);
}

}  // namespace detail

/// I_q(A,T): share of T's speed-compatible population that sits inside A.
/// Speeds are ISP-granular; per-peer speeds in `s` are ignored here.
inline double torrent_localizability(const Dataset& d, const SpeedModel& s, const std::string& torrent_id,
                                     const LocalizabilityQuery& query) {
  query.validate();
  return detail::localizability_of(d.torrent(torrent_id), s, query, detail::home_speed(s, query));
}

/// I_q(A): per-torrent values weighted by |V(A,T)|/|V(A)|.
inline double isp_localizability(const Dataset& d, const SpeedModel& s, const LocalizabilityQuery& query) {
  query.validate();
  const double ua = detail::home_speed(s, query);
  const double total = static_cast<double>(d.isp_population(query.isp_id));
  double acc = 0.0;
  for (const auto& [tid, n] : d.torrents_of(query.isp_id))
    acc += static_cast<double>(n) / total * detail::localizability_of(d.torrent(tid), s, query, ua);
  return acc;
}

/// I_q(A) as U(A) moves over `grid` with every other ISP's speed fixed.
inline std::vector<std::pair<double, double>> speed_sweep(const Dataset& d, const SpeedModel& s,
                                                          const std::string& isp, double q,
                                                          const std::vector<double>& grid) {
  std::vector<std::pair<double, double>> out;
  out.reserve(grid.size());
  for (double speed : grid) {
    LocalizabilityQuery query{isp, q, speed};
    out.emplace_back(speed, isp_localizability(d, s, query));
  }
  return out;
}

/// Evenly spaced grid over [lo, hi] with `steps` points.
inline std::vector<double> linear_grid(double lo, double hi, std::size_t steps) {
  if (steps == 0 || !(lo > 0) || hi < lo) throw validation_error("sweep grid needs lo > 0, hi >= lo, steps >= 1");
  std::vector<double> g;
  for (std::size_t i = 0; i < steps; ++i)
    g.push_back(steps == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1));
  return g;
}

enum class TorrentScope { Local, Global };

/// Top-n torrents of `isp` ranked by local size |V(A,T)| (Local) or total
/// size |V(T)| (Global); ties broken by torrent_id.
inline std::vector<std::string> top_torrents(const Dataset& d, const std::string& isp, TorrentScope scope,
                                             std::size_t n) {
  std::vector<std::pair<std::size_t, std::string>> ranked;
  for (const auto& [tid, local] : d.torrents_of(isp))
    ranked.emplace_back(scope == TorrentScope::Local ? local : d.torrent(tid).size(), tid);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(n, ranked.size()); ++i) out.push_back(ranked[i].second);
  return out;
}

/// Restricts a dataset to the given torrents.
inline Dataset filter_torrents(const Dataset& d, const std::vector<std::string>& ids) {
  std::vector<TorrentRecord> kept;
  for (const auto& id : ids) kept.push_back(d.torrent(id));
  return Dataset::from_torrents(std::move(kept));
}

}  // namespace swarmloc
