#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "swarmloc/errors.hpp"
#include "swarmloc/rng.hpp"
#include "swarmloc/text.hpp"

namespace swarmloc {

enum class Role { Leecher, Seeder };

inline const char* to_string(Role r) { return r == Role::Seeder ? "seeder" : "leecher"; }

inline std::optional<Role> parse_role(std::string_view s) {
  if (s == "seeder" || s == "S" || s == "s") return Role::Seeder;
  if (s == "leecher" || s == "L" || s == "l") return Role::Leecher;
  return std::nullopt;
}

struct Peer {
  std::string peer_id;
  std::string isp_id;
  std::string country_code;
  double uplink_kbps = 0.0;  // 0 until a SpeedModel is attached
  Role role = Role::Leecher;
  std::uint64_t completion_chunks = 0;

  bool is_seeder() const { return role == Role::Seeder; }

  friend bool operator==(const Peer&, const Peer&) = default;
};

struct TorrentRecord {
  std::string torrent_id;
  std::vector<Peer> peers;  // sorted by peer_id
  std::size_t seeder_count = 0;
  std::size_t leecher_count = 0;

  std::size_t size() const { return peers.size(); }

  std::size_t local_count(std::string_view isp_id) const {
    return static_cast<std::size_t>(std::count_if(
        peers.begin(), peers.end(), [&](const Peer& p) { return p.isp_id == isp_id; }));
  }

  void recount_roles() {
    seeder_count = static_cast<std::size_t>(
        std::count_if(peers.begin(), peers.end(), [](const Peer& p) { return p.is_seeder(); }));
    leecher_count = peers.size() - seeder_count;
  }

  friend bool operator==(const TorrentRecord&, const TorrentRecord&) = default;
};

// isp_id -> torrent_id -> |V(A,T)|
using IspIndex = std::map<std::string, std::map<std::string, std::size_t>>;
// isp_id -> country code
using GeoMap = std::map<std::string, std::string>;

/// A validated, canonically ordered collection of swarms. Torrents are
/// sorted by torrent_id and peers by peer_id, so everything computed from a
/// Dataset is independent of input order. Instances are immutable once
/// built; transformations return new datasets.
class Dataset {
 public:
  Dataset() = default;

  static Dataset from_torrents(std::vector<TorrentRecord> torrents) {
    Dataset d;
    std::set<std::string> ids;
    for (auto& t : torrents) {
      if (t.peers.empty()) throw validation_error("torrent '" + t.torrent_id + "' has no peers");
      if (!ids.insert(t.torrent_id).second)
        throw validation_error("duplicate torrent id '" + t.torrent_id + "'");
      std::sort(t.peers.begin(), t.peers.end(),
                [](const Peer& a, const Peer& b) { return a.peer_id < b.peer_id; });
      for (std::size_t i = 1; i < t.peers.size(); ++i) {
        if (t.peers[i].peer_id == t.peers[i - 1].peer_id)
          throw validation_error("duplicate peer '" + t.peers[i].peer_id + "' in torrent '" +
                                 t.torrent_id + "'");
      }
      t.recount_roles();
    }
    std::sort(torrents.begin(), torrents.end(),
              [](const TorrentRecord& a, const TorrentRecord& b) { return a.torrent_id < b.torrent_id; });
    d.torrents_ = std::move(torrents);
    d.isp_index_ = build_index(d.torrents_);
    d.geo_ = build_geo(d.torrents_);
    return d;
  }

  static IspIndex build_index(const std::vector<TorrentRecord>& torrents) {
    IspIndex idx;
    for (const auto& t : torrents)
      for (const auto& p : t.peers) ++idx[p.isp_id][t.torrent_id];
    return idx;
  }

  const std::vector<TorrentRecord>& torrents() const { return torrents_; }
  const IspIndex& isp_index() const { return isp_index_; }
  const GeoMap& geo() const { return geo_; }

  const TorrentRecord& torrent(std::string_view id) const {
    auto it = std::lower_bound(torrents_.begin(), torrents_.end(), id,
                               [](const TorrentRecord& t, std::string_view v) { return t.torrent_id < v; });
    if (it == torrents_.end() || it->torrent_id != id)
      throw validation_error("unknown torrent '" + std::string(id) + "'");
    return *it;
  }

  bool has_isp(const std::string& isp) const { return isp_index_.count(isp) != 0; }

  /// Torrents with at least one client of `isp`, i.e. T(A).
  const std::map<std::string, std::size_t>& torrents_of(const std::string& isp) const {
    auto it = isp_index_.find(isp);
    if (it == isp_index_.end()) throw validation_error("unknown isp '" + isp + "'");
    return it->second;
  }

  /// |V(A)|, summed over torrents.
  std::size_t isp_population(const std::string& isp) const {
    std::size_t n = 0;
    for (const auto& [t, c] : torrents_of(isp)) n += c;
    return n;
  }

  std::size_t peer_count() const {
    std::size_t n = 0;
    for (const auto& t : torrents_) n += t.size();
    return n;
  }

  friend bool operator==(const Dataset& a, const Dataset& b) { return a.torrents_ == b.torrents_; }

 private:
  static GeoMap build_geo(const std::vector<TorrentRecord>& torrents) {
    GeoMap geo;
    for (const auto& t : torrents) {
      for (const auto& p : t.peers) {
        auto [it, inserted] = geo.emplace(p.isp_id, p.country_code);
        if (!inserted && it->second != p.country_code)
          throw validation_error("isp '" + p.isp_id + "' appears in countries '" + it->second +
                                 "' and '" + p.country_code + "'");
      }
    }
    return geo;
  }

  std::vector<TorrentRecord> torrents_;
  IspIndex isp_index_;
  GeoMap geo_;
};

struct SpeedModel {
  std::map<std::string, double> per_isp_median_kbps;
  std::map<std::string, double> per_peer_kbps;  // optional; wins over the ISP median

  double isp_speed(const std::string& isp) const {
    auto it = per_isp_median_kbps.find(isp);
    if (it == per_isp_median_kbps.end()) throw validation_error("no speed for isp '" + isp + "'");
    return it->second;
  }

  double speed_of(const Peer& p) const {
    if (auto it = per_peer_kbps.find(p.peer_id); it != per_peer_kbps.end()) return it->second;
    return isp_speed(p.isp_id);
  }

  /// Throws listing every ISP of `d` without a speed.
  void validate_for(const Dataset& d) const {
    std::string missing;
    for (const auto& [isp, _] : d.isp_index()) {
      if (!per_isp_median_kbps.count(isp)) missing += (missing.empty() ? "" : ", ") + isp;
    }
    if (!missing.empty()) throw validation_error("missing speeds for isps: " + missing);
    for (const auto& [k, v] : per_isp_median_kbps)
      if (!(v > 0)) throw validation_error("non-positive speed for isp '" + k + "'");
    for (const auto& [k, v] : per_peer_kbps)
      if (!(v > 0)) throw validation_error("non-positive speed for peer '" + k + "'");
  }
};

/// Returns a copy of `d` with every peer's uplink resolved from `s`.
inline Dataset attach_speeds(const Dataset& d, const SpeedModel& s) {
  s.validate_for(d);
  auto torrents = d.torrents();
  for (auto& t : torrents)
    for (auto& p : t.peers) p.uplink_kbps = s.speed_of(p);
  return Dataset::from_torrents(std::move(torrents));
}

struct ChunkParams {
  std::uint64_t total_chunks = 10000;       // C
  std::uint64_t chunk_size_bytes = 32768;   // sigma
  double unchoke_interval_sec = 10.0;       // T
  std::size_t regular_slots = 4;            // k
  std::size_t neighborhood = 40;            // W

  void validate() const {
    if (total_chunks == 0 || chunk_size_bytes == 0 || !(unchoke_interval_sec > 0) ||
        regular_slots == 0 || neighborhood == 0)
      throw validation_error("chunk parameters must be positive");
    if (neighborhood <= regular_slots)
      throw validation_error("neighborhood W must exceed regular slots k");
  }

  /// Chunks a peer of uplink `kbps` can push through one regular slot in
  /// one unchoke interval: T*U/(sigma*k).
  double slot_budget_chunks(double kbps) const {
    return unchoke_interval_sec * kbps * 1000.0 / 8.0 /
           (static_cast<double>(chunk_size_bytes) * static_cast<double>(regular_slots));
  }
};

// ---------------------------------------------------------------------------
// Files

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open '" + path + "'");
  return in;
}

// Calls fn(fields, line_no) for every non-blank, non-comment line.
template <typename Fn>
void for_each_record(std::istream& in, const std::string& source, std::size_t min_fields,
                     std::size_t max_fields, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = text::strip_comment(line);
    if (body.empty()) continue;
    auto fields = text::split(body, ',');
    if (fields.size() < min_fields || fields.size() > max_fields)
      throw parse_error(source, line_no,
                        "expected " + std::to_string(min_fields) +
                            (max_fields != min_fields ? "-" + std::to_string(max_fields) : "") +
                            " fields, got " + std::to_string(fields.size()));
    for (const auto& f : fields)
      if (f.empty()) throw parse_error(source, line_no, "empty field");
    fn(fields, line_no);
  }
}

inline double parse_positive(const std::string& s, const std::string& source, std::size_t line) {
  auto v = text::to_double(s);
  if (!v || !(*v > 0) || !std::isfinite(*v))
    throw parse_error(source, line, "expected a positive number, got '" + s + "'");
  return *v;
}

}  // namespace detail

/// Demographics records: `torrent_id, peer_id, isp_id, country_code[, role]`.
inline Dataset parse_demographics(std::istream& in, const std::string& source = "<input>") {
  std::map<std::string, TorrentRecord> by_id;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  detail::for_each_record(in, source, 4, 5, [&](const std::vector<std::string>& f, std::size_t ln) {
    Peer p;
    p.peer_id = f[1];
    p.isp_id = f[2];
    p.country_code = f[3];
    if (f.size() == 5) {
      auto role = parse_role(f[4]);
      if (!role) throw parse_error(source, ln, "unknown role '" + f[4] + "'");
      p.role = *role;
    }
    if (auto [it, ok] = seen.emplace(std::make_pair(f[0], f[1]), ln); !ok)
      throw parse_error(source, ln,
                        "duplicate peer '" + f[1] + "' in torrent '" + f[0] + "' (first on line " +
                            std::to_string(it->second) + ")");
    auto& t = by_id[f[0]];
    t.torrent_id = f[0];
    t.peers.push_back(std::move(p));
  });
  std::vector<TorrentRecord> torrents;
  for (auto& [_, t] : by_id) torrents.push_back(std::move(t));
  return Dataset::from_torrents(std::move(torrents));
}

inline Dataset load_demographics(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_demographics(in, path);
}

inline void write_demographics(std::ostream& out, const Dataset& d) {
  out << "# torrent_id,peer_id,isp_id,country_code,role\n";
  for (const auto& t : d.torrents())
    for (const auto& p : t.peers)
      out << t.torrent_id << ',' << p.peer_id << ',' << p.isp_id << ',' << p.country_code << ','
          << to_string(p.role) << '\n';
}

/// `isp_id, median_uplink_kbps` per line; optional per-peer table
/// `peer_id, uplink_kbps`.
inline SpeedModel parse_speed_table(std::istream& isp_table, const std::string& source,
                                    std::istream* peer_table = nullptr,
                                    const std::string& peer_source = "<peer speeds>") {
  SpeedModel s;
  detail::for_each_record(isp_table, source, 2, 2, [&](const std::vector<std::string>& f, std::size_t ln) {
    if (!s.per_isp_median_kbps.emplace(f[0], detail::parse_positive(f[1], source, ln)).second)
      throw parse_error(source, ln, "duplicate isp '" + f[0] + "'");
  });
  if (peer_table) {
    detail::for_each_record(*peer_table, peer_source, 2, 2,
                            [&](const std::vector<std::string>& f, std::size_t ln) {
                              if (!s.per_peer_kbps.emplace(f[0], detail::parse_positive(f[1], peer_source, ln)).second)
                                throw parse_error(peer_source, ln, "duplicate peer '" + f[0] + "'");
                            });
  }
  return s;
}

inline SpeedModel load_speed_table(const std::string& path, const std::string& peer_path = {}) {
  auto in = detail::open_input(path);
  if (peer_path.empty()) return parse_speed_table(in, path);
  auto peers = detail::open_input(peer_path);
  return parse_speed_table(in, path, &peers, peer_path);
}

inline void write_speed_table(std::ostream& out, const SpeedModel& s) {
  out << "# isp_id,median_uplink_kbps\n";
  for (const auto& [isp, v] : s.per_isp_median_kbps) out << isp << ',' << text::fmt(v) << '\n';
}

struct SeederRatio {
  std::uint64_t seeders = 0;
  std::uint64_t leechers = 0;

  double seeder_probability() const {
    return static_cast<double>(seeders) / static_cast<double>(seeders + leechers);
  }
};

using RatioTable = std::map<std::string, SeederRatio>;

/// `torrent_id, seeders, leechers` per line.
inline RatioTable parse_ratios(std::istream& in, const std::string& source = "<ratios>") {
  RatioTable r;
  detail::for_each_record(in, source, 3, 3, [&](const std::vector<std::string>& f, std::size_t ln) {
    auto s = text::to_int(f[1]);
    auto l = text::to_int(f[2]);
    if (!s || !l || *s < 0 || *l < 0) throw parse_error(source, ln, "counts must be non-negative integers");
    if (*s + *l == 0) throw parse_error(source, ln, "seeders + leechers must be positive");
    if (!r.emplace(f[0], SeederRatio{static_cast<std::uint64_t>(*s), static_cast<std::uint64_t>(*l)}).second)
      throw parse_error(source, ln, "duplicate torrent '" + f[0] + "'");
  });
  return r;
}

inline RatioTable load_ratios(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_ratios(in, path);
}

inline void write_ratios(std::ostream& out, const RatioTable& r) {
  out << "# torrent_id,seeders,leechers\n";
  for (const auto& [t, v] : r) out << t << ',' << v.seeders << ',' << v.leechers << '\n';
}

/// Makes each peer a seeder with probability seeders/(seeders+leechers) of
/// its torrent. Only roles change.
inline Dataset assign_roles(const Dataset& d, const RatioTable& ratios, std::uint64_t seed) {
  auto torrents = d.torrents();
  for (auto& t : torrents) {
    auto it = ratios.find(t.torrent_id);
    if (it == ratios.end()) throw validation_error("no seeder/leecher ratio for torrent '" + t.torrent_id + "'");
    if (it->second.seeders + it->second.leechers == 0)
      throw validation_error("empty seeder/leecher ratio for torrent '" + t.torrent_id + "'");
    const double p = it->second.seeder_probability();
    Rng rng(derive_seed(seed, t.torrent_id, "roles"));
    for (auto& peer : t.peers) peer.role = rng.bernoulli(p) ? Role::Seeder : Role::Leecher;
  }
  return Dataset::from_torrents(std::move(torrents));
}

// ---------------------------------------------------------------------------
// Synthetic workloads

struct PointSize {
  std::size_t size = 10;
};
struct UniformSize {
  std::size_t lo = 2, hi = 50;
};
// Discrete power law P(s) ~ s^-exponent on [lo, hi].
struct PowerLawSize {
  double exponent = 2.0;
  std::size_t lo = 2, hi = 1000;
};
using SizeLaw = std::variant<PointSize, UniformSize, PowerLawSize>;

/// Cumulative distribution of a size law at integer s.
inline double size_cdf(const SizeLaw& law, std::size_t s) {
  return std::visit(
      [s](const auto& l) -> double {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, PointSize>) {
          return s >= l.size ? 1.0 : 0.0;
        } else if constexpr (std::is_same_v<L, UniformSize>) {
          if (s < l.lo) return 0.0;
          if (s >= l.hi) return 1.0;
          return static_cast<double>(s - l.lo + 1) / static_cast<double>(l.hi - l.lo + 1);
        } else {
          if (s < l.lo) return 0.0;
          if (s >= l.hi) return 1.0;
          double num = 0, den = 0;
          for (std::size_t x = l.lo; x <= l.hi; ++x) {
            const double w = std::pow(static_cast<double>(x), -l.exponent);
            den += w;
            if (x <= s) num += w;
          }
          return num / den;
        }
      },
      law);
}

struct SyntheticSpec {
  std::size_t torrent_count = 100;
  SizeLaw sizes = UniformSize{};
  std::size_t isp_count = 10;
  double isp_skew = 1.0;  // Zipf exponent of ISP popularity; 0 = uniform
  std::size_t country_count = 3;
  double speed_lo_kbps = 300.0;
  double speed_hi_kbps = 3000.0;
  double seeder_fraction_lo = 0.1;  // per-torrent seeder share for ratio tables
  double seeder_fraction_hi = 0.5;

  void validate() const {
    if (torrent_count == 0 || isp_count == 0 || country_count == 0)
      throw validation_error("synthetic spec counts must be positive");
    if (!(speed_lo_kbps > 0) || speed_hi_kbps < speed_lo_kbps)
      throw validation_error("synthetic speed range must be positive and ordered");
    if (isp_skew < 0) throw validation_error("isp skew must be non-negative");
    if (seeder_fraction_lo < 0 || seeder_fraction_hi > 1 || seeder_fraction_hi < seeder_fraction_lo)
      throw validation_error("seeder fraction range must lie in [0,1]");
    std::visit(
        [](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, PointSize>) {
            if (l.size == 0) throw validation_error("torrent size must be positive");
          } else {
            if (l.lo == 0 || l.hi < l.lo) throw validation_error("torrent size range must be positive and ordered");
          }
        },
        sizes);
  }
};

struct SyntheticWorld {
  Dataset dataset;
  SpeedModel speeds;
  RatioTable ratios;
};

namespace detail {

inline std::string padded(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

inline std::string country_name(std::size_t i) {
  std::string s = "AA";
  s[0] = static_cast<char>('A' + (i / 26) % 26);
  s[1] = static_cast<char>('A' + i % 26);
  return s;
}

// Inverse-CDF sampling over a discrete cumulative table.
inline std::size_t sample_cdf(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform() * cdf.back();
  return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
}

}  // namespace detail

inline SyntheticWorld generate_world(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed(seed, "synthetic"));

  std::vector<double> size_cdf_table;
  std::size_t size_base = 0;
  if (const auto* pl = std::get_if<PowerLawSize>(&spec.sizes)) {
    size_base = pl->lo;
    double acc = 0;
    for (std::size_t x = pl->lo; x <= pl->hi; ++x) {
      acc += std::pow(static_cast<double>(x), -pl->exponent);
      size_cdf_table.push_back(acc);
    }
  }
  std::vector<double> isp_cdf;
  double acc = 0;
  for (std::size_t i = 0; i < spec.isp_count; ++i) {
    acc += std::pow(static_cast<double>(i + 1), -spec.isp_skew);
    isp_cdf.push_back(acc);
  }

  SyntheticWorld w;
  std::vector<std::string> isp_ids;
  for (std::size_t i = 0; i < spec.isp_count; ++i) {
    isp_ids.push_back(detail::padded("AS", i + 1, 5));
    w.speeds.per_isp_median_kbps[isp_ids.back()] = rng.uniform(spec.speed_lo_kbps, spec.speed_hi_kbps);
  }

  std::vector<TorrentRecord> torrents;
  for (std::size_t ti = 0; ti < spec.torrent_count; ++ti) {
    std::size_t size = std::visit(
        [&](const auto& l) -> std::size_t {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, PointSize>) {
            return l.size;
          } else if constexpr (std::is_same_v<L, UniformSize>) {
            return l.lo + static_cast<std::size_t>(rng.below(l.hi - l.lo + 1));
          } else {
            return size_base + detail::sample_cdf(size_cdf_table, rng);
          }
        },
        spec.sizes);
    TorrentRecord t;
    t.torrent_id = detail::padded("T", ti + 1, 6);
    for (std::size_t pi = 0; pi < size; ++pi) {
      Peer p;
      p.peer_id = t.torrent_id + "-" + detail::padded("P", pi + 1, 6);
      const std::size_t isp = detail::sample_cdf(isp_cdf, rng);
      p.isp_id = isp_ids[isp];
      p.country_code = detail::country_name(isp % spec.country_count);
      t.peers.push_back(std::move(p));
    }
    const double frac = rng.uniform(spec.seeder_fraction_lo, spec.seeder_fraction_hi);
    const auto seeders = static_cast<std::uint64_t>(std::llround(frac * 1000.0));
    w.ratios[t.torrent_id] = SeederRatio{seeders, 1000 - seeders};
    torrents.push_back(std::move(t));
  }
  w.dataset = Dataset::from_torrents(std::move(torrents));
  return w;
}

inline Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  return generate_world(spec, seed).dataset;
}

}  // namespace swarmloc
