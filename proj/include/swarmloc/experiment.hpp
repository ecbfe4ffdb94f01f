#pragma once

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "swarmloc/bounds.hpp"
#include "swarmloc/datamodel.hpp"
#include "swarmloc/matching.hpp"
#include "swarmloc/overlay.hpp"
#include "swarmloc/traffic.hpp"

namespace swarmloc {

struct ExperimentConfig {
  // Either files or a synthetic spec.
  std::string demographics_path;
  std::string speeds_path;
  std::string peer_speeds_path;
  std::string ratios_path;
  std::optional<SyntheticSpec> synthetic;

  std::vector<std::string> home_isps;  // empty: the top_n ISPs by clients
  std::size_t top_n = 10;
  std::vector<OverlayPolicy> policies{OverlayPolicy::loif(), OverlayPolicy::locality(), OverlayPolicy::strict()};
  ChunkParams chunk;
  SeederPolicy seeder_policy = SeederPolicy::Proportional;
  std::vector<double> percentiles{5, 25, 50, 75, 95};
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  double tiebreak_epsilon = 1e-9;
  double unlocalizable_threshold = 0.9;
  bool write_edges = false;
  double q = 0.25;

  void validate() const {
    chunk.validate();
    if (!synthetic && (demographics_path.empty() || speeds_path.empty()))
      throw validation_error("config needs [data] demographics and speeds, or a [synthetic] section");
    if (synthetic) synthetic->validate();
    for (double p : percentiles)
      if (!(p >= 0 && p <= 100)) throw validation_error("percentiles must lie in [0,100]");
    if (!(tiebreak_epsilon > 0 && tiebreak_epsilon < 1e-3)) throw validation_error("epsilon must lie in (0, 1e-3)");
    if (top_n == 0) throw validation_error("top_n must be positive");
  }
};

namespace detail {

// Splits on commas that are not inside parentheses.
inline std::vector<std::string> split_top_level(std::string_view s) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.emplace_back(text::trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!text::trim(cur).empty()) out.emplace_back(text::trim(cur));
  return out;
}

inline SizeLaw parse_size_law(const std::string& s) {
  const auto parts = text::split(s, ':');
  auto num = [&](std::size_t i) {
    auto v = i < parts.size() ? text::to_double(parts[i]) : std::nullopt;
    if (!v || *v < 0) throw validation_error("bad size law '" + s + "'");
    return *v;
  };
  if (parts[0] == "point" && parts.size() == 2) return PointSize{static_cast<std::size_t>(num(1))};
  if (parts[0] == "uniform" && parts.size() == 3)
    return UniformSize{static_cast<std::size_t>(num(1)), static_cast<std::size_t>(num(2))};
  if (parts[0] == "powerlaw" && parts.size() == 4)
    return PowerLawSize{num(1), static_cast<std::size_t>(num(2)), static_cast<std::size_t>(num(3))};
  throw validation_error("bad size law '" + s + "' (point:N, uniform:LO:HI, powerlaw:EXP:LO:HI)");
}

class Section {
 public:
  Section(const boost::property_tree::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  bool present() const { return tree_ != nullptr; }

  std::optional<std::string> get(const std::string& key) {
    seen_.insert(key);
    if (!tree_) return std::nullopt;
    auto v = tree_->get_optional<std::string>(boost::property_tree::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return std::string(text::trim(*v));
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    auto v = get(key);
    if (!v) return;
    if constexpr (std::is_same_v<T, std::string>) {
      out = *v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (*v != "true" && *v != "false") fail(key, *v);
      out = *v == "true";
    } else if constexpr (std::is_floating_point_v<T>) {
      auto d = text::to_double(*v);
      if (!d) fail(key, *v);
      out = *d;
    } else {
      auto i = text::to_int(*v);
      if (!i || *i < 0) fail(key, *v);
      out = static_cast<T>(*i);
    }
  }

  void reject_unknown() const {
    if (!tree_) return;
    for (const auto& [key, _] : *tree_)
      if (!seen_.count(key)) throw validation_error("unknown key '" + key + "' in [" + name_ + "]");
  }

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& v) const {
    throw validation_error("bad value '" + v + "' for " + name_ + "." + key);
  }

  const boost::property_tree::ptree* tree_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace detail

/// INI-style configuration (`[section]`, `key = value`, `;` comments).
/// Relative paths resolve against `base_dir`.
inline ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw validation_error("config: " + std::string(e.what()));
  }
  for (const auto& [name, _] : tree)
    if (name != "data" && name != "synthetic" && name != "experiment")
      throw validation_error("unknown config section [" + name + "]");
  auto section = [&](const char* name) {
    auto child = tree.get_child_optional(name);
    return detail::Section(child ? &*child : nullptr, name);
  };
  auto resolve = [&](std::string p) {
    if (p.empty() || std::filesystem::path(p).is_absolute() || base_dir.empty()) return p;
    return (base_dir / p).string();
  };

  ExperimentConfig c;
  auto data = section("data");
  data.read("demographics", c.demographics_path);
  data.read("speeds", c.speeds_path);
  data.read("peer_speeds", c.peer_speeds_path);
  data.read("ratios", c.ratios_path);
  data.reject_unknown();
  c.demographics_path = resolve(c.demographics_path);
  c.speeds_path = resolve(c.speeds_path);
  c.peer_speeds_path = resolve(c.peer_speeds_path);
  c.ratios_path = resolve(c.ratios_path);

  auto syn = section("synthetic");
  if (syn.present()) {
    SyntheticSpec s;
    syn.read("torrents", s.torrent_count);
    if (auto v = syn.get("sizes")) s.sizes = detail::parse_size_law(*v);
    syn.read("isps", s.isp_count);
    syn.read("isp_skew", s.isp_skew);
    syn.read("countries", s.country_count);
    syn.read("speed_lo_kbps", s.speed_lo_kbps);
    syn.read("speed_hi_kbps", s.speed_hi_kbps);
    syn.read("seeder_fraction_lo", s.seeder_fraction_lo);
    syn.read("seeder_fraction_hi", s.seeder_fraction_hi);
    syn.reject_unknown();
    c.synthetic = s;
  }

  auto ex = section("experiment");
  if (auto v = ex.get("home_isps")) c.home_isps = detail::split_top_level(*v);
  ex.read("top_n", c.top_n);
  if (auto v = ex.get("policies")) {
    c.policies.clear();
    for (const auto& name : detail::split_top_level(*v)) {
      auto p = parse_policy(name);
      if (!p.is_random()) c.policies.push_back(std::move(p));
    }
  }
  if (auto v = ex.get("seeder_policy")) c.seeder_policy = parse_seeder_policy(*v);
  if (auto v = ex.get("percentiles")) {
    c.percentiles.clear();
    for (const auto& p : text::split(*v, ',')) {
      auto d = text::to_double(p);
      if (!d) throw validation_error("bad percentile '" + p + "'");
      c.percentiles.push_back(*d);
    }
  }
  ex.read("seed", c.seed);
  ex.read("output", c.output_dir);
  ex.read("W", c.chunk.neighborhood);
  ex.read("k", c.chunk.regular_slots);
  ex.read("chunks", c.chunk.total_chunks);
  ex.read("chunk_bytes", c.chunk.chunk_size_bytes);
  ex.read("unchoke_interval_sec", c.chunk.unchoke_interval_sec);
  ex.read("epsilon", c.tiebreak_epsilon);
  ex.read("unlocalizable_threshold", c.unlocalizable_threshold);
  ex.read("edges", c.write_edges);
  ex.read("q", c.q);
  ex.reject_unknown();
  c.output_dir = resolve(c.output_dir);
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open config '" + path + "'");
  return parse_config(in, std::filesystem::path(path).parent_path());
}

/// Dataset with roles assigned and speeds attached, plus the speed table.
struct PreparedData {
  Dataset dataset;
  SpeedModel speeds;
};

inline PreparedData prepare_data(const ExperimentConfig& c) {
  Dataset d;
  SpeedModel s;
  std::optional<RatioTable> ratios;
  if (c.synthetic) {
    auto w = generate_world(*c.synthetic, c.seed);
    d = std::move(w.dataset);
    s = std::move(w.speeds);
    ratios = std::move(w.ratios);
  } else {
    d = load_demographics(c.demographics_path);
    s = load_speed_table(c.speeds_path, c.peer_speeds_path);
    if (!c.ratios_path.empty()) ratios = load_ratios(c.ratios_path);
  }
  if (ratios) d = assign_roles(d, *ratios, derive_seed(c.seed, "roles"));
  return {attach_speeds(d, s), std::move(s)};
}

/// ISPs ranked by |V(A)|, ties by isp_id.
inline std::vector<std::string> top_isps(const Dataset& d, std::size_t n) {
  std::vector<std::pair<std::size_t, std::string>> ranked;
  for (const auto& [isp, _] : d.isp_index()) ranked.emplace_back(d.isp_population(isp), isp);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(n, ranked.size()); ++i) out.push_back(ranked[i].second);
  return out;
}

struct PolicyReport {
  std::string policy;
  TrafficReport traffic;
  std::optional<double> transit_reduction;
  std::vector<std::optional<double>> qos_reduction;  // aligned with config percentiles
  UnlocalizableCurve unlocalizable;
};

struct ExperimentResult {
  std::vector<std::string> home_isps;
  std::vector<std::string> policies;  // "random" first
  std::vector<PolicyReport> reports;  // home ISP major, policy minor
  std::vector<std::string> warnings;
  std::vector<std::string> files;
};

/// Per-torrent state shared by every policy: speeds and the bootstrap seed.
/// Differences between policies therefore come from the policy alone.
/// Overlays compare model speeds; the matching needs the tie-broken ones.
struct TorrentRun {
  std::vector<double> model_speeds;
  std::vector<double> speeds;
  std::uint64_t overlay_seed;
  std::vector<OverlayGraph> graphs;      // per policy
  std::vector<TorrentTraffic> traffic;  // per policy
};

inline std::vector<OverlayPolicy> all_policies(const ExperimentConfig& c) {
  std::vector<OverlayPolicy> p{OverlayPolicy::random()};
  p.insert(p.end(), c.policies.begin(), c.policies.end());
  return p;
}

inline TorrentRun run_torrent(const TorrentRecord& t, const std::vector<OverlayPolicy>& policies,
                              const ExperimentConfig& c) {
  TorrentRun r;
  for (const auto& p : t.peers) r.model_speeds.push_back(p.uplink_kbps);
  r.speeds = tiebreak_speeds(r.model_speeds, c.tiebreak_epsilon, derive_seed(c.seed, t.torrent_id, "tiebreak"));
  r.overlay_seed = derive_seed(c.seed, t.torrent_id, "overlay");
  for (const auto& policy : policies) {
    r.graphs.push_back(build_overlay(t, policy, r.model_speeds, c.chunk.neighborhood, r.overlay_seed));
    r.traffic.push_back(torrent_matrix(r.graphs.back(), t, r.speeds, c.chunk.regular_slots, c.seeder_policy));
  }
  return r;
}

namespace detail {

inline std::string opt(const std::optional<double>& v) { return v ? text::fixed(*v, 6) : "NA"; }

inline std::string pct_label(double p) {
  auto s = text::fmt(p);
  std::replace(s.begin(), s.end(), '.', '_');
  return "qos_reduction_p" + s;
}

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  return out;
}

}  // namespace detail

/// Runs every policy against Random for each home ISP over T(A) and writes
///   report.csv        policy,isp_id,internal_kbps,peering_kbps,transit_kbps,
///                     transit_reduction,qos_reduction_p...
///   torrents.csv      per-torrent scope breakdown
///   unlocalizable.csv transit concentration curves
///   edges.csv         overlay edge lists (when enabled)
inline ExperimentResult run(const ExperimentConfig& c) {
  c.validate();
  const auto data = prepare_data(c);
  const Dataset& d = data.dataset;
  const auto policies = all_policies(c);

  ExperimentResult res;
  for (const auto& p : policies) res.policies.push_back(p.name);
  res.home_isps = c.home_isps.empty() ? top_isps(d, c.top_n) : c.home_isps;

  std::set<std::string> needed;
  for (const auto& isp : res.home_isps) {
    if (!d.has_isp(isp)) {
      res.warnings.push_back("isp '" + isp + "' has no torrents; its report is empty");
      continue;
    }
    for (const auto& [tid, _] : d.torrents_of(isp)) needed.insert(tid);
  }
  std::map<std::string, TorrentRun> runs;
  for (const auto& tid : needed) runs.emplace(tid, run_torrent(d.torrent(tid), policies, c));

  for (const auto& isp : res.home_isps) {
    std::vector<TrafficReport> per_policy(policies.size());
    for (std::size_t pi = 0; pi < policies.size(); ++pi) {
      per_policy[pi].home_isp = isp;
      if (!d.has_isp(isp)) continue;
      for (const auto& [tid, _] : d.torrents_of(isp))
        accumulate(per_policy[pi], runs.at(tid).traffic[pi].matrix, d.torrent(tid), d.geo());
    }
    for (std::size_t pi = 0; pi < policies.size(); ++pi) {
      PolicyReport r;
      r.policy = policies[pi].name;
      r.transit_reduction = transit_reduction(per_policy[pi], per_policy[0]);
      for (double pct : c.percentiles)
        r.qos_reduction.push_back(
            qos_reduction(per_policy[pi].leecher_download_kbps, per_policy[0].leecher_download_kbps, pct));
      r.unlocalizable = unlocalizable_analysis(per_policy[pi], c.unlocalizable_threshold);
      r.traffic = per_policy[pi];  // per_policy[0] is still the baseline
      res.reports.push_back(std::move(r));
    }
  }

  namespace fs = std::filesystem;
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);
  {
    auto out = detail::open_output(dir / "report.csv");
    out << "policy,isp_id,internal_kbps,peering_kbps,transit_kbps,transit_reduction";
    for (double p : c.percentiles) out << ',' << detail::pct_label(p);
    out << '\n';
    for (const auto& r : res.reports) {
      const auto& t = r.traffic.totals;
      out << r.policy << ',' << r.traffic.home_isp << ',' << text::fixed(t.internal_kbps) << ','
          << text::fixed(t.peering_kbps) << ',' << text::fixed(t.transit_kbps) << ','
          << detail::opt(r.transit_reduction);
      for (const auto& q : r.qos_reduction) out << ',' << detail::opt(q);
      out << '\n';
    }
    res.files.push_back((dir / "report.csv").string());
  }
  {
    auto out = detail::open_output(dir / "torrents.csv");
    out << "policy,isp_id,torrent_id,home_nodes,internal_kbps,peering_kbps,transit_kbps\n";
    for (const auto& r : res.reports)
      for (const auto& t : r.traffic.torrents)
        out << r.policy << ',' << r.traffic.home_isp << ',' << t.torrent_id << ',' << t.home_nodes << ','
            << text::fixed(t.totals.internal_kbps) << ',' << text::fixed(t.totals.peering_kbps) << ','
            << text::fixed(t.totals.transit_kbps) << '\n';
    res.files.push_back((dir / "torrents.csv").string());
  }
  {
    auto out = detail::open_output(dir / "unlocalizable.csv");
    out << "policy,isp_id,node_share,transit_share\n";
    for (const auto& r : res.reports)
      for (const auto& [ns, ts] : r.unlocalizable.points)
        out << r.policy << ',' << r.traffic.home_isp << ',' << text::fixed(ns) << ',' << text::fixed(ts) << '\n';
    res.files.push_back((dir / "unlocalizable.csv").string());
  }
  if (c.write_edges) {
    auto out = detail::open_output(dir / "edges.csv");
    out << "policy,torrent_id,peer_a,peer_b,scope\n";
    for (const auto& [tid, run] : runs) {
      const auto& t = d.torrent(tid);
      for (std::size_t pi = 0; pi < policies.size(); ++pi) {
        std::ostringstream rows;
        write_edges(rows, run.graphs[pi], t);
        std::istringstream lines(rows.str());
        for (std::string line; std::getline(lines, line);) out << policies[pi].name << ',' << line << '\n';
      }
    }
    res.files.push_back((dir / "edges.csv").string());
  }
  return res;
}

/// Speed-agnostic bounds for the top-N ISPs by |V(A)|. Writes bounds.csv and
/// the per-torrent contributions to bounds_detail.csv.
inline std::vector<IspBoundsReport> bounds_sweep(const ExperimentConfig& c, std::vector<std::string>* files = nullptr) {
  c.validate();
  Dataset d;
  if (c.synthetic) {
    d = generate_world(*c.synthetic, c.seed).dataset;
  } else {
    d = load_demographics(c.demographics_path);
  }
  const auto isps = c.home_isps.empty() ? top_isps(d, c.top_n) : c.home_isps;
  std::vector<IspBoundsReport> reports;
  for (const auto& isp : isps) reports.push_back(isp_bounds(d, isp, c.chunk));

  namespace fs = std::filesystem;
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);
  auto out = detail::open_output(dir / "bounds.csv");
  out << "isp_id,clients,random_sparse,random_dense,locality_sparse,locality_dense,improvement_sparse,"
         "improvement_dense\n";
  for (const auto& r : reports)
    out << r.isp_id << ',' << d.isp_population(r.isp_id) << ',' << text::fixed(r.random_sparse) << ','
        << text::fixed(r.random_dense) << ',' << text::fixed(r.locality_sparse) << ','
        << text::fixed(r.locality_dense) << ',' << detail::opt(r.improvement(Mode::Sparse)) << ','
        << detail::opt(r.improvement(Mode::Dense)) << '\n';
  auto detail_out = detail::open_output(dir / "bounds_detail.csv");
  detail_out << "isp_id,torrent_id,torrent_size,local_size,weight,random_sparse,random_dense,locality_sparse,"
                "locality_dense\n";
  for (const auto& r : reports)
    for (const auto& t : r.torrents)
      detail_out << r.isp_id << ',' << t.torrent_id << ',' << t.inputs.torrent_size << ',' << t.inputs.local_size
                 << ',' << text::fixed(t.weight) << ',' << text::fixed(t.random_sparse) << ','
                 << text::fixed(t.random_dense) << ',' << text::fixed(t.locality_sparse) << ','
                 << text::fixed(t.locality_dense) << '\n';
  if (files) {
    files->push_back((dir / "bounds.csv").string());
    files->push_back((dir / "bounds_detail.csv").string());
  }
  return reports;
}

}  // namespace swarmloc
