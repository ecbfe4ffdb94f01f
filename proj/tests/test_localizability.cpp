#include <gtest/gtest.h>

#include <sstream>

#include "swarmloc/localizability.hpp"

using namespace swarmloc;

namespace {

struct World {
  Dataset d;
  SpeedModel s;
};

// Torrent "T" with the given (isp, peer count, speed) groups.
World make(const std::vector<std::tuple<std::string, int, double>>& groups) {
  std::ostringstream text;
  World w;
  int id = 0;
  for (const auto& [isp, n, speed] : groups) {
    for (int i = 0; i < n; ++i) text << "T,p" << id++ << ',' << isp << ",US\n";
    w.s.per_isp_median_kbps[isp] = speed;
  }
  std::istringstream in(text.str());
  w.d = parse_demographics(in);
  return w;
}

// Independent evaluation of the definition.
double reference(const World& w, const std::string& tid, const std::string& isp, double ua, double q) {
  std::map<std::string, int> counts;
  for (const auto& p : w.d.torrent(tid).peers) ++counts[p.isp_id];
  double den = 0;
  for (const auto& [other, n] : counts) {
    const double u = w.s.per_isp_median_kbps.at(other);
    if (other == isp || (u >= ua * (1 - q) && u <= ua * (1 + q))) den += n;
  }
  return counts.at(isp) / den;
}

}  // namespace

TEST(Indicator, BandIsInclusive) {
  EXPECT_EQ(indicator(1000, 1000, 0), 1);
  EXPECT_EQ(indicator(1000, 1250, 0.25), 1);
  EXPECT_EQ(indicator(1000, 1251, 0.25), 0);
  EXPECT_EQ(indicator(1000, 750, 0.25), 1);
  EXPECT_EQ(indicator(1000, 749, 0.25), 0);
  EXPECT_EQ(indicator(1000, 2000, 1.0), 1);
}

TEST(TorrentLocalizability, ThreeIspExample) {
  auto w = make({{"A", 10, 1000}, {"B", 30, 1100}, {"C", 60, 2000}});
  EXPECT_DOUBLE_EQ(torrent_localizability(w.d, w.s, "T", {"A", 0.25}), 0.25);
  EXPECT_DOUBLE_EQ(torrent_localizability(w.d, w.s, "T", {"A", 1.0}), 0.10);
}

TEST(TorrentLocalizability, SingleIspIsOne) {
  auto w = make({{"A", 7, 500}});
  EXPECT_EQ(torrent_localizability(w.d, w.s, "T", {"A", 0.25}), 1.0);
  EXPECT_EQ(torrent_localizability(w.d, w.s, "T", {"A", 1.0}), 1.0);
}

TEST(TorrentLocalizability, AbsentIspIsError) {
  auto w = make({{"A", 3, 500}, {"B", 2, 500}});
  w.s.per_isp_median_kbps["Z"] = 1;
  EXPECT_THROW(torrent_localizability(w.d, w.s, "T", {"Z", 0.25}), validation_error);
  EXPECT_THROW(torrent_localizability(w.d, w.s, "T", {"A", 1.5}), validation_error);
}

TEST(IspLocalizability, HandWeighted) {
  // T1: 10 A-peers alone (value 1). T2: 30 A-peers and 30 in-band B-peers (value 0.5).
  std::ostringstream text;
  for (int i = 0; i < 10; ++i) text << "T1,a" << i << ",A,US\n";
  for (int i = 0; i < 30; ++i) text << "T2,a" << i << ",A,US\nT2,b" << i << ",B,US\n";
  std::istringstream in(text.str());
  auto d = parse_demographics(in);
  SpeedModel s;
  s.per_isp_median_kbps = {{"A", 1000}, {"B", 1000}};
  EXPECT_DOUBLE_EQ(isp_localizability(d, s, {"A", 0.25}), 0.625);
}

TEST(IspLocalizability, MatchesReferenceAndBounds) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SyntheticSpec spec;
    spec.torrent_count = 15;
    spec.isp_count = 6;
    auto world = generate_world(spec, seed);
    World w{world.dataset, world.speeds};
    for (const auto& [isp, torrents] : w.d.isp_index()) {
      double prev = 2.0, lo = 1.0, hi = 0.0;
      for (double q : {0.0, 0.1, 0.25, 0.5, 0.75, 1.0}) {
        const double v = isp_localizability(w.d, w.s, {isp, q});
        EXPECT_LE(v, prev + 1e-15);  // non-increasing in q
        prev = v;
        EXPECT_GT(v, 0.0);
        EXPECT_LE(v, 1.0 + 1e-12);  // weighted sum may round past 1
      }
      double agg = 0;
      const double total = double(w.d.isp_population(isp));
      for (const auto& [tid, n] : torrents) {
        const double ref = reference(w, tid, isp, w.s.isp_speed(isp), 0.25);
        EXPECT_DOUBLE_EQ(torrent_localizability(w.d, w.s, tid, {isp, 0.25}), ref);
        agg += n / total * ref;
        lo = std::min(lo, ref);
        hi = std::max(hi, ref);
      }
      const double v = isp_localizability(w.d, w.s, {isp, 0.25});
      EXPECT_NEAR(v, agg, 1e-12);
      EXPECT_GE(v, lo - 1e-12);
      EXPECT_LE(v, hi + 1e-12);
    }
  }
}

TEST(SpeedSweep, IdentityAtCurrentSpeed) {
  auto w = make({{"A", 10, 1000}, {"B", 30, 1100}, {"C", 60, 2000}});
  auto curve = speed_sweep(w.d, w.s, "A", 0.25, {1000});
  ASSERT_EQ(curve.size(), 1u);
  EXPECT_DOUBLE_EQ(curve[0].second, isp_localizability(w.d, w.s, {"A", 0.25}));
}

TEST(SpeedSweep, DropsWhenRemoteEntersBand) {
  auto w = make({{"A", 10, 700}, {"B", 10, 1000}});
  auto curve = speed_sweep(w.d, w.s, "A", 0.25, {500, 1000});
  EXPECT_DOUBLE_EQ(curve[0].second, 1.0);
  EXPECT_DOUBLE_EQ(curve[1].second, 0.5);
}

TEST(SpeedSweep, ConstantWhenSaturated) {
  auto w = make({{"A", 10, 700}, {"B", 10, 900}, {"C", 5, 1000}});
  auto curve = speed_sweep(w.d, w.s, "A", 1.0, linear_grid(500, 3000, 11));
  for (const auto& [speed, v] : curve) EXPECT_DOUBLE_EQ(v, curve[0].second);
}

TEST(SpeedSweep, GridValidation) {
  EXPECT_EQ(linear_grid(100, 200, 3), (std::vector<double>{100, 150, 200}));
  EXPECT_THROW(linear_grid(0, 10, 2), validation_error);
  EXPECT_THROW(linear_grid(10, 5, 2), validation_error);
}

TEST(TopTorrents, RanksByLocalOrGlobalSize) {
  std::istringstream in(
      "T1,a,A,US\nT1,b,A,US\n"
      "T2,c,A,US\nT2,d,B,US\nT2,e,B,US\nT2,f,B,US\n"
      "T3,g,A,US\nT3,h,A,US\n");
  auto d = parse_demographics(in);
  EXPECT_EQ(top_torrents(d, "A", TorrentScope::Local, 2), (std::vector<std::string>{"T1", "T3"}));
  EXPECT_EQ(top_torrents(d, "A", TorrentScope::Global, 1), (std::vector<std::string>{"T2"}));
  auto f = filter_torrents(d, {"T2"});
  EXPECT_EQ(f.torrents().size(), 1u);
}
