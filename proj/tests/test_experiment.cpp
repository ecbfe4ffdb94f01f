#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "swarmloc/experiment.hpp"

using namespace swarmloc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("swarmloc_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig parse(const std::string& text, const fs::path& base = {}) {
  std::istringstream in(text);
  return parse_config(in, base);
}

ExperimentConfig synthetic_config(const fs::path& out) {
  auto c = parse(
      "[synthetic]\ntorrents = 40\nsizes = powerlaw:1.8:2:200\nisps = 6\ncountries = 2\n"
      "[experiment]\ntop_n = 3\nseed = 17\n");
  c.output_dir = out.string();
  return c;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST(Config, ParsesAllSections) {
  auto c = parse(
      "; comment\n[data]\ndemographics = d.csv\nspeeds = /abs/s.csv\n"
      "[experiment]\nhome_isps = AS1, AS2\npolicies = loif, family(0.5,2), strict(3), random\n"
      "seeder_policy = uniform\npercentiles = 10,50\nseed = 99\nW = 30\nk = 5\noutput = out\n",
      "/base");
  EXPECT_EQ(c.demographics_path, "/base/d.csv");
  EXPECT_EQ(c.speeds_path, "/abs/s.csv");
  EXPECT_EQ(c.output_dir, "/base/out");
  EXPECT_EQ(c.home_isps, (std::vector<std::string>{"AS1", "AS2"}));
  ASSERT_EQ(c.policies.size(), 3u);
  EXPECT_EQ(c.policies[1].delta, 0.5);
  EXPECT_EQ(c.policies[1].mu, std::optional<std::size_t>(2));
  EXPECT_EQ(c.policies[2].mu, std::optional<std::size_t>(3));
  EXPECT_EQ(c.seeder_policy, SeederPolicy::Uniform);
  EXPECT_EQ(c.percentiles, (std::vector<double>{10, 50}));
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.chunk.neighborhood, 30u);
  EXPECT_EQ(c.chunk.regular_slots, 5u);
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse("[experiment]\nseed = 1\n"), validation_error);  // no data
  EXPECT_THROW(parse("[data]\ndemographics=a\nspeeds=b\n[experiment]\nsed = 1\n"), validation_error);
  EXPECT_THROW(parse("[data]\ndemographics=a\nspeeds=b\n[extra]\nx = 1\n"), validation_error);
  EXPECT_THROW(parse("[data]\ndemographics=a\nspeeds=b\n[experiment]\nW = 4\n"), validation_error);
  EXPECT_THROW(parse("[data]\ndemographics=a\nspeeds=b\n[experiment]\npolicies = nearest\n"), validation_error);
  EXPECT_THROW(parse("[data]\ndemographics=a\nspeeds=b\n[experiment]\nseed = -3\n"), validation_error);
  EXPECT_THROW(parse("[data]\ndemographics=a\nspeeds=b\n[experiment]\npercentiles = 5,150\n"), validation_error);
  EXPECT_THROW(parse("[synthetic]\nsizes = lognormal:1\n"), validation_error);
  EXPECT_THROW(parse("this is not ini"), validation_error);
}

TEST(TopIsps, RanksByClientsThenId) {
  std::istringstream in("T1,a,B,US\nT1,b,B,US\nT1,c,A,US\nT2,d,A,US\nT2,e,C,US\n");
  auto d = parse_demographics(in);
  EXPECT_EQ(top_isps(d, 10), (std::vector<std::string>{"A", "B", "C"}));
  EXPECT_EQ(top_isps(d, 1), (std::vector<std::string>{"A"}));
}

TEST(Run, RandomOnlyHasZeroReduction) {
  auto dir = scratch("random_only");
  auto c = synthetic_config(dir);
  c.policies.clear();
  auto r = run(c);
  ASSERT_EQ(r.reports.size(), 3u);
  for (const auto& rep : r.reports) {
    EXPECT_EQ(rep.policy, "random");
    if (rep.transit_reduction) {
      EXPECT_EQ(*rep.transit_reduction, 0.0);
    }
    for (const auto& q : rep.qos_reduction)
      if (q) {
        EXPECT_EQ(*q, 0.0);
      }
  }
}

TEST(Run, DeterministicFilesAndStableSchema) {
  auto a = scratch("det_a"), b = scratch("det_b");
  auto ra = run(synthetic_config(a));
  run(synthetic_config(b));
  ASSERT_EQ(ra.files.size(), 3u);
  for (const auto& f : ra.files) {
    const auto name = fs::path(f).filename();
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  const auto report = slurp(a / "report.csv");
  EXPECT_EQ(report.substr(0, report.find('\n')),
            "policy,isp_id,internal_kbps,peering_kbps,transit_kbps,transit_reduction,qos_reduction_p5,"
            "qos_reduction_p25,qos_reduction_p50,qos_reduction_p75,qos_reduction_p95");
  auto c = synthetic_config(scratch("det_c"));
  c.seed = 18;
  run(c);
  EXPECT_NE(slurp(a / "report.csv"), slurp(fs::path(c.output_dir) / "report.csv"));
}

TEST(Run, QosDefinedForEveryPolicy) {
  auto c = synthetic_config(scratch("qos"));
  for (const auto& rep : run(c).reports) {
    if (rep.traffic.leecher_download_kbps.empty()) continue;
    for (const auto& q : rep.qos_reduction) EXPECT_TRUE(q.has_value()) << rep.policy;
  }
}

TEST(Run, CommonRandomNumbersAcrossPolicies) {
  // Running a policy alone or next to others yields the same rows.
  auto c = synthetic_config(scratch("crn_all"));
  auto all = run(c);
  auto single = c;
  single.output_dir = scratch("crn_single").string();
  single.policies = {OverlayPolicy::strict()};
  auto one = run(single);
  auto rows = [](const ExperimentResult& r, const std::string& policy) {
    std::vector<double> out;
    for (const auto& rep : r.reports)
      if (rep.policy == policy) out.push_back(rep.traffic.totals.transit_kbps);
    return out;
  };
  EXPECT_EQ(rows(all, "strict"), rows(one, "strict"));
  EXPECT_EQ(rows(all, "random"), rows(one, "random"));
}

TEST(Run, UnknownHomeIspWarnsAndReportsEmpty) {
  auto c = synthetic_config(scratch("unknown_isp"));
  c.home_isps = {"AS99999"};
  auto r = run(c);
  ASSERT_EQ(r.warnings.size(), 1u);
  ASSERT_EQ(r.reports.size(), c.policies.size() + 1);
  for (const auto& rep : r.reports) {
    EXPECT_EQ(rep.traffic.totals.total(), 0.0);
    EXPECT_FALSE(rep.transit_reduction);
  }
  EXPECT_NE(slurp(fs::path(c.output_dir) / "report.csv").find("AS99999,0.000000,0.000000,0.000000,NA"),
            std::string::npos);
}

TEST(Run, MissingSpeedsFailFast) {
  auto dir = scratch("missing_speeds");
  write_file(dir / "d.csv", "T1,a,AS1,US\nT1,b,AS2,US\nT1,c,AS3,DE\n");
  write_file(dir / "s.csv", "AS1,100\n");
  write_file(dir / "c.ini", "[data]\ndemographics = d.csv\nspeeds = s.csv\n[experiment]\noutput = out\n");
  auto c = load_config((dir / "c.ini").string());
  try {
    run(c);
    FAIL();
  } catch (const validation_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("AS2"), std::string::npos);
    EXPECT_NE(msg.find("AS3"), std::string::npos);
  }
}

TEST(Run, FileInputsWithRatiosAndEdges) {
  auto dir = scratch("files");
  write_file(dir / "d.csv", "T1,a,AS1,US\nT1,b,AS1,US\nT1,c,AS2,DE\nT1,d,AS3,US\nT2,e,AS1,US\nT2,f,AS2,DE\n");
  write_file(dir / "s.csv", "AS1,1000\nAS2,1200\nAS3,900\n");
  write_file(dir / "r.csv", "T1,1,3\nT2,0,1\n");
  write_file(dir / "c.ini",
             "[data]\ndemographics = d.csv\nspeeds = s.csv\nratios = r.csv\n"
             "[experiment]\nhome_isps = AS1\nW = 10\nedges = true\noutput = out\n");
  auto r = run(load_config((dir / "c.ini").string()));
  EXPECT_EQ(r.files.size(), 4u);
  EXPECT_TRUE(fs::exists(dir / "out" / "edges.csv"));
  EXPECT_EQ(r.reports.size(), 4u);
}

TEST(BoundsSweep, TopNAndTies) {
  auto dir = scratch("bounds");
  auto c = synthetic_config(dir);
  c.top_n = 1000;
  auto all = bounds_sweep(c);
  EXPECT_EQ(all.size(), 6u);
  c.top_n = 2;
  auto two = bounds_sweep(c);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].isp_id, all[0].isp_id);
  const auto csv = slurp(dir / "bounds.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "isp_id,clients,random_sparse,random_dense,locality_sparse,locality_dense,improvement_sparse,"
            "improvement_dense");

  auto single = scratch("bounds_single");
  write_file(single / "d.csv", "T1,a,AS1,US\nT1,b,AS1,US\n");
  write_file(single / "s.csv", "AS1,1000\n");
  write_file(single / "c.ini", "[data]\ndemographics = d.csv\nspeeds = s.csv\n[experiment]\ntop_n = 1\nW = 10\n"
                               "output = out\n");
  auto one = bounds_sweep(load_config((single / "c.ini").string()));
  ASSERT_EQ(one.size(), 1u);
  EXPECT_DOUBLE_EQ(one[0].locality_sparse, 0.25);
}
