#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>
#include <sstream>

#include "swarmloc/bounds.hpp"

using namespace swarmloc;

namespace {

// Exact binomial coefficient, fine for n <= 60.
unsigned __int128 choose(int n, int r) {
  if (r < 0 || r > n) return 0;
  unsigned __int128 c = 1;
  for (int i = 1; i <= r; ++i) c = c * static_cast<unsigned>(n - r + i) / static_cast<unsigned>(i);
  return c;
}

double exact_pmf(int x, int N, int K, int n) {
  return static_cast<double>(static_cast<long double>(choose(K, x)) * static_cast<long double>(choose(N - K, n - x)) /
                             static_cast<long double>(choose(N, n)));
}

// Distribution of local draws by enumerating every subset of size n.
std::vector<double> enumerate_draws(int N, int K, int n) {
  std::vector<double> counts(static_cast<std::size_t>(n + 1), 0.0);
  double total = 0;
  for (unsigned mask = 0; mask < (1u << N); ++mask) {
    if (std::popcount(mask) != n) continue;
    const int locals = std::popcount(mask & ((1u << K) - 1));
    counts[static_cast<std::size_t>(locals)] += 1;
    total += 1;
  }
  for (auto& c : counts) c /= total;
  return counts;
}

}  // namespace

TEST(Hypergeometric, SpecValues) {
  EXPECT_NEAR(hypergeom_pmf(2, 4, 2, 2), 1.0 / 6.0, 1e-15);
  EXPECT_DOUBLE_EQ(hypergeom_pmf(0, 10, 0, 5), 1.0);
  EXPECT_DOUBLE_EQ(hypergeom_pmf(3, 10, 2, 5), 0.0);
}

TEST(Hypergeometric, MatchesSubsetEnumeration) {
  for (int N = 1; N <= 12; ++N)
    for (int K = 0; K <= N; ++K)
      for (int n = 0; n <= N; ++n) {
        const auto ref = enumerate_draws(N, K, n);
        for (int x = 0; x <= n; ++x)
          EXPECT_NEAR(hypergeom_pmf(x, N, K, n), ref[static_cast<std::size_t>(x)], 1e-13)
              << N << ' ' << K << ' ' << n << ' ' << x;
      }
}

TEST(Hypergeometric, MatchesExactBinomials) {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 300; ++trial) {
    const int N = 1 + static_cast<int>(gen() % 60);
    const int K = static_cast<int>(gen() % static_cast<unsigned>(N + 1));
    const int n = static_cast<int>(gen() % static_cast<unsigned>(N + 1));
    for (int x = 0; x <= n; ++x) {
      const double e = exact_pmf(x, N, K, n);
      EXPECT_NEAR(hypergeom_pmf(x, N, K, n), e, 1e-12 + 1e-10 * e);
    }
  }
}

TEST(Hypergeometric, NormalizedForLargePopulations) {
  for (std::int64_t N : {1000, 100000, 1000000}) {
    Hypergeometric h(N, N / 3, 40);
    double s = 0;
    for (auto x = h.support_min(); x <= h.support_max(); ++x) s += h.pmf(x);
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_NEAR(h.expect([](std::int64_t x) { return double(x); }), h.mean(), 1e-9);
  }
  Hypergeometric wide(1000000, 500000, 200000);
  double s = 0;
  for (auto x = wide.support_min(); x <= wide.support_max(); ++x) s += wide.pmf(x);
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Hypergeometric, DomainErrors) {
  EXPECT_THROW(hypergeom_pmf(0, 5, 6, 1), std::domain_error);
  EXPECT_THROW(hypergeom_pmf(0, 5, 1, 6), std::domain_error);
  EXPECT_THROW(hypergeom_pmf(0, -1, 0, 0), std::domain_error);
}

TEST(RandomSparse, Examples) {
  EXPECT_DOUBLE_EQ(expected_local_random_sparse({21, 1, 10, 4}), 0.0);
  // x <= 4 over the whole support, so min(x,k) = x and the value is the mean.
  EXPECT_NEAR(expected_local_random_sparse({21, 5, 10, 4}), 10.0 * 4.0 / 20.0, 1e-12);
  EXPECT_NEAR(expected_local_random_sparse({11, 11, 10, 4}), 4.0, 1e-12);
}

TEST(RandomSparse, MatchesEnumeratedNeighborhoods) {
  // Direct sum over every possible W-subset of the other peers.
  for (int n = 2; n <= 13; ++n)
    for (int l = 1; l <= n; ++l)
      for (std::size_t W : {2u, 3u, 6u}) {
        const std::size_t k = 1 + (W - 1) / 2;
        const int draws = std::min<int>(static_cast<int>(W), n - 1);
        const auto dist = enumerate_draws(n - 1, l - 1, draws);
        double ref = 0;
        for (std::size_t x = 0; x < dist.size(); ++x) ref += double(std::min(x, k)) * dist[x];
        BoundInputs b{std::size_t(n), std::size_t(l), W, k};
        EXPECT_NEAR(expected_local_random_sparse(b), ref, 1e-12);
      }
}

TEST(RandomDense, Examples) {
  EXPECT_NEAR(expected_local_random_dense({21, 5, 10, 4}), 0.8, 1e-12);
  EXPECT_DOUBLE_EQ(expected_local_random_dense({21, 1, 10, 4}), 0.0);
  EXPECT_NEAR(expected_local_random_dense({11, 11, 10, 4}), 4.0, 1e-12);
}

TEST(RandomDense, AgreesWithClosedForm) {
  std::mt19937_64 gen(7);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 12 + gen() % 2000, l = 1 + gen() % n, W = 11 + gen() % 30, k = 1 + gen() % 10;
    if (n - 1 < W) continue;
    BoundInputs b{n, l, W, k};
    EXPECT_NEAR(expected_local_random_dense(b), random_dense_closed_form(b), 1e-9 * (1 + random_dense_closed_form(b)));
  }
}

TEST(Locality, Examples) {
  EXPECT_DOUBLE_EQ(expected_local_locality({21, 5, 10, 4}, Mode::Sparse), 4.0);
  EXPECT_NEAR(expected_local_locality({21, 5, 10, 4}, Mode::Dense), 1.6, 1e-12);
  EXPECT_DOUBLE_EQ(expected_local_locality({21, 1, 10, 4}, Mode::Sparse), 0.0);
  EXPECT_DOUBLE_EQ(expected_local_locality({21, 1, 10, 4}, Mode::Dense), 0.0);
}

TEST(SparseCondition, Examples) {
  EXPECT_TRUE(sparse_condition_holds({21, 9, 10, 4}));
  EXPECT_FALSE(sparse_condition_holds({21, 8, 10, 4}));
  EXPECT_FALSE(sparse_condition_holds({21, 1, 10, 4}));
  EXPECT_TRUE(sparse_condition_holds({8, 8, 10, 4}));
}

TEST(ImprovementFactor, Examples) {
  EXPECT_NEAR(improvement_factor({21, 5, 10, 4}, Mode::Sparse), 2.0, 1e-12);
  EXPECT_NEAR(improvement_factor({21, 5, 10, 4}, Mode::Dense), 2.0, 1e-12);
  EXPECT_THROW(improvement_factor({21, 4, 10, 4}, Mode::Sparse), std::domain_error);
  EXPECT_THROW(improvement_factor({10, 8, 10, 4}, Mode::Dense), std::domain_error);
}

TEST(ImprovementFactor, Properties) {
  std::mt19937_64 gen(99);
  int checked_sparse = 0;
  for (int i = 0; i < 2000; ++i) {
    const std::size_t W = 5 + gen() % 40, k = 1 + gen() % std::min<std::size_t>(W - 1, 6);
    const std::size_t n = W + 1 + gen() % 500, l = k + 1 + gen() % (n - k);
    BoundInputs b{n, l, W, k};
    const double fs = improvement_factor(b, Mode::Sparse), fd = improvement_factor(b, Mode::Dense);
    EXPECT_GE(fs, 1.0 - 1e-12);
    EXPECT_GE(fd, 1.0 - 1e-12);
    EXPECT_GE(fd, fs - 1e-12);
    // Dense: the factor is exactly the ratio of the two expectations.
    const double ratio_d = expected_local_locality(b, Mode::Dense) / expected_local_random_dense(b);
    EXPECT_NEAR(fd, ratio_d, 1e-9 * ratio_d);
    // Sparse: exact only while min(x,k) never binds and the mean stays below k.
    if (std::min(W, l - 1) <= k) {
      const double ratio_s = expected_local_locality(b, Mode::Sparse) / expected_local_random_sparse(b);
      EXPECT_NEAR(fs, ratio_s, 1e-9 * ratio_s);
      ++checked_sparse;
    }
  }
  EXPECT_GT(checked_sparse, 10);
}

TEST(BoundsProperties, OrderingsAndRange) {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 3000; ++i) {
    const std::size_t W = 2 + gen() % 50, k = 1 + gen() % (W - 1);
    const std::size_t n = 1 + gen() % 300, l = 1 + gen() % n;
    BoundInputs b{n, l, W, k};
    const double rs = expected_local_random_sparse(b), rd = expected_local_random_dense(b);
    const double ls = expected_local_locality(b, Mode::Sparse), ld = expected_local_locality(b, Mode::Dense);
    for (double v : {rs, rd, ls, ld}) {
      EXPECT_GE(v, -1e-12);
      EXPECT_LE(v, double(k) + 1e-9);
    }
    EXPECT_GE(rs, rd - 1e-9);
    EXPECT_GE(ls, ld - 1e-9);
    EXPECT_GE(ls, rs - 1e-9);
    EXPECT_GE(ld, rd - 1e-9);
  }
}

TEST(BoundsProperties, MonteCarloSmallSample) {
  std::mt19937_64 gen(3);
  for (BoundInputs b : {BoundInputs{60, 12, 10, 4}, BoundInputs{200, 30, 40, 4}, BoundInputs{15, 9, 40, 5}}) {
    const std::size_t others = b.torrent_size - 1, draws = b.draws();
    std::vector<int> pool(others);
    for (std::size_t i = 0; i < others; ++i) pool[i] = i < b.local_size - 1;
    double sparse = 0, dense = 0;
    const int trials = 200000;
    for (int t = 0; t < trials; ++t) {
      int locals = 0;
      for (std::size_t j = 0; j < draws; ++j) {
        std::swap(pool[j], pool[j + gen() % (others - j)]);
        locals += pool[j];
      }
      sparse += std::min<double>(locals, double(b.k));
      dense += double(b.effective_k()) * locals / double(draws);
    }
    EXPECT_NEAR(sparse / trials, expected_local_random_sparse(b), 0.01 * expected_local_random_sparse(b));
    EXPECT_NEAR(dense / trials, expected_local_random_dense(b), 0.01 * expected_local_random_dense(b));
  }
}

TEST(IspBounds, SingleTorrentWeightOne) {
  std::istringstream in("T1,a,A,US\nT1,b,A,US\nT1,c,B,US\nT1,d,B,US\nT1,e,B,US\n");
  auto d = parse_demographics(in);
  ChunkParams p;
  p.neighborhood = 10;
  auto r = isp_bounds(d, "A", p);
  ASSERT_EQ(r.torrents.size(), 1u);
  EXPECT_DOUBLE_EQ(r.torrents[0].weight, 1.0);
  EXPECT_NEAR(r.random_sparse, expected_local_random_sparse({5, 2, 10, 4}) / 4.0, 1e-15);
  EXPECT_NEAR(r.locality_dense, expected_local_locality({5, 2, 10, 4}, Mode::Dense) / 4.0, 1e-15);
}

TEST(IspBounds, HandWeightedAggregate) {
  // 6 clients of A in a torrent of 10 (Locality-Sparse value 4) and 2 lone
  // clients elsewhere (value 0): weights 0.75 and 0.25.
  std::ostringstream text;
  for (int i = 0; i < 6; ++i) text << "T1,a" << i << ",A,US\n";
  for (int i = 0; i < 4; ++i) text << "T1,b" << i << ",B,US\n";
  text << "T2,x,A,US\nT2,y,B,US\nT3,z,A,US\n";
  std::istringstream in(text.str());
  auto d = parse_demographics(in);
  auto r = isp_bounds(d, "A", ChunkParams{});
  EXPECT_NEAR(r.locality_sparse, 0.75 * 4.0 / 4.0 + 0.25 * 0.0, 1e-15);
  EXPECT_THROW(isp_bounds(d, "Z", ChunkParams{}), validation_error);
}

TEST(IspBounds, LocalityDominatesOnRandomDatasets) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SyntheticSpec spec;
    spec.torrent_count = 20;
    spec.sizes = PowerLawSize{1.8, 2, 300};
    spec.isp_count = 5;
    auto d = generate_synthetic(spec, seed);
    for (const auto& [isp, _] : d.isp_index()) {
      auto r = isp_bounds(d, isp, ChunkParams{});
      EXPECT_GE(r.locality_dense, r.random_dense - 1e-12);
      EXPECT_GE(r.locality_sparse, r.random_sparse - 1e-12);
      EXPECT_GE(r.random_sparse, r.random_dense - 1e-12);
      EXPECT_LE(r.locality_sparse, 1.0 + 1e-12);
    }
  }
}
