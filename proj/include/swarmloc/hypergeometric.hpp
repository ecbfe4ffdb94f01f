#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace swarmloc {

/// Hypergeometric law: number of successes in `draws` draws without
/// replacement from `population` items of which `successes` are successes.
///
/// The pmf is built over the whole support with the ratio recurrence
///   p(x+1)/p(x) = (K-x)(n-x) / ((x+1)(N-K-n+x+1)),
/// started from the mode with weight 1 and normalized at the end. This never
/// forms a factorial, stays well inside double range for populations in the
/// millions, and sums to one up to rounding.
class Hypergeometric {
 public:
  Hypergeometric(std::int64_t population, std::int64_t successes, std::int64_t draws)
      : population_(population), successes_(successes), draws_(draws) {
    if (population < 0 || successes < 0 || draws < 0 || successes > population || draws > population)
      throw std::domain_error("hypergeometric: need 0 <= successes, draws <= population (got N=" +
                              std::to_string(population) + ", K=" + std::to_string(successes) +
                              ", n=" + std::to_string(draws) + ")");
    lo_ = std::max<std::int64_t>(0, draws - (population - successes));
    hi_ = std::min(draws, successes);
    build();
  }

  std::int64_t support_min() const { return lo_; }
  std::int64_t support_max() const { return hi_; }

  double pmf(std::int64_t x) const {
    if (x < lo_ || x > hi_) return 0.0;
    return pmf_[static_cast<std::size_t>(x - lo_)];
  }

  double mean() const {
    return population_ == 0 ? 0.0
                            : static_cast<double>(draws_) * static_cast<double>(successes_) /
                                  static_cast<double>(population_);
  }

  /// E[f(X)] by summation over the support.
  template <typename Fn>
  double expect(Fn&& f) const {
    double s = 0.0;
    for (std::int64_t x = lo_; x <= hi_; ++x) s += f(x) * pmf_[static_cast<std::size_t>(x - lo_)];
    return s;
  }

 private:
  double ratio(std::int64_t x) const {  // p(x+1)/p(x)
    const double K = static_cast<double>(successes_), n = static_cast<double>(draws_),
                 N = static_cast<double>(population_), xd = static_cast<double>(x);
    return (K - xd) * (n - xd) / ((xd + 1.0) * (N - K - n + xd + 1.0));
  }

  void build() {
    const auto len = static_cast<std::size_t>(hi_ - lo_ + 1);
    pmf_.assign(len, 0.0);
    // Mode of the hypergeometric law, clamped to the support.
    const double m = (static_cast<double>(draws_) + 1.0) * (static_cast<double>(successes_) + 1.0) /
                     (static_cast<double>(population_) + 2.0);
    const std::int64_t mode = std::clamp<std::int64_t>(static_cast<std::int64_t>(m), lo_, hi_);
    const auto mi = static_cast<std::size_t>(mode - lo_);
    pmf_[mi] = 1.0;
    for (std::int64_t x = mode; x < hi_; ++x) {
      const auto i = static_cast<std::size_t>(x - lo_);
      pmf_[i + 1] = pmf_[i] * ratio(x);
    }
    for (std::int64_t x = mode; x > lo_; --x) {
      const auto i = static_cast<std::size_t>(x - lo_);
      pmf_[i - 1] = pmf_[i] / ratio(x - 1);
    }
    double total = 0.0;
    for (double p : pmf_) total += p;
    for (double& p : pmf_) p /= total;
  }

  std::int64_t population_, successes_, draws_;
  std::int64_t lo_ = 0, hi_ = 0;
  std::vector<double> pmf_;
};

inline double hypergeom_pmf(std::int64_t x, std::int64_t population, std::int64_t successes,
                            std::int64_t draws) {
  return Hypergeometric(population, successes, draws).pmf(x);
}

}  // namespace swarmloc
