#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "swarmloc/datamodel.hpp"
#include "swarmloc/hypergeometric.hpp"

namespace swarmloc {

enum class Mode { Sparse, Dense };

inline const char* to_string(Mode m) { return m == Mode::Sparse ? "sparse" : "dense"; }

/// Arguments of the single-torrent, single-ISP localized-unchoke bounds.
struct BoundInputs {
  std::size_t torrent_size;  // |V(T)|
  std::size_t local_size;    // |V(A,T)|
  std::size_t W;
  std::size_t k;

  void validate() const {
    if (local_size < 1 || local_size > torrent_size)
      throw std::domain_error("bounds: need 1 <= local_size <= torrent_size");
    if (W < 1 || k < 1 || k >= W) throw std::domain_error("bounds: need 1 <= k < W");
  }

  // A node cannot draw more neighbors than there are other peers.
  std::size_t draws() const { return std::min(W, torrent_size - 1); }
  std::size_t effective_k() const { return std::min(k, draws()); }
  std::size_t other_locals() const { return local_size - 1; }
};

namespace detail {

inline Hypergeometric neighborhood_law(const BoundInputs& b) {
  return Hypergeometric(static_cast<std::int64_t>(b.torrent_size - 1),
                        static_cast<std::int64_t>(b.other_locals()),
                        static_cast<std::int64_t>(b.draws()));
}

}  // namespace detail

/// Expected localized unchokes of Random when remote peers are too slow to
/// compete: sum over x of min(x,k) * HyperGeo(x; |V(T)|-1, |V(A,T)|-1, W).
inline double expected_local_random_sparse(const BoundInputs& b) {
  b.validate();
  if (b.other_locals() == 0 || b.draws() == 0) return 0.0;
  const auto k = static_cast<std::int64_t>(b.k);
  return detail::neighborhood_law(b).expect([k](std::int64_t x) { return static_cast<double>(std::min(x, k)); });
}

/// Dense variant: each drawn local keeps k/W of an unchoke in expectation.
inline double expected_local_random_dense(const BoundInputs& b) {
  b.validate();
  if (b.other_locals() == 0 || b.draws() == 0) return 0.0;
  const double per_local = static_cast<double>(b.effective_k()) / static_cast<double>(b.draws());
  return detail::neighborhood_law(b).expect([per_local](std::int64_t x) { return per_local * static_cast<double>(x); });
}

/// Closed form of the dense Random value, k(|V(A,T)|-1)/(|V(T)|-1).
inline double random_dense_closed_form(const BoundInputs& b) {
  b.validate();
  if (b.torrent_size < 2) return 0.0;
  return static_cast<double>(b.effective_k()) * static_cast<double>(b.other_locals()) /
         static_cast<double>(b.torrent_size - 1);
}

inline double expected_local_locality(const BoundInputs& b, Mode mode) {
  b.validate();
  const double locals = static_cast<double>(b.other_locals());
  if (mode == Mode::Sparse) return std::min(static_cast<double>(b.k), locals);
  if (b.draws() == 0) return 0.0;
  const double k = static_cast<double>(b.effective_k());
  const double d = static_cast<double>(b.draws());
  return locals >= d ? k : k * locals / d;
}

inline double expected_local(const BoundInputs& b, Mode mode, bool locality) {
  if (locality) return expected_local_locality(b, mode);
  return mode == Mode::Sparse ? expected_local_random_sparse(b) : expected_local_random_dense(b);
}

/// Whether Random is expected to find k locals: W(|V(A,T)|-1)/(|V(T)|-1) >= k.
inline bool sparse_condition_holds(const BoundInputs& b) {
  b.validate();
  if (b.torrent_size < 2) return false;
  // Integer cross-multiplication keeps the boundary case exact.
  return b.W * b.other_locals() >= b.k * (b.torrent_size - 1);
}

/// Locality-over-Random improvement factor under the mean approximation.
/// Requires |V(A,T)|-1 >= k and |V(T)|-1 >= W. In sparse mode, Random's mean
/// value W(|V(A,T)|-1)/(|V(T)|-1) is capped at k, so the factor is 1 once
/// the sparse condition holds.
inline double improvement_factor(const BoundInputs& b, Mode mode) {
  b.validate();
  if (b.other_locals() < b.k)
    throw std::domain_error("improvement_factor: requires |V(A,T)|-1 >= k");
  if (b.torrent_size - 1 < b.W)
    throw std::domain_error("improvement_factor: requires |V(T)|-1 >= W");
  const double n1 = static_cast<double>(b.torrent_size - 1);
  const double l1 = static_cast<double>(b.other_locals());
  const double W = static_cast<double>(b.W);
  const double k = static_cast<double>(b.k);
  if (mode == Mode::Sparse) return k / std::min(k, W * l1 / n1);
  if (l1 >= W) return n1 / l1;  // k / (k l1/n1)
  return n1 / W;                // (k l1/W) / (k l1/n1)
}

struct TorrentBoundContribution {
  std::string torrent_id;
  double weight = 0;  // |V(A,T)| / |V(A)|
  BoundInputs inputs{};
  double random_sparse = 0, random_dense = 0, locality_sparse = 0, locality_dense = 0;  // in unchokes
};

/// ISP-wide weighted bounds, each normalized by k to a fraction in [0,1].
struct IspBoundsReport {
  std::string isp_id;
  double random_sparse = 0, random_dense = 0, locality_sparse = 0, locality_dense = 0;
  std::vector<TorrentBoundContribution> torrents;

  // Locality over Random aggregate ratios; absent when Random is zero.
  std::optional<double> improvement(Mode m) const {
    const double r = m == Mode::Sparse ? random_sparse : random_dense;
    const double l = m == Mode::Sparse ? locality_sparse : locality_dense;
    if (!(r > 0)) return std::nullopt;
    return l / r;
  }
};

inline IspBoundsReport isp_bounds(const Dataset& d, const std::string& isp, const ChunkParams& params) {
  params.validate();
  const auto& local = d.torrents_of(isp);
  const double total = static_cast<double>(d.isp_population(isp));
  const double k = static_cast<double>(params.regular_slots);
  IspBoundsReport r;
  r.isp_id = isp;
  for (const auto& [tid, count] : local) {
    TorrentBoundContribution c;
    c.torrent_id = tid;
    c.weight = static_cast<double>(count) / total;
    c.inputs = BoundInputs{d.torrent(tid).size(), count, params.neighborhood, params.regular_slots};
    c.random_sparse = expected_local_random_sparse(c.inputs);
    c.random_dense = expected_local_random_dense(c.inputs);
    c.locality_sparse = expected_local_locality(c.inputs, Mode::Sparse);
    c.locality_dense = expected_local_locality(c.inputs, Mode::Dense);
    r.random_sparse += c.weight * c.random_sparse / k;
    r.random_dense += c.weight * c.random_dense / k;
    r.locality_sparse += c.weight * c.locality_sparse / k;
    r.locality_dense += c.weight * c.locality_dense / k;
    r.torrents.push_back(std::move(c));
  }
  return r;
}

}  // namespace swarmloc
