#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "swarmloc/datamodel.hpp"
#include "swarmloc/hypergeometric.hpp"
#include "swarmloc/matching.hpp"

namespace swarmloc {

/// Chunks held per matching-problem position. Values are expected chunk
/// counts and may be fractional.
struct CompletionState {
  std::vector<double> chunks;
  double sim_time_sec = 0.0;

  std::size_t completed(double total) const {
    return static_cast<std::size_t>(std::count_if(chunks.begin(), chunks.end(), [&](double c) { return c >= total; }));
  }
};

struct Interest {
  double v_to_u;  // E{I(v->u)}: chunks v holds that u lacks
  double u_to_v;
};

/// Expected interest by summation over the overlap law. With chunk sets
/// drawn uniformly, the overlap Y of v's and u's chunks is
/// HyperGeo(C, c_v, c_u), and I(v->u) = c_v - Y, I(u->v) = c_u - Y.
inline Interest expected_interest(std::int64_t c_v, std::int64_t c_u, std::int64_t C) {
  if (C < 0 || c_v < 0 || c_u < 0 || c_v > C || c_u > C)
    throw std::domain_error("expected_interest: need 0 <= c <= C");
  if (c_u > c_v) {
    auto r = expected_interest(c_u, c_v, C);
    return {r.u_to_v, r.v_to_u};
  }
  const Hypergeometric overlap(C, c_v, c_u);
  Interest r{0.0, 0.0};
  for (std::int64_t y = overlap.support_min(); y <= overlap.support_max(); ++y) {
    const double p = overlap.pmf(y);
    r.v_to_u += static_cast<double>(c_v - y) * p;
    r.u_to_v += static_cast<double>(c_u - y) * p;
  }
  return r;
}

/// Closed form of expected_interest: c_v(C-c_u)/C and c_u(C-c_v)/C.
inline Interest expected_interest_closed(double c_v, double c_u, double C) {
  if (!(C > 0) || c_v < 0 || c_u < 0 || c_v > C || c_u > C)
    throw std::domain_error("expected_interest: need 0 <= c <= C, C > 0");
  return {c_v * (C - c_u) / C, c_u * (C - c_v) / C};
}

/// phi(v,u) = min(E{I(v->u)}/B(v), E{I(u->v)}/B(u), 1), B = per-slot chunk budget.
inline double filtering_probability(double c_v, double c_u, const ChunkParams& chunk, double U_v, double U_u) {
  const auto i = expected_interest_closed(c_v, c_u, static_cast<double>(chunk.total_chunks));
  return std::min({i.v_to_u / chunk.slot_budget_chunks(U_v), i.u_to_v / chunk.slot_budget_chunks(U_u), 1.0});
}

/// Keeps each allowed edge with probability phi. Coin flips come from a
/// stream derived from (seed, step) and are drawn in canonical edge order.
inline MatchingProblem filter_problem(const MatchingProblem& p, const CompletionState& state, const ChunkParams& chunk,
                                      std::uint64_t seed, std::uint64_t step = 0) {
  Rng rng(derive_seed(seed, step, "filter"));
  MatchingProblem out = p;
  for (auto& a : out.allowed) a.clear();
  for (std::uint32_t v = 0; v < p.size(); ++v) {
    for (auto u : p.allowed[v]) {
      if (u <= v) continue;
      const double phi =
          filtering_probability(state.chunks[v], state.chunks[u], chunk, p.preference[v], p.preference[u]);
      if (phi >= 1.0 || (phi > 0.0 && rng.bernoulli(phi))) {
        out.allowed[v].push_back(u);
        out.allowed[u].push_back(v);
      }
    }
  }
  for (auto& a : out.allowed) std::sort(a.begin(), a.end());
  return out;
}

/// One unchoke interval: every node gains min(E{I(u->v)}, B(u)) from each
/// matched u, capped at C.
inline CompletionState step_completions(const MatchingProblem& p, const Matching& m, const CompletionState& state,
                                        const ChunkParams& chunk) {
  const double C = static_cast<double>(chunk.total_chunks);
  CompletionState next = state;
  for (auto [a, b] : m.pairs) {
    const auto i = expected_interest_closed(state.chunks[a], state.chunks[b], C);
    next.chunks[a] += std::min(i.u_to_v, chunk.slot_budget_chunks(p.preference[b]));
    next.chunks[b] += std::min(i.v_to_u, chunk.slot_budget_chunks(p.preference[a]));
  }
  for (auto& c : next.chunks) c = std::min(c, C);
  next.sim_time_sec += chunk.unchoke_interval_sec;
  return next;
}

/// Sum over matched pairs of the regular-unchoke rates U(v)/(k+1) + U(u)/(k+1).
inline double matched_capacity(const MatchingProblem& p, const Matching& m, std::size_t k) {
  double total = 0.0;
  for (auto [a, b] : m.pairs) total += (p.preference[a] + p.preference[b]) / static_cast<double>(k + 1);
  return total;
}

struct TracePoint {
  std::size_t step;
  double sim_time_sec;  // start of the interval
  double aggregate_capacity_kbps;
  std::size_t completed_nodes;  // at the end of the interval
  CompletionState state;        // at the end of the interval
};

/// Time-stepped completion-aware b-matching: filter, solve, record, advance.
/// Stops after `steps` intervals or once every node holds all C chunks.
inline std::vector<TracePoint> run_completion_simulation(const MatchingProblem& p, const ChunkParams& chunk,
                                                         const std::vector<double>& initial_chunks, std::size_t steps,
                                                         std::uint64_t seed) {
  chunk.validate();
  if (initial_chunks.size() != p.size()) throw validation_error("initial completion vector size mismatch");
  const double C = static_cast<double>(chunk.total_chunks);
  for (double c : initial_chunks)
    if (c < 0 || c > C) throw validation_error("initial completion outside [0, C]");
  CompletionState state{initial_chunks, 0.0};
  std::vector<TracePoint> trace;
  for (std::size_t s = 0; s < steps && state.completed(C) < p.size(); ++s) {
    const auto filtered = filter_problem(p, state, chunk, seed, s);
    const auto m = solve_bmatching(filtered);
    const double start = state.sim_time_sec;
    state = step_completions(filtered, m, state, chunk);
    trace.push_back({s, start, matched_capacity(filtered, m, chunk.regular_slots), state.completed(C), state});
  }
  return trace;
}

/// Trace CSV: step,sim_time_sec,aggregate_capacity_kbps,completed_nodes.
inline void write_trace(std::ostream& out, const std::vector<TracePoint>& trace) {
  out << "step,sim_time_sec,aggregate_capacity_kbps,completed_nodes\n";
  for (const auto& t : trace)
    out << t.step << ',' << text::fmt(t.sim_time_sec) << ',' << text::fixed(t.aggregate_capacity_kbps, 3) << ','
        << t.completed_nodes << '\n';
}

}  // namespace swarmloc
