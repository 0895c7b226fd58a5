#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xview/energy.hpp"
#include "xview/graphs.hpp"
#include "xview/prior.hpp"

namespace xview {

enum class MoveKind { Merge, Split, Swap };
std::string to_string(MoveKind kind);

/// One concrete reversible operator application.
///  - Merge: tracks `track_a` and `track_b` are joined.
///  - Split: `split_off` (a single tracklet or one camera's tracklets) leaves
///    track `track_a`.
///  - Swap: tracklets `tracklet_x` and `tracklet_y` trade tracks.
struct Move {
  MoveKind kind = MoveKind::Merge;
  int track_a = -1;
  int track_b = -1;
  std::vector<int> split_off;
  int tracklet_x = -1;
  int tracklet_y = -1;
};

struct SamplerConfig {
  int iterations = 20000;
  std::uint64_t seed = 0;
  std::array<double, 3> operator_probs{0.4, 0.4, 0.2};  // merge, split, swap
  int convergence_window = 0;  // stop after this many consecutive rejections; 0 = off
  bool record_trace = false;
};

struct TraceEntry {
  int iteration = 0;
  MoveKind kind = MoveKind::Merge;
  bool accepted = false;
  double log_posterior = 0.0;
};
std::string serialize_trace(const std::vector<TraceEntry>& trace);

struct SamplerResult {
  Hierarchy best;
  double best_log_posterior = 0.0;
  std::vector<TraceEntry> trace;
  int iterations_run = 0;
  int accepted = 0;
};

/// All valid concrete moves of one kind. Merges are restricted to pairs whose
/// join stays reversible by a single split; splits peel one tracklet or one
/// camera's tracklets; swaps exchange same-type tracklets between tracks when
/// both insertions stay frame-consistent.
std::vector<Move> enumerate_moves(const Hierarchy& hierarchy, MoveKind kind);

/// Applies a structural move; affected scene entities are re-aggregated and
/// their action/attribute values reset (value inference decides them later).
/// Throws InvalidMove when the move is not valid in this hierarchy.
Hierarchy apply_move(const Hierarchy& hierarchy, const Move& move);

/// State-level proposal bookkeeping for one move: the chosen kind's
/// probability, the number of moves of that kind producing the same successor
/// (producers), and the total number of moves of that kind.
struct ProposalCounts {
  double forward_kind_prob = 1.0;
  int forward_producers = 1;
  int forward_moves = 1;
  double reverse_kind_prob = 1.0;
  int reverse_producers = 1;
  int reverse_moves = 1;
};

/// min(1, exp(delta log-posterior) * q(G'->G)/q(G->G')). Degenerate counts
/// give 0.
double acceptance_ratio(double logp_current, double logp_proposed,
                        const ProposalCounts& counts);
double acceptance_ratio(const Hierarchy& current, const Hierarchy& proposed,
                        const Evidence& evidence, const EnergyWeights& weights,
                        const PriorModel& prior, const ProposalCounts& counts);

using StateObserver = std::function<void(const Hierarchy&)>;

/// Metropolis-Hastings over the identity-mapping structure. Deterministic
/// under a fixed seed. Every visited structure is scored at its per-track
/// value optimum; the best visited hierarchy is returned. The observer, when
/// set, sees the chain state once per iteration.
SamplerResult run_sampler(const Hierarchy& initial, const Evidence& evidence,
                          const EnergyWeights& weights, const PriorModel& prior,
                          const SamplerConfig& config,
                          const StateObserver& observer = {});

}  // namespace xview
