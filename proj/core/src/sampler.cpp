#include "xview/sampler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "scoring.hpp"

namespace xview {

using nlohmann::json;

std::string to_string(MoveKind kind) {
  switch (kind) {
    case MoveKind::Merge: return "merge";
    case MoveKind::Split: return "split";
    case MoveKind::Swap: return "swap";
  }
  return "merge";
}

std::string serialize_trace(const std::vector<TraceEntry>& trace) {
  std::ostringstream out;
  for (const auto& e : trace) {
    json j;
    j["iter"] = e.iteration;
    j["kind"] = to_string(e.kind);
    j["accepted"] = e.accepted;
    j["logp"] = e.log_posterior;
    out << j.dump() << "\n";
  }
  return out.str();
}

namespace {

bool frames_disjoint(const SceneTrack& a, const SceneTrack& b) {
  for (std::size_t i = 0; i < a.frames_by_camera.size(); ++i)
    if (a.frames_by_camera[i] & b.frames_by_camera[i]) return false;
  return true;
}

// `part` is in the split family of `part` joined with `other`: it is a single
// tracklet, or exactly one camera's tracklet group of the union.
bool operand_in_family(const SceneTrack& part, const SceneTrack& other) {
  if (part.tracklets.size() == 1) return true;
  return part.num_cameras() == 1 && (part.camera_mask & other.camera_mask) == 0;
}

int merge_reverse_producers(const SceneTrack& a, const SceneTrack& b) {
  return (operand_in_family(a, b) ? 1 : 0) + (operand_in_family(b, a) ? 1 : 0);
}

bool mergeable(const SceneTrack& a, const SceneTrack& b) {
  if (a.type_id != b.type_id) return false;
  if (!frames_disjoint(a, b)) return false;
  return merge_reverse_producers(a, b) >= 1;
}

int family_size(const SceneTrack& e) {
  if (e.tracklets.size() < 2) return 0;
  int n = static_cast<int>(e.tracklets.size());
  if (e.num_cameras() >= 2)
    for (int c : e.tracklets_per_camera)
      if (c >= 2) ++n;
  return n;
}

void split_subsets(const SceneTrack& e, const TrackletTable& table,
                   std::vector<std::vector<int>>& out) {
  out.clear();
  if (e.tracklets.size() < 2) return;
  for (int ti : e.tracklets) out.push_back({ti});
  if (e.num_cameras() >= 2) {
    for (int cam = 0; cam < static_cast<int>(e.tracklets_per_camera.size()); ++cam) {
      if (e.tracklets_per_camera[cam] < 2) continue;
      std::vector<int> group;
      for (int ti : e.tracklets)
        if (table.at(ti).camera_index == cam) group.push_back(ti);
      out.push_back(std::move(group));
    }
  }
}

// `ins` fits into `track` after removing `rem` (overlap check in ins's camera).
bool fits_after_swap(const SceneTrack& track, const Tracklet& rem, const Tracklet& ins,
                     int words) {
  const std::size_t base = static_cast<std::size_t>(ins.camera_index) * words;
  for (int w = 0; w < words; ++w) {
    std::uint64_t occupied = track.frames_by_camera[base + w];
    if (rem.camera_index == ins.camera_index) occupied &= ~rem.frame_mask[w];
    if (occupied & ins.frame_mask[w]) return false;
  }
  return true;
}

bool swap_valid(const SceneTrack& a, const SceneTrack& b, const Tracklet& x,
                const Tracklet& y, int words) {
  if (x.type_id != y.type_id) return false;
  return fits_after_swap(a, x, y, words) && fits_after_swap(b, y, x, words);
}

int count_merge_moves(const std::vector<const SceneTrack*>& tracks) {
  int n = 0;
  for (std::size_t i = 0; i < tracks.size(); ++i)
    for (std::size_t j = i + 1; j < tracks.size(); ++j)
      if (mergeable(*tracks[i], *tracks[j])) ++n;
  return n;
}

int count_split_moves(const std::vector<const SceneTrack*>& tracks) {
  int n = 0;
  for (const SceneTrack* t : tracks) n += family_size(*t);
  return n;
}

int count_swap_moves(const std::vector<const SceneTrack*>& track_of_tracklet,
                     const TrackletTable& table, int words) {
  int n = 0;
  const int P = table.size();
  for (int x = 0; x < P; ++x) {
    for (int y = x + 1; y < P; ++y) {
      const SceneTrack* a = track_of_tracklet[x];
      const SceneTrack* b = track_of_tracklet[y];
      if (a == b) continue;
      if (swap_valid(*a, *b, table.at(x), table.at(y), words)) ++n;
    }
  }
  return n;
}

std::vector<std::string> alive_types(const std::vector<const SceneTrack*>& tracks) {
  std::vector<std::string> types;
  for (const SceneTrack* t : tracks)
    if (t->first_t == 1) types.push_back(t->type_id);
  std::sort(types.begin(), types.end());
  return types;
}

}  // namespace

std::vector<Move> enumerate_moves(const Hierarchy& hierarchy, MoveKind kind) {
  std::vector<Move> moves;
  const auto& tracks = hierarchy.tracks();
  const TrackletTable& table = hierarchy.tracklets();
  const int words = table.words_per_mask();

  switch (kind) {
    case MoveKind::Merge: {
      for (std::size_t i = 0; i < tracks.size(); ++i)
        for (std::size_t j = i + 1; j < tracks.size(); ++j)
          if (mergeable(tracks[i], tracks[j])) {
            Move m;
            m.kind = MoveKind::Merge;
            m.track_a = static_cast<int>(i);
            m.track_b = static_cast<int>(j);
            moves.push_back(std::move(m));
          }
      break;
    }
    case MoveKind::Split: {
      std::vector<std::vector<int>> subsets;
      for (std::size_t k = 0; k < tracks.size(); ++k) {
        split_subsets(tracks[k], table, subsets);
        for (auto& s : subsets) {
          Move m;
          m.kind = MoveKind::Split;
          m.track_a = static_cast<int>(k);
          m.split_off = std::move(s);
          moves.push_back(std::move(m));
        }
      }
      break;
    }
    case MoveKind::Swap: {
      for (int x = 0; x < table.size(); ++x) {
        for (int y = x + 1; y < table.size(); ++y) {
          const int a = hierarchy.track_of(x);
          const int b = hierarchy.track_of(y);
          if (a == b) continue;
          if (swap_valid(tracks[a], tracks[b], table.at(x), table.at(y), words)) {
            Move m;
            m.kind = MoveKind::Swap;
            m.tracklet_x = x;
            m.tracklet_y = y;
            moves.push_back(std::move(m));
          }
        }
      }
      break;
    }
  }
  return moves;
}

Hierarchy apply_move(const Hierarchy& hierarchy, const Move& move) {
  Hierarchy next = hierarchy;
  const auto& tracks = next.tracks();
  const int K = static_cast<int>(tracks.size());
  const TrackletTable& table = next.tracklets();

  switch (move.kind) {
    case MoveKind::Merge: {
      if (move.track_a < 0 || move.track_a >= K || move.track_b < 0 ||
          move.track_b >= K || move.track_a == move.track_b)
        throw InvalidMove("merge operands out of range");
      if (!mergeable(tracks[move.track_a], tracks[move.track_b]))
        throw InvalidMove("merge operands are not compatible");
      std::vector<int> joined = tracks[move.track_a].tracklets;
      joined.insert(joined.end(), tracks[move.track_b].tracklets.begin(),
                    tracks[move.track_b].tracklets.end());
      std::vector<SceneTrack> add;
      add.push_back(next.build_track(joined));
      next.replace_tracks({move.track_a, move.track_b}, std::move(add));
      break;
    }
    case MoveKind::Split: {
      if (move.track_a < 0 || move.track_a >= K)
        throw InvalidMove("split operand out of range");
      std::vector<std::vector<int>> subsets;
      split_subsets(tracks[move.track_a], table, subsets);
      std::vector<int> wanted = move.split_off;
      std::sort(wanted.begin(), wanted.end());
      if (std::find(subsets.begin(), subsets.end(), wanted) == subsets.end())
        throw InvalidMove("split subset is not a single tracklet or camera group");
      std::vector<int> rest;
      for (int ti : tracks[move.track_a].tracklets)
        if (!std::binary_search(wanted.begin(), wanted.end(), ti)) rest.push_back(ti);
      std::vector<SceneTrack> add;
      add.push_back(next.build_track(wanted));
      add.push_back(next.build_track(rest));
      next.replace_tracks({move.track_a}, std::move(add));
      break;
    }
    case MoveKind::Swap: {
      if (move.tracklet_x < 0 || move.tracklet_x >= table.size() ||
          move.tracklet_y < 0 || move.tracklet_y >= table.size())
        throw InvalidMove("swap operands out of range");
      const int a = next.track_of(move.tracklet_x);
      const int b = next.track_of(move.tracklet_y);
      if (a == b) throw InvalidMove("swap operands share a scene entity");
      if (!swap_valid(tracks[a], tracks[b], table.at(move.tracklet_x),
                      table.at(move.tracklet_y), table.words_per_mask()))
        throw InvalidMove("swap would violate frame consistency");
      auto exchanged = [](const SceneTrack& t, int out, int in) {
        std::vector<int> ts;
        for (int ti : t.tracklets)
          if (ti != out) ts.push_back(ti);
        ts.push_back(in);
        return ts;
      };
      std::vector<SceneTrack> add;
      add.push_back(next.build_track(exchanged(tracks[a], move.tracklet_x, move.tracklet_y)));
      add.push_back(next.build_track(exchanged(tracks[b], move.tracklet_y, move.tracklet_x)));
      next.replace_tracks({a, b}, std::move(add));
      break;
    }
  }
  return next;
}

double acceptance_ratio(double logp_current, double logp_proposed,
                        const ProposalCounts& counts) {
  if (counts.forward_moves <= 0 || counts.forward_producers <= 0 ||
      counts.forward_kind_prob <= 0.0)
    return 0.0;
  if (counts.reverse_moves <= 0 || counts.reverse_producers <= 0 ||
      counts.reverse_kind_prob <= 0.0)
    return 0.0;
  const double q_fwd = counts.forward_kind_prob *
                       static_cast<double>(counts.forward_producers) /
                       static_cast<double>(counts.forward_moves);
  const double q_rev = counts.reverse_kind_prob *
                       static_cast<double>(counts.reverse_producers) /
                       static_cast<double>(counts.reverse_moves);
  const double ratio = std::exp(logp_proposed - logp_current) * q_rev / q_fwd;
  return std::min(1.0, ratio);
}

double acceptance_ratio(const Hierarchy& current, const Hierarchy& proposed,
                        const Evidence& evidence, const EnergyWeights& weights,
                        const PriorModel& prior, const ProposalCounts& counts) {
  return acceptance_ratio(log_posterior(current, evidence, weights, prior),
                          log_posterior(proposed, evidence, weights, prior), counts);
}

SamplerResult run_sampler(const Hierarchy& initial, const Evidence& evidence,
                          const EnergyWeights& weights, const PriorModel& prior,
                          const SamplerConfig& config, const StateObserver& observer) {
  const double prob_sum = config.operator_probs[0] + config.operator_probs[1] +
                          config.operator_probs[2];
  if (std::abs(prob_sum - 1.0) > 1e-9)
    throw InvalidConfig("operator probabilities must sum to 1");
  if (config.iterations < 0) throw InvalidConfig("iterations must be nonnegative");

  scoring::Context ctx(initial.ontology(), evidence, weights, prior);

  SamplerResult result;
  Hierarchy h = initial;
  scoring::TrackScorer scorer(ctx, h);

  // start at the per-track value optimum
  std::vector<double> scores;
  {
    std::vector<SceneTrack> replaced;
    std::vector<int> remove;
    std::vector<std::vector<scoring::ViewAttrWrite>> writes;
    for (int k = 0; k < static_cast<int>(h.tracks().size()); ++k) {
      scoring::TrackEval ev = scorer.evaluate(h.tracks()[k].tracklets);
      scores.push_back(ev.score);
      replaced.push_back(std::move(ev.track));
      writes.push_back(std::move(ev.view_attr_writes));
      remove.push_back(k);
    }
    h.replace_tracks(std::move(remove), std::move(replaced));
    for (const auto& ws : writes)
      for (const auto& w : ws)
        h.view_entity(w.tracklet, w.obs_pos).attributes[w.attr_id] = w.value;
  }

  auto track_ptrs = [&h]() {
    std::vector<const SceneTrack*> ptrs;
    ptrs.reserve(h.tracks().size());
    for (const auto& t : h.tracks()) ptrs.push_back(&t);
    return ptrs;
  };
  auto signature_of = [&prior](const std::vector<const SceneTrack*>& ptrs) {
    return prior.initial_logprob(alive_types(ptrs));
  };

  double signature = signature_of(track_ptrs());
  double total = signature;
  for (double s : scores) total += s;

  Hierarchy best = h;
  double best_total = total;

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const TrackletTable& table = h.tracklets();
  const int words = table.words_per_mask();

  // mirrors Hierarchy::replace_tracks (descending swap-pop, then append)
  auto commit_scores = [&scores](std::vector<int> remove, const std::vector<double>& add) {
    std::sort(remove.begin(), remove.end(), std::greater<int>());
    for (int idx : remove) {
      scores[idx] = scores.back();
      scores.pop_back();
    }
    for (double s : add) scores.push_back(s);
  };

  int rejections_in_row = 0;
  std::vector<Move> moves;
  if (config.record_trace) result.trace.reserve(config.iterations);

  for (int iter = 1; iter <= config.iterations; ++iter) {
    result.iterations_run = iter;
    const double pick = unit(rng);
    MoveKind kind = MoveKind::Swap;
    if (pick < config.operator_probs[0])
      kind = MoveKind::Merge;
    else if (pick < config.operator_probs[0] + config.operator_probs[1])
      kind = MoveKind::Split;

    moves = enumerate_moves(h, kind);
    bool accepted = false;

    if (!moves.empty()) {
      std::uniform_int_distribution<std::size_t> pick_move(0, moves.size() - 1);
      const Move& m = moves[pick_move(rng)];
      const double u = unit(rng);
      const int n_fwd = static_cast<int>(moves.size());

      switch (kind) {
        case MoveKind::Merge: {
          const SceneTrack& a = h.tracks()[m.track_a];
          const SceneTrack& b = h.tracks()[m.track_b];
          std::vector<int> joined = a.tracklets;
          joined.insert(joined.end(), b.tracklets.begin(), b.tracklets.end());
          scoring::TrackEval ev = scorer.evaluate(joined);

          auto ptrs = track_ptrs();
          std::vector<const SceneTrack*> after;
          for (int k = 0; k < static_cast<int>(ptrs.size()); ++k)
            if (k != m.track_a && k != m.track_b) after.push_back(ptrs[k]);
          after.push_back(&ev.track);

          const double new_sig = signature_of(after);
          const double delta = ev.score - scores[m.track_a] - scores[m.track_b] +
                               new_sig - signature;

          ProposalCounts counts;
          counts.forward_kind_prob = config.operator_probs[0];
          counts.forward_producers = 1;
          counts.forward_moves = n_fwd;
          counts.reverse_kind_prob = config.operator_probs[1];
          counts.reverse_producers = merge_reverse_producers(a, b);
          counts.reverse_moves = count_split_moves(after);

          if (u < acceptance_ratio(0.0, delta, counts)) {
            accepted = true;
            for (const auto& w : ev.view_attr_writes)
              h.view_entity(w.tracklet, w.obs_pos).attributes[w.attr_id] = w.value;
            const double score = ev.score;
            std::vector<SceneTrack> add;
            add.push_back(std::move(ev.track));
            h.replace_tracks({m.track_a, m.track_b}, std::move(add));
            commit_scores({m.track_a, m.track_b}, {score});
            total += delta;
            signature = new_sig;
          }
          break;
        }
        case MoveKind::Split: {
          const SceneTrack& e = h.tracks()[m.track_a];
          std::vector<int> off = m.split_off;
          std::sort(off.begin(), off.end());
          std::vector<int> rest;
          for (int ti : e.tracklets)
            if (!std::binary_search(off.begin(), off.end(), ti)) rest.push_back(ti);

          scoring::TrackEval ev_off = scorer.evaluate(off);
          scoring::TrackEval ev_rest = scorer.evaluate(rest);

          auto ptrs = track_ptrs();
          std::vector<const SceneTrack*> after;
          for (int k = 0; k < static_cast<int>(ptrs.size()); ++k)
            if (k != m.track_a) after.push_back(ptrs[k]);
          after.push_back(&ev_off.track);
          after.push_back(&ev_rest.track);

          const double new_sig = signature_of(after);
          const double delta = ev_off.score + ev_rest.score - scores[m.track_a] +
                               new_sig - signature;

          ProposalCounts counts;
          counts.forward_kind_prob = config.operator_probs[1];
          counts.forward_producers =
              1 + (operand_in_family(ev_rest.track, ev_off.track) ? 1 : 0);
          counts.forward_moves = n_fwd;
          counts.reverse_kind_prob = config.operator_probs[0];
          counts.reverse_producers = 1;
          counts.reverse_moves = count_merge_moves(after);

          if (u < acceptance_ratio(0.0, delta, counts)) {
            accepted = true;
            for (const auto& w : ev_off.view_attr_writes)
              h.view_entity(w.tracklet, w.obs_pos).attributes[w.attr_id] = w.value;
            for (const auto& w : ev_rest.view_attr_writes)
              h.view_entity(w.tracklet, w.obs_pos).attributes[w.attr_id] = w.value;
            const double s_off = ev_off.score, s_rest = ev_rest.score;
            std::vector<SceneTrack> add;
            add.push_back(std::move(ev_off.track));
            add.push_back(std::move(ev_rest.track));
            h.replace_tracks({m.track_a}, std::move(add));
            commit_scores({m.track_a}, {s_off, s_rest});
            total += delta;
            signature = new_sig;
          }
          break;
        }
        case MoveKind::Swap: {
          const int a = h.track_of(m.tracklet_x);
          const int b = h.track_of(m.tracklet_y);
          const SceneTrack& ta = h.tracks()[a];
          const SceneTrack& tb = h.tracks()[b];
          if (ta.tracklets.size() == 1 && tb.tracklets.size() == 1) {
            // exchanging two singletons reproduces the same partition
            accepted = true;
            break;
          }
          auto exchanged = [](const SceneTrack& t, int out, int in) {
            std::vector<int> ts;
            for (int ti : t.tracklets)
              if (ti != out) ts.push_back(ti);
            ts.push_back(in);
            return ts;
          };
          scoring::TrackEval ev_a = scorer.evaluate(exchanged(ta, m.tracklet_x, m.tracklet_y));
          scoring::TrackEval ev_b = scorer.evaluate(exchanged(tb, m.tracklet_y, m.tracklet_x));

          auto ptrs = track_ptrs();
          std::vector<const SceneTrack*> after = ptrs;
          after[a] = &ev_a.track;
          after[b] = &ev_b.track;

          const double new_sig = signature_of(after);
          const double delta =
              ev_a.score + ev_b.score - scores[a] - scores[b] + new_sig - signature;

          std::vector<const SceneTrack*> by_tracklet(table.size());
          for (int ti = 0; ti < table.size(); ++ti) by_tracklet[ti] = after[h.track_of(ti)];
          by_tracklet[m.tracklet_x] = &ev_b.track;
          by_tracklet[m.tracklet_y] = &ev_a.track;

          ProposalCounts counts;
          counts.forward_kind_prob = config.operator_probs[2];
          counts.forward_producers = 1;
          counts.forward_moves = n_fwd;
          counts.reverse_kind_prob = config.operator_probs[2];
          counts.reverse_producers = 1;
          counts.reverse_moves = count_swap_moves(by_tracklet, table, words);

          if (u < acceptance_ratio(0.0, delta, counts)) {
            accepted = true;
            for (const auto& w : ev_a.view_attr_writes)
              h.view_entity(w.tracklet, w.obs_pos).attributes[w.attr_id] = w.value;
            for (const auto& w : ev_b.view_attr_writes)
              h.view_entity(w.tracklet, w.obs_pos).attributes[w.attr_id] = w.value;
            const double s_a = ev_a.score, s_b = ev_b.score;
            std::vector<SceneTrack> add;
            add.push_back(std::move(ev_a.track));
            add.push_back(std::move(ev_b.track));
            h.replace_tracks({a, b}, std::move(add));
            commit_scores({a, b}, {s_a, s_b});
            total += delta;
            signature = new_sig;
          }
          break;
        }
      }
    }

    if (accepted) {
      result.accepted++;
      rejections_in_row = 0;
      if (total > best_total) {
        best_total = total;
        best = h;
      }
    } else {
      rejections_in_row++;
    }
    if (config.record_trace)
      result.trace.push_back({iter, kind, accepted, total});
    if (observer) observer(h);
    if (config.convergence_window > 0 &&
        rejections_in_row >= config.convergence_window)
      break;
  }

  result.best_log_posterior = log_posterior(best, evidence, weights, prior);
  result.best = std::move(best);
  return result;
}

}  // namespace xview
