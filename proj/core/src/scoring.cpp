#include "scoring.hpp"

#include <algorithm>
#include <cmath>

namespace xview::scoring {

namespace {
double floored_log(double p, double eps) { return std::log(std::max(p, eps)); }
}  // namespace

Context::Context(const OntologyGraph& ontology, const Evidence& evidence,
                 const EnergyWeights& weights, const PriorModel& prior)
    : ontology_(&ontology), evidence_(&evidence), weights_(weights), prior_(&prior) {
  for (const auto& node : ontology.nodes()) {
    if (node.kind != NodeKind::Object && node.kind != NodeKind::Part) continue;
    TypeInfo info;
    info.actions = ontology.actions_of(node.id);
    info.attrs = ontology.attributes_of(node.id);
    const int a = static_cast<int>(info.actions.size());
    info.trans_lp.assign(static_cast<std::size_t>(a) * a, 0.0);
    for (int i = 0; i < a; ++i)
      for (int j = 0; j < a; ++j)
        info.trans_lp[static_cast<std::size_t>(i) * a + j] =
            prior.action_transition_logprob(node.id, info.actions[i], info.actions[j]);
    for (const auto& attr : info.attrs) {
      info.attr_flip_lp.push_back(prior.attr_change_logprob(attr, true));
      info.attr_keep_lp.push_back(prior.attr_change_logprob(attr, false));
    }
    types_.emplace(node.id, std::move(info));
  }
}

const TypeInfo& Context::type_info(const std::string& type_id) const {
  auto it = types_.find(type_id);
  if (it == types_.end())
    throw UnknownNodeId("no type info for '" + type_id + "'");
  return it->second;
}

TrackScorer::TrackScorer(const Context& context, const Hierarchy& hierarchy)
    : context_(&context), hierarchy_(&hierarchy) {
  const_ll_.assign(hierarchy.tracklets().size(), 0.0);
  const_ll_ready_.assign(hierarchy.tracklets().size(), 0);
}

double TrackScorer::tracklet_const_ll(int tracklet_index) const {
  if (const_ll_ready_[tracklet_index]) return const_ll_[tracklet_index];
  const Evidence& ev = context_->evidence();
  const double eps = context_->weights().eps_prob;
  const Tracklet& tr = hierarchy_->tracklets().at(tracklet_index);
  double ll = 0.0;
  for (int oi = 0; oi < static_cast<int>(tr.obs.size()); ++oi) {
    const ProposalRecord& rec = ev.at(tr.camera_index, tr.obs[oi].t)[tr.obs[oi].record_index];
    ll += floored_log(rec.det, eps);
    const ViewEntityNode& node = hierarchy_->view_entity(tracklet_index, oi);
    if (node.action) {
      const double* s = rec.action_score(*node.action);
      if (!s)
        throw UnknownActionLabel("view action '" + *node.action +
                                 "' absent from the score table of '" + node.id + "'");
      ll += floored_log(*s, eps);
    }
  }
  const_ll_[tracklet_index] = ll;
  const_ll_ready_[tracklet_index] = 1;
  return ll;
}

TrackGraph TrackScorer::build_graph(const SceneTrack& track) const {
  const Evidence& ev = context_->evidence();
  const EnergyWeights& w = context_->weights();
  const TypeInfo& info = context_->type_info(track.type_id);
  const int span = track.last_t - track.first_t + 1;
  const int num_actions = static_cast<int>(info.actions.size());
  const int num_attrs = static_cast<int>(info.attrs.size());

  TrackGraph tg;
  tg.action_var.assign(span, -1);
  tg.attr_var.assign(num_attrs, std::vector<int>(span, -1));

  if (num_actions > 0) {
    for (int i = 0; i < span; ++i) tg.action_var[i] = tg.graph.add_variable(num_actions);
    for (int i = 0; i + 1 < span; ++i)
      tg.graph.add_pairwise(tg.action_var[i], tg.action_var[i + 1], info.trans_lp);
  }
  for (int k = 0; k < num_attrs; ++k) {
    for (int i = 0; i < span; ++i) tg.attr_var[k][i] = tg.graph.add_variable(2);
    const std::vector<double> chain = {info.attr_keep_lp[k], info.attr_flip_lp[k],
                                       info.attr_flip_lp[k], info.attr_keep_lp[k]};
    for (int i = 0; i + 1 < span; ++i)
      tg.graph.add_pairwise(tg.attr_var[k][i], tg.attr_var[k][i + 1], chain);
  }

  const std::vector<double> coupling = {0.0, -w.w4 * w.xi, -w.w4 * w.xi, 0.0};
  for (int t = track.first_t; t <= track.last_t; ++t) {
    const int i = t - track.first_t;
    for (const auto& [ti, oi] : track.frames[i].links) {
      const Tracklet& tr = hierarchy_->tracklets().at(ti);
      const ProposalRecord& rec = ev.at(tr.camera_index, t)[tr.obs[oi].record_index];
      if (num_actions > 0) {
        std::vector<double> unary(num_actions);
        for (int a = 0; a < num_actions; ++a)
          unary[a] = w.w3 * floored_log(rec.actions[a].second, w.eps_prob);
        tg.graph.add_unary(tg.action_var[i], std::move(unary));
      }
      for (int k = 0; k < num_attrs; ++k) {
        const double* s = rec.attr_score(info.attrs[k]);
        if (!s) continue;
        const int leaf = tg.graph.add_variable(2);
        tg.graph.add_unary(leaf, {floored_log(1.0 - *s, w.eps_prob),
                                  floored_log(*s, w.eps_prob)});
        tg.graph.add_pairwise(tg.attr_var[k][i], leaf, coupling);
        tg.leaves.push_back({leaf, ti, oi, k});
      }
    }
  }
  return tg;
}

TrackEval TrackScorer::evaluate(const std::vector<int>& tracklet_set) const {
  return evaluate(hierarchy_->build_track(tracklet_set));
}

TrackEval TrackScorer::evaluate(SceneTrack track) const {
  const Evidence& ev = context_->evidence();
  const EnergyWeights& w = context_->weights();
  const PriorModel& prior = context_->prior();
  const TypeInfo& info = context_->type_info(track.type_id);

  TrackGraph tg = build_graph(track);
  const MapAssignment map = max_product(tg.graph);

  TrackEval eval;
  const int span = track.last_t - track.first_t + 1;
  for (int i = 0; i < span; ++i) {
    if (tg.action_var[i] >= 0) track.frames[i].action = map.values[tg.action_var[i]];
    for (std::size_t k = 0; k < info.attrs.size(); ++k)
      track.frames[i].attrs[k] =
          static_cast<std::int8_t>(map.values[tg.attr_var[k][i]]);
  }
  for (const auto& leaf : tg.leaves)
    eval.view_attr_writes.push_back(
        {leaf.tracklet, leaf.obs_pos, info.attrs[leaf.attr_index],
         map.values[leaf.var] == 1});

  double score = map.log_score;
  for (int ti : track.tracklets) score += tracklet_const_ll(ti);

  // value-independent compatibility: spatial and appearance terms
  for (int t = track.first_t; t <= track.last_t; ++t) {
    const TrackFrame& f = track.frame(t);
    for (const auto& [ti, oi] : f.links) {
      const Tracklet& tr = hierarchy_->tracklets().at(ti);
      const ViewEntityNode& node = hierarchy_->view_entity(ti, oi);
      const Vec2 g = project_to_ground(ev.camera(tr.camera_index).image_to_ground,
                                       node.image_location);
      score -= w.w1 * std::hypot(f.world.x - g.x, f.world.y - g.y);
      double d2 = 0.0;
      for (std::size_t i = 0; i < f.appearance.size(); ++i) {
        const double d = f.appearance[i] - node.appearance[i];
        d2 += d * d;
      }
      score -= w.w2 * std::sqrt(d2);
    }
  }

  if (track.first_t > 1) score += prior.birth_logprob();
  if (track.last_t < hierarchy_->num_frames()) score += prior.death_logprob();

  eval.track = std::move(track);
  eval.score = score;
  return eval;
}

double TrackScorer::signature_logprob(const std::vector<SceneTrack>& tracks) const {
  std::vector<std::string> types;
  for (const auto& t : tracks)
    if (t.first_t == 1) types.push_back(t.type_id);
  std::sort(types.begin(), types.end());
  return context_->prior().initial_logprob(types);
}

}  // namespace xview::scoring
