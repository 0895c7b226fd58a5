#include "xview/inference.hpp"

#include <algorithm>
#include <cmath>

#include "scoring.hpp"

namespace xview {

BuiltFactorGraph build_factor_graph(const Hierarchy& hierarchy, const Evidence& evidence,
                                    const EnergyWeights& weights, const PriorModel& prior) {
  scoring::Context ctx(hierarchy.ontology(), evidence, weights, prior);
  scoring::TrackScorer scorer(ctx, hierarchy);

  BuiltFactorGraph built;
  for (int k = 0; k < static_cast<int>(hierarchy.tracks().size()); ++k) {
    const SceneTrack& track = hierarchy.tracks()[k];
    const auto& attrs = hierarchy.ontology().attributes_of(track.type_id);
    scoring::TrackGraph tg = scorer.build_graph(track);

    // splice the per-track graph into the composite with an index offset
    std::vector<int> mapped(tg.graph.num_variables(), -1);
    for (int v = 0; v < tg.graph.num_variables(); ++v) {
      mapped[v] = built.graph.add_variable(tg.graph.domain_size(v));
      built.graph.add_unary(mapped[v], tg.graph.unaries()[v]);
      built.roles.push_back({});  // placeholder, filled below
    }
    for (const auto& f : tg.graph.pairwise())
      built.graph.add_pairwise(mapped[f.u], mapped[f.v], f.table);

    for (int i = 0; i < static_cast<int>(tg.action_var.size()); ++i) {
      if (tg.action_var[i] < 0) continue;
      VariableRole& role = built.roles[mapped[tg.action_var[i]]];
      role.kind = VariableRole::Kind::SceneAction;
      role.track_index = k;
      role.t = track.first_t + i;
    }
    for (int a = 0; a < static_cast<int>(tg.attr_var.size()); ++a) {
      for (int i = 0; i < static_cast<int>(tg.attr_var[a].size()); ++i) {
        VariableRole& role = built.roles[mapped[tg.attr_var[a][i]]];
        role.kind = VariableRole::Kind::SceneAttribute;
        role.track_index = k;
        role.t = track.first_t + i;
        role.attr_id = attrs[a];
      }
    }
    for (const auto& leaf : tg.leaves) {
      VariableRole& role = built.roles[mapped[leaf.var]];
      role.kind = VariableRole::Kind::ViewAttribute;
      role.track_index = k;
      role.t = hierarchy.tracklets().at(leaf.tracklet).obs[leaf.obs_pos].t;
      role.attr_id = attrs[leaf.attr_index];
      role.tracklet = leaf.tracklet;
      role.obs_pos = leaf.obs_pos;
    }
  }
  return built;
}

double infer_values(Hierarchy& hierarchy, const Evidence& evidence,
                    const EnergyWeights& weights, const PriorModel& prior) {
  scoring::Context ctx(hierarchy.ontology(), evidence, weights, prior);
  scoring::TrackScorer scorer(ctx, hierarchy);

  double total = 0.0;
  std::vector<int> remove;
  std::vector<SceneTrack> add;
  std::vector<std::vector<scoring::ViewAttrWrite>> writes;
  for (int k = 0; k < static_cast<int>(hierarchy.tracks().size()); ++k) {
    scoring::TrackEval ev = scorer.evaluate(hierarchy.tracks()[k].tracklets);
    total += ev.score;
    remove.push_back(k);
    add.push_back(std::move(ev.track));
    writes.push_back(std::move(ev.view_attr_writes));
  }
  total += scorer.signature_logprob(add);
  hierarchy.replace_tracks(std::move(remove), std::move(add));
  for (const auto& ws : writes)
    for (const auto& w : ws)
      hierarchy.view_entity(w.tracklet, w.obs_pos).attributes[w.attr_id] = w.value;
  return total;
}

ParseOutcome joint_parse(const OntologyGraph& ontology, const Evidence& evidence,
                         const EnergyWeights& weights, const PriorModel& prior,
                         const ParseConfig& config) {
  if (config.rounds < 1) throw InvalidConfig("joint_parse: rounds must be >= 1");

  Hierarchy h = Hierarchy::initial(
      ontology, evidence, initial_view_graphs(evidence, ontology, config.det_threshold));

  ParseOutcome outcome;
  double prev = infer_values(h, evidence, weights, prior);

  for (int round = 1; round <= config.rounds; ++round) {
    outcome.rounds_run = round;
    SamplerConfig sc = config.sampler;
    sc.seed = config.sampler.seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(round - 1);
    SamplerResult res = run_sampler(h, evidence, weights, prior, sc);

    const int offset = (round - 1) * config.sampler.iterations;
    for (auto e : res.trace) {
      e.iteration += offset;
      outcome.trace.push_back(e);
    }

    h = std::move(res.best);
    const double lp = res.best_log_posterior;
    const double improvement = lp - prev;
    prev = lp;
    if (improvement < config.convergence_eps) break;
  }

  outcome.log_posterior = prev;
  outcome.hierarchy = std::move(h);
  return outcome;
}

namespace {

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  if (n == 0) return 0.0;
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

ProjectedViews project_missing(const Hierarchy& hierarchy, const Evidence& evidence) {
  ProjectedViews out;
  out.views = hierarchy.views();
  const int T = hierarchy.num_frames();
  const int M = hierarchy.num_cameras();

  for (int k = 0; k < static_cast<int>(hierarchy.tracks().size()); ++k) {
    const SceneTrack& track = hierarchy.tracks()[k];
    std::vector<double> widths, heights;
    for (int t = track.first_t; t <= track.last_t; ++t)
      for (const auto& [ti, oi] : track.frame(t).links) {
        const Rect& b = hierarchy.view_entity(ti, oi).bbox;
        widths.push_back(b.width());
        heights.push_back(b.height());
      }
    if (widths.empty()) continue;
    const double w = median(widths);
    const double hgt = median(heights);

    const auto& actions = hierarchy.ontology().actions_of(track.type_id);
    const auto& attrs = hierarchy.ontology().attributes_of(track.type_id);
    const std::string sid = hierarchy.scene_id(k);

    for (int t = std::max(1, track.first_t); t <= std::min(T, track.last_t); ++t) {
      const TrackFrame& f = track.frame(t);
      std::uint64_t linked_cams = 0;
      for (const auto& [ti, oi] : f.links)
        linked_cams |= std::uint64_t{1} << hierarchy.tracklets().at(ti).camera_index;
      for (int cam = 0; cam < M; ++cam) {
        if (linked_cams & (std::uint64_t{1} << cam)) continue;
        Vec2 p;
        try {
          p = project_to_image(evidence.camera(cam).image_to_ground, f.world);
        } catch (const AtInfinity&) {
          out.skipped++;
          continue;
        }
        ViewEntityNode node;
        node.id = "proj:" + sid;
        node.object_type = track.type_id;
        node.bbox = {p.x - w / 2.0, p.y - hgt / 2.0, p.x + w / 2.0, p.y + hgt / 2.0};
        node.image_location = foot_point(node.bbox);
        node.appearance = f.appearance;
        if (f.action >= 0) node.action = actions[f.action];
        for (std::size_t a = 0; a < attrs.size(); ++a)
          if (f.attrs[a] >= 0) node.attributes[attrs[a]] = (f.attrs[a] == 1);
        node.detection_score = 0.0;
        node.projected = true;
        out.views[static_cast<std::size_t>(cam) * T + (t - 1)].entities.push_back(
            std::move(node));
      }
    }
  }
  return out;
}

AttrMarginals attribute_marginals(const Hierarchy& hierarchy, const Evidence& evidence,
                                  const EnergyWeights& weights, const PriorModel& prior) {
  scoring::Context ctx(hierarchy.ontology(), evidence, weights, prior);
  scoring::TrackScorer scorer(ctx, hierarchy);

  AttrMarginals out;
  for (int k = 0; k < static_cast<int>(hierarchy.tracks().size()); ++k) {
    const SceneTrack& track = hierarchy.tracks()[k];
    const auto& attrs = hierarchy.ontology().attributes_of(track.type_id);
    if (attrs.empty()) continue;
    scoring::TrackGraph tg = scorer.build_graph(track);
    const auto marginals = sum_product(tg.graph);
    auto& per_t = out[hierarchy.scene_id(k)];
    for (std::size_t a = 0; a < attrs.size(); ++a)
      for (int i = 0; i < static_cast<int>(tg.attr_var[a].size()); ++i)
        per_t[track.first_t + i][attrs[a]] = marginals[tg.attr_var[a][i]][1];
  }
  return out;
}

}  // namespace xview
