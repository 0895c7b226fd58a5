#include "xview/energy.hpp"

#include <cmath>

namespace xview {

namespace {

double floored_log(double p, double eps) { return std::log(std::max(p, eps)); }

double l2(const AppearanceFeature& a, const AppearanceFeature& b) {
  if (a.size() != b.size())
    throw DimensionMismatch("appearance feature dimensions differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

struct LinkedPair {
  const SceneEntityNode* scene;
  const ViewEntityNode* view;
};

// Links restricted to this (scene graph, view graph) pair; both entities must
// resolve or the link is ill-formed.
std::vector<LinkedPair> resolve_links(const SceneParseGraph& scene,
                                      const ViewParseGraph& view,
                                      std::span<const IdentityLink> links) {
  std::vector<LinkedPair> out;
  for (const auto& link : links) {
    if (link.t != view.t || link.camera_id != view.camera_id) continue;
    const SceneEntityNode* s = scene.find(link.scene_id);
    const ViewEntityNode* v = view.find(link.view_id);
    if (!s)
      throw UnknownEntity("link references unknown scene entity '" + link.scene_id + "'");
    if (!v)
      throw UnknownEntity("link references unknown view entity '" + link.view_id + "'");
    out.push_back({s, v});
  }
  return out;
}

}  // namespace

double log_likelihood(std::span<const ViewParseGraph> views, const Evidence& evidence,
                      const EnergyWeights& weights) {
  double ll = 0.0;
  for (const auto& graph : views) {
    const int cam = evidence.camera_index(graph.camera_id);
    for (const auto& e : graph.entities) {
      if (e.projected) continue;
      const ProposalRecord* rec =
          cam >= 0 ? evidence.find(cam, graph.t, e.id) : nullptr;
      if (!rec)
        throw MissingRecord("no proposal record for grounded entity '" + e.id +
                            "' at camera " + std::to_string(graph.camera_id) +
                            ", t=" + std::to_string(graph.t));
      ll += floored_log(rec->det, weights.eps_prob);
      if (e.action) {
        const double* s = rec->action_score(*e.action);
        if (!s)
          throw UnknownActionLabel("entity '" + e.id + "' grounded with action '" +
                                   *e.action + "' absent from its score table");
        ll += floored_log(*s, weights.eps_prob);
      }
      for (const auto& [attr, value] : e.attributes) {
        const double* s = rec->attr_score(attr);
        if (!s) continue;  // no evidence for this attribute
        ll += floored_log(value ? *s : 1.0 - *s, weights.eps_prob);
      }
    }
  }
  return ll;
}

double appearance_energy(const SceneParseGraph& scene, const ViewParseGraph& view,
                         std::span<const IdentityLink> links) {
  double e = 0.0;
  for (const auto& [s, v] : resolve_links(scene, view, links)) {
    if (s->appearance.empty()) continue;  // no pooled feature at this frame
    e += l2(s->appearance, v->appearance);
  }
  return e;
}

double spatial_energy(const SceneParseGraph& scene, const ViewParseGraph& view,
                      std::span<const IdentityLink> links, const CameraModel& camera) {
  double e = 0.0;
  for (const auto& [s, v] : resolve_links(scene, view, links)) {
    const Vec2 g = project_to_ground(camera.image_to_ground, v->image_location);
    e += std::hypot(s->world_location.x - g.x, s->world_location.y - g.y);
  }
  return e;
}

double action_energy(const SceneParseGraph& scene, const ViewParseGraph& view,
                     std::span<const IdentityLink> links, const Evidence& evidence,
                     const EnergyWeights& weights) {
  const int cam = evidence.camera_index(view.camera_id);
  double e = 0.0;
  for (const auto& [s, v] : resolve_links(scene, view, links)) {
    if (!s->action) continue;  // scene action not grounded
    const ProposalRecord* rec = cam >= 0 ? evidence.find(cam, view.t, v->id) : nullptr;
    if (!rec)
      throw MissingRecord("no proposal record behind view entity '" + v->id + "'");
    const double* score = rec->action_score(*s->action);
    if (!score)
      throw UnknownActionLabel("scene action '" + *s->action +
                               "' absent from the view score table of '" + v->id + "'");
    e += -floored_log(*score, weights.eps_prob);
  }
  return e;
}

double attribute_energy(const SceneParseGraph& scene, const ViewParseGraph& view,
                        std::span<const IdentityLink> links, const EnergyWeights& weights) {
  int mismatches = 0;
  for (const auto& [s, v] : resolve_links(scene, view, links)) {
    for (const auto& [attr, value] : s->attributes) {
      auto it = v->attributes.find(attr);
      if (it == v->attributes.end()) continue;  // absent on the view side
      if (it->second != value) ++mismatches;
    }
  }
  return weights.xi * mismatches;
}

EnergyBreakdown energy_breakdown(const SceneParseGraph& scene, const ViewParseGraph& view,
                                 std::span<const IdentityLink> links,
                                 const CameraModel& camera, const Evidence& evidence,
                                 const EnergyWeights& weights) {
  EnergyBreakdown b;
  b.spatial = spatial_energy(scene, view, links, camera);
  b.appearance = appearance_energy(scene, view, links);
  b.action = action_energy(scene, view, links, evidence, weights);
  b.attribute = attribute_energy(scene, view, links, weights);
  return b;
}

double compatibility_energy(const SceneParseGraph& scene, const ViewParseGraph& view,
                            std::span<const IdentityLink> links, const CameraModel& camera,
                            const Evidence& evidence, const EnergyWeights& weights) {
  return energy_breakdown(scene, view, links, camera, evidence, weights).weighted(weights);
}

double log_posterior(const Hierarchy& hierarchy, const Evidence& evidence,
                     const EnergyWeights& weights, const PriorModel& prior) {
  double lp = log_likelihood(hierarchy.views(), evidence, weights);

  const int T = hierarchy.num_frames();
  if (T >= 1) {
    SceneParseGraph prev = hierarchy.scene_graph(1);
    lp += initial_logprob(prior, prev);
    for (int t = 2; t <= T; ++t) {
      SceneParseGraph cur = hierarchy.scene_graph(t);
      lp += transition_logprob(prior, prev, cur);
      prev = std::move(cur);
    }
  }

  for (int t = 1; t <= T; ++t) {
    const SceneParseGraph scene = hierarchy.scene_graph(t);
    for (int cam = 0; cam < hierarchy.num_cameras(); ++cam) {
      const std::vector<IdentityLink> links = hierarchy.links_at(cam, t);
      if (links.empty()) continue;
      lp -= compatibility_energy(scene, hierarchy.view(cam, t), links,
                                 evidence.camera(cam), evidence, weights);
    }
  }
  return lp;
}

}  // namespace xview
