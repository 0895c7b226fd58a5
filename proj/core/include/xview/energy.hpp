#pragma once

#include <span>

#include "xview/evidence.hpp"
#include "xview/graphs.hpp"
#include "xview/prior.hpp"

namespace xview {

struct EnergyWeights {
  double w1 = 1.0;  // spatial
  double w2 = 1.0;  // appearance
  double w3 = 1.0;  // action
  double w4 = 1.0;  // attribute
  double xi = 1.0;  // per-attribute mismatch penalty
  double eps_prob = 1e-6;  // probability floor inside every log
};

/// Sum over all grounded view nodes of log(max(score, eps)): detection score
/// for object nodes, the chosen action's score, and the chosen polarity's
/// score per attribute. Entities flagged projected carry no evidence and are
/// skipped. Throws MissingRecord when a grounded entity has no proposal.
double log_likelihood(std::span<const ViewParseGraph> views, const Evidence& evidence,
                      const EnergyWeights& weights);

/// Sum of L2 appearance distances over linked scene-view pairs.
double appearance_energy(const SceneParseGraph& scene, const ViewParseGraph& view,
                         std::span<const IdentityLink> links);

/// Sum of L2 distances between scene locations and ground-projected view
/// foot points over linked pairs.
double spatial_energy(const SceneParseGraph& scene, const ViewParseGraph& view,
                      std::span<const IdentityLink> links, const CameraModel& camera);

/// Sum over linked pairs of -log(max(view score of the scene action, eps)).
double action_energy(const SceneParseGraph& scene, const ViewParseGraph& view,
                     std::span<const IdentityLink> links, const Evidence& evidence,
                     const EnergyWeights& weights);

/// xi times the number of (pair, attribute) combinations whose values differ.
double attribute_energy(const SceneParseGraph& scene, const ViewParseGraph& view,
                        std::span<const IdentityLink> links, const EnergyWeights& weights);

struct EnergyBreakdown {
  double spatial = 0.0;
  double appearance = 0.0;
  double action = 0.0;
  double attribute = 0.0;

  double weighted(const EnergyWeights& w) const {
    return w.w1 * spatial + w.w2 * appearance + w.w3 * action + w.w4 * attribute;
  }
};

EnergyBreakdown energy_breakdown(const SceneParseGraph& scene, const ViewParseGraph& view,
                                 std::span<const IdentityLink> links,
                                 const CameraModel& camera, const Evidence& evidence,
                                 const EnergyWeights& weights);

/// w1*E_S + w2*E_A + w3*E_Act + w4*E_Attr.
double compatibility_energy(const SceneParseGraph& scene, const ViewParseGraph& view,
                            std::span<const IdentityLink> links, const CameraModel& camera,
                            const Evidence& evidence, const EnergyWeights& weights);

/// Unnormalized log posterior of the full hierarchy: likelihood plus the
/// structural prior minus all per-frame compatibility energies (the Gibbs
/// normalizer is treated as constant).
double log_posterior(const Hierarchy& hierarchy, const Evidence& evidence,
                     const EnergyWeights& weights, const PriorModel& prior);

}  // namespace xview
