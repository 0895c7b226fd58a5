#pragma once

#include <string>
#include <vector>

#include "xview/energy.hpp"
#include "xview/factor_graph.hpp"
#include "xview/graphs.hpp"
#include "xview/prior.hpp"
#include "xview/sampler.hpp"

namespace xview {

struct VariableRole {
  enum class Kind { SceneAction, SceneAttribute, ViewAttribute };
  Kind kind = Kind::SceneAction;
  int track_index = -1;
  int t = 0;
  std::string attr_id;  // attribute kinds only
  int tracklet = -1;    // view attributes only
  int obs_pos = -1;
};

struct BuiltFactorGraph {
  FactorGraph graph;
  std::vector<VariableRole> roles;
};

/// Per scene entity: an action chain over its span (uniform unaries at
/// unobserved frames) and per-attribute chains with view-attribute leaves,
/// all tied by the prior's transition model. The result is a forest.
BuiltFactorGraph build_factor_graph(const Hierarchy& hierarchy, const Evidence& evidence,
                                    const EnergyWeights& weights, const PriorModel& prior);

/// Exact per-entity max-product value inference, written back into the scene
/// tracks and the view graphs. Returns the resulting log posterior.
double infer_values(Hierarchy& hierarchy, const Evidence& evidence,
                    const EnergyWeights& weights, const PriorModel& prior);

struct ParseConfig {
  SamplerConfig sampler;
  int rounds = 10;
  double convergence_eps = 1e-6;
  double det_threshold = 0.5;
};

struct ParseOutcome {
  Hierarchy hierarchy;
  double log_posterior = 0.0;
  std::vector<TraceEntry> trace;
  int rounds_run = 0;
};

/// Alternates structure sampling and value inference until a round improves
/// the log posterior by less than convergence_eps or the round cap is hit.
ParseOutcome joint_parse(const OntologyGraph& ontology, const Evidence& evidence,
                         const EnergyWeights& weights, const PriorModel& prior,
                         const ParseConfig& config);

struct ProjectedViews {
  std::vector<ViewParseGraph> views;
  int skipped = 0;  // camera/frame pairs dropped because they map near infinity
};

/// For every scene entity, camera and in-span frame without a link,
/// synthesizes a bbox centered at the image projection of the scene location,
/// sized by the entity's median linked bbox, flagged projected.
ProjectedViews project_missing(const Hierarchy& hierarchy, const Evidence& evidence);

/// Posterior marginals of the scene attribute variables via sum-product.
AttrMarginals attribute_marginals(const Hierarchy& hierarchy, const Evidence& evidence,
                                  const EnergyWeights& weights, const PriorModel& prior);

}  // namespace xview
