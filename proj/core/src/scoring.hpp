#pragma once

#include <map>
#include <string>
#include <vector>

#include "xview/energy.hpp"
#include "xview/evidence.hpp"
#include "xview/factor_graph.hpp"
#include "xview/graphs.hpp"
#include "xview/ontology.hpp"
#include "xview/prior.hpp"

namespace xview::scoring {

struct TypeInfo {
  std::vector<std::string> actions;  // sorted by id
  std::vector<std::string> attrs;    // sorted by id
  std::vector<double> trans_lp;      // A x A log transition probabilities
  std::vector<double> attr_flip_lp;  // per attribute
  std::vector<double> attr_keep_lp;
};

class Context {
 public:
  Context(const OntologyGraph& ontology, const Evidence& evidence,
          const EnergyWeights& weights, const PriorModel& prior);

  const TypeInfo& type_info(const std::string& type_id) const;
  const OntologyGraph& ontology() const { return *ontology_; }
  const Evidence& evidence() const { return *evidence_; }
  const EnergyWeights& weights() const { return weights_; }
  const PriorModel& prior() const { return *prior_; }

 private:
  const OntologyGraph* ontology_;
  const Evidence* evidence_;
  EnergyWeights weights_;
  const PriorModel* prior_;
  std::map<std::string, TypeInfo> types_;
};

struct ViewAttrWrite {
  int tracklet = -1;
  int obs_pos = -1;
  std::string attr_id;
  bool value = false;
};

struct TrackEval {
  SceneTrack track;  // values assigned by exact max-product
  double score = 0.0;
  std::vector<ViewAttrWrite> view_attr_writes;
};

/// Variable layout of one track's factor graph, for marginal queries.
struct TrackGraph {
  FactorGraph graph;
  std::vector<int> action_var;                 // per span frame, -1 if none
  std::vector<std::vector<int>> attr_var;      // [attr][span frame]
  struct Leaf {
    int var;
    int tracklet;
    int obs_pos;
    int attr_index;
  };
  std::vector<Leaf> leaves;
};

/// Scores tracks of one hierarchy at their per-track value optimum. The
/// hierarchy's tracklet table and evidence must stay alive and unchanged.
class TrackScorer {
 public:
  TrackScorer(const Context& context, const Hierarchy& hierarchy);

  TrackGraph build_graph(const SceneTrack& track) const;
  TrackEval evaluate(const std::vector<int>& tracklet_set) const;
  TrackEval evaluate(SceneTrack track) const;  // track already aggregated

  double tracklet_const_ll(int tracklet_index) const;

  /// Signature log-prior of the types alive at t=1 for the given tracks.
  double signature_logprob(const std::vector<SceneTrack>& tracks) const;

  const Context& context() const { return *context_; }

 private:
  const Context* context_;
  const Hierarchy* hierarchy_;
  mutable std::vector<double> const_ll_;
  mutable std::vector<char> const_ll_ready_;
};

}  // namespace xview::scoring
