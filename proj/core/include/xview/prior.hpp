#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xview/graphs.hpp"
#include "xview/ontology.hpp"

namespace xview {

/// Scene-side values of one entity over its lifetime, the unit the prior is
/// estimated from.
struct TrackHistory {
  std::string type_id;
  int first_t = 1;
  std::vector<std::optional<std::string>> actions;     // per frame of the span
  std::vector<std::map<std::string, bool>> attributes; // per frame of the span
};

/// Structural prior p(g1) plus the temporal transition model: per-type action
/// transition matrices, per-attribute flip probabilities, birth/death
/// penalties, and an additive-smoothed prior over grounded-type signatures at
/// t=1. Immutable after estimation.
class PriorModel {
 public:
  struct TypeTransitions {
    std::vector<std::string> actions;  // sorted by id
    std::vector<double> matrix;        // row-major probabilities, rows sum to 1
  };

  static PriorModel uniform(const OntologyGraph& ontology);

  double alpha() const { return alpha_; }
  double birth_logprob() const { return birth_lp_; }
  double death_logprob() const { return death_lp_; }
  void set_birth_death(double birth_lp, double death_lp);

  /// log p of the multiset of object types grounded at t=1 (sorted ids).
  double initial_logprob(const std::vector<std::string>& sorted_types) const;
  static std::string signature_key(std::vector<std::string> types);

  const TypeTransitions* transitions(const std::string& type_id) const;
  double action_transition_logprob(const std::string& type_id,
                                   const std::string& from_action,
                                   const std::string& to_action) const;
  double attr_change_logprob(const std::string& attr_id, bool changed) const;
  double attr_flip_prob(const std::string& attr_id) const;

  const std::map<std::string, TypeTransitions>& all_transitions() const { return transitions_; }
  const std::map<std::string, double>& signature_probs() const { return signature_probs_; }
  const std::map<std::string, double>& attr_flip_probs() const { return attr_flip_; }
  double unseen_signature_prob() const { return unseen_signature_prob_; }

  friend PriorModel estimate_prior_histories(
      const std::vector<std::vector<TrackHistory>>& sequences, double alpha,
      const OntologyGraph& ontology);
  friend PriorModel prior_from_json_text(const std::string& text);

 private:
  double alpha_ = 1.0;
  double birth_lp_ = -2.0;
  double death_lp_ = -2.0;
  std::map<std::string, double> signature_probs_;
  double unseen_signature_prob_ = 1.0;  // uniform prior contributes log 1 = 0
  std::map<std::string, TypeTransitions> transitions_;
  std::map<std::string, double> attr_flip_;
};

std::vector<TrackHistory> track_histories(const Hierarchy& hierarchy);

/// Additive-alpha-smoothed relative frequencies of t=1 signatures, per-type
/// action transitions and per-attribute flips. Throws EmptyTrainingSet.
PriorModel estimate_prior_histories(const std::vector<std::vector<TrackHistory>>& sequences,
                                    double alpha, const OntologyGraph& ontology);
PriorModel estimate_prior(const std::vector<const Hierarchy*>& training, double alpha);

/// Sum over persisting entities of action-transition and attribute flip/keep
/// log-probabilities; appearing/disappearing entities contribute the
/// birth/death penalties. Entities are matched by scene id.
double transition_logprob(const PriorModel& prior, const SceneParseGraph& from,
                          const SceneParseGraph& to);

/// log p(g1): the signature prior evaluated on the graph's grounded types.
double initial_logprob(const PriorModel& prior, const SceneParseGraph& g1);

std::string serialize_prior(const PriorModel& prior);
PriorModel prior_from_json_text(const std::string& text);
void save_prior(const PriorModel& prior, const std::filesystem::path& path);
PriorModel load_prior(const std::filesystem::path& path);

}  // namespace xview
