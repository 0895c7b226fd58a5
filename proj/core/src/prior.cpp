#include "xview/prior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace xview {

using nlohmann::json;

namespace {
constexpr double kProbFloor = 1e-12;

double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }
}  // namespace

void PriorModel::set_birth_death(double birth_lp, double death_lp) {
  birth_lp_ = birth_lp;
  death_lp_ = death_lp;
}

std::string PriorModel::signature_key(std::vector<std::string> types) {
  std::sort(types.begin(), types.end());
  std::string key;
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (i) key += '|';
    key += types[i];
  }
  return key;
}

double PriorModel::initial_logprob(const std::vector<std::string>& sorted_types) const {
  std::string key;
  for (std::size_t i = 0; i < sorted_types.size(); ++i) {
    if (i) key += '|';
    key += sorted_types[i];
  }
  auto it = signature_probs_.find(key);
  return safe_log(it == signature_probs_.end() ? unseen_signature_prob_ : it->second);
}

const PriorModel::TypeTransitions* PriorModel::transitions(const std::string& type_id) const {
  auto it = transitions_.find(type_id);
  return it == transitions_.end() ? nullptr : &it->second;
}

double PriorModel::action_transition_logprob(const std::string& type_id,
                                             const std::string& from_action,
                                             const std::string& to_action) const {
  const TypeTransitions* tt = transitions(type_id);
  if (!tt) return 0.0;  // no action model for this type
  auto idx = [&](const std::string& a) {
    auto it = std::lower_bound(tt->actions.begin(), tt->actions.end(), a);
    if (it == tt->actions.end() || *it != a)
      throw UnknownActionLabel("action '" + a + "' is not in the prior's table for '" +
                               type_id + "'");
    return static_cast<int>(it - tt->actions.begin());
  };
  const int n = static_cast<int>(tt->actions.size());
  return safe_log(tt->matrix[idx(from_action) * n + idx(to_action)]);
}

double PriorModel::attr_flip_prob(const std::string& attr_id) const {
  auto it = attr_flip_.find(attr_id);
  return it == attr_flip_.end() ? 0.5 : it->second;
}

double PriorModel::attr_change_logprob(const std::string& attr_id, bool changed) const {
  const double p = attr_flip_prob(attr_id);
  return safe_log(changed ? p : 1.0 - p);
}

PriorModel PriorModel::uniform(const OntologyGraph& ontology) {
  PriorModel pm;
  for (const auto& node : ontology.nodes()) {
    if (node.kind != NodeKind::Object && node.kind != NodeKind::Part) continue;
    const auto& actions = ontology.actions_of(node.id);
    if (actions.empty()) continue;
    TypeTransitions tt;
    tt.actions = actions;
    const int n = static_cast<int>(actions.size());
    tt.matrix.assign(static_cast<std::size_t>(n) * n, 1.0 / n);
    pm.transitions_[node.id] = std::move(tt);
  }
  for (const auto& node : ontology.nodes())
    if (node.kind == NodeKind::Attribute) pm.attr_flip_[node.id] = 0.5;
  return pm;
}

std::vector<TrackHistory> track_histories(const Hierarchy& hierarchy) {
  std::vector<TrackHistory> out;
  for (std::size_t k = 0; k < hierarchy.tracks().size(); ++k) {
    const SceneTrack& track = hierarchy.tracks()[k];
    TrackHistory h;
    h.type_id = track.type_id;
    h.first_t = track.first_t;
    const auto& actions = hierarchy.ontology().actions_of(track.type_id);
    const auto& attrs = hierarchy.ontology().attributes_of(track.type_id);
    for (int t = track.first_t; t <= track.last_t; ++t) {
      const TrackFrame& f = track.frame(t);
      h.actions.push_back(f.action >= 0 ? std::optional<std::string>(actions[f.action])
                                        : std::nullopt);
      std::map<std::string, bool> a;
      for (std::size_t i = 0; i < attrs.size(); ++i)
        if (f.attrs[i] >= 0) a[attrs[i]] = (f.attrs[i] == 1);
      h.attributes.push_back(std::move(a));
    }
    out.push_back(std::move(h));
  }
  return out;
}

PriorModel estimate_prior_histories(const std::vector<std::vector<TrackHistory>>& sequences,
                                    double alpha, const OntologyGraph& ontology) {
  if (sequences.empty()) throw EmptyTrainingSet("estimate_prior: no training hierarchies");
  if (!(alpha > 0.0)) throw InvalidConfig("estimate_prior: smoothing alpha must be > 0");

  PriorModel pm = PriorModel::uniform(ontology);
  pm.alpha_ = alpha;

  // (a) t=1 grounded-type signatures
  std::map<std::string, int> signature_counts;
  for (const auto& seq : sequences) {
    std::vector<std::string> types;
    for (const auto& h : seq)
      if (h.first_t == 1 && !h.actions.empty()) types.push_back(h.type_id);
    signature_counts[PriorModel::signature_key(std::move(types))]++;
  }
  const double n_sig = static_cast<double>(sequences.size());
  const double k_sig = static_cast<double>(signature_counts.size());
  const double denom = n_sig + alpha * (k_sig + 1.0);
  pm.signature_probs_.clear();
  for (const auto& [key, c] : signature_counts)
    pm.signature_probs_[key] = (c + alpha) / denom;
  pm.unseen_signature_prob_ = alpha / denom;

  // (b) per-type action transitions
  std::map<std::string, std::vector<double>> counts;
  for (const auto& seq : sequences) {
    for (const auto& h : seq) {
      const PriorModel::TypeTransitions* tt = pm.transitions(h.type_id);
      if (!tt) continue;
      const int n = static_cast<int>(tt->actions.size());
      auto& c = counts[h.type_id];
      if (c.empty()) c.assign(static_cast<std::size_t>(n) * n, 0.0);
      auto idx = [&](const std::string& a) {
        auto it = std::lower_bound(tt->actions.begin(), tt->actions.end(), a);
        return it != tt->actions.end() && *it == a ? static_cast<int>(it - tt->actions.begin())
                                                   : -1;
      };
      for (std::size_t i = 0; i + 1 < h.actions.size(); ++i) {
        if (!h.actions[i] || !h.actions[i + 1]) continue;
        const int a = idx(*h.actions[i]);
        const int b = idx(*h.actions[i + 1]);
        if (a >= 0 && b >= 0) c[static_cast<std::size_t>(a) * n + b] += 1.0;
      }
    }
  }
  for (auto& [type_id, tt] : pm.transitions_) {
    const int n = static_cast<int>(tt.actions.size());
    auto cit = counts.find(type_id);
    for (int i = 0; i < n; ++i) {
      double row = 0.0;
      for (int j = 0; j < n; ++j)
        row += cit == counts.end() ? 0.0 : cit->second[static_cast<std::size_t>(i) * n + j];
      for (int j = 0; j < n; ++j) {
        const double c = cit == counts.end() ? 0.0 : cit->second[static_cast<std::size_t>(i) * n + j];
        tt.matrix[static_cast<std::size_t>(i) * n + j] = (c + alpha) / (row + alpha * n);
      }
    }
  }

  // (c) attribute flips
  std::map<std::string, std::pair<double, double>> flips;  // attr -> (flips, total)
  for (const auto& seq : sequences) {
    for (const auto& h : seq) {
      for (std::size_t i = 0; i + 1 < h.attributes.size(); ++i) {
        for (const auto& [attr, value] : h.attributes[i]) {
          auto it = h.attributes[i + 1].find(attr);
          if (it == h.attributes[i + 1].end()) continue;
          auto& f = flips[attr];
          f.second += 1.0;
          if (it->second != value) f.first += 1.0;
        }
      }
    }
  }
  for (auto& [attr, p] : pm.attr_flip_) {
    auto it = flips.find(attr);
    const double f = it == flips.end() ? 0.0 : it->second.first;
    const double n = it == flips.end() ? 0.0 : it->second.second;
    p = (f + alpha) / (n + 2.0 * alpha);
  }
  for (const auto& [attr, fn] : flips)
    if (!pm.attr_flip_.count(attr))
      pm.attr_flip_[attr] = (fn.first + alpha) / (fn.second + 2.0 * alpha);

  return pm;
}

PriorModel estimate_prior(const std::vector<const Hierarchy*>& training, double alpha) {
  if (training.empty()) throw EmptyTrainingSet("estimate_prior: no training hierarchies");
  std::vector<std::vector<TrackHistory>> sequences;
  sequences.reserve(training.size());
  for (const Hierarchy* h : training) sequences.push_back(track_histories(*h));
  return estimate_prior_histories(sequences, alpha, training.front()->ontology());
}

double transition_logprob(const PriorModel& prior, const SceneParseGraph& from,
                          const SceneParseGraph& to) {
  double lp = 0.0;
  for (const auto& e : from.entities) {
    const SceneEntityNode* next = to.find(e.id);
    if (!next) {
      lp += prior.death_logprob();
      continue;
    }
    if (e.action && next->action)
      lp += prior.action_transition_logprob(e.object_type, *e.action, *next->action);
    for (const auto& [attr, value] : e.attributes) {
      auto it = next->attributes.find(attr);
      if (it == next->attributes.end()) continue;
      lp += prior.attr_change_logprob(attr, it->second != value);
    }
  }
  for (const auto& e : to.entities)
    if (!from.find(e.id)) lp += prior.birth_logprob();
  return lp;
}

double initial_logprob(const PriorModel& prior, const SceneParseGraph& g1) {
  std::vector<std::string> types;
  types.reserve(g1.entities.size());
  for (const auto& e : g1.entities) types.push_back(e.object_type);
  std::sort(types.begin(), types.end());
  return prior.initial_logprob(types);
}

std::string serialize_prior(const PriorModel& prior) {
  json j;
  j["alpha"] = prior.alpha();
  j["birth_logprob"] = prior.birth_logprob();
  j["death_logprob"] = prior.death_logprob();
  j["unseen_signature_prob"] = prior.unseen_signature_prob();
  j["signatures"] = prior.signature_probs();
  json transitions = json::object();
  for (const auto& [type_id, tt] : prior.all_transitions())
    transitions[type_id] = {{"actions", tt.actions}, {"matrix", tt.matrix}};
  j["transitions"] = transitions;
  j["attr_flip"] = prior.attr_flip_probs();
  return j.dump(2) + "\n";
}

PriorModel prior_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw MalformedDocument(std::string("prior document: ") + e.what());
  }
  PriorModel pm;
  try {
    pm.alpha_ = j.at("alpha").get<double>();
    pm.birth_lp_ = j.at("birth_logprob").get<double>();
    pm.death_lp_ = j.at("death_logprob").get<double>();
    pm.unseen_signature_prob_ = j.at("unseen_signature_prob").get<double>();
    pm.signature_probs_ = j.at("signatures").get<std::map<std::string, double>>();
    for (auto it = j.at("transitions").begin(); it != j.at("transitions").end(); ++it) {
      PriorModel::TypeTransitions tt;
      tt.actions = it.value().at("actions").get<std::vector<std::string>>();
      tt.matrix = it.value().at("matrix").get<std::vector<double>>();
      const std::size_t n = tt.actions.size();
      if (tt.matrix.size() != n * n)
        throw SchemaViolation("prior transitions for '" + it.key() + "' have a malformed matrix");
      for (std::size_t r = 0; r < n; ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < n; ++c) row += tt.matrix[r * n + c];
        if (std::abs(row - 1.0) > 1e-9)
          throw SchemaViolation("prior transition row for '" + it.key() +
                                "' does not sum to 1");
      }
      pm.transitions_[it.key()] = std::move(tt);
    }
    pm.attr_flip_ = j.at("attr_flip").get<std::map<std::string, double>>();
  } catch (const json::exception& e) {
    throw SchemaViolation(std::string("prior document: ") + e.what());
  }
  return pm;
}

void save_prior(const PriorModel& prior, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write prior file '" + path.string() + "'");
  out << serialize_prior(prior);
}

PriorModel load_prior(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MalformedDocument("cannot open prior file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return prior_from_json_text(buf.str());
}

}  // namespace xview
