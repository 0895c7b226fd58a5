#include "xview/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace xview {

using nlohmann::json;

const double* ProposalRecord::action_score(const std::string& action_id) const {
  auto it = std::lower_bound(actions.begin(), actions.end(), action_id,
                             [](const auto& p, const std::string& k) { return p.first < k; });
  if (it == actions.end() || it->first != action_id) return nullptr;
  return &it->second;
}

const double* ProposalRecord::attr_score(const std::string& attr_id) const {
  auto it = std::lower_bound(attrs.begin(), attrs.end(), attr_id,
                             [](const auto& p, const std::string& k) { return p.first < k; });
  if (it == attrs.end() || it->first != attr_id) return nullptr;
  return &it->second;
}

namespace {

void validate_record(const ProposalRecord& r, const OntologyGraph& ontology,
                     const std::string& where) {
  if (r.t < 1) throw MalformedRecord(where + ": frame index t must be >= 1");
  if (r.tracklet.empty()) throw MalformedRecord(where + ": empty tracklet id");
  if (r.bbox.x_min > r.bbox.x_max || r.bbox.y_min > r.bbox.y_max)
    throw MalformedRecord(where + ": bbox is not a valid rectangle");
  if (!(r.det >= 0.0 && r.det <= 1.0))
    throw ScoreOutOfRange(where + ": detection score outside [0,1]");
  for (double v : r.feat)
    if (!std::isfinite(v)) throw MalformedRecord(where + ": non-finite appearance value");

  const OntologyNode* type = ontology.find(r.type);
  if (!type || (type->kind != NodeKind::Object && type->kind != NodeKind::Part))
    throw MalformedRecord(where + ": unknown object type '" + r.type + "'");

  const auto& legal_actions = ontology.actions_of(r.type);
  if (r.actions.size() != legal_actions.size())
    throw MalformedRecord(where + ": action scores must cover exactly the legal actions of '" +
                          r.type + "'");
  for (std::size_t i = 0; i < legal_actions.size(); ++i) {
    if (r.actions[i].first != legal_actions[i])
      throw MalformedRecord(where + ": action scores must cover exactly the legal actions of '" +
                            r.type + "'");
    if (!(r.actions[i].second >= 0.0 && r.actions[i].second <= 1.0))
      throw ScoreOutOfRange(where + ": action score outside [0,1]");
  }

  const auto& legal_attrs = ontology.attributes_of(r.type);
  for (const auto& [id, score] : r.attrs) {
    if (!std::binary_search(legal_attrs.begin(), legal_attrs.end(), id))
      throw MalformedRecord(where + ": attribute '" + id + "' is not legal for '" + r.type + "'");
    if (!(score >= 0.0 && score <= 1.0))
      throw ScoreOutOfRange(where + ": attribute score outside [0,1]");
  }
}

void sort_and_check_unique(std::vector<std::pair<std::string, double>>& kv,
                           const std::string& where, const char* what) {
  std::sort(kv.begin(), kv.end());
  for (std::size_t i = 1; i < kv.size(); ++i)
    if (kv[i].first == kv[i - 1].first)
      throw MalformedRecord(where + ": duplicate " + std::string(what) + " '" + kv[i].first + "'");
}

}  // namespace

Evidence Evidence::build(std::vector<CameraModel> cameras,
                         std::vector<ProposalRecord> records,
                         const OntologyGraph& ontology) {
  Evidence ev;
  ev.cameras_ = std::move(cameras);
  for (int i = 0; i < static_cast<int>(ev.cameras_.size()); ++i)
    ev.camera_index_[ev.cameras_[i].camera_id] = i;

  int T = 0;
  for (std::size_t k = 0; k < records.size(); ++k) {
    ProposalRecord& r = records[k];
    const std::string where = "record " + std::to_string(k + 1) + " (tracklet '" +
                              r.tracklet + "')";
    if (!ev.camera_index_.count(r.camera_id))
      throw UnknownCamera(where + ": unknown camera id " + std::to_string(r.camera_id));
    sort_and_check_unique(r.actions, where, "action");
    sort_and_check_unique(r.attrs, where, "attribute");
    std::sort(r.parts.begin(), r.parts.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    validate_record(r, ontology, where);
    T = std::max(T, r.t);
  }
  ev.num_frames_ = T;
  ev.grid_.assign(static_cast<std::size_t>(ev.cameras_.size()) * std::max(T, 1), {});

  std::set<std::tuple<int, int, std::string>> seen;
  std::map<std::pair<int, std::string>, std::string> tracklet_type;
  std::size_t dim = records.empty() ? 0 : records.front().feat.size();
  for (auto& r : records) {
    const int cam = ev.camera_index_.at(r.camera_id);
    if (!seen.insert({cam, r.t, r.tracklet}).second)
      throw MalformedRecord("tracklet '" + r.tracklet + "' appears twice at camera " +
                            std::to_string(r.camera_id) + ", t=" + std::to_string(r.t));
    auto [it, inserted] = tracklet_type.emplace(std::make_pair(cam, r.tracklet), r.type);
    if (!inserted && it->second != r.type)
      throw MalformedRecord("tracklet '" + r.tracklet + "' changes object type");
    if (r.feat.size() != dim)
      throw DimensionMismatch("appearance dimension differs across records");
    ev.total_++;
    ev.grid_[static_cast<std::size_t>(cam) * T + (r.t - 1)].push_back(std::move(r));
  }
  return ev;
}

int Evidence::camera_index(int camera_id) const {
  auto it = camera_index_.find(camera_id);
  return it == camera_index_.end() ? -1 : it->second;
}

const std::vector<ProposalRecord>& Evidence::at(int camera_index, int t) const {
  static const std::vector<ProposalRecord> kEmpty;
  if (num_frames_ == 0) return kEmpty;
  return grid_[static_cast<std::size_t>(camera_index) * num_frames_ + (t - 1)];
}

const ProposalRecord* Evidence::find(int camera_index, int t,
                                     const std::string& tracklet) const {
  for (const auto& r : at(camera_index, t))
    if (r.tracklet == tracklet) return &r;
  return nullptr;
}

namespace {

ProposalRecord record_from_json(const json& j, const std::string& where) {
  for (const char* key : {"camera", "t", "tracklet", "type", "bbox", "det", "feat", "actions", "attrs"})
    if (!j.contains(key))
      throw MalformedRecord(where + ": missing field '" + std::string(key) + "'");
  ProposalRecord r;
  r.camera_id = j.at("camera").get<int>();
  r.t = j.at("t").get<int>();
  r.tracklet = j.at("tracklet").get<std::string>();
  r.type = j.at("type").get<std::string>();
  if (!j.at("bbox").is_array() || j.at("bbox").size() != 4)
    throw MalformedRecord(where + ": 'bbox' must hold 4 reals");
  r.bbox = {j.at("bbox")[0].get<double>(), j.at("bbox")[1].get<double>(),
            j.at("bbox")[2].get<double>(), j.at("bbox")[3].get<double>()};
  r.det = j.at("det").get<double>();
  for (const auto& v : j.at("feat")) r.feat.push_back(v.get<double>());
  if (!j.at("actions").is_object())
    throw MalformedRecord(where + ": 'actions' must be a map");
  for (auto it = j.at("actions").begin(); it != j.at("actions").end(); ++it)
    r.actions.emplace_back(it.key(), it.value().get<double>());
  if (j.contains("parts")) {
    if (!j.at("parts").is_object())
      throw MalformedRecord(where + ": 'parts' must be a map");
    for (auto it = j.at("parts").begin(); it != j.at("parts").end(); ++it) {
      if (!it.value().is_array() || it.value().size() != 2)
        throw MalformedRecord(where + ": part position must hold 2 reals");
      r.parts.emplace_back(it.key(), Vec2{it.value()[0].get<double>(),
                                          it.value()[1].get<double>()});
    }
  }
  if (!j.at("attrs").is_object())
    throw MalformedRecord(where + ": 'attrs' must be a map");
  for (auto it = j.at("attrs").begin(); it != j.at("attrs").end(); ++it)
    r.attrs.emplace_back(it.key(), it.value().get<double>());
  return r;
}

}  // namespace

Evidence parse_evidence(const std::string& proposals_text,
                        std::vector<CameraModel> cameras,
                        const OntologyGraph& ontology) {
  std::vector<ProposalRecord> records;
  std::istringstream in(proposals_text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "proposal line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw MalformedRecord(where + ": " + e.what());
    }
    try {
      records.push_back(record_from_json(j, where));
    } catch (const json::exception& e) {
      throw MalformedRecord(where + ": " + e.what());
    }
  }
  return Evidence::build(std::move(cameras), std::move(records), ontology);
}

Evidence load_evidence(const std::filesystem::path& proposals_path,
                       const std::filesystem::path& calibration_path,
                       const OntologyGraph& ontology) {
  std::ifstream in(proposals_path);
  if (!in)
    throw MalformedDocument("cannot open proposals file '" + proposals_path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_evidence(buf.str(), load_calibration(calibration_path), ontology);
}

std::string serialize_proposals(const std::vector<ProposalRecord>& records) {
  std::ostringstream out;
  for (const auto& r : records) {
    json j;
    j["camera"] = r.camera_id;
    j["t"] = r.t;
    j["tracklet"] = r.tracklet;
    j["type"] = r.type;
    j["bbox"] = {r.bbox.x_min, r.bbox.y_min, r.bbox.x_max, r.bbox.y_max};
    j["det"] = r.det;
    j["feat"] = r.feat;
    json actions = json::object();
    for (const auto& [id, s] : r.actions) actions[id] = s;
    j["actions"] = actions;
    if (!r.parts.empty()) {
      json parts = json::object();
      for (const auto& [id, p] : r.parts) parts[id] = {p.x, p.y};
      j["parts"] = parts;
    }
    json attrs = json::object();
    for (const auto& [id, s] : r.attrs) attrs[id] = s;
    j["attrs"] = attrs;
    out << j.dump() << "\n";
  }
  return out.str();
}

void save_proposals(const std::vector<ProposalRecord>& records,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write proposals file '" + path.string() + "'");
  out << serialize_proposals(records);
}

std::vector<ViewParseGraph> initial_view_graphs(const Evidence& evidence,
                                                const OntologyGraph& ontology,
                                                double det_threshold) {
  if (det_threshold < 0.0 || det_threshold > 1.0)
    throw InvalidConfig("detection threshold must lie in [0,1]");
  const int M = evidence.num_cameras();
  const int T = evidence.num_frames();
  std::vector<ViewParseGraph> views(static_cast<std::size_t>(M) * T);
  for (int cam = 0; cam < M; ++cam) {
    for (int t = 1; t <= T; ++t) {
      ViewParseGraph& graph = views[static_cast<std::size_t>(cam) * T + (t - 1)];
      graph.camera_id = evidence.camera(cam).camera_id;
      graph.t = t;
      for (const auto& r : evidence.at(cam, t)) {
        if (r.det < det_threshold) continue;
        ViewEntityNode e;
        e.id = r.tracklet;
        e.object_type = r.type;
        e.bbox = r.bbox;
        e.image_location = foot_point(r.bbox);
        e.appearance = r.feat;
        if (!r.actions.empty()) {
          // argmax; ties go to the lowest action id (the table is id-sorted)
          std::size_t best = 0;
          for (std::size_t i = 1; i < r.actions.size(); ++i)
            if (r.actions[i].second > r.actions[best].second) best = i;
          e.action = r.actions[best].first;
        }
        for (const auto& [id, score] : r.attrs) e.attributes[id] = (score >= 0.5);
        e.detection_score = r.det;
        e.part_positions = r.parts;
        graph.entities.push_back(std::move(e));
      }
    }
  }
  return views;
}

}  // namespace xview
