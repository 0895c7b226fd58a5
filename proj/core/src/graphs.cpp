#include "xview/graphs.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "xview/evidence.hpp"

namespace xview {

using nlohmann::json;

namespace {
const ViewEntityNode& view_entity_of(const Hierarchy& h, int tracklet_index,
                                     int obs_position) {
  const Tracklet& tr = h.tracklets().at(tracklet_index);
  const TrackletObs& o = tr.obs[obs_position];
  return h.view(tr.camera_index, o.t).entities[o.entity_index];
}
}  // namespace

GroundedEntity ViewEntityNode::grounded() const {
  GroundedEntity g;
  g.object_type = object_type;
  if (action) g.actions.push_back(*action);
  for (const auto& [id, value] : attributes)
    if (value) g.attributes.push_back(id);
  return g;
}

GroundedEntity SceneEntityNode::grounded() const {
  GroundedEntity g;
  g.object_type = object_type;
  if (action) g.actions.push_back(*action);
  for (const auto& [id, value] : attributes)
    if (value) g.attributes.push_back(id);
  return g;
}

const ViewEntityNode* ViewParseGraph::find(const std::string& id) const {
  for (const auto& e : entities)
    if (e.id == id) return &e;
  return nullptr;
}

const SceneEntityNode* SceneParseGraph::find(const std::string& id) const {
  for (const auto& e : entities)
    if (e.id == id) return &e;
  return nullptr;
}

int SceneTrack::num_cameras() const {
  return static_cast<int>(std::popcount(camera_mask));
}

// --- TrackletTable ---------------------------------------------------------

TrackletTable TrackletTable::build(const std::vector<ViewParseGraph>& views,
                                   const Evidence& evidence,
                                   const OntologyGraph& ontology) {
  TrackletTable table;
  table.num_frames_ = evidence.num_frames();
  table.num_cameras_ = evidence.num_cameras();
  table.words_ = std::max(1, (table.num_frames_ + 63) / 64);

  const int T = evidence.num_frames();
  for (const auto& graph : views) {
    const int cam = evidence.camera_index(graph.camera_id);
    if (cam < 0)
      throw UnknownCamera("view graph references unknown camera id " +
                          std::to_string(graph.camera_id));
    if (graph.t < 1 || graph.t > T)
      throw Error("view graph frame " + std::to_string(graph.t) + " out of range");
    for (int ei = 0; ei < static_cast<int>(graph.entities.size()); ++ei) {
      const ViewEntityNode& entity = graph.entities[ei];
      if (entity.projected) continue;
      ontology.node(entity.object_type);

      auto key = std::make_pair(cam, entity.id);
      auto it = table.index_.find(key);
      int idx;
      if (it == table.index_.end()) {
        idx = static_cast<int>(table.tracklets_.size());
        table.index_.emplace(key, idx);
        Tracklet tr;
        tr.camera_index = cam;
        tr.camera_id = graph.camera_id;
        tr.view_id = entity.id;
        tr.type_id = entity.object_type;
        tr.frame_mask.assign(table.words_, 0);
        tr.first_t = graph.t;
        tr.last_t = graph.t;
        table.tracklets_.push_back(std::move(tr));
      } else {
        idx = it->second;
        if (table.tracklets_[idx].type_id != entity.object_type)
          throw SchemaViolation("tracklet '" + entity.id + "' changes object type across frames");
      }

      Tracklet& tr = table.tracklets_[idx];
      const auto& cell = evidence.at(cam, graph.t);
      int record_index = -1;
      for (int ri = 0; ri < static_cast<int>(cell.size()); ++ri)
        if (cell[ri].tracklet == entity.id) { record_index = ri; break; }
      if (record_index < 0)
        throw MissingRecord("no proposal record for tracklet '" + entity.id +
                            "' at camera " + std::to_string(graph.camera_id) +
                            ", t=" + std::to_string(graph.t));
      if ((tr.frame_mask[(graph.t - 1) / 64] >> ((graph.t - 1) % 64)) & 1)
        throw SchemaViolation("tracklet '" + entity.id + "' appears twice at t=" +
                              std::to_string(graph.t));
      tr.frame_mask[(graph.t - 1) / 64] |= std::uint64_t{1} << ((graph.t - 1) % 64);
      tr.obs.push_back({graph.t, record_index, ei});
      tr.first_t = std::min(tr.first_t, graph.t);
      tr.last_t = std::max(tr.last_t, graph.t);
    }
  }
  for (auto& tr : table.tracklets_)
    std::sort(tr.obs.begin(), tr.obs.end(),
              [](const TrackletObs& a, const TrackletObs& b) { return a.t < b.t; });
  return table;
}

int TrackletTable::index_of(int camera_index, const std::string& view_id) const {
  auto it = index_.find({camera_index, view_id});
  return it == index_.end() ? -1 : it->second;
}

// --- aggregation -----------------------------------------------------------

SceneEntityNode aggregate_scene_node(std::span<const ViewObservation> views) {
  if (views.empty()) throw EmptyInput("aggregate_scene_node: no view nodes");
  SceneEntityNode scene;
  scene.object_type = views.front().node->object_type;

  const std::size_t dim = views.front().node->appearance.size();
  scene.appearance.assign(dim, 0.0);
  double wx = 0.0, wy = 0.0;
  for (const auto& v : views) {
    if (v.node->object_type != scene.object_type)
      throw TypeMismatch("aggregate_scene_node: mixed object types '" +
                         scene.object_type + "' vs '" + v.node->object_type + "'");
    if (v.node->appearance.size() != dim)
      throw DimensionMismatch("aggregate_scene_node: appearance dimensions differ");
    for (std::size_t i = 0; i < dim; ++i) scene.appearance[i] += v.node->appearance[i];
    const Vec2 g = project_to_ground(*v.image_to_ground, v.node->image_location);
    wx += g.x;
    wy += g.y;
  }
  const double n = static_cast<double>(views.size());
  for (auto& x : scene.appearance) x /= n;
  scene.world_location = {wx / n, wy / n};
  return scene;
}

// --- Hierarchy --------------------------------------------------------------

Hierarchy Hierarchy::initial(const OntologyGraph& ontology, const Evidence& evidence,
                             std::vector<ViewParseGraph> views) {
  Hierarchy h;
  h.ontology_ = &ontology;
  h.evidence_ = &evidence;
  h.num_cameras_ = evidence.num_cameras();
  h.num_frames_ = evidence.num_frames();
  if (static_cast<int>(views.size()) != h.num_cameras_ * h.num_frames_)
    throw Error("view grid size does not match evidence dimensions");
  h.views_ = std::move(views);
  h.table_ = std::make_shared<const TrackletTable>(
      TrackletTable::build(h.views_, evidence, ontology));
  h.track_of_.assign(h.table_->size(), -1);
  for (int i = 0; i < h.table_->size(); ++i) {
    h.tracks_.push_back(h.build_track({i}));
    h.track_of_[i] = static_cast<int>(h.tracks_.size()) - 1;
  }
  return h;
}

const ViewParseGraph& Hierarchy::view(int camera_index, int t) const {
  return views_[camera_index * num_frames_ + (t - 1)];
}

ViewParseGraph& Hierarchy::view(int camera_index, int t) {
  return views_[camera_index * num_frames_ + (t - 1)];
}

std::string Hierarchy::scene_id(int track_index) const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "S%06d", tracks_[track_index].tracklets.front());
  return buf;
}

int Hierarchy::track_by_scene_id(const std::string& id) const {
  for (int k = 0; k < static_cast<int>(tracks_.size()); ++k)
    if (scene_id(k) == id) return k;
  return -1;
}

SceneTrack Hierarchy::build_track(const std::vector<int>& tracklet_indices) const {
  if (tracklet_indices.empty()) throw EmptyInput("build_track: empty tracklet set");
  SceneTrack track;
  track.tracklets = tracklet_indices;
  std::sort(track.tracklets.begin(), track.tracklets.end());

  const TrackletTable& table = *table_;
  const int words = table.words_per_mask();
  track.frames_by_camera.assign(static_cast<std::size_t>(num_cameras_) * words, 0);
  track.tracklets_per_camera.assign(num_cameras_, 0);

  track.type_id = table.at(track.tracklets.front()).type_id;
  track.first_t = table.at(track.tracklets.front()).first_t;
  track.last_t = table.at(track.tracklets.front()).last_t;
  for (int ti : track.tracklets) {
    const Tracklet& tr = table.at(ti);
    if (tr.type_id != track.type_id)
      throw TypeMismatch("track mixes object types");
    track.first_t = std::min(track.first_t, tr.first_t);
    track.last_t = std::max(track.last_t, tr.last_t);
    track.camera_mask |= std::uint64_t{1} << tr.camera_index;
    track.tracklets_per_camera[tr.camera_index]++;
    for (int w = 0; w < words; ++w) {
      const std::uint64_t overlap =
          track.frames_by_camera[tr.camera_index * words + w] & tr.frame_mask[w];
      if (overlap)
        throw InvalidMove("track links two view entities in camera " +
                          std::to_string(tr.camera_id) + " at the same frame");
      track.frames_by_camera[tr.camera_index * words + w] |= tr.frame_mask[w];
    }
  }

  const int span = track.last_t - track.first_t + 1;
  const int num_attrs = static_cast<int>(ontology_->attributes_of(track.type_id).size());
  track.frames.resize(span);
  for (auto& f : track.frames) f.attrs.assign(num_attrs, -1);

  for (int ti : track.tracklets) {
    const Tracklet& tr = table.at(ti);
    for (int oi = 0; oi < static_cast<int>(tr.obs.size()); ++oi)
      track.frame(tr.obs[oi].t).links.emplace_back(ti, oi);
  }

  // per-frame aggregation over linked views
  for (int t = track.first_t; t <= track.last_t; ++t) {
    TrackFrame& f = track.frame(t);
    if (f.links.empty()) continue;
    std::sort(f.links.begin(), f.links.end());
    std::vector<ViewObservation> obs;
    obs.reserve(f.links.size());
    for (const auto& [ti, oi] : f.links) {
      const Tracklet& tr = table.at(ti);
      obs.push_back({&view_entity_of(*this, ti, oi),
                     &evidence_->camera(tr.camera_index).image_to_ground});
    }
    SceneEntityNode agg = aggregate_scene_node(obs);
    f.world = agg.world_location;
    f.appearance = std::move(agg.appearance);
  }

  // interpolate world location across unobserved in-span frames
  int prev = -1;
  for (int t = track.first_t; t <= track.last_t; ++t) {
    if (track.frame(t).links.empty()) continue;
    if (prev >= 0 && t > prev + 1) {
      const Vec2 a = track.frame(prev).world;
      const Vec2 b = track.frame(t).world;
      for (int u = prev + 1; u < t; ++u) {
        const double w = static_cast<double>(u - prev) / (t - prev);
        track.frame(u).world = {a.x + w * (b.x - a.x), a.y + w * (b.y - a.y)};
      }
    }
    prev = t;
  }
  return track;
}

ViewEntityNode& Hierarchy::view_entity(int tracklet_index, int obs_position) {
  const Tracklet& tr = table_->at(tracklet_index);
  const TrackletObs& o = tr.obs[obs_position];
  return view(tr.camera_index, o.t).entities[o.entity_index];
}

const ViewEntityNode& Hierarchy::view_entity(int tracklet_index, int obs_position) const {
  return view_entity_of(*this, tracklet_index, obs_position);
}

void Hierarchy::replace_tracks(std::vector<int> remove, std::vector<SceneTrack> add) {
  std::sort(remove.begin(), remove.end(), std::greater<int>());
  for (int idx : remove) {
    tracks_[idx] = std::move(tracks_.back());
    tracks_.pop_back();
  }
  for (auto& t : add) tracks_.push_back(std::move(t));
  for (int k = 0; k < static_cast<int>(tracks_.size()); ++k)
    for (int ti : tracks_[k].tracklets) track_of_[ti] = k;
}

SceneParseGraph Hierarchy::scene_graph(int t) const {
  SceneParseGraph g;
  g.t = t;
  std::vector<int> order(tracks_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [this](int a, int b) {
    return tracks_[a].tracklets.front() < tracks_[b].tracklets.front();
  });
  for (int k : order) {
    const SceneTrack& track = tracks_[k];
    if (!track.spans(t)) continue;
    const TrackFrame& f = track.frame(t);
    SceneEntityNode node;
    node.id = scene_id(k);
    node.object_type = track.type_id;
    node.world_location = f.world;
    node.appearance = f.appearance;
    const auto& actions = ontology_->actions_of(track.type_id);
    if (f.action >= 0) node.action = actions[f.action];
    const auto& attrs = ontology_->attributes_of(track.type_id);
    for (std::size_t i = 0; i < attrs.size(); ++i)
      if (f.attrs[i] >= 0) node.attributes[attrs[i]] = (f.attrs[i] == 1);
    g.entities.push_back(std::move(node));
  }
  return g;
}

std::vector<IdentityLink> Hierarchy::links() const {
  std::vector<IdentityLink> out;
  for (int k = 0; k < static_cast<int>(tracks_.size()); ++k) {
    const std::string sid = scene_id(k);
    for (int ti : tracks_[k].tracklets) {
      const Tracklet& tr = table_->at(ti);
      for (const auto& o : tr.obs)
        out.push_back({sid, tr.camera_id, tr.view_id, o.t});
    }
  }
  return out;
}

std::vector<IdentityLink> Hierarchy::links_at(int camera_index, int t) const {
  std::vector<IdentityLink> out;
  for (int k = 0; k < static_cast<int>(tracks_.size()); ++k) {
    const SceneTrack& track = tracks_[k];
    if (!track.spans(t)) continue;
    for (const auto& [ti, oi] : track.frame(t).links) {
      const Tracklet& tr = table_->at(ti);
      if (tr.camera_index != camera_index) continue;
      out.push_back({scene_id(k), tr.camera_id, tr.view_id, t});
    }
  }
  return out;
}

std::string Hierarchy::canonical_key() const {
  std::vector<std::string> blocks;
  for (const auto& track : tracks_) {
    std::string b;
    for (std::size_t i = 0; i < track.tracklets.size(); ++i) {
      if (i) b += ',';
      b += std::to_string(track.tracklets[i]);
    }
    blocks.push_back(std::move(b));
  }
  std::sort(blocks.begin(), blocks.end());
  std::string key;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) key += '|';
    key += blocks[i];
  }
  return key;
}

std::vector<std::string> Hierarchy::validate() const {
  std::vector<std::string> problems;
  std::vector<int> seen(table_->size(), 0);
  for (int k = 0; k < static_cast<int>(tracks_.size()); ++k) {
    const SceneTrack& track = tracks_[k];
    for (int ti : track.tracklets) {
      seen[ti]++;
      if (track_of_[ti] != k)
        problems.push_back("tracklet " + std::to_string(ti) + " track_of mismatch");
      if (table_->at(ti).type_id != track.type_id)
        problems.push_back("track " + scene_id(k) + " mixes object types");
    }
    // per-camera exclusivity: no two links in the same camera at one frame
    for (int t = track.first_t; t <= track.last_t; ++t) {
      std::set<int> cams;
      for (const auto& [ti, oi] : track.frame(t).links)
        if (!cams.insert(table_->at(ti).camera_index).second)
          problems.push_back("track " + scene_id(k) + " double-links camera at t=" +
                             std::to_string(t));
    }
    // appearance pooling invariant
    for (int t = track.first_t; t <= track.last_t; ++t) {
      const TrackFrame& f = track.frame(t);
      if (f.links.empty()) continue;
      std::vector<double> mean;
      for (const auto& [ti, oi] : f.links) {
        const auto& feat = view_entity(ti, oi).appearance;
        if (mean.empty()) mean.assign(feat.size(), 0.0);
        for (std::size_t i = 0; i < feat.size(); ++i) mean[i] += feat[i];
      }
      for (auto& x : mean) x /= static_cast<double>(f.links.size());
      double err = 0;
      for (std::size_t i = 0; i < mean.size(); ++i)
        err += std::abs(mean[i] - f.appearance[i]);
      if (err > 1e-9)
        problems.push_back("track " + scene_id(k) + " appearance is not the view mean at t=" +
                           std::to_string(t));
    }
  }
  for (int ti = 0; ti < table_->size(); ++ti)
    if (seen[ti] != 1)
      problems.push_back("tracklet " + std::to_string(ti) + " appears in " +
                         std::to_string(seen[ti]) + " tracks");
  for (const auto& graph : views_) {
    std::set<std::string> ids;
    for (const auto& e : graph.entities) {
      if (!ids.insert(e.id).second)
        problems.push_back("duplicate view entity id '" + e.id + "'");
      const Vec2 fp = foot_point(e.bbox);
      if (std::abs(fp.x - e.image_location.x) > 1e-9 ||
          std::abs(fp.y - e.image_location.y) > 1e-9)
        problems.push_back("view entity '" + e.id + "' image location is not the foot point");
      ValidityReport r = is_valid_parse_graph(*ontology_, e.grounded());
      for (const auto& v : r.violations)
        problems.push_back("view entity '" + e.id + "': " + v);
    }
  }
  return problems;
}

std::map<int, std::vector<std::pair<int, Rect>>> entity_track(
    const Hierarchy& hierarchy, const std::string& scene_id) {
  const int k = hierarchy.track_by_scene_id(scene_id);
  if (k < 0) throw UnknownEntity("unknown scene entity '" + scene_id + "'");
  std::map<int, std::vector<std::pair<int, Rect>>> out;
  for (const auto& cam : hierarchy.evidence().cameras()) out[cam.camera_id] = {};
  const SceneTrack& track = hierarchy.tracks()[k];
  for (int ti : track.tracklets) {
    const Tracklet& tr = hierarchy.tracklets().at(ti);
    auto& lane = out[tr.camera_id];
    for (int oi = 0; oi < static_cast<int>(tr.obs.size()); ++oi)
      lane.emplace_back(tr.obs[oi].t, hierarchy.view_entity(ti, oi).bbox);
  }
  for (auto& [cam, lane] : out)
    std::sort(lane.begin(), lane.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

// --- serialization ----------------------------------------------------------

std::vector<HierarchyRow> hierarchy_rows(const Hierarchy& hierarchy,
                                         const std::vector<ViewParseGraph>* augmented_views,
                                         const AttrMarginals* marginals) {
  std::vector<HierarchyRow> rows;
  std::vector<int> order(hierarchy.tracks().size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return hierarchy.tracks()[a].tracklets.front() < hierarchy.tracks()[b].tracklets.front();
  });

  for (int k : order) {
    const SceneTrack& track = hierarchy.tracks()[k];
    const std::string sid = hierarchy.scene_id(k);
    const auto& actions = hierarchy.ontology().actions_of(track.type_id);
    const auto& attrs = hierarchy.ontology().attributes_of(track.type_id);
    for (int t = track.first_t; t <= track.last_t; ++t) {
      const TrackFrame& f = track.frame(t);
      for (const auto& [ti, oi] : f.links) {
        const Tracklet& tr = hierarchy.tracklets().at(ti);
        HierarchyRow row;
        row.scene_id = sid;
        row.camera = tr.camera_id;
        row.view_id = tr.view_id;
        row.t = t;
        if (f.action >= 0) row.action = actions[f.action];
        for (std::size_t i = 0; i < attrs.size(); ++i)
          if (f.attrs[i] >= 0) row.attributes[attrs[i]] = (f.attrs[i] == 1);
        row.world_xy = f.world;
        row.bbox = hierarchy.view_entity(ti, oi).bbox;
        if (marginals) {
          auto sit = marginals->find(sid);
          if (sit != marginals->end()) {
            auto tit = sit->second.find(t);
            if (tit != sit->second.end()) row.attr_scores = tit->second;
          }
        }
        rows.push_back(std::move(row));
      }
    }
  }

  if (augmented_views) {
    for (const auto& graph : *augmented_views) {
      for (const auto& e : graph.entities) {
        if (!e.projected) continue;
        // synthesized entities carry their scene id as "proj:<scene_id>"
        const std::string sid = e.id.rfind("proj:", 0) == 0 ? e.id.substr(5) : e.id;
        HierarchyRow row;
        row.scene_id = sid;
        row.camera = graph.camera_id;
        row.view_id = e.id;
        row.t = graph.t;
        row.action = e.action;
        row.attributes = e.attributes;
        const int k = hierarchy.track_by_scene_id(sid);
        if (k >= 0 && hierarchy.tracks()[k].spans(graph.t))
          row.world_xy = hierarchy.tracks()[k].frame(graph.t).world;
        row.bbox = e.bbox;
        row.projected = true;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::string serialize_hierarchy_rows(const std::vector<HierarchyRow>& rows) {
  std::ostringstream out;
  for (const auto& row : rows) {
    json j;
    j["scene_id"] = row.scene_id;
    j["camera"] = row.camera;
    j["view_id"] = row.view_id;
    j["t"] = row.t;
    if (row.action)
      j["action"] = *row.action;
    else
      j["action"] = nullptr;
    j["attributes"] = row.attributes;
    j["world_xy"] = {row.world_xy.x, row.world_xy.y};
    j["bbox"] = {row.bbox.x_min, row.bbox.y_min, row.bbox.x_max, row.bbox.y_max};
    if (row.projected) j["projected"] = true;
    if (!row.attr_scores.empty()) j["attr_scores"] = row.attr_scores;
    out << j.dump() << "\n";
  }
  return out.str();
}

std::vector<HierarchyRow> parse_hierarchy_rows(const std::string& text) {
  std::vector<HierarchyRow> rows;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw MalformedRecord("hierarchy line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string where = "hierarchy line " + std::to_string(line_no);
    for (const char* key : {"scene_id", "camera", "view_id", "t"})
      if (!j.contains(key))
        throw MalformedRecord(where + ": missing field '" + std::string(key) + "'");
    HierarchyRow row;
    row.scene_id = j.at("scene_id").get<std::string>();
    row.camera = j.at("camera").get<int>();
    row.view_id = j.at("view_id").get<std::string>();
    row.t = j.at("t").get<int>();
    if (j.contains("action") && !j.at("action").is_null())
      row.action = j.at("action").get<std::string>();
    if (j.contains("attributes"))
      row.attributes = j.at("attributes").get<std::map<std::string, bool>>();
    if (j.contains("world_xy") && j.at("world_xy").is_array() && j.at("world_xy").size() == 2)
      row.world_xy = {j.at("world_xy")[0].get<double>(), j.at("world_xy")[1].get<double>()};
    if (j.contains("bbox") && j.at("bbox").is_array() && j.at("bbox").size() == 4) {
      row.bbox = {j.at("bbox")[0].get<double>(), j.at("bbox")[1].get<double>(),
                  j.at("bbox")[2].get<double>(), j.at("bbox")[3].get<double>()};
    }
    if (j.contains("projected")) row.projected = j.at("projected").get<bool>();
    if (j.contains("attr_scores"))
      row.attr_scores = j.at("attr_scores").get<std::map<std::string, double>>();
    rows.push_back(std::move(row));
  }
  return rows;
}

void save_hierarchy_rows(const std::vector<HierarchyRow>& rows,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write hierarchy file '" + path.string() + "'");
  out << serialize_hierarchy_rows(rows);
}

std::vector<HierarchyRow> load_hierarchy_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MalformedDocument("cannot open hierarchy file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_hierarchy_rows(buf.str());
}

}  // namespace xview
