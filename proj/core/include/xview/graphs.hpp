#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xview/geometry.hpp"
#include "xview/ontology.hpp"

namespace xview {

class Evidence;

/// Fixed-length appearance descriptor; dimension is a run-wide constant.
using AppearanceFeature = std::vector<double>;

struct ViewEntityNode {
  std::string id;  // tracklet id, persistent across frames within one camera
  std::string object_type;
  Rect bbox;
  Vec2 image_location;  // always foot_point(bbox)
  AppearanceFeature appearance;
  std::optional<std::string> action;
  std::vector<std::pair<std::string, Vec2>> part_positions;
  std::map<std::string, bool> attributes;
  double detection_score = 1.0;
  bool projected = false;  // synthesized by project_missing, not evidence-backed

  GroundedEntity grounded() const;
};

struct ViewParseGraph {
  int camera_id = 0;
  int t = 0;  // 1-based frame index
  std::vector<ViewEntityNode> entities;

  const ViewEntityNode* find(const std::string& id) const;
};

struct SceneEntityNode {
  std::string id;
  std::string object_type;
  Vec2 world_location;
  AppearanceFeature appearance;  // mean of linked view features; empty at gap frames
  std::optional<std::string> action;
  std::map<std::string, bool> attributes;

  GroundedEntity grounded() const;
};

struct SceneParseGraph {
  int t = 0;
  std::vector<SceneEntityNode> entities;

  const SceneEntityNode* find(const std::string& id) const;
};

struct IdentityLink {
  std::string scene_id;
  int camera_id = 0;
  std::string view_id;
  int t = 0;

  bool operator==(const IdentityLink&) const = default;
};

/// One observation of a tracklet: a frame plus the indices of the backing
/// proposal record and view-graph entity at (camera, t).
struct TrackletObs {
  int t = 0;
  int record_index = -1;
  int entity_index = -1;
};

struct Tracklet {
  int camera_index = 0;  // dense camera index in the evidence
  int camera_id = 0;
  std::string view_id;
  std::string type_id;
  std::vector<TrackletObs> obs;  // sorted by t
  std::vector<std::uint64_t> frame_mask;  // bit (t-1)
  int first_t = 0;
  int last_t = 0;
};

/// Immutable registry of the view-level tracklets a hierarchy is built over.
class TrackletTable {
 public:
  TrackletTable() = default;
  static TrackletTable build(const std::vector<ViewParseGraph>& views,
                             const Evidence& evidence,
                             const OntologyGraph& ontology);

  int size() const { return static_cast<int>(tracklets_.size()); }
  const Tracklet& at(int index) const { return tracklets_[index]; }
  int index_of(int camera_index, const std::string& view_id) const;  // -1 if absent
  int words_per_mask() const { return words_; }
  int num_frames() const { return num_frames_; }
  int num_cameras() const { return num_cameras_; }

 private:
  std::vector<Tracklet> tracklets_;
  std::map<std::pair<int, std::string>, int> index_;
  int words_ = 1;
  int num_frames_ = 0;
  int num_cameras_ = 0;
};

struct TrackFrame {
  std::vector<std::pair<int, int>> links;  // (tracklet index, obs position)
  Vec2 world;
  AppearanceFeature appearance;  // empty when no links at this frame
  int action = -1;               // index into the type's sorted action list
  std::vector<std::int8_t> attrs;  // per type attribute, -1 unset / 0 / 1
};

/// A scene entity over its lifetime [first_t, last_t]; in-span frames with no
/// links are unobserved but persist.
struct SceneTrack {
  std::vector<int> tracklets;  // sorted global tracklet indices
  std::string type_id;
  int first_t = 0;
  int last_t = -1;
  std::vector<TrackFrame> frames;  // size last_t - first_t + 1
  std::uint64_t camera_mask = 0;
  std::vector<std::uint64_t> frames_by_camera;  // M x words, overlap checks
  std::vector<int> tracklets_per_camera;

  bool spans(int t) const { return t >= first_t && t <= last_t; }
  bool alive_at(int t) const { return spans(t) && !frames[t - first_t].links.empty(); }
  const TrackFrame& frame(int t) const { return frames[t - first_t]; }
  TrackFrame& frame(int t) { return frames[t - first_t]; }
  int num_cameras() const;
};

struct ViewObservation {
  const ViewEntityNode* node = nullptr;
  const Homography* image_to_ground = nullptr;
};

/// Mean-pools appearance over the given views and places the entity at the
/// centroid of the per-view ground projections. Action and attributes are
/// left unset; value inference decides them later.
SceneEntityNode aggregate_scene_node(std::span<const ViewObservation> views);

/// G = (identity mapping, scene parse graphs, view parse graphs).
class Hierarchy {
 public:
  Hierarchy() = default;

  /// One scene entity per view tracklet (the sampler's warm start).
  static Hierarchy initial(const OntologyGraph& ontology, const Evidence& evidence,
                           std::vector<ViewParseGraph> views);

  const OntologyGraph& ontology() const { return *ontology_; }
  const Evidence& evidence() const { return *evidence_; }
  int num_cameras() const { return num_cameras_; }
  int num_frames() const { return num_frames_; }

  const std::vector<ViewParseGraph>& views() const { return views_; }
  const ViewParseGraph& view(int camera_index, int t) const;
  ViewParseGraph& view(int camera_index, int t);
  const TrackletTable& tracklets() const { return *table_; }
  const std::vector<SceneTrack>& tracks() const { return tracks_; }
  int track_of(int tracklet_index) const { return track_of_[tracklet_index]; }

  /// Canonical id of a track: "S" + its smallest tracklet index.
  std::string scene_id(int track_index) const;
  int track_by_scene_id(const std::string& scene_id) const;  // -1 if absent

  SceneParseGraph scene_graph(int t) const;
  std::vector<IdentityLink> links() const;
  std::vector<IdentityLink> links_at(int camera_index, int t) const;

  /// Partition fingerprint: blocks of sorted tracklet indices, sorted.
  std::string canonical_key() const;

  /// Aggregates a track over a tracklet set (links, world centroid, pooled
  /// appearance, interpolated world at gaps); values left unset.
  SceneTrack build_track(const std::vector<int>& tracklet_indices) const;

  /// Removes the tracks at `remove` (indices into tracks()) and appends
  /// `add`, fixing the tracklet-to-track map.
  void replace_tracks(std::vector<int> remove, std::vector<SceneTrack> add);

  ViewEntityNode& view_entity(int tracklet_index, int obs_position);
  const ViewEntityNode& view_entity(int tracklet_index, int obs_position) const;

  /// Checks every structural invariant; returns human-readable problems.
  std::vector<std::string> validate() const;

 private:
  const OntologyGraph* ontology_ = nullptr;
  const Evidence* evidence_ = nullptr;
  std::shared_ptr<const TrackletTable> table_;
  std::vector<ViewParseGraph> views_;  // camera-major: index = cam * T + (t-1)
  std::vector<SceneTrack> tracks_;
  std::vector<int> track_of_;
  int num_cameras_ = 0;
  int num_frames_ = 0;
};

/// Per-camera, time-ordered bboxes of one scene entity; gaps preserved.
std::map<int, std::vector<std::pair<int, Rect>>> entity_track(
    const Hierarchy& hierarchy, const std::string& scene_id);

// --- result-file serialization -------------------------------------------

struct HierarchyRow {
  std::string scene_id;
  int camera = 0;
  std::string view_id;
  int t = 0;
  std::optional<std::string> action;
  std::map<std::string, bool> attributes;
  Vec2 world_xy;
  Rect bbox;
  bool projected = false;
  std::map<std::string, double> attr_scores;  // optional posterior marginals

  bool operator==(const HierarchyRow&) const = default;
};

/// scene_id -> t -> attribute -> p(true).
using AttrMarginals = std::map<std::string, std::map<int, std::map<std::string, double>>>;

std::vector<HierarchyRow> hierarchy_rows(const Hierarchy& hierarchy,
                                         const std::vector<ViewParseGraph>* augmented_views = nullptr,
                                         const AttrMarginals* marginals = nullptr);
std::string serialize_hierarchy_rows(const std::vector<HierarchyRow>& rows);
std::vector<HierarchyRow> parse_hierarchy_rows(const std::string& text);
void save_hierarchy_rows(const std::vector<HierarchyRow>& rows,
                         const std::filesystem::path& path);
std::vector<HierarchyRow> load_hierarchy_rows(const std::filesystem::path& path);

}  // namespace xview
