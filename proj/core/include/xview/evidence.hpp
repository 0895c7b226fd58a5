#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xview/geometry.hpp"
#include "xview/graphs.hpp"
#include "xview/ontology.hpp"

namespace xview {

/// One per-view proposal: a tracklet observed at (camera, t) with detector
/// and classifier scores standing in for the pretrained models.
struct ProposalRecord {
  int camera_id = 0;
  int t = 0;  // 1-based
  std::string tracklet;
  std::string type;
  Rect bbox;
  double det = 0.0;
  AppearanceFeature feat;
  std::vector<std::pair<std::string, double>> actions;  // sorted by action id
  std::vector<std::pair<std::string, Vec2>> parts;      // sorted by part id
  std::vector<std::pair<std::string, double>> attrs;    // sorted by attribute id

  const double* action_score(const std::string& action_id) const;
  const double* attr_score(const std::string& attr_id) const;

  bool operator==(const ProposalRecord&) const = default;
};

/// Immutable store of per-view proposals keyed by (camera, t).
class Evidence {
 public:
  Evidence() = default;

  /// Validates all records against the calibration and ontology and groups
  /// them by (camera, t), preserving input order within a cell.
  static Evidence build(std::vector<CameraModel> cameras,
                        std::vector<ProposalRecord> records,
                        const OntologyGraph& ontology);

  int num_cameras() const { return static_cast<int>(cameras_.size()); }
  int num_frames() const { return num_frames_; }
  const std::vector<CameraModel>& cameras() const { return cameras_; }
  const CameraModel& camera(int camera_index) const { return cameras_[camera_index]; }
  int camera_index(int camera_id) const;  // -1 when unknown

  const std::vector<ProposalRecord>& at(int camera_index, int t) const;
  const ProposalRecord* find(int camera_index, int t, const std::string& tracklet) const;
  std::size_t total_records() const { return total_; }

 private:
  std::vector<CameraModel> cameras_;
  std::map<int, int> camera_index_;
  std::vector<std::vector<ProposalRecord>> grid_;  // cam * T + (t-1)
  int num_frames_ = 0;
  std::size_t total_ = 0;
};

Evidence parse_evidence(const std::string& proposals_text,
                        std::vector<CameraModel> cameras,
                        const OntologyGraph& ontology);
Evidence load_evidence(const std::filesystem::path& proposals_path,
                       const std::filesystem::path& calibration_path,
                       const OntologyGraph& ontology);
std::string serialize_proposals(const std::vector<ProposalRecord>& records);
void save_proposals(const std::vector<ProposalRecord>& records,
                    const std::filesystem::path& path);

/// One view parse graph per (camera, t). A record becomes an entity iff its
/// detection score >= det_threshold; actions initialized to the argmax of the
/// score table (ties to the lowest action id), attributes thresholded at 0.5.
std::vector<ViewParseGraph> initial_view_graphs(const Evidence& evidence,
                                                const OntologyGraph& ontology,
                                                double det_threshold = 0.5);

}  // namespace xview
