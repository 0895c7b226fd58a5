#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "xview/energy.hpp"
#include "xview/evidence.hpp"
#include "xview/graphs.hpp"
#include "xview/prior.hpp"

namespace xview {

struct SceneEntitySpec {
  std::string id;
  std::string type_id;
  std::vector<Vec2> trajectory;       // ground positions, length T
  std::vector<std::string> actions;   // per frame; empty when the type has none
  std::map<std::string, bool> attributes;
  AppearanceFeature true_appearance;
};

struct SceneScript {
  int num_cameras = 0;
  int num_frames = 0;
  double arena_size = 40.0;  // side length, arena centered at the origin
  int feature_dim = 8;
  double appearance_margin = 3.0;
  std::vector<CameraModel> cameras;
  std::vector<SceneEntitySpec> entities;
};

struct SceneConfig {
  int num_cameras = 2;
  int num_frames = 10;
  int num_entities = 2;
  double arena_size = 40.0;
  int feature_dim = 8;
  double appearance_margin = 3.0;
  int image_width = 1920;
  int image_height = 1080;
  int action_dwell_min = 6;
  int action_dwell_max = 14;
  int waypoint_interval = 10;
  std::vector<std::string> entity_types{"person"};
};

struct NoiseModel {
  double bbox_jitter_sigma = 2.0;
  double appearance_sigma = 1.0;
  double action_flip_prob = 0.1;
  double attribute_flip_prob = 0.05;
  double miss_prob = 0.05;
  double det_beta_a = 8.0;  // detection-score beta shapes for true boxes
  double det_beta_b = 2.0;
  double clutter_rate = 0.3;  // false positives per camera per frame
};

struct SimulationConfig {
  SceneConfig scene;
  NoiseModel noise;
};

/// People/vehicles/bicycles domain with parts, actions (incompatibilities
/// among them) and appearance attributes.
const OntologyGraph& default_ontology();

/// Deterministic under seed: piecewise-linear trajectories inside the arena,
/// dwell-time action switching, margin-separated appearance means, and random
/// well-conditioned cameras covering the arena.
SceneScript generate_scene(const SceneConfig& config, const OntologyGraph& ontology,
                           std::uint64_t seed);

struct RenderedScene {
  std::vector<CameraModel> cameras;
  std::vector<ProposalRecord> records;
  std::vector<HierarchyRow> ground_truth;
};

/// Noisy per-view proposals plus the ground-truth correspondence rows.
RenderedScene render_proposals(const SceneScript& script, const NoiseModel& noise,
                               std::uint64_t seed);

/// Scene-side value histories of the script, for prior estimation.
std::vector<TrackHistory> script_histories(const SceneScript& script);

SimulationConfig parse_simulation_config(const std::string& text);
SimulationConfig load_simulation_config(const std::filesystem::path& path);
std::string serialize_simulation_config(const SimulationConfig& config);

/// Canonical fingerprint of a tracklet partition (same form as
/// Hierarchy::canonical_key).
std::string partition_key(const std::vector<std::vector<int>>& blocks);

struct ScoredPartition {
  std::vector<std::vector<int>> blocks;
  std::string key;
  double log_posterior = 0.0;
};

/// Every type- and frame-consistent partition of the hierarchy's tracklets,
/// scored at its per-track value optimum. Throws TooLarge beyond the limit.
std::vector<ScoredPartition> enumerate_structures(const Hierarchy& initial,
                                                  const EnergyWeights& weights,
                                                  const PriorModel& prior,
                                                  int max_tracklets = 8);

struct BruteForceResult {
  Hierarchy hierarchy;
  double log_posterior = 0.0;
  long num_partitions = 0;
};

/// Exhaustive MAP over all identity structures (desk-scale oracle).
BruteForceResult brute_force_map(const OntologyGraph& ontology, const Evidence& evidence,
                                 const EnergyWeights& weights, const PriorModel& prior,
                                 double det_threshold = 0.5, int max_tracklets = 8);

}  // namespace xview
