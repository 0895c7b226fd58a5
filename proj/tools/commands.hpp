#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "xview/energy.hpp"
#include "xview/metrics.hpp"

namespace xview::cmd {

struct SimulateOptions {
  std::filesystem::path config_path;  // empty: built-in defaults
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = ".";
  std::filesystem::path ontology_path;  // empty: built-in domain
  bool emit_prior = false;
  double prior_alpha = 1.0;
};

struct SimulateResult {
  std::filesystem::path proposals;
  std::filesystem::path calibration;
  std::filesystem::path ground_truth;
  std::filesystem::path ontology;
  std::filesystem::path prior;  // empty unless emit_prior
  std::size_t records = 0;
  std::size_t gt_rows = 0;
};

SimulateResult cmd_simulate(const SimulateOptions& options);

struct ParseOptions {
  std::filesystem::path ontology;  // empty: built-in domain
  std::filesystem::path proposals;
  std::filesystem::path calib;
  std::string prior = "uniform";  // "uniform" or a prior file path
  EnergyWeights weights;
  int iters = 20000;
  std::uint64_t seed = 0;
  int chains = 1;
  int conv_window = 0;
  int rounds = 10;
  double conv_eps = 1e-6;
  double det_thresh = 0.5;
  std::filesystem::path out;
  std::filesystem::path trace;  // empty: no trace file
};

struct ParseSummary {
  double log_posterior = 0.0;
  int scene_entities = 0;
  int rounds_run = 0;
  int frames = 0;
  double seconds = 0.0;
  int projected_boxes = 0;
};

ParseSummary cmd_parse(const ParseOptions& options);

struct OracleOptions {
  std::filesystem::path ontology;
  std::filesystem::path proposals;
  std::filesystem::path calib;
  std::string prior = "uniform";
  EnergyWeights weights;
  double det_thresh = 0.5;
  int max_tracklets = 8;
  std::filesystem::path out;
};

struct OracleSummary {
  double log_posterior = 0.0;
  long partitions = 0;
  int scene_entities = 0;
};

OracleSummary cmd_oracle(const OracleOptions& options);

struct EvalOptions {
  std::filesystem::path pred;
  std::filesystem::path gt;
  std::filesystem::path out;  // empty: stdout only
  double iou = 0.5;
};

EvalReport cmd_eval(const EvalOptions& options);

struct BenchOptions {
  std::uint64_t seed = 0;
  int iters = 12000;
  int rounds = 2;
  std::filesystem::path out;  // empty: stdout only
};

struct BenchSummary {
  int frames = 0;
  int cameras = 0;
  int entities = 0;
  double seconds = 0.0;
  double fps = 0.0;
  double log_posterior = 0.0;
};

BenchSummary cmd_bench(const BenchOptions& options);

}  // namespace xview::cmd
