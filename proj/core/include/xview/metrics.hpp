#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xview/geometry.hpp"
#include "xview/graphs.hpp"

namespace xview {

/// Intersection over union; 0 for disjoint boxes.
double iou(const Rect& a, const Rect& b);

struct DetectionMetrics {
  double da = 0.0;  // true positives / ground-truth boxes
  double dp = 0.0;  // true positives / predictions (0 when no predictions)
  int true_positives = 0;
  int gt_count = 0;
  int pred_count = 0;
};

/// Greedy max-overlap one-to-one matching per frame at IoU > threshold.
DetectionMetrics detection_metrics(std::span<const std::vector<Rect>> pred_frames,
                                   std::span<const std::vector<Rect>> gt_frames,
                                   double iou_threshold = 0.5);

struct TrackBox {
  std::string id;
  Rect box;
};

struct TrackedFrame {
  std::vector<TrackBox> pred;
  std::vector<TrackBox> gt;
};

struct TrackingMetrics {
  double ta = 0.0;  // 1 - (misses + false positives + id switches) / gt boxes
  double tp = 0.0;  // mean IoU over matches
  int idsw = 0;
  int frag = 0;
  int misses = 0;
  int false_positives = 0;
  int matches = 0;
  int gt_total = 0;
};

/// CLEAR-MOT-style accounting over one time-ordered sequence: matching keeps
/// identities when still above the threshold, remaining boxes match greedily
/// by IoU; IDSW counts matched-id changes per ground-truth track, FRAG counts
/// interruptions of matched coverage.
TrackingMetrics tracking_metrics(std::span<const TrackedFrame> frames,
                                 double iou_threshold = 0.5);
TrackingMetrics tracking_metrics(std::span<const std::vector<TrackedFrame>> sequences,
                                 double iou_threshold = 0.5);

struct ActionMetrics {
  std::vector<std::string> classes;  // sorted union of labels
  std::map<std::string, double> per_class;
  double overall = 0.0;
  std::vector<std::vector<double>> confusion;  // row-normalized, gt x pred
  int total = 0;
};

ActionMetrics action_metrics(std::span<const std::string> pred,
                             std::span<const std::string> gt);

struct AttributeInstance {
  double score = 0.0;
  bool positive = false;
};

/// Average precision with the all-points precision-envelope interpolation;
/// tied scores are processed as one group. Empty positives give no value.
std::optional<double> average_precision(std::vector<AttributeInstance> instances);

struct AttributeMetrics {
  std::map<std::string, std::optional<double>> ap;
  std::optional<double> mean_ap;  // over attributes with defined AP
};

AttributeMetrics attribute_metrics(
    const std::map<std::string, std::vector<AttributeInstance>>& per_attribute);

/// Majority vote; ties break to the lowest label id.
std::string fuse_vote(std::span<const std::string> labels);
/// Argmax of per-label mean score; ties break to the lowest label id.
std::string fuse_mean(std::span<const std::vector<std::pair<std::string, double>>> tables);

struct PairF1 {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  long pred_pairs = 0;
  long gt_pairs = 0;
  long common_pairs = 0;
};

/// Pairwise co-association F1 between two groupings of items; items absent
/// from one side count as singleton groups there.
PairF1 identity_f1(const std::map<std::string, std::string>& pred_groups,
                   const std::map<std::string, std::string>& gt_groups);

struct EvalReport {
  DetectionMetrics detection;
  TrackingMetrics tracking;
  ActionMetrics actions;
  AttributeMetrics attributes;
  PairF1 identity;
  std::map<int, double> action_accuracy_by_views;
  std::map<int, int> instances_by_views;
};

/// Scores a predicted hierarchy file against a ground-truth file: detection
/// and tracking over boxes, action accuracy and attribute AP over records
/// joined by (camera, view id, t), and pairwise identity F1 over tracklets.
EvalReport evaluate_rows(const std::vector<HierarchyRow>& pred,
                         const std::vector<HierarchyRow>& gt,
                         double iou_threshold = 0.5);

std::string report_to_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace xview
