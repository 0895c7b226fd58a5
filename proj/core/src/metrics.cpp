#include "xview/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "xview/errors.hpp"

namespace xview {

using nlohmann::json;

double iou(const Rect& a, const Rect& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

namespace {

struct Candidate {
  double overlap;
  int pred;
  int gt;
};

// Greedy one-to-one matching by descending IoU above the threshold.
std::vector<std::pair<int, int>> greedy_match(const std::vector<Rect>& pred,
                                              const std::vector<Rect>& gt,
                                              double threshold) {
  std::vector<Candidate> candidates;
  for (int p = 0; p < static_cast<int>(pred.size()); ++p)
    for (int g = 0; g < static_cast<int>(gt.size()); ++g) {
      const double o = iou(pred[p], gt[g]);
      if (o > threshold) candidates.push_back({o, p, g});
    }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.pred != b.pred) return a.pred < b.pred;
    return a.gt < b.gt;
  });
  std::vector<char> pred_used(pred.size(), 0), gt_used(gt.size(), 0);
  std::vector<std::pair<int, int>> matches;
  for (const auto& c : candidates) {
    if (pred_used[c.pred] || gt_used[c.gt]) continue;
    pred_used[c.pred] = 1;
    gt_used[c.gt] = 1;
    matches.emplace_back(c.pred, c.gt);
  }
  return matches;
}

}  // namespace

DetectionMetrics detection_metrics(std::span<const std::vector<Rect>> pred_frames,
                                   std::span<const std::vector<Rect>> gt_frames,
                                   double iou_threshold) {
  if (pred_frames.size() != gt_frames.size())
    throw LengthMismatch("detection_metrics: frame counts differ");
  DetectionMetrics m;
  for (std::size_t f = 0; f < pred_frames.size(); ++f) {
    m.pred_count += static_cast<int>(pred_frames[f].size());
    m.gt_count += static_cast<int>(gt_frames[f].size());
    m.true_positives +=
        static_cast<int>(greedy_match(pred_frames[f], gt_frames[f], iou_threshold).size());
  }
  m.da = m.gt_count > 0 ? static_cast<double>(m.true_positives) / m.gt_count : 0.0;
  m.dp = m.pred_count > 0 ? static_cast<double>(m.true_positives) / m.pred_count : 0.0;
  return m;
}

TrackingMetrics tracking_metrics(std::span<const TrackedFrame> frames,
                                 double iou_threshold) {
  TrackingMetrics m;
  double iou_sum = 0.0;

  std::map<std::string, std::string> last_matched_pred;  // gt id -> pred id
  std::map<std::string, bool> was_covered;               // gt id -> matched before
  std::map<std::string, bool> covered_prev;              // gt id -> matched in prev frame
  std::map<std::string, std::string> corr;               // live correspondence gt->pred

  for (const auto& frame : frames) {
    m.gt_total += static_cast<int>(frame.gt.size());

    std::map<std::string, const TrackBox*> pred_by_id, gt_by_id;
    for (const auto& p : frame.pred) pred_by_id[p.id] = &p;
    for (const auto& g : frame.gt) gt_by_id[g.id] = &g;

    std::set<std::string> pred_used, gt_used;
    std::vector<std::pair<const TrackBox*, const TrackBox*>> matched;  // (gt, pred)

    // keep existing correspondences still above the threshold
    for (auto it = corr.begin(); it != corr.end();) {
      auto g = gt_by_id.find(it->first);
      auto p = pred_by_id.find(it->second);
      if (g != gt_by_id.end() && p != pred_by_id.end() &&
          iou(g->second->box, p->second->box) > iou_threshold) {
        matched.emplace_back(g->second, p->second);
        gt_used.insert(it->first);
        pred_used.insert(it->second);
        ++it;
      } else {
        it = corr.erase(it);
      }
    }

    // match the rest greedily
    std::vector<Rect> rp, rg;
    std::vector<const TrackBox*> rp_ref, rg_ref;
    for (const auto& p : frame.pred)
      if (!pred_used.count(p.id)) {
        rp.push_back(p.box);
        rp_ref.push_back(&p);
      }
    for (const auto& g : frame.gt)
      if (!gt_used.count(g.id)) {
        rg.push_back(g.box);
        rg_ref.push_back(&g);
      }
    for (const auto& [pi, gi] : greedy_match(rp, rg, iou_threshold)) {
      matched.emplace_back(rg_ref[gi], rp_ref[pi]);
      corr[rg_ref[gi]->id] = rp_ref[pi]->id;
      pred_used.insert(rp_ref[pi]->id);
      gt_used.insert(rg_ref[gi]->id);
    }

    m.matches += static_cast<int>(matched.size());
    m.misses += static_cast<int>(frame.gt.size() - matched.size());
    m.false_positives += static_cast<int>(frame.pred.size() - matched.size());

    std::map<std::string, bool> covered_now;
    for (const auto& [g, p] : matched) {
      iou_sum += iou(g->box, p->box);
      auto last = last_matched_pred.find(g->id);
      if (last != last_matched_pred.end() && last->second != p->id) m.idsw++;
      last_matched_pred[g->id] = p->id;
      if (was_covered[g->id] && !covered_prev[g->id]) m.frag++;  // coverage resumes
      was_covered[g->id] = true;
      covered_now[g->id] = true;
    }
    covered_prev = std::move(covered_now);
  }

  m.ta = m.gt_total > 0
             ? 1.0 - static_cast<double>(m.misses + m.false_positives + m.idsw) / m.gt_total
             : 1.0;
  m.tp = m.matches > 0 ? iou_sum / m.matches : 0.0;
  return m;
}

TrackingMetrics tracking_metrics(std::span<const std::vector<TrackedFrame>> sequences,
                                 double iou_threshold) {
  TrackingMetrics m;
  double iou_weighted = 0.0;
  for (const auto& seq : sequences) {
    const TrackingMetrics s = tracking_metrics(std::span(seq), iou_threshold);
    m.idsw += s.idsw;
    m.frag += s.frag;
    m.misses += s.misses;
    m.false_positives += s.false_positives;
    m.matches += s.matches;
    m.gt_total += s.gt_total;
    iou_weighted += s.tp * s.matches;
  }
  m.ta = m.gt_total > 0
             ? 1.0 - static_cast<double>(m.misses + m.false_positives + m.idsw) / m.gt_total
             : 1.0;
  m.tp = m.matches > 0 ? iou_weighted / m.matches : 0.0;
  return m;
}

ActionMetrics action_metrics(std::span<const std::string> pred,
                             std::span<const std::string> gt) {
  if (pred.size() != gt.size())
    throw LengthMismatch("action_metrics: label sequences differ in length");
  ActionMetrics m;
  m.total = static_cast<int>(gt.size());

  std::set<std::string> classes(pred.begin(), pred.end());
  classes.insert(gt.begin(), gt.end());
  m.classes.assign(classes.begin(), classes.end());
  std::map<std::string, int> index;
  for (int i = 0; i < static_cast<int>(m.classes.size()); ++i) index[m.classes[i]] = i;

  const int n = static_cast<int>(m.classes.size());
  std::vector<std::vector<double>> counts(n, std::vector<double>(n, 0.0));
  int correct = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    counts[index[gt[i]]][index[pred[i]]] += 1.0;
    if (gt[i] == pred[i]) ++correct;
  }
  m.overall = m.total > 0 ? static_cast<double>(correct) / m.total : 0.0;

  m.confusion.assign(n, std::vector<double>(n, 0.0));
  for (int g = 0; g < n; ++g) {
    double row = 0.0;
    for (int p = 0; p < n; ++p) row += counts[g][p];
    m.per_class[m.classes[g]] = row > 0 ? counts[g][g] / row : 0.0;
    for (int p = 0; p < n; ++p) m.confusion[g][p] = row > 0 ? counts[g][p] / row : 0.0;
  }
  return m;
}

std::optional<double> average_precision(std::vector<AttributeInstance> instances) {
  long positives = 0;
  for (const auto& inst : instances) positives += inst.positive ? 1 : 0;
  if (positives == 0) return std::nullopt;

  std::sort(instances.begin(), instances.end(),
            [](const AttributeInstance& a, const AttributeInstance& b) {
              return a.score > b.score;
            });

  // precision/recall points per tied-score group
  std::vector<std::pair<double, double>> points;  // (recall, precision)
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < instances.size()) {
    std::size_t j = i;
    while (j < instances.size() && instances[j].score == instances[i].score) {
      tp += instances[j].positive ? 1 : 0;
      fp += instances[j].positive ? 0 : 1;
      ++j;
    }
    points.emplace_back(static_cast<double>(tp) / positives,
                        static_cast<double>(tp) / (tp + fp));
    i = j;
  }

  // precision envelope: running max from the right
  std::vector<double> envelope(points.size());
  double best = 0.0;
  for (int k = static_cast<int>(points.size()) - 1; k >= 0; --k) {
    best = std::max(best, points[k].second);
    envelope[k] = best;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    ap += (points[k].first - prev_recall) * envelope[k];
    prev_recall = points[k].first;
  }
  return ap;
}

AttributeMetrics attribute_metrics(
    const std::map<std::string, std::vector<AttributeInstance>>& per_attribute) {
  AttributeMetrics m;
  double sum = 0.0;
  int defined = 0;
  for (const auto& [attr, instances] : per_attribute) {
    m.ap[attr] = average_precision(instances);
    if (m.ap[attr]) {
      sum += *m.ap[attr];
      ++defined;
    }
  }
  if (defined > 0) m.mean_ap = sum / defined;
  return m;
}

std::string fuse_vote(std::span<const std::string> labels) {
  if (labels.empty()) throw EmptyInput("fuse_vote: no labels");
  std::map<std::string, int> counts;
  for (const auto& l : labels) counts[l]++;
  const std::string* best = nullptr;
  int best_count = -1;
  for (const auto& [label, count] : counts)
    if (count > best_count) {  // map order: ties keep the lowest label id
      best = &label;
      best_count = count;
    }
  return *best;
}

std::string fuse_mean(std::span<const std::vector<std::pair<std::string, double>>> tables) {
  if (tables.empty()) throw EmptyInput("fuse_mean: no score tables");
  std::map<std::string, double> sums;
  for (const auto& table : tables)
    for (const auto& [label, score] : table) sums[label] += score;
  const std::string* best = nullptr;
  double best_mean = -1.0;
  const double n = static_cast<double>(tables.size());
  for (const auto& [label, sum] : sums)
    if (sum / n > best_mean) {
      best = &label;
      best_mean = sum / n;
    }
  if (!best) throw EmptyInput("fuse_mean: empty score tables");
  return *best;
}

PairF1 identity_f1(const std::map<std::string, std::string>& pred_groups,
                   const std::map<std::string, std::string>& gt_groups) {
  std::set<std::string> items;
  for (const auto& [item, _] : pred_groups) items.insert(item);
  for (const auto& [item, _] : gt_groups) items.insert(item);

  // items missing from a side become singleton groups there
  auto group_of = [](const std::map<std::string, std::string>& groups,
                     const std::string& item, const char* prefix) {
    auto it = groups.find(item);
    return it != groups.end() ? it->second : std::string(prefix) + item;
  };

  std::vector<std::string> universe(items.begin(), items.end());
  PairF1 r;
  for (std::size_t i = 0; i < universe.size(); ++i) {
    for (std::size_t j = i + 1; j < universe.size(); ++j) {
      const bool in_pred = group_of(pred_groups, universe[i], "!p:") ==
                           group_of(pred_groups, universe[j], "!q:");
      const bool in_gt = group_of(gt_groups, universe[i], "!g:") ==
                         group_of(gt_groups, universe[j], "!h:");
      r.pred_pairs += in_pred ? 1 : 0;
      r.gt_pairs += in_gt ? 1 : 0;
      r.common_pairs += (in_pred && in_gt) ? 1 : 0;
    }
  }
  r.precision = r.pred_pairs > 0 ? static_cast<double>(r.common_pairs) / r.pred_pairs : 1.0;
  r.recall = r.gt_pairs > 0 ? static_cast<double>(r.common_pairs) / r.gt_pairs : 1.0;
  r.f1 = (r.precision + r.recall) > 0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                                      : 0.0;
  return r;
}

EvalReport evaluate_rows(const std::vector<HierarchyRow>& pred,
                         const std::vector<HierarchyRow>& gt, double iou_threshold) {
  EvalReport report;

  // --- detection & tracking over (camera, t) frames
  std::set<std::pair<int, int>> frames;
  for (const auto& r : pred) frames.insert({r.camera, r.t});
  for (const auto& r : gt) frames.insert({r.camera, r.t});
  std::set<int> cameras;
  int max_t = 0;
  for (const auto& [cam, t] : frames) {
    cameras.insert(cam);
    max_t = std::max(max_t, t);
  }

  std::map<std::pair<int, int>, std::vector<Rect>> pred_boxes, gt_boxes;
  std::map<std::pair<int, int>, std::vector<TrackBox>> pred_tracks, gt_tracks;
  for (const auto& r : pred) {
    pred_boxes[{r.camera, r.t}].push_back(r.bbox);
    pred_tracks[{r.camera, r.t}].push_back({r.scene_id, r.bbox});
  }
  for (const auto& r : gt) {
    gt_boxes[{r.camera, r.t}].push_back(r.bbox);
    gt_tracks[{r.camera, r.t}].push_back({r.scene_id, r.bbox});
  }

  std::vector<std::vector<Rect>> pf, gf;
  for (const auto& key : frames) {
    pf.push_back(pred_boxes[key]);
    gf.push_back(gt_boxes[key]);
  }
  report.detection = detection_metrics(pf, gf, iou_threshold);

  std::vector<std::vector<TrackedFrame>> sequences;
  for (int cam : cameras) {
    std::vector<TrackedFrame> seq(max_t);
    for (int t = 1; t <= max_t; ++t) {
      auto p = pred_tracks.find({cam, t});
      auto g = gt_tracks.find({cam, t});
      if (p != pred_tracks.end()) seq[t - 1].pred = p->second;
      if (g != gt_tracks.end()) seq[t - 1].gt = g->second;
    }
    sequences.push_back(std::move(seq));
  }
  report.tracking = tracking_metrics(std::span(sequences), iou_threshold);

  // --- record-level join on (camera, view_id, t)
  std::map<std::tuple<int, std::string, int>, const HierarchyRow*> gt_by_key;
  for (const auto& r : gt) gt_by_key[{r.camera, r.view_id, r.t}] = &r;

  // observed-camera count per (gt entity, t)
  std::map<std::pair<std::string, int>, int> views_of;
  for (const auto& r : gt) views_of[{r.scene_id, r.t}]++;

  std::vector<std::string> pred_labels, gt_labels;
  std::map<int, int> correct_by_views, total_by_views;
  std::map<std::string, std::vector<AttributeInstance>> attr_instances;

  for (const auto& r : pred) {
    if (r.projected) continue;
    auto it = gt_by_key.find({r.camera, r.view_id, r.t});
    if (it == gt_by_key.end()) continue;
    const HierarchyRow& g = *it->second;
    if (r.action && g.action) {
      pred_labels.push_back(*r.action);
      gt_labels.push_back(*g.action);
      const int k = views_of[{g.scene_id, g.t}];
      total_by_views[k]++;
      if (*r.action == *g.action) correct_by_views[k]++;
    }
    for (const auto& [attr, truth] : g.attributes) {
      double score;
      auto sit = r.attr_scores.find(attr);
      if (sit != r.attr_scores.end()) {
        score = sit->second;
      } else {
        auto bit = r.attributes.find(attr);
        if (bit == r.attributes.end()) continue;
        score = bit->second ? 1.0 : 0.0;
      }
      attr_instances[attr].push_back({score, truth});
    }
  }
  if (!pred_labels.empty()) report.actions = action_metrics(pred_labels, gt_labels);
  report.attributes = attribute_metrics(attr_instances);
  for (const auto& [k, total] : total_by_views) {
    report.instances_by_views[k] = total;
    report.action_accuracy_by_views[k] =
        total > 0 ? static_cast<double>(correct_by_views[k]) / total : 0.0;
  }

  // --- identity F1 over tracklets
  std::map<std::string, std::string> pred_groups, gt_groups;
  for (const auto& r : pred)
    if (!r.projected)
      pred_groups["c" + std::to_string(r.camera) + "/" + r.view_id] = r.scene_id;
  for (const auto& r : gt)
    gt_groups["c" + std::to_string(r.camera) + "/" + r.view_id] = r.scene_id;
  report.identity = identity_f1(pred_groups, gt_groups);

  return report;
}

std::string report_to_json(const EvalReport& r) {
  json j;
  j["DA"] = r.detection.da;
  j["DP"] = r.detection.dp;
  j["TA"] = r.tracking.ta;
  j["TP"] = r.tracking.tp;
  j["IDSW"] = r.tracking.idsw;
  j["FRAG"] = r.tracking.frag;
  j["action_overall"] = r.actions.overall;
  json per_class = json::object();
  for (const auto& [c, a] : r.actions.per_class) per_class[c] = a;
  j["action_per_class"] = per_class;
  j["action_classes"] = r.actions.classes;
  j["confusion"] = r.actions.confusion;
  json ap = json::object();
  for (const auto& [attr, v] : r.attributes.ap)
    ap[attr] = v ? json(*v) : json(nullptr);
  j["attribute_ap"] = ap;
  j["mAP"] = r.attributes.mean_ap ? json(*r.attributes.mean_ap) : json(nullptr);
  j["identity_precision"] = r.identity.precision;
  j["identity_recall"] = r.identity.recall;
  j["identity_f1"] = r.identity.f1;
  json by_views = json::object();
  for (const auto& [k, acc] : r.action_accuracy_by_views)
    by_views[std::to_string(k)] = acc;
  j["action_accuracy_by_views"] = by_views;
  return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& r) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line),
                "DA %.4f  DP %.4f  TA %.4f  TP %.4f  IDSW %d  FRAG %d\n",
                r.detection.da, r.detection.dp, r.tracking.ta, r.tracking.tp,
                r.tracking.idsw, r.tracking.frag);
  out << line;
  std::snprintf(line, sizeof(line), "identity F1 %.4f (P %.4f / R %.4f)\n",
                r.identity.f1, r.identity.precision, r.identity.recall);
  out << line;
  std::snprintf(line, sizeof(line), "action accuracy %.4f over %d instances\n",
                r.actions.overall, r.actions.total);
  out << line;
  for (const auto& [c, a] : r.actions.per_class) {
    std::snprintf(line, sizeof(line), "  %-16s %.4f\n", c.c_str(), a);
    out << line;
  }
  if (r.attributes.mean_ap) {
    std::snprintf(line, sizeof(line), "attribute mAP %.4f\n", *r.attributes.mean_ap);
    out << line;
    for (const auto& [attr, v] : r.attributes.ap) {
      if (v)
        std::snprintf(line, sizeof(line), "  %-16s %.4f\n", attr.c_str(), *v);
      else
        std::snprintf(line, sizeof(line), "  %-16s (no positives)\n", attr.c_str());
      out << line;
    }
  }
  if (!r.action_accuracy_by_views.empty()) {
    out << "action accuracy by observed views:\n";
    for (const auto& [k, acc] : r.action_accuracy_by_views) {
      std::snprintf(line, sizeof(line), "  %d view(s): %.4f (%d instances)\n", k, acc,
                    r.instances_by_views.at(k));
      out << line;
    }
  }
  return out.str();
}

}  // namespace xview
