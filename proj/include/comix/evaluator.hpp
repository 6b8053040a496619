#pragma once

// Box detection metrics with COCO greedy matching: per-class AP at a set of
// IoU thresholds, means across classes under two masking rules, and AR at
// detection budgets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "comix/coco.hpp"
#include "comix/error.hpp"
#include "comix/parallel.hpp"
#include "comix/uca.hpp"

namespace comix {

struct DetectionRecord {
  std::int64_t image_id = 0;
  AnnotationClass cls = AnnotationClass::panel;
  BBox box;
  double score = 0;
};

struct GroundTruthRecord {
  std::int64_t image_id = 0;
  AnnotationClass cls = AnnotationClass::panel;
  BBox box;
};

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  bool operator==(const ConfusionCounts&) const = default;
};

struct PrCurvePoint {
  std::size_t n = 0;  // 1-based rank
  double precision = 0;
  double recall = 0;
};

enum class ApMode { coco101, paper_sum };
enum class MaskMode { all_classes, detected_only };

inline std::string_view ap_mode_name(ApMode m) { return m == ApMode::coco101 ? "coco101" : "paper_sum"; }
inline std::string_view mask_mode_name(MaskMode m) {
  return m == MaskMode::all_classes ? "all_classes" : "detected_only";
}

/// 0.50, 0.55, ..., 0.95 written as decimal literals.
inline std::vector<double> default_iou_thresholds() {
  return {0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
}

struct EvalConfig {
  std::vector<double> iou_thresholds = default_iou_thresholds();
  std::vector<std::size_t> max_dets{1, 10, 100};
  ApMode ap_mode = ApMode::coco101;
  std::vector<AnnotationClass> classes{kDetectionClasses.begin(), kDetectionClasses.end()};
  MaskMode class_mask_mode = MaskMode::all_classes;
};

inline void check_config(const EvalConfig& c) {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::invalid_argument, m); };
  if (c.iou_thresholds.empty()) bad("no IoU thresholds");
  for (std::size_t i = 0; i < c.iou_thresholds.size(); ++i) {
    double t = c.iou_thresholds[i];
    if (!(t > 0 && t <= 1)) bad("IoU threshold outside (0,1]");
    if (i > 0 && !(t > c.iou_thresholds[i - 1])) bad("IoU thresholds must be strictly increasing");
  }
  if (c.max_dets.empty()) bad("no max_dets");
  for (std::size_t i = 0; i < c.max_dets.size(); ++i) {
    if (c.max_dets[i] == 0) bad("max_dets must be positive");
    if (i > 0 && c.max_dets[i] <= c.max_dets[i - 1]) bad("max_dets must be strictly increasing");
  }
  if (c.classes.empty()) bad("no classes selected");
  std::set<AnnotationClass> seen(c.classes.begin(), c.classes.end());
  if (seen.size() != c.classes.size()) bad("duplicate class in selection");
}

/// Intersection over union with continuous geometry; 0 when the union is empty.
inline double iou(const BBox& a, const BBox& b) {
  double ow = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  if (ow <= 0) return 0;
  double oh = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (oh <= 0) return 0;
  double inter = ow * oh;
  double uni = a.w * a.h + b.w * b.h - inter;
  if (uni <= 0) return 0;
  return inter / uni;
}

struct MatchResult {
  /// Kept detections in processing order, with the ground truth each claimed.
  std::vector<std::pair<std::size_t, std::optional<std::size_t>>> pairs;
  std::vector<bool> gt_matched;

  ConfusionCounts counts() const {
    ConfusionCounts c;
    for (const auto& [d, g] : pairs) (g ? c.tp : c.fp) += 1;
    c.fn = static_cast<std::size_t>(std::count(gt_matched.begin(), gt_matched.end(), false));
    return c;
  }
};

namespace eval_detail {

/// Indices sorted by score descending, ties in input order.
template <typename Scores>
std::vector<std::size_t> rank_by_score(const Scores& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

/// Greedy assignment over a row-major IoU matrix (ranked detections x gts).
/// Each detection takes the unmatched gt with the highest IoU >= thr; among
/// equal IoUs the later gt wins.
inline std::vector<std::optional<std::size_t>> greedy(const std::vector<double>& ious, std::size_t nd,
                                                      std::size_t ng, double thr, std::vector<bool>& gt_matched) {
  std::vector<std::optional<std::size_t>> out(nd);
  gt_matched.assign(ng, false);
  const double floor = std::min(thr, 1 - 1e-10);
  for (std::size_t d = 0; d < nd; ++d) {
    double best = floor;
    std::optional<std::size_t> m;
    for (std::size_t g = 0; g < ng; ++g) {
      if (gt_matched[g]) continue;
      double v = ious[d * ng + g];
      if (v < best) continue;
      best = v;
      m = g;
    }
    if (m) {
      gt_matched[*m] = true;
      out[d] = m;
    }
  }
  return out;
}

}  // namespace eval_detail

/// COCO greedy matching within one (image, class) scope.
inline MatchResult match_detections(const std::vector<DetectionRecord>& dets,
                                    const std::vector<GroundTruthRecord>& gts, double iou_thr,
                                    std::size_t max_dets) {
  std::optional<std::pair<std::int64_t, AnnotationClass>> scope;
  auto check = [&](std::int64_t image, AnnotationClass cls) {
    if (!scope) scope.emplace(image, cls);
    else if (scope->first != image || scope->second != cls)
      throw Error(ErrorCode::scope_mixed, "records span more than one (image, class) scope");
  };
  for (const auto& d : dets) check(d.image_id, d.cls);
  for (const auto& g : gts) check(g.image_id, g.cls);

  std::vector<double> scores;
  for (const auto& d : dets) scores.push_back(d.score);
  auto order = eval_detail::rank_by_score(scores);
  if (order.size() > max_dets) order.resize(max_dets);

  std::vector<double> ious(order.size() * gts.size());
  for (std::size_t r = 0; r < order.size(); ++r)
    for (std::size_t g = 0; g < gts.size(); ++g) ious[r * gts.size() + g] = iou(dets[order[r]].box, gts[g].box);

  MatchResult result;
  auto m = eval_detail::greedy(ious, order.size(), gts.size(), iou_thr, result.gt_matched);
  for (std::size_t r = 0; r < order.size(); ++r) result.pairs.emplace_back(order[r], m[r]);
  return result;
}

/// One detection's outcome, ready for pooling.
struct ScoredMatch {
  double score = 0;
  bool tp = false;
};

/// Precision/recall at every rank after a stable sort by score descending.
inline std::vector<PrCurvePoint> pr_curve(const std::vector<ScoredMatch>& matches, std::size_t total_gt) {
  std::vector<double> scores;
  for (const auto& m : matches) scores.push_back(m.score);
  auto order = eval_detail::rank_by_score(scores);
  std::vector<PrCurvePoint> curve;
  curve.reserve(order.size());
  std::size_t tp = 0, fp = 0;
  for (std::size_t n = 0; n < order.size(); ++n) {
    (matches[order[n]].tp ? tp : fp) += 1;
    double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    double recall = total_gt == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(total_gt);
    curve.push_back({n + 1, precision, recall});
  }
  return curve;
}

/// The 101 recall sample points 0.00, 0.01, ..., 1.00 (computed as i*0.01).
inline const std::vector<double>& recall_grid() {
  static const std::vector<double> grid = [] {
    std::vector<double> g(101);
    for (std::size_t i = 0; i < 100; ++i) g[i] = static_cast<double>(i) * 0.01;
    g[100] = 1.0;
    return g;
  }();
  return grid;
}

inline double average_precision(const std::vector<PrCurvePoint>& curve, ApMode mode) {
  if (curve.empty()) return 0.0;
  if (mode == ApMode::paper_sum) {
    double ap = 0, prev_r = 0;
    for (const auto& p : curve) {
      ap += (p.recall - prev_r) * p.precision;
      prev_r = p.recall;
    }
    return ap;
  }
  std::vector<double> env(curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) env[i] = curve[i].precision;
  for (std::size_t i = env.size() - 1; i > 0; --i)
    if (env[i] > env[i - 1]) env[i - 1] = env[i];
  double sum = 0;
  std::size_t i = 0;
  for (double r : recall_grid()) {
    while (i < curve.size() && curve[i].recall < r) ++i;
    if (i < curve.size()) sum += env[i];
  }
  return sum / static_cast<double>(recall_grid().size());
}

/// Matching of one (image, class) scope at every configured IoU threshold.
/// Detections are already ranked and truncated to the largest budget.
struct ScopeMatches {
  std::int64_t image_id = 0;
  AnnotationClass cls = AnnotationClass::panel;
  std::vector<double> scores;
  std::vector<std::vector<bool>> tp;  // [threshold][rank]
  std::size_t num_gt = 0;
};

/// Recall with at most `k` detections per image: pooled TP / total gt per
/// (class, threshold), averaged over thresholds and then over the classes
/// that have ground truth. 0 when no class has ground truth.
inline double average_recall(const std::vector<ScopeMatches>& scopes, std::size_t k) {
  std::map<AnnotationClass, std::pair<std::vector<std::size_t>, std::size_t>> per_class;  // tp per t, gt
  for (const auto& s : scopes) {
    auto& [tps, gt] = per_class[s.cls];
    tps.resize(std::max(tps.size(), s.tp.size()), 0);
    gt += s.num_gt;
    for (std::size_t t = 0; t < s.tp.size(); ++t) {
      std::size_t lim = std::min(k, s.tp[t].size());
      tps[t] += static_cast<std::size_t>(std::count(s.tp[t].begin(), s.tp[t].begin() + static_cast<std::ptrdiff_t>(lim), true));
    }
  }
  double sum = 0;
  std::size_t n = 0;
  for (const auto& [cls, entry] : per_class) {
    const auto& [tps, gt] = entry;
    if (gt == 0 || tps.empty()) continue;
    double r = 0;
    for (auto tp : tps) r += static_cast<double>(tp) / static_cast<double>(gt);
    sum += r / static_cast<double>(tps.size());
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

struct MeanResult {
  double value = 0;
  std::size_t n_classes = 0;
  std::vector<std::string> warnings;
};

/// `aps[i]` is nullopt for a class with no detections. all_classes counts it
/// as 0 with a warning; detected_only leaves it out.
inline MeanResult mean_average_precision(const std::vector<std::pair<AnnotationClass, std::optional<double>>>& aps,
                                         MaskMode mode) {
  MeanResult out;
  double sum = 0;
  for (const auto& [cls, ap] : aps) {
    if (!ap) {
      if (mode == MaskMode::detected_only) continue;
      out.warnings.push_back("class " + std::string(class_name(cls)) + " has no detections; counted as AP 0");
    }
    sum += ap.value_or(0.0);
    ++out.n_classes;
  }
  if (out.n_classes == 0) throw Error(ErrorCode::no_classes, "no class left to average under " +
                                                                 std::string(mask_mode_name(mode)));
  out.value = sum / static_cast<double>(out.n_classes);
  return out;
}

struct ClassReport {
  AnnotationClass cls = AnnotationClass::panel;
  std::size_t num_gt = 0;
  std::size_t num_det = 0;
  std::vector<double> ap;       // per IoU threshold
  std::optional<double> ap50;   // when 0.5 is a configured threshold
  double ap_mean = 0;           // mean over thresholds
  bool detected() const { return num_det > 0; }
};

struct MaskedMeans {
  MaskMode mode = MaskMode::all_classes;
  std::size_t n_classes = 0;
  std::vector<double> map;      // per IoU threshold
  std::optional<double> map50;
  double map_mean = 0;          // mean of `map`
};

struct ImageDiagnostics {
  std::int64_t image_id = 0;
  ConfusionCounts counts;
};

struct EvalReport {
  EvalConfig config;
  std::vector<ClassReport> classes;
  std::optional<MaskedMeans> all_classes;
  std::optional<MaskedMeans> detected_only;  // absent when nothing was detected
  std::vector<double> ar;                    // per max_dets
  std::vector<ImageDiagnostics> images;      // at IoU 0.5
  std::vector<std::string> warnings;

  const MaskedMeans* selected() const {
    return config.class_mask_mode == MaskMode::all_classes ? (all_classes ? &*all_classes : nullptr)
                                                           : (detected_only ? &*detected_only : nullptr);
  }
};

inline std::vector<GroundTruthRecord> ground_truth_records(const CocoDoc& gt) {
  std::vector<GroundTruthRecord> out;
  for (const auto& a : gt.annotations) {
    auto cls = category_scheme::class_of(a.category_id);
    if (!cls)
      throw Error(ErrorCode::unknown_category,
                  "ground-truth annotation " + std::to_string(a.id) + " has category " + std::to_string(a.category_id));
    out.push_back({a.image_id, *cls, a.bbox});
  }
  return out;
}

namespace eval_detail {

inline void check_records(const CocoDoc& gt, const std::vector<DetectionRecord>& preds) {
  std::set<std::int64_t> images;
  for (const auto& im : gt.images) images.insert(im.id);
  for (const auto& a : gt.annotations)
    if (!images.count(a.image_id))
      throw Error(ErrorCode::unknown_image_id, "ground-truth annotation " + std::to_string(a.id) +
                                                   " refers to image " + std::to_string(a.image_id));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    if (!images.count(p.image_id))
      throw Error(ErrorCode::unknown_image_id, "prediction " + std::to_string(i) + " refers to image " +
                                                   std::to_string(p.image_id) + " absent from ground truth");
    if (!(p.score >= 0 && p.score <= 1))
      throw Error(ErrorCode::invalid_record, "prediction " + std::to_string(i) + " has score outside [0,1]");
    if (!(p.box.w >= 0 && p.box.h >= 0) || !std::isfinite(p.box.x) || !std::isfinite(p.box.y) ||
        !std::isfinite(p.box.w) || !std::isfinite(p.box.h))
      throw Error(ErrorCode::invalid_record, "prediction " + std::to_string(i) + " has an invalid box");
  }
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline std::optional<std::size_t> index_of_half(const std::vector<double>& thresholds) {
  for (std::size_t i = 0; i < thresholds.size(); ++i)
    if (thresholds[i] == 0.5) return i;
  return std::nullopt;
}

inline MaskedMeans masked_means(const std::vector<ClassReport>& classes, const EvalConfig& config, MaskMode mode,
                                std::vector<std::string>* warnings) {
  MaskedMeans out;
  out.mode = mode;
  for (std::size_t t = 0; t < config.iou_thresholds.size(); ++t) {
    std::vector<std::pair<AnnotationClass, std::optional<double>>> aps;
    for (const auto& c : classes)
      aps.emplace_back(c.cls, c.detected() ? std::optional<double>(c.ap[t]) : std::nullopt);
    auto m = mean_average_precision(aps, mode);
    if (t == 0 && warnings) warnings->insert(warnings->end(), m.warnings.begin(), m.warnings.end());
    out.n_classes = m.n_classes;
    out.map.push_back(m.value);
  }
  if (auto h = index_of_half(config.iou_thresholds)) out.map50 = out.map[*h];
  out.map_mean = mean(out.map);
  return out;
}

}  // namespace eval_detail

/// Full evaluation. Every prediction must name a ground-truth image; records
/// of classes outside `config.classes` are ignored. The result does not
/// depend on `jobs`.
inline EvalReport evaluate(const CocoDoc& gt, const std::vector<DetectionRecord>& preds,
                           const EvalConfig& config = {}, std::size_t jobs = 1) {
  check_config(config);
  eval_detail::check_records(gt, preds);
  auto gts = ground_truth_records(gt);

  EvalReport report;
  report.config = config;
  const auto& thresholds = config.iou_thresholds;
  const std::size_t T = thresholds.size();
  const std::size_t max_det = config.max_dets.back();
  auto half = eval_detail::index_of_half(thresholds);

  // Scopes in (class, image id) order.
  std::map<std::pair<std::size_t, std::int64_t>, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> scope_map;
  std::map<AnnotationClass, std::size_t> class_pos;
  for (std::size_t i = 0; i < config.classes.size(); ++i) class_pos[config.classes[i]] = i;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (auto it = class_pos.find(preds[i].cls); it != class_pos.end())
      scope_map[{it->second, preds[i].image_id}].first.push_back(i);
  std::size_t zero_area = 0;
  for (std::size_t i = 0; i < gts.size(); ++i)
    if (auto it = class_pos.find(gts[i].cls); it != class_pos.end()) {
      scope_map[{it->second, gts[i].image_id}].second.push_back(i);
      if (!(gts[i].box.w > 0 && gts[i].box.h > 0)) ++zero_area;
    }
  if (zero_area > 0)
    report.warnings.push_back(std::to_string(zero_area) + " ground-truth boxes have zero area");

  std::vector<std::pair<std::size_t, std::int64_t>> keys;
  for (const auto& [k, v] : scope_map) keys.push_back(k);

  struct Computed {
    ScopeMatches matches;
    ConfusionCounts half_counts;
  };
  auto computed = parallel_map<Computed>(jobs, keys.size(), [&](std::size_t si) {
    const auto& [det_idx, gt_idx] = scope_map.at(keys[si]);
    Computed c;
    c.matches.image_id = keys[si].second;
    c.matches.cls = config.classes[keys[si].first];
    c.matches.num_gt = gt_idx.size();

    std::vector<double> scores;
    for (auto i : det_idx) scores.push_back(preds[i].score);
    auto order = eval_detail::rank_by_score(scores);
    if (order.size() > max_det) order.resize(max_det);
    for (auto r : order) c.matches.scores.push_back(scores[r]);

    const std::size_t nd = order.size(), ng = gt_idx.size();
    std::vector<double> ious(nd * ng);
    for (std::size_t r = 0; r < nd; ++r)
      for (std::size_t g = 0; g < ng; ++g) ious[r * ng + g] = iou(preds[det_idx[order[r]]].box, gts[gt_idx[g]].box);

    std::vector<bool> gt_matched;
    auto run = [&](double thr) {
      auto m = eval_detail::greedy(ious, nd, ng, thr, gt_matched);
      std::vector<bool> tp(nd);
      for (std::size_t r = 0; r < nd; ++r) tp[r] = m[r].has_value();
      return tp;
    };
    for (std::size_t t = 0; t < T; ++t) c.matches.tp.push_back(run(thresholds[t]));
    const auto& tp_half = half ? c.matches.tp[*half] : run(0.5);
    if (!half) gt_matched.clear();
    c.half_counts.tp = static_cast<std::size_t>(std::count(tp_half.begin(), tp_half.end(), true));
    c.half_counts.fp = nd - c.half_counts.tp;
    c.half_counts.fn = ng - c.half_counts.tp;
    return c;
  });

  // Per class: pool scopes in ascending image id, one PR curve per threshold.
  for (std::size_t ci = 0; ci < config.classes.size(); ++ci) {
    ClassReport cr;
    cr.cls = config.classes[ci];
    std::vector<const ScopeMatches*> mine;
    for (std::size_t si = 0; si < keys.size(); ++si)
      if (keys[si].first == ci) mine.push_back(&computed[si].matches);
    for (const auto* s : mine) cr.num_gt += s->num_gt;
    for (const auto& p : preds)
      if (p.cls == cr.cls) ++cr.num_det;
    if (cr.num_gt == 0)
      report.warnings.push_back("class " + std::string(class_name(cr.cls)) + " has no ground truth; AP set to 0");
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<ScoredMatch> pooled;
      for (const auto* s : mine)
        for (std::size_t r = 0; r < s->scores.size(); ++r) pooled.push_back({s->scores[r], s->tp[t][r]});
      cr.ap.push_back(cr.num_gt == 0 ? 0.0 : average_precision(pr_curve(pooled, cr.num_gt), config.ap_mode));
    }
    if (half) cr.ap50 = cr.ap[*half];
    cr.ap_mean = eval_detail::mean(cr.ap);
    report.classes.push_back(std::move(cr));
  }

  report.all_classes = eval_detail::masked_means(report.classes, config, MaskMode::all_classes, &report.warnings);
  bool any_detected = std::any_of(report.classes.begin(), report.classes.end(),
                                  [](const ClassReport& c) { return c.detected(); });
  if (any_detected)
    report.detected_only = eval_detail::masked_means(report.classes, config, MaskMode::detected_only, nullptr);
  else
    report.warnings.push_back("no detections for any selected class; detected_only mean is undefined");

  std::vector<ScopeMatches> all_scopes;
  all_scopes.reserve(computed.size());
  for (auto& c : computed) all_scopes.push_back(std::move(c.matches));
  for (auto k : config.max_dets) report.ar.push_back(average_recall(all_scopes, k));

  std::map<std::int64_t, ConfusionCounts> per_image;
  for (const auto& im : gt.images) per_image[im.id];
  for (std::size_t si = 0; si < keys.size(); ++si) {
    auto& c = per_image[keys[si].second];
    c.tp += computed[si].half_counts.tp;
    c.fp += computed[si].half_counts.fp;
    c.fn += computed[si].half_counts.fn;
  }
  for (const auto& [id, counts] : per_image) report.images.push_back({id, counts});
  return report;
}

}  // namespace comix
