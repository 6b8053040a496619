#pragma once

// Reading predictions and rendering evaluation reports.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "comix/adapters/yolo.hpp"
#include "comix/coco.hpp"
#include "comix/evaluator.hpp"
#include "comix/manifest.hpp"
#include "comix/text.hpp"

namespace comix {

/// COCO results: a JSON array of {image_id, category_id, bbox, score}.
inline std::vector<DetectionRecord> parse_coco_results(std::string_view document) {
  using namespace json_detail;
  auto root = json_detail::parse(document);
  if (!root.is_array()) schema("results document must be an array");
  std::vector<DetectionRecord> out;
  out.reserve(root.size());
  for (std::size_t i = 0; i < root.size(); ++i) {
    std::string where = "results[" + std::to_string(i) + "]";
    DetectionRecord d;
    d.image_id = int_field(root[i], "image_id", where);
    auto cat = int_field(root[i], "category_id", where);
    auto cls = category_scheme::class_of(cat);
    if (!cls) throw Error(ErrorCode::unknown_category, where + " has unknown category " + std::to_string(cat));
    d.cls = *cls;
    d.box = bbox_field(root[i], where);
    d.score = num_field(root[i], "score", where);
    out.push_back(d);
  }
  return out;
}

/// YOLO prediction tree: label lines with a trailing score, one file per page
/// at [labels/]<book>/<stem>.txt (or flat <stem>.txt). Files are matched to
/// ground-truth images by book directory and file stem. Class indices follow
/// classes.txt in the tree when present, else the category scheme order.
inline std::vector<DetectionRecord> read_yolo_predictions(const std::filesystem::path& root, const CocoDoc& gt) {
  namespace fs = std::filesystem;
  std::vector<std::optional<AnnotationClass>> classes;
  if (fs::is_regular_file(root / "classes.txt")) {
    const auto map = ClassMap::coco_default();
    for (const auto& name : read_class_list(root / "classes.txt")) classes.push_back(map.resolve(name, "classes.txt"));
  } else {
    for (auto c : kAllClasses) classes.emplace_back(c);
  }

  std::map<std::pair<std::string, std::string>, const CocoImage*> by_key;
  std::map<std::string, std::vector<const CocoImage*>> by_stem;
  for (const auto& im : gt.images) {
    fs::path p(im.file_name);
    auto dir = p.parent_path().filename().string();
    by_key.try_emplace({dir, p.stem().string()}, &im);
    by_stem[p.stem().string()].push_back(&im);
  }

  fs::path labels = fs::is_directory(root / "labels") ? root / "labels" : root;
  std::vector<std::pair<std::string, fs::path>> files;
  for (const auto& f : adapter_detail::list_files(labels, {".txt"}))
    if (f.filename() != "classes.txt") files.emplace_back("", f);
  for (const auto& dir : adapter_detail::list_dirs(labels))
    for (const auto& f : adapter_detail::list_files(dir, {".txt"})) files.emplace_back(dir.filename().string(), f);

  std::vector<DetectionRecord> out;
  for (const auto& [book, file] : files) {
    auto stem = file.stem().string();
    const CocoImage* image = nullptr;
    if (auto it = by_key.find({book, stem}); it != by_key.end()) {
      image = it->second;
    } else if (book.empty()) {
      if (auto s = by_stem.find(stem); s != by_stem.end() && s->second.size() == 1) image = s->second.front();
    }
    if (!image)
      throw Error(ErrorCode::unknown_image_id, file.string() + " matches no ground-truth image");
    std::int64_t line_no = 0;
    for (const auto& raw : text::split(text::read_file(file), '\n')) {
      ++line_no;
      auto line = text::trim(raw);
      if (line.empty()) continue;
      auto box = parse_yolo_line(line, true, file.string(), line_no);
      if (box.class_idx >= classes.size())
        throw Error(ErrorCode::unknown_category, file.string() + ": class index " + std::to_string(box.class_idx),
                    {line_no, 1});
      if (!classes[box.class_idx]) continue;
      out.push_back({image->id, *classes[box.class_idx], denormalize(box, image->width, image->height), *box.score});
    }
  }
  return out;
}

namespace eval_io_detail {

/// Sorted keys, two-space indent, floating values with six decimals.
inline void canonical(const nlohmann::json& j, std::string& out, int indent) {
  std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += inner + nlohmann::json(it.key()).dump() + ": ";
        canonical(it.value(), out, indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        canonical(j[i], out, indent + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case nlohmann::json::value_t::number_float: out += text::format_fixed6(j.get<double>()); return;
    default: out += j.dump(); return;
  }
}

inline nlohmann::json means_json(const MaskedMeans& m) {
  nlohmann::json j;
  j["n_classes"] = m.n_classes;
  j["map_per_threshold"] = m.map;
  j["map_50_95"] = m.map_mean;
  j["map_50"] = m.map50 ? nlohmann::json(*m.map50) : nlohmann::json();
  return j;
}

inline std::string pad_right(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace eval_io_detail

inline std::string report_to_json(const EvalReport& r) {
  using nlohmann::json;
  json j;
  json cfg;
  cfg["ap_mode"] = std::string(ap_mode_name(r.config.ap_mode));
  cfg["class_mask_mode"] = std::string(mask_mode_name(r.config.class_mask_mode));
  cfg["iou_thresholds"] = r.config.iou_thresholds;
  cfg["max_dets"] = r.config.max_dets;
  json cls_names = json::array();
  for (auto c : r.config.classes) cls_names.push_back(std::string(class_name(c)));
  cfg["classes"] = cls_names;
  j["config"] = cfg;

  json classes = json::array();
  for (const auto& c : r.classes) {
    json e;
    e["class"] = std::string(class_name(c.cls));
    e["category_id"] = category_scheme::id_of(c.cls);
    e["num_gt"] = c.num_gt;
    e["num_det"] = c.num_det;
    e["detected"] = c.detected();
    e["ap_per_threshold"] = c.ap;
    e["ap_50"] = c.ap50 ? json(*c.ap50) : json();
    e["ap_50_95"] = c.ap_mean;
    classes.push_back(e);
  }
  j["classes"] = classes;
  j["all_classes"] = r.all_classes ? eval_io_detail::means_json(*r.all_classes) : json();
  j["detected_only"] = r.detected_only ? eval_io_detail::means_json(*r.detected_only) : json();
  json ar;
  for (std::size_t i = 0; i < r.ar.size(); ++i) ar[std::to_string(r.config.max_dets[i])] = r.ar[i];
  j["ar"] = ar;
  json images = json::array();
  for (const auto& im : r.images)
    images.push_back({{"image_id", im.image_id}, {"tp", im.counts.tp}, {"fp", im.counts.fp}, {"fn", im.counts.fn}});
  j["images_at_50"] = images;
  j["warnings"] = r.warnings;

  std::string out;
  eval_io_detail::canonical(j, out, 0);
  return out + "\n";
}

/// Per-class AP@0.5 and AP@[.5:.95], then mAP rows for both mask modes and AR.
inline std::string report_to_table(const EvalReport& r) {
  using eval_io_detail::pad_right;
  auto num = [](std::optional<double> v) { return v ? text::format_fixed6(*v) : std::string("-"); };
  const std::size_t w = 26;
  std::string out = pad_right("class", w) + pad_right("AP@0.5", 12) + pad_right("AP@[.5:.95]", 13) +
                    pad_right("gt", 8) + "det\n";
  for (const auto& c : r.classes) {
    out += pad_right(std::string(class_name(c.cls)), w) + pad_right(num(c.ap50), 12) +
           pad_right(text::format_fixed6(c.ap_mean), 13) + pad_right(std::to_string(c.num_gt), 8) +
           std::to_string(c.num_det) + "\n";
  }
  auto means = [&](const std::optional<MaskedMeans>& m, std::string_view name) {
    std::string label = "mAP " + std::string(name);
    if (!m) {
      out += pad_right(label, w) + pad_right("-", 12) + "-\n";
      return;
    }
    label += " (N=" + std::to_string(m->n_classes) + ")";
    out += pad_right(label, w) + pad_right(num(m->map50), 12) + text::format_fixed6(m->map_mean) + "\n";
  };
  means(r.all_classes, "all_classes");
  means(r.detected_only, "detected_only");
  for (std::size_t i = 0; i < r.ar.size(); ++i)
    out += pad_right("AR@" + std::to_string(r.config.max_dets[i]), w) + text::format_fixed6(r.ar[i]) + "\n";
  for (const auto& warning : r.warnings) out += "warning: " + warning + "\n";
  return out;
}

}  // namespace comix
