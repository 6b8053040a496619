#pragma once

// COCO object-detection documents and the fixed category numbering.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "comix/error.hpp"
#include "comix/uca.hpp"

namespace comix {

/// panel=1, character=2, text=3, face=4, balloon=5, onomatopoeia=6.
/// Ids 1-4 are the detection subset.
namespace category_scheme {

inline std::int64_t id_of(AnnotationClass cls) { return static_cast<std::int64_t>(cls) + 1; }

inline std::optional<AnnotationClass> class_of(std::int64_t id) {
  if (id < 1 || id > static_cast<std::int64_t>(kAllClasses.size())) return std::nullopt;
  return kAllClasses[static_cast<std::size_t>(id - 1)];
}

inline bool is_detection(std::int64_t id) { return id >= 1 && id <= 4; }

}  // namespace category_scheme

struct CocoImage {
  std::int64_t id = 0;
  std::string file_name;
  std::int64_t width = 0;
  std::int64_t height = 0;
  bool operator==(const CocoImage&) const = default;
};

struct CocoAnnotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  BBox bbox;
  double area = 0;
  int iscrowd = 0;
  std::vector<double> segmentation;  // flat x1,y1,x2,y2,...; empty for plain boxes
  bool operator==(const CocoAnnotation&) const = default;
};

struct CocoCategory {
  std::int64_t id = 0;
  std::string name;
  bool operator==(const CocoCategory&) const = default;
};

struct CocoDoc {
  std::vector<CocoImage> images;
  std::vector<CocoAnnotation> annotations;
  std::vector<CocoCategory> categories;
  bool operator==(const CocoDoc&) const = default;
};

namespace json_detail {

using ordered = nlohmann::ordered_json;

/// Integral values print without a fraction, everything else shortest.
inline ordered number(double v) {
  if (v == std::floor(v) && std::fabs(v) < 9007199254740992.0)
    return static_cast<std::int64_t>(v);
  return v;
}

inline SourcePos offset_to_pos(std::string_view doc, std::size_t offset) {
  SourcePos pos{1, 1};
  for (std::size_t i = 0; i < offset && i < doc.size(); ++i) {
    if (doc[i] == '\n') {
      ++pos.line;
      pos.column = 1;
    } else {
      ++pos.column;
    }
  }
  return pos;
}

inline nlohmann::json parse(std::string_view doc) {
  try {
    return nlohmann::json::parse(doc.begin(), doc.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::parse_malformed, e.what(), offset_to_pos(doc, e.byte > 0 ? e.byte - 1 : 0));
  }
}

[[noreturn]] inline void schema(const std::string& msg) {
  throw Error(ErrorCode::schema_violation, msg);
}

inline const nlohmann::json& field(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) schema(where + " is not an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema(where + " lacks '" + key + "'");
  return *it;
}

inline std::int64_t int_field(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = field(obj, key, where);
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (d == std::floor(d) && std::fabs(d) < 9007199254740992.0) return static_cast<std::int64_t>(d);
  }
  schema(where + " field '" + key + "' is not an integer");
}

inline double num_field(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = field(obj, key, where);
  if (!v.is_number()) schema(where + " field '" + key + "' is not a number");
  return v.get<double>();
}

inline BBox bbox_field(const nlohmann::json& obj, const std::string& where) {
  const auto& b = field(obj, "bbox", where);
  if (!b.is_array() || b.size() != 4 || !std::all_of(b.begin(), b.end(), [](const auto& x) { return x.is_number(); }))
    schema(where + " bbox must be [x,y,w,h]");
  return {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
}

}  // namespace json_detail

/// Compact JSON, keys in the order images/annotations/categories, arrays
/// sorted by id.
inline std::string to_json(const CocoDoc& doc) {
  using json_detail::number;
  using json_detail::ordered;
  auto by_id = [](const auto& a, const auto& b) { return a.id < b.id; };
  auto images = doc.images;
  auto annotations = doc.annotations;
  auto categories = doc.categories;
  std::stable_sort(images.begin(), images.end(), by_id);
  std::stable_sort(annotations.begin(), annotations.end(), by_id);
  std::stable_sort(categories.begin(), categories.end(), by_id);

  ordered out = ordered::object();
  ordered jimages = ordered::array();
  for (const auto& im : images) {
    ordered j = ordered::object();
    j["id"] = im.id;
    j["file_name"] = im.file_name;
    j["width"] = im.width;
    j["height"] = im.height;
    jimages.push_back(std::move(j));
  }
  ordered janns = ordered::array();
  for (const auto& a : annotations) {
    ordered j = ordered::object();
    j["id"] = a.id;
    j["image_id"] = a.image_id;
    j["category_id"] = a.category_id;
    j["bbox"] = ordered::array({number(a.bbox.x), number(a.bbox.y), number(a.bbox.w), number(a.bbox.h)});
    j["area"] = number(a.area);
    j["iscrowd"] = a.iscrowd;
    if (!a.segmentation.empty()) {
      ordered poly = ordered::array();
      for (double v : a.segmentation) poly.push_back(number(v));
      j["segmentation"] = ordered::array({poly});
    }
    janns.push_back(std::move(j));
  }
  ordered jcats = ordered::array();
  for (const auto& c : categories) {
    ordered j = ordered::object();
    j["id"] = c.id;
    j["name"] = c.name;
    jcats.push_back(std::move(j));
  }
  out["images"] = std::move(jimages);
  out["annotations"] = std::move(janns);
  out["categories"] = std::move(jcats);
  return out.dump() + "\n";
}

inline CocoDoc parse_coco_json(std::string_view document) {
  using namespace json_detail;
  auto root = json_detail::parse(document);
  if (!root.is_object()) schema("COCO document must be an object");
  CocoDoc doc;

  const auto& images = field(root, "images", "document");
  if (!images.is_array()) schema("'images' must be an array");
  std::set<std::int64_t> image_ids;
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::string where = "images[" + std::to_string(i) + "]";
    CocoImage im;
    im.id = int_field(images[i], "id", where);
    const auto& name = field(images[i], "file_name", where);
    if (!name.is_string()) schema(where + " file_name must be a string");
    im.file_name = name.get<std::string>();
    im.width = int_field(images[i], "width", where);
    im.height = int_field(images[i], "height", where);
    if (!image_ids.insert(im.id).second)
      throw Error(ErrorCode::duplicate_image_id, "image id " + std::to_string(im.id) + " appears twice");
    doc.images.push_back(std::move(im));
  }

  if (auto it = root.find("categories"); it != root.end()) {
    if (!it->is_array()) schema("'categories' must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      std::string where = "categories[" + std::to_string(i) + "]";
      CocoCategory c;
      c.id = int_field((*it)[i], "id", where);
      const auto& name = field((*it)[i], "name", where);
      if (!name.is_string()) schema(where + " name must be a string");
      c.name = name.get<std::string>();
      doc.categories.push_back(std::move(c));
    }
  }

  if (auto it = root.find("annotations"); it != root.end()) {
    if (!it->is_array()) schema("'annotations' must be an array");
    std::set<std::int64_t> ann_ids;
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& j = (*it)[i];
      std::string where = "annotations[" + std::to_string(i) + "]";
      CocoAnnotation a;
      a.id = int_field(j, "id", where);
      a.image_id = int_field(j, "image_id", where);
      a.category_id = int_field(j, "category_id", where);
      a.bbox = bbox_field(j, where);
      if (a.bbox.w < 0 || a.bbox.h < 0) schema(where + " bbox has negative size");
      a.area = j.contains("area") ? num_field(j, "area", where) : a.bbox.area();
      a.iscrowd = j.contains("iscrowd") ? static_cast<int>(int_field(j, "iscrowd", where)) : 0;
      if (auto seg = j.find("segmentation"); seg != j.end() && seg->is_array() && seg->size() == 1 &&
                                             (*seg)[0].is_array()) {
        for (const auto& v : (*seg)[0]) {
          if (!v.is_number()) schema(where + " segmentation must hold numbers");
          a.segmentation.push_back(v.get<double>());
        }
        if (a.segmentation.size() % 2 != 0 || a.segmentation.size() < 6) a.segmentation.clear();
      }
      if (!image_ids.count(a.image_id))
        schema(where + " references unknown image " + std::to_string(a.image_id));
      if (!ann_ids.insert(a.id).second)
        schema(where + " reuses annotation id " + std::to_string(a.id));
      doc.annotations.push_back(std::move(a));
    }
  }
  return doc;
}

}  // namespace comix
