#pragma once

// Unified comics annotation model: one book, its character roster and its
// pages, each page holding polygonal annotations and speaker links.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "comix/error.hpp"

namespace comix {

enum class AnnotationClass : std::uint8_t { panel, character, text, face, balloon, onomatopoeia };

inline constexpr std::array<AnnotationClass, 6> kAllClasses{
    AnnotationClass::panel, AnnotationClass::character, AnnotationClass::text,
    AnnotationClass::face,  AnnotationClass::balloon,   AnnotationClass::onomatopoeia};

inline constexpr std::array<AnnotationClass, 4> kDetectionClasses{
    AnnotationClass::panel, AnnotationClass::character, AnnotationClass::text,
    AnnotationClass::face};

inline std::string_view class_name(AnnotationClass cls) {
  switch (cls) {
    case AnnotationClass::panel: return "panel";
    case AnnotationClass::character: return "character";
    case AnnotationClass::text: return "text";
    case AnnotationClass::face: return "face";
    case AnnotationClass::balloon: return "balloon";
    case AnnotationClass::onomatopoeia: return "onomatopoeia";
  }
  return "?";
}

inline std::optional<AnnotationClass> class_from_name(std::string_view name) {
  for (auto cls : kAllClasses)
    if (class_name(cls) == name) return cls;
  return std::nullopt;
}

struct Point {
  double x = 0;
  double y = 0;
  bool operator==(const Point&) const = default;
};

/// Closed polygon with at least three vertices, in page pixels.
class Polygon {
 public:
  explicit Polygon(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.size() < 3)
      throw Error(ErrorCode::invalid_argument,
                  "polygon needs at least 3 points, got " + std::to_string(points_.size()));
  }

  /// Axis-aligned rectangle from two corners, clockwise from top-left.
  static Polygon rectangle(double x1, double y1, double x2, double y2) {
    return Polygon({{x1, y1}, {x2, y1}, {x2, y2}, {x1, y2}});
  }

  const std::vector<Point>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool operator==(const Polygon&) const = default;

 private:
  std::vector<Point> points_;
};

/// Axis-aligned box, top-left origin.
struct BBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;
  double area() const { return w * h; }
  bool operator==(const BBox&) const = default;
};

inline BBox bbox_of(const Polygon& polygon) {
  const auto& pts = polygon.points();
  double min_x = pts[0].x, max_x = pts[0].x, min_y = pts[0].y, max_y = pts[0].y;
  for (const auto& p : pts) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  return {min_x, min_y, max_x - min_x, max_y - min_y};
}

/// True when the polygon is exactly the four corners of an axis-aligned box.
inline bool is_axis_aligned_rectangle(const Polygon& polygon) {
  if (polygon.size() != 4) return false;
  const auto& p = polygon.points();
  auto b = bbox_of(polygon);
  double x2 = b.x + b.w, y2 = b.y + b.h;
  // every vertex is a corner, and consecutive vertices share one coordinate
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& a = p[i];
    const auto& n = p[(i + 1) % 4];
    bool corner = (a.x == b.x || a.x == x2) && (a.y == b.y || a.y == y2);
    bool edge = (a.x == n.x) != (a.y == n.y);
    if (!corner || !edge) return false;
  }
  return true;
}

/// Unknown attributes and child elements carried through parsing untouched.
/// Elements are stored as canonical single-line XML.
struct Extensions {
  std::map<std::string, std::string> attributes;
  std::vector<std::string> elements;
  bool empty() const { return attributes.empty() && elements.empty(); }
  bool operator==(const Extensions&) const = default;
};

enum class DatasetKind : std::uint8_t { dcm, c100, ebd, m109, pop, other };

struct DatasetTag {
  DatasetKind kind = DatasetKind::other;
  std::string other_name;  // only meaningful for DatasetKind::other

  std::string_view token() const {
    switch (kind) {
      case DatasetKind::dcm: return "dcm";
      case DatasetKind::c100: return "c100";
      case DatasetKind::ebd: return "ebd";
      case DatasetKind::m109: return "m109";
      case DatasetKind::pop: return "pop";
      case DatasetKind::other: return "other";
    }
    return "other";
  }

  /// Display label: the token, or the free-form name for `other`.
  std::string label() const {
    if (kind == DatasetKind::other && !other_name.empty()) return other_name;
    return std::string(token());
  }

  static std::optional<DatasetTag> from_token(std::string_view token) {
    for (auto k : {DatasetKind::dcm, DatasetKind::c100, DatasetKind::ebd, DatasetKind::m109,
                   DatasetKind::pop, DatasetKind::other}) {
      DatasetTag t{k, {}};
      if (t.token() == token) return t;
    }
    return std::nullopt;
  }

  /// Known token, else `other` carrying the given name.
  static DatasetTag from_label(std::string_view label) {
    if (auto t = from_token(label)) return *t;
    return {DatasetKind::other, std::string(label)};
  }

  bool operator==(const DatasetTag&) const = default;
};

struct CharacterEntry {
  std::int64_t id = 0;
  std::string name;
  Extensions ext;
  bool operator==(const CharacterEntry&) const = default;
};

/// Carried as-is; nothing interprets the page range.
struct Story {
  std::string title;
  std::int64_t first = 0;
  std::int64_t last = 0;
  Extensions ext;
  bool operator==(const Story&) const = default;
};

struct AnnotationObject {
  std::string id;
  AnnotationClass cls = AnnotationClass::panel;
  Polygon polygon;
  std::optional<std::int64_t> char_ref;           // character, face
  std::optional<std::string> transcription;       // text
  std::optional<std::string> truncation_group;    // onomatopoeia
  Extensions ext;
  bool operator==(const AnnotationObject&) const = default;
};

struct SpeakerLink {
  std::string text_id;
  std::int64_t speaker_char_ref = 0;
  Extensions ext;
  bool operator==(const SpeakerLink&) const = default;
};

struct UcaPage {
  std::int64_t index = 0;
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<AnnotationObject> annotations;
  std::vector<SpeakerLink> links;
  Extensions ext;
  bool operator==(const UcaPage&) const = default;
};

struct UcaBook {
  std::string title;
  DatasetTag dataset;
  std::vector<CharacterEntry> characters;
  std::vector<Story> stories;
  std::vector<UcaPage> pages;
  Extensions ext;
  bool operator==(const UcaBook&) const = default;
};

// ---------------------------------------------------------------------------
// Validation

/// Rule codes. A single injected defect yields exactly its own code, with
/// these exceptions: a NON_FINITE_COORD annotation skips the OUT_OF_PAGE
/// check, a BAD_PAGE_DIM page skips OUT_OF_PAGE for all its annotations, and
/// a char_ref on a class other than character/face is reported only as
/// MISPLACED_FIELD (never DANGLING_CHAR_REF).
namespace rule {
inline constexpr std::string_view duplicate_char_id = "DUPLICATE_CHAR_ID";
inline constexpr std::string_view empty_char_name = "EMPTY_CHAR_NAME";
inline constexpr std::string_view page_index_order = "PAGE_INDEX_ORDER";
inline constexpr std::string_view bad_page_dim = "BAD_PAGE_DIM";
inline constexpr std::string_view duplicate_annotation_id = "DUPLICATE_ANNOTATION_ID";
inline constexpr std::string_view non_finite_coord = "NON_FINITE_COORD";
inline constexpr std::string_view out_of_page = "OUT_OF_PAGE";
inline constexpr std::string_view dangling_char_ref = "DANGLING_CHAR_REF";
inline constexpr std::string_view misplaced_field = "MISPLACED_FIELD";
inline constexpr std::string_view orphan_truncation_group = "ORPHAN_TRUNCATION_GROUP";
inline constexpr std::string_view dangling_link_text = "DANGLING_LINK_TEXT";
inline constexpr std::string_view dangling_link_speaker = "DANGLING_LINK_SPEAKER";
}  // namespace rule

struct ValidationIssue {
  std::optional<std::int64_t> page;  // nullopt for book-level issues
  std::string annotation_id = "-";
  std::string rule;
  std::string message;

  auto key() const { return std::tie(page, annotation_id, rule, message); }
  bool operator==(const ValidationIssue&) const = default;
};

struct ValidationReport {
  std::vector<ValidationIssue> errors;
  std::vector<ValidationIssue> warnings;
  bool ok() const { return errors.empty(); }
};

struct ValidationOptions {
  /// Vertices may overshoot the page by this fraction of its dimension and
  /// still only draw a warning.
  double out_of_page_tolerance = 0.005;
};

inline ValidationReport validate_book(const UcaBook& book, const ValidationOptions& opts = {}) {
  ValidationReport report;
  auto error = [&](std::optional<std::int64_t> page, std::string id, std::string_view code,
                   std::string msg) {
    report.errors.push_back({page, std::move(id), std::string(code), std::move(msg)});
  };
  auto warning = [&](std::optional<std::int64_t> page, std::string id, std::string_view code,
                     std::string msg) {
    report.warnings.push_back({page, std::move(id), std::string(code), std::move(msg)});
  };

  std::set<std::int64_t> roster;
  for (const auto& c : book.characters) {
    if (!roster.insert(c.id).second)
      error(std::nullopt, "-", rule::duplicate_char_id,
            "character id " + std::to_string(c.id) + " appears more than once");
    if (c.name.empty())
      error(std::nullopt, "-", rule::empty_char_name,
            "character " + std::to_string(c.id) + " has an empty name");
  }

  std::optional<std::int64_t> prev_index;
  for (const auto& page : book.pages) {
    const auto pi = page.index;
    bool order_ok = prev_index ? page.index > *prev_index : page.index == 0;
    if (!order_ok)
      error(pi, "-", rule::page_index_order,
            prev_index ? "page index " + std::to_string(page.index) + " does not exceed " +
                             std::to_string(*prev_index)
                       : "first page index is " + std::to_string(page.index) + ", expected 0");
    prev_index = page.index;

    bool dims_ok = page.width > 0 && page.height > 0;
    if (!dims_ok)
      error(pi, "-", rule::bad_page_dim,
            "page dimensions " + std::to_string(page.width) + "x" + std::to_string(page.height));

    std::map<std::string, int> id_counts;
    std::set<std::string> text_ids;
    std::map<std::string, int> group_counts;
    for (const auto& a : page.annotations) {
      ++id_counts[a.id];
      if (a.cls == AnnotationClass::text) text_ids.insert(a.id);
      if (a.cls == AnnotationClass::onomatopoeia && a.truncation_group) ++group_counts[*a.truncation_group];
    }
    for (const auto& [id, n] : id_counts)
      if (n > 1)
        error(pi, id, rule::duplicate_annotation_id,
              "annotation id used " + std::to_string(n) + " times on the page");

    const double tol = opts.out_of_page_tolerance;
    for (const auto& a : page.annotations) {
      bool finite = std::all_of(a.polygon.points().begin(), a.polygon.points().end(),
                                [](const Point& p) { return std::isfinite(p.x) && std::isfinite(p.y); });
      if (!finite) {
        error(pi, a.id, rule::non_finite_coord, "polygon has a non-finite coordinate");
      } else if (dims_ok) {
        const double w = static_cast<double>(page.width), h = static_cast<double>(page.height);
        bool outside = false, beyond = false;
        for (const auto& p : a.polygon.points()) {
          if (p.x < 0 || p.x > w || p.y < 0 || p.y > h) outside = true;
          if (p.x < -tol * w || p.x > w * (1 + tol) || p.y < -tol * h || p.y > h * (1 + tol))
            beyond = true;
        }
        if (beyond)
          error(pi, a.id, rule::out_of_page, "polygon exceeds the page beyond tolerance");
        else if (outside)
          warning(pi, a.id, rule::out_of_page, "polygon exceeds the page within tolerance");
      }

      bool refs_char = a.cls == AnnotationClass::character || a.cls == AnnotationClass::face;
      if (a.char_ref) {
        if (!refs_char)
          error(pi, a.id, rule::misplaced_field, "char_ref on a " + std::string(class_name(a.cls)));
        else if (!roster.count(*a.char_ref))
          error(pi, a.id, rule::dangling_char_ref,
                "char_ref " + std::to_string(*a.char_ref) + " is not in the roster");
      }
      if (a.transcription && a.cls != AnnotationClass::text)
        error(pi, a.id, rule::misplaced_field,
              "transcription on a " + std::string(class_name(a.cls)));
      if (a.truncation_group) {
        if (a.cls != AnnotationClass::onomatopoeia)
          error(pi, a.id, rule::misplaced_field,
                "truncation group on a " + std::string(class_name(a.cls)));
        else if (group_counts[*a.truncation_group] < 2)
          error(pi, a.id, rule::orphan_truncation_group,
                "truncation group '" + *a.truncation_group + "' has a single member");
      }
    }

    for (const auto& link : page.links) {
      if (!text_ids.count(link.text_id))
        error(pi, link.text_id, rule::dangling_link_text,
              "speaker link targets no text annotation");
      if (!roster.count(link.speaker_char_ref))
        error(pi, link.text_id, rule::dangling_link_speaker,
              "speaker " + std::to_string(link.speaker_char_ref) + " is not in the roster");
    }
  }

  auto by_key = [](const ValidationIssue& a, const ValidationIssue& b) { return a.key() < b.key(); };
  std::stable_sort(report.errors.begin(), report.errors.end(), by_key);
  std::stable_sort(report.warnings.begin(), report.warnings.end(), by_key);
  return report;
}

/// Removes annotations and links named by annotation-level errors until the
/// book has none left. Returns the number of objects removed. Book- and
/// page-level errors are left in place.
inline std::size_t drop_invalid_annotations(UcaBook& book, const ValidationOptions& opts = {}) {
  std::size_t dropped = 0;
  for (;;) {
    auto report = validate_book(book, opts);
    std::set<std::pair<std::int64_t, std::string>> bad_annotations, bad_links;
    for (const auto& e : report.errors) {
      if (!e.page || e.annotation_id == "-") continue;
      bool link_rule = e.rule == rule::dangling_link_text || e.rule == rule::dangling_link_speaker;
      (link_rule ? bad_links : bad_annotations).insert({*e.page, e.annotation_id});
    }
    if (bad_annotations.empty() && bad_links.empty()) return dropped;
    std::size_t before = dropped;
    for (auto& page : book.pages) {
      auto a_end = std::remove_if(page.annotations.begin(), page.annotations.end(),
                                  [&](const AnnotationObject& a) {
                                    return bad_annotations.count({page.index, a.id}) > 0;
                                  });
      dropped += static_cast<std::size_t>(page.annotations.end() - a_end);
      page.annotations.erase(a_end, page.annotations.end());
      auto l_end = std::remove_if(page.links.begin(), page.links.end(), [&](const SpeakerLink& l) {
        return bad_links.count({page.index, l.text_id}) > 0 ||
               bad_annotations.count({page.index, l.text_id}) > 0;
      });
      dropped += static_cast<std::size_t>(page.links.end() - l_end);
      page.links.erase(l_end, page.links.end());
    }
    if (dropped == before) return dropped;
  }
}

}  // namespace comix
