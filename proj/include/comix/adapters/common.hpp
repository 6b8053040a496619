#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "comix/error.hpp"
#include "comix/manifest.hpp"
#include "comix/text.hpp"
#include "comix/uca.hpp"

namespace comix {

enum class FormatId { uca, manga109_xml, dcm_txt, ebd_svg, coco_json, yolo_dir };

inline std::string_view format_name(FormatId f) {
  switch (f) {
    case FormatId::uca: return "uca";
    case FormatId::manga109_xml: return "manga109";
    case FormatId::dcm_txt: return "dcm";
    case FormatId::ebd_svg: return "ebd";
    case FormatId::coco_json: return "coco";
    case FormatId::yolo_dir: return "yolo";
  }
  return "?";
}

inline std::optional<FormatId> format_from_name(std::string_view name) {
  for (auto f : {FormatId::uca, FormatId::manga109_xml, FormatId::dcm_txt, FormatId::ebd_svg,
                 FormatId::coco_json, FormatId::yolo_dir})
    if (format_name(f) == name) return f;
  if (name == "manga109_xml") return FormatId::manga109_xml;
  if (name == "dcm_txt") return FormatId::dcm_txt;
  if (name == "ebd_svg") return FormatId::ebd_svg;
  if (name == "coco_json") return FormatId::coco_json;
  if (name == "yolo_dir") return FormatId::yolo_dir;
  return std::nullopt;
}

/// Source class token -> AnnotationClass, or nullopt meaning "ignore".
/// Lookup tries the exact token first, then its lower-case form.
class ClassMap {
 public:
  ClassMap() = default;
  ClassMap(std::initializer_list<std::pair<std::string, std::optional<AnnotationClass>>> entries) {
    for (const auto& [k, v] : entries) map_[k] = v;
  }

  void set(std::string token, std::optional<AnnotationClass> cls) { map_[std::move(token)] = cls; }
  bool empty() const { return map_.empty(); }

  /// Throws UNMAPPED_CLASS when the token is unknown.
  std::optional<AnnotationClass> resolve(std::string_view token, const std::string& where = {}) const {
    if (auto it = map_.find(std::string(token)); it != map_.end()) return it->second;
    if (auto it = map_.find(text::to_lower(token)); it != map_.end()) return it->second;
    throw Error(ErrorCode::unmapped_class,
                "class token '" + std::string(token) + "' has no mapping" +
                    (where.empty() ? "" : " (" + where + ")"));
  }

  /// Lines of `token=class` where class is a class name or `ignore`; `#`
  /// starts a comment.
  static ClassMap parse(std::string_view spec) {
    ClassMap m;
    std::int64_t line_no = 0;
    for (const auto& raw : text::split(spec, '\n')) {
      ++line_no;
      auto line = text::trim(std::string_view(raw).substr(0, raw.find('#')));
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw Error(ErrorCode::line_malformed, "expected token=class", {line_no, 1});
      auto token = std::string(text::trim(line.substr(0, eq)));
      auto target = text::trim(line.substr(eq + 1));
      if (target == "ignore") {
        m.set(token, std::nullopt);
      } else if (auto cls = class_from_name(target)) {
        m.set(token, *cls);
      } else {
        throw Error(ErrorCode::line_malformed, "unknown class '" + std::string(target) + "'",
                    {line_no, 1});
      }
    }
    return m;
  }

  static ClassMap scheme_names() {
    ClassMap m;
    for (auto cls : kAllClasses) m.set(std::string(class_name(cls)), cls);
    return m;
  }

  static ClassMap manga109_default() {
    return {{"frame", AnnotationClass::panel},
            {"body", AnnotationClass::character},
            {"face", AnnotationClass::face},
            {"text", AnnotationClass::text},
            {"onomatopoeia", AnnotationClass::onomatopoeia}};
  }

  static ClassMap dcm_default() {
    auto m = scheme_names();
    m.set("frame", AnnotationClass::panel);
    m.set("body", AnnotationClass::character);
    return m;
  }

  static ClassMap ebd_default() {
    auto m = scheme_names();
    m.set("line", AnnotationClass::text);
    m.set("frame", AnnotationClass::panel);
    m.set("page", std::nullopt);
    return m;
  }

  static ClassMap coco_default() {
    auto m = scheme_names();
    m.set("frame", AnnotationClass::panel);
    m.set("body", AnnotationClass::character);
    return m;
  }

 private:
  std::map<std::string, std::optional<AnnotationClass>> map_;
};

struct AdapterOptions {
  std::optional<ClassMap> class_map;        // adapter default when unset
  const DatasetManifest* manifest = nullptr;
  /// When false the adapter returns books as parsed, leaving validation to the
  /// caller (lenient pipelines).
  bool validate = true;
  ValidationOptions validation;
  std::optional<std::string> text_granularity;  // "line" or "merged"
  std::optional<DatasetTag> dataset;            // overrides the adapter's tag
  std::size_t jobs = 1;
};

namespace adapter_detail {

inline char id_prefix(AnnotationClass cls) {
  switch (cls) {
    case AnnotationClass::panel: return 'p';
    case AnnotationClass::character: return 'c';
    case AnnotationClass::text: return 't';
    case AnnotationClass::face: return 'f';
    case AnnotationClass::balloon: return 'b';
    case AnnotationClass::onomatopoeia: return 'o';
  }
  return 'a';
}

/// Per-page id generator: p0, p1, c0, ...
class IdGen {
 public:
  std::string next(AnnotationClass cls) {
    auto& n = counts_[static_cast<std::size_t>(cls)];
    return std::string(1, id_prefix(cls)) + std::to_string(n++);
  }

 private:
  std::array<std::size_t, 6> counts_{};
};

/// Sorts pages by index, stamps the granularity tag and validates.
inline void finalize_book(UcaBook& book, const AdapterOptions& opts,
                          std::optional<std::string> default_granularity) {
  std::stable_sort(book.pages.begin(), book.pages.end(),
                   [](const UcaPage& a, const UcaPage& b) { return a.index < b.index; });
  auto granularity = opts.text_granularity ? opts.text_granularity : default_granularity;
  if (granularity) book.ext.attributes["granularity"] = *granularity;
  if (opts.dataset) book.dataset = *opts.dataset;
  if (!opts.validate) return;
  auto report = validate_book(book, opts.validation);
  if (!report.ok()) {
    const auto& e = report.errors.front();
    std::string where = "book '" + book.title + "'";
    if (e.page) where += ", page " + std::to_string(*e.page);
    if (e.annotation_id != "-") where += ", annotation " + e.annotation_id;
    throw Error(ErrorCode::schema_violation, where + ": " + e.message, {}, e.rule);
  }
}

inline void sort_books(std::vector<UcaBook>& books) {
  std::stable_sort(books.begin(), books.end(),
                   [](const UcaBook& a, const UcaBook& b) { return a.title < b.title; });
}

/// Files with one of `exts` directly inside `dir`, natural-sorted by name.
inline std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir,
                                                     std::initializer_list<std::string_view> exts) {
  std::vector<std::filesystem::path> out;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    auto ext = text::to_lower(entry.path().extension().string());
    if (std::find(exts.begin(), exts.end(), ext) != exts.end()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return text::natural_less(a.filename().string(), b.filename().string());
  });
  return out;
}

inline std::vector<std::filesystem::path> list_dirs(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec))
    if (entry.is_directory()) out.push_back(entry.path());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return text::natural_less(a.filename().string(), b.filename().string());
  });
  return out;
}

/// Page indices from file stems when they are all distinct non-negative
/// integers (shifted so the first page is 0, gaps kept), else positions in
/// natural order.
inline std::vector<std::int64_t> page_indices(const std::vector<std::string>& stems) {
  std::vector<std::int64_t> out;
  std::set<std::int64_t> seen;
  for (const auto& s : stems) {
    auto v = text::parse_int(s);
    bool digits = !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    if (!v || !digits || !seen.insert(*v).second) {
      out.clear();
      for (std::size_t i = 0; i < stems.size(); ++i) out.push_back(static_cast<std::int64_t>(i));
      return out;
    }
    out.push_back(*v);
  }
  if (!seen.empty())
    for (auto& v : out) v -= *seen.begin();
  return out;
}

/// Page size from the manifest, else from an image sitting next to the
/// annotation file; adapters never guess.
inline ImageSize resolve_page_size(const ManifestIndex& index, const std::string& book,
                                   const std::filesystem::path& annotation_file,
                                   std::initializer_list<std::filesystem::path> image_stems,
                                   std::string* file_out = nullptr) {
  auto stem = annotation_file.stem().string();
  if (const auto* e = index.find_stem(book, stem)) {
    if (file_out) *file_out = e->file_name;
    return {e->width, e->height};
  }
  for (const auto& candidate : image_stems) {
    for (auto ext : kImageExtensions) {
      auto p = candidate;
      p += ext;
      std::error_code ec;
      if (!std::filesystem::is_regular_file(p, ec)) continue;
      if (auto size = probe_image_size(p)) {
        if (file_out) *file_out = p.filename().string();
        return *size;
      }
    }
  }
  throw Error(ErrorCode::missing_dimensions,
              "no size for page " + annotation_file.string() + " (supply a manifest or the image)");
}

}  // namespace adapter_detail

}  // namespace comix
