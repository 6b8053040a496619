#pragma once

// eBDtheque-layout annotations: one SVG per page. Drawable <polygon>/<rect>
// elements take their class from their own `class` attribute or the nearest
// ancestor's. Books are sub-directories, or for a flat directory the file
// stem up to its last '_' (CYB_BUBBLEGOM_T01_005 -> CYB_BUBBLEGOM_T01).

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "comix/adapters/common.hpp"
#include "comix/parallel.hpp"
#include "comix/xml.hpp"

namespace comix {

namespace ebd_detail {

inline std::optional<double> svg_length(const std::string* raw) {
  if (!raw) return std::nullopt;
  std::string_view v = text::trim(*raw);
  if (v.size() > 2 && v.substr(v.size() - 2) == "px") v.remove_suffix(2);
  return text::parse_double(v);
}

inline std::vector<Point> svg_points(const xml::Node& node) {
  const auto* raw = node.attr("points");
  if (!raw) throw Error(ErrorCode::schema_violation, "<polygon> without points", node.pos);
  std::string spaced = *raw;
  std::replace(spaced.begin(), spaced.end(), ',', ' ');
  auto tokens = text::split_ws(spaced);
  if (tokens.size() % 2 != 0)
    throw Error(ErrorCode::schema_violation, "odd number of polygon coordinates", node.pos);
  std::vector<Point> pts;
  for (std::size_t i = 0; i < tokens.size(); i += 2) {
    auto x = text::parse_double(tokens[i]);
    auto y = text::parse_double(tokens[i + 1]);
    if (!x || !y) throw Error(ErrorCode::schema_violation, "bad polygon coordinate", node.pos);
    pts.push_back({*x, *y});
  }
  if (pts.size() < 3) throw Error(ErrorCode::schema_violation, "polygon needs 3 points", node.pos);
  return pts;
}

inline std::string transcription_of(const xml::Node& node) {
  for (const auto* name : {"title", "desc", "metadata"})
    if (const auto* c = node.child(name)) {
      auto t = text::trim(c->deep_text());
      if (!t.empty()) return std::string(t);
    }
  return {};
}

struct Walker {
  const ClassMap& class_map;
  const std::string& file_label;
  UcaPage& page;
  adapter_detail::IdGen ids;

  void walk(const xml::Node& node, const std::string* inherited) {
    const std::string* label = node.attr("class") ? node.attr("class") : inherited;
    bool drawable = node.name == "polygon" || node.name == "rect";
    if (drawable) {
      if (!label)
        throw Error(ErrorCode::schema_violation, file_label + ": <" + node.name + "> has no class label",
                    node.pos);
      auto cls = class_map.resolve(*label, file_label);
      if (!cls) return;
      std::optional<Polygon> polygon;
      if (node.name == "polygon") {
        polygon.emplace(svg_points(node));
      } else {
        auto x = svg_length(node.attr("x")).value_or(0), y = svg_length(node.attr("y")).value_or(0);
        auto w = svg_length(node.attr("width")), h = svg_length(node.attr("height"));
        if (!w || !h) throw Error(ErrorCode::schema_violation, file_label + ": <rect> without size", node.pos);
        polygon = Polygon::rectangle(x, y, x + *w, y + *h);
      }
      AnnotationObject a{.id = ids.next(*cls), .cls = *cls, .polygon = std::move(*polygon)};
      if (const auto* src = node.attr("id")) a.ext.attributes["source_id"] = *src;
      if (*cls == AnnotationClass::text) {
        auto t = transcription_of(node);
        if (!t.empty()) a.transcription = std::move(t);
      }
      page.annotations.push_back(std::move(a));
      return;
    }
    for (const auto& c : node.children) walk(c, label);
  }
};

}  // namespace ebd_detail

/// One SVG page. Width/height come from the root <svg> or its first <image>;
/// zero means unknown and is resolved by the caller.
inline UcaPage parse_ebd_page(std::string_view document, const std::string& file_label,
                              const ClassMap& class_map) {
  xml::Node root = xml::parse(document);
  if (root.name != "svg")
    throw Error(ErrorCode::schema_violation, file_label + ": root element must be <svg>", root.pos);
  UcaPage page;
  auto w = ebd_detail::svg_length(root.attr("width"));
  auto h = ebd_detail::svg_length(root.attr("height"));
  if (!w || !h) {
    if (const auto* image = root.child("image")) {
      w = ebd_detail::svg_length(image->attr("width"));
      h = ebd_detail::svg_length(image->attr("height"));
    }
  }
  if (w && h) {
    page.width = static_cast<std::int64_t>(std::llround(*w));
    page.height = static_cast<std::int64_t>(std::llround(*h));
  }
  ebd_detail::Walker walker{class_map, file_label, page, {}};
  for (const auto& c : root.children) walker.walk(c, nullptr);
  return page;
}

inline std::vector<UcaBook> parse_ebd(const std::filesystem::path& root, const AdapterOptions& opts = {}) {
  namespace fs = std::filesystem;
  const ClassMap class_map = opts.class_map.value_or(ClassMap::ebd_default());
  ManifestIndex index = opts.manifest ? ManifestIndex(*opts.manifest) : ManifestIndex();

  std::map<std::string, std::vector<fs::path>> grouped;
  for (const auto& f : adapter_detail::list_files(root, {".svg"})) {
    auto stem = f.stem().string();
    auto cut = stem.rfind('_');
    grouped[cut == std::string::npos ? stem : stem.substr(0, cut)].push_back(f);
  }
  for (const auto& dir : adapter_detail::list_dirs(root))
    for (const auto& f : adapter_detail::list_files(dir, {".svg"})) grouped[dir.filename().string()].push_back(f);
  if (grouped.empty()) throw Error(ErrorCode::format_unknown, "no SVG pages under " + root.string());

  std::vector<std::pair<std::string, std::vector<fs::path>>> work(grouped.begin(), grouped.end());
  auto books = parallel_map<UcaBook>(opts.jobs, work.size(), [&](std::size_t bi) {
    auto& [title, files] = work[bi];
    std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
      return text::natural_less(a.filename().string(), b.filename().string());
    });
    UcaBook book;
    book.title = title;
    book.dataset = {DatasetKind::ebd, {}};
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto& file = files[i];
      UcaPage page = parse_ebd_page(text::read_file(file), file.string(), class_map);
      page.index = static_cast<std::int64_t>(i);
      page.ext.attributes["file"] = file.filename().string();
      if (const auto* e = index.find_stem(title, file.stem().string())) {
        page.width = e->width;
        page.height = e->height;
      } else if (page.width <= 0 || page.height <= 0) {
        auto size = adapter_detail::resolve_page_size(index, title, file, {file.parent_path() / file.stem()});
        page.width = size.width;
        page.height = size.height;
      }
      book.pages.push_back(std::move(page));
    }
    adapter_detail::finalize_book(book, opts, std::string("line"));
    return book;
  });
  adapter_detail::sort_books(books);
  return books;
}

}  // namespace comix
