#pragma once

// YOLO label trees: root/classes.txt plus root/labels/<book>/<page>.txt with
// lines `<class_idx> <cx> <cy> <w> <h>` normalized to the page size. Page
// sizes come from the manifest (root/manifest.csv is picked up when no
// manifest is given) or from root/images/<book>/<page>.<ext>.

#include <filesystem>
#include <string>
#include <vector>

#include "comix/adapters/common.hpp"
#include "comix/parallel.hpp"

namespace comix {

/// Normalized values may overshoot [0,1] by this much before being rejected.
inline constexpr double kYoloCoordTolerance = 0.005;

struct YoloBox {
  std::size_t class_idx = 0;
  double cx = 0, cy = 0, w = 0, h = 0;
  std::optional<double> score;
};

/// Parses one label line; `with_score` demands a trailing score field.
inline YoloBox parse_yolo_line(std::string_view line, bool with_score, const std::string& where,
                               std::int64_t line_no) {
  auto fields = text::split_ws(line);
  SourcePos pos{line_no, 1};
  std::size_t want = with_score ? 6 : 5;
  if (fields.size() != want)
    throw Error(ErrorCode::line_malformed,
                where + ": expected " + std::to_string(want) + " fields, got " + std::to_string(fields.size()), pos);
  auto idx = text::parse_int(fields[0]);
  if (!idx || *idx < 0) throw Error(ErrorCode::line_malformed, where + ": bad class index", pos);
  double v[4];
  for (std::size_t i = 0; i < 4; ++i) {
    auto d = text::parse_double(fields[i + 1]);
    if (!d) throw Error(ErrorCode::line_malformed, where + ": bad number", pos);
    if (*d < -kYoloCoordTolerance || *d > 1 + kYoloCoordTolerance)
      throw Error(ErrorCode::coord_out_of_range,
                  where + ": value " + std::string(fields[i + 1]) + " outside [0,1]", pos);
    v[i] = *d;
  }
  YoloBox box{static_cast<std::size_t>(*idx), v[0], v[1], v[2], v[3], std::nullopt};
  if (with_score) {
    auto s = text::parse_double(fields[5]);
    if (!s) throw Error(ErrorCode::line_malformed, where + ": bad score", pos);
    box.score = *s;
  }
  return box;
}

/// Pixel box of a normalized YOLO box on a width x height page.
inline BBox denormalize(const YoloBox& b, std::int64_t width, std::int64_t height) {
  const double W = static_cast<double>(width), H = static_cast<double>(height);
  double w = b.w * W, h = b.h * H;
  return {b.cx * W - w / 2, b.cy * H - h / 2, w, h};
}

inline std::vector<std::string> read_class_list(const std::filesystem::path& file) {
  std::vector<std::string> out;
  for (const auto& raw : text::split(text::read_file(file), '\n')) {
    auto name = text::trim(raw);
    if (!name.empty()) out.emplace_back(name);
  }
  return out;
}

inline std::vector<UcaBook> parse_yolo(const std::filesystem::path& root, const std::vector<std::string>& class_list,
                                       const AdapterOptions& opts = {}) {
  namespace fs = std::filesystem;
  const ClassMap class_map = opts.class_map.value_or(ClassMap::coco_default());
  std::vector<std::optional<AnnotationClass>> classes;
  for (const auto& name : class_list) classes.push_back(class_map.resolve(name, "classes.txt"));

  DatasetManifest local_manifest;
  const DatasetManifest* manifest = opts.manifest;
  if (!manifest && fs::is_regular_file(root / "manifest.csv")) {
    local_manifest = read_manifest(root / "manifest.csv");
    manifest = &local_manifest;
  }
  ManifestIndex index = manifest ? ManifestIndex(*manifest) : ManifestIndex();

  fs::path labels = fs::is_directory(root / "labels") ? root / "labels" : root;
  std::vector<std::pair<std::string, fs::path>> book_dirs;
  auto flat = adapter_detail::list_files(labels, {".txt"});
  flat.erase(std::remove_if(flat.begin(), flat.end(), [](const fs::path& p) { return p.filename() == "classes.txt"; }),
             flat.end());
  if (!flat.empty()) book_dirs.emplace_back(fs::absolute(root).lexically_normal().filename().string(), labels);
  for (const auto& dir : adapter_detail::list_dirs(labels))
    if (dir.filename() != "images" && !adapter_detail::list_files(dir, {".txt"}).empty())
      book_dirs.emplace_back(dir.filename().string(), dir);
  if (book_dirs.empty()) throw Error(ErrorCode::format_unknown, "no YOLO label files under " + root.string());

  auto books = parallel_map<UcaBook>(opts.jobs, book_dirs.size(), [&](std::size_t bi) {
    const auto& [title, dir] = book_dirs[bi];
    UcaBook book;
    book.title = title;
    auto files = adapter_detail::list_files(dir, {".txt"});
    files.erase(std::remove_if(files.begin(), files.end(),
                               [](const fs::path& p) { return p.filename() == "classes.txt"; }),
                files.end());
    std::vector<std::string> stems;
    for (const auto& f : files) stems.push_back(f.stem().string());
    auto indices = adapter_detail::page_indices(stems);
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto& file = files[i];
      std::string image_file;
      auto size = adapter_detail::resolve_page_size(index, title, file,
                                                    {root / "images" / title / file.stem(), dir / file.stem()},
                                                    &image_file);
      if (const auto* e = index.find_stem(title, file.stem().string()); e && book.dataset.label() == "other")
        book.dataset = e->dataset;
      UcaPage page;
      page.index = indices[i];
      page.width = size.width;
      page.height = size.height;
      if (!image_file.empty()) page.ext.attributes["file"] = image_file;
      adapter_detail::IdGen ids;
      std::int64_t line_no = 0;
      for (const auto& raw : text::split(text::read_file(file), '\n')) {
        ++line_no;
        auto line = text::trim(raw);
        if (line.empty()) continue;
        auto box = parse_yolo_line(line, false, file.string(), line_no);
        if (box.class_idx >= classes.size())
          throw Error(ErrorCode::unmapped_class,
                      file.string() + ": class index " + std::to_string(box.class_idx) + " not in classes.txt",
                      {line_no, 1});
        auto cls = classes[box.class_idx];
        if (!cls) continue;
        auto b = denormalize(box, page.width, page.height);
        page.annotations.push_back(
            {.id = ids.next(*cls), .cls = *cls, .polygon = Polygon::rectangle(b.x, b.y, b.x + b.w, b.y + b.h)});
      }
      book.pages.push_back(std::move(page));
    }
    adapter_detail::finalize_book(book, opts, std::string("merged"));
    return book;
  });
  adapter_detail::sort_books(books);
  return books;
}

inline std::vector<UcaBook> parse_yolo(const std::filesystem::path& root, const AdapterOptions& opts = {}) {
  return parse_yolo(root, read_class_list(root / "classes.txt"), opts);
}

}  // namespace comix
