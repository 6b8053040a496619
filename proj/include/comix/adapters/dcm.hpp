#pragma once

// DCM-layout annotations: root/<book>/<page>.txt, one box per line
//   <class_token> <x1> <y1> <x2> <y2>
// Page sizes come from the manifest or from the page image next to the label
// file (<page>.jpg/.png), optionally under root/images/<book>/.

#include <filesystem>
#include <string>
#include <vector>

#include "comix/adapters/common.hpp"
#include "comix/parallel.hpp"

namespace comix {

inline UcaPage parse_dcm_page(std::string_view content, const std::string& file_label,
                              const ClassMap& class_map) {
  UcaPage page;
  adapter_detail::IdGen ids;
  std::int64_t line_no = 0;
  for (const auto& raw : text::split(content, '\n')) {
    ++line_no;
    auto line = text::trim(raw);
    if (line.empty()) continue;
    auto fields = text::split_ws(line);
    SourcePos pos{line_no, 1};
    if (fields.size() != 5)
      throw Error(ErrorCode::line_malformed,
                  file_label + ": expected 5 fields, got " + std::to_string(fields.size()), pos);
    double v[4];
    for (int i = 0; i < 4; ++i) {
      auto d = text::parse_double(fields[static_cast<std::size_t>(i + 1)]);
      if (!d) throw Error(ErrorCode::line_malformed, file_label + ": bad coordinate", pos);
      v[i] = *d;
    }
    auto cls = class_map.resolve(fields[0], file_label + ":" + std::to_string(line_no));
    if (!cls) continue;
    double x1 = std::min(v[0], v[2]), x2 = std::max(v[0], v[2]);
    double y1 = std::min(v[1], v[3]), y2 = std::max(v[1], v[3]);
    page.annotations.push_back(
        {.id = ids.next(*cls), .cls = *cls, .polygon = Polygon::rectangle(x1, y1, x2, y2)});
  }
  return page;
}

inline std::vector<UcaBook> parse_dcm(const std::filesystem::path& root, const AdapterOptions& opts = {}) {
  namespace fs = std::filesystem;
  const ClassMap class_map = opts.class_map.value_or(ClassMap::dcm_default());
  ManifestIndex index = opts.manifest ? ManifestIndex(*opts.manifest) : ManifestIndex();

  std::vector<std::pair<std::string, fs::path>> book_dirs;
  if (!adapter_detail::list_files(root, {".txt"}).empty())
    book_dirs.emplace_back(fs::absolute(root).lexically_normal().filename().string(), root);
  for (const auto& dir : adapter_detail::list_dirs(root))
    if (dir.filename() != "images" && !adapter_detail::list_files(dir, {".txt"}).empty())
      book_dirs.emplace_back(dir.filename().string(), dir);
  if (book_dirs.empty()) throw Error(ErrorCode::format_unknown, "no DCM label files under " + root.string());

  auto books = parallel_map<UcaBook>(opts.jobs, book_dirs.size(), [&](std::size_t bi) {
    const auto& [title, dir] = book_dirs[bi];
    UcaBook book;
    book.title = title;
    book.dataset = {DatasetKind::dcm, {}};
    auto files = adapter_detail::list_files(dir, {".txt"});
    std::vector<std::string> stems;
    for (const auto& f : files) stems.push_back(f.stem().string());
    auto indices = adapter_detail::page_indices(stems);
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto& file = files[i];
      UcaPage page = parse_dcm_page(text::read_file(file), file.string(), class_map);
      page.index = indices[i];
      std::string image_file;
      auto size = adapter_detail::resolve_page_size(
          index, title, file, {dir / file.stem(), root / "images" / title / file.stem()}, &image_file);
      page.width = size.width;
      page.height = size.height;
      if (!image_file.empty()) page.ext.attributes["file"] = image_file;
      book.pages.push_back(std::move(page));
    }
    adapter_detail::finalize_book(book, opts, std::nullopt);
    return book;
  });
  adapter_detail::sort_books(books);
  return books;
}

}  // namespace comix
