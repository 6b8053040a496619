#pragma once

// Format detection by structural probes, and a single entry point that turns
// any supported input path into books.

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "comix/adapters/coco.hpp"
#include "comix/adapters/common.hpp"
#include "comix/adapters/dcm.hpp"
#include "comix/adapters/ebd.hpp"
#include "comix/adapters/manga109.hpp"
#include "comix/adapters/yolo.hpp"
#include "comix/parallel.hpp"
#include "comix/uca_xml.hpp"

namespace comix {

namespace detect_detail {

/// Name of the root element and whether its start tag carries `dataset=`.
struct RootTag {
  std::string name;
  bool has_dataset = false;
};

inline std::optional<RootTag> sniff_root(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  std::string head(8192, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  std::size_t i = 0;
  while ((i = head.find('<', i)) != std::string::npos) {
    if (head.compare(i, 2, "<?") == 0 || head.compare(i, 2, "<!") == 0) {
      ++i;
      continue;
    }
    auto end = head.find('>', i);
    std::string tag = head.substr(i + 1, end == std::string::npos ? std::string::npos : end - i - 1);
    auto name_end = tag.find_first_of(" \t\r\n/");
    RootTag root{tag.substr(0, name_end), false};
    auto pos = tag.find("dataset");
    while (pos != std::string::npos) {
      auto after = tag.find_first_not_of(" \t\r\n", pos + 7);
      bool boundary = pos > 0 && std::isspace(static_cast<unsigned char>(tag[pos - 1]));
      if (boundary && after != std::string::npos && tag[after] == '=') root.has_dataset = true;
      pos = tag.find("dataset", pos + 7);
    }
    return root;
  }
  return std::nullopt;
}

inline std::optional<FormatId> classify_xml(const std::filesystem::path& file) {
  auto root = sniff_root(file);
  if (!root) return std::nullopt;
  if (root->name == "svg") return FormatId::ebd_svg;
  if (root->name == "annotation") return FormatId::manga109_xml;
  if (root->name == "book") return root->has_dataset ? FormatId::uca : FormatId::manga109_xml;
  return std::nullopt;
}

/// Regular files at depth 1 and 2 below `dir`.
inline std::vector<std::filesystem::path> shallow_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(dir, ec)) {
    if (e.is_regular_file()) {
      out.push_back(e.path());
    } else if (e.is_directory()) {
      for (const auto& f : std::filesystem::directory_iterator(e.path(), ec))
        if (f.is_regular_file()) out.push_back(f.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detect_detail

/// Probe table:
///   file *.json                               -> coco_json
///   file *.xml/*.svg, root <svg>              -> ebd_svg
///   file, root <annotation> or <book> w/o dataset -> manga109_xml
///   file, root <book dataset=..>              -> uca
///   dir with classes.txt and label .txt files -> yolo_dir
///   dir with .txt files, no classes.txt       -> dcm_txt
///   dir with .svg / .xml files                -> per-file classification
/// Labels may sit in labels/ (YOLO) or one directory level down.
inline FormatId detect_format(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::exists(path, ec)) throw Error(ErrorCode::io_error, "no such path: " + path.string());

  if (fs::is_regular_file(path, ec)) {
    auto ext = text::to_lower(path.extension().string());
    if (ext == ".json") return FormatId::coco_json;
    if (ext == ".xml" || ext == ".svg") {
      if (auto f = detect_detail::classify_xml(path)) return *f;
    }
    throw Error(ErrorCode::format_unknown, "unrecognized file " + path.string());
  }

  std::set<FormatId> matches;
  bool has_classes = fs::is_regular_file(path / "classes.txt", ec);
  auto files = detect_detail::shallow_files(path);
  if (fs::is_directory(path / "labels", ec)) {
    auto nested = detect_detail::shallow_files(path / "labels");
    files.insert(files.end(), nested.begin(), nested.end());
  }
  bool has_txt = false;
  for (const auto& f : files) {
    auto ext = text::to_lower(f.extension().string());
    if (ext == ".txt" && f.filename() != "classes.txt") has_txt = true;
    if (ext == ".svg" || ext == ".xml")
      if (auto fmt = detect_detail::classify_xml(f)) matches.insert(*fmt);
  }
  if (has_txt) matches.insert(has_classes ? FormatId::yolo_dir : FormatId::dcm_txt);

  if (matches.empty()) throw Error(ErrorCode::format_unknown, "no known annotation layout in " + path.string());
  if (matches.size() > 1) {
    std::string names;
    for (auto f : matches) names += (names.empty() ? "" : ", ") + std::string(format_name(f));
    throw Error(ErrorCode::format_ambiguous, path.string() + " matches several layouts: " + names);
  }
  return *matches.begin();
}

/// Reads every book found at `path` in the given layout, sorted by title.
inline std::vector<UcaBook> load_books(const std::filesystem::path& path, FormatId format,
                                       const AdapterOptions& opts = {}) {
  namespace fs = std::filesystem;
  auto xml_files = [&](std::initializer_list<std::string_view> exts) {
    if (fs::is_regular_file(path)) return std::vector<fs::path>{path};
    std::vector<fs::path> out;
    for (const auto& f : detect_detail::shallow_files(path))
      if (std::find(exts.begin(), exts.end(), text::to_lower(f.extension().string())) != exts.end())
        out.push_back(f);
    return out;
  };

  std::vector<UcaBook> books;
  switch (format) {
    case FormatId::uca: {
      auto files = xml_files({".xml"});
      books = parallel_map<UcaBook>(opts.jobs, files.size(), [&](std::size_t i) {
        auto book = parse_uca(text::read_file(files[i]));
        if (opts.validate) {
          auto report = validate_book(book, opts.validation);
          if (!report.ok())
            throw Error(ErrorCode::schema_violation, files[i].string() + ": " + report.errors.front().message, {},
                        report.errors.front().rule);
        }
        return book;
      });
      break;
    }
    case FormatId::manga109_xml: {
      auto files = xml_files({".xml"});
      books = parallel_map<UcaBook>(opts.jobs, files.size(), [&](std::size_t i) {
        return parse_manga109(text::read_file(files[i]), opts, files[i].stem().string());
      });
      break;
    }
    case FormatId::dcm_txt: books = parse_dcm(path, opts); break;
    case FormatId::ebd_svg: books = parse_ebd(path, opts); break;
    case FormatId::coco_json:
      books = parse_coco(std::string_view(text::read_file(path)), opts, path.stem().string());
      break;
    case FormatId::yolo_dir: books = parse_yolo(path, opts); break;
  }
  adapter_detail::sort_books(books);
  return books;
}

}  // namespace comix
