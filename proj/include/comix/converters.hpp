#pragma once

// Emitters from books into COCO, YOLO and CVAT.
//
// All emitters share one page listing (page_listing) so the image numbering
// and file names agree across formats: books in title order, pages in index
// order, ids 1-based and global across books.

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "comix/coco.hpp"
#include "comix/manifest.hpp"
#include "comix/text.hpp"
#include "comix/uca.hpp"
#include "comix/xml.hpp"

namespace comix {

struct ConvertOptions {
  std::vector<AnnotationClass> classes{kDetectionClasses.begin(), kDetectionClasses.end()};
  /// Keep only pages whose manifest entry carries this split.
  std::optional<Split> split;
  const DatasetManifest* manifest = nullptr;
};

struct ListedPage {
  const UcaBook* book = nullptr;
  const UcaPage* page = nullptr;
  std::int64_t image_id = 0;
  std::string file_name;
  Split split = Split::none;
};

namespace convert_detail {

inline std::string page_extension(const UcaPage& page) {
  if (auto it = page.ext.attributes.find("file"); it != page.ext.attributes.end()) {
    auto ext = std::filesystem::path(it->second).extension().string();
    if (!ext.empty() && ext != ".txt" && ext != ".svg" && ext != ".xml") return ext.substr(1);
  }
  return "jpg";
}

inline bool selected(const std::vector<AnnotationClass>& classes, AnnotationClass cls) {
  return std::find(classes.begin(), classes.end(), cls) != classes.end();
}

}  // namespace convert_detail

/// Pages in emission order with their image id and file name. The file name
/// is the manifest's when it names a path with a directory, else
/// "<book>/<index>.<ext>".
inline std::vector<ListedPage> page_listing(const std::vector<UcaBook>& books, const ConvertOptions& opts = {}) {
  std::vector<const UcaBook*> order;
  for (const auto& b : books) order.push_back(&b);
  std::stable_sort(order.begin(), order.end(), [](const UcaBook* a, const UcaBook* b) { return a->title < b->title; });

  ManifestIndex index = opts.manifest ? ManifestIndex(*opts.manifest) : ManifestIndex();
  std::vector<ListedPage> out;
  std::int64_t next_id = 1;
  for (const auto* book : order) {
    std::vector<const UcaPage*> pages;
    for (const auto& p : book->pages) pages.push_back(&p);
    std::stable_sort(pages.begin(), pages.end(),
                     [](const UcaPage* a, const UcaPage* b) { return a->index < b->index; });
    for (const auto* page : pages) {
      const ManifestEntry* entry = index.find_page(book->title, *page);
      Split split = entry ? entry->split : Split::none;
      if (opts.split && split != *opts.split) continue;
      ListedPage lp{book, page, next_id++, {}, split};
      if (entry && entry->file_name.find('/') != std::string::npos) {
        lp.file_name = entry->file_name;
      } else {
        lp.file_name = text::path_component(book->title) + "/" + std::to_string(page->index) + "." +
                       convert_detail::page_extension(*page);
      }
      out.push_back(std::move(lp));
    }
  }
  return out;
}

/// Manifest describing exactly the pages an emitter writes.
inline DatasetManifest listing_manifest(const std::vector<ListedPage>& pages) {
  DatasetManifest m;
  for (const auto& lp : pages)
    m.entries.push_back({lp.image_id, lp.file_name, lp.page->width, lp.page->height,
                         lp.book->title, lp.split, lp.book->dataset});
  return m;
}

inline CocoDoc to_coco(const std::vector<UcaBook>& books, const ConvertOptions& opts = {}) {
  CocoDoc doc;
  std::int64_t next_ann = 1;
  for (const auto& lp : page_listing(books, opts)) {
    doc.images.push_back({lp.image_id, lp.file_name, lp.page->width, lp.page->height});
    for (const auto& a : lp.page->annotations) {
      if (!convert_detail::selected(opts.classes, a.cls)) continue;
      CocoAnnotation ca;
      ca.id = next_ann++;
      ca.image_id = lp.image_id;
      ca.category_id = category_scheme::id_of(a.cls);
      ca.bbox = bbox_of(a.polygon);
      ca.area = ca.bbox.area();
      if (!is_axis_aligned_rectangle(a.polygon))
        for (const auto& p : a.polygon.points()) {
          ca.segmentation.push_back(p.x);
          ca.segmentation.push_back(p.y);
        }
      doc.annotations.push_back(std::move(ca));
    }
  }
  auto classes = opts.classes;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  for (auto cls : classes) doc.categories.push_back({category_scheme::id_of(cls), std::string(class_name(cls))});
  return doc;
}

/// Relative path -> file content. Ordered, so iteration is deterministic.
using FileSet = std::map<std::string, std::string>;

/// One normalized YOLO line for `box` on a width x height page. Edges more
/// than a quantization step outside the page are clipped to it first; smaller
/// overshoots are rounding residue from an earlier conversion and are kept so
/// that converting twice gives the same line.
inline std::string yolo_line(std::size_t class_idx, const BBox& box, std::int64_t width, std::int64_t height) {
  const double W = static_cast<double>(width), H = static_cast<double>(height);
  auto clip = [](double v, double extent) {
    const double slack = 2e-6 * extent;
    return v < -slack ? 0.0 : v > extent + slack ? extent : v;
  };
  double x1 = clip(box.x, W), x2 = clip(box.x + box.w, W);
  double y1 = clip(box.y, H), y2 = clip(box.y + box.h, H);
  auto unit = [](double v) { return text::format_fixed6(std::clamp(v, 0.0, 1.0)); };
  return std::to_string(class_idx) + " " + unit((x1 + x2) / 2 / W) + " " + unit((y1 + y2) / 2 / H) + " " +
         unit((x2 - x1) / W) + " " + unit((y2 - y1) / H);
}

/// labels/<book>/<index>.txt per page, classes.txt (one name per line, in
/// `opts.classes` order) and manifest.csv with the page sizes.
inline FileSet to_yolo(const std::vector<UcaBook>& books, const ConvertOptions& opts = {}) {
  FileSet files;
  std::string classes_txt;
  for (auto cls : opts.classes) classes_txt += std::string(class_name(cls)) + "\n";
  files["classes.txt"] = classes_txt;

  auto listing = page_listing(books, opts);
  for (const auto& lp : listing) {
    const auto& page = *lp.page;
    if (page.width <= 0 || page.height <= 0)
      throw Error(ErrorCode::zero_dim_page, "book " + lp.book->title + " page " + std::to_string(page.index) +
                                                " has size " + std::to_string(page.width) + "x" +
                                                std::to_string(page.height));
    std::string body;
    for (const auto& a : page.annotations) {
      auto it = std::find(opts.classes.begin(), opts.classes.end(), a.cls);
      if (it == opts.classes.end()) continue;
      body += yolo_line(static_cast<std::size_t>(it - opts.classes.begin()), bbox_of(a.polygon), page.width,
                        page.height) +
              "\n";
    }
    files["labels/" + text::path_component(lp.book->title) + "/" + std::to_string(page.index) + ".txt"] = body;
  }
  auto manifest = listing_manifest(listing);
  for (auto& e : manifest.entries) e.book = text::path_component(e.book);  // as named on disk
  files["manifest.csv"] = to_csv(manifest);
  return files;
}

/// Writes every file under `root`, each one atomically.
inline void write_file_set(const std::filesystem::path& root, const FileSet& files) {
  for (const auto& [rel, content] : files) text::write_file_atomic(root / rel, content);
}

/// "CVAT for images 1.1". Axis-aligned rectangles become <box>, everything
/// else <polygon>. Extra fields become <attribute> children.
inline std::string to_cvat(const std::vector<UcaBook>& books, const ConvertOptions& opts = {}) {
  std::string out = "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<annotations>\n  <version>1.1</version>\n";
  out += "  <meta>\n    <task>\n      <labels>\n";
  for (auto cls : kAllClasses)
    out += "        <label>\n          <name>" + std::string(class_name(cls)) + "</name>\n        </label>\n";
  out += "      </labels>\n    </task>\n  </meta>\n";

  auto listing = page_listing(books, opts);
  for (std::size_t i = 0; i < listing.size(); ++i) {
    const auto& lp = listing[i];
    const auto& page = *lp.page;
    std::map<std::string, std::int64_t> speaker;
    for (const auto& l : page.links) speaker.try_emplace(l.text_id, l.speaker_char_ref);

    out += "  <image id=\"" + std::to_string(i) + "\" name=\"" + xml::escape_attr(lp.file_name) + "\" width=\"" +
           std::to_string(page.width) + "\" height=\"" + std::to_string(page.height) + "\"";
    if (page.annotations.empty()) {
      out += "/>\n";
      continue;
    }
    out += ">\n";
    for (const auto& a : page.annotations) {
      std::string label = std::string(class_name(a.cls));
      std::string head;
      if (is_axis_aligned_rectangle(a.polygon)) {
        auto b = bbox_of(a.polygon);
        head = "<box label=\"" + label + "\" xtl=\"" + text::format_number(b.x) + "\" ytl=\"" +
               text::format_number(b.y) + "\" xbr=\"" + text::format_number(b.x + b.w) + "\" ybr=\"" +
               text::format_number(b.y + b.h) + "\"";
      } else {
        std::string points;
        for (const auto& p : a.polygon.points()) {
          if (!points.empty()) points += ';';
          points += text::format_number(p.x) + "," + text::format_number(p.y);
        }
        head = "<polygon label=\"" + label + "\" points=\"" + points + "\"";
      }
      std::vector<std::pair<std::string, std::string>> attrs;
      if (a.transcription) attrs.emplace_back("transcription", *a.transcription);
      if (a.char_ref) attrs.emplace_back("character_id", std::to_string(*a.char_ref));
      if (a.truncation_group) attrs.emplace_back("group", *a.truncation_group);
      if (auto it = speaker.find(a.id); it != speaker.end()) attrs.emplace_back("speaker", std::to_string(it->second));

      std::string tag = is_axis_aligned_rectangle(a.polygon) ? "box" : "polygon";
      if (attrs.empty()) {
        out += "    " + head + "/>\n";
      } else {
        out += "    " + head + ">\n";
        for (const auto& [name, value] : attrs)
          out += "      <attribute name=\"" + name + "\">" + xml::escape_text(value) + "</attribute>\n";
        out += "    </" + tag + ">\n";
      }
    }
    out += "  </image>\n";
  }
  out += "</annotations>\n";
  return out;
}

}  // namespace comix
