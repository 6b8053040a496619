#pragma once

// COCO documents into books. An image belongs to the book named by the
// manifest entry with the same file_name, else by its file_name up to the
// last '/', else by `fallback_book`.

#include <map>
#include <string>
#include <vector>

#include "comix/adapters/common.hpp"
#include "comix/coco.hpp"

namespace comix {

inline std::vector<UcaBook> parse_coco(const CocoDoc& doc, const AdapterOptions& opts = {},
                                       const std::string& fallback_book = "coco") {
  const ClassMap class_map = opts.class_map.value_or(ClassMap::coco_default());
  ManifestIndex index = opts.manifest ? ManifestIndex(*opts.manifest) : ManifestIndex();

  std::map<std::int64_t, std::string> category_names;
  for (const auto& c : doc.categories) category_names[c.id] = c.name;
  auto class_of_category = [&](std::int64_t id) -> std::optional<AnnotationClass> {
    if (auto it = category_names.find(id); it != category_names.end())
      return class_map.resolve(it->second, "category " + std::to_string(id));
    if (category_names.empty())
      if (auto cls = category_scheme::class_of(id)) return cls;
    throw Error(ErrorCode::unmapped_class, "category id " + std::to_string(id) + " is undefined");
  };

  struct ImageRef {
    const CocoImage* image;
    const ManifestEntry* entry;
  };
  std::map<std::string, std::vector<ImageRef>> grouped;
  for (const auto& im : doc.images) {
    const ManifestEntry* entry = index.find_name(im.file_name);
    std::string book;
    if (entry) {
      book = entry->book;
    } else {
      auto slash = im.file_name.rfind('/');
      book = slash == std::string::npos ? fallback_book : im.file_name.substr(0, slash);
    }
    grouped[book].push_back({&im, entry});
  }

  std::map<std::int64_t, std::vector<const CocoAnnotation*>> by_image;
  for (const auto& a : doc.annotations) by_image[a.image_id].push_back(&a);

  std::vector<UcaBook> books;
  for (auto& [title, refs] : grouped) {
    std::sort(refs.begin(), refs.end(), [](const ImageRef& a, const ImageRef& b) {
      return text::natural_less(a.image->file_name, b.image->file_name);
    });
    std::vector<std::string> stems;
    for (const auto& r : refs) stems.push_back(ManifestIndex::stem_of(r.image->file_name));
    auto indices = adapter_detail::page_indices(stems);

    UcaBook book;
    book.title = title;
    book.dataset = refs.front().entry ? refs.front().entry->dataset : DatasetTag{};
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const auto& im = *refs[i].image;
      UcaPage page;
      page.index = indices[i];
      page.width = im.width;
      page.height = im.height;
      if ((page.width <= 0 || page.height <= 0) && refs[i].entry) {
        page.width = refs[i].entry->width;
        page.height = refs[i].entry->height;
      }
      if (page.width <= 0 || page.height <= 0)
        throw Error(ErrorCode::missing_dimensions, "image " + im.file_name + " has no size");
      page.ext.attributes["file"] = im.file_name;
      adapter_detail::IdGen ids;
      for (const auto* a : by_image[im.id]) {
        auto cls = class_of_category(a->category_id);
        if (!cls) continue;
        std::optional<Polygon> polygon;
        if (!a->segmentation.empty()) {
          std::vector<Point> pts;
          for (std::size_t k = 0; k + 1 < a->segmentation.size(); k += 2)
            pts.push_back({a->segmentation[k], a->segmentation[k + 1]});
          polygon.emplace(std::move(pts));
        } else {
          const auto& b = a->bbox;
          polygon = Polygon::rectangle(b.x, b.y, b.x + b.w, b.y + b.h);
        }
        page.annotations.push_back({.id = ids.next(*cls), .cls = *cls, .polygon = std::move(*polygon)});
      }
      book.pages.push_back(std::move(page));
    }
    adapter_detail::finalize_book(book, opts, std::string("merged"));
    books.push_back(std::move(book));
  }
  adapter_detail::sort_books(books);
  return books;
}

inline std::vector<UcaBook> parse_coco(std::string_view json_document, const AdapterOptions& opts = {},
                                       const std::string& fallback_book = "coco") {
  return parse_coco(parse_coco_json(json_document), opts, fallback_book);
}

}  // namespace comix
