#pragma once

// Manga109-layout annotations: a book-level <character> roster and pages whose
// children (frame/body/face/text) carry xmin/ymin/xmax/ymax boxes. The root
// may be <annotation> or the <book> root of the original distribution.

#include <map>
#include <string>
#include <string_view>

#include "comix/adapters/common.hpp"
#include "comix/xml.hpp"

namespace comix {

namespace m109_detail {

[[noreturn]] inline void fail(const xml::Node& node, const std::string& path, const std::string& msg,
                              std::string detail = {}) {
  throw Error(ErrorCode::schema_violation, path + ": " + msg, node.pos, std::move(detail));
}

inline const std::string& attr(const xml::Node& node, const std::string& path, std::string_view key) {
  if (const auto* v = node.attr(key)) return *v;
  fail(node, path, "missing attribute '" + std::string(key) + "'");
}

inline double number(const xml::Node& node, const std::string& path, std::string_view key) {
  auto v = text::parse_double(attr(node, path, key));
  if (!v) fail(node, path, "attribute '" + std::string(key) + "' is not a number");
  return *v;
}

inline std::int64_t integer(const xml::Node& node, const std::string& path, std::string_view key) {
  auto v = text::parse_int(attr(node, path, key));
  if (!v) fail(node, path, "attribute '" + std::string(key) + "' is not an integer");
  return *v;
}

}  // namespace m109_detail

inline UcaBook parse_manga109(std::string_view document, const AdapterOptions& opts = {},
                              const std::string& fallback_title = {}) {
  using namespace m109_detail;
  const ClassMap class_map = opts.class_map.value_or(ClassMap::manga109_default());
  xml::Node root = xml::parse(document);
  std::string root_path = "/" + root.name;
  if (root.name != "annotation" && root.name != "book")
    fail(root, root_path, "expected <annotation> or <book> root");

  UcaBook book;
  const auto* title = root.attr("title");
  book.title = title ? *title : fallback_title;
  book.dataset = {DatasetKind::m109, {}};

  std::map<std::string, std::int64_t> roster;  // source id -> dense id
  if (const auto* chars = root.child("characters")) {
    for (std::size_t i = 0; i < chars->children.size(); ++i) {
      const auto& c = chars->children[i];
      std::string path = root_path + "/characters/character[" + std::to_string(i) + "]";
      if (c.name != "character") fail(c, path, "expected <character>");
      const auto& source_id = attr(c, path, "id");
      auto dense = static_cast<std::int64_t>(book.characters.size());
      if (!roster.emplace(source_id, dense).second) fail(c, path, "duplicate character id", "DUPLICATE_CHAR_ID");
      CharacterEntry entry{dense, attr(c, path, "name"), {}};
      entry.ext.attributes["source_id"] = source_id;
      book.characters.push_back(std::move(entry));
    }
  }

  const auto* pages = root.child("pages");
  if (!pages) fail(root, root_path, "missing <pages>");
  for (std::size_t pi = 0; pi < pages->children.size(); ++pi) {
    const auto& p = pages->children[pi];
    std::string ppath = root_path + "/pages/page[" + std::to_string(pi) + "]";
    if (p.name != "page") fail(p, ppath, "expected <page>");
    UcaPage page;
    page.index = integer(p, ppath, "index");
    page.width = integer(p, ppath, "width");
    page.height = integer(p, ppath, "height");
    adapter_detail::IdGen ids;
    for (std::size_t ai = 0; ai < p.children.size(); ++ai) {
      const auto& el = p.children[ai];
      std::string apath = ppath + "/" + el.name + "[" + std::to_string(ai) + "]";
      auto cls = class_map.resolve(el.name, apath);
      if (!cls) continue;
      double x1 = number(el, apath, "xmin"), y1 = number(el, apath, "ymin");
      double x2 = number(el, apath, "xmax"), y2 = number(el, apath, "ymax");
      AnnotationObject a{.id = {}, .cls = *cls, .polygon = Polygon::rectangle(x1, y1, x2, y2)};
      const auto* source_id = el.attr("id");
      a.id = source_id ? *source_id : ids.next(*cls);
      if (const auto* ref = el.attr("character");
          ref && (*cls == AnnotationClass::character || *cls == AnnotationClass::face)) {
        auto it = roster.find(*ref);
        if (it == roster.end())
          fail(el, apath, "character '" + *ref + "' is not in the roster", std::string(rule::dangling_char_ref));
        a.char_ref = it->second;
      }
      if (*cls == AnnotationClass::text) {
        auto body = text::trim(el.text);
        if (!body.empty()) a.transcription = std::string(body);
      }
      page.annotations.push_back(std::move(a));
    }
    book.pages.push_back(std::move(page));
  }

  adapter_detail::finalize_book(book, opts, std::string("merged"));
  return book;
}

}  // namespace comix
