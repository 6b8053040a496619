#pragma once

// Annotation and image counts per (dataset, split, class).

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "comix/manifest.hpp"
#include "comix/parallel.hpp"
#include "comix/uca.hpp"

namespace comix {

struct GroupBy {
  bool dataset = true;
  bool split = true;
  bool cls = true;
};

/// Parses a comma list over {dataset, split, class}; an empty list groups by nothing.
inline GroupBy parse_group_by(std::string_view spec) {
  GroupBy g{false, false, false};
  for (const auto& raw : text::split(spec, ',')) {
    auto key = text::trim(raw);
    if (key.empty()) continue;
    if (key == "dataset") g.dataset = true;
    else if (key == "split") g.split = true;
    else if (key == "class") g.cls = true;
    else throw Error(ErrorCode::invalid_argument, "unknown group-by key '" + std::string(key) + "'");
  }
  return g;
}

struct StatsRow {
  std::string dataset;  // "*" when not grouped
  std::string split;
  std::string cls;
  std::size_t count = 0;
  bool operator==(const StatsRow&) const = default;
};

struct ImageRow {
  std::string dataset;
  std::string split;
  std::size_t images = 0;
  bool operator==(const ImageRow&) const = default;
};

struct StatsTable {
  std::vector<StatsRow> rows;
  std::vector<ImageRow> images;
  std::size_t total_annotations = 0;
  std::size_t total_images = 0;
};

/// Splits come from the manifest entry of each page ("none" without one).
/// Every class gets a row in each group that has pages, zero counts included.
inline StatsTable compute_stats(const std::vector<UcaBook>& books, const DatasetManifest* manifest = nullptr,
                                GroupBy group = {}) {
  ManifestIndex index = manifest ? ManifestIndex(*manifest) : ManifestIndex();
  using Key = std::tuple<std::string, std::string>;
  std::map<Key, std::array<std::size_t, kAllClasses.size()>> counts;
  std::map<Key, std::size_t> images;
  for (const auto& book : books) {
    for (const auto& page : book.pages) {
      const auto* e = index.find_page(book.title, page);
      Key key{group.dataset ? book.dataset.label() : "*",
              group.split ? std::string(split_name(e ? e->split : Split::none)) : "*"};
      auto& c = counts.try_emplace(key).first->second;
      for (const auto& a : page.annotations) ++c[static_cast<std::size_t>(a.cls)];
      ++images[key];
    }
  }

  StatsTable t;
  for (const auto& [key, c] : counts) {
    const auto& [ds, sp] = key;
    if (group.cls) {
      for (auto cls : kAllClasses) t.rows.push_back({ds, sp, std::string(class_name(cls)), c[static_cast<std::size_t>(cls)]});
    } else {
      std::size_t sum = 0;
      for (auto v : c) sum += v;
      t.rows.push_back({ds, sp, "*", sum});
    }
  }
  for (const auto& [key, n] : images) t.images.push_back({std::get<0>(key), std::get<1>(key), n});

  std::size_t direct_ann = 0, direct_img = 0;
  for (const auto& book : books) {
    direct_img += book.pages.size();
    for (const auto& page : book.pages) direct_ann += page.annotations.size();
  }
  for (const auto& r : t.rows) t.total_annotations += r.count;
  for (const auto& r : t.images) t.total_images += r.images;
  if (t.total_annotations != direct_ann || t.total_images != direct_img)
    throw Error(ErrorCode::invalid_argument, "stats totals do not match their groups");
  return t;
}

inline std::string stats_to_csv(const StatsTable& t) {
  std::string out = "kind,dataset,split,class,count\n";
  for (const auto& r : t.rows)
    out += "annotations," + manifest_detail::csv_field(r.dataset) + "," + r.split + "," + r.cls + "," +
           std::to_string(r.count) + "\n";
  out += "annotations_total,*,*,*," + std::to_string(t.total_annotations) + "\n";
  for (const auto& r : t.images)
    out += "images," + manifest_detail::csv_field(r.dataset) + "," + r.split + ",*," + std::to_string(r.images) + "\n";
  out += "images_total,*,*,*," + std::to_string(t.total_images) + "\n";
  return out;
}

inline std::string stats_to_json(const StatsTable& t) {
  nlohmann::ordered_json j;
  j["annotations"] = nlohmann::ordered_json::array();
  for (const auto& r : t.rows)
    j["annotations"].push_back({{"dataset", r.dataset}, {"split", r.split}, {"class", r.cls}, {"count", r.count}});
  j["annotations_total"] = t.total_annotations;
  j["images"] = nlohmann::ordered_json::array();
  for (const auto& r : t.images)
    j["images"].push_back({{"dataset", r.dataset}, {"split", r.split}, {"count", r.images}});
  j["images_total"] = t.total_images;
  return j.dump(2) + "\n";
}

inline std::string stats_to_table(const StatsTable& t) {
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  std::size_t wd = 8;
  for (const auto& r : t.rows) wd = std::max(wd, r.dataset.size() + 2);
  std::string out = pad("dataset", wd) + pad("split", 8) + pad("class", 14) + "count\n";
  for (const auto& r : t.rows) out += pad(r.dataset, wd) + pad(r.split, 8) + pad(r.cls, 14) + std::to_string(r.count) + "\n";
  out += pad("total", wd) + pad("", 8) + pad("", 14) + std::to_string(t.total_annotations) + "\n\n";
  out += pad("dataset", wd) + pad("split", 8) + "images\n";
  for (const auto& r : t.images) out += pad(r.dataset, wd) + pad(r.split, 8) + std::to_string(r.images) + "\n";
  out += pad("total", wd) + pad("", 8) + std::to_string(t.total_images) + "\n";
  return out;
}

/// Manifest for the images under `root`: one book per sub-directory (loose
/// images form a book named after `root`), pages in natural file order, sizes
/// read from the image headers. Ids are assigned in (book, page) order.
inline DatasetManifest probe_manifest(const std::filesystem::path& root, const DatasetTag& dataset,
                                      std::size_t jobs = 1) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(ErrorCode::io_error, "not a directory: " + root.string());
  auto images_in = [](const fs::path& dir) {
    std::vector<fs::path> out;
    std::error_code e;
    for (const auto& entry : fs::directory_iterator(dir, e)) {
      auto ext = entry.path().extension().string();
      if (entry.is_regular_file() &&
          std::find(kImageExtensions.begin(), kImageExtensions.end(), ext) != kImageExtensions.end())
        out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return text::natural_less(a.filename().string(), b.filename().string());
    });
    return out;
  };

  std::vector<std::pair<std::string, fs::path>> work;  // (book, image)
  for (const auto& f : images_in(root))
    work.emplace_back(fs::absolute(root).lexically_normal().filename().string(), f);
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root, ec))
    if (entry.is_directory()) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs)
    for (const auto& f : images_in(d)) work.emplace_back(d.filename().string(), f);
  std::stable_sort(work.begin(), work.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  auto sizes = parallel_map<ImageSize>(jobs, work.size(), [&](std::size_t i) {
    auto size = probe_image_size(work[i].second);
    if (!size) throw Error(ErrorCode::missing_dimensions, "cannot read the size of " + work[i].second.string());
    return *size;
  });
  DatasetManifest m;
  for (std::size_t i = 0; i < work.size(); ++i)
    m.entries.push_back({static_cast<std::int64_t>(i + 1), work[i].second.lexically_relative(root).generic_string(),
                         sizes[i].width, sizes[i].height, work[i].first, Split::none, dataset});
  validate_manifest(m);
  return m;
}

}  // namespace comix
