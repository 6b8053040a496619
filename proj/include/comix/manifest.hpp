#pragma once

// Dataset manifest: CSV with header
//   image_id,file_name,width,height,book,split,dataset
// plus image-header probing for pages whose size is not recorded anywhere.

#include <array>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "comix/error.hpp"
#include "comix/text.hpp"
#include "comix/uca.hpp"

namespace comix {

enum class Split : std::uint8_t { train, test, none };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::none: return "none";
  }
  return "none";
}

inline std::optional<Split> split_from_name(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "none" || s.empty()) return Split::none;
  return std::nullopt;
}

struct ManifestEntry {
  std::int64_t image_id = 0;
  std::string file_name;
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::string book;
  Split split = Split::none;
  DatasetTag dataset;
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

inline constexpr std::string_view kManifestHeader = "image_id,file_name,width,height,book,split,dataset";

namespace manifest_detail {

inline std::vector<std::vector<std::string>> parse_csv(std::string_view data) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  std::int64_t line = 1;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    char c = data[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') ++i;
      end_field();
      bool blank = row.size() == 1 && row[0].empty();
      if (!blank) rows.push_back(std::move(row));
      row.clear();
      ++line;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw Error(ErrorCode::line_malformed, "unterminated quoted CSV field", {line, 1});
  if (field_started || !field.empty() || !row.empty()) {
    end_field();
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace manifest_detail

inline void validate_manifest(const DatasetManifest& manifest) {
  std::set<std::int64_t> ids;
  std::set<std::pair<std::string, std::string>> files;
  for (const auto& e : manifest.entries) {
    if (!ids.insert(e.image_id).second)
      throw Error(ErrorCode::duplicate_image_id, "manifest image_id " + std::to_string(e.image_id) +
                                                   " is not unique");
    if (!files.insert({e.book, e.file_name}).second)
      throw Error(ErrorCode::schema_violation,
                  "manifest entry (" + e.book + ", " + e.file_name + ") is not unique");
    if (e.width <= 0 || e.height <= 0)
      throw Error(ErrorCode::schema_violation, "manifest entry " + e.file_name + " has no size");
  }
}

inline DatasetManifest parse_manifest_csv(std::string_view data) {
  auto rows = manifest_detail::parse_csv(data);
  if (rows.empty()) throw Error(ErrorCode::schema_violation, "manifest is empty");
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  if (header != kManifestHeader)
    throw Error(ErrorCode::schema_violation, "manifest header must be '" +
                                                 std::string(kManifestHeader) + "'", {1, 1});
  DatasetManifest m;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    SourcePos pos{static_cast<std::int64_t>(r + 1), 1};
    if (f.size() != 7)
      throw Error(ErrorCode::line_malformed, "expected 7 fields, got " + std::to_string(f.size()), pos);
    auto id = text::parse_int(f[0]);
    auto w = text::parse_int(f[2]);
    auto h = text::parse_int(f[3]);
    auto split = split_from_name(f[5]);
    if (!id || !w || !h || !split) throw Error(ErrorCode::line_malformed, "bad manifest row", pos);
    m.entries.push_back({*id, f[1], *w, *h, f[4], *split, DatasetTag::from_label(f[6])});
  }
  validate_manifest(m);
  return m;
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest_csv(text::read_file(path));
}

inline std::string to_csv(const DatasetManifest& manifest) {
  using manifest_detail::csv_field;
  std::string out(kManifestHeader);
  out += "\n";
  for (const auto& e : manifest.entries) {
    out += std::to_string(e.image_id) + "," + csv_field(e.file_name) + "," +
           std::to_string(e.width) + "," + std::to_string(e.height) + "," + csv_field(e.book) +
           "," + std::string(split_name(e.split)) + "," + csv_field(e.dataset.label()) + "\n";
  }
  return out;
}

/// Lookup structure over a manifest. Pages are matched on (book, file) where
/// `file` is the page's recorded source file, else on (book, file stem) equal
/// to the page index.
class ManifestIndex {
 public:
  ManifestIndex() = default;
  explicit ManifestIndex(const DatasetManifest& manifest) : manifest_(&manifest) {
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
      const auto& e = manifest.entries[i];
      by_file_[{e.book, e.file_name}] = i;
      by_stem_.try_emplace({e.book, stem_of(e.file_name)}, i);
      by_name_.try_emplace(e.file_name, i);
    }
  }

  bool empty() const { return manifest_ == nullptr; }

  const ManifestEntry* find_file(const std::string& book, const std::string& file) const {
    return lookup(by_file_, {book, file});
  }
  const ManifestEntry* find_stem(const std::string& book, const std::string& stem) const {
    return lookup(by_stem_, {book, stem});
  }
  /// Any book; matches the full relative file name.
  const ManifestEntry* find_name(const std::string& file) const {
    if (!manifest_) return nullptr;
    auto it = by_name_.find(file);
    return it == by_name_.end() ? nullptr : &manifest_->entries[it->second];
  }

  const ManifestEntry* find_page(const std::string& book, const UcaPage& page) const {
    if (auto it = page.ext.attributes.find("file"); it != page.ext.attributes.end()) {
      if (const auto* e = find_file(book, it->second)) return e;
      if (const auto* e = find_stem(book, stem_of(it->second))) return e;
    }
    return find_stem(book, std::to_string(page.index));
  }

  static std::string stem_of(const std::string& file) {
    return std::filesystem::path(file).stem().string();
  }

 private:
  using Key = std::pair<std::string, std::string>;
  const ManifestEntry* lookup(const std::map<Key, std::size_t>& m, const Key& k) const {
    if (!manifest_) return nullptr;
    auto it = m.find(k);
    return it == m.end() ? nullptr : &manifest_->entries[it->second];
  }

  const DatasetManifest* manifest_ = nullptr;
  std::map<Key, std::size_t> by_file_;
  std::map<Key, std::size_t> by_stem_;
  std::map<std::string, std::size_t> by_name_;
};

// ---------------------------------------------------------------------------
// Image header probing

struct ImageSize {
  std::int64_t width = 0;
  std::int64_t height = 0;
};

namespace manifest_detail {

inline std::optional<ImageSize> probe_png(const std::string& head) {
  if (head.size() < 24 || head.compare(0, 8, "\x89PNG\r\n\x1a\n") != 0) return std::nullopt;
  auto be32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(head[at + i]);
    return static_cast<std::int64_t>(v);
  };
  return ImageSize{be32(16), be32(20)};
}

inline std::optional<ImageSize> probe_jpeg(std::ifstream& in) {
  in.clear();
  in.seekg(0);
  auto byte = [&]() -> int { return in.get(); };
  if (byte() != 0xFF || byte() != 0xD8) return std::nullopt;
  for (;;) {
    int b = byte();
    while (b != 0xFF && b != EOF) b = byte();
    int marker = byte();
    while (marker == 0xFF) marker = byte();
    if (marker == EOF || b == EOF) return std::nullopt;
    if (marker == 0xD8 || marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) continue;
    int hi = byte(), lo = byte();
    if (hi == EOF || lo == EOF) return std::nullopt;
    int len = (hi << 8) | lo;
    bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 && marker != 0xCC;
    if (sof) {
      byte();  // precision
      int h1 = byte(), h0 = byte(), w1 = byte(), w0 = byte();
      if (w0 == EOF) return std::nullopt;
      return ImageSize{(w1 << 8) | w0, (h1 << 8) | h0};
    }
    in.seekg(len - 2, std::ios::cur);
    if (!in) return std::nullopt;
  }
}

inline std::optional<ImageSize> probe_uncached(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::string head(32, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  if (auto png = probe_png(head)) return png;
  return probe_jpeg(in);
}

}  // namespace manifest_detail

/// Reads width/height from a PNG or JPEG header. When COMIX_CACHE_DIR is set,
/// results are memoized there keyed by absolute path, size and mtime.
inline std::optional<ImageSize> probe_image_size(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  const char* cache_dir = std::getenv("COMIX_CACHE_DIR");
  if (!cache_dir || !*cache_dir) return manifest_detail::probe_uncached(path);

  std::error_code ec;
  auto abs = fs::absolute(path, ec).lexically_normal().string();
  auto size = fs::file_size(path, ec);
  if (ec) return std::nullopt;
  auto mtime = fs::last_write_time(path, ec).time_since_epoch().count();
  std::string key = abs + "|" + std::to_string(size) + "|" + std::to_string(mtime);

  fs::path cache = fs::path(cache_dir) / "image_sizes.tsv";
  if (std::ifstream in(cache); in) {
    std::string line;
    while (std::getline(in, line)) {
      auto tab = line.rfind('\t');
      auto tab2 = tab == std::string::npos ? tab : line.rfind('\t', tab - 1);
      if (tab2 == std::string::npos || line.compare(0, tab2, key) != 0 || tab2 != key.size()) continue;
      auto w = text::parse_int(std::string_view(line).substr(tab2 + 1, tab - tab2 - 1));
      auto h = text::parse_int(std::string_view(line).substr(tab + 1));
      if (w && h) return ImageSize{*w, *h};
    }
  }
  auto probed = manifest_detail::probe_uncached(path);
  if (probed) {
    fs::create_directories(cache_dir, ec);
    std::ofstream out(cache, std::ios::app);
    if (out) out << key << '\t' << probed->width << '\t' << probed->height << '\n';
  }
  return probed;
}

inline constexpr std::array<std::string_view, 6> kImageExtensions{".jpg", ".jpeg", ".png",
                                                                   ".JPG", ".JPEG", ".PNG"};

/// Looks for an image next to `stem_path` (same path, image extension) and
/// probes it.
inline std::optional<ImageSize> probe_sibling_image(const std::filesystem::path& stem_path) {
  for (auto ext : kImageExtensions) {
    auto candidate = stem_path;
    candidate += ext;
    std::error_code ec;
    if (std::filesystem::is_regular_file(candidate, ec))
      if (auto size = probe_image_size(candidate)) return size;
  }
  return std::nullopt;
}

}  // namespace comix
