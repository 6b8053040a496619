#pragma once

#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "comix/comix.hpp"

namespace testing_support {

namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(COMIX_TEST_DATA); }

/// Fresh directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = fs::temp_directory_path() / ("comix-test-" + std::to_string(rng()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline void write(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  std::fwrite(content.data(), 1, content.size(), f);
  std::fclose(f);
}

/// Minimal valid PNG header (IHDR only) announcing width x height.
inline std::string png_header(std::uint32_t width, std::uint32_t height) {
  std::string s = "\x89PNG\r\n\x1a\n";
  s += std::string("\0\0\0\x0dIHDR", 8);
  for (auto v : {width, height})
    for (int shift = 24; shift >= 0; shift -= 8) s += static_cast<char>((v >> shift) & 0xff);
  s += std::string("\x08\x02\0\0\0", 5);
  s += std::string(4, '\0');
  return s;
}

struct CommandResult {
  int status = -1;
  std::string output;
};

/// Runs a shell command, capturing stdout (stderr goes to `stderr_file` when given).
inline CommandResult run(const std::string& command) {
  CommandResult r;
  std::FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.output.append(buf, n);
  int status = pclose(pipe);
  r.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

inline std::string comix_bin() { return COMIX_BIN; }

// ---------------------------------------------------------------------------
// Random valid books

/// Coordinates on a quarter-pixel grid so every value, and every sum of two
/// values, is exactly representable.
inline double grid_coord(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_int_distribution<long> d(static_cast<long>(lo * 4), static_cast<long>(hi * 4));
  return static_cast<double>(d(rng)) / 4.0;
}

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
  static const std::string alphabet =
      "abcXYZ 019<>&\"'\t\n=;,#-\xc3\xa9\xe3\x81\x82";
  std::uniform_int_distribution<std::size_t> len(0, max_len), pick(0, alphabet.size() - 1);
  std::string s;
  for (std::size_t i = len(rng); i > 0; --i) {
    char c = alphabet[pick(rng)];
    if (static_cast<unsigned char>(c) >= 0x80) {
      s += "\xc3\xa9";  // keep UTF-8 well formed
    } else {
      s += c;
    }
  }
  return s;
}

inline comix::Polygon random_polygon(std::mt19937_64& rng, comix::AnnotationClass cls, double w, double h) {
  using comix::AnnotationClass;
  if (cls != AnnotationClass::balloon && cls != AnnotationClass::onomatopoeia) {
    double x1 = grid_coord(rng, 0, w), x2 = grid_coord(rng, 0, w);
    double y1 = grid_coord(rng, 0, h), y2 = grid_coord(rng, 0, h);
    return comix::Polygon::rectangle(std::min(x1, x2), std::min(y1, y2), std::max(x1, x2), std::max(y1, y2));
  }
  std::uniform_int_distribution<int> n(3, 12);
  std::vector<comix::Point> pts;
  for (int i = n(rng); i > 0; --i) pts.push_back({grid_coord(rng, 0, w), grid_coord(rng, 0, h)});
  return comix::Polygon(std::move(pts));
}

/// A book satisfying every validation rule, exercising all optional fields.
inline comix::UcaBook random_book(std::mt19937_64& rng) {
  using namespace comix;
  std::uniform_int_distribution<int> coin(0, 1), small(0, 4), dim(1, 3000);
  UcaBook b;
  b.title = random_text(rng, 12);
  if (b.title.empty()) b.title = "t";
  static const std::vector<DatasetTag> tags{{DatasetKind::dcm, {}}, {DatasetKind::c100, {}}, {DatasetKind::ebd, {}},
                                            {DatasetKind::m109, {}}, {DatasetKind::pop, {}},
                                            {DatasetKind::other, "custom set"}};
  b.dataset = tags[std::uniform_int_distribution<std::size_t>(0, tags.size() - 1)(rng)];
  if (coin(rng)) b.ext.attributes["granularity"] = coin(rng) ? "line" : "merged";

  std::int64_t next_char = 0;
  for (int i = small(rng); i > 0; --i) {
    next_char += 1 + small(rng);
    CharacterEntry c{next_char, random_text(rng, 8), {}};
    if (c.name.empty()) c.name = "n";
    b.characters.push_back(c);
  }
  if (coin(rng)) b.stories.push_back({random_text(rng, 6), 0, small(rng), {}});

  std::int64_t index = 0;
  for (int p = small(rng); p > 0; --p) {
    UcaPage page;
    page.index = index;
    index += 1 + small(rng) % 2;
    page.width = dim(rng);
    page.height = dim(rng);
    std::map<char, int> counters;
    std::uniform_int_distribution<std::size_t> cls_pick(0, kAllClasses.size() - 1);
    std::vector<std::string> text_ids;
    std::vector<std::size_t> onos;
    for (int a = small(rng) * 2; a > 0; --a) {
      auto cls = kAllClasses[cls_pick(rng)];
      char prefix = class_name(cls)[0];
      if (cls == AnnotationClass::onomatopoeia) prefix = 'o';
      AnnotationObject obj{.id = std::string(1, prefix) + std::to_string(counters[prefix]++),
                           .cls = cls,
                           .polygon = random_polygon(rng, cls, static_cast<double>(page.width),
                                                     static_cast<double>(page.height))};
      if ((cls == AnnotationClass::character || cls == AnnotationClass::face) && !b.characters.empty() && coin(rng))
        obj.char_ref = b.characters[static_cast<std::size_t>(small(rng)) % b.characters.size()].id;
      if (cls == AnnotationClass::text) {
        if (coin(rng)) obj.transcription = random_text(rng, 10);
        text_ids.push_back(obj.id);
      }
      if (cls == AnnotationClass::onomatopoeia) onos.push_back(page.annotations.size());
      page.annotations.push_back(std::move(obj));
    }
    if (onos.size() >= 2 && coin(rng)) {
      page.annotations[onos[0]].truncation_group = "g1";
      page.annotations[onos[1]].truncation_group = "g1";
    }
    if (!text_ids.empty() && !b.characters.empty() && coin(rng))
      page.links.push_back({text_ids.front(), b.characters.front().id, {}});
    b.pages.push_back(std::move(page));
  }
  return b;
}

}  // namespace testing_support
