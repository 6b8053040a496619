#pragma once

// Seeded book-level train/test splits.

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "comix/converters.hpp"
#include "comix/manifest.hpp"

namespace comix {

struct SplitSpec {
  double ratio = 0.8;
  std::uint64_t seed = 0;
};

namespace split_detail {

/// Uniform integer in [0, n) by rejection, independent of the standard
/// library's distribution implementation.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  for (;;) {
    std::uint64_t v = rng();
    if (v < limit) return v % n;
  }
}

}  // namespace split_detail

/// Book titles sorted, Fisher-Yates shuffled with mt19937_64(seed); the first
/// ceil(ratio * B) go to train.
inline std::set<std::string> train_books(std::vector<std::string> titles, const SplitSpec& spec) {
  std::sort(titles.begin(), titles.end());
  titles.erase(std::unique(titles.begin(), titles.end()), titles.end());
  if (titles.size() < 2) throw Error(ErrorCode::invalid_argument, "splitting needs at least 2 books");
  if (!(spec.ratio > 0 && spec.ratio < 1)) throw Error(ErrorCode::invalid_argument, "ratio must lie in (0,1)");
  std::mt19937_64 rng(spec.seed);
  for (std::size_t i = titles.size() - 1; i > 0; --i) std::swap(titles[i], titles[split_detail::uniform_below(rng, i + 1)]);
  auto n_train = static_cast<std::size_t>(std::ceil(spec.ratio * static_cast<double>(titles.size()) - 1e-9));
  return {titles.begin(), titles.begin() + static_cast<std::ptrdiff_t>(n_train)};
}

/// Manifest over every page, each tagged with its book's split.
inline DatasetManifest make_split(const std::vector<UcaBook>& books, const SplitSpec& spec) {
  std::vector<std::string> titles;
  for (const auto& b : books) titles.push_back(b.title);
  auto train = train_books(titles, spec);
  auto listing = page_listing(books);
  for (auto& lp : listing) lp.split = train.count(lp.book->title) ? Split::train : Split::test;
  return listing_manifest(listing);
}

}  // namespace comix
