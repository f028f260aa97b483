#pragma once

// Popular-set process and demand generation.
//
// The popular set holds exactly N files. In each step, with probability p a
// uniformly chosen member departs and is replaced by a never-seen file.
// Users draw K distinct demands uniformly from the current set.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "occache/rng.hpp"

namespace occ {

struct FileId {
  std::uint64_t value = 0;

  friend constexpr auto operator<=>(FileId, FileId) = default;
};

// Placeholder files pad the initial coded cache up to N' entries. They live in
// a reserved id range that catalog ids never reach and are never requested.
inline constexpr std::uint64_t kPlaceholderBase = std::uint64_t{1} << 62;

inline constexpr bool is_placeholder(FileId f) {
  return f.value >= kPlaceholderBase;
}

inline constexpr FileId placeholder(std::uint64_t index) {
  return FileId{kPlaceholderBase + index};
}

struct FileIdHash {
  std::size_t operator()(FileId f) const {
    return std::hash<std::uint64_t>{}(f.value);
  }
};

struct Request {
  std::size_t user = 0;
  FileId file;

  friend bool operator==(const Request&, const Request&) = default;
};

// One slot of demands: one request per participating user. In synthetic runs
// users are 0..K-1 and files are distinct; replayed traces may omit users and
// repeat files.
using DemandVector = std::vector<Request>;

struct CatalogEvent {
  std::optional<FileId> departed;
  std::optional<FileId> arrived;
};

class CatalogState {
public:
  /// Initial popular set {0, ..., N-1}; fresh ids continue from N.
  CatalogState(std::size_t size, double arrival_prob)
      : arrival_prob_(arrival_prob) {
    if (size == 0)
      throw std::invalid_argument("catalog size must be positive");
    if (!(arrival_prob >= 0.0 && arrival_prob <= 1.0))
      throw std::invalid_argument("arrival probability must lie in [0, 1]");
    files_.reserve(size);
    for (std::size_t i = 0; i < size; ++i)
      files_.push_back(FileId{i});
    members_.insert(files_.begin(), files_.end());
    next_fresh_ = FileId{size};
  }

  /// Explicit initial set; next_fresh must exceed every member.
  CatalogState(std::vector<FileId> files, FileId next_fresh,
               double arrival_prob)
      : files_(std::move(files)), next_fresh_(next_fresh),
        arrival_prob_(arrival_prob) {
    if (files_.empty())
      throw std::invalid_argument("catalog must not be empty");
    members_.insert(files_.begin(), files_.end());
    if (members_.size() != files_.size())
      throw std::invalid_argument("catalog files must be distinct");
    for (FileId f : files_)
      if (!(f < next_fresh_) || is_placeholder(f))
        throw std::invalid_argument("next_fresh must exceed every catalog id");
  }

  [[nodiscard]] std::size_t size() const { return files_.size(); }
  [[nodiscard]] double arrival_prob() const { return arrival_prob_; }
  [[nodiscard]] FileId next_fresh() const { return next_fresh_; }
  [[nodiscard]] const std::vector<FileId>& files() const { return files_; }
  [[nodiscard]] bool contains(FileId f) const { return members_.contains(f); }

  /// Replace `departing` with a fresh file. Used by advance() and to script
  /// hand-written trajectories.
  CatalogEvent replace(FileId departing) {
    const auto it = std::find(files_.begin(), files_.end(), departing);
    if (it == files_.end())
      throw std::invalid_argument("departing file is not in the catalog");
    return replace_at(static_cast<std::size_t>(it - files_.begin()));
  }

  /// One step of the arrival/departure process.
  CatalogEvent advance(Rng& rng) {
    std::bernoulli_distribution arrival(arrival_prob_);
    if (!arrival(rng))
      return {};
    std::uniform_int_distribution<std::size_t> pick(0, files_.size() - 1);
    return replace_at(pick(rng));
  }

private:
  CatalogEvent replace_at(std::size_t index) {
    const FileId departed = files_[index];
    const FileId arrived = next_fresh_;
    next_fresh_ = FileId{next_fresh_.value + 1};
    files_[index] = arrived;
    members_.erase(departed);
    members_.insert(arrived);
    return {departed, arrived};
  }

  std::vector<FileId> files_;
  std::unordered_set<FileId, FileIdHash> members_;
  FileId next_fresh_;
  double arrival_prob_;
};

/// K distinct files drawn uniformly without replacement from the catalog,
/// assigned to users 0..K-1 in uniformly random order.
inline DemandVector draw_demands(const CatalogState& catalog, std::size_t users,
                                 Rng& rng) {
  const std::size_t n = catalog.size();
  if (users > n)
    throw std::invalid_argument(
        "cannot draw more demands than popular files without replacement");

  // Floyd's algorithm for a uniform K-subset of indices, then a shuffle to
  // make the user assignment uniform too.
  std::vector<std::size_t> chosen;
  chosen.reserve(users);
  std::unordered_set<std::size_t> seen;
  const bool small = users <= 64;
  for (std::size_t j = n - users; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    std::size_t idx = pick(rng);
    const bool taken =
        small ? std::find(chosen.begin(), chosen.end(), idx) != chosen.end()
              : seen.contains(idx);
    if (taken)
      idx = j;
    chosen.push_back(idx);
    if (!small)
      seen.insert(idx);
  }
  std::shuffle(chosen.begin(), chosen.end(), rng);

  DemandVector demands;
  demands.reserve(users);
  for (std::size_t u = 0; u < users; ++u)
    demands.push_back({u, catalog.files()[chosen[u]]});
  return demands;
}

} // namespace occ
