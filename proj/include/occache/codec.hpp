#pragma once

// Bit-exact decentralized coded caching: random bit placement, partition of
// each requested file by the exact set of users caching each bit, XOR
// delivery over user subsets, and per-user decoding.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "occache/dynamics.hpp"
#include "occache/rng.hpp"

namespace occ::codec {

// Largest user count the subset enumeration supports.
inline constexpr std::size_t kMaxUsers = 16;

using UserSet = std::uint32_t;

struct decode_error : std::logic_error {
  using std::logic_error::logic_error;
};

class BitVector {
public:
  BitVector() = default;
  explicit BitVector(std::size_t bits) : words_((bits + 63) / 64), size_(bits) {}

  [[nodiscard]] std::size_t size() const { return size_; }

  [[nodiscard]] bool get(std::size_t i) const {
    return (words_[i >> 6] >> (i & 63)) & 1U;
  }
  void set(std::size_t i, bool value) {
    const std::uint64_t m = std::uint64_t{1} << (i & 63);
    if (value)
      words_[i >> 6] |= m;
    else
      words_[i >> 6] &= ~m;
  }
  void flip(std::size_t i) { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }

  [[nodiscard]] std::size_t count() const {
    std::size_t c = 0;
    for (auto w : words_)
      c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  [[nodiscard]] std::span<std::uint64_t> words() { return words_; }
  [[nodiscard]] std::span<const std::uint64_t> words() const { return words_; }

  friend bool operator==(const BitVector&, const BitVector&) = default;

private:
  std::vector<std::uint64_t> words_;
  std::size_t size_ = 0;
};

/// Deterministic synthetic file content, a function of (seed, file, F) only.
inline BitVector synthesize_file(std::uint64_t seed, FileId file,
                                 std::size_t bits) {
  BitVector out(bits);
  const std::uint64_t base = splitmix64(seed ^ splitmix64(file.value));
  auto words = out.words();
  for (std::size_t w = 0; w < words.size(); ++w)
    words[w] = splitmix64(base + w);
  if (bits % 64 != 0 && !words.empty())
    words.back() &= (std::uint64_t{1} << (bits % 64)) - 1;
  return out;
}

/// Bits each user stores of each partially cached file: floor(M F / N').
/// The remainder stays uncached so the memory budget is never exceeded.
inline std::size_t cached_bits_per_file(double memory, std::size_t file_bits,
                                        std::size_t partial_files) {
  if (partial_files == 0)
    throw std::invalid_argument("cached_bits_per_file: N' must be positive");
  const double exact = memory * static_cast<double>(file_bits) /
                       static_cast<double>(partial_files);
  return static_cast<std::size_t>(std::floor(exact + 1e-9));
}

// Sorted bit indices of one file that one user caches.
using PlacementMask = std::vector<std::uint32_t>;

/// Uniform random subset of `cached_bits` indices from [0, F), sorted.
inline PlacementMask place(std::size_t file_bits, std::size_t cached_bits,
                           Rng& rng) {
  if (cached_bits > file_bits)
    throw std::invalid_argument("place: cached fraction exceeds the file size");
  PlacementMask mask;
  mask.reserve(cached_bits);
  // Selection sampling keeps the output sorted without a full index buffer.
  std::size_t needed = cached_bits;
  for (std::size_t i = 0; i < file_bits && needed > 0; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, file_bits - i - 1);
    if (pick(rng) < needed) {
      mask.push_back(static_cast<std::uint32_t>(i));
      --needed;
    }
  }
  return mask;
}

/// Per-user placement of partially cached files.
class Placement {
public:
  Placement(std::size_t users, std::size_t file_bits)
      : file_bits_(file_bits), masks_(users) {
    if (users == 0 || users > kMaxUsers)
      throw std::invalid_argument("Placement: unsupported number of users");
    if (file_bits == 0 || file_bits > std::numeric_limits<std::uint32_t>::max())
      throw std::invalid_argument("Placement: unsupported file size");
  }

  [[nodiscard]] std::size_t users() const { return masks_.size(); }
  [[nodiscard]] std::size_t file_bits() const { return file_bits_; }

  void set(std::size_t user, FileId file, PlacementMask mask) {
    masks_.at(user)[file] = std::move(mask);
  }

  /// Insert `file` at every user with an independent random subset each.
  void insert_everywhere(FileId file, std::size_t cached_bits, Rng& rng) {
    for (auto& per_user : masks_)
      per_user[file] = place(file_bits_, cached_bits, rng);
  }

  void erase_everywhere(FileId file) {
    for (auto& per_user : masks_)
      per_user.erase(file);
  }

  [[nodiscard]] const PlacementMask* find(std::size_t user, FileId file) const {
    const auto& per_user = masks_.at(user);
    const auto it = per_user.find(file);
    return it == per_user.end() ? nullptr : &it->second;
  }

  [[nodiscard]] std::size_t stored_bits(std::size_t user) const {
    std::size_t total = 0;
    for (const auto& [file, mask] : masks_.at(user))
      total += mask.size();
    return total;
  }

  [[nodiscard]] std::size_t files_at(std::size_t user) const {
    return masks_.at(user).size();
  }

private:
  std::size_t file_bits_;
  std::vector<std::unordered_map<FileId, PlacementMask, FileIdHash>> masks_;
};

/// For each request, the bits of the requested file grouped by the exact set
/// of users that cache them: cell(r, S) holds V_S(k) for request r of user k.
class SubfileIndex {
public:
  SubfileIndex(std::size_t users, DemandVector demands)
      : users_(users), demands_(std::move(demands)),
        cells_(demands_.size(), std::vector<PlacementMask>(std::size_t{1} << users)) {}

  [[nodiscard]] std::size_t users() const { return users_; }
  [[nodiscard]] const DemandVector& demands() const { return demands_; }

  [[nodiscard]] const PlacementMask& cell(std::size_t request, UserSet s) const {
    return cells_[request][s];
  }
  PlacementMask& cell(std::size_t request, UserSet s) { return cells_[request][s]; }

  /// Position in demands() of the request made by `user`, or -1.
  [[nodiscard]] int request_of(std::size_t user) const {
    for (std::size_t r = 0; r < demands_.size(); ++r)
      if (demands_[r].user == user)
        return static_cast<int>(r);
    return -1;
  }

private:
  std::size_t users_;
  DemandVector demands_;
  std::vector<std::vector<PlacementMask>> cells_;
};

inline SubfileIndex partition_subfiles(const Placement& placement,
                                       const DemandVector& demands) {
  const std::size_t users = placement.users();
  const std::size_t bits = placement.file_bits();
  {
    std::vector<bool> seen(users, false);
    for (const auto& r : demands) {
      if (r.user >= users || seen[r.user])
        throw std::invalid_argument(
            "partition_subfiles: each user may make at most one request");
      seen[r.user] = true;
    }
  }

  SubfileIndex index(users, demands);
  std::vector<UserSet> holders(bits);
  for (std::size_t r = 0; r < demands.size(); ++r) {
    std::fill(holders.begin(), holders.end(), UserSet{0});
    for (std::size_t j = 0; j < users; ++j)
      if (const auto* mask = placement.find(j, demands[r].file))
        for (auto i : *mask)
          holders[i] |= UserSet{1} << j;
    for (std::size_t i = 0; i < bits; ++i)
      index.cell(r, holders[i]).push_back(static_cast<std::uint32_t>(i));
  }
  return index;
}

struct Transmission {
  UserSet subset = 0;
  BitVector payload;
};

/// Call fn(S) for every S subset of {0..n-1} with |S| = size, in lexicographic
/// order of the sorted member lists.
template <typename Fn>
void for_each_subset(std::size_t n, std::size_t size, Fn&& fn) {
  if (size == 0 || size > n)
    return;
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  while (true) {
    UserSet s = 0;
    for (auto i : idx)
      s |= UserSet{1} << i;
    fn(s);
    std::size_t pos = size;
    while (pos > 0 && idx[pos - 1] == n - size + pos - 1)
      --pos;
    if (pos == 0)
      return;
    ++idx[pos - 1];
    for (std::size_t j = pos; j < size; ++j)
      idx[j] = idx[j - 1] + 1;
  }
}

/// Delivery: for s = K..1 and each |S| = s, send the XOR over k in S of
/// V_{S\{k}}(k), zero-padded at the tail to the longest operand. Subsets with
/// nothing to send produce no transmission.
///
/// `contents[r]` is the full content of the file requested by demands()[r].
inline std::vector<Transmission> deliver(const SubfileIndex& index,
                                         std::span<const BitVector> contents) {
  const auto& demands = index.demands();
  if (contents.size() != demands.size())
    throw std::invalid_argument("deliver: one content per request required");

  std::vector<int> request_of(index.users(), -1);
  for (std::size_t r = 0; r < demands.size(); ++r)
    request_of[demands[r].user] = static_cast<int>(r);

  std::vector<Transmission> out;
  for (std::size_t s = index.users(); s >= 1; --s) {
    for_each_subset(index.users(), s, [&](UserSet subset) {
      std::size_t length = 0;
      for (std::size_t k = 0; k < index.users(); ++k)
        if ((subset >> k & 1U) && request_of[k] >= 0)
          length = std::max(length,
                            index.cell(request_of[k], subset & ~(UserSet{1} << k)).size());
      if (length == 0)
        return;
      Transmission t{subset, BitVector(length)};
      for (std::size_t k = 0; k < index.users(); ++k) {
        if (!(subset >> k & 1U) || request_of[k] < 0)
          continue;
        const auto r = static_cast<std::size_t>(request_of[k]);
        const auto& cell = index.cell(r, subset & ~(UserSet{1} << k));
        for (std::size_t i = 0; i < cell.size(); ++i)
          if (contents[r].get(cell[i]))
            t.payload.flip(i);
      }
      out.push_back(std::move(t));
    });
  }
  return out;
}

inline std::size_t transmitted_bits(std::span<const Transmission> tx) {
  std::size_t total = 0;
  for (const auto& t : tx)
    total += t.payload.size();
  return total;
}

/// What one user holds: for each cached file, which bits are present and
/// their values.
class UserCache {
public:
  struct Entry {
    BitVector present;
    BitVector value;
  };

  void store(FileId file, const PlacementMask& mask, const BitVector& content) {
    Entry e{BitVector(content.size()), BitVector(content.size())};
    for (auto i : mask) {
      e.present.set(i, true);
      e.value.set(i, content.get(i));
    }
    entries_[file] = std::move(e);
  }

  [[nodiscard]] const Entry* find(FileId file) const {
    const auto it = entries_.find(file);
    return it == entries_.end() ? nullptr : &it->second;
  }

private:
  std::unordered_map<FileId, Entry, FileIdHash> entries_;
};

/// Build user `user`'s cache from the placement and a content source.
template <typename ContentFn>
UserCache cache_of(std::size_t user, const Placement& placement,
                   std::span<const FileId> files, ContentFn&& content) {
  UserCache cache;
  for (FileId f : files)
    if (const auto* mask = placement.find(user, f))
      cache.store(f, *mask, content(f));
  return cache;
}

/// Recover `user`'s requested file from its cache and the transmissions.
/// Throws decode_error if any bit cannot be resolved.
inline BitVector decode(std::size_t user, const UserCache& cache,
                        std::span<const Transmission> transmissions,
                        const SubfileIndex& index, std::size_t file_bits) {
  const int own = index.request_of(user);
  if (own < 0)
    throw std::invalid_argument("decode: user made no request");
  const auto& demands = index.demands();
  const FileId wanted = demands[static_cast<std::size_t>(own)].file;

  BitVector result(file_bits);
  BitVector known(file_bits);
  if (const auto* mine = cache.find(wanted)) {
    for (std::size_t i = 0; i < file_bits; ++i)
      if (mine->present.get(i)) {
        result.set(i, mine->value.get(i));
        known.set(i, true);
      }
  }

  const UserSet me = UserSet{1} << user;
  for (const auto& t : transmissions) {
    if (!(t.subset & me))
      continue;
    const auto& target = index.cell(static_cast<std::size_t>(own), t.subset & ~me);
    if (target.empty())
      continue;
    if (target.size() > t.payload.size())
      throw decode_error("decode: payload shorter than the subfile it carries");
    BitVector buf(target.size());
    for (std::size_t i = 0; i < target.size(); ++i)
      buf.set(i, t.payload.get(i));
    for (std::size_t r = 0; r < demands.size(); ++r) {
      const std::size_t j = demands[r].user;
      if (j == user || !(t.subset >> j & 1U))
        continue;
      const auto& other = index.cell(r, t.subset & ~(UserSet{1} << j));
      const std::size_t overlap = std::min(other.size(), target.size());
      if (overlap == 0)
        continue;
      const auto* side = cache.find(demands[r].file);
      if (side == nullptr)
        throw decode_error("decode: side information for file " +
                           std::to_string(demands[r].file.value) + " missing");
      for (std::size_t i = 0; i < overlap; ++i) {
        const auto bit = other[i];
        if (!side->present.get(bit))
          throw decode_error("decode: side-information bit not cached");
        if (side->value.get(bit))
          buf.flip(i);
      }
    }
    for (std::size_t i = 0; i < target.size(); ++i) {
      result.set(target[i], buf.get(i));
      known.set(target[i], true);
    }
  }
  if (known.count() != file_bits)
    throw decode_error("decode: " + std::to_string(file_bits - known.count()) +
                       " bits unresolved");
  return result;
}

} // namespace occ::codec
