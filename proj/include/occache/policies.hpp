#pragma once

// Cache policies and their per-slot rate accounting.
//
//   lru           per-user whole-file caches, least-recently-used eviction
//   lrs-uncoded   one shared whole-file cache, least-recently-sent eviction
//   lrs-coded     N' partially cached files, coded delivery, LRS eviction
//   random-coded  as lrs-coded, but evicts uniformly random cached files
//
// Rates are in files per slot.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <list>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "occache/codec.hpp"
#include "occache/dynamics.hpp"
#include "occache/formulas.hpp"
#include "occache/rng.hpp"

namespace occ {

enum class Policy { Lru, UncodedLrs, CodedLrs, RandomCoded };

inline constexpr Policy kAllPolicies[] = {Policy::Lru, Policy::UncodedLrs,
                                          Policy::CodedLrs, Policy::RandomCoded};

inline std::string_view to_string(Policy policy) {
  switch (policy) {
  case Policy::Lru: return "lru";
  case Policy::UncodedLrs: return "lrs-uncoded";
  case Policy::CodedLrs: return "lrs-coded";
  case Policy::RandomCoded: return "random-coded";
  }
  return "?";
}

inline Policy parse_policy(std::string_view name) {
  for (Policy p : kAllPolicies)
    if (to_string(p) == name)
      return p;
  throw std::invalid_argument("unknown policy '" + std::string(name) +
                              "' (expected lru, lrs-uncoded, lrs-coded, random-coded)");
}

enum class RateMode { Analytic, BitExact };

inline std::string_view to_string(RateMode mode) {
  return mode == RateMode::Analytic ? "analytic" : "bitexact";
}

inline RateMode parse_mode(std::string_view name) {
  if (name == "analytic") return RateMode::Analytic;
  if (name == "bitexact") return RateMode::BitExact;
  throw std::invalid_argument("unknown mode '" + std::string(name) +
                              "' (expected analytic or bitexact)");
}

struct SlotOutcome {
  double rate = 0.0;       // R_t
  int uncached = 0;        // Y_t, distinct requested files not cached
  int correct = 0;         // X_t, cached files in the popular set (coded only)
  int wrong_evictions = 0; // W_t, evicted files still popular
  int departure_hit = 0;   // U_t, set after the catalog advances
  int coded_users = 0;     // users whose request was partially cached
};

namespace detail {

// Distinct files in first-appearance order.
inline std::vector<FileId> distinct_files(const DemandVector& demands) {
  std::vector<FileId> out;
  out.reserve(demands.size());
  for (const auto& r : demands)
    if (std::find(out.begin(), out.end(), r.file) == out.end())
      out.push_back(r.file);
  return out;
}

} // namespace detail

/// Per-user LRU caches of whole files.
class LruCaches {
public:
  LruCaches(std::size_t users, std::size_t capacity)
      : capacity_(capacity), caches_(users) {}

  SlotOutcome step(const DemandVector& demands, std::uint64_t /*t*/) {
    SlotOutcome out;
    for (const auto& r : demands) {
      auto& c = caches_.at(r.user);
      if (auto it = c.where.find(r.file); it != c.where.end()) {
        c.order.splice(c.order.begin(), c.order, it->second);
        continue;
      }
      out.rate += 1.0;
      ++out.uncached;
      if (capacity_ == 0)
        continue;
      if (c.order.size() == capacity_) {
        c.where.erase(c.order.back());
        c.order.pop_back();
      }
      c.order.push_front(r.file);
      c.where[r.file] = c.order.begin();
    }
    return out;
  }

  [[nodiscard]] bool contains(std::size_t user, FileId f) const {
    return caches_.at(user).where.contains(f);
  }
  [[nodiscard]] std::size_t size(std::size_t user) const {
    return caches_.at(user).order.size();
  }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] std::size_t users() const { return caches_.size(); }

private:
  struct UserCache {
    std::list<FileId> order; // most recent first
    std::unordered_map<FileId, std::list<FileId>::iterator, FileIdHash> where;
  };
  std::size_t capacity_;
  std::vector<UserCache> caches_;
};

/// Files ordered by last-sent time. Ties go to placeholders first, then to the
/// smallest id.
class SendRecency {
public:
  [[nodiscard]] bool contains(FileId f) const { return stamps_.contains(f); }
  [[nodiscard]] std::size_t size() const { return stamps_.size(); }

  [[nodiscard]] std::uint64_t stamp(FileId f) const { return stamps_.at(f); }

  void insert(FileId f, std::uint64_t t) {
    if (!stamps_.emplace(f, t).second)
      throw std::logic_error("SendRecency: file already present");
    order_.insert(key(f, t));
  }

  void touch(FileId f, std::uint64_t t) {
    auto it = stamps_.find(f);
    order_.erase(key(f, it->second));
    it->second = t;
    order_.insert(key(f, t));
  }

  void erase(FileId f) {
    auto it = stamps_.find(f);
    if (it == stamps_.end())
      return;
    order_.erase(key(f, it->second));
    stamps_.erase(it);
  }

  [[nodiscard]] FileId oldest() const {
    if (order_.empty())
      throw std::logic_error("SendRecency: empty");
    return std::get<2>(*order_.begin());
  }

  /// Files from least to most recently sent.
  [[nodiscard]] std::vector<FileId> in_order() const {
    std::vector<FileId> out;
    out.reserve(order_.size());
    for (const auto& k : order_)
      out.push_back(std::get<2>(k));
    return out;
  }

private:
  using Key = std::tuple<std::uint64_t, int, FileId>;
  static Key key(FileId f, std::uint64_t t) {
    return {t, is_placeholder(f) ? 0 : 1, f};
  }
  std::set<Key> order_;
  std::unordered_map<FileId, std::uint64_t, FileIdHash> stamps_;
};

/// One whole-file cache shared by all users (every transmission is a
/// broadcast), evicting the least recently sent file.
class UncodedLrsCache {
public:
  explicit UncodedLrsCache(std::size_t capacity, bool refresh_on_hit = true)
      : capacity_(capacity), refresh_on_hit_(refresh_on_hit) {}

  SlotOutcome step(const DemandVector& demands, std::uint64_t t) {
    SlotOutcome out;
    std::vector<FileId> misses;
    for (FileId f : detail::distinct_files(demands)) {
      if (recency_.contains(f)) {
        if (refresh_on_hit_)
          recency_.touch(f, t);
      } else {
        misses.push_back(f);
      }
    }
    out.uncached = static_cast<int>(misses.size());
    out.rate = static_cast<double>(misses.size());
    if (capacity_ == 0)
      return out;
    for (FileId f : misses) {
      if (recency_.size() == capacity_)
        recency_.erase(recency_.oldest());
      recency_.insert(f, t);
    }
    return out;
  }

  [[nodiscard]] bool contains(FileId f) const { return recency_.contains(f); }
  [[nodiscard]] std::size_t size() const { return recency_.size(); }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }

private:
  std::size_t capacity_;
  bool refresh_on_hit_;
  SendRecency recency_;
};

/// Finite-F delivery through the codec instead of the large-F formula.
struct BitExactOptions {
  std::size_t file_bits = 0;   // F
  std::uint64_t content_seed = 0;
  bool verify_decoding = true; // decode every user's file and compare
};

/// The shared list of N' partially cached files, identical at every user.
/// Bit-exact mode additionally keeps each user's random bit subsets.
class PartialCache {
public:
  PartialCache(std::size_t users, double memory, std::size_t partial_files,
               const std::vector<FileId>& initial,
               std::optional<BitExactOptions> bitexact = std::nullopt,
               Rng placement_rng = Rng{})
      : users_(users), memory_(memory), partial_files_(partial_files),
        placement_rng_(std::move(placement_rng)) {
    if (initial.size() != partial_files)
      throw std::invalid_argument("PartialCache: initial list must hold N' files");
    if (memory < 0.0 || memory > static_cast<double>(partial_files))
      throw std::invalid_argument("PartialCache: M must lie in [0, N']");
    if (bitexact) {
      bitexact_ = *bitexact;
      placement_.emplace(users, bitexact->file_bits);
      cached_bits_ = codec::cached_bits_per_file(memory, bitexact->file_bits,
                                                 partial_files);
    }
    for (FileId f : initial)
      insert(f, 0);
  }

  [[nodiscard]] bool contains(FileId f) const { return position_.contains(f); }
  [[nodiscard]] std::size_t size() const { return slots_.size(); }
  [[nodiscard]] std::size_t users() const { return users_; }
  [[nodiscard]] double memory() const { return memory_; }
  [[nodiscard]] std::size_t partial_files() const { return partial_files_; }
  [[nodiscard]] const std::vector<FileId>& files() const { return slots_; }
  [[nodiscard]] const SendRecency& recency() const { return recency_; }
  [[nodiscard]] const std::optional<codec::Placement>& placement() const {
    return placement_;
  }
  [[nodiscard]] bool bitexact() const { return placement_.has_value(); }

  /// Fraction of each file a user stores: M/N' analytically, or the floored
  /// bit count over F in bit-exact mode.
  [[nodiscard]] double cached_fraction() const {
    if (bitexact_)
      return static_cast<double>(cached_bits_) /
             static_cast<double>(bitexact_->file_bits);
    return memory_ / static_cast<double>(partial_files_);
  }

  struct Delivery {
    double rate = 0.0;
    std::vector<FileId> uncached; // distinct, first-appearance order
    int coded_users = 0;
  };

  /// Delivery accounting for one slot; does not modify the cache.
  ///
  /// Analytic: R(M, N', K_eff) + Y, where K_eff counts users whose request is
  /// partially cached and Y counts distinct uncached files sent whole.
  [[nodiscard]] Delivery deliver(const DemandVector& demands) const {
    Delivery d;
    for (const auto& r : demands)
      if (contains(r.file))
        ++d.coded_users;
    for (FileId f : detail::distinct_files(demands))
      if (!contains(f))
        d.uncached.push_back(f);
    if (!placement_) {
      d.rate = expected_rate(memory_, static_cast<double>(partial_files_),
                             d.coded_users) +
               static_cast<double>(d.uncached.size());
      return d;
    }
    d.rate = deliver_bits(demands);
    return d;
  }

  void touch(FileId f, std::uint64_t t) { recency_.touch(f, t); }

  void insert(FileId f, std::uint64_t t) {
    if (contains(f))
      throw std::logic_error("PartialCache: file already cached");
    position_[f] = slots_.size();
    slots_.push_back(f);
    recency_.insert(f, t);
    if (placement_)
      placement_->insert_everywhere(f, cached_bits_, placement_rng_);
  }

  void evict(FileId f) {
    const auto it = position_.find(f);
    if (it == position_.end())
      throw std::logic_error("PartialCache: evicting an uncached file");
    const std::size_t pos = it->second;
    position_.erase(it);
    if (pos + 1 != slots_.size()) {
      slots_[pos] = slots_.back();
      position_[slots_[pos]] = pos;
    }
    slots_.pop_back();
    recency_.erase(f);
    if (placement_)
      placement_->erase_everywhere(f);
  }

private:
  double deliver_bits(const DemandVector& demands) const {
    const auto& opts = *bitexact_;
    const auto index = codec::partition_subfiles(*placement_, demands);
    std::vector<codec::BitVector> contents;
    contents.reserve(demands.size());
    for (const auto& r : demands)
      contents.push_back(codec::synthesize_file(opts.content_seed, r.file,
                                                opts.file_bits));
    const auto tx = codec::deliver(index, contents);
    if (opts.verify_decoding) {
      std::vector<FileId> requested;
      for (const auto& r : demands)
        requested.push_back(r.file);
      const auto content_of = [&](FileId f) {
        return codec::synthesize_file(opts.content_seed, f, opts.file_bits);
      };
      for (std::size_t r = 0; r < demands.size(); ++r) {
        const auto cache =
            codec::cache_of(demands[r].user, *placement_, requested, content_of);
        if (codec::decode(demands[r].user, cache, tx, index, opts.file_bits) !=
            contents[r])
          throw codec::decode_error("decoded file differs from the original");
      }
    }
    return static_cast<double>(codec::transmitted_bits(tx)) /
           static_cast<double>(opts.file_bits);
  }

  std::size_t users_;
  double memory_;
  std::size_t partial_files_;
  std::vector<FileId> slots_;
  std::unordered_map<FileId, std::size_t, FileIdHash> position_;
  SendRecency recency_;
  std::optional<BitExactOptions> bitexact_;
  std::optional<codec::Placement> placement_;
  std::size_t cached_bits_ = 0;
  Rng placement_rng_;
};

/// Coded least-recently-sent caching: coded delivery, then every requested
/// file is stamped with t and each requested file that is not partially
/// cached replaces the least recently sent one at all users.
class CodedLrs {
public:
  explicit CodedLrs(PartialCache cache) : cache_(std::move(cache)) {}

  SlotOutcome step(const DemandVector& demands, std::uint64_t t) {
    const auto d = cache_.deliver(demands);
    SlotOutcome out;
    out.rate = d.rate;
    out.uncached = static_cast<int>(d.uncached.size());
    out.coded_users = d.coded_users;

    for (FileId f : detail::distinct_files(demands))
      if (cache_.contains(f))
        cache_.touch(f, t);
    for (FileId f : d.uncached) {
      cache_.evict(cache_.recency().oldest());
      cache_.insert(f, t);
    }
    return out;
  }

  [[nodiscard]] const PartialCache& cache() const { return cache_; }

private:
  PartialCache cache_;
};

/// Coded random eviction: same delivery as coded LRS, but the Y_t uncached
/// requested files replace Y_t cached files drawn uniformly at random from the
/// pre-update list. Tracks X_t, W_t and U_t against a popular set when one is
/// supplied.
class CodedRandomEviction {
public:
  CodedRandomEviction(PartialCache cache, Rng eviction_rng,
                      const CatalogState* catalog = nullptr)
      : cache_(std::move(cache)), rng_(std::move(eviction_rng)),
        catalog_(catalog) {
    correct_ = count_correct();
  }

  SlotOutcome step(const DemandVector& demands, std::uint64_t t) {
    const auto d = cache_.deliver(demands);
    const std::size_t n = cache_.size();
    const std::size_t y = d.uncached.size();
    if (y > n)
      throw std::logic_error("more uncached requests than cached files");
    // Floyd: uniform y-subset of list positions.
    std::vector<std::size_t> picks;
    picks.reserve(y);
    for (std::size_t j = n - y; j < n; ++j) {
      std::uniform_int_distribution<std::size_t> pick(0, j);
      std::size_t idx = pick(rng_);
      if (std::find(picks.begin(), picks.end(), idx) != picks.end())
        idx = j;
      picks.push_back(idx);
    }
    std::vector<FileId> victims;
    victims.reserve(y);
    for (auto i : picks)
      victims.push_back(cache_.files()[i]);
    return apply(demands, t, d, victims);
  }

  /// Same slot with the eviction set given explicitly (scripted traces).
  SlotOutcome step(const DemandVector& demands, std::uint64_t t,
                   std::span<const FileId> victims) {
    const auto d = cache_.deliver(demands);
    if (victims.size() != d.uncached.size())
      throw std::invalid_argument("eviction set must hold exactly Y_t files");
    std::vector<FileId> v(victims.begin(), victims.end());
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) != v.end())
      throw std::invalid_argument("eviction set has duplicates");
    for (FileId f : v)
      if (!cache_.contains(f))
        throw std::invalid_argument("eviction set names an uncached file");
    return apply(demands, t, d, {victims.begin(), victims.end()});
  }

  /// U_t for the catalog event that closes the slot: 1 if the departing file
  /// is partially cached after the update.
  int record_departure(const CatalogEvent& event) {
    if (!event.departed || !cache_.contains(*event.departed))
      return 0;
    if (catalog_)
      --correct_;
    return 1;
  }

  /// X_t as maintained incrementally.
  [[nodiscard]] int correct() const { return correct_; }

  /// X_t recomputed from scratch.
  [[nodiscard]] int count_correct() const {
    if (!catalog_)
      return 0;
    int x = 0;
    for (FileId f : cache_.files())
      if (catalog_->contains(f))
        ++x;
    return x;
  }

  [[nodiscard]] const PartialCache& cache() const { return cache_; }

private:
  SlotOutcome apply(const DemandVector& demands, std::uint64_t t,
                    const PartialCache::Delivery& d,
                    const std::vector<FileId>& victims) {
    SlotOutcome out;
    out.rate = d.rate;
    out.uncached = static_cast<int>(d.uncached.size());
    out.coded_users = d.coded_users;
    out.correct = correct_;

    for (FileId f : detail::distinct_files(demands))
      if (cache_.contains(f))
        cache_.touch(f, t);
    for (FileId f : victims) {
      if (catalog_ && catalog_->contains(f))
        ++out.wrong_evictions;
      cache_.evict(f);
    }
    for (FileId f : d.uncached) {
      cache_.insert(f, t);
      if (catalog_ && catalog_->contains(f))
        ++correct_;
    }
    correct_ -= out.wrong_evictions;
    return out;
  }

  PartialCache cache_;
  Rng rng_;
  const CatalogState* catalog_;
  int correct_ = 0;
};

struct PolicyOptions {
  RateMode mode = RateMode::Analytic;
  BitExactOptions bitexact;
  bool refresh_on_hit = true; // uncoded LRS only
};

/// Initial coded cache list: the popular files, padded with N' - N
/// placeholders. All start with last-sent stamp 0.
inline std::vector<FileId> initial_partial_files(const CatalogState* catalog,
                                                 std::size_t partial_files) {
  std::vector<FileId> files;
  files.reserve(partial_files);
  if (catalog) {
    if (catalog->size() > partial_files)
      throw std::invalid_argument("N' must be at least N");
    files = catalog->files();
  }
  for (std::size_t i = 0; files.size() < partial_files; ++i)
    files.push_back(placeholder(i));
  return files;
}

/// A policy instance of any kind, driven uniformly by the harness.
class PolicyState {
public:
  using Variant = std::variant<LruCaches, UncodedLrsCache, CodedLrs, CodedRandomEviction>;

  explicit PolicyState(Variant v) : state_(std::move(v)) {}

  SlotOutcome step(const DemandVector& demands, std::uint64_t t) {
    return std::visit([&](auto& s) { return s.step(demands, t); }, state_);
  }

  int record_departure(const CatalogEvent& event) {
    if (auto* r = std::get_if<CodedRandomEviction>(&state_))
      return r->record_departure(event);
    return 0;
  }

  [[nodiscard]] const Variant& state() const { return state_; }

private:
  Variant state_;
};

/// Build a policy's initial state. Whole-file caches start empty; coded caches
/// start with the current popular set plus placeholders. `catalog` may be null
/// (trace replay), in which case coded caches start with placeholders only.
inline PolicyState initialize_policy(const SystemParams& params,
                                     const CatalogState* catalog, Policy policy,
                                     const RngStreams& streams,
                                     const PolicyOptions& options = {}) {
  const auto users = static_cast<std::size_t>(params.num_users);
  const auto whole_files =
      static_cast<std::size_t>(std::floor(params.memory + 1e-9));
  switch (policy) {
  case Policy::Lru:
    return PolicyState(LruCaches(users, whole_files));
  case Policy::UncodedLrs:
    return PolicyState(UncodedLrsCache(whole_files, options.refresh_on_hit));
  case Policy::CodedLrs:
  case Policy::RandomCoded: {
    const std::size_t np = params.partial_files();
    std::optional<BitExactOptions> bitexact;
    if (options.mode == RateMode::BitExact)
      bitexact = options.bitexact;
    PartialCache cache(users, params.memory, np,
                       initial_partial_files(catalog, np), bitexact,
                       streams.stream("placement"));
    if (policy == Policy::CodedLrs)
      return PolicyState(CodedLrs(std::move(cache)));
    return PolicyState(CodedRandomEviction(std::move(cache),
                                           streams.stream("eviction"), catalog));
  }
  }
  throw std::logic_error("unreachable");
}

} // namespace occ
