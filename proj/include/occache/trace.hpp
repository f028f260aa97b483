#pragma once

// Ratings-log ingestion: parse, filter to recent releases, turn into a slotted
// multi-cache demand trace, and per-movie weekly popularity counts.
//
// Ratings input, either
//   movie_id,user_id,rating,date            (one record per line), or
//   movie_id:                               (per-movie block header)
//   user_id,rating,date                     (records of that movie)
// with dates as YYYY-MM-DD. Release table lines: movie_id,year,title.
//
// Trace output:
//   K=<int> slots=<int>
//   c:f c:f ...                             (one line per slot)

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <deque>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "occache/dynamics.hpp"
#include "occache/rng.hpp"

namespace occ::trace {

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Date = std::chrono::year_month_day;

struct RatingRecord {
  std::string user_id;
  std::string movie_id;
  Date date;

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

struct ReleaseTable {
  std::unordered_map<std::string, int> year;
  std::unordered_map<std::string, std::string> title;

  [[nodiscard]] bool contains(const std::string& movie) const {
    return year.contains(movie);
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep,
                                           std::size_t max_fields = 0) {
  std::vector<std::string_view> out;
  while (true) {
    if (max_fields != 0 && out.size() + 1 == max_fields) {
      out.push_back(line);
      return out;
    }
    const auto pos = line.find(sep);
    out.push_back(line.substr(0, pos));
    if (pos == std::string_view::npos)
      return out;
    line.remove_prefix(pos + 1);
  }
}

inline bool parse_int(std::string_view s, int& out) {
  s = trim(s);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

} // namespace detail

inline Date parse_date(std::string_view text) {
  text = detail::trim(text);
  const auto parts = detail::split(text, '-');
  int y = 0, m = 0, d = 0;
  if (parts.size() != 3 || !detail::parse_int(parts[0], y) ||
      !detail::parse_int(parts[1], m) || !detail::parse_int(parts[2], d))
    throw parse_error("bad date '" + std::string(text) + "'");
  const Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!date.ok())
    throw parse_error("invalid date '" + std::string(text) + "'");
  return date;
}

inline std::vector<RatingRecord> read_ratings(std::istream& in) {
  std::vector<RatingRecord> out;
  std::string line;
  std::string block_movie;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = detail::trim(line);
    if (view.empty() || view.front() == '#')
      continue;
    if (view.back() == ':') {
      block_movie = std::string(detail::trim(view.substr(0, view.size() - 1)));
      continue;
    }
    const auto f = detail::split(view, ',');
    try {
      if (f.size() == 4) {
        if (lineno == 1 && detail::trim(f[0]) == "movie_id")
          continue; // header row
        out.push_back({std::string(detail::trim(f[1])),
                       std::string(detail::trim(f[0])), parse_date(f[3])});
      } else if (f.size() == 3 && !block_movie.empty()) {
        out.push_back({std::string(detail::trim(f[0])), block_movie,
                       parse_date(f[2])});
      } else {
        throw parse_error("unexpected field count");
      }
    } catch (const parse_error& e) {
      throw parse_error("ratings line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// Movies whose year is not a number (e.g. NULL) are left out of the table.
inline ReleaseTable read_release_table(std::istream& in) {
  ReleaseTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = detail::trim(line);
    if (view.empty() || view.front() == '#')
      continue;
    const auto f = detail::split(view, ',', 3);
    if (f.size() < 2)
      throw parse_error("release table line " + std::to_string(lineno) +
                        ": expected movie_id,year,title");
    int year = 0;
    if (!detail::parse_int(f[1], year))
      continue;
    const std::string movie(detail::trim(f[0]));
    table.year[movie] = year;
    if (f.size() == 3)
      table.title[movie] = std::string(detail::trim(f[2]));
  }
  return table;
}

struct FilterStats {
  std::size_t kept = 0;
  std::size_t other_rating_year = 0;
  std::size_t other_release_year = 0;
  std::size_t missing_release = 0; // warning: movie absent from the table
  std::size_t before_release = 0;  // warning: rated before its release year
};

/// Keep ratings made in `rating_year` for movies released in one of
/// `release_years`. Order-preserving.
inline std::vector<RatingRecord> filter_ratings(const std::vector<RatingRecord>& records,
                                                int rating_year,
                                                const std::set<int>& release_years,
                                                const ReleaseTable& table,
                                                FilterStats* stats = nullptr) {
  FilterStats local;
  std::vector<RatingRecord> out;
  for (const auto& r : records) {
    const int year = static_cast<int>(r.date.year());
    const auto rel = table.year.find(r.movie_id);
    if (rel == table.year.end()) {
      ++local.missing_release;
      continue;
    }
    if (year != rating_year) {
      ++local.other_rating_year;
      continue;
    }
    if (!release_years.contains(rel->second)) {
      ++local.other_release_year;
      continue;
    }
    if (year < rel->second) {
      ++local.before_release;
      continue;
    }
    out.push_back(r);
  }
  local.kept = out.size();
  if (stats)
    *stats = local;
  return out;
}

enum class Assignment { Hash, RoundRobin };

inline Assignment parse_assignment(std::string_view name) {
  if (name == "hash") return Assignment::Hash;
  if (name == "round_robin" || name == "round-robin") return Assignment::RoundRobin;
  throw std::invalid_argument("unknown assignment '" + std::string(name) +
                              "' (expected hash or round_robin)");
}

struct TraceEntry {
  std::size_t cache = 0;
  std::uint64_t file = 0;

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct DemandTrace {
  std::size_t num_caches = 0;
  std::vector<std::vector<TraceEntry>> slots;
  std::vector<std::string> movie_of_file; // file id -> movie id (not serialized)

  [[nodiscard]] DemandVector demands(std::size_t slot) const {
    DemandVector d;
    d.reserve(slots[slot].size());
    for (const auto& e : slots[slot])
      d.push_back({e.cache, FileId{e.file}});
    return d;
  }
};

/// Slotted trace from ratings. Each record goes to a cache (hash of the user
/// id mod K, or users dealt round-robin in order of first appearance); each
/// slot then takes the oldest pending request of every cache that has one.
/// Movies are renumbered densely in order of first appearance.
inline DemandTrace build_trace(std::vector<RatingRecord> records, std::size_t num_caches,
                               Assignment assignment) {
  if (num_caches == 0)
    throw std::invalid_argument("build_trace: K must be positive");
  std::stable_sort(records.begin(), records.end(),
                   [](const RatingRecord& a, const RatingRecord& b) {
                     return a.date < b.date;
                   });

  DemandTrace trace;
  trace.num_caches = num_caches;
  std::unordered_map<std::string, std::uint64_t> file_of;
  std::unordered_map<std::string, std::size_t> cache_of_user;
  std::vector<std::deque<std::uint64_t>> queues(num_caches);

  for (const auto& r : records) {
    auto [fit, fresh] = file_of.try_emplace(r.movie_id, trace.movie_of_file.size());
    if (fresh)
      trace.movie_of_file.push_back(r.movie_id);
    std::size_t cache = 0;
    if (assignment == Assignment::Hash) {
      cache = static_cast<std::size_t>(fnv1a64(r.user_id) % num_caches);
    } else {
      auto [uit, _] = cache_of_user.try_emplace(r.user_id,
                                                cache_of_user.size() % num_caches);
      cache = uit->second;
    }
    queues[cache].push_back(fit->second);
  }

  while (true) {
    std::vector<TraceEntry> slot;
    for (std::size_t c = 0; c < num_caches; ++c) {
      if (queues[c].empty())
        continue;
      slot.push_back({c, queues[c].front()});
      queues[c].pop_front();
    }
    if (slot.empty())
      break;
    trace.slots.push_back(std::move(slot));
  }
  return trace;
}

inline void write_trace(std::ostream& out, const DemandTrace& trace) {
  out << "K=" << trace.num_caches << " slots=" << trace.slots.size() << '\n';
  for (const auto& slot : trace.slots) {
    for (std::size_t i = 0; i < slot.size(); ++i) {
      if (i)
        out << ' ';
      out << slot[i].cache << ':' << slot[i].file;
    }
    out << '\n';
  }
}

inline DemandTrace read_trace(std::istream& in) {
  DemandTrace trace;
  std::string line;
  if (!std::getline(in, line))
    throw parse_error("trace: missing header");
  std::size_t slots = 0;
  {
    std::istringstream hs(line);
    std::string k_tok, s_tok;
    hs >> k_tok >> s_tok;
    int k = 0, s = 0;
    if (k_tok.rfind("K=", 0) != 0 || s_tok.rfind("slots=", 0) != 0 ||
        !detail::parse_int(std::string_view(k_tok).substr(2), k) ||
        !detail::parse_int(std::string_view(s_tok).substr(6), s) || k <= 0 || s < 0)
      throw parse_error("trace: bad header '" + line + "'");
    trace.num_caches = static_cast<std::size_t>(k);
    slots = static_cast<std::size_t>(s);
  }
  trace.slots.reserve(slots);
  while (std::getline(in, line)) {
    if (detail::trim(line).empty())
      continue;
    std::vector<TraceEntry> slot;
    std::istringstream ls(line);
    std::string tok;
    std::vector<bool> seen(trace.num_caches, false);
    while (ls >> tok) {
      const auto colon = tok.find(':');
      int c = 0;
      std::uint64_t f = 0;
      const std::string_view fv = std::string_view(tok).substr(colon + 1);
      if (colon == std::string::npos ||
          !detail::parse_int(std::string_view(tok).substr(0, colon), c) ||
          std::from_chars(fv.data(), fv.data() + fv.size(), f).ptr !=
              fv.data() + fv.size())
        throw parse_error("trace: bad token '" + tok + "'");
      if (c < 0 || static_cast<std::size_t>(c) >= trace.num_caches ||
          seen[static_cast<std::size_t>(c)])
        throw parse_error("trace: cache index out of range or repeated in '" +
                          line + "'");
      seen[static_cast<std::size_t>(c)] = true;
      slot.push_back({static_cast<std::size_t>(c), f});
    }
    trace.slots.push_back(std::move(slot));
  }
  if (trace.slots.size() != slots)
    throw parse_error("trace: header announces " + std::to_string(slots) +
                      " slots, found " + std::to_string(trace.slots.size()));
  return trace;
}

/// Ratings of `movie_id` per week of `year` (53 buckets, week 1 first).
/// Empty if the movie is not in the release table.
inline std::vector<std::size_t> popularity_series(const std::vector<RatingRecord>& records,
                                                  const std::string& movie_id,
                                                  int year, const ReleaseTable& table) {
  if (!table.contains(movie_id))
    return {};
  using namespace std::chrono;
  const sys_days start{std::chrono::year{year} / January / 1};
  std::vector<std::size_t> counts(53, 0);
  for (const auto& r : records) {
    if (r.movie_id != movie_id || static_cast<int>(r.date.year()) != year)
      continue;
    const auto days = (sys_days{r.date} - start).count();
    ++counts[static_cast<std::size_t>(days / 7)];
  }
  return counts;
}

} // namespace occ::trace
