#pragma once

// Self-checks behind `occache verify`: exact steady-state analysis on a grid
// of small instances, codec round trips, and analytic bound properties.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <utility>
#include <string>
#include <vector>

#include <json.hpp>

#include "occache/codec.hpp"
#include "occache/formulas.hpp"
#include "occache/oracle.hpp"
#include "occache/rng.hpp"

namespace occ {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct OracleGrid {
  std::vector<int> catalog_sizes{4, 6, 8};
  std::vector<int> user_counts{2, 3};
  std::vector<double> alphas{1.25, 1.5};
  std::vector<double> arrival_probs{0.1, 0.5, 0.9};
};

inline OracleGrid full_oracle_grid() {
  return {{4, 6, 8, 10, 12}, {1, 2, 3, 4}, {1.1, 1.25, 1.4, 1.5, 1.9},
          {0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0}};
}

inline std::vector<oracle::SteadyStateReport> run_oracle_grid(const OracleGrid& grid) {
  std::vector<oracle::SteadyStateReport> out;
  for (int n : grid.catalog_sizes)
    for (int k : grid.user_counts)
      for (double a : grid.alphas)
        for (double p : grid.arrival_probs)
          if (k <= n)
            out.push_back(oracle::verify_steady_state(n, k, a, p));
  return out;
}

/// Random placements and demands with K <= max_users, F <= max_bits; every
/// user must decode its file exactly.
inline CheckResult codec_round_trips(std::size_t instances, std::size_t max_users,
                                     std::size_t max_bits, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t failures = 0;
  std::string first;
  for (std::size_t it = 0; it < instances; ++it) {
    const std::size_t users = std::uniform_int_distribution<std::size_t>(1, max_users)(rng);
    const std::size_t bits = std::uniform_int_distribution<std::size_t>(1, max_bits)(rng);
    const std::size_t files = users + std::uniform_int_distribution<std::size_t>(0, 3)(rng);
    codec::Placement placement(users, bits);
    std::vector<FileId> library;
    for (std::size_t f = 0; f < files; ++f) {
      library.push_back(FileId{f});
      for (std::size_t u = 0; u < users; ++u) {
        const auto cached = std::uniform_int_distribution<std::size_t>(0, bits)(rng);
        placement.set(u, FileId{f}, codec::place(bits, cached, rng));
      }
    }
    // Demands may repeat files, as in replayed traces.
    DemandVector demands;
    for (std::size_t u = 0; u < users; ++u)
      demands.push_back({u, library[std::uniform_int_distribution<std::size_t>(0, files - 1)(rng)]});
    const auto content = [&](FileId f) { return codec::synthesize_file(seed, f, bits); };
    std::vector<codec::BitVector> contents;
    for (const auto& r : demands)
      contents.push_back(content(r.file));
    const auto index = codec::partition_subfiles(placement, demands);
    const auto tx = codec::deliver(index, contents);
    for (std::size_t u = 0; u < users; ++u) {
      bool ok = false;
      try {
        const auto cache = codec::cache_of(u, placement, library, content);
        ok = codec::decode(u, cache, tx, index, bits) == contents[u];
      } catch (const codec::decode_error& e) {
        if (first.empty())
          first = e.what();
      }
      if (!ok)
        ++failures;
    }
  }
  return {"codec round trips", failures == 0,
          std::to_string(instances) + " instances, " + std::to_string(failures) +
              " decode failures" + (first.empty() ? "" : " (" + first + ")")};
}

/// Two users, two files, F = 16, every user caching 8 bits of each file.
///
/// Relabelling the bits of one file is a symmetry of the whole system, so user
/// 0 may be fixed to bits {0..7} of both files. User 1's masks are then
/// enumerated: all C(16,8) masks on one file against one representative of
/// every overlap class on the other, in both roles, for all four demand pairs.
inline CheckResult exhaustive_two_user_check() {
  constexpr std::size_t bits = 16;
  const FileId a{0}, b{1};
  const std::vector<FileId> library{a, b};
  std::vector<codec::PlacementMask> all_masks;
  for (std::uint32_t m = 0; m < (1U << bits); ++m) {
    if (std::popcount(m) != 8)
      continue;
    codec::PlacementMask mask;
    for (std::uint32_t i = 0; i < bits; ++i)
      if (m >> i & 1U)
        mask.push_back(i);
    all_masks.push_back(std::move(mask));
  }
  codec::PlacementMask canonical{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<codec::PlacementMask> class_reps;
  for (std::uint32_t overlap = 0; overlap <= 8; ++overlap) {
    codec::PlacementMask mask;
    for (std::uint32_t i = 0; i < overlap; ++i)
      mask.push_back(i);
    for (std::uint32_t i = 0; i < 8 - overlap; ++i)
      mask.push_back(8 + i);
    std::sort(mask.begin(), mask.end());
    class_reps.push_back(std::move(mask));
  }
  const auto content = [](FileId f) { return codec::synthesize_file(16, f, bits); };
  const codec::BitVector content_a = content(a), content_b = content(b);
  const std::pair<FileId, FileId> pairs[] = {{a, b}, {b, a}, {a, a}, {b, b}};

  std::size_t instances = 0, failures = 0;
  const auto check = [&](const codec::PlacementMask& on_a,
                         const codec::PlacementMask& on_b) {
    codec::Placement placement(2, bits);
    placement.set(0, a, canonical);
    placement.set(0, b, canonical);
    placement.set(1, a, on_a);
    placement.set(1, b, on_b);
    const codec::UserCache caches[2] = {codec::cache_of(0, placement, library, content),
                                        codec::cache_of(1, placement, library, content)};
    for (const auto& [d0, d1] : pairs) {
      const DemandVector demands{{0, d0}, {1, d1}};
      const codec::BitVector contents[2] = {d0 == a ? content_a : content_b,
                                            d1 == a ? content_a : content_b};
      const auto index = codec::partition_subfiles(placement, demands);
      const auto tx = codec::deliver(index, contents);
      ++instances;
      for (std::size_t u = 0; u < 2; ++u) {
        try {
          if (codec::decode(u, caches[u], tx, index, bits) != contents[u])
            ++failures;
        } catch (const codec::decode_error&) {
          ++failures;
        }
      }
    }
  };
  for (const auto& rep : class_reps)
    for (const auto& mask : all_masks) {
      check(rep, mask);
      check(mask, rep);
    }
  return {"exhaustive two-user decode", failures == 0,
          std::to_string(instances) + " instances, " + std::to_string(failures) +
              " failures"};
}

/// R(M, alpha N, K) <= 2 R(M, N, K) + (alpha-1)/(1-alpha/2) on a grid.
inline CheckResult overprovision_property(std::size_t points, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t violations = 0;
  double worst = -1e300;
  for (std::size_t i = 0; i < points; ++i) {
    const double n = std::uniform_int_distribution<int>(1, 2000)(rng);
    const int k = std::uniform_int_distribution<int>(1, 200)(rng);
    const double alpha = std::uniform_real_distribution<double>(1.0, 2.0)(rng);
    const double m = std::uniform_real_distribution<double>(0.0, n)(rng);
    const double lhs = expected_rate(m, alpha * n, k);
    const double rhs = 2.0 * expected_rate(m, n, k) + overprovision_penalty(alpha);
    worst = std::max(worst, lhs - rhs);
    if (lhs > rhs * (1.0 + 1e-12) + 1e-12)
      ++violations;
  }
  return {"overprovision inequality", violations == 0,
          std::to_string(points) + " points, max lhs-rhs " + std::to_string(worst)};
}

struct VerifyReport {
  std::vector<oracle::SteadyStateReport> steady_state;
  std::vector<CheckResult> checks;

  [[nodiscard]] bool passed() const {
    for (const auto& r : steady_state)
      if (!r.passes())
        return false;
    for (const auto& c : checks)
      if (!c.passed)
        return false;
    return true;
  }
};

inline VerifyReport run_verification(bool full, std::uint64_t seed) {
  VerifyReport report;
  report.steady_state = run_oracle_grid(full ? full_oracle_grid() : OracleGrid{});
  report.checks.push_back(codec_round_trips(full ? 10'000 : 1'000, 4, full ? 1024 : 256, seed));
  report.checks.push_back(exhaustive_two_user_check());
  report.checks.push_back(overprovision_property(full ? 100'000 : 1'000, seed));
  return report;
}

inline nlohmann::ordered_json to_json(const VerifyReport& report) {
  nlohmann::ordered_json j;
  j["passed"] = report.passed();
  auto& grid = j["steady_state"];
  grid = nlohmann::ordered_json::array();
  for (const auto& r : report.steady_state)
    grid.push_back({{"N", r.catalog_size},
                    {"K", r.num_users},
                    {"alpha", r.alpha},
                    {"p", r.p},
                    {"residual", r.residual},
                    {"xbar", r.xbar},
                    {"xbar_bound", r.xbar_bound},
                    {"uncached_demand", r.uncached_demand},
                    {"uncached_bound", r.uncached_bound},
                    {"balance_error", r.balance_error},
                    {"departure_error", r.departure_error},
                    {"passed", r.passes()}});
  auto& checks = j["checks"];
  checks = nlohmann::ordered_json::array();
  for (const auto& c : report.checks)
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return j;
}

} // namespace occ
