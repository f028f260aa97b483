#include <catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <set>

#include "occache/dynamics.hpp"
#include "occache/rng.hpp"

using namespace occ;

namespace {
constexpr FileId A{0}, B{1}, C{2}, D{3};
}

TEST_CASE("scripted replacement: {B,C} with C replaced by a fresh D") {
  CatalogState catalog({B, C}, D, 0.5);
  const auto ev = catalog.replace(C);
  REQUIRE(ev.departed == C);
  REQUIRE(ev.arrived == D);
  CHECK(catalog.contains(B));
  CHECK(catalog.contains(D));
  CHECK_FALSE(catalog.contains(C));
  CHECK(catalog.size() == 2);
  CHECK(catalog.next_fresh() == FileId{4});
}

TEST_CASE("catalog rejects inconsistent initial sets") {
  CHECK_THROWS_AS(CatalogState({A, A}, C, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(CatalogState({A, C}, B, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(CatalogState(0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(CatalogState(3, 1.5), std::invalid_argument);
}

TEST_CASE("p = 0 leaves the catalog unchanged") {
  CatalogState catalog(20, 0.0);
  const auto before = catalog.files();
  Rng rng(1);
  for (int t = 0; t < 10000; ++t) {
    const auto ev = catalog.advance(rng);
    REQUIRE_FALSE(ev.departed);
    REQUIRE_FALSE(ev.arrived);
  }
  CHECK(catalog.files() == before);
}

TEST_CASE("arrival frequency matches p") {
  CatalogState catalog(50, 0.1);
  Rng rng(7);
  int arrivals = 0;
  const int steps = 100000;
  for (int t = 0; t < steps; ++t)
    arrivals += catalog.advance(rng).arrived ? 1 : 0;
  CHECK(std::abs(arrivals / double(steps) - 0.1) <= 0.01);
}

TEST_CASE("catalog size is constant and departed files never return") {
  CatalogState catalog(10, 0.7);
  Rng rng(9);
  std::set<FileId> departed;
  FileId last_fresh = catalog.next_fresh();
  for (int t = 0; t < 20000; ++t) {
    const auto ev = catalog.advance(rng);
    REQUIRE(catalog.size() == 10);
    if (ev.departed) {
      departed.insert(*ev.departed);
      REQUIRE(*ev.arrived == last_fresh);
      last_fresh = catalog.next_fresh();
    }
    for (FileId f : catalog.files()) {
      REQUIRE_FALSE(departed.contains(f));
      REQUIRE(f < catalog.next_fresh());
    }
  }
}

TEST_CASE("demands are distinct members of the catalog") {
  CatalogState catalog(40, 0.2);
  Rng crng(1), drng(2);
  for (int t = 0; t < 100000; ++t) {
    const auto d = draw_demands(catalog, 7, drng);
    REQUIRE(d.size() == 7);
    std::set<FileId> seen;
    for (std::size_t u = 0; u < d.size(); ++u) {
      REQUIRE(d[u].user == u);
      REQUIRE(catalog.contains(d[u].file));
      REQUIRE(seen.insert(d[u].file).second);
    }
    catalog.advance(crng);
  }
}

TEST_CASE("K = N demands are a permutation of the catalog") {
  CatalogState catalog(6, 0.0);
  Rng rng(5);
  std::set<std::vector<FileId>> orders;
  for (int t = 0; t < 20000; ++t) {
    const auto d = draw_demands(catalog, 6, rng);
    std::vector<FileId> files;
    for (const auto& r : d)
      files.push_back(r.file);
    orders.insert(files);
    std::sort(files.begin(), files.end());
    REQUIRE(files == catalog.files());
  }
  CHECK(orders.size() == 720);
}

TEST_CASE("K = 1, N = 2: each file requested half the time") {
  CatalogState catalog(2, 0.0);
  Rng rng(17);
  int first = 0;
  const int draws = 100000;
  for (int t = 0; t < draws; ++t)
    first += draw_demands(catalog, 1, rng)[0].file == FileId{0} ? 1 : 0;
  CHECK(std::abs(first / double(draws) - 0.5) <= 0.01);
}

TEST_CASE("demand draws are uniform over ordered K-tuples") {
  // N = 4, K = 2: 12 ordered pairs, each with probability 1/12.
  CatalogState catalog(4, 0.0);
  Rng rng(23);
  std::map<std::pair<std::uint64_t, std::uint64_t>, int> counts;
  const int draws = 120000;
  for (int t = 0; t < draws; ++t) {
    const auto d = draw_demands(catalog, 2, rng);
    ++counts[{d[0].file.value, d[1].file.value}];
  }
  REQUIRE(counts.size() == 12);
  for (const auto& [pair, c] : counts)
    CHECK(std::abs(c / double(draws) - 1.0 / 12) < 0.005);
}

TEST_CASE("large K uses the hashed path and still draws distinct files") {
  CatalogState catalog(500, 0.0);
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto d = draw_demands(catalog, 300, rng);
    std::set<FileId> seen;
    for (const auto& r : d)
      REQUIRE(seen.insert(r.file).second);
  }
}

TEST_CASE("K > N is rejected") {
  CatalogState catalog(3, 0.0);
  Rng rng(1);
  CHECK_THROWS_WITH(draw_demands(catalog, 4, rng),
                    Catch::Matchers::ContainsSubstring("without replacement"));
}

TEST_CASE("equal seeds give identical trajectories; named streams differ") {
  const auto trajectory = [](std::uint64_t seed) {
    const RngStreams streams(seed);
    Rng crng = streams.stream("catalog"), drng = streams.stream("demand");
    CatalogState catalog(30, 0.3);
    std::vector<std::uint64_t> out;
    for (int t = 0; t < 2000; ++t) {
      for (const auto& r : draw_demands(catalog, 5, drng))
        out.push_back(r.file.value);
      const auto ev = catalog.advance(crng);
      out.push_back(ev.departed ? ev.departed->value : ~0ULL);
    }
    return out;
  };
  CHECK(trajectory(42) == trajectory(42));
  CHECK(trajectory(42) != trajectory(43));

  const RngStreams s(1);
  CHECK(s.stream("catalog")() != s.stream("demand")());
  CHECK(s.stream("catalog")() == s.stream("catalog")());
}

TEST_CASE("placeholders live outside the catalog id range") {
  CHECK(is_placeholder(placeholder(0)));
  CHECK_FALSE(is_placeholder(FileId{123456789}));
  CHECK(FileId{1'000'000'000} < placeholder(0));
}
