#include <catch_amalgamated.hpp>

#include <numeric>

#include "occache/codec.hpp"
#include "occache/formulas.hpp"
#include "occache/verify.hpp"

using namespace occ;
using namespace occ::codec;

namespace {

constexpr FileId fA{0}, fB{1};

PlacementMask range_mask(std::uint32_t from, std::uint32_t to) {
  PlacementMask m(to - from);
  std::iota(m.begin(), m.end(), from);
  return m;
}

UserSet set_of(std::initializer_list<std::size_t> users) {
  UserSet s = 0;
  for (auto u : users)
    s |= UserSet{1} << u;
  return s;
}

struct Instance {
  Placement placement;
  DemandVector demands;
  std::vector<FileId> library;
  std::uint64_t seed;

  BitVector content(FileId f) const {
    return synthesize_file(seed, f, placement.file_bits());
  }
  std::vector<BitVector> contents() const {
    std::vector<BitVector> out;
    for (const auto& r : demands)
      out.push_back(content(r.file));
    return out;
  }
};

// Random placement of `cached` bits per file per user, K distinct demands.
Instance random_instance(std::size_t users, std::size_t files, std::size_t bits,
                         std::size_t cached, std::size_t cached_files, Rng& rng) {
  Instance in{Placement(users, bits), {}, {}, rng()};
  for (std::size_t f = 0; f < files; ++f) {
    in.library.push_back(FileId{f});
    if (f < cached_files)
      in.placement.insert_everywhere(FileId{f}, cached, rng);
  }
  for (std::size_t u = 0; u < users; ++u)
    in.demands.push_back({u, FileId{u}});
  return in;
}

double bit_rate(const Instance& in) {
  const auto index = partition_subfiles(in.placement, in.demands);
  const auto contents = in.contents();
  return double(transmitted_bits(deliver(index, contents))) / in.placement.file_bits();
}

} // namespace

TEST_CASE("place") {
  Rng rng(1);
  CHECK(place(64, 64, rng) == range_mask(0, 64));
  CHECK(place(64, 0, rng).empty());
  CHECK_THROWS_AS(place(64, 65, rng), std::invalid_argument);
  const auto m = place(1000, 300, rng);
  CHECK(m.size() == 300);
  CHECK(std::is_sorted(m.begin(), m.end()));
  CHECK(std::adjacent_find(m.begin(), m.end()) == m.end());
  CHECK(m.back() < 1000);
}

TEST_CASE("place is uniform over bit positions") {
  Rng rng(2);
  std::vector<int> hits(20, 0);
  const int trials = 50000;
  for (int t = 0; t < trials; ++t)
    for (auto i : place(20, 5, rng))
      ++hits[i];
  for (int h : hits)
    CHECK(std::abs(h / double(trials) - 0.25) < 0.01);
}

TEST_CASE("cached bits per file are floored") {
  CHECK(cached_bits_per_file(1, 10, 3) == 3);
  CHECK(cached_bits_per_file(2, 9, 3) == 6);
  CHECK(cached_bits_per_file(0, 100, 3) == 0);
  CHECK(cached_bits_per_file(250, 100000, 1400) == 17857);
}

TEST_CASE("single user: two cells") {
  Placement placement(1, 10);
  placement.set(0, fA, range_mask(3, 7));
  const auto index = partition_subfiles(placement, {{0, fA}});
  CHECK(index.cell(0, 0) == PlacementMask{0, 1, 2, 7, 8, 9});
  CHECK(index.cell(0, 1) == range_mask(3, 7));

  const std::uint64_t seed = 5;
  const auto a = synthesize_file(seed, fA, 10);
  const auto tx = deliver(index, std::vector<BitVector>{a});
  REQUIRE(tx.size() == 1);
  CHECK(tx[0].payload.size() == 6);
  const std::vector<FileId> lib{fA};
  const auto cache = cache_of(0, placement, lib, [&](FileId f) { return synthesize_file(seed, f, 10); });
  CHECK(decode(0, cache, tx, index, 10) == a);
}

TEST_CASE("uncached file: the empty-set cell is the whole file") {
  Placement placement(2, 12);
  placement.set(0, fA, range_mask(0, 6));
  const auto index = partition_subfiles(placement, {{0, fB}, {1, fA}});
  CHECK(index.cell(0, 0) == range_mask(0, 12));
  for (UserSet s = 1; s < 4; ++s)
    CHECK(index.cell(0, s).empty());
}

TEST_CASE("two users, two files: A_empty, B_empty and A_2 xor B_1") {
  // F = 8. User 0 holds bits 0-3 of both files, user 1 holds bits 2-5.
  Placement placement(2, 8);
  for (FileId f : {fA, fB}) {
    placement.set(0, f, range_mask(0, 4));
    placement.set(1, f, range_mask(2, 6));
  }
  const DemandVector demands{{0, fA}, {1, fB}};
  const auto index = partition_subfiles(placement, demands);
  CHECK(index.cell(0, 0) == PlacementMask{6, 7});             // A_empty
  CHECK(index.cell(0, set_of({0})) == PlacementMask{0, 1});   // A_1
  CHECK(index.cell(0, set_of({1})) == PlacementMask{4, 5});   // A_2
  CHECK(index.cell(0, set_of({0, 1})) == PlacementMask{2, 3}); // A_12

  const std::uint64_t seed = 9;
  const auto a = synthesize_file(seed, fA, 8), b = synthesize_file(seed, fB, 8);
  const std::vector<BitVector> contents{a, b};
  const auto tx = deliver(index, contents);
  REQUIRE(tx.size() == 3);
  CHECK(tx[0].subset == set_of({0, 1}));
  CHECK(tx[1].subset == set_of({0}));
  CHECK(tx[2].subset == set_of({1}));
  // A_2 = bits {4,5} of A, B_1 = bits {0,1} of B.
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(tx[0].payload.get(i) == (a.get(4 + i) != b.get(i)));
  CHECK(tx[1].payload.get(0) == a.get(6));
  CHECK(tx[2].payload.get(1) == b.get(7));
  CHECK(transmitted_bits(tx) == 6);

  const std::vector<FileId> lib{fA, fB};
  const auto content = [&](FileId f) { return synthesize_file(seed, f, 8); };
  CHECK(decode(0, cache_of(0, placement, lib, content), tx, index, 8) == a);
  CHECK(decode(1, cache_of(1, placement, lib, content), tx, index, 8) == b);
}

TEST_CASE("unequal operands are zero-padded at the tail") {
  Placement placement(2, 10);
  placement.set(0, fA, range_mask(0, 2)); // A_1 empty of interest
  placement.set(1, fA, range_mask(2, 7)); // A_2 = {2..6}
  placement.set(0, fB, range_mask(0, 1)); // B_1 = {0}
  placement.set(1, fB, {});
  const DemandVector demands{{0, fA}, {1, fB}};
  const auto index = partition_subfiles(placement, demands);
  const std::uint64_t seed = 3;
  const std::vector<BitVector> contents{synthesize_file(seed, fA, 10),
                                        synthesize_file(seed, fB, 10)};
  const auto tx = deliver(index, contents);
  REQUIRE(tx[0].subset == set_of({0, 1}));
  REQUIRE(tx[0].payload.size() == 5);
  CHECK(tx[0].payload.get(0) == (contents[0].get(2) != contents[1].get(0)));
  for (std::size_t i = 1; i < 5; ++i)
    CHECK(tx[0].payload.get(i) == contents[0].get(2 + i));
  const std::vector<FileId> lib{fA, fB};
  const auto content = [&](FileId f) { return synthesize_file(seed, f, 10); };
  CHECK(decode(0, cache_of(0, placement, lib, content), tx, index, 10) == contents[0]);
  CHECK(decode(1, cache_of(1, placement, lib, content), tx, index, 10) == contents[1]);
}

TEST_CASE("M = 0: every file sent whole, rate K") {
  Rng rng(4);
  auto in = random_instance(4, 6, 300, 0, 6, rng);
  CHECK(bit_rate(in) == 4.0);
  const auto index = partition_subfiles(in.placement, in.demands);
  const auto tx = deliver(index, in.contents());
  REQUIRE(tx.size() == 4);
  for (std::size_t k = 0; k < 4; ++k)
    CHECK(tx[k].subset == set_of({k}));
}

TEST_CASE("cells partition every requested file") {
  Rng rng(6);
  for (int it = 0; it < 200; ++it) {
    const std::size_t users = 1 + rng() % 5;
    const std::size_t bits = 1 + rng() % 500;
    auto in = random_instance(users, users + 2, bits, rng() % (bits + 1), users + 1, rng);
    const auto index = partition_subfiles(in.placement, in.demands);
    for (std::size_t r = 0; r < in.demands.size(); ++r) {
      std::vector<int> seen(bits, 0);
      for (UserSet s = 0; s < (UserSet{1} << users); ++s)
        for (auto i : index.cell(r, s)) {
          ++seen[i];
          for (std::size_t j = 0; j < users; ++j) {
            const auto* m = in.placement.find(j, in.demands[r].file);
            const bool holds = m && std::binary_search(m->begin(), m->end(), i);
            REQUIRE(holds == bool(s >> j & 1U));
          }
        }
      for (int c : seen)
        REQUIRE(c == 1);
    }
  }
}

TEST_CASE("payload length is the longest operand") {
  Rng rng(8);
  auto in = random_instance(4, 4, 257, 100, 4, rng);
  const auto index = partition_subfiles(in.placement, in.demands);
  for (const auto& t : deliver(index, in.contents())) {
    std::size_t want = 0;
    for (std::size_t k = 0; k < 4; ++k)
      if (t.subset >> k & 1U)
        want = std::max(want, index.cell(k, t.subset & ~(UserSet{1} << k)).size());
    CHECK(t.payload.size() == want);
    CHECK(want > 0);
  }
}

TEST_CASE("decode fails loudly without the needed side information") {
  Placement placement(2, 8);
  for (FileId f : {fA, fB}) {
    placement.set(0, f, range_mask(0, 4));
    placement.set(1, f, range_mask(2, 6));
  }
  const DemandVector demands{{0, fA}, {1, fB}};
  const auto index = partition_subfiles(placement, demands);
  const std::uint64_t seed = 1;
  const std::vector<BitVector> contents{synthesize_file(seed, fA, 8),
                                        synthesize_file(seed, fB, 8)};
  const auto tx = deliver(index, contents);
  const std::vector<FileId> only_a{fA};
  const auto cache = cache_of(0, placement, only_a, [&](FileId f) { return synthesize_file(seed, f, 8); });
  CHECK_THROWS_AS(decode(0, cache, tx, index, 8), decode_error);
  const std::vector<Transmission> partial(tx.begin(), tx.begin() + 1);
  const std::vector<FileId> lib{fA, fB};
  const auto full = cache_of(0, placement, lib, [&](FileId f) { return synthesize_file(seed, f, 8); });
  CHECK_THROWS_AS(decode(0, full, partial, index, 8), decode_error);
}

TEST_CASE("randomized round trips, K <= 4, F <= 1024") {
  const auto r = codec_round_trips(2000, 4, 1024, 31);
  INFO(r.detail);
  CHECK(r.passed);
}

TEST_CASE("placement concentration: K = 2, F = 10^5, half of each file") {
  Rng rng(12);
  auto in = random_instance(2, 2, 100000, 50000, 2, rng);
  const auto index = partition_subfiles(in.placement, in.demands);
  for (std::size_t r = 0; r < 2; ++r)
    for (UserSet s = 0; s < 4; ++s)
      CHECK(std::abs(index.cell(r, s).size() / 1e5 - 0.25) <= 0.01);
}

TEST_CASE("bit-exact rate concentrates on the analytic rate") {
  Rng rng(13);
  SECTION("K = 3, F = 2^14, all requests cached") {
    const std::size_t np = 6, bits = 1 << 14;
    const std::size_t cached = cached_bits_per_file(2.0, bits, np);
    auto in = random_instance(3, np, bits, cached, np, rng);
    const double want = expected_rate(2.0, np, 3);
    CHECK(std::abs(bit_rate(in) / want - 1) < 0.05);
  }
  SECTION("K = 3, F = 2^14, one request uncached") {
    const std::size_t np = 6, bits = 1 << 14;
    const std::size_t cached = cached_bits_per_file(2.0, bits, np);
    auto in = random_instance(3, np, bits, cached, 2, rng); // file 2 not cached
    const double want = expected_rate(2.0, np, 2) + 1.0;
    CHECK(std::abs(bit_rate(in) / want - 1) < 0.05);
  }
  SECTION("K = 5, F = 10^5") {
    const std::size_t np = 7, bits = 100000;
    for (double m : {1.0, 3.5, 5.0}) {
      const std::size_t cached = cached_bits_per_file(m, bits, np);
      auto in = random_instance(5, np, bits, cached, np, rng);
      const double want = expected_rate(m, np, 5);
      INFO("M=" << m);
      CHECK(std::abs(bit_rate(in) / want - 1) < 0.02);
    }
  }
}

TEST_CASE("synthetic contents are deterministic and file-specific") {
  CHECK(synthesize_file(1, fA, 1000) == synthesize_file(1, fA, 1000));
  CHECK_FALSE(synthesize_file(1, fA, 1000) == synthesize_file(1, fB, 1000));
  CHECK_FALSE(synthesize_file(1, fA, 1000) == synthesize_file(2, fA, 1000));
  const auto v = synthesize_file(3, fA, 70);
  CHECK(v.words()[1] >> 6 == 0);
}
