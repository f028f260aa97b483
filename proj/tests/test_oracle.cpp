#include <catch_amalgamated.hpp>

#include "occache/oracle.hpp"
#include "occache/verify.hpp"

using Catch::Matchers::WithinAbs;
using namespace occ;
using namespace occ::oracle;

TEST_CASE("hypergeometric laws sum to one") {
  for (int n = 1; n <= 12; ++n)
    for (int s = 0; s <= n; ++s)
      for (int d = 0; d <= n; ++d) {
        double total = 0.0;
        for (int k = 0; k <= d; ++k)
          total += hypergeometric(n, s, d, k);
        REQUIRE_THAT(total, WithinAbs(1.0, 1e-12));
      }
}

TEST_CASE("kernel rows are distributions") {
  for (int n : {2, 5, 8, 12})
    for (int k = 1; k <= std::min(n, 4); ++k)
      for (double a : {1.0, 1.25, 1.5, 1.9})
        for (double p : {0.0, 0.3, 1.0})
          CHECK(row_sum_error(build_kernel(n, k, a, p)) <= 1e-12);
  CHECK_THROWS_AS(build_kernel(3, 4, 1.5, 0.1), std::invalid_argument);
}

TEST_CASE("single file, single user: two-state chain") {
  // From either state the file ends up cached and departs with probability p.
  for (double p : {0.1, 0.37, 0.9}) {
    const auto kern = build_kernel(1, 1, 1.0, p);
    const auto pi = stationary_distribution(kern);
    CHECK_THAT(pi(0), WithinAbs(p, 1e-12));
    CHECK_THAT(pi(1), WithinAbs(1 - p, 1e-12));
  }
}

TEST_CASE("p = 0: point mass at N, both sides of the balance are zero") {
  for (int n : {4, 6, 8})
    for (int k : {2, 3}) {
      const auto kern = build_kernel(n, k, 1.5, 0.0);
      const auto pi = stationary_distribution(kern);
      CHECK_THAT(pi(n), WithinAbs(1.0, 1e-12));
      const auto r = verify_steady_state(n, k, 1.5, 0.0);
      CHECK_THAT(r.mean_departure, WithinAbs(0.0, 1e-12));
      CHECK_THAT(r.mean_uncached - r.mean_wrong, WithinAbs(0.0, 1e-12));
      CHECK(r.passes());
    }
}

TEST_CASE("states below ceil(K/2) - 1 are transient; the rest form one class") {
  for (int n : {4, 6, 8, 10})
    for (int k = 1; k <= std::min(n, 6); ++k)
      for (double p : {0.1, 0.9}) {
        const auto kern = build_kernel(n, k, 1.5, p);
        const int first = (k + 1) / 2 - 1;
        INFO("N=" << n << " K=" << k << " p=" << p);
        std::vector<int> recurrent;
        for (int x = first; x <= n; ++x)
          recurrent.push_back(x);
        for (int x = first; x <= n; ++x)
          CHECK(reachable_from(kern, x) == recurrent);
        for (int x = 0; x < first; ++x) {
          const auto r = reachable_from(kern, x);
          CHECK(std::find(r.begin(), r.end(), x - 1) == r.end());
        }
        const auto pi = stationary_distribution(kern);
        for (int x = 0; x < first; ++x)
          CHECK(pi(x) <= 1e-14);
      }
}

TEST_CASE("steady-state checks on the small grid") {
  for (const auto& r : run_oracle_grid(OracleGrid{})) {
    INFO("N=" << r.catalog_size << " K=" << r.num_users << " alpha=" << r.alpha
              << " p=" << r.p);
    CHECK(r.residual <= 1e-10);
    CHECK(r.balance_error <= 1e-9);
    CHECK(r.departure_error <= 1e-9);
    CHECK(r.uncached_error <= 1e-9);
    CHECK(r.xbar >= r.xbar_bound);
    CHECK(r.uncached_demand <= r.uncached_bound);
    CHECK(std::abs(r.quadratic_residual) <= 1e-9);
    CHECK(r.transient_mass <= 1e-14);
    CHECK(r.passes());
  }
}

TEST_CASE("steady-state checks on the extended grid") {
  for (const auto& r : run_oracle_grid(full_oracle_grid())) {
    INFO("N=" << r.catalog_size << " K=" << r.num_users << " alpha=" << r.alpha
              << " p=" << r.p);
    CHECK(r.passes());
    CHECK(std::abs(r.quadratic_residual) <= 1e-9);
  }
}

TEST_CASE("N = 4, K = 2, alpha = 1.5, p = 0.5: bound below exact xbar") {
  const auto r = verify_steady_state(4, 2, 1.5, 0.5);
  CHECK(xbar_lower_bound(0.5, 4, 2, 1.5) <= r.xbar);
}

TEST_CASE("N = 8, K = 3, alpha = 1.5, p = 0.3: uncached-demand bound has slack") {
  const auto r = verify_steady_state(8, 3, 1.5, 0.3);
  CHECK(r.uncached_bound - r.uncached_demand > 0.0);
}

TEST_CASE("the xbar bound does not depend on the variance term") {
  // The quadratic holds with the true variance; the bound is the root of the
  // variance-free quadratic and stays below the smaller root for any
  // sigma^2 >= 0 that leaves real roots.
  for (const auto& r : run_oracle_grid(OracleGrid{})) {
    const double n = r.catalog_size, k = r.num_users;
    const double pt = r.p / (1 - r.p / n);
    const auto kern = build_kernel(r.catalog_size, r.num_users, r.alpha, r.p);
    const double beta = n / kern.partial_files;
    for (double sigma2 : {0.0, r.variance, 0.05, 0.25}) {
      // Smaller root of k beta x^2 - (pt + k(1+beta)) x + k(1 + beta sigma2).
      const double a = k * beta, b = -(pt + k * (1 + beta)), c = k * (1 + beta * sigma2);
      const double disc = b * b - 4 * a * c;
      if (disc < 0)
        continue;
      const double root = (-b - std::sqrt(disc)) / (2 * a);
      CHECK(root >= r.xbar_bound - 1e-12);
    }
    CHECK(xbar_lower_bound(r.p, n, r.num_users, r.alpha) == r.xbar_bound);
  }
}

TEST_CASE("policy simulation matches the exact stationary law") {
  for (auto [n, k, a, p] : {std::tuple{4, 2, 1.5, 0.5}, std::tuple{6, 3, 1.25, 0.9}}) {
    const auto pi = stationary_distribution(build_kernel(n, k, a, p));
    const auto occ = simulate_occupation(n, k, a, p, 1'000'000, 17);
    INFO("N=" << n << " K=" << k);
    CHECK(total_variation(pi, occ) < 0.02);
    for (int x = 0; x <= n; ++x) {
      const double se = std::sqrt(pi(x) * (1 - pi(x)) / 1e6);
      // Autocorrelated samples: allow a generous multiple of the iid error.
      CHECK(std::abs(occ(x) - pi(x)) <= 20 * se + 1e-4);
    }
  }
}
