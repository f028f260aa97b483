#pragma once

// Exact small-instance analysis of coded random eviction.
//
// X_t, the number of popular files that are partially cached, is a Markov
// chain. Its kernel is built by enumerating
//   Y | X=x      ~ Hypergeometric(N, N-x, K)   uncached files among K demands
//   W | X=x, Y=y ~ Hypergeometric(N', x, y)    popular files among y evictions
//   U | X'       ~ Bernoulli(p X'/N)           departure of a cached file
// with X' = x + y - w and X_{t+1} = X' - U.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "occache/dynamics.hpp"
#include "occache/formulas.hpp"
#include "occache/policies.hpp"
#include "occache/rng.hpp"

namespace occ::oracle {

inline double binomial(int n, int k) {
  if (k < 0 || k > n)
    return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (int i = 1; i <= k; ++i)
    c = c * (n - k + i) / i;
  return c;
}

/// P(draws contain exactly k successes) for draws without replacement.
inline double hypergeometric(int population, int successes, int draws, int k) {
  const double denom = binomial(population, draws);
  return binomial(successes, k) * binomial(population - successes, draws - k) /
         denom;
}

struct TransitionKernel {
  int catalog_size = 0;  // N
  int num_users = 0;     // K
  double alpha = 1.0;
  double p = 0.0;
  int partial_files = 0; // N'
  Eigen::MatrixXd matrix;         // row x: law of X_{t+1} given X_t = x
  Eigen::VectorXd mean_uncached;  // E(Y | X = x)
  Eigen::VectorXd mean_wrong;     // E(W | X = x)
  Eigen::VectorXd mean_departure; // E(U | X = x)

  [[nodiscard]] int states() const { return catalog_size + 1; }
};

inline TransitionKernel build_kernel(int catalog_size, int num_users,
                                     double alpha, double p) {
  if (catalog_size < 1 || num_users < 1)
    throw std::invalid_argument("build_kernel: N and K must be positive");
  if (num_users > catalog_size)
    throw std::invalid_argument("build_kernel: K must not exceed N");
  if (!(alpha >= 1.0))
    throw std::invalid_argument("build_kernel: alpha must be >= 1");
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("build_kernel: p must lie in [0, 1]");

  SystemParams params{num_users, catalog_size, 0.0, alpha, p};
  const int n = catalog_size;
  const int k = num_users;
  const int np = static_cast<int>(params.partial_files());

  TransitionKernel kern;
  kern.catalog_size = n;
  kern.num_users = k;
  kern.alpha = alpha;
  kern.p = p;
  kern.partial_files = np;
  kern.matrix = Eigen::MatrixXd::Zero(n + 1, n + 1);
  kern.mean_uncached = Eigen::VectorXd::Zero(n + 1);
  kern.mean_wrong = Eigen::VectorXd::Zero(n + 1);
  kern.mean_departure = Eigen::VectorXd::Zero(n + 1);

  for (int x = 0; x <= n; ++x) {
    for (int y = 0; y <= k; ++y) {
      const double py = hypergeometric(n, n - x, k, y);
      if (py == 0.0)
        continue;
      kern.mean_uncached(x) += py * y;
      for (int w = 0; w <= y; ++w) {
        const double pw = hypergeometric(np, x, y, w);
        if (pw == 0.0)
          continue;
        const double pyw = py * pw;
        const int after = x + y - w;
        const double pu = p * after / n;
        kern.mean_wrong(x) += pyw * w;
        kern.mean_departure(x) += pyw * pu;
        kern.matrix(x, after) += pyw * (1.0 - pu);
        if (after > 0)
          kern.matrix(x, after - 1) += pyw * pu;
      }
    }
  }
  return kern;
}

/// Largest |row sum - 1|.
inline double row_sum_error(const TransitionKernel& kern) {
  return (kern.matrix.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

/// States reachable from `start` through positive-probability transitions.
inline std::vector<int> reachable_from(const TransitionKernel& kern, int start) {
  std::vector<bool> seen(static_cast<std::size_t>(kern.states()), false);
  std::queue<int> todo;
  todo.push(start);
  seen[static_cast<std::size_t>(start)] = true;
  while (!todo.empty()) {
    const int s = todo.front();
    todo.pop();
    for (int t = 0; t < kern.states(); ++t)
      if (kern.matrix(s, t) > 0.0 && !seen[static_cast<std::size_t>(t)]) {
        seen[static_cast<std::size_t>(t)] = true;
        todo.push(t);
      }
  }
  std::vector<int> out;
  for (int s = 0; s < kern.states(); ++s)
    if (seen[static_cast<std::size_t>(s)])
      out.push_back(s);
  return out;
}

/// max_j |(pi P - pi)_j|
inline double stationary_residual(const TransitionKernel& kern,
                                  const Eigen::VectorXd& pi) {
  const Eigen::RowVectorXd row = pi.transpose();
  return (row * kern.matrix - row).cwiseAbs().maxCoeff();
}

/// Unique stationary distribution: solve pi (P - I) = 0 with sum(pi) = 1,
/// then polish with a few fixed-point sweeps.
inline Eigen::VectorXd stationary_distribution(const TransitionKernel& kern,
                                               double tolerance = 1e-10) {
  const int s = kern.states();
  Eigen::MatrixXd a = (kern.matrix - Eigen::MatrixXd::Identity(s, s)).transpose();
  a.row(s - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(s);
  b(s - 1) = 1.0;
  Eigen::VectorXd pi = a.fullPivLu().solve(b);

  for (int sweep = 0; sweep < 8; ++sweep) {
    pi = pi.cwiseMax(0.0);
    pi /= pi.sum();
    if (stationary_residual(kern, pi) <= tolerance * 1e-2)
      break;
    pi = (pi.transpose() * kern.matrix).transpose();
  }
  pi = pi.cwiseMax(0.0);
  pi /= pi.sum();
  if (!pi.allFinite() || stationary_residual(kern, pi) > tolerance)
    throw std::runtime_error("stationary_distribution: did not converge");
  return pi;
}

struct SteadyStateReport {
  int catalog_size = 0;
  int num_users = 0;
  double alpha = 1.0;
  double p = 0.0;
  double residual = 0.0;         // ||pi P - pi||_inf
  double mean_correct = 0.0;     // E(X)
  double xbar = 0.0;             // E(X)/N
  double variance = 0.0;         // Var(X)/N^2
  double mean_uncached = 0.0;    // E(Y)
  double mean_wrong = 0.0;       // E(W)
  double mean_departure = 0.0;   // E(U)
  double balance_error = 0.0;    // |E(U) - E(Y - W)|
  double departure_error = 0.0;  // |E(U) - p/(1-p/N) * E(X)/N|
  double uncached_error = 0.0;   // |E(Y) - K(1 - E(X)/N)|
  double quadratic_residual = 0.0; // quadratic identity in xbar with true variance
  double xbar_bound = 0.0;       // variance-free lower bound on xbar
  double uncached_demand = 0.0;  // K(1 - E(X)/N)
  double uncached_bound = 0.0;   // 1 / ((1-1/N)(1-1/alpha))
  double transient_mass = 0.0;   // pi mass on states below ceil(K/2) - 1

  [[nodiscard]] bool passes() const {
    return residual <= 1e-10 && balance_error <= 1e-9 &&
           departure_error <= 1e-9 && uncached_error <= 1e-9 &&
           xbar >= xbar_bound - 1e-12 &&
           uncached_demand <= uncached_bound + 1e-12;
  }
};

/// Stationary analysis of one instance: checks the steady-state balance
/// E(U) = E(Y - W), the departure identity, and both analytic bounds using
/// exact conditional expectations.
inline SteadyStateReport verify_steady_state(int catalog_size, int num_users,
                                             double alpha, double p) {
  if (catalog_size < 2 || !(alpha > 1.0))
    throw std::invalid_argument("verify_steady_state: need N >= 2, alpha > 1");
  const auto kern = build_kernel(catalog_size, num_users, alpha, p);
  const auto pi = stationary_distribution(kern);
  const double n = catalog_size;
  const int k = num_users;

  SteadyStateReport r;
  r.catalog_size = catalog_size;
  r.num_users = num_users;
  r.alpha = alpha;
  r.p = p;
  r.residual = stationary_residual(kern, pi);
  double second = 0.0;
  for (int x = 0; x <= catalog_size; ++x) {
    r.mean_correct += pi(x) * x;
    second += pi(x) * x * x;
  }
  r.mean_uncached = pi.dot(kern.mean_uncached);
  r.mean_wrong = pi.dot(kern.mean_wrong);
  r.mean_departure = pi.dot(kern.mean_departure);
  r.xbar = r.mean_correct / n;
  r.variance = second / (n * n) - r.xbar * r.xbar;

  const double p_tilde = p / (1.0 - p / n);
  r.balance_error = std::abs(r.mean_departure - (r.mean_uncached - r.mean_wrong));
  r.departure_error = std::abs(r.mean_departure - p_tilde * r.xbar);
  r.uncached_error = std::abs(r.mean_uncached - k * (1.0 - r.xbar));

  const double beta = n / kern.partial_files;
  r.quadratic_residual = k * beta * r.xbar * r.xbar -
                         (p_tilde + k * (1.0 + beta)) * r.xbar +
                         k * (1.0 + beta * r.variance);

  r.xbar_bound = xbar_lower_bound(p, n, k, alpha);
  r.uncached_demand = k * (1.0 - r.xbar);
  r.uncached_bound = uncached_demand_bound(n, alpha);

  const int first_recurrent = (k + 1) / 2 - 1;
  for (int x = 0; x < first_recurrent; ++x)
    r.transient_mass += pi(x);
  return r;
}

/// Occupation frequencies of X_t under the coded random-eviction policy itself
/// (full file-level simulation), for comparison with the exact distribution.
inline Eigen::VectorXd simulate_occupation(int catalog_size, int num_users,
                                           double alpha, double p,
                                           std::size_t steps,
                                           std::uint64_t seed,
                                           std::size_t burn_in = 10'000) {
  SystemParams params{num_users, catalog_size, 1.0, alpha, p};
  params.validate();
  const RngStreams streams(seed);
  CatalogState catalog(static_cast<std::size_t>(catalog_size), p);
  Rng catalog_rng = streams.stream("catalog");
  Rng demand_rng = streams.stream("demand");
  PartialCache cache(static_cast<std::size_t>(num_users), params.memory,
                     params.partial_files(),
                     initial_partial_files(&catalog, params.partial_files()));
  CodedRandomEviction policy(std::move(cache), streams.stream("eviction"),
                             &catalog);

  Eigen::VectorXd counts = Eigen::VectorXd::Zero(catalog_size + 1);
  for (std::size_t t = 1; t <= burn_in + steps; ++t) {
    const auto demands =
        draw_demands(catalog, static_cast<std::size_t>(num_users), demand_rng);
    const auto out = policy.step(demands, t);
    policy.record_departure(catalog.advance(catalog_rng));
    if (t > burn_in)
      counts(out.correct) += 1.0;
  }
  return counts / static_cast<double>(steps);
}

inline double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return 0.5 * (a - b).cwiseAbs().sum();
}

} // namespace occ::oracle
