#pragma once

// Closed-form rate expressions for decentralized coded caching and the
// analytic bounds used to check the online scheme.
//
// All rates are in files per slot (bits on the shared link divided by F).

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace occ {

struct SystemParams {
  int num_users = 1;         // K
  int catalog_size = 1;      // N
  double memory = 0.0;       // M, in files
  double overprovision = 1.0; // alpha, N' = ceil(alpha * N)
  double arrival_prob = 0.0;  // p

  void validate() const {
    if (num_users < 1)
      throw std::invalid_argument("K must be positive");
    if (catalog_size < 1)
      throw std::invalid_argument("N must be positive");
    if (num_users > catalog_size)
      throw std::invalid_argument(
          "K must not exceed N: demands are drawn without replacement from the "
          "popular set (K=" + std::to_string(num_users) +
          ", N=" + std::to_string(catalog_size) + ")");
    if (!(overprovision >= 1.0))
      throw std::invalid_argument("alpha must be >= 1");
    if (!(memory >= 0.0) || memory > overprovision * catalog_size)
      throw std::invalid_argument("M must lie in [0, alpha*N]");
    if (!(arrival_prob >= 0.0 && arrival_prob <= 1.0))
      throw std::invalid_argument("p must lie in [0, 1]");
  }

  // Number of partially cached files kept by the coded policies.
  [[nodiscard]] std::size_t partial_files() const {
    return static_cast<std::size_t>(
        std::ceil(overprovision * catalog_size - 1e-9));
  }
};

struct RateBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Peak rate of the decentralized scheme with K users, N files and memory M:
/// K (1 - M/N) (N / (K M)) (1 - (1 - M/N)^K).
///
/// The catalog size is real-valued so that alpha*N can be evaluated without
/// rounding. M = 0 gives K and K = 0 gives 0, the continuous limits.
inline double expected_rate(double memory, double catalog_size, int num_users) {
  if (!(catalog_size > 0.0))
    throw std::invalid_argument("expected_rate: N must be positive");
  if (!(memory >= 0.0) || memory > catalog_size)
    throw std::invalid_argument("expected_rate: M must lie in [0, N]");
  if (num_users < 0)
    throw std::invalid_argument("expected_rate: K must be nonnegative");
  if (num_users == 0)
    return 0.0;
  if (memory == 0.0)
    return static_cast<double>(num_users);
  const double q = memory / catalog_size;
  // (N/M - 1) * (1 - (1-q)^K), with expm1/log1p for small q.
  const double miss_all = -std::expm1(num_users * std::log1p(-q));
  return (1.0 / q - 1.0) * miss_all;
}

/// Multicast gain factor (N/(KM)) (1 - (1-M/N)^K); lies in (0, 1] for 0 < M <= N.
inline double global_gain(double memory, double catalog_size, int num_users) {
  if (!(memory > 0.0) || memory > catalog_size || num_users < 1)
    throw std::invalid_argument("global_gain: need 0 < M <= N and K >= 1");
  const double q = memory / catalog_size;
  return -std::expm1(num_users * std::log1p(-q)) / (num_users * q);
}

/// Lower and upper bounds on the optimal online long-term average rate:
/// R/12 <= R* <= 2R + 6 with R = expected_rate(M, N, K).
inline RateBounds online_rate_bounds(const SystemParams& params) {
  // Memory beyond N holds the whole catalog; the rate there is that at M = N.
  const double n = params.catalog_size;
  const double r = expected_rate(std::min(params.memory, n), n,
                                 params.num_users);
  return {r / 12.0, 2.0 * r + 6.0};
}

/// Additive penalty in R(M, alpha N, K) <= 2 R(M, N, K) + penalty, valid for
/// 1 <= alpha < 2.
inline double overprovision_penalty(double alpha) {
  if (!(alpha >= 1.0) || !(alpha < 2.0))
    throw std::invalid_argument("overprovision_penalty: need 1 <= alpha < 2");
  return (alpha - 1.0) / (1.0 - alpha / 2.0);
}

/// Variance-free lower bound on E(X)/N for the stationary random-eviction
/// chain: (p~ + 2K beta - p~ (1+beta)/(1-beta)) / (2K beta), with
/// p~ = p / (1 - p/N) and beta = 1/alpha.
inline double xbar_lower_bound(double p, double catalog_size, int num_users,
                               double alpha) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("xbar_lower_bound: p must lie in [0, 1]");
  if (num_users < 1)
    throw std::invalid_argument("xbar_lower_bound: K must be positive");
  if (!(catalog_size > 1.0) || !(catalog_size > p))
    throw std::invalid_argument("xbar_lower_bound: need N > max(1, p)");
  if (!(alpha > 1.0))
    throw std::invalid_argument("xbar_lower_bound: need alpha > 1 (beta < 1)");
  const double p_tilde = p / (1.0 - p / catalog_size);
  const double beta = 1.0 / alpha;
  const double two_k_beta = 2.0 * num_users * beta;
  return (p_tilde + two_k_beta - p_tilde * (1.0 + beta) / (1.0 - beta)) /
         two_k_beta;
}

/// Bound on the stationary expected number of uncached requests per slot,
/// K (1 - E(X)/N) <= 1 / ((1 - 1/N)(1 - 1/alpha)).
inline double uncached_demand_bound(double catalog_size, double alpha) {
  if (!(catalog_size > 1.0))
    throw std::invalid_argument("uncached_demand_bound: need N >= 2");
  if (!(alpha > 1.0))
    throw std::invalid_argument("uncached_demand_bound: need alpha > 1");
  return 1.0 / ((1.0 - 1.0 / catalog_size) * (1.0 - 1.0 / alpha));
}

} // namespace occ
