#pragma once

// Simulation runner: drives the popular-set process (or a replayed trace)
// through a policy, estimates the long-term average rate from post-burn-in
// slots with batch-means standard errors, and checks the online rate bounds.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "occache/dynamics.hpp"
#include "occache/formulas.hpp"
#include "occache/policies.hpp"
#include "occache/rng.hpp"
#include "occache/trace.hpp"

namespace occ {

// Largest K accepted in bit-exact mode (2^K subsets per slot).
inline constexpr int kMaxBitExactUsers = 8;

struct RunConfig {
  SystemParams params{30, 1000, 250.0, 1.4, 0.1};
  Policy policy = Policy::CodedLrs;
  RateMode mode = RateMode::Analytic;
  std::size_t file_bits = 0; // F, bit-exact only
  std::size_t horizon = 100'000;
  std::size_t burn_in = 10'000;
  std::uint64_t seed = 1;
  std::shared_ptr<const trace::DemandTrace> trace; // replay instead of synthetic demands
  bool refresh_on_hit = true;
  bool keep_series = false;

  void validate() const {
    params.validate();
    if (burn_in >= horizon)
      throw std::invalid_argument("burn-in must be smaller than T");
    if (mode == RateMode::BitExact) {
      if (file_bits == 0)
        throw std::invalid_argument("bit-exact mode requires F > 0");
      if (params.num_users > kMaxBitExactUsers)
        throw std::invalid_argument("bit-exact mode supports K <= " +
                                    std::to_string(kMaxBitExactUsers));
      if (policy != Policy::CodedLrs && policy != Policy::RandomCoded)
        throw std::invalid_argument("bit-exact mode applies to coded policies only");
    }
    if (trace) {
      if (trace->num_caches != static_cast<std::size_t>(params.num_users))
        throw std::invalid_argument(
            "trace has K=" + std::to_string(trace->num_caches) +
            " but the configuration has K=" + std::to_string(params.num_users));
      if (trace->slots.empty())
        throw std::invalid_argument("trace has no slots");
    }
  }
};

struct RunResult {
  Policy policy = Policy::CodedLrs;
  double memory = 0.0;
  double rate = 0.0;      // mean R_t over post-burn-in slots
  double std_error = 0.0; // batch means
  double mean_uncached = 0.0;
  std::size_t horizon = 0;
  std::size_t burn_in = 0;
  std::uint64_t seed = 0;
  std::vector<SlotOutcome> series; // all slots, when requested
};

struct BatchMeans {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t batches = 0;
};

/// Mean and batch-means standard error of a (possibly autocorrelated) series.
inline BatchMeans batch_means(std::span<const double> x, std::size_t batches = 32) {
  BatchMeans out;
  if (x.empty())
    return out;
  double sum = 0.0;
  for (double v : x)
    sum += v;
  out.mean = sum / static_cast<double>(x.size());
  batches = std::min(batches, x.size() / 2);
  if (batches < 2)
    return out;
  const std::size_t size = x.size() / batches;
  const std::size_t skip = x.size() - size * batches; // drop the oldest remainder
  std::vector<double> means(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < size; ++i)
      means[b] += x[skip + b * size + i];
    means[b] /= static_cast<double>(size);
  }
  double grand = 0.0;
  for (double m : means)
    grand += m;
  grand /= static_cast<double>(batches);
  double ss = 0.0;
  for (double m : means)
    ss += (m - grand) * (m - grand);
  out.std_error = std::sqrt(ss / static_cast<double>(batches - 1) /
                            static_cast<double>(batches));
  out.batches = batches;
  return out;
}

/// One run: slot order is demands, delivery, cache update, catalog step.
inline RunResult run(const RunConfig& config) {
  config.validate();
  const RngStreams streams(config.seed);
  PolicyOptions options;
  options.mode = config.mode;
  options.refresh_on_hit = config.refresh_on_hit;
  options.bitexact.file_bits = config.file_bits;
  options.bitexact.content_seed = streams.stream("content")();

  const std::size_t users = static_cast<std::size_t>(config.params.num_users);
  std::size_t horizon = config.horizon;
  std::optional<CatalogState> catalog;
  if (config.trace) {
    horizon = std::min(horizon, config.trace->slots.size());
    if (config.burn_in >= horizon)
      throw std::invalid_argument("burn-in must be smaller than the trace length");
  } else {
    catalog.emplace(static_cast<std::size_t>(config.params.catalog_size),
                    config.params.arrival_prob);
  }
  Rng catalog_rng = streams.stream("catalog");
  Rng demand_rng = streams.stream("demand");
  auto policy = initialize_policy(config.params, catalog ? &*catalog : nullptr,
                                  config.policy, streams, options);

  RunResult result;
  result.policy = config.policy;
  result.memory = config.params.memory;
  result.horizon = horizon;
  result.burn_in = config.burn_in;
  result.seed = config.seed;
  if (config.keep_series)
    result.series.reserve(horizon);

  std::vector<double> rates;
  rates.reserve(horizon - config.burn_in);
  double uncached = 0.0;
  for (std::size_t t = 1; t <= horizon; ++t) {
    const DemandVector demands = catalog
                                     ? draw_demands(*catalog, users, demand_rng)
                                     : config.trace->demands(t - 1);
    SlotOutcome out = policy.step(demands, t);
    if (catalog)
      out.departure_hit = policy.record_departure(catalog->advance(catalog_rng));
    if (t > config.burn_in) {
      rates.push_back(out.rate);
      uncached += out.uncached;
    }
    if (config.keep_series)
      result.series.push_back(out);
  }
  const auto bm = batch_means(rates);
  result.rate = bm.mean;
  result.std_error = bm.std_error;
  result.mean_uncached = uncached / static_cast<double>(rates.size());
  return result;
}

/// Inclusive range "start:stop:step", a comma list, or a single value.
inline std::vector<double> parse_memory_list(std::string_view spec) {
  const auto number = [](std::string_view s) {
    const std::string str(trace::detail::trim(s));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(str, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != str.size())
      throw std::invalid_argument("bad memory value '" + str + "'");
    return v;
  };
  std::vector<double> out;
  if (spec.find(':') != std::string_view::npos) {
    const auto parts = trace::detail::split(spec, ':');
    if (parts.size() != 3)
      throw std::invalid_argument("memory range must be start:stop:step");
    const double start = number(parts[0]);
    const double stop = number(parts[1]);
    const double step = number(parts[2]);
    if (!(step > 0.0) || stop < start)
      throw std::invalid_argument("memory range needs step > 0 and stop >= start");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
    for (std::size_t i = 0; i <= count; ++i)
      out.push_back(start + static_cast<double>(i) * step);
    return out;
  }
  for (auto part : trace::detail::split(spec, ','))
    out.push_back(number(part));
  return out;
}

/// One run per (policy, M), all sharing the seed and hence the demand stream.
/// Points run on up to `threads` worker threads; results are in input order.
inline std::vector<RunResult> sweep(const RunConfig& base, std::span<const Policy> policies,
                                    std::span<const double> memories,
                                    unsigned threads = 0) {
  std::vector<RunConfig> points;
  for (Policy policy : policies)
    for (double m : memories) {
      RunConfig c = base;
      c.policy = policy;
      c.params.memory = m;
      c.validate();
      points.push_back(std::move(c));
    }
  std::vector<RunResult> results(points.size());
  if (threads == 0)
    threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(points.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < points.size(); ++i)
      results[i] = run(points[i]);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < threads; ++w)
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < points.size(); i = next++)
            results[i] = run(points[i]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (const auto& e : errors)
    if (e)
      std::rethrow_exception(e);
  return results;
}

struct BoundVerdict {
  Policy policy = Policy::CodedLrs;
  double memory = 0.0;
  double rate = 0.0;
  double std_error = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool lower_ok = false;
  bool upper_ok = false;
};

/// Compare each average rate with R/12 and 2R + 6, R = expected_rate(M, N, K),
/// allowing three standard errors of Monte Carlo noise. Uncoded policies are
/// skipped. Failures are reported, not thrown.
inline std::vector<BoundVerdict> check_bounds(std::span<const RunResult> results,
                                              const SystemParams& params) {
  std::vector<BoundVerdict> out;
  for (const auto& r : results) {
    if (r.policy != Policy::CodedLrs && r.policy != Policy::RandomCoded)
      continue;
    SystemParams p = params;
    p.memory = r.memory;
    const auto b = online_rate_bounds(p);
    BoundVerdict v;
    v.policy = r.policy;
    v.memory = r.memory;
    v.rate = r.rate;
    v.std_error = r.std_error;
    v.lower = b.lower;
    v.upper = b.upper;
    v.upper_ok = r.rate <= b.upper + 3.0 * r.std_error;
    v.lower_ok = r.rate >= b.lower - 3.0 * r.std_error;
    out.push_back(v);
  }
  return out;
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline void write_csv(std::ostream& out, std::span<const RunResult> results) {
  out << "policy,M,rate,stderr,T,seed\n";
  for (const auto& r : results)
    out << to_string(r.policy) << ',' << format_number(r.memory) << ','
        << format_number(r.rate) << ',' << format_number(r.std_error) << ','
        << r.horizon << ',' << r.seed << '\n';
}

inline nlohmann::ordered_json to_json(const RunResult& r) {
  nlohmann::ordered_json j;
  j["policy"] = std::string(to_string(r.policy));
  j["M"] = r.memory;
  j["rate"] = r.rate;
  j["stderr"] = r.std_error;
  j["T"] = r.horizon;
  j["seed"] = r.seed;
  if (!r.series.empty()) {
    auto& s = j["series"];
    s = nlohmann::ordered_json::array();
    for (const auto& o : r.series)
      s.push_back({{"rate", o.rate},
                   {"Y", o.uncached},
                   {"X", o.correct},
                   {"W", o.wrong_evictions},
                   {"U", o.departure_hit}});
  }
  return j;
}

inline nlohmann::ordered_json to_json(std::span<const RunResult> results) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : results)
    arr.push_back(to_json(r));
  return arr;
}

inline nlohmann::ordered_json to_json(std::span<const BoundVerdict> verdicts) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& v : verdicts)
    arr.push_back({{"policy", std::string(to_string(v.policy))},
                   {"M", v.memory},
                   {"rate", v.rate},
                   {"stderr", v.std_error},
                   {"lower", v.lower},
                   {"upper", v.upper},
                   {"lower_ok", v.lower_ok},
                   {"upper_ok", v.upper_ok}});
  return arr;
}

} // namespace occ
