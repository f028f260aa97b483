// occache: simulate online coded caching, sweep cache sizes, verify the
// analysis, and ingest ratings logs into demand traces.
//
//   occache simulate --policy lrs-coded --M 250
//   occache sweep --policy lru,lrs-coded --M 0:1000:50 --format csv
//   occache verify --grid small
//   occache ingest --ratings ratings.csv --releases movies.csv --K 100 --output t.trace
//   occache figures --figure 2
//
// Exit status: 0 ok, 1 a verification or bound check failed, 2 usage or input
// error, 3 internal error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "occache/occache.hpp"

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 3;

struct Options {
  int num_users = 30;
  int catalog_size = 1000;
  double arrival_prob = 0.1;
  double alpha = 1.4;
  std::string memory = "250";
  std::string policy = "lrs-coded";
  std::string mode = "analytic";
  std::size_t file_bits = 0;
  std::size_t horizon = 100'000;
  std::size_t burn_in = 10'000;
  std::uint64_t seed = 1;
  std::string trace_path;
  std::string format = "csv";
  std::string output;
  bool series = false;
  bool no_refresh_on_hit = false;
  bool check_bounds = false;
  unsigned threads = 0;

  // verify
  std::string grid = "small";

  // ingest
  std::string ratings_path;
  std::string releases_path;
  int rating_year = 2005;
  std::string release_years = "2004,2005";
  std::string assignment = "hash";
  std::string popularity_movie;

  // figures
  int figure = 2;
};

std::vector<occ::Policy> parse_policies(const std::string& list) {
  std::vector<occ::Policy> out;
  for (auto name : occ::trace::detail::split(list, ','))
    out.push_back(occ::parse_policy(occ::trace::detail::trim(name)));
  return out;
}

occ::RunConfig make_config(const Options& o) {
  occ::RunConfig c;
  c.params = {o.num_users, o.catalog_size, 0.0, o.alpha, o.arrival_prob};
  c.mode = occ::parse_mode(o.mode);
  c.file_bits = o.file_bits;
  c.horizon = o.horizon;
  c.burn_in = o.burn_in;
  c.seed = o.seed;
  c.refresh_on_hit = !o.no_refresh_on_hit;
  c.keep_series = o.series;
  if (!o.trace_path.empty()) {
    std::ifstream in(o.trace_path);
    if (!in)
      throw std::invalid_argument("cannot open trace " + o.trace_path);
    c.trace = std::make_shared<occ::trace::DemandTrace>(occ::trace::read_trace(in));
  }
  return c;
}

class Output {
public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_)
        throw std::invalid_argument("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
  std::ofstream file_;
};

int emit_results(const Options& o, const occ::RunConfig& config,
                 const std::vector<occ::RunResult>& results) {
  Output out(o.output);
  int status = 0;
  std::vector<occ::BoundVerdict> verdicts;
  if (o.check_bounds) {
    verdicts = occ::check_bounds(results, config.params);
    for (const auto& v : verdicts)
      if (!v.upper_ok || !v.lower_ok)
        status = kExitCheckFailed;
  }
  if (o.format == "json") {
    nlohmann::ordered_json j;
    j["results"] = occ::to_json(results);
    if (o.check_bounds)
      j["bounds"] = occ::to_json(verdicts);
    out.stream() << j.dump(2) << '\n';
  } else {
    occ::write_csv(out.stream(), results);
    for (const auto& v : verdicts)
      std::cerr << "bounds " << occ::to_string(v.policy) << " M=" << v.memory
                << " rate=" << v.rate << " in [" << v.lower << ", " << v.upper
                << "]: " << (v.lower_ok && v.upper_ok ? "pass" : "FAIL") << '\n';
  }
  return status;
}

int cmd_sweep(const Options& o) {
  auto config = make_config(o);
  const auto policies = parse_policies(o.policy);
  const auto memories = occ::parse_memory_list(o.memory);
  const auto results = occ::sweep(config, policies, memories, o.threads);
  return emit_results(o, config, results);
}

int cmd_verify(const Options& o) {
  if (o.grid != "small" && o.grid != "full")
    throw std::invalid_argument("--grid must be small or full");
  const auto report = occ::run_verification(o.grid == "full", o.seed);
  Output out(o.output);
  if (o.format == "json") {
    out.stream() << occ::to_json(report).dump(2) << '\n';
  } else {
    out.stream() << "check,passed,detail\n";
    for (const auto& r : report.steady_state) {
      std::ostringstream name;
      name << "steady-state N=" << r.catalog_size << " K=" << r.num_users
           << " alpha=" << r.alpha << " p=" << r.p;
      out.stream() << name.str() << ',' << (r.passes() ? "true" : "false")
                   << ",xbar=" << r.xbar << " bound=" << r.xbar_bound
                   << " residual=" << r.residual << '\n';
    }
    for (const auto& c : report.checks)
      out.stream() << c.name << ',' << (c.passed ? "true" : "false") << ','
                   << c.detail << '\n';
  }
  return report.passed() ? 0 : kExitCheckFailed;
}

int cmd_ingest(const Options& o) {
  if (o.ratings_path.empty() || o.releases_path.empty())
    throw std::invalid_argument("ingest needs --ratings and --releases");
  std::ifstream ratings_in(o.ratings_path);
  std::ifstream releases_in(o.releases_path);
  if (!ratings_in || !releases_in)
    throw std::invalid_argument("cannot open ratings or release table");
  const auto records = occ::trace::read_ratings(ratings_in);
  const auto table = occ::trace::read_release_table(releases_in);
  std::set<int> years;
  for (auto y : occ::trace::detail::split(o.release_years, ',')) {
    int v = 0;
    if (!occ::trace::detail::parse_int(y, v))
      throw std::invalid_argument("bad --release-years");
    years.insert(v);
  }
  occ::trace::FilterStats stats;
  const auto filtered =
      occ::trace::filter_ratings(records, o.rating_year, years, table, &stats);
  if (stats.missing_release)
    std::cerr << "warning: " << stats.missing_release
              << " ratings for movies missing from the release table dropped\n";
  if (stats.before_release)
    std::cerr << "warning: " << stats.before_release
              << " ratings dated before the release year dropped\n";

  if (!o.popularity_movie.empty()) {
    const auto series =
        occ::trace::popularity_series(filtered, o.popularity_movie, o.rating_year, table);
    Output out(o.output);
    out.stream() << "week,count\n";
    for (std::size_t w = 0; w < series.size(); ++w)
      out.stream() << w + 1 << ',' << series[w] << '\n';
    return 0;
  }

  const auto trace = occ::trace::build_trace(
      filtered, static_cast<std::size_t>(o.num_users),
      occ::trace::parse_assignment(o.assignment));
  std::set<std::string> movies;
  for (const auto& r : filtered)
    movies.insert(r.movie_id);
  std::cerr << "kept " << filtered.size() << " ratings for " << movies.size()
            << " movies, " << trace.slots.size() << " slots\n";
  Output out(o.output);
  occ::trace::write_trace(out.stream(), trace);
  return 0;
}

int cmd_figures(Options o) {
  if (o.figure == 2) {
    o.policy = "lru,lrs-uncoded,lrs-coded";
  } else if (o.figure == 4) {
    if (o.trace_path.empty())
      throw std::invalid_argument("figure 4 needs --trace (see `occache ingest`)");
    o.policy = "lru,lrs-coded";
  } else {
    throw std::invalid_argument("--figure must be 2 or 4");
  }
  return cmd_sweep(o);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online coded caching simulator"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value file; command-line flags take precedence");
  Options o;

  app.add_option("--K", o.num_users, "Number of users (caches)");
  app.add_option("--N", o.catalog_size, "Number of popular files");
  app.add_option("--p", o.arrival_prob, "Arrival probability per slot");
  app.add_option("--alpha", o.alpha, "Overprovisioning N'/N for coded policies");
  app.add_option("--M", o.memory, "Cache size in files: value, list a,b,c or range start:stop:step");
  app.add_option("--policy", o.policy, "lru | lrs-uncoded | lrs-coded | random-coded (comma list for sweeps)");
  app.add_option("--mode", o.mode, "analytic | bitexact");
  app.add_option("--F", o.file_bits, "File size in bits (bit-exact mode)");
  app.add_option("--T", o.horizon, "Number of slots");
  app.add_option("--burn-in", o.burn_in, "Slots excluded from the average");
  app.add_option("--seed", o.seed, "Run seed");
  app.add_option("--trace", o.trace_path, "Replay a demand trace instead of synthetic demands");
  app.add_option("--format", o.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--output", o.output, "Output file (default: standard output)");
  app.add_flag("--series", o.series, "Include per-slot series (JSON)");
  app.add_flag("--no-refresh-on-hit", o.no_refresh_on_hit,
               "Uncoded LRS: do not refresh the send time of cache hits");
  app.add_flag("--check-bounds", o.check_bounds, "Check R/12 <= rate <= 2R+6 per point");
  app.add_option("--threads", o.threads, "Worker threads for sweeps (0 = all cores)");

  auto* simulate = app.add_subcommand("simulate", "Run one configuration");
  auto* sweep = app.add_subcommand("sweep", "Run every (policy, M) pair on common random numbers");
  auto* verify = app.add_subcommand("verify", "Exact steady-state, codec and bound self-checks");
  verify->add_option("--grid", o.grid, "small | full");
  auto* ingest = app.add_subcommand("ingest", "Build a demand trace from a ratings log");
  ingest->add_option("--ratings", o.ratings_path, "Ratings file");
  ingest->add_option("--releases", o.releases_path, "Release table: movie_id,year,title");
  ingest->add_option("--rating-year", o.rating_year, "Keep ratings from this year");
  ingest->add_option("--release-years", o.release_years, "Keep movies released in these years");
  ingest->add_option("--assignment", o.assignment, "hash | round_robin");
  ingest->add_option("--popularity", o.popularity_movie,
                     "Emit weekly rating counts for this movie instead of a trace");
  auto* figures = app.add_subcommand("figures", "Emit the cache-size sweep tables");
  figures->add_option("--figure", o.figure, "2 (synthetic) or 4 (trace)");
  for (auto* sub : {simulate, sweep, verify, ingest, figures})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*simulate) {
      if (o.memory.find_first_of(":,") != std::string::npos)
        throw std::invalid_argument("simulate takes a single --M; use sweep for lists");
      return cmd_sweep(o);
    }
    if (*sweep)
      return cmd_sweep(o);
    if (*verify)
      return cmd_verify(o);
    if (*ingest)
      return cmd_ingest(o);
    if (*figures)
      return cmd_figures(o);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const occ::trace::parse_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}
