// re_sysid: estimate, online, sweep and simulate front end.
//
// Exit codes: 0 success, 2 usage error (bad flags, scenario or input file),
// 3 numerical infeasibility (no feasible model, singular slice, too few
// samples), 4 I/O error.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "resysid/resysid.hpp"

namespace fs = std::filesystem;
using namespace resysid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitIo = 4;

struct Common {
  std::string scenario;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int jobs = 0;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<double> epsilon;
  std::vector<double> snr_db;
  std::optional<int> trials;
  std::optional<double> sigma_known;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--scenario", c.scenario, "Scenario file (flat key = value)")->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "Output directory")->capture_default_str();
  app->add_option("--seed", c.seed, "Master seed (random and logged when omitted)");
  app->add_option("--jobs", c.jobs, "Worker threads (0: machine parallelism)")->check(CLI::NonNegativeNumber);
  app->add_option("--alpha", c.alpha, "Validation parameter alpha")->check(CLI::PositiveNumber);
  app->add_option("--beta", c.beta, "Confidence parameter beta")->check(CLI::PositiveNumber);
  app->add_option("--epsilon", c.epsilon, "Stopping threshold in (0, 1)");
  app->add_option("--snr-db", c.snr_db, "SNR list in dB (overrides the scenario)")->delimiter(',');
  app->add_option("--trials", c.trials, "Monte-Carlo trials")->check(CLI::PositiveNumber);
  app->add_option("--sigma-known", c.sigma_known, "Known noise variance; collapses the variance grid")
      ->check(CLI::PositiveNumber);
}

Scenario resolve(const Common& c) {
  Scenario s = c.scenario.empty() ? Scenario{} : load_scenario(c.scenario);
  if (c.seed) {
    s.seed = *c.seed;
  } else {
    s.seed = (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
    spdlog::info("no --seed given; using seed {}", s.seed);
  }
  if (c.alpha) s.params.alpha = *c.alpha;
  if (c.beta) s.params.beta = *c.beta;
  if (c.epsilon) s.epsilon = *c.epsilon;
  if (!c.snr_db.empty()) s.snr_db = c.snr_db;
  if (c.trials) s.trials = *c.trials;
  s.validate();
  return s;
}

fs::path out_dir(const Common& c) {
  const fs::path p(c.out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create output directory '" + c.out + "': " + ec.message());
  return p;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("re_sysid");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("RE_SYSID_LOG")) {
    const auto lvl = spdlog::level::from_str(env);
    if (lvl == spdlog::level::off && std::string(env) != "off")
      spdlog::warn("RE_SYSID_LOG='{}' not recognized; keeping info", env);
    else
      spdlog::set_level(lvl);
  }
}

// ---------------------------------------------------------------------------

struct EstimateOpts {
  std::string u_path;
  std::string y_path;
  std::optional<int> ambient;
  std::optional<int> d_min;
  std::optional<int> d_max;
  std::optional<double> per_decade;
  bool full_grid = false;
};

int cmd_estimate(const Common& c, const EstimateOpts& o) {
  Scenario sc = resolve(c);
  if (o.ambient) sc.ambient = *o.ambient;
  if (o.d_min) sc.d_lo = *o.d_min;
  if (o.d_max) sc.d_hi = *o.d_max + 1;
  if (o.per_decade) sc.grid_per_decade = *o.per_decade;

  std::optional<Signal> u, y;
  std::optional<double> sigma2 = c.sigma_known;
  if (!o.u_path.empty() || !o.y_path.empty()) {
    if (o.u_path.empty() || o.y_path.empty()) throw InvalidArgument("estimate: give both --u and --y");
    u = read_signal(o.u_path);
    y = read_signal(o.y_path);
    if (u->size() != y->size())
      throw InvalidArgument("estimate: u has " + std::to_string(u->size()) + " samples but y has " +
                            std::to_string(y->size()));
    if (sc.ambient > u->size()) sc.ambient = u->size();
  } else {
    const auto data = synthesize(sc.truth(), sc.samples, sc.snr_db.front(), sc.seed, 0);
    spdlog::info("synthesized {} system, N = {}, SNR = {} dB, true delay {}, true length {}",
                 sc.system == SystemKind::fir ? "FIR" : "IIR", sc.samples, sc.snr_db.front(), sc.true_delay(),
                 sc.true_length());
    u = data.u;
    y = data.y;
    if (!sigma2 && sc.sigma_known) sigma2 = data.sigma2;
  }
  sc.validate();

  SelectionConfig cfg;
  cfg.ambient = sc.ambient;
  cfg.d_lo = sc.d_lo;
  cfg.d_hi = sc.delay_hi();
  cfg.params = sc.params;
  cfg.sigma_known = sigma2.has_value();
  cfg.sigma2_grid = sigma2 ? std::vector<double>{*sigma2} : scenario_variance_grid(sc, *y);
  spdlog::debug("{} variance values, delays [{}, {}), M = {}", cfg.sigma2_grid.size(), cfg.d_lo, cfg.d_hi, cfg.ambient);
  const ResidualGrid grid = residual_grid(*u, *y, cfg.ambient, cfg.d_lo, cfg.d_hi);
  const Selection sel = select_model(*u, *y, grid, cfg);
  for (const auto& r : sel.rejections)
    spdlog::debug("sigma^2 = {:.6g} rejected at (d={}, m={}): {}", r.sigma2, r.d, r.m, to_string(r.reason));

  const fs::path dir = out_dir(c);
  {
    auto out = open_csv((dir / "theta.csv").string());
    out << "n,theta\n";
    const Eigen::VectorXd th = sel.model.embedded(sc.ambient);
    for (int n = 0; n < th.size(); ++n) out << n << ',' << fmt6(th[n]) << '\n';
  }
  {
    auto out = open_csv((dir / "bound_grid.csv").string());
    out << "sigma2,d,m,x,L,U,z_lo,z_hi,re_hi\n";
    const std::vector<double> variances = o.full_grid ? cfg.sigma2_grid : std::vector<double>{sel.sigma2_used};
    for (double s2 : variances)
      for (const auto& g : bound_grid(grid, s2, cfg.params))
        out << fmt6(g.sigma2) << ',' << g.d << ',' << g.m << ',' << fmt6(g.x) << ',' << fmt6(g.bounds.lower) << ','
          << fmt6(g.bounds.upper) << ',' << fmt6(g.bounds.z_lo) << ',' << fmt6(g.bounds.z_hi) << ','
            << fmt6(g.bounds.re_hi) << '\n';
  }
  std::cout << "d* = " << sel.d << "\n"
            << "m* = " << sel.m << "\n"
            << "sigma2* = " << (sel.sigma2 ? fmt6(*sel.sigma2) : fmt6(sel.sigma2_used) + " (given)") << "\n"
            << "re_hi = " << fmt6(sel.re_hi) << "\n"
            << "z_hi = " << fmt6(sel.bounds.z_hi) << "\n"
            << "rejected variances = " << sel.rejections.size() << " of " << cfg.sigma2_grid.size() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct OnlineOpts {
  std::string u_path;
  std::string y_path;
  std::string sigma_mode = "auto";
  std::optional<int> warm_start;
};

int cmd_online(const Common& c, const OnlineOpts& o) {
  const Scenario sc = resolve(c);
  std::optional<Signal> u, y;
  std::optional<double> sigma2 = c.sigma_known;
  if (!o.u_path.empty() || !o.y_path.empty()) {
    if (o.u_path.empty() || o.y_path.empty()) throw InvalidArgument("online: give both --u and --y");
    u = read_signal(o.u_path);
    y = read_signal(o.y_path);
    if (u->size() != y->size()) throw InvalidArgument("online: u and y lengths differ");
  } else {
    const auto data = synthesize(sc.truth(), sc.samples, sc.snr_db.front(), sc.seed, 0);
    u = data.u;
    y = data.y;
    if (!sigma2 && sc.sigma_known) sigma2 = data.sigma2;
  }

  OnlineConfig cfg;
  cfg.ambient = sc.ambient;
  cfg.d_lo = sc.d_lo;
  cfg.d_hi = sc.delay_hi();
  cfg.params = sc.params;
  cfg.warm_start = o.warm_start.value_or(sc.warm_start);
  cfg.snr_lo_db = sc.grid_snr_lo_db;
  cfg.snr_hi_db = sc.grid_snr_hi_db;
  cfg.per_decade = sc.grid_per_decade;
  cfg.stop = StoppingRule(sc.epsilon);
  std::string mode = o.sigma_mode;
  if (mode == "auto") mode = sigma2 ? "known" : "fixed";
  if (mode == "known") {
    if (!sigma2) throw InvalidArgument("online: --sigma-mode known needs a known variance");
    cfg.sigma_mode = SigmaMode::known;
    cfg.sigma2 = *sigma2;
  } else if (mode == "fixed") {
    cfg.sigma_mode = SigmaMode::fixed_after_warm_start;
  } else {
    cfg.sigma_mode = SigmaMode::grid_each_step;
  }

  const OnlineRun run = run_online(*u, *y, cfg, sc.true_delay(), sc.true_length(), true);
  const fs::path dir = out_dir(c);
  write_online_trace((dir / "online_trace.csv").string(), run.steps);
  const auto& last = run.steps.back();
  if (last.stopped)
    std::cout << "stopped at N = " << last.samples << ": ratio " << fmt6(last.ratio) << " < epsilon "
              << fmt6(sc.epsilon) << " with (d*, m*) = (" << last.d << ", " << last.m << ")\n";
  else
    std::cout << "data ended at N = " << last.samples << " without reaching epsilon " << fmt6(sc.epsilon)
              << " (last ratio " << fmt6(last.ratio) << ", (d*, m*) = (" << last.d << ", " << last.m << "))\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_sweep(const Common& c, const std::vector<std::string>& method_names, bool dump_trials) {
  if (c.sigma_known) throw InvalidArgument("sweep: use sigma_known in the scenario instead of --sigma-known");
  const Scenario sc = resolve(c);
  std::vector<Method> methods;
  for (const auto& n : method_names) methods.push_back(parse_method(n));
  if (methods.empty()) throw InvalidArgument("sweep: no methods");
  const int jobs = c.jobs > 0 ? c.jobs : default_jobs();
  spdlog::info("sweep: {} SNR values x {} trials, {} method(s), {} job(s)", sc.snr_db.size(), sc.trials,
               methods.size(), jobs);
  const MonteCarloResult res = run_monte_carlo(sc, methods, jobs);
  int failures = 0;
  for (const auto& a : res.aggregates) failures += a.failures;
  if (failures) spdlog::warn("{} trial(s) failed and were left out of the tables", failures);
  const fs::path dir = out_dir(c);
  write_delay_table((dir / "delay_table.csv").string(), res.aggregates);
  write_joint_table((dir / "joint_table.csv").string(), res.aggregates);
  write_order_table((dir / "order_table.csv").string(), res.aggregates);
  if (dump_trials) write_trials((dir / "trials.csv").string(), res.trials);
  for (const auto& a : res.aggregates)
    std::cout << fmt6(a.snr_db) << " dB " << to_string(a.method) << ": d* " << fmt6(a.mean_d) << " (sd "
              << fmt6(a.sd_d) << "), m* " << fmt6(a.mean_m) << ", rmse " << fmt6(a.mean_rmse) << "\n";
  spdlog::info("sweep finished in {:.1f} s", res.seconds);
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Common& c, int trial) {
  const Scenario sc = resolve(c);
  const ImpulseResponse truth = sc.truth();
  const auto data = synthesize(truth, sc.samples, sc.snr_db.front(), sc.seed, trial);
  const fs::path dir = out_dir(c);
  write_signal((dir / "u.csv").string(), data.u.vector());
  write_signal((dir / "y.csv").string(), data.y.vector());
  write_signal((dir / "ybar.csv").string(), data.ybar.vector());
  write_signal((dir / "theta_true.csv").string(), truth.embedded(sc.ambient));
  std::cout << "sigma2 = " << fmt6(data.sigma2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Impulse response estimation with joint delay, length and noise variance selection"};
  app.require_subcommand(1);

  Common c;
  EstimateOpts est;
  auto* estimate = app.add_subcommand("estimate", "Select (d, m, sigma^2) and fit on one data set");
  add_common(estimate, c);
  estimate->add_option("--u", est.u_path, "Input signal file")->check(CLI::ExistingFile);
  estimate->add_option("--y", est.y_path, "Output signal file")->check(CLI::ExistingFile);
  estimate->add_option("--ambient", est.ambient, "Largest length M")->check(CLI::PositiveNumber);
  estimate->add_option("--d-min", est.d_min, "Smallest delay")->check(CLI::NonNegativeNumber);
  estimate->add_option("--d-max", est.d_max, "Largest delay")->check(CLI::NonNegativeNumber);
  estimate->add_option("--grid-per-decade", est.per_decade, "Variance grid density")->check(CLI::PositiveNumber);
  estimate->add_flag("--full-grid", est.full_grid, "Write bounds for every variance, not only the selected one");

  OnlineOpts onl;
  auto* online = app.add_subcommand("online", "Stream samples and stop when the bound ratio drops below epsilon");
  add_common(online, c);
  online->add_option("--u", onl.u_path, "Input signal file")->check(CLI::ExistingFile);
  online->add_option("--y", onl.y_path, "Output signal file")->check(CLI::ExistingFile);
  online->add_option("--sigma-mode", onl.sigma_mode, "known, fixed (after warm start), grid (every step)")
      ->check(CLI::IsMember({"auto", "known", "fixed", "grid"}))
      ->capture_default_str();
  online->add_option("--warm-start", onl.warm_start, "Warm-start samples (default M + 10)")->check(CLI::PositiveNumber);

  std::vector<std::string> methods{"re", "aic", "bic"};
  bool dump_trials = false;
  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo tables over the SNR list");
  add_common(sweep, c);
  sweep->add_option("--methods", methods, "Comma-separated subset of re,aic,bic")
      ->delimiter(',')
      ->check(CLI::IsMember({"re", "aic", "bic"}));
  sweep->add_flag("--dump-trials", dump_trials, "Also write per-trial rows to trials.csv");

  int trial = 0;
  auto* simulate = app.add_subcommand("simulate", "Write synthetic u, y, ybar and the true response");
  add_common(simulate, c);
  simulate->add_option("--trial", trial, "Trial index (selects the random streams)")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*estimate) return cmd_estimate(c, est);
    if (*online) return cmd_online(c, onl);
    if (*sweep) return cmd_sweep(c, methods, dump_trials);
    if (*simulate) return cmd_simulate(c, trial);
  } catch (const NoFeasibleModel& e) {
    spdlog::error("{}", e.what());
    for (const auto& r : e.reasons()) spdlog::error("  {}", r);
    return kExitInfeasible;
  } catch (const SingularSystem& e) {
    spdlog::error("{}", e.what());
    return kExitInfeasible;
  } catch (const InsufficientData& e) {
    spdlog::error("{}", e.what());
    return kExitInfeasible;
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const InvalidArgument& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
