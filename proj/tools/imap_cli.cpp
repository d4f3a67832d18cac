// imap: simulate, orthonormalize, represent and verify from a scenario file.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "imap/bundle.hpp"
#include "imap/config.hpp"
#include "imap/errors.hpp"
#include "imap/ortho.hpp"
#include "imap/represent.hpp"
#include "imap/stats.hpp"

namespace fs = std::filesystem;
using namespace imap;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitFlags = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  std::optional<std::string> out;
  int workers = 1;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "scenario file (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "master seed, overrides the file");
  app->add_option("--paths", c.paths, "paths per set (estimation and evaluation), overrides the file");
  app->add_option("--out", c.out, "output directory, overrides the file");
  app->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
}

ScenarioConfig load(const Common& c) {
  auto cfg = ScenarioConfig::load(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.paths) cfg.estimation_paths = cfg.evaluation_paths = *c.paths;
  if (c.out) cfg.output.directory = *c.out;
  cfg.validate();
  return cfg;
}

fs::path out_dir(const ScenarioConfig& cfg) {
  fs::path d(cfg.output.directory);
  fs::create_directories(d);
  return d;
}

void write_file(const fs::path& p, const std::string& header, const std::string& body) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << header << body;
}

std::string header(const ScenarioConfig& cfg) {
  return "# config_hash " + cfg.hash() + "\n# seed " + std::to_string(cfg.seed) + "\n";
}

int cmd_simulate(const Common& c, const std::string& which) {
  const auto cfg = load(c);
  const auto set = which == "evaluation" ? evaluation_set(cfg) : estimation_set(cfg);
  const auto bundle = run_scenario(cfg, set, c.workers);
  const auto dir = out_dir(cfg) / "bundle";
  write_bundle(bundle, dir.string(), cfg.output.max_persisted_paths);
  std::printf("config_hash %s\nseed %llu\npaths %d (persisted %d)\nbundle %s\n", cfg.hash().c_str(),
              static_cast<unsigned long long>(cfg.seed), bundle.n_paths(),
              std::min(bundle.n_paths(), cfg.output.max_persisted_paths), dir.string().c_str());
  return kExitOk;
}

int cmd_basis(const Common& c) {
  const auto cfg = load(c);
  const auto basis = build_basis(cfg.levy, cfg.impulse, cfg.chain, cfg.max_power_order, cfg.max_impulse_order,
                                 cfg.pivot_tol);
  std::ostringstream os;
  for (const auto& t : basis.teugels) os << format_coefficients(t) << '\n';
  for (int i = 0; i < basis.n_states(); ++i) {
    const auto& g = basis.impulse[static_cast<std::size_t>(i)];
    if (g)
      os << format_coefficients(*g) << '\n';
    else
      os << "# impulse state " << i + 1 << ": unreachable, no basis\n\n";
  }
  const auto dir = out_dir(cfg);
  write_file(dir / "coefficients.txt", header(cfg), os.str());
  std::cout << header(cfg) << os.str();
  return kExitOk;
}

int cmd_represent(const Common& c, const std::string& payoff_text, int K, int L, int buckets,
                  double max_error) {
  const auto cfg = load(c);
  const auto payoff = PayoffSpec::parse(payoff_text);
  RepresentOptions opt;
  if (buckets > 0) {
    if (cfg.report_steps % buckets != 0)
      throw ValidationError("represent: --buckets must divide report_steps");
    for (int b = 0; b <= buckets; ++b) opt.edges.push_back(b * (cfg.report_steps / buckets));
  }
  RepresentationEstimate est;
  {
    const auto train = run_scenario(cfg, estimation_set(cfg), c.workers);
    est = estimate_predictable_representation(train, payoff, K, L, opt);
  }
  const auto test = run_scenario(cfg, evaluation_set(cfg), c.workers);
  const auto rep = replicate(est, test, payoff);

  const auto dir = out_dir(cfg);
  write_file(dir / "representation.csv", header(cfg), est.table());
  try {
    write_file(dir / "representation_x.csv", header(cfg), to_x_form(est).table());
  } catch (const UnsupportedError&) {
    // no Psibar^(1) slot to absorb the impulse part
  }
  std::printf("config_hash %s\npayoff %s\nK %d L %d\nin_sample_error %.6g +- %.3g\n"
              "out_of_sample_error %.6g +- %.3g\nmax_condition %.3g\n",
              cfg.hash().c_str(), rep.payoff.c_str(), K, L, est.residual, est.residual_stderr,
              rep.relative_error, rep.stderr_,
              *std::max_element(est.condition_numbers.begin(), est.condition_numbers.end()));
  if (max_error > 0.0 && rep.relative_error > max_error) {
    std::printf("FLAG out_of_sample_error above %.3g\n", max_error);
    return kExitFlags;
  }
  return kExitOk;
}

int cmd_verify(const Common& c) {
  const auto cfg = load(c);
  const auto bundle = run_scenario(cfg, estimation_set(cfg), c.workers);
  const auto mart = martingale_test(bundle, compensated_processes(bundle, cfg.max_power_order, cfg.max_impulse_order),
                                    default_probe_times(bundle));
  const auto orth = orthogonality_test(bundle);
  const auto dir = out_dir(cfg);
  write_file(dir / "martingale.csv", header(cfg), mart.table());
  write_file(dir / "orthogonality.csv", header(cfg), orth.table());
  std::printf("config_hash %s\nmartingale_tests %zu flags %d\northogonality_entries %zu flags %d\n",
              cfg.hash().c_str(), mart.tests.size(), mart.flags(), orth.entries.size(), orth.flags());
  for (const auto& t : mart.tests)
    if (t.flagged) std::printf("FLAG %s %s t=%g z=%.2f\n", t.process.c_str(), t.kind.c_str(), t.time, t.z);
  for (const auto& e : orth.entries)
    if (e.flagged)
      std::printf("FLAG E[%s %s]=%.4g target %.4g se %.2g\n", e.a.c_str(), e.b.c_str(), e.value, e.target, e.stderr_);
  return mart.clear() && orth.clear() ? kExitOk : kExitFlags;
}

int cmd_report(const Common& c, const std::string& kind, const std::string& payoff_text, int oracle_paths) {
  const auto cfg = load(c);
  const auto dir = out_dir(cfg);
  std::string body;
  if (kind == "oracle") {
    const auto reports = poly_representation_oracle(cfg, {cfg.seed, 0, oracle_paths}, all_poly_targets(cfg.n_states()),
                                                    {1.0 / 256, 1.0 / 1024, 1.0 / 4096}, c.workers);
    body = "dt,g,p,b,i,j,max_err,rms_err,lhs_rms\n";
    for (const auto& r : reports) body += r.table();
  } else if (kind == "truncation") {
    const auto payoff = PayoffSpec::parse(payoff_text);
    body = "K,L,out_of_sample_error,stderr\n";
    const auto test = run_scenario(cfg, evaluation_set(cfg), c.workers);
    const auto train = run_scenario(cfg, estimation_set(cfg), c.workers);
    for (int K = 1; K <= cfg.max_power_order; ++K) {
      const auto est = estimate_predictable_representation(train, payoff, K, cfg.max_impulse_order);
      const auto rep = replicate(est, test, payoff);
      char buf[128];
      std::snprintf(buf, sizeof buf, "%d,%d,%.8g,%.4g\n", K, cfg.max_impulse_order, rep.relative_error, rep.stderr_);
      body += buf;
    }
  } else if (kind == "moments") {
    const auto bundle = run_scenario(cfg, estimation_set(cfg), c.workers);
    body = orthogonality_test(bundle).table();
  } else if (kind == "paths") {
    const auto bundle = run_scenario(cfg, estimation_set(cfg), c.workers);
    const auto cols = persisted_columns(bundle);
    body = "path_id,time,process,state,order,value\n";
    const int n = std::min(bundle.n_paths(), cfg.output.max_persisted_paths);
    char buf[96];
    for (int p = 0; p < n; ++p)
      for (const auto& col : cols)
        for (int t = 0; t < bundle.n_times(); ++t) {
          std::snprintf(buf, sizeof buf, ",%.17g,", bundle.times()[static_cast<std::size_t>(t)]);
          body += std::to_string(p) + buf + col.process + ',' + std::to_string(col.state) + ',' +
                  std::to_string(col.order) + ',';
          std::snprintf(buf, sizeof buf, "%.17g\n", persisted_value(bundle, col, p, t));
          body += buf;
        }
  } else {
    throw ValidationError("report: unknown kind '" + kind + "'");
  }
  const auto file = dir / ("report_" + kind + ".csv");
  write_file(file, header(cfg), body);
  std::printf("config_hash %s\nreport %s\n", cfg.hash().c_str(), file.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and representation checks for Ito-Markov additive processes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", library_version());

  Common sim_c, basis_c, rep_c, ver_c, report_c;
  std::string which = "estimation";
  auto* sim = app.add_subcommand("simulate", "simulate a path set and persist it");
  add_common(sim, sim_c);
  sim->add_option("--set", which, "estimation or evaluation")->check(CLI::IsMember({"estimation", "evaluation"}));

  auto* basis = app.add_subcommand("basis", "orthonormalize the martingale families");
  add_common(basis, basis_c);

  std::string payoff = "linear";
  int K = 0, L = -1, buckets = 0;
  double max_error = 0.0;
  auto* rep = app.add_subcommand("represent", "estimate and replicate a payoff's representation");
  add_common(rep, rep_c);
  rep->add_option("--payoff", payoff, "linear, square, count:J, impulse:I, indicator:I or zero");
  rep->add_option("--K", K, "power-jump truncation (default from file)");
  rep->add_option("--L", L, "impulse truncation (default from file)");
  rep->add_option("--buckets", buckets, "time buckets (default: every reporting step)");
  rep->add_option("--max-error", max_error, "exit 3 when the out-of-sample error exceeds this");

  auto* ver = app.add_subcommand("verify", "martingale and orthogonality suites");
  add_common(ver, ver_c);

  std::string kind = "moments";
  std::string report_payoff = "square";
  int oracle_paths = 500;
  auto* report = app.add_subcommand("report", "plot-ready columnar data");
  add_common(report, report_c);
  report->add_option("--kind", kind, "oracle, truncation, moments or paths")
      ->check(CLI::IsMember({"oracle", "truncation", "moments", "paths"}));
  report->add_option("--payoff", report_payoff, "payoff for --kind truncation");
  report->add_option("--oracle-paths", oracle_paths, "paths for --kind oracle")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*sim) return cmd_simulate(sim_c, which);
    if (*basis) return cmd_basis(basis_c);
    if (*rep) {
      const auto cfg = load(rep_c);
      return cmd_represent(rep_c, payoff, K > 0 ? K : cfg.max_power_order, L >= 0 ? L : cfg.max_impulse_order,
                           buckets, max_error);
    }
    if (*ver) return cmd_verify(ver_c);
    if (*report) return cmd_report(report_c, kind, report_payoff, oracle_paths);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}
