#include "cpexc/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "cpexc/config.hpp"
#include "cpexc/estimate.hpp"
#include "cpexc/limits.hpp"
#include "cpexc/scalefun.hpp"
#include "cpexc/simulate.hpp"
#include "cpexc/verify.hpp"

namespace cpexc {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kChunk = 100000;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
};

struct Context {
  ExperimentConfig cfg;
  fs::path out;
  std::string command;

  std::vector<std::string> metadata(bool with_hash = true) const {
    std::vector<std::string> m;
    m.push_back(std::string("cpexc ") + version());
    m.push_back("command = " + command);
    if (cfg.spec && with_hash) {
      std::ostringstream h;
      h << std::hex << spec_hash(*cfg.spec);
      m.push_back("spec_hash = " + h.str());
    }
    if (cfg.seed_set) m.push_back("seed = " + std::to_string(cfg.sim.seed));
    for (const auto& line : cfg.echo()) m.push_back("config: " + line);
    return m;
  }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body,
             bool with_meta = true) const {
    const auto path = out / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    if (with_meta) {
      for (const auto& line : metadata()) os << "# " << line << '\n';
    }
    body(os);
    if (!os) throw IoError("error writing " + path.string());
  }
};

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("unwritable output dir " + dir.string());
  const auto probe = dir / ".cpexc_probe";
  {
    std::ofstream os(probe);
    if (!os) throw IoError("unwritable output dir " + dir.string());
  }
  fs::remove(probe, ec);
}

double grid_max(const std::vector<double>& g) { return *std::max_element(g.begin(), g.end()); }

// Bound on the return probability of samples whose return is undecided.
double unknown_return_weight(const ExperimentConfig& cfg, const SimConfig& sim) {
  const auto& spec = cfg.process();
  if (spec.regime() == Regime::recurrent || sim.completion == Completion::ladder) return 1.0;
  return ruin_probability(spec, sim.depth_cap, sim.depth_cap / 2000.0);
}

int verdict(const std::vector<CheckRow>& rows, const std::string& what, std::ostream& out) {
  const auto failed = std::count_if(rows.begin(), rows.end(), [](const CheckRow& r) { return !r.pass; });
  out << what << ": " << rows.size() << " rows, " << failed << " failed\n";
  for (const auto& r : rows) {
    if (!r.pass) {
      out << "  FAIL " << r.suite << " | " << r.check << " | observed " << r.observed << " expected "
          << r.expected << " tol " << r.tolerance << '\n';
    }
  }
  return failed ? 1 : 0;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Context& ctx, std::ostream& out) {
  const auto& cfg = ctx.cfg;
  cfg.require_simulation();
  const auto sim = cfg.sim_config();
  const auto& spec = cfg.process();
  SampleSummary summary;
  std::ofstream dump;
  if (cfg.dump) {
    const auto path = ctx.out / "samples.csv";
    dump.open(path, std::ios::binary);
    if (!dump) throw IoError("cannot write " + path.string());
    for (const auto& line : ctx.metadata()) dump << "# " << line << '\n';
  }
  stream_excursions(spec, sim, 0, sim.n_samples, kChunk,
                    [&](const std::vector<ExcursionSample>& chunk, std::uint64_t first) {
                      for (const auto& s : chunk) summary.add(spec, s);
                      if (!cfg.dump) return;
                      std::ostringstream os;
                      write_samples_csv(os, chunk);
                      const auto text = os.str();
                      dump << (first == 0 ? text : text.substr(text.find('\n') + 1));
                    });
  if (cfg.dump && !dump) throw IoError("error writing samples.csv");
  ctx.write("summary.csv", [&](std::ostream& os) { write_summary_csv(os, summary); });
  out << "simulated " << summary.n << " excursions: " << summary.complete << " complete, "
      << summary.censored_depth << " depth-censored, " << summary.censored_jumps << " jump-censored\n";
  return 0;
}

void simulate_all(const ExperimentConfig& cfg, const SimConfig& sim,
                  const std::function<void(const ExcursionSample&)>& add) {
  stream_excursions(cfg.process(), sim, 0, sim.n_samples, kChunk,
                    [&](const std::vector<ExcursionSample>& chunk, std::uint64_t) {
                      for (const auto& s : chunk) add(s);
                    });
}

int cmd_verify(const Context& ctx, const std::string& which, std::ostream& out) {
  const auto& cfg = ctx.cfg;
  std::vector<CheckRow> rows;
  if (which == "laplace") {
    cfg.require_simulation();
    const auto sim = cfg.sim_config();
    LaplaceSuite suite(cfg.process(), cfg.grid_q, unknown_return_weight(cfg, sim));
    simulate_all(cfg, sim, [&](const ExcursionSample& s) { suite.add(s); });
    rows = suite.rows();
  } else if (which == "exit") {
    if (!cfg.seed_set) throw ConfigError("seed is mandatory (set `seed` or pass --seed)");
    ExitSuiteConfig e;
    e.x = cfg.exit_x;
    e.h = cfg.exit_h;
    e.n = cfg.exit_n;
    e.seed = cfg.sim.seed;
    e.jump_cap = cfg.sim.jump_cap;
    e.workers = cfg.sim.worker_count;
    e.delta = cfg.scale_delta;
    e.x_max = cfg.scale_x_max;
    rows = exit_suite(cfg.process(), e);
  } else if (which == "lemma21") {
    cfg.require_simulation();
    const auto sim = cfg.sim_config();
    std::vector<std::pair<double, double>> pairs;
    for (double h1 : cfg.lemma_h) {
      for (double h2 : cfg.lemma_h) pairs.emplace_back(h1, h2);
    }
    HeightJointSuite suite(pairs);
    simulate_all(cfg, sim, [&](const ExcursionSample& s) { suite.add(s); });
    const double x_max = cfg.scale_x_max > 0.0 ? cfg.scale_x_max : grid_max(cfg.lemma_h);
    rows = suite.rows(cfg.process(), build_scale_table(cfg.process(), x_max, cfg.scale_delta));
  } else {
    rows = limits_identity_rows(cfg.limit_params());
  }
  std::string name = which;
  std::replace(name.begin(), name.end(), '-', '_');
  ctx.write("verify_" + name + ".csv", [&](std::ostream& os) { write_checks_csv(os, rows); });
  return verdict(rows, "verify " + which, out);
}

struct ConditionalRow {
  std::string kind;
  double t, a;
  ConditionalAccumulator acc;
  double limit;
};

int cmd_tails(const Context& ctx, std::ostream& out, std::ostream& err) {
  const auto& cfg = ctx.cfg;
  cfg.require_simulation();
  const auto sim = cfg.sim_config();
  const auto& spec = cfg.process();
  const bool recurrent = spec.regime() == Regime::recurrent;
  const bool pareto = spec.jumps().family() == JumpFamily::pareto_tail;
  const double w = unknown_return_weight(cfg, sim);

  std::vector<SurvivalAccumulator> tails{{Quantity::tau_plus, cfg.grid_t},
                                         {Quantity::t_above, cfg.grid_t},
                                         {Quantity::h0, cfg.grid_h},
                                         {Quantity::hhat0, cfg.grid_h}};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<ConditionalRow> cond;
  for (double t : cfg.cond_t) {
    for (double a : cfg.grid_a) {
      double lim = nan;
      if (pareto) lim = recurrent ? recurrent_length_limit(a, spec.rho()) : transient_limit(a, spec.theta());
      cond.push_back({"length", t, a, {Quantity::tau_plus, t, Quantity::t_above, a * t}, lim});
      if (recurrent) {
        lim = pareto ? recurrent_height_limit(a, spec.alpha()) : nan;
        cond.push_back({"height", t, a, {Quantity::hhat0, t, Quantity::h0, a * t}, lim});
      }
    }
  }
  StructuralSuite structural(spec, cfg.grid_t, cfg.grid_h);
  simulate_all(cfg, sim, [&](const ExcursionSample& s) {
    for (auto& acc : tails) acc.add(s);
    for (auto& c : cond) c.acc.add(s);
    structural.add(s);
  });

  for (const auto& acc : tails) {
    std::vector<TailEstimate> est;
    for (const auto& c : acc.counts()) {
      est.push_back(c.n ? c.estimate(w) : TailEstimate{});
    }
    ctx.write("tail_" + to_string(acc.field()) + ".csv",
              [&](std::ostream& os) { write_tail_csv(os, acc.thresholds(), est); });
  }

  ctx.write("conditional.csv", [&](std::ostream& os) {
    os.precision(12);
    os << "kind,t,a,n,k,p_hat,ci_low,ci_high,bias_bound,limit\n";
    for (const auto& c : cond) {
      try {
        const auto e = c.acc.estimate(w);
        os << c.kind << ',' << c.t << ',' << c.a << ',' << e.n << ',' << e.k << ',' << e.p_hat << ','
           << e.ci_low << ',' << e.ci_high << ',' << e.bias_bound << ',' << c.limit << '\n';
      } catch (const std::runtime_error& ex) {
        err << "conditional " << c.kind << " t=" << c.t << " a=" << c.a << " skipped: " << ex.what() << '\n';
      }
    }
  });

  auto rows = structural.rows();
  const auto det = determinism_rows(spec, sim, std::min<std::uint64_t>(sim.n_samples, 2000),
                                    std::max(2u, sim.worker_count));
  rows.insert(rows.end(), det.begin(), det.end());
  ctx.write("checks_structural.csv", [&](std::ostream& os) { write_checks_csv(os, rows); });
  int code = verdict(rows, "structural", out);

  if (pareto) {
    const std::vector<AsymptoteKind> kinds =
        recurrent ? std::vector{AsymptoteKind::length_rec, AsymptoteKind::height_rec}
                  : std::vector{AsymptoteKind::length_tra, AsymptoteKind::height_tra};
    std::vector<CheckRow> ratio_rows;
    for (auto kind : kinds) {
      const auto& acc = tails[default_field(kind) == Quantity::t_above ? 1 : 2];
      const auto curve = ratio_curve(acc, spec, kind, w);
      ctx.write("ratio_" + to_string(kind) + ".csv", [&](std::ostream& os) { write_ratio_csv(os, curve); });
      const auto r = recurrent ? ratio_drift_rows("ratio " + to_string(kind), curve)
                               : ratio_band_rows("ratio " + to_string(kind), curve, 0.15);
      ratio_rows.insert(ratio_rows.end(), r.begin(), r.end());
    }
    ctx.write("checks_ratio.csv", [&](std::ostream& os) { write_checks_csv(os, ratio_rows); });
    code = std::max(code, verdict(ratio_rows, "ratio", out));
  }
  return code;
}

int cmd_limits(const Context& ctx, std::ostream& out) {
  const auto p = ctx.cfg.limit_params();
  const std::vector<std::pair<std::string, std::function<double(double)>>> curves = {
      {"limit_f", [&](double a) { return limit_f(a, p.rho); }},
      {"limit_h", [&](double a) { return limit_h(a, p.rho); }},
      {"limit_g", [&](double a) { return limit_g(a, p.alpha); }},
      {"recurrent_length_limit", [&](double a) { return recurrent_length_limit(a, p.rho); }},
      {"recurrent_height_limit", [&](double a) { return recurrent_height_limit(a, p.alpha); }},
      {"transient_limit", [&](double a) { return transient_limit(a, p.theta); }},
  };
  for (const auto& [name, fn] : curves) {
    ctx.write(name + ".csv", [&](std::ostream& os) {
      os << "# rho = " << p.rho << "\n# alpha = " << p.alpha << "\n# theta = " << p.theta << '\n';
      os.precision(15);
      os << "a,value\n";
      for (double a : ctx.cfg.limits_a) os << a << ',' << fn(a) << '\n';
    });
  }
  out << "wrote " << curves.size() << " limit curves on " << ctx.cfg.limits_a.size() << " points\n";
  return 0;
}

int cmd_scalefun(const Context& ctx, std::ostream& out) {
  const auto& cfg = ctx.cfg;
  const auto& spec = cfg.process();
  const double x_max = cfg.scale_x_max > 0.0 ? cfg.scale_x_max : grid_max(cfg.exit_h);
  const auto table = build_scale_table(spec, x_max, cfg.scale_delta);
  ctx.write("scale_table.csv", [&](std::ostream& os) { write_scale_table(os, table, ctx.metadata(false)); },
            false);
  const auto rows = scale_table_rows(spec, table);
  ctx.write("checks_scalefun.csv", [&](std::ostream& os) { write_checks_csv(os, rows); });
  return verdict(rows, "scalefun", out);
}

// ---------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string get(const std::vector<std::string>& row, const std::string& col) const {
    const auto it = std::find(header.begin(), header.end(), col);
    if (it == header.end()) return {};
    const auto i = static_cast<std::size_t>(it - header.begin());
    return i < row.size() ? row[i] : std::string{};
  }
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  return f;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (t.header.empty()) t.header = split_csv(line);
    else t.rows.push_back(split_csv(line));
  }
  return t;
}

int cmd_report(const Context& ctx, std::ostream& out, std::ostream& err) {
  const std::vector<std::string> expected = {
      "verify_laplace.csv",   "verify_exit.csv",   "verify_lemma21.csv", "verify_limits_identities.csv",
      "checks_structural.csv", "checks_ratio.csv", "conditional.csv",    "tail_t_above.csv",
      "tail_h0.csv"};
  std::vector<fs::path> inputs;
  if (fs::is_directory(ctx.out)) {
    for (const auto& entry : fs::directory_iterator(ctx.out)) {
      const auto name = entry.path().filename().string();
      const bool known = name.rfind("verify_", 0) == 0 || name.rfind("checks_", 0) == 0 ||
                         name.rfind("tail_", 0) == 0 || name.rfind("ratio_", 0) == 0 ||
                         name == "conditional.csv";
      if (known && entry.path().extension() == ".csv") inputs.push_back(entry.path());
    }
  }
  if (inputs.empty()) throw IoError("nothing to report in " + ctx.out.string());
  std::sort(inputs.begin(), inputs.end());
  std::vector<std::string> missing;
  for (const auto& name : expected) {
    if (!fs::exists(ctx.out / name)) missing.push_back(name);
  }

  std::ostringstream csv;
  csv.precision(12);
  csv << "source,kind,label,value,ci_low,ci_high,reference,tolerance,bias_bound,pass,note\n";
  std::vector<CheckRow> checks;
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_source;
  for (const auto& path : inputs) {
    const auto src = path.filename().string();
    if (src.rfind("verify_", 0) == 0 || src.rfind("checks_", 0) == 0) {
      std::ifstream in(path);
      const auto rows = read_checks_csv(in);
      auto& [n, failed] = per_source[src];
      for (const auto& r : rows) {
        csv << src << ",check," << r.suite << ": " << r.check << ',' << r.observed << ",,," << r.expected << ','
            << r.tolerance << ",," << (r.pass ? "PASS" : "FAIL") << ',' << r.note << '\n';
        ++n;
        failed += !r.pass;
        checks.push_back(r);
      }
      continue;
    }
    const auto t = read_csv(path);
    for (const auto& row : t.rows) {
      auto g = [&](const char* col) { return t.get(row, col); };
      if (src.rfind("tail_", 0) == 0) {
        csv << src << ",tail,threshold=" << g("threshold") << ',' << g("p_hat") << ',' << g("ci_low") << ','
            << g("ci_high") << ",,," << g("bias_bound") << ",,n=" << g("n") << " k=" << g("k") << '\n';
      } else if (src.rfind("ratio_", 0) == 0) {
        csv << src << ",ratio,arg=" << g("arg") << ',' << g("ratio") << ',' << g("ci_low") << ','
            << g("ci_high") << ",1,,,,asymptote=" << g("asymptote") << '\n';
      } else {
        csv << src << ",conditional," << g("kind") << " t=" << g("t") << " a=" << g("a") << ','
            << g("p_hat") << ',' << g("ci_low") << ',' << g("ci_high") << ',' << g("limit") << ",,"
            << g("bias_bound") << ",,n=" << g("n") << " k=" << g("k") << '\n';
      }
    }
  }
  ctx.write("report.csv", [&](std::ostream& os) { os << csv.str(); });

  const auto failed = std::count_if(checks.begin(), checks.end(), [](const CheckRow& r) { return !r.pass; });
  std::ostringstream txt;
  txt << "check rows: " << checks.size() << ", failed: " << failed << '\n';
  for (const auto& [src, nf] : per_source) {
    txt << "  " << src << ": " << nf.first << " rows, " << nf.second << " failed\n";
  }
  for (const auto& r : checks) {
    txt << (r.pass ? "PASS " : "FAIL ") << r.suite << " | " << r.check << " | observed " << r.observed
        << " expected " << r.expected << " tol " << r.tolerance << '\n';
  }
  if (!missing.empty()) {
    txt << "missing inputs:";
    for (const auto& m : missing) txt << ' ' << m;
    txt << '\n';
    err << "missing inputs:";
    for (const auto& m : missing) err << ' ' << m;
    err << '\n';
  }
  ctx.write("report.txt", [&](std::ostream& os) { os << txt.str(); });
  out << "report: " << inputs.size() << " inputs, " << checks.size() << " check rows, " << failed << " failed\n";
  return failed ? 1 : 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Excursion simulation and verification for spectrally positive compound Poisson processes",
               "cpexc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version()));
  Options opt;
  app.add_option("--config", opt.config_path, "Experiment config file");
  app.add_option("--out", opt.out_dir, "Output directory (overrides `out`)");
  app.add_option("--seed", opt.seed, "Seed (overrides `seed`)");
  app.add_option("--workers", opt.workers, "Worker threads (overrides `workers`)")->check(CLI::PositiveNumber);

  auto* sim = app.add_subcommand("simulate", "Sample excursions; write samples.csv and summary.csv");
  auto* ver = app.add_subcommand("verify", "Run an oracle suite; write verify_<which>.csv");
  std::string which;
  ver->add_option("which", which, "Suite")
      ->required()
      ->check(CLI::IsMember({"laplace", "exit", "lemma21", "limits-identities"}));
  auto* tails = app.add_subcommand("tails", "Survival, conditional and ratio curves plus structural checks");
  auto* lim = app.add_subcommand("limits", "Limit function curves as a,value CSVs");
  auto* sf = app.add_subcommand("scalefun", "Scale function table and its checks");
  auto* rep = app.add_subcommand("report", "Aggregate prior outputs into report.csv and report.txt");
  for (auto* sc : {sim, ver, tails, lim, sf, rep}) sc->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    Context ctx;
    ctx.command = app.get_subcommands().front()->get_name();
    if (ctx.command == "verify") ctx.command += " " + which;
    const bool needs_config = !(lim->parsed() || rep->parsed() || which == "limits-identities");
    if (!opt.config_path.empty()) ctx.cfg = load_config(opt.config_path);
    else if (needs_config) throw ConfigError("--config is required for " + ctx.command);
    if (opt.seed) ctx.cfg.set_seed(*opt.seed);
    if (opt.workers) ctx.cfg.sim.worker_count = *opt.workers;
    ctx.out = opt.out_dir.empty() ? fs::path(ctx.cfg.out) : fs::path(opt.out_dir);
    if (!rep->parsed()) prepare_out_dir(ctx.out);

    if (sim->parsed()) return cmd_simulate(ctx, out);
    if (ver->parsed()) return cmd_verify(ctx, which, out);
    if (tails->parsed()) return cmd_tails(ctx, out, err);
    if (lim->parsed()) return cmd_limits(ctx, out);
    if (sf->parsed()) return cmd_scalefun(ctx, out);
    return cmd_report(ctx, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace cpexc
