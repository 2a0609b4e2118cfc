#include <filesystem>
#include <fstream>
#include <sstream>

#include "common.hpp"
#include "cpexc/cli.hpp"
#include "cpexc/config.hpp"
#include "cpexc/verify.hpp"
#include "doctest.h"

using namespace cpexc;
using cpexc::testing::rec_spec;
using cpexc::testing::tra_spec;
namespace fs = std::filesystem;

namespace {

const char* kRec = R"(# recurrent reference
drift = recurrent
jump.family = pareto_tail
jump.mass = 1
jump.xmin = 1
jump.gamma = 1.5
seed = 11
n_samples = 3000
jump_cap = 10000
exit.n = 3000
)";

const char* kTra = R"(drift = 3
jump.family = pareto_tail
jump.mass = 1
jump.xmin = 1
jump.gamma = 2
seed = 12
n_samples = 20000
cond.t = 10
grid.t = 5, 50
grid.h = 5, 50
)";

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("cpexc_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

std::vector<CheckRow> checks(const fs::path& path) {
  std::ifstream in(path);
  return read_checks_csv(in);
}

}  // namespace

TEST_CASE("config parses the reference processes") {
  const auto rec = parse(kRec);
  CHECK(rec.process().drift() == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(rec.process().regime() == Regime::recurrent);
  CHECK(rec.sim.seed == 11);
  CHECK(rec.sim.n_samples == 3000);
  CHECK(rec.sim.jump_cap == 10000);
  CHECK(rec.limit_params().rho == doctest::Approx(2.0 / 3.0));

  const auto tra = parse(kTra);
  CHECK(tra.process().regime() == Regime::transient);
  CHECK(tra.process().beta() == doctest::Approx(1.0));
  CHECK(tra.grid_t == std::vector<double>{5, 50});
  CHECK(tra.limit_params().theta == doctest::Approx(2.0));
  CHECK(tra.sim_config().depth_cap > 0.0);
}

TEST_CASE("config round-trips the process description") {
  for (const auto& spec : {rec_spec(), tra_spec(),
                           ProcessSpec(2.0, JumpMeasure::bounded_discrete({{1.0, 0.5}, {2.0, 0.25}}))}) {
    const auto c = parse(describe(spec));
    CHECK(spec_hash(c.process()) == spec_hash(spec));
  }
}

TEST_CASE("config rejects malformed input") {
  CHECK_THROWS_WITH_AS(parse("drift = 3\nbogus = 1\n"), doctest::Contains("unknown key"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("grid.t = 10, 1\n"), doctest::Contains("sorted"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("seed = 1\nseed = 2\n"), doctest::Contains("duplicate"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("seed = -1\n"), doctest::Contains("non-negative integer"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("n_samples = 1.5\n"), doctest::Contains("integer"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("drift = 3\n"), doctest::Contains("jump.family"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("drift = 1\njump.family = pareto_tail\njump.mass = 1\njump.xmin = 1\njump.gamma = 2\n"),
                       doctest::Contains("invalid process"), ConfigError);
  CHECK_THROWS_AS(parse("completion = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse("jump.family = bounded_discrete\njump.atoms = 1\ndrift = 3\n"), ConfigError);
  CHECK(parse("n_samples = 1e5\n").sim.n_samples == 100000);

  auto c = parse(kRec);
  c.sim.n_samples = 0;
  CHECK_THROWS_WITH_AS(c.require_simulation(), doctest::Contains("n_samples"), ConfigError);
  std::string no_seed = kRec;
  no_seed.replace(no_seed.find("seed = 11"), 9, "");
  const auto d = parse(no_seed);
  CHECK_FALSE(d.seed_set);
  CHECK_THROWS_WITH_AS(d.require_simulation(), doctest::Contains("seed is mandatory"), ConfigError);
}

TEST_CASE("simulate: n_samples = 0 and a missing seed are validation errors") {
  const auto dir = scratch("simulate_invalid");
  std::string zero_text = kRec;
  zero_text.replace(zero_text.find("n_samples = 3000"), 16, "n_samples = 0");
  const auto zero = write_file(dir / "zero.cfg", zero_text);
  auto r = cli({"simulate", "--config", zero.string(), "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("n_samples must be positive") != std::string::npos);

  std::string text = kRec;
  text.replace(text.find("seed = 11"), 9, "");
  const auto noseed = write_file(dir / "noseed.cfg", text);
  r = cli({"simulate", "--config", noseed.string(), "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("seed is mandatory") != std::string::npos);
  r = cli({"simulate", "--config", noseed.string(), "--out", (dir / "o").string(), "--seed", "5"});
  CHECK(r.code == 0);
}

TEST_CASE("simulate: reruns and worker counts give byte-identical dumps") {
  const auto dir = scratch("simulate_repro");
  const auto cfg = write_file(dir / "rec.cfg", kRec);
  REQUIRE(cli({"simulate", "--config", cfg.string(), "--out", (dir / "a").string()}).code == 0);
  REQUIRE(cli({"simulate", "--config", cfg.string(), "--out", (dir / "b").string()}).code == 0);
  REQUIRE(cli({"simulate", "--config", cfg.string(), "--out", (dir / "c").string(), "--workers", "3"}).code == 0);
  for (const char* f : {"samples.csv", "summary.csv"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "c" / f));
  }
  const auto text = slurp(dir / "a" / "samples.csv");
  CHECK(text.find("tau_plus,t_above,h0,hhat0,status,n_jumps\n") != std::string::npos);
  CHECK(text.find("# seed = 11\n") != std::string::npos);
  CHECK(text.find(std::string("# cpexc ") + version()) != std::string::npos);
  CHECK(text.find("# spec_hash = ") != std::string::npos);
  CHECK(text.find('\r') == std::string::npos);
  // One data row per sample, header once.
  std::size_t rows = 0, headers = 0;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    if (line.rfind("tau_plus", 0) == 0) ++headers;
    else if (!line.empty() && line[0] != '#') ++rows;
  }
  CHECK(headers == 1);
  CHECK(rows == 3000);
}

TEST_CASE("simulate: the metadata header is enough to rerun") {
  const auto dir = scratch("simulate_rerun");
  const auto cfg = write_file(dir / "rec.cfg", kRec);
  REQUIRE(cli({"simulate", "--config", cfg.string(), "--out", (dir / "a").string(), "--seed", "99"}).code == 0);
  std::string echo;
  std::istringstream is(slurp(dir / "a" / "summary.csv"));
  for (std::string line; std::getline(is, line);) {
    if (line.rfind("# config: ", 0) == 0) echo += line.substr(10) + "\n";
  }
  const auto again = write_file(dir / "echo.cfg", echo);
  REQUIRE(cli({"simulate", "--config", again.string(), "--out", (dir / "b").string()}).code == 0);
  CHECK(slurp(dir / "a" / "samples.csv") == slurp(dir / "b" / "samples.csv"));
}

TEST_CASE("simulate: unwritable output directory") {
  const auto dir = scratch("simulate_unwritable");
  const auto cfg = write_file(dir / "rec.cfg", kRec);
  write_file(dir / "file", "x");
  const auto r = cli({"simulate", "--config", cfg.string(), "--out", (dir / "file" / "sub").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("unwritable output dir") != std::string::npos);
}

TEST_CASE("verify laplace on the transient spec has the return-probability cell") {
  const auto dir = scratch("verify_laplace");
  const auto cfg = write_file(dir / "tra.cfg", kTra);
  const auto r = cli({"verify", "laplace", "--config", cfg.string(), "--out", dir.string()});
  CHECK(r.code == 0);
  const auto rows = checks(dir / "verify_laplace.csv");
  CHECK(rows.size() == 17);
  bool found = false;
  for (const auto& row : rows) {
    if (row.check == "q1=0 q2=0") {
      found = true;
      CHECK(row.expected == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    }
  }
  CHECK(found);
}

TEST_CASE("verify limits-identities includes the f/h identity rows") {
  const auto dir = scratch("verify_limits");
  const auto r = cli({"verify", "limits-identities", "--out", dir.string()});
  CHECK(r.code == 0);
  const auto rows = checks(dir / "verify_limits_identities.csv");
  int identity = 0;
  for (const auto& row : rows) identity += row.check.rfind("Gamma(rho) f(a) = a^(rho-1) + h(a)", 0) == 0;
  CHECK(identity == 20);
  CHECK(all_pass(rows));
}

TEST_CASE("verify exit: h beyond the table is a range error with a hint") {
  const auto dir = scratch("verify_exit_range");
  const auto cfg = write_file(dir / "rec.cfg", std::string(kRec) + "scale.x_max = 8\n");
  const auto r = cli({"verify", "exit", "--config", cfg.string(), "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("rebuild the table with a larger x_max") != std::string::npos);
}

TEST_CASE("verify exit and lemma21 on the recurrent spec") {
  const auto dir = scratch("verify_exit");
  const auto cfg = write_file(dir / "rec.cfg", kRec);
  auto r = cli({"verify", "exit", "--config", cfg.string(), "--out", dir.string()});
  CHECK(r.code == (all_pass(checks(dir / "verify_exit.csv")) ? 0 : 1));
  CHECK(checks(dir / "verify_exit.csv").size() == 7 + 12);
  r = cli({"verify", "lemma21", "--config", cfg.string(), "--out", dir.string()});
  const auto rows = checks(dir / "verify_lemma21.csv");
  CHECK(rows.size() == 8);
  CHECK(r.code == (all_pass(rows) ? 0 : 1));
}

TEST_CASE("report: empty directory and missing inputs") {
  const auto dir = scratch("report_empty");
  auto r = cli({"report", "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("nothing to report") != std::string::npos);

  write_file(dir / "checks_x.csv", "suite,check,observed,expected,tolerance,pass,note\ns,c,1,1,0,PASS,\n");
  r = cli({"report", "--out", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.err.find("missing inputs: verify_laplace.csv") != std::string::npos);
  CHECK(slurp(dir / "report.txt").find("missing inputs:") != std::string::npos);
}

TEST_CASE("report: exit code is nonzero iff a row fails") {
  const auto dir = scratch("report_code");
  write_file(dir / "checks_a.csv", "suite,check,observed,expected,tolerance,pass,note\ns,c,1,1,0,PASS,\n");
  CHECK(cli({"report", "--out", dir.string()}).code == 0);
  write_file(dir / "checks_b.csv", "suite,check,observed,expected,tolerance,pass,note\ns,d,2,1,0,FAIL,x\n");
  const auto r = cli({"report", "--out", dir.string()});
  CHECK(r.code == 1);
  CHECK(slurp(dir / "report.txt").find("FAIL s | d") != std::string::npos);
}

TEST_CASE("full recurrent pipeline: report carries the structural checks") {
  const auto dir = scratch("pipeline_rec");
  const auto cfg = write_file(dir / "rec.cfg", kRec);
  const auto r = cli({"tails", "--config", cfg.string(), "--out", dir.string()});
  CHECK((r.code == 0 || r.code == 1));
  for (const char* f : {"tail_tau_plus.csv", "tail_t_above.csv", "tail_h0.csv", "tail_hhat0.csv",
                        "conditional.csv", "checks_structural.csv", "ratio_length_rec.csv",
                        "ratio_height_rec.csv", "checks_ratio.csv"}) {
    CHECK_MESSAGE(fs::exists(dir / f), f);
  }
  cli({"report", "--out", dir.string()});
  const auto report = slurp(dir / "report.csv");
  CHECK(report.find("structural: marginal tau_plus/t_above at 1,") != std::string::npos);
  CHECK(report.find("structural: marginal h0/hhat0 at 1,") != std::string::npos);
  CHECK(report.find("structural: exchangeable tau_plus/t_above at (1;10)") != std::string::npos);
  CHECK(report.find("structural: bit-identical rerun") != std::string::npos);
  CHECK(report.find(",conditional,height t=100 a=0.5,") != std::string::npos);
}

TEST_CASE("full transient pipeline: report has the censoring bias column") {
  const auto dir = scratch("pipeline_tra");
  std::string text = kTra;
  text += "completion = none\ndepth_cap = 20\n";
  const auto cfg = write_file(dir / "tra.cfg", text);
  cli({"tails", "--config", cfg.string(), "--out", dir.string()});
  cli({"report", "--out", dir.string()});
  const auto report = slurp(dir / "report.csv");
  CHECK(report.find("source,kind,label,value,ci_low,ci_high,reference,tolerance,bias_bound,pass,note\n") !=
        std::string::npos);
  // Depth-censored samples with unknown return give a positive bias bound on tail rows.
  std::istringstream is(report);
  bool positive = false;
  for (std::string line; std::getline(is, line);) {
    if (line.rfind("tail_t_above.csv,tail,", 0) != 0) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    REQUIRE(f.size() >= 9);
    positive |= std::stod(f[8]) > 0.0;
  }
  CHECK(positive);
}

TEST_CASE("limits and scalefun commands") {
  const auto dir = scratch("limits_scalefun");
  auto r = cli({"limits", "--out", dir.string()});
  CHECK(r.code == 0);
  const auto g = slurp(dir / "limit_g.csv");
  CHECK(g.find("a,value\n") != std::string::npos);
  CHECK(g.find("\n1,0.58578643762") != std::string::npos);
  const auto cfg = write_file(dir / "rec.cfg", kRec);
  r = cli({"scalefun", "--config", cfg.string(), "--out", dir.string()});
  CHECK(r.code == 0);
  std::ifstream in(dir / "scale_table.csv");
  const auto table = read_scale_table(in);
  CHECK(table.x_max() == doctest::Approx(16.0));
  CHECK(table.spec_hash == spec_hash(rec_spec()));
}

TEST_CASE("usage errors") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"bogus"}).code == 2);
  CHECK(cli({"verify", "nope"}).code == 2);
  CHECK(cli({"simulate"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("check rows: helpers and CSV round trip") {
  CHECK(row_abs("s", "c", 1.0, 1.1, 0.1 + 1e-12).pass);
  CHECK_FALSE(row_abs("s", "c", 1.0, 1.2, 0.1).pass);
  CHECK_FALSE(row_open_interval("s", "c", 1.0, 0.5, 1.0).pass);
  CHECK(row_open_interval("s", "c", 0.9, 0.5, 1.0).pass);
  const std::vector<CheckRow> rows{row_abs("a", "x, y", 0.5, 0.25, 0.25, "n=1, k=2"),
                                   row_open_interval("b", "z", 2.0, 0.0, 1.0)};
  std::stringstream ss;
  write_checks_csv(ss, rows);
  const auto back = read_checks_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].check == "x; y");
  CHECK(back[0].note == "n=1; k=2");
  CHECK(back[0].observed == 0.5);
  CHECK(back[0].pass);
  CHECK_FALSE(back[1].pass);
  CHECK(back[1].expected == 0.5);
}

TEST_CASE("ratio drift rows require a strictly shrinking distance to 1") {
  std::vector<RatioPoint> c(3);
  c[0].ratio = 0.6;
  c[1].ratio = 1.3;
  c[2].ratio = 0.9;
  const auto rows = ratio_drift_rows("r", c);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].pass);
  CHECK(rows[1].pass);
  c[2].ratio = 1.3;
  CHECK_FALSE(ratio_drift_rows("r", c)[1].pass);
}

TEST_CASE("determinism rows on both reference specs") {
  SimConfig cfg;
  cfg.seed = 5;
  cfg.n_samples = 500;
  cfg.jump_cap = 5000;
  CHECK(all_pass(determinism_rows(rec_spec(), cfg, 500, 3)));
  cfg.depth_cap = 40.0;
  CHECK(all_pass(determinism_rows(tra_spec(), cfg, 500, 2)));
}
