#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "dwinv/config.hpp"
#include "dwinv/io.hpp"
#include "dwinv/svg.hpp"

using namespace dwinv;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Scratch tree under the system temp dir, removed when the test section ends.
struct TempTree {
  fs::path root;
  TempTree() {
    static int counter = 0;
    root = fs::temp_directory_path() /
           strfmt("dwinv_test_cli_%d_%d", static_cast<int>(::getpid()), counter++);
    fs::create_directories(root);
  }
  ~TempTree() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
  std::string path(const std::string& name) const { return (root / name).string(); }
};

std::string error_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const config_error& e) {
    return e.what();
  }
  FAIL("expected a config error");
  return "";
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs the installed binary with stdout and stderr captured separately.
RunResult run_cli(const TempTree& tree, const std::string& args) {
  static int counter = 0;
  std::string tag = strfmt("run%d", counter++);
  std::string out_path = tree.path(tag + ".out");
  std::string err_path = tree.path(tag + ".err");
  std::string cmd =
      std::string(DWINV_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
  int rc = std::system(cmd.c_str());
  RunResult res;
  res.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  res.out = read_text_file(out_path);
  res.err = read_text_file(err_path);
  return res;
}

std::string base_toml(int nx, double level) {
  return strfmt(
      "[domain]\n"
      "dim = 1\n"
      "nx = %d\n"
      "[time]\n"
      "tau = 2.0\n"
      "[damping]\n"
      "profile = \"constant\"\n"
      "level = %g\n"
      "[initial]\n"
      "mode = 0\n"
      "[output]\n"
      "dir = \"out\"\n",
      nx, level);
}

// Regular files below `dir`, as slash-separated paths relative to it.
std::set<std::string> list_files(const fs::path& dir) {
  std::set<std::string> names;
  for (const auto& ent : fs::recursive_directory_iterator(dir))
    if (ent.is_regular_file())
      names.insert(fs::relative(ent.path(), dir).generic_string());
  return names;
}

}  // namespace

TEST_CASE("toml diagnostics carry file and line") {
  auto parse = [](const std::string& text) {
    return [text] { config_from_text(text, "cfg.toml"); };
  };

  std::string dup = "[domain]\nnx = 32\nnx = 64\n";
  CHECK(contains(error_message(parse(dup)), "cfg.toml:3: duplicate key 'nx' in [domain]"));

  std::string bad_num = "[domain]\nnx = squirrel\n";
  CHECK(contains(error_message(parse(bad_num)), "cfg.toml:2: cannot parse 'squirrel' as a number"));

  std::string unknown = "[damping]\nprofile = \"constant\"\nfrequency = 3\n";
  CHECK(contains(error_message(parse(unknown)), "unknown key 'frequency' in [damping]"));

  std::string no_section = "nx = 32\n";
  CHECK(contains(error_message(parse(no_section)), "cfg.toml:1: key 'nx' before any [section]"));

  std::string not_kv = "[domain]\nthis is not an assignment\n";
  CHECK(contains(error_message(parse(not_kv)), "cfg.toml:2: expected 'key = value'"));

  std::string open_str = "[damping]\nprofile = \"constant\n";
  CHECK(contains(error_message(parse(open_str)), "unterminated string value"));
}

TEST_CASE("canonical config text is a fixed point") {
  std::vector<std::string> texts;
  texts.push_back(base_toml(96, 0.5));
  texts.push_back(
      "[domain]\n"
      "dim = 2\n"
      "nx = 24\n"
      "ny = 30\n"
      "[time]\n"
      "tau = 1.5\n"
      "cfl_factor = 0.4\n"
      "[damping]\n"
      "profile = \"sine\"\n"
      "offset = 0.3\n"
      "amplitude = 0.2\n"
      "[initial]\n"
      "mode = 2\n"
      "[sweep]\n"
      "rho = [0.1, 0.05, 0.025]\n"
      "[noise]\n"
      "level = 0.001\n"
      "seed = 7\n"
      "[output]\n"
      "dir = \"elsewhere\"\n");
  texts.push_back(
      "[domain]\n"
      "dim = 2\n"
      "nx = 20\n"
      "ny = 24\n"
      "[time]\n"
      "tau = 2.0\n"
      "[damping]\n"
      "profile = \"piecewise\"\n"
      "breaks = [0.5]\n"
      "levels = [0.25, 0.75]\n"
      "[initial]\n"
      "mode = 1\n"
      "[output]\n"
      "dir = \"out\"\n");

  for (const auto& text : texts) {
    ExperimentConfig cfg = config_from_text(text, "a.toml");
    std::string canon = cfg.canonical_text();
    ExperimentConfig again = config_from_text(canon, "b.toml");
    CHECK(again.canonical_text() == canon);
    CHECK(again.config_hash() == cfg.config_hash());
  }
}

TEST_CASE("cfl factor validation is strict for compute commands only") {
  std::string text =
      "[domain]\n"
      "dim = 1\n"
      "nx = 32\n"
      "[time]\n"
      "tau = 2.0\n"
      "cfl_factor = 1.5\n"
      "[damping]\n"
      "profile = \"constant\"\n"
      "level = 0.5\n";

  std::string msg = error_message([&] { config_from_text(text, "cfg.toml"); });
  CHECK(contains(msg, "cfg.toml:6: cfl_factor must lie in (0, 1], got 1.5"));

  ExperimentConfig lax = config_from_text(text, "cfg.toml", false);
  CHECK(lax.cfl_factor == 1.5);

  std::string neg = text;
  neg.replace(neg.find("1.5"), 3, "-0.5");
  msg = error_message([&] { config_from_text(neg, "cfg.toml", false); });
  CHECK(contains(msg, "cfl_factor must be positive"));
}

TEST_CASE("damping profiles evaluate as documented") {
  DampingSpec constant;
  constant.profile = "constant";
  constant.level = 0.37;
  CHECK(constant.evaluate(0.0) == 0.37);
  CHECK(constant.evaluate(0.9) == 0.37);

  DampingSpec bump;
  bump.profile = "bump";
  bump.center = 0.5;
  bump.width = 0.25;
  bump.height = 0.8;
  CHECK(bump.evaluate(0.5) == Catch::Approx(0.8));
  CHECK(bump.evaluate(0.25) == 0.0);
  CHECK(bump.evaluate(0.95) == 0.0);
  CHECK(bump.evaluate(0.4) == Catch::Approx(bump.evaluate(0.6)));

  DampingSpec pw;
  pw.profile = "piecewise";
  pw.breaks = {0.5};
  pw.levels = {0.25, 0.75};
  CHECK(pw.evaluate(0.2) == 0.25);
  CHECK(pw.evaluate(0.9) == 0.75);

  DampingSpec sine;
  sine.profile = "sine";
  sine.offset = 0.3;
  sine.amplitude = 0.2;
  CHECK(sine.evaluate(0.5) == Catch::Approx(0.5));
  CHECK(sine.evaluate(0.0) == Catch::Approx(0.3));
}

TEST_CASE("csv writer quotes and round-trips") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("has,comma") == "\"has,comma\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("two\nlines") == "\"two\nlines\"");
  CHECK(csv_row({"a", "b"}) == "a,b\r\n");

  std::vector<std::vector<std::string>> table = {
      {"t", "value", "note"},
      {"0.5", "has,comma", "say \"hi\""},
      {"1", "", "two\r\nlines"},
  };
  std::string text;
  for (const auto& row : table) text += csv_row(row);
  CHECK(parse_csv(text) == table);
}

TEST_CASE("seventeen digit floats survive a text round-trip") {
  for (double x : {1.0 / 3.0, kPi, 1e-300, 6.02214076e23, -2.5e-7, 0.1, 1.0}) {
    CHECK(std::stod(format_g17(x)) == x);
  }
}

TEST_CASE("manifests differ only in wall clock") {
  TempTree tree;
  RunManifest m;
  m.command = "eigen";
  m.config_path = "cfg.toml";
  m.config_hash = 0xfeedbeef;
  m.resolved_config = "[domain]\n";
  m.outputs = {"eigen.csv"};
  m.wall_clock_seconds = 0.125;
  write_manifest(tree.path("m1.json"), m);
  m.wall_clock_seconds = 9.5;
  write_manifest(tree.path("m2.json"), m);

  std::string t1 = read_text_file(tree.path("m1.json"));
  std::string t2 = read_text_file(tree.path("m2.json"));
  CHECK(t1 != t2);
  CHECK(strip_wall_clock(t1) == strip_wall_clock(t2));
}

TEST_CASE("svg plots are deterministic and validate input") {
  TempTree tree;
  std::vector<PlotSeries> series{{"gap", {0.1, 0.05, 0.025}, {0.02, 0.01, 0.005}}};
  write_loglog_svg(tree.path("a.svg"), "gap vs rho", "rho", "gap", series, {1.0});
  write_loglog_svg(tree.path("b.svg"), "gap vs rho", "rho", "gap", series, {1.0});
  std::string a = read_text_file(tree.path("a.svg"));
  CHECK(a == read_text_file(tree.path("b.svg")));
  CHECK(contains(a, "<svg"));
  CHECK(contains(a, "</svg>"));
  CHECK(contains(a, "gap vs rho"));

  std::vector<PlotSeries> bad{{"gap", {0.1, 0.05}, {0.02, -0.01}}};
  CHECK(contains(error_message([&] {
          write_loglog_svg(tree.path("c.svg"), "t", "x", "y", bad);
        }),
        "data must be positive"));
  CHECK(contains(error_message([&] { write_line_svg(tree.path("d.svg"), "t", "x", "y", {}); }),
        "no data"));
}

TEST_CASE("cli eigen writes a deterministic tabulation") {
  TempTree tree;
  std::string cfg = tree.path("eig.toml");
  write_text_file(cfg, base_toml(64, 0.5));

  RunResult r1 = run_cli(tree, "eigen --config " + cfg + " --out " + tree.path("run1"));
  REQUIRE(r1.exit_code == 0);
  ordered_json j = ordered_json::parse(r1.out);
  CHECK(j["command"] == "eigen");
  CHECK(j["modes_tabulated"] == 6);
  CHECK(j["admissible"] == true);

  double h = 1.0 / 64.0;
  double lam0 = (4.0 / (h * h)) * std::pow(std::sin(0.5 * kPi * h / 2.0), 2);
  CHECK(j["lambda"].get<double>() == Catch::Approx(lam0).epsilon(1e-10));

  auto rows = parse_csv(read_text_file(tree.path("run1/eigen.csv")));
  REQUIRE(rows.size() == 7);
  CHECK(rows[0] == std::vector<std::string>{"k", "lambda", "sqrt_lambda",
                                            "vanishing_fraction", "admissible"});
  double prev = 0.0;
  for (size_t i = 1; i < rows.size(); ++i) {
    double lam = std::stod(rows[i][1]);
    CHECK(lam > prev);
    prev = lam;
  }
  CHECK(std::stod(rows[1][1]) == Catch::Approx(j["lambda"].get<double>()));

  ordered_json man = ordered_json::parse(read_text_file(tree.path("run1/manifest.json")));
  ExperimentConfig parsed = load_config(cfg);
  CHECK(man["config_hash"] ==
        strfmt("%016llx", static_cast<unsigned long long>(parsed.config_hash())));
  std::set<std::string> listed(man["outputs"].begin(), man["outputs"].end());
  std::set<std::string> expect = listed;
  expect.insert("manifest.json");
  CHECK(listed.count("eigen.csv") == 1);
  CHECK(list_files(tree.path("run1")) == expect);

  RunResult r2 = run_cli(tree, "eigen --config " + cfg + " --out " + tree.path("run2"));
  REQUIRE(r2.exit_code == 0);
  CHECK(r2.out == r1.out);
  CHECK(read_text_file(tree.path("run2/eigen.csv")) ==
        read_text_file(tree.path("run1/eigen.csv")));
  CHECK(strip_wall_clock(read_text_file(tree.path("run2/manifest.json"))) ==
        strip_wall_clock(read_text_file(tree.path("run1/manifest.json"))));

  RunResult r3 =
      run_cli(tree, "eigen --config " + cfg + " --out " + tree.path("run3") + " --dump");
  REQUIRE(r3.exit_code == 0);
  CHECK(fs::exists(tree.path("run3/eigenfunctions.csv")));
  ordered_json man3 = ordered_json::parse(read_text_file(tree.path("run3/manifest.json")));
  std::set<std::string> listed3(man3["outputs"].begin(), man3["outputs"].end());
  CHECK(listed3.count("eigenfunctions.csv") == 1);
}

TEST_CASE("cli eigen sorts the rectangle spectrum") {
  TempTree tree;
  std::string cfg = tree.path("eig2.toml");
  write_text_file(cfg,
                  "[domain]\n"
                  "dim = 2\n"
                  "nx = 12\n"
                  "ny = 14\n"
                  "[time]\n"
                  "tau = 2.0\n"
                  "[damping]\n"
                  "profile = \"constant\"\n"
                  "level = 0.5\n"
                  "[initial]\n"
                  "mode = 0\n");
  RunResult r = run_cli(tree, "eigen --config " + cfg + " --out " + tree.path("run"));
  REQUIRE(r.exit_code == 0);
  auto rows = parse_csv(read_text_file(tree.path("run/eigen.csv")));
  REQUIRE(rows.size() >= 3);
  double prev = 0.0;
  for (size_t i = 1; i < rows.size(); ++i) {
    double lam = std::stod(rows[i][1]);
    CHECK(lam > prev);
    prev = lam;
  }
}

TEST_CASE("cli rejects broken configs with exit code 2") {
  TempTree tree;

  RunResult missing =
      run_cli(tree, "eigen --config " + tree.path("nope.toml") + " --out " + tree.path("o1"));
  CHECK(missing.exit_code == 2);
  CHECK(contains(missing.err, "cannot open config file"));

  std::string unknown = tree.path("unknown.toml");
  write_text_file(unknown, "[domain]\ndim = 1\nnx = 32\nwidth = 3\n");
  RunResult r1 = run_cli(tree, "eigen --config " + unknown + " --out " + tree.path("o2"));
  CHECK(r1.exit_code == 2);
  CHECK(contains(r1.err, "unknown.toml:4"));
  CHECK(contains(r1.err, "unknown key 'width' in [domain]"));

  std::string bad_num = tree.path("badnum.toml");
  write_text_file(bad_num, "[domain]\ndim = 1\nnx = many\n");
  RunResult r2 = run_cli(tree, "eigen --config " + bad_num + " --out " + tree.path("o3"));
  CHECK(r2.exit_code == 2);
  CHECK(contains(r2.err, "badnum.toml:3"));
  CHECK(contains(r2.err, "cannot parse 'many' as a number"));

  std::string sabotaged = tree.path("cfl.toml");
  std::string text = base_toml(64, 0.5);
  text.replace(text.find("tau = 2.0\n") + 10, 0, "cfl_factor = 1.5\n");
  write_text_file(sabotaged, text);
  RunResult r3 = run_cli(tree, "forward --config " + sabotaged + " --out " + tree.path("o4"));
  CHECK(r3.exit_code == 2);
  CHECK(contains(r3.err, "cfl_factor must lie in (0, 1], got 1.5"));

  std::string too_many = tree.path("mode.toml");
  write_text_file(too_many, base_toml(8, 0.5));
  std::string mt = read_text_file(too_many);
  mt.replace(mt.find("mode = 0"), 8, "mode = 100");
  write_text_file(too_many, mt);
  RunResult r4 = run_cli(tree, "eigen --config " + too_many + " --out " + tree.path("o5"));
  CHECK(r4.exit_code == 2);
  CHECK(contains(r4.err, "K must lie in"));
}

TEST_CASE("cli forward tracks the energy budget") {
  TempTree tree;

  std::string calm = tree.path("calm.toml");
  write_text_file(calm, base_toml(64, 0.0));
  RunResult r0 = run_cli(tree, "forward --config " + calm + " --out " + tree.path("calm"));
  REQUIRE(r0.exit_code == 0);
  ordered_json j0 = ordered_json::parse(r0.out);
  CHECK(j0["energy_drift_rel"].get<double>() < 1e-4);

  std::string damped = tree.path("damped.toml");
  write_text_file(damped, base_toml(64, 0.5));
  RunResult r1 = run_cli(tree, "forward --config " + damped + " --out " + tree.path("damped"));
  REQUIRE(r1.exit_code == 0);
  ordered_json j1 = ordered_json::parse(r1.out);
  CHECK(j1["energy_final"].get<double>() < j1["energy_initial"].get<double>());
  CHECK(j1["dissipation_residual"].get<double>() < 1e-3);

  auto rows = parse_csv(read_text_file(tree.path("damped/energy.csv")));
  REQUIRE(rows.size() > 2);
  CHECK(rows[0] == std::vector<std::string>{"t", "energy"});
  double dt = j1["dt"].get<double>();
  double e0 = std::stod(rows[1][1]);
  double slack = 5.0 * dt * dt * e0;
  double prev = e0;
  for (size_t i = 2; i < rows.size(); ++i) {
    double e = std::stod(rows[i][1]);
    CHECK(e <= prev + slack);
    prev = e;
  }

  RunResult r2 = run_cli(tree, "forward --config " + damped + " --out " +
                                   tree.path("oracle") + " --oracle");
  REQUIRE(r2.exit_code == 0);
  ordered_json j2 = ordered_json::parse(r2.out);
  CHECK(j2["oracle_max_field_gap"].get<double>() < 1e-3);
  CHECK(j2["oracle_coverage_F"].get<double>() >= 0.999);
  CHECK(j2["oracle_coverage_u0"].get<double>() == Catch::Approx(1.0));
  auto orows = parse_csv(read_text_file(tree.path("oracle/energy.csv")));
  CHECK(orows[0] == std::vector<std::string>{"t", "energy", "energy_oracle"});
}

TEST_CASE("cli sweep certifies the linear gap and reruns identically") {
  TempTree tree;
  std::string cfg = tree.path("sweep.toml");
  write_text_file(cfg, base_toml(128, 0.5) +
                           "[sweep]\n"
                           "rho = [0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125]\n");

  RunResult r1 = run_cli(tree, "sweep --config " + cfg + " --out " + tree.path("s1"));
  REQUIRE(r1.exit_code == 0);
  ordered_json j = ordered_json::parse(r1.out);
  CHECK(j["verdict"] == "PASS");
  CHECK(j["extrapolated"] == true);
  CHECK(j["ratios_converged"] == true);
  CHECK(j["certificate_all_ok"] == true);
  double two_kappa = 2.0 * j["kappa_hat"].get<double>();
  CHECK(std::abs(two_kappa - 0.5 * kPi / std::sqrt(2.0)) / (0.5 * kPi / std::sqrt(2.0)) < 0.02);
  CHECK(j["kappa_tilde"].get<double>() > 0.9);

  for (const char* name : {"sweep.jsonl", "sweep_summary.csv", "sweep_report.json",
                           "sweep_gap.svg", "sweep_ratios.svg", "manifest.json"})
    CHECK(fs::exists(tree.path(std::string("s1/") + name)));

  RunResult r2 = run_cli(tree, "sweep --config " + cfg + " --out " + tree.path("s2"));
  REQUIRE(r2.exit_code == 0);
  for (const std::string& name : list_files(tree.path("s1"))) {
    std::string a = read_text_file(tree.path("s1/" + name));
    std::string b = read_text_file(tree.path("s2/" + name));
    if (name == "manifest.json") {
      CHECK(strip_wall_clock(a) == strip_wall_clock(b));
    } else {
      CHECK(a == b);
    }
  }
}

TEST_CASE("cli sweep reports degenerate inputs honestly") {
  TempTree tree;

  std::string single = tree.path("single.toml");
  write_text_file(single, base_toml(64, 0.5) + "[sweep]\nrho = [0.1]\n");
  RunResult r1 = run_cli(tree, "sweep --config " + single + " --out " + tree.path("s1"));
  CHECK(r1.exit_code == 1);
  CHECK(contains(r1.err, "single usable rho, extrapolation disabled"));
  ordered_json rep = ordered_json::parse(read_text_file(tree.path("s1/sweep_report.json")));
  CHECK(rep["extrapolated"] == false);
  CHECK(rep["verdict"] == "FAIL");

  std::string zero = tree.path("zero.toml");
  write_text_file(zero, base_toml(64, 0.0) + "[sweep]\nrho = [0.1, 0.05, 0.025]\n");
  RunResult r2 = run_cli(tree, "sweep --config " + zero + " --out " + tree.path("s2"));
  CHECK(r2.exit_code == 2);
  CHECK(contains(r2.err, "damping direction is identically zero"));
}

TEST_CASE("cli reconstruct recovers damping profiles") {
  TempTree tree;

  std::string flat = tree.path("flat.toml");
  write_text_file(flat, base_toml(128, 0.5) + "[reconstruct]\nrho = 0.01\nridge = 0.0\n");
  RunResult r1 = run_cli(tree, "reconstruct --config " + flat + " --out " + tree.path("r1"));
  REQUIRE(r1.exit_code == 0);
  ordered_json j1 = ordered_json::parse(r1.out);
  CHECK(j1["rel_err"].get<double>() <= 0.05);
  CHECK(j1["uniqueness_pass"] == true);
  CHECK(fs::exists(tree.path("r1/recon.csv")));
  CHECK(fs::exists(tree.path("r1/uniqueness.json")));

  std::string wavy = tree.path("wavy.toml");
  write_text_file(wavy,
                  "[domain]\n"
                  "dim = 2\n"
                  "nx = 31\n"
                  "ny = 31\n"
                  "[time]\n"
                  "tau = 2.0\n"
                  "[damping]\n"
                  "profile = \"sine\"\n"
                  "offset = 0.3\n"
                  "amplitude = 0.2\n"
                  "[initial]\n"
                  "mode = 0\n"
                  "[reconstruct]\n"
                  "rho = 0.01\n"
                  "[noise]\n"
                  "level = 0.001\n"
                  "seed = 424242\n");
  RunResult r2 = run_cli(tree, "reconstruct --config " + wavy + " --out " + tree.path("r2"));
  REQUIRE(r2.exit_code == 0);
  ordered_json j2 = ordered_json::parse(r2.out);
  CHECK(j2["rel_err"].get<double>() <= 0.05);
  CHECK(j2["noise_floor_b"].get<double>() > 0.0);
  CHECK(fs::exists(tree.path("r2/recon.svg")));
}

TEST_CASE("cli verify runs the acceptance checklist") {
  TempTree tree;
  std::string cfg = tree.path("verify.toml");
  write_text_file(cfg, base_toml(64, 0.5));

  RunResult r1 =
      run_cli(tree, "verify --config " + cfg + " --quick --out " + tree.path("v1"));
  REQUIRE(r1.exit_code == 0);
  CHECK(contains(r1.out, "verify: PASS"));
  for (int k = 1; k <= 10; ++k) CHECK(contains(r1.out, strfmt("C%d ", k)));

  RunResult r2 =
      run_cli(tree, "verify --config " + cfg + " --quick --out " + tree.path("v2"));
  REQUIRE(r2.exit_code == 0);
  CHECK(read_text_file(tree.path("v1/verify_report.csv")) ==
        read_text_file(tree.path("v2/verify_report.csv")));
  CHECK(read_text_file(tree.path("v1/verify_report.jsonl")) ==
        read_text_file(tree.path("v2/verify_report.jsonl")));

  std::string sabotaged = tree.path("sabotaged.toml");
  std::string text = base_toml(64, 0.5);
  text.replace(text.find("tau = 2.0\n") + 10, 0, "cfl_factor = 1.5\n");
  write_text_file(sabotaged, text);
  RunResult r3 =
      run_cli(tree, "verify --config " + sabotaged + " --quick --out " + tree.path("v3"));
  CHECK(r3.exit_code == 1);
  CHECK(contains(r3.out, "verify: FAIL"));
  size_t c2 = r3.out.find("C2 ");
  REQUIRE(c2 != std::string::npos);
  CHECK(contains(r3.out.substr(c2, r3.out.find('\n', c2) - c2), "FAIL"));
}

TEST_CASE("cli reruns bit-exactly from the embedded config") {
  TempTree tree;
  std::string cfg = tree.path("eig.toml");
  write_text_file(cfg, base_toml(64, 0.5));
  RunResult r1 = run_cli(tree, "eigen --config " + cfg + " --out " + tree.path("a"));
  REQUIRE(r1.exit_code == 0);

  ordered_json man = ordered_json::parse(read_text_file(tree.path("a/manifest.json")));
  std::string embedded = tree.path("embedded.toml");
  write_text_file(embedded, man["resolved_config"].get<std::string>());

  RunResult r2 = run_cli(tree, "eigen --config " + embedded + " --out " + tree.path("b"));
  REQUIRE(r2.exit_code == 0);
  CHECK(read_text_file(tree.path("a/eigen.csv")) == read_text_file(tree.path("b/eigen.csv")));
  ordered_json man2 = ordered_json::parse(read_text_file(tree.path("b/manifest.json")));
  CHECK(man2["config_hash"] == man["config_hash"]);
}
