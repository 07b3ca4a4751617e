#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nonlocal/config.hpp"
#include "nonlocal/run.hpp"

using namespace nonlocal;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("nonlocal_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(NONLOCAL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string data(const std::string& name) { return std::string(NONLOCAL_TEST_DATA) + "/" + name; }

std::string minimal() { return slurp(data("minimal.yaml")); }

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("validate end to end") {
  const auto out = scratch("validate");
  CHECK(cli("validate --config " + data("minimal.yaml") + " --out " + out.string()) == 0);
  const auto results = json::parse(slurp(out / "results.json"));
  CHECK(results["status"] == "ok");
  CHECK(results["constants"]["r_delta"].get<double>() == doctest::Approx((1.7 + 0.5) * 2 / 0.9).epsilon(1e-14));
  CHECK(results["constants"]["norm_decay_rate"].get<double>() == doctest::Approx(0.45).epsilon(1e-14));
  CHECK(results["checks"].size() > 10);

  const auto manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["exit_code"] == 0);
  CHECK(manifest["config_hash"].get<std::string>().size() == 16);
  CHECK(manifest.contains("wall_time_seconds"));
  CHECK(manifest["versions"].contains("eigen"));
  for (const auto& f : manifest["files"]) CHECK(fs::exists(out / f.get<std::string>()));
  std::size_t on_disk = 0;
  for (const auto& e : fs::directory_iterator(out)) on_disk += e.path().filename() != "manifest.json";
  CHECK(on_disk == manifest["files"].size());
}

TEST_CASE("exit codes follow the failure class") {
  const auto dir = scratch("codes");

  SUBCASE("usage: missing config file or unknown subcommand") {
    CHECK(cli("validate --config /nonexistent.yaml") == 1);
    CHECK(cli("explode --config " + data("minimal.yaml")) == 1);
    CHECK(cli("") == 1);
  }

  SUBCASE("configuration: dt = 0") {
    write(dir / "c.yaml", replace(minimal(), "dt: 0.01", "dt: 0"));
    CHECK(cli("validate -c " + (dir / "c.yaml").string() + " -o " + (dir / "o").string()) == 1);
  }

  SUBCASE("hypothesis: k_f + k_g >= h0") {
    write(dir / "c.yaml", replace(replace(minimal(), "k_f: 0.05", "k_f: 0.6"), "k_g: 0.05", "k_g: 0.5"));
    CHECK(cli("validate -c " + (dir / "c.yaml").string() + " -o " + (dir / "o").string()) == 2);
    const auto results = json::parse(slurp(dir / "o" / "results.json"));
    CHECK(results["message"].get<std::string>().find("k_f + k_g < h_0") != std::string::npos);
    CHECK(json::parse(slurp(dir / "o" / "manifest.json"))["exit_code"] == 2);
  }

  SUBCASE("numerical: overflow during stepping") {
    auto text = replace(minimal(), "name: validate", "name: simulate\n  initial: {kind: constant, amplitude: 1.7e308}");
    text = replace(text, "dt: 0.01", "scheme: rk4\n  dt: 0.01");
    text = replace(text, "h0: 1.0", "h0: 2.0");
    write(dir / "c.yaml", text);
    CHECK(cli("simulate -c " + (dir / "c.yaml").string() + " -o " + (dir / "o").string()) == 3);
  }

  SUBCASE("diagnostic: the trajectory does not reach the ball in time") {
    write(dir / "c.yaml", replace(minimal(), "t_end: 1.0", "t_end: 0.05"));
    CHECK(cli("absorb -c " + (dir / "c.yaml").string() + " -o " + (dir / "o").string()) == 4);
  }

  SUBCASE("io: output directory cannot be created") {
    write(dir / "blocker", "x");
    CHECK(cli("validate -c " + data("minimal.yaml") + " -o " + (dir / "blocker" / "sub").string()) == 5);
  }

  SUBCASE("resource: kernel matrix over the size cap") {
    write(dir / "c.yaml", replace(minimal(), "nodes_per_axis: 64", "nodes_per_axis: 5000"));
    CHECK(cli("validate -c " + (dir / "c.yaml").string() + " -o " + (dir / "o").string()) == 6);
  }
}

TEST_CASE("simulate writes one CSV per trajectory, deterministically") {
  auto text = replace(minimal(), "name: validate", "name: simulate\n  trajectories: 3");
  const auto dir = scratch("simulate");
  write(dir / "c.yaml", replace(text, "decay:", "p: [2, 1]\n  decay:"));
  const auto cfg = (dir / "c.yaml").string();
  CHECK(cli("simulate -c " + cfg + " -o " + (dir / "a").string() + " --seed 7 -j 2") == 0);
  CHECK(cli("simulate -c " + cfg + " -o " + (dir / "b").string() + " --seed 7 -j 2") == 0);
  CHECK(cli("simulate -c " + cfg + " -o " + (dir / "c").string() + " --seed 8 -j 2") == 0);

  const auto manifest = json::parse(slurp(dir / "a" / "manifest.json"));
  const auto hash = manifest["config_hash"].get<std::string>();
  int csvs = 0;
  for (const auto& f : manifest["files"]) {
    const auto name = f.get<std::string>();
    CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
    if (name.ends_with(".csv")) {
      ++csvs;
      CHECK(name.find(hash.substr(0, 8)) != std::string::npos);
    }
  }
  CHECK(csvs == 3);
  const auto first = "trajectory_" + hash.substr(0, 8) + "_0.csv";
  CHECK(slurp(dir / "a" / first).rfind("t,norm_p2,norm_p1,sup_norm\n", 0) == 0);
  CHECK(json::parse(slurp(dir / "a" / "manifest.json"))["seed"] == 7);

  const auto other = json::parse(slurp(dir / "c" / "manifest.json"))["config_hash"].get<std::string>();
  CHECK(other != hash);
}

TEST_CASE("in-process runs of every experiment") {
  auto cfg = parse_config(minimal());
  cfg.integrator.t_end = 12;
  cfg.integrator.record_every = 5;
  cfg.experiment.ensemble_size = 3;
  cfg.experiment.snapshots_per_member = 2;
  const auto dir = scratch("inproc");

  for (const std::string name : {"validate", "simulate", "absorb", "attractor"}) {
    RunOptions opts;
    opts.experiment = name;
    opts.output_dir = (dir / name).string();
    const auto res = run(cfg, opts);
    CHECK_MESSAGE(res.exit_code == 0, name << ": " << res.message);
    CHECK(res.files.back() == "manifest.json");
    const auto results = json::parse(slurp(dir / name / "results.json"));
    CHECK(results["experiment"] == name);
  }

  SUBCASE("deviation") {
    RunOptions opts;
    opts.experiment = "deviation";
    opts.output_dir = (dir / "deviation_strict").string();
    // h = 1 model: superlinear response at the widest level breaks the frozen envelope
    const auto strict = run(cfg, opts);
    CHECK(strict.exit_code == 4);
    const auto failed = json::parse(slurp(dir / "deviation_strict" / "results.json"));
    CHECK(failed["failure"].get<std::string>().find("envelope violated") != std::string::npos);
    CHECK(failed["levels"].size() == 7);

    auto d = load_config(data("continuity.yaml"));
    d.integrator.t_end = 5;
    d.experiment.perturbation = "mix";
    opts.output_dir = (dir / "deviation").string();
    const auto res = run(d, opts);
    CHECK_MESSAGE(res.exit_code == 0, res.message);
    const auto results = json::parse(slurp(dir / "deviation" / "results.json"));
    CHECK(results["passed"] == true);
    CHECK(results["loglog_slope"].get<double>() == doctest::Approx(1.0).epsilon(0.1));
  }

  SUBCASE("gradient requires gradient diagnostics") {
    RunOptions opts;
    opts.experiment = "gradient";
    opts.output_dir = (dir / "gradient_off").string();
    CHECK(run(cfg, opts).exit_code == 1);

    auto g = cfg;
    g.model.decay = {DecayFamily::affine, 2.0, 0.5};
    g.model.reaction = ReactionSpec<double>{};
    g.model.reaction.k_f = g.model.reaction.c_f = 0.01;
    g.model.gain = {GainFamily::linear, 0.5, 0, 1, 0.5, 0.5};
    g.model.gradient_diagnostics = true;
    g.kernel.spec.radius = 0.5;
    g.integrator.t_end = 2;
    g.experiment.initial = {"sine", 0.5, 16.0, 0.0};
    opts.output_dir = (dir / "gradient_on").string();
    const auto res = run(g, opts);
    CHECK_MESSAGE(res.exit_code == 0, res.message);
    const auto results = json::parse(slurp(dir / "gradient_on" / "results.json"));
    CHECK(results["pairs_checked"].get<int>() > 0);
  }
}

TEST_CASE("continuity with 7 levels") {
  const auto dir = scratch("continuity");
  CHECK(cli("continuity -c " + data("continuity.yaml") + " -o " + dir.string() + " -j 2") == 0);
  const auto results = json::parse(slurp(dir / "results.json"));
  CHECK(results["semidistances"].size() == 7);
  CHECK(results["perturbation_sizes"].size() == 7);
  CHECK(results["passed"] == true);
  const auto hash = results["config_hash"].get<std::string>();
  CHECK(fs::exists(dir / ("continuity_" + hash.substr(0, 8) + ".csv")));
  CHECK(fs::exists(dir / ("envelope_" + hash.substr(0, 8) + ".csv")));
}
