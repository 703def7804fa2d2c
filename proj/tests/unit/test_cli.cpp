#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unistd.h>

#include "cpml/cli.hpp"
#include "test_support.hpp"

using namespace cpml;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  auto dir = fs::temp_directory_path() / ("cpml_cli_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

const std::string kBalance = std::string(CPML_DATA_DIR) + "/balance-scale.csv";

}  // namespace

TEST_CASE("help for every subcommand") {
  for (const char* sub : {"train", "evaluate", "benchmark", "synth", "noisy", "rademacher"}) {
    auto r = run_cli({sub, "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("--") != std::string::npos);
  }
  auto train_help = run_cli({"train", "--help"}).out;
  for (const char* flag : {"--data", "--label", "--lambda", "--p", "--b", "--step-decay", "--max-iters",
                           "--max-linesearch", "--tol", "--constraints", "--kind", "--seed", "--config", "--out-dir"})
    CHECK(train_help.find(flag) != std::string::npos);
  CHECK(run_cli({"--help"}).code == 0);
  CHECK(run_cli({}).code == 1);
}

TEST_CASE("usage errors") {
  auto r = run_cli({"train", "--label", "class"});
  CHECK(r.code == 1);
  CHECK(r.err.find("--data") != std::string::npos);
  CHECK(run_cli({"train", "--data", kBalance, "--label", "class", "--bogus"}).code == 1);
  CHECK(run_cli({"train", "--data", kBalance, "--label", "class", "--p", "0.5"}).code == 1);
  CHECK(run_cli({"frobnicate"}).code == 1);
}

TEST_CASE("data errors") {
  CHECK(run_cli({"train", "--data", "/nonexistent/x.csv", "--label", "class"}).code == 2);
  CHECK(run_cli({"train", "--data", kBalance, "--label", "nope"}).code == 2);
  auto dir = scratch_dir("single");
  write(dir / "one.csv", "a,y\n1,x\n2,x\n3,x\n");
  CHECK(run_cli({"train", "--data", (dir / "one.csv").string(), "--label", "y"}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("train writes the metric and report") {
  auto dir = scratch_dir("train");
  auto r = run_cli({"train", "--data", kBalance, "--label", "class", "--kind", "single", "--p", "1", "--lambda", "0.01",
                    "--max-iters", "20", "--out-dir", (dir / "out").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("test_acc=") != std::string::npos);
  CHECK(r.err.find("lambda=0.01") != std::string::npos);
  auto M = cli::read_matrix_csv(dir / "out" / "metric.csv");
  CHECK(M.rows() == 4);
  CHECK(M.cols() == 4);
  CHECK((M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  auto j = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
  CHECK(j["kind"] == "single");
  CHECK(j["objective_trace"].size() == j["iterations_run"].get<std::size_t>() + 1);

  auto m = run_cli({"train", "--data", kBalance, "--label", "class", "--kind", "multi", "--max-iters", "5", "--out-dir",
                    (dir / "multi").string()});
  REQUIRE(m.code == 0);
  CHECK(fs::exists(dir / "multi" / "metric_0.csv"));
  CHECK(fs::exists(dir / "multi" / "metric_2.csv"));
  fs::remove_all(dir);
}

TEST_CASE("train output is reproducible") {
  std::vector<std::string> args{"train", "--synthetic", "--n", "150", "--features", "4", "--classes", "3",
                                "--max-iters", "15", "--seed", "9"};
  auto a = run_cli(args), b = run_cli(args);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  args.back() = "10";
  CHECK(run_cli(args).out != a.out);
}

TEST_CASE("non-finite initial metric exits with a numerical error") {
  auto dir = scratch_dir("nan");
  write(dir / "m.csv", "1,0,0,0\n0,nan,0,0\n0,0,1,0\n0,0,0,1\n");
  auto r = run_cli({"train", "--data", kBalance, "--label", "class", "--init-metric", (dir / "m.csv").string()});
  CHECK(r.code == 3);
  write(dir / "small.csv", "1,0\n0,1\n");
  CHECK(run_cli({"train", "--data", kBalance, "--label", "class", "--init-metric", (dir / "small.csv").string()}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("config file precedence") {
  auto dir = scratch_dir("cfg");
  write(dir / "run.cfg", "# comment\nlambda = 0.5\nmax-iters=3\np=2\n");
  auto r = run_cli({"train", "--synthetic", "--n", "90", "--features", "3", "--config", (dir / "run.cfg").string(),
                    "--p", "3"});
  REQUIRE(r.code == 0);
  CHECK(r.err.find("lambda=0.5") != std::string::npos);
  CHECK(r.err.find("max_iters=3") != std::string::npos);
  CHECK(r.err.find("p=3") != std::string::npos);
  write(dir / "bad.cfg", "lambada=1\n");
  CHECK(run_cli({"train", "--synthetic", "--config", (dir / "bad.cfg").string()}).code == 1);

  auto entries = cli::read_config_file(dir / "run.cfg");
  TrainConfig cfg;
  cli::apply_config(entries, cfg);
  CHECK(cfg.lambda == 0.5);
  CHECK(cfg.max_iters == 3);
  CHECK(cfg.p == 2.0);
  fs::remove_all(dir);
}

TEST_CASE("benchmark") {
  CHECK(run_cli({"benchmark", "--data", kBalance, "--label", "class", "--repeats", "0"}).code == 1);
  std::vector<std::string> args{"benchmark", "--synthetic", "--n", "120", "--features", "3", "--classes", "3",
                                "--repeats", "2", "--lambda-grid", "0.01,1", "--max-iters", "10", "--seed", "4"};
  auto a = run_cli(args), b = run_cli(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("euclidean") != std::string::npos);
  CHECK(a.out.find("cpml-s") != std::string::npos);
  CHECK(a.out.find("cpml-m") != std::string::npos);
  CHECK(a.out.find("+/-") != std::string::npos);
}

TEST_CASE("evaluate writes JSON") {
  auto dir = scratch_dir("eval");
  auto r = run_cli({"evaluate", "--synthetic", "--n", "100", "--features", "3", "--method", "euclidean", "--repeats",
                    "3", "--out", (dir / "r.json").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("class_acc_mean=") != std::string::npos);
  auto j = nlohmann::json::parse(slurp(dir / "r.json"));
  for (const char* key : {"dataset", "kind", "p", "repeats", "class_acc_mean", "class_acc_std", "triplet_acc_mean",
                          "triplet_acc_std", "selected_lambdas", "seconds_per_repeat"})
    CHECK(j.contains(key));
  CHECK(j["repeats"] == 3);
  CHECK(run_cli({"evaluate", "--synthetic", "--method", "knn"}).code == 1);
  fs::remove_all(dir);
}

TEST_CASE("noisy table") {
  auto r = run_cli({"noisy", "--n", "80", "--informative", "3", "--classes", "2", "--noisy-counts", "0,1,2,3,4",
                    "--repeats", "1", "--max-iters", "5"});
  REQUIRE(r.code == 0);
  CHECK(count_lines(r.out) == 6);
  std::istringstream in(r.out);
  std::string header, zero;
  std::getline(in, header);
  std::getline(in, zero);
  CHECK(header.find("p=1") != std::string::npos);
  CHECK(header.find("p=3") != std::string::npos);
  CHECK(zero.rfind("0 ", 0) == 0);
  CHECK(std::count(zero.begin(), zero.end(), '+') == 3);
  CHECK(zero.find("0.0000 +/- 0.0000") != std::string::npos);
}

TEST_CASE("rademacher") {
  CHECK(run_cli({"rademacher", "--p", "0.5"}).code == 1);
  auto two = run_cli({"rademacher", "--n", "2", "--D", "3", "--p", "2", "--mc", "exact"});
  REQUIRE(two.code == 0);
  // with one pair the estimate is the norm of that pair, which is also X*
  auto grab = [&](const std::string& key) {
    const auto pos = two.out.find(key + "=");
    return std::stod(two.out.substr(pos + key.size() + 1));
  };
  CHECK(grab("estimate") == doctest::Approx(grab("x_star")).epsilon(1e-12));
  auto all = run_cli({"rademacher"});
  CHECK(all.code == 0);
  CHECK(all.out.find("all PASS") != std::string::npos);
  CHECK(count_lines(all.out) == 4 * 3 * 3 + 1);
}

TEST_CASE("synth round trip and projection dump") {
  auto dir = scratch_dir("synth");
  auto r = run_cli({"synth", "--n", "60", "--features", "3", "--noisy", "2", "--classes", "3", "--seed", "5", "--out",
                    (dir / "s.csv").string()});
  REQUIRE(r.code == 0);
  auto ds = load_csv(dir / "s.csv", std::string("class"));
  CHECK(ds.size() == 60);
  CHECK(ds.num_features() == 5);
  auto stdout_run = run_cli({"synth", "--n", "60", "--features", "3", "--noisy", "2", "--classes", "3", "--seed", "5"});
  CHECK(stdout_run.out == slurp(dir / "s.csv"));

  auto t = run_cli({"train", "--data", (dir / "s.csv").string(), "--label", "class", "--max-iters", "2",
                    "--dump-projection", (dir / "proj.csv").string()});
  REQUIRE(t.code == 0);
  const auto text = slurp(dir / "proj.csv");
  CHECK(count_lines(text) == 36);  // 60 - 12 - 12 training rows
  const auto first = text.substr(0, text.find('\n'));
  CHECK(std::count(first.begin(), first.end(), ',') == 5 * 3 - 1);
  fs::remove_all(dir);
}

TEST_CASE("matrix CSV round trip") {
  auto dir = scratch_dir("mat");
  Eigen::MatrixXd M(2, 3);
  M << 1.0 / 3.0, -2.5e-17, 4, 0, 1e300, -7;
  std::ostringstream os;
  cli::write_matrix_csv(os, M);
  write(dir / "m.csv", os.str());
  CHECK(cli::read_matrix_csv(dir / "m.csv") == M);
  write(dir / "bad.csv", "1,x\n");
  CHECK_THROWS_AS(cli::read_matrix_csv(dir / "bad.csv"), DataError);
  write(dir / "ragged.csv", "1,2\n3\n");
  CHECK_THROWS_AS(cli::read_matrix_csv(dir / "ragged.csv"), DataError);
  fs::remove_all(dir);
}
