// Integration tests driving the installed CLI binary through temp configs.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* kCli = GEOGNN_CLI_PATH;

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_cli(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "geognn_cli_test.log";
  const std::string cmd = std::string(kCli) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CommandResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::ostringstream buf;
  buf << in.rdbuf();
  res.output = buf.str();
  return res;
}

fs::path make_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const char* kSpectrumConfig = R"({
  "manifold": "circle",
  "n": 100,
  "seed": 1,
  "kernel": {"kind": "dense", "d": 1, "rule": "dense_rate"},
  "k": 100,
  "align_k": 5
})";

const char* kConvergeConfig = R"({
  "manifold": "circle",
  "n_grid": [60, 90],
  "seeds": [1, 2, 3],
  "kernels": [{"kind": "dense", "d": 1, "rule": "dense_rate"}],
  "filter": {"h": [0.0, 1.0]},
  "input_coeffs": {"1": 1.0},
  "truncation": 10,
  "align_k": 3,
  "gnn": {"widths": [1, 2, 1], "taps": 3, "nonlinearity": "relu", "weight_seed": 7}
})";

}  // namespace

TEST_CASE("spectrum command emits ascending eigenvalues") {
  const fs::path dir = make_dir("geognn_cli_spectrum");
  write_file(dir / "config.json", kSpectrumConfig);
  const auto res = run_cli("spectrum --config " + (dir / "config.json").string() +
                           " --out " + (dir / "out").string());
  REQUIRE(res.exit_code == 0);

  std::ifstream csv(dir / "out" / "spectrum.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "index,eigenvalue");
  double prev = -1.0;
  int rows = 0;
  std::string line;
  while (std::getline(csv, line)) {
    const auto comma = line.find(',');
    const double value = std::stod(line.substr(comma + 1));
    CHECK(value >= prev);
    if (rows == 0) CHECK(std::abs(value) < 1e-8);
    prev = value;
    ++rows;
  }
  CHECK(rows == 100);
  CHECK(fs::exists(dir / "out" / "alignment.csv"));
  CHECK(fs::exists(dir / "out" / "manifest.json"));
}

TEST_CASE("missing required field names the field and exits 1") {
  const fs::path dir = make_dir("geognn_cli_badcfg");
  write_file(dir / "config.json", R"({"manifold": "circle", "n": 50})");
  const auto res = run_cli("spectrum --config " + (dir / "config.json").string() +
                           " --out " + (dir / "out").string());
  CHECK(res.exit_code == 1);
  CHECK(res.output.find("kernel") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "out" / "spectrum.csv"));
}

TEST_CASE("k larger than n is clamped with a manifest warning") {
  const fs::path dir = make_dir("geognn_cli_clamp");
  std::string cfg = kSpectrumConfig;
  const auto pos = cfg.find("\"k\": 100");
  cfg.replace(pos, 8, "\"k\": 500");
  write_file(dir / "config.json", cfg);
  const auto res = run_cli("spectrum --config " + (dir / "config.json").string() +
                           " --out " + (dir / "out").string());
  REQUIRE(res.exit_code == 0);
  const std::string manifest = read_file(dir / "out" / "manifest.json");
  CHECK(manifest.find("clamped") != std::string::npos);
}

TEST_CASE("dry run validates without writing") {
  const fs::path dir = make_dir("geognn_cli_dry");
  write_file(dir / "config.json", kConvergeConfig);
  const auto res = run_cli("converge --dry-run --config " +
                           (dir / "config.json").string() + " --out " +
                           (dir / "out").string());
  CHECK(res.exit_code == 0);
  CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("converge runs are byte-identical and fixtures gate the exit code") {
  const fs::path dir = make_dir("geognn_cli_converge");
  write_file(dir / "config.json", kConvergeConfig);
  const std::string base = " --config " + (dir / "config.json").string();

  const auto first = run_cli("converge" + base + " --out " + (dir / "out1").string());
  REQUIRE(first.exit_code == 0);
  const auto second = run_cli("converge" + base + " --out " + (dir / "out2").string());
  REQUIRE(second.exit_code == 0);
  CHECK(read_file(dir / "out1" / "curve.csv") == read_file(dir / "out2" / "curve.csv"));
  CHECK(read_file(dir / "out1" / "medians.csv") == read_file(dir / "out2" / "medians.csv"));

  // Regenerate a fixture, rerun against it (pass), then corrupt it (exit 2).
  std::string cfg = kConvergeConfig;
  cfg.insert(cfg.rfind('}'), ", \"fixture\": \"fixture.json\"");
  write_file(dir / "config.json", cfg);
  const auto regen = run_cli("converge --regen-oracle" + base + " --out " +
                             (dir / "out3").string());
  REQUIRE(regen.exit_code == 0);
  REQUIRE(fs::exists(dir / "fixture.json"));

  const auto pass = run_cli("converge" + base + " --out " + (dir / "out4").string());
  CHECK(pass.exit_code == 0);

  // A fixture that cannot match trips the oracle assertion: exit code 2.
  write_file(dir / "fixture.json",
             R"({"tolerance_rel": 1e-9, "medians": {"dense/gnn_err": {"60": 12345.0}}})");
  const auto fail = run_cli("converge" + base + " --out " + (dir / "out5").string());
  CHECK(fail.exit_code == 2);
}

TEST_CASE("train command writes checkpoint and loss trajectory") {
  const fs::path dir = make_dir("geognn_cli_train");
  write_file(dir / "config.json", R"({
    "seed": 3,
    "manifold": "circle",
    "n_train": 80,
    "truncation": 8,
    "kernel": {"kind": "dense", "d": 1, "rule": "dense_rate"},
    "input_coeffs": {"1": 1.0, "3": 0.4},
    "target_filter": {"h": [0.0, 1.0]},
    "arch": {"widths": [1, 1], "taps": 4, "nonlinearity": "relu"},
    "train": {"loss": "mse", "optimizer": "sgd", "learning_rate": 0.05, "epochs": 40}
  })");
  const auto res = run_cli("train --config " + (dir / "config.json").string() +
                           " --out " + (dir / "out").string());
  REQUIRE(res.exit_code == 0);
  CHECK(fs::exists(dir / "out" / "checkpoint.txt"));
  const std::string loss = read_file(dir / "out" / "loss.csv");
  CHECK(loss.rfind("epoch,loss,penalty\n", 0) == 0);
  // Training is deterministic, and the loss must improve on this toy task.
  std::istringstream is(loss);
  std::string line, first_row, last_row;
  std::getline(is, line);
  while (std::getline(is, line))
    if (!line.empty()) {
      if (first_row.empty()) first_row = line;
      last_row = line;
    }
  const auto loss_of = [](const std::string& row) {
    const auto a = row.find(',');
    const auto b = row.find(',', a + 1);
    return std::stod(row.substr(a + 1, b - a - 1));
  };
  CHECK(loss_of(last_row) < loss_of(first_row));
}

TEST_CASE("transfer command reports median drift per n2") {
  const fs::path dir = make_dir("geognn_cli_transfer");
  write_file(dir / "config.json", R"({
    "manifold": "circle",
    "kernel": {"kind": "dense", "d": 1, "rule": "dense_rate"},
    "n1": 60,
    "n2_grid": [60, 120],
    "seeds": [1, 2, 3],
    "truncation": 8,
    "quadrature": 128,
    "input_coeffs": {"1": 1.0},
    "arch": {"widths": [1, 1], "taps": 3, "nonlinearity": "identity"}
  })");
  const auto res = run_cli("transfer --config " + (dir / "config.json").string() +
                           " --out " + (dir / "out").string());
  REQUIRE(res.exit_code == 0);
  const std::string summary = read_file(dir / "out" / "summary.json");
  CHECK(summary.find("\"60\": 0.0") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "transfer.csv"));
}

