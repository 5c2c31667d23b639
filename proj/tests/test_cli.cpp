#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_cli(const std::string& args) {
  const std::string command = std::string(PGD_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 4096> buffer{};
  CommandResult result;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (std::size_t n = fread(buffer.data(), 1, buffer.size(), pipe)) {
    result.output.append(buffer.data(), n);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

fs::path source_dir() { return fs::path(PGD_SOURCE_DIR); }

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

/// A 3-iteration config over the bundled demo data, kept fast.
fs::path small_config(const fs::path& dir, int iterations = 3) {
  nlohmann::json j = nlohmann::json::parse(
      read_file(source_dir() / "data" / "demo_run_config.json"));
  j["iterations"] = iterations;
  j["train_path"] = (source_dir() / "data" / "demo_train.jsonl").string();
  j["dev_path"] = (source_dir() / "data" / "demo_dev.jsonl").string();
  j["selection_rounds"] = 6;
  j["expansion"]["mc_samples"] = 1;
  const fs::path path = dir / "config.json";
  std::ofstream(path) << j.dump(2);
  std::ofstream(dir / "prompt.txt") << "label the sentiment of the sentence";
  return path;
}

std::string prompt_arg(const fs::path& config) {
  return " --prompt " + (config.parent_path() / "prompt.txt").string();
}

}  // namespace

TEST_CASE("help and missing arguments") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("optimize --help").exit_code == 0);

  const CommandResult no_config = run_cli("optimize");
  CHECK(no_config.exit_code != 0);

  const CommandResult bad_path = run_cli("optimize --config /nonexistent/cfg.json");
  CHECK(bad_path.exit_code == 2);

  const CommandResult bad_sub = run_cli("transmogrify");
  CHECK(bad_sub.exit_code != 0);
}

TEST_CASE("optimize writes a complete artifact set") {
  const fs::path dir = fresh_dir("pgd_cli_opt");
  const fs::path config = small_config(dir);
  const CommandResult result = run_cli(
      "optimize --config " + config.string() + prompt_arg(config) + " --out " + (dir / "out").string());
  INFO(result.output);
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("best ") != std::string::npos);

  for (const char* name :
       {"run_report.json", "run_config.json", "best_prompt.txt", "gateway_stats.json"}) {
    CHECK(fs::exists(dir / "out" / name));
  }

  const nlohmann::json report =
      nlohmann::json::parse(read_file(dir / "out" / "run_report.json"));
  CHECK(report.at("per_iteration").size() >= 1);
  CHECK(report.at("best_score").is_number());
  CHECK(report.at("best_prompt").at("text") ==
        read_file(dir / "out" / "best_prompt.txt"));

  const nlohmann::json stats =
      nlohmann::json::parse(read_file(dir / "out" / "gateway_stats.json"));
  CHECK(stats.at("samples").get<long>() > 0);
  fs::remove_all(dir);
}

TEST_CASE("optimize is byte-deterministic across processes") {
  const fs::path dir = fresh_dir("pgd_cli_det");
  const fs::path config = small_config(dir, 2);
  const CommandResult a = run_cli(
      "optimize --config " + config.string() + prompt_arg(config) + " --out " + (dir / "a").string());
  const CommandResult b = run_cli(
      "optimize --config " + config.string() + prompt_arg(config) + " --out " + (dir / "b").string());
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(read_file(dir / "a" / "run_report.json") == read_file(dir / "b" / "run_report.json"));
  CHECK(read_file(dir / "a" / "best_prompt.txt") == read_file(dir / "b" / "best_prompt.txt"));
  CHECK(a.output == b.output);
  fs::remove_all(dir);
}

TEST_CASE("seed and provider overrides change the run") {
  const fs::path dir = fresh_dir("pgd_cli_seed");
  const fs::path config = small_config(dir, 2);
  const CommandResult a = run_cli("optimize --config " + config.string() + prompt_arg(config) + " --seed 1 --out " +
                                  (dir / "a").string());
  const CommandResult b = run_cli("optimize --config " + config.string() + prompt_arg(config) + " --seed 2 --out " +
                                  (dir / "b").string());
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  const auto ra = nlohmann::json::parse(read_file(dir / "a" / "run_report.json"));
  const auto rb = nlohmann::json::parse(read_file(dir / "b" / "run_report.json"));
  CHECK(ra.at("per_iteration").at(0).at("candidate_pool_hash") !=
        rb.at("per_iteration").at(0).at("candidate_pool_hash"));
  CHECK(ra.at("settings").at("seed") == "1");

  const CommandResult echo = run_cli("optimize --config " + config.string() + prompt_arg(config) +
                                     " --provider echo --out " + (dir / "echo").string());
  REQUIRE(echo.exit_code == 0);
  const auto re = nlohmann::json::parse(read_file(dir / "echo" / "run_report.json"));
  CHECK(re.at("settings").at("provider") == "mock-echo");
  fs::remove_all(dir);
}

TEST_CASE("ablate compares variants on one axis") {
  const fs::path dir = fresh_dir("pgd_cli_ablate");
  const fs::path config = small_config(dir, 2);
  const CommandResult result = run_cli("ablate --config " + config.string() + prompt_arg(config) +
                                       " --axis bandit --out " + (dir / "out").string());
  INFO(result.output);
  CHECK(result.exit_code == 0);
  CHECK(fs::exists(dir / "out" / "ablation.md"));
  CHECK(fs::exists(dir / "out" / "ablation.csv"));

  std::ifstream csv(dir / "out" / "ablation.csv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  REQUIRE(lines.size() == 4);  // header + ucb1 + thompson + greedy
  CHECK(lines[0].rfind("variant,", 0) == 0);
  CHECK(result.output.find("iteration-1 pools match") != std::string::npos);

  const CommandResult bad_axis =
      run_cli("ablate --config " + config.string() + prompt_arg(config) + " --axis flux");
  CHECK(bad_axis.exit_code != 0);
  fs::remove_all(dir);
}

TEST_CASE("lab runs a rate study and writes a summary") {
  const fs::path dir = fresh_dir("pgd_cli_lab");
  const CommandResult result =
      run_cli("lab --objective convex_norm --horizons 100 --horizons 1000 --horizons 10000 "
              "--seeds 10 --seed 3 --out " +
              (dir / "out").string());
  INFO(result.output);
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("exponent") != std::string::npos);
  REQUIRE(fs::exists(dir / "out" / "lab_summary.json"));
  REQUIRE(fs::exists(dir / "out" / "trace.csv"));

  const nlohmann::json summary =
      nlohmann::json::parse(read_file(dir / "out" / "lab_summary.json"));
  CHECK(summary.at("objective") == "convex_norm");
  CHECK(summary.at("horizons").size() == 3);
  CHECK(summary.at("lemma_violations") == 0);
  const double exponent = summary.at("exponent").get<double>();
  CHECK(exponent < 0.0);

  std::ifstream csv(dir / "out" / "trace.csv");
  std::string header;
  REQUIRE(static_cast<bool>(std::getline(csv, header)));
  CHECK(header == "step,objective,grad_norm_sq");
  fs::remove_all(dir);
}

TEST_CASE("lab reads the bundled config file") {
  const fs::path dir = fresh_dir("pgd_cli_lab_cfg");
  const fs::path config = source_dir() / "data" / "demo_lab_config.json";
  const CommandResult result = run_cli("lab --config " + config.string() + " --seeds 10 --out " +
                                       (dir / "out").string());
  INFO(result.output);
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("convex_norm") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("eval scores a prompt file against a dataset") {
  const fs::path dir = fresh_dir("pgd_cli_eval");
  const fs::path config = small_config(dir);
  const fs::path prompt = dir / "prompt.txt";
  std::ofstream(prompt) << "label the sentiment";

  const CommandResult result = run_cli("eval --config " + config.string() + " --prompt " +
                                       prompt.string() + " --out " + (dir / "out").string());
  INFO(result.output);
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("accuracy") != std::string::npos);
  CHECK(result.output.find("n=12") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "predictions.jsonl"));

  std::ifstream in(dir / "out" / "predictions.jsonl");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("input"));
    CHECK(j.contains("gold"));
    CHECK(j.contains("prediction"));
    ++rows;
  }
  CHECK(rows == 12);

  const CommandResult bad_metric = run_cli("eval --config " + config.string() + " --prompt " +
                                           prompt.string() + " --metric auc");
  CHECK(bad_metric.exit_code == 2);
  fs::remove_all(dir);
}
