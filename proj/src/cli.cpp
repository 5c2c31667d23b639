#include "pgd/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pgd/errors.hpp"
#include "pgd/lab.hpp"
#include "pgd/optimizer.hpp"
#include "pgd/util.hpp"

namespace pgd::cli {

namespace {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path);
  out << content;
}

std::string resolve_relative(const std::string& anchor_file, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || fs::exists(path)) return path;
  return (fs::path(anchor_file).parent_path() / path).string();
}

struct Overrides {
  std::string provider;
  std::string templates_dir;
  std::string cache_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

RunConfig load_config_with_overrides(const std::string& config_path,
                                     const Overrides& overrides) {
  RunConfig config = load_run_config(config_path);
  config.train_path = resolve_relative(config_path, config.train_path);
  config.dev_path = resolve_relative(config_path, config.dev_path);
  if (!config.gateway.templates_dir.empty()) {
    config.gateway.templates_dir =
        resolve_relative(config_path, config.gateway.templates_dir);
  }
  if (!overrides.provider.empty()) config.gateway.provider = overrides.provider;
  if (!overrides.templates_dir.empty()) {
    config.gateway.templates_dir = overrides.templates_dir;
  }
  if (!overrides.cache_path.empty()) config.gateway.cache_path = overrides.cache_path;
  if (overrides.seed_set) config.seed = overrides.seed;
  return config;
}

DataFormat resolve_format(const RunConfig& config, const std::string& path) {
  if (config.data_format == "jsonl") return DataFormat::jsonl;
  if (config.data_format == "csv") return DataFormat::csv;
  return format_from_extension(path);
}

nlohmann::json stats_to_json(const GatewayStats& stats) {
  return {{"requests", stats.requests},
          {"samples", stats.samples},
          {"provider_calls", stats.provider_calls},
          {"cache_hits", stats.cache_hits},
          {"samples_by_template", stats.samples_by_template}};
}

void print_report(const RunReport& report) {
  for (const auto& r : report.per_iteration) {
    if (r.skipped) {
      std::cout << "iteration " << r.iteration << ": skipped (stage failure)\n";
      continue;
    }
    std::cout << "iteration " << r.iteration << ": beam=[" << r.beam << "]";
    if (!r.beam_scores.empty()) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f", r.beam_scores.front());
      std::cout << " score=" << buf;
    }
    std::cout << " candidates=" << r.candidates_generated
              << " conflicts=" << r.conflict_count
              << (r.degraded ? " degraded" : "") << "\n";
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", report.best_score);
  std::cout << "best " << report.best_prompt.id << " score " << buf;
  if (report.converged_at >= 0) std::cout << " (converged at " << report.converged_at << ")";
  if (report.aborted) std::cout << " (aborted)";
  std::cout << "\n";
}

struct RunArtifacts {
  RunReport report;
  GatewayStats stats;
};

RunArtifacts execute_run(const RunConfig& config, const std::string& initial_prompt) {
  const Dataset train =
      load_dataset(config.train_path, resolve_format(config, config.train_path));
  const Dataset dev =
      load_dataset(config.dev_path, resolve_format(config, config.dev_path));
  std::unique_ptr<Gateway> gateway = build_gateway(config.gateway);
  std::unique_ptr<Encoder> encoder = build_encoder(config.encoder);
  RunArtifacts artifacts;
  artifacts.report = run(config, initial_prompt, *gateway, *encoder, train, dev);
  artifacts.stats = gateway->stats();
  return artifacts;
}

int cmd_optimize(const std::string& config_path, const std::string& prompt_path,
                 const std::string& out_dir, const Overrides& overrides) {
  RunConfig config = load_config_with_overrides(config_path, overrides);
  config.validate();
  const std::string initial = read_file(prompt_path);

  const RunArtifacts artifacts = execute_run(config, initial);

  fs::create_directories(out_dir);
  write_file((fs::path(out_dir) / "run_config.json").string(),
             run_config_to_json(config).dump(2) + "\n");
  write_file((fs::path(out_dir) / "run_report.json").string(),
             report_to_json(artifacts.report).dump(2) + "\n");
  write_file((fs::path(out_dir) / "best_prompt.txt").string(),
             artifacts.report.best_prompt.text);
  write_file((fs::path(out_dir) / "gateway_stats.json").string(),
             stats_to_json(artifacts.stats).dump(2) + "\n");

  print_report(artifacts.report);
  return artifacts.report.aborted ? 3 : 0;
}

int cmd_ablate(const std::string& config_path, const std::string& prompt_path,
               const std::string& out_dir, const std::string& axis,
               const Overrides& overrides) {
  if (axis != "bandit" && axis != "search") {
    throw std::invalid_argument("axis must be bandit or search");
  }
  RunConfig base = load_config_with_overrides(config_path, overrides);
  base.validate();
  const std::string initial = read_file(prompt_path);

  const std::vector<std::string> variants =
      axis == "bandit" ? std::vector<std::string>{"ucb1", "thompson", "greedy"}
                       : std::vector<std::string>{"beam", "monte_carlo"};

  struct Row {
    std::string variant;
    double best_score;
    int total_llm_calls;
    int total_eval_examples;
    int converged_at;
    std::string pool_hash_iter1;
  };
  std::vector<Row> rows;
  for (const auto& variant : variants) {
    RunConfig config = base;
    if (axis == "bandit") config.strategy = variant;
    else config.search_mode = variant;
    const RunArtifacts artifacts = execute_run(config, initial);
    Row row;
    row.variant = variant;
    row.best_score = artifacts.report.best_score;
    row.total_llm_calls = artifacts.report.total_llm_calls;
    row.total_eval_examples = artifacts.report.total_eval_examples;
    row.converged_at = artifacts.report.converged_at;
    row.pool_hash_iter1 = artifacts.report.per_iteration.empty()
                              ? ""
                              : artifacts.report.per_iteration.front().candidate_pool_hash;
    rows.push_back(std::move(row));
  }

  bool pools_match = true;
  for (const auto& row : rows) {
    if (row.pool_hash_iter1 != rows.front().pool_hash_iter1) pools_match = false;
  }

  std::ostringstream md, csv;
  md << "| variant | best_score | total_llm_calls | total_eval_examples | "
        "converged_at | pool_hash_iter1 |\n";
  md << "|---|---|---|---|---|---|\n";
  csv << "variant,best_score,total_llm_calls,total_eval_examples,converged_at,"
         "pool_hash_iter1\n";
  for (const auto& row : rows) {
    char score[32];
    std::snprintf(score, sizeof(score), "%.4f", row.best_score);
    md << "| " << row.variant << " | " << score << " | " << row.total_llm_calls
       << " | " << row.total_eval_examples << " | " << row.converged_at << " | "
       << row.pool_hash_iter1 << " |\n";
    csv << row.variant << "," << score << "," << row.total_llm_calls << ","
        << row.total_eval_examples << "," << row.converged_at << ","
        << row.pool_hash_iter1 << "\n";
  }

  fs::create_directories(out_dir);
  write_file((fs::path(out_dir) / "ablation.md").string(), md.str());
  write_file((fs::path(out_dir) / "ablation.csv").string(), csv.str());

  std::cout << md.str();
  std::cout << "iteration-1 pools " << (pools_match ? "match" : "DIFFER")
            << " across variants\n";
  return 0;
}

lab::LabConfig lab_config_from_json(const nlohmann::json& j, std::vector<long>* horizons,
                                    int* seeds) {
  lab::LabConfig config;
  if (j.contains("objective")) {
    config.objective = lab::objective_from_name(j.at("objective").get<std::string>());
  }
  if (j.contains("dimension")) config.dimension = j.at("dimension").get<int>();
  if (j.contains("alignment")) config.alignment = j.at("alignment").get<double>();
  if (j.contains("second_moment")) config.second_moment = j.at("second_moment").get<double>();
  if (j.contains("noise_floor")) config.noise_floor = j.at("noise_floor").get<double>();
  if (j.contains("lipschitz")) config.lipschitz = j.at("lipschitz").get<double>();
  if (j.contains("diameter")) config.diameter = j.at("diameter").get<double>();
  if (j.contains("sine_amplitude")) {
    config.sine_amplitude = j.at("sine_amplitude").get<double>();
  }
  if (j.contains("step_rule")) {
    config.step_rule = lab::step_rule_from_name(j.at("step_rule").get<std::string>());
  }
  if (j.contains("fixed_step")) config.fixed_step = j.at("fixed_step").get<double>();
  if (j.contains("step_scale")) config.step_scale = j.at("step_scale").get<double>();
  if (j.contains("start_radius")) config.start_radius = j.at("start_radius").get<double>();
  if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("horizons")) *horizons = j.at("horizons").get<std::vector<long>>();
  if (j.contains("seeds")) *seeds = j.at("seeds").get<int>();
  return config;
}

int cmd_lab(const std::string& config_path, const std::string& objective_flag,
            const std::vector<long>& horizons_flag, int seeds_flag,
            const std::string& out_dir, const Overrides& overrides) {
  lab::LabConfig config;
  std::vector<long> horizons = {100, 1000, 10000};
  int seeds = 50;
  if (!config_path.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(config_path));
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError(config_path + ": invalid JSON: " + e.what());
    }
    config = lab_config_from_json(j, &horizons, &seeds);
  }
  if (!objective_flag.empty()) {
    config.objective = lab::objective_from_name(objective_flag);
  }
  if (!horizons_flag.empty()) horizons = horizons_flag;
  if (seeds_flag > 0) seeds = seeds_flag;
  if (overrides.seed_set) config.seed = overrides.seed;
  config.validate();

  const lab::RateStudy study = lab::run_rate_study(config, horizons, seeds);
  const bool within = study.exponent >= -0.6 && study.exponent <= -0.4;

  fs::create_directories(out_dir);
  nlohmann::json summary = {
      {"objective", lab::objective_name(config.objective)},
      {"horizons", study.horizons},
      {"mean_values", study.mean_values},
      {"exponent", study.exponent},
      {"window", {-0.6, -0.4}},
      {"within_window", within},
      {"lemma_violations", study.total_lemma_violations},
      {"seeds", seeds},
  };
  write_file((fs::path(out_dir) / "lab_summary.json").string(), summary.dump(2) + "\n");

  lab::LabConfig trace_config = config;
  trace_config.horizon = horizons.back();
  trace_config.seed = derive_seed(config.seed, "lab_seed", 0);
  lab::write_trace_csv(lab::simulate(trace_config),
                       (fs::path(out_dir) / "trace.csv").string());

  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", study.exponent);
  std::cout << "objective " << lab::objective_name(config.objective) << " exponent "
            << buf << " target [-0.6, -0.4] " << (within ? "PASS" : "FAIL")
            << " lemma_violations " << study.total_lemma_violations << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& prompt_path,
             const std::string& data_path, const std::string& metric_flag,
             const std::string& out_dir, const Overrides& overrides) {
  RunConfig config = load_config_with_overrides(config_path, overrides);
  if (!metric_flag.empty()) config.metric = metric_flag;
  config.validate();

  const std::string data =
      data_path.empty() ? config.dev_path : resolve_relative(config_path, data_path);
  const Dataset dataset = load_dataset(data, resolve_format(config, data));
  std::unique_ptr<Gateway> gateway = build_gateway(config.gateway);

  Prompt prompt;
  prompt.id = "eval";
  prompt.text = read_file(prompt_path);
  prompt.provenance = "initial";
  prompt.validate();

  PredictOptions options;
  options.label_vocabulary = dataset.label_vocabulary;
  options.max_tokens = config.task_max_tokens;
  options.extraction_regex = config.extraction_regex;
  const Predictor predictor = make_gateway_predictor(*gateway, options);

  std::vector<std::string> predictions;
  const Score score = evaluate_prompt(prompt, dataset, predictor, config.metric,
                                      config.positive_label, &predictions);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ostringstream rows;
    for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
      const nlohmann::json row = {{"input", dataset.examples[i].input},
                                  {"gold", dataset.examples[i].gold_label},
                                  {"prediction", predictions[i]}};
      rows << row.dump() << "\n";
    }
    write_file((fs::path(out_dir) / "predictions.jsonl").string(), rows.str());
  }

  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", score.value);
  std::cout << config.metric << " " << buf << " n=" << score.n_evaluated << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"multi-agent textual-gradient prompt optimizer"};
  app.require_subcommand(1);

  Overrides overrides;
  std::string config_path, prompt_path, out_dir = "out";
  std::string axis = "bandit";
  std::string data_path, metric_flag, objective_flag;
  std::vector<long> horizons_flag;
  int seeds_flag = 0;
  std::string lab_out = "out";

  auto add_common = [&](CLI::App* cmd, bool needs_prompt) {
    cmd->add_option("--config", config_path, "run config JSON")->required();
    if (needs_prompt) {
      cmd->add_option("--prompt", prompt_path, "initial prompt file")->required();
    }
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", overrides.seed, "seed override")
        ->each([&](const std::string&) { overrides.seed_set = true; });
    cmd->add_option("--provider", overrides.provider, "provider override")
        ->check(CLI::IsMember({"mock", "echo", "http"}));
    cmd->add_option("--templates", overrides.templates_dir, "template directory override");
    cmd->add_option("--cache", overrides.cache_path, "completion cache file override");
  };

  CLI::App* optimize = app.add_subcommand("optimize", "run the optimization loop");
  add_common(optimize, true);

  CLI::App* ablate = app.add_subcommand("ablate", "compare strategies on one config");
  add_common(ablate, true);
  ablate->add_option("--axis", axis, "bandit or search")
      ->check(CLI::IsMember({"bandit", "search"}));

  CLI::App* lab_cmd = app.add_subcommand("lab", "convergence-rate study");
  lab_cmd->add_option("--config", config_path, "lab config JSON");
  lab_cmd->add_option("--objective", objective_flag, "objective override")
      ->check(CLI::IsMember({"convex_norm", "nonconvex_sine"}));
  lab_cmd->add_option("--horizons", horizons_flag, "horizons override");
  lab_cmd->add_option("--seeds", seeds_flag, "seeds per horizon");
  lab_cmd->add_option("--out", lab_out, "output directory");
  lab_cmd->add_option("--seed", overrides.seed, "base seed override")
      ->each([&](const std::string&) { overrides.seed_set = true; });

  CLI::App* eval = app.add_subcommand("eval", "score a prompt on a dataset");
  add_common(eval, true);
  eval->add_option("--data", data_path, "dataset to score (defaults to dev)");
  eval->add_option("--metric", metric_flag, "metric override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (optimize->parsed()) {
      return cmd_optimize(config_path, prompt_path, out_dir, overrides);
    }
    if (ablate->parsed()) {
      return cmd_ablate(config_path, prompt_path, out_dir, axis, overrides);
    }
    if (lab_cmd->parsed()) {
      return cmd_lab(config_path, objective_flag, horizons_flag, seeds_flag, lab_out,
                     overrides);
    }
    if (eval->parsed()) {
      return cmd_eval(config_path, prompt_path, data_path, metric_flag, out_dir,
                      overrides);
    }
    std::cerr << "no subcommand given\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IngestionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace pgd::cli
