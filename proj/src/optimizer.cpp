#include "pgd/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "pgd/agents.hpp"
#include "pgd/errors.hpp"
#include "pgd/util.hpp"

namespace pgd {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T* out) {
  if (j.contains(key)) *out = j.at(key).get<T>();
}

struct StageCounts {
  long gradient = 0;
  long fusion = 0;
  long application = 0;
  long paraphrase = 0;
  long task = 0;
};

StageCounts stage_counts(const GatewayStats& stats) {
  StageCounts counts;
  for (const auto& [template_id, samples] : stats.samples_by_template) {
    if (template_id.rfind("gradient_", 0) == 0) counts.gradient += samples;
    else if (template_id == "fuse") counts.fusion += samples;
    else if (template_id == "apply") counts.application += samples;
    else if (template_id == "paraphrase") counts.paraphrase += samples;
    else if (template_id == "task") counts.task += samples;
  }
  return counts;
}

}  // namespace

void RunConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (beam_width < 1) throw std::invalid_argument("beam_width must be >= 1");
  if (train_minibatch < 1) throw std::invalid_argument("train_minibatch must be >= 1");
  if (agent_count < 1 || agent_count > 4) {
    throw std::invalid_argument("agent_count must be between 1 and 4");
  }
  if (error_cap < 1) throw std::invalid_argument("error_cap must be >= 1");
  if (feedback_count < 1) throw std::invalid_argument("feedback_count must be >= 1");
  if (selection_rounds < 1) throw std::invalid_argument("selection_rounds must be >= 1");
  if (probe_minibatch < 1) throw std::invalid_argument("probe_minibatch must be >= 1");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  coordinator.validate();
  expansion.validate();
  strategy_from_name(strategy);
  search_mode_from_name(search_mode);
  if (metric != "accuracy" && metric != "f1" && metric != "macro_f1") {
    throw std::invalid_argument("unknown metric: " + metric);
  }
  if (metric == "f1" && positive_label.empty()) {
    throw std::invalid_argument("f1 metric needs a positive_label");
  }
  if (data_format != "auto" && data_format != "jsonl" && data_format != "csv") {
    throw std::invalid_argument("unknown data_format: " + data_format);
  }
  if (gateway.provider != "mock" && gateway.provider != "echo" &&
      gateway.provider != "http") {
    throw std::invalid_argument("unknown provider: " + gateway.provider);
  }
  if (gateway.provider == "http" && gateway.base_url.empty()) {
    throw std::invalid_argument("http provider needs gateway.base_url");
  }
  if (encoder.kind != "mock" && encoder.kind != "http") {
    throw std::invalid_argument("unknown encoder kind: " + encoder.kind);
  }
  if (encoder.kind == "http" && encoder.base_url.empty()) {
    throw std::invalid_argument("http encoder needs encoder.base_url");
  }
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig config;
  read_field(j, "iterations", &config.iterations);
  read_field(j, "beam_width", &config.beam_width);
  read_field(j, "train_path", &config.train_path);
  read_field(j, "dev_path", &config.dev_path);
  read_field(j, "data_format", &config.data_format);
  read_field(j, "train_minibatch", &config.train_minibatch);
  read_field(j, "agent_count", &config.agent_count);
  read_field(j, "error_cap", &config.error_cap);
  read_field(j, "feedback_count", &config.feedback_count);
  if (j.contains("coordinator")) {
    const auto& c = j.at("coordinator");
    read_field(c, "conflict_threshold", &config.coordinator.conflict_threshold);
    read_field(c, "max_clusters", &config.coordinator.max_clusters);
    read_field(c, "fusion_sharpness", &config.coordinator.fusion_sharpness);
  }
  read_field(j, "probe_gradient_weights", &config.probe_gradient_weights);
  if (j.contains("expansion")) {
    const auto& e = j.at("expansion");
    read_field(e, "successor_cap", &config.expansion.successor_cap);
    read_field(e, "mc_samples", &config.expansion.mc_samples);
    read_field(e, "diversity_margin", &config.expansion.diversity_margin);
    read_field(e, "variants_per_gradient", &config.expansion.variants_per_gradient);
  }
  if (j.contains("selection")) {
    const auto& s = j.at("selection");
    read_field(s, "rounds", &config.selection_rounds);
    read_field(s, "minibatch_size", &config.probe_minibatch);
  }
  read_field(j, "strategy", &config.strategy);
  read_field(j, "search_mode", &config.search_mode);
  read_field(j, "seed", &config.seed);
  read_field(j, "patience", &config.patience);
  read_field(j, "epsilon", &config.epsilon);
  if (j.contains("gateway")) {
    const auto& g = j.at("gateway");
    read_field(g, "provider", &config.gateway.provider);
    read_field(g, "mock_seed", &config.gateway.mock_seed);
    read_field(g, "base_url", &config.gateway.base_url);
    read_field(g, "model", &config.gateway.model);
    read_field(g, "token_env", &config.gateway.token_env);
    read_field(g, "timeout_seconds", &config.gateway.timeout_seconds);
    read_field(g, "templates_dir", &config.gateway.templates_dir);
    read_field(g, "cache_path", &config.gateway.cache_path);
    read_field(g, "max_retries", &config.gateway.max_retries);
    read_field(g, "backoff_ms", &config.gateway.backoff_ms);
    read_field(g, "gradient_temperature", &config.gateway.gradient_temperature);
    read_field(g, "fusion_temperature", &config.gateway.fusion_temperature);
    read_field(g, "application_temperature", &config.gateway.application_temperature);
    read_field(g, "paraphrase_temperature", &config.gateway.paraphrase_temperature);
    read_field(g, "max_tokens", &config.gateway.max_tokens);
  }
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    read_field(e, "kind", &config.encoder.kind);
    read_field(e, "dimension", &config.encoder.dimension);
    read_field(e, "seed", &config.encoder.seed);
    read_field(e, "base_url", &config.encoder.base_url);
    read_field(e, "model", &config.encoder.model);
    read_field(e, "token_env", &config.encoder.token_env);
    read_field(e, "timeout_seconds", &config.encoder.timeout_seconds);
  }
  read_field(j, "metric", &config.metric);
  read_field(j, "positive_label", &config.positive_label);
  if (j.contains("extraction_regex") && !j.at("extraction_regex").is_null()) {
    config.extraction_regex = j.at("extraction_regex").get<std::string>();
  }
  read_field(j, "task_max_tokens", &config.task_max_tokens);
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(path + ": invalid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

nlohmann::json run_config_to_json(const RunConfig& config) {
  nlohmann::json j;
  j["iterations"] = config.iterations;
  j["beam_width"] = config.beam_width;
  j["train_path"] = config.train_path;
  j["dev_path"] = config.dev_path;
  j["data_format"] = config.data_format;
  j["train_minibatch"] = config.train_minibatch;
  j["agent_count"] = config.agent_count;
  j["error_cap"] = config.error_cap;
  j["feedback_count"] = config.feedback_count;
  j["coordinator"] = {{"conflict_threshold", config.coordinator.conflict_threshold},
                      {"max_clusters", config.coordinator.max_clusters},
                      {"fusion_sharpness", config.coordinator.fusion_sharpness}};
  j["probe_gradient_weights"] = config.probe_gradient_weights;
  j["expansion"] = {{"successor_cap", config.expansion.successor_cap},
                    {"mc_samples", config.expansion.mc_samples},
                    {"diversity_margin", config.expansion.diversity_margin},
                    {"variants_per_gradient", config.expansion.variants_per_gradient}};
  j["selection"] = {{"rounds", config.selection_rounds},
                    {"minibatch_size", config.probe_minibatch}};
  j["strategy"] = config.strategy;
  j["search_mode"] = config.search_mode;
  j["seed"] = config.seed;
  j["patience"] = config.patience;
  j["epsilon"] = config.epsilon;
  j["gateway"] = {{"provider", config.gateway.provider},
                  {"mock_seed", config.gateway.mock_seed},
                  {"base_url", config.gateway.base_url},
                  {"model", config.gateway.model},
                  {"token_env", config.gateway.token_env},
                  {"timeout_seconds", config.gateway.timeout_seconds},
                  {"templates_dir", config.gateway.templates_dir},
                  {"cache_path", config.gateway.cache_path},
                  {"max_retries", config.gateway.max_retries},
                  {"backoff_ms", config.gateway.backoff_ms},
                  {"gradient_temperature", config.gateway.gradient_temperature},
                  {"fusion_temperature", config.gateway.fusion_temperature},
                  {"application_temperature", config.gateway.application_temperature},
                  {"paraphrase_temperature", config.gateway.paraphrase_temperature},
                  {"max_tokens", config.gateway.max_tokens}};
  j["encoder"] = {{"kind", config.encoder.kind},
                  {"dimension", config.encoder.dimension},
                  {"seed", config.encoder.seed},
                  {"base_url", config.encoder.base_url},
                  {"model", config.encoder.model},
                  {"token_env", config.encoder.token_env},
                  {"timeout_seconds", config.encoder.timeout_seconds}};
  j["metric"] = config.metric;
  j["positive_label"] = config.positive_label;
  if (config.extraction_regex.has_value()) {
    j["extraction_regex"] = *config.extraction_regex;
  } else {
    j["extraction_regex"] = nullptr;
  }
  j["task_max_tokens"] = config.task_max_tokens;
  return j;
}

std::unique_ptr<Gateway> build_gateway(const GatewayConfig& config) {
  std::unique_ptr<Provider> provider;
  if (config.provider == "mock") {
    provider = make_mock_provider({config.mock_seed, false});
  } else if (config.provider == "echo") {
    provider = make_mock_provider({config.mock_seed, true});
  } else if (config.provider == "http") {
    HttpProviderOptions options;
    options.base_url = config.base_url;
    options.model = config.model;
    options.token_env = config.token_env;
    options.timeout_seconds = config.timeout_seconds;
    provider = make_http_provider(std::move(options));
  } else {
    throw std::invalid_argument("unknown provider: " + config.provider);
  }
  TemplateStore templates = config.templates_dir.empty()
                                ? TemplateStore::builtin()
                                : TemplateStore::from_directory(config.templates_dir);
  GatewayOptions options;
  options.cache_path = config.cache_path;
  options.max_retries = config.max_retries;
  options.backoff_ms = config.backoff_ms;
  return std::make_unique<Gateway>(std::move(provider), std::move(templates), options);
}

std::unique_ptr<Encoder> build_encoder(const EncoderConfig& config) {
  if (config.kind == "mock") {
    return make_mock_encoder(config.dimension, config.seed);
  }
  if (config.kind == "http") {
    HttpEncoderOptions options;
    options.base_url = config.base_url;
    options.model = config.model;
    options.token_env = config.token_env;
    options.timeout_seconds = config.timeout_seconds;
    options.dimension = config.dimension;
    return make_http_encoder(std::move(options));
  }
  throw std::invalid_argument("unknown encoder kind: " + config.kind);
}

bool converged(const std::vector<double>& history, int patience, double epsilon) {
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (history.size() < static_cast<std::size_t>(patience) + 1) return false;
  const std::size_t n = history.size();
  for (int j = 0; j < patience; ++j) {
    const double delta = history[n - 1 - static_cast<std::size_t>(j)] -
                         history[n - 2 - static_cast<std::size_t>(j)];
    if (delta >= epsilon) return false;
  }
  return true;
}

Score evaluate_prompt(const Prompt& prompt, const Dataset& dataset,
                      const Predictor& predictor, const std::string& metric,
                      const std::string& positive_label,
                      std::vector<std::string>* predictions_out) {
  if (dataset.examples.empty()) throw std::invalid_argument("empty dataset");
  std::vector<std::string> predictions, golds;
  for (const auto& example : dataset.examples) {
    std::string prediction;
    try {
      prediction = predictor(prompt, example);
    } catch (const std::exception&) {
      if (predictions_out != nullptr) predictions_out->push_back("");
      continue;
    }
    if (predictions_out != nullptr) predictions_out->push_back(prediction);
    predictions.push_back(prediction);
    golds.push_back(example.gold_label);
  }
  if (predictions.empty()) {
    throw RewardUnavailableError("every example failed during evaluation");
  }
  Score score;
  score.metric_name = metric;
  score.n_evaluated = static_cast<int>(predictions.size());
  if (metric == "accuracy") {
    score.value = accuracy(predictions, golds);
  } else if (metric == "f1") {
    score.value = f1_score(predictions, golds, positive_label);
  } else if (metric == "macro_f1") {
    score.value = macro_f1(predictions, golds);
  } else {
    throw std::invalid_argument("unknown metric: " + metric);
  }
  return score;
}

namespace {

std::vector<std::string> union_vocabulary(const Dataset& train, const Dataset& dev) {
  std::set<std::string> vocab(train.label_vocabulary.begin(),
                              train.label_vocabulary.end());
  vocab.insert(dev.label_vocabulary.begin(), dev.label_vocabulary.end());
  return {vocab.begin(), vocab.end()};
}

std::string pool_hash(const std::vector<CandidatePrompt>& candidates) {
  std::uint64_t h = kFnvOffset;
  for (const auto& c : candidates) {
    h = fnv1a64(c.prompt.text, h);
    h = fnv1a64("\x1f", h);
  }
  return hex64(h);
}

std::map<std::string, std::string> settings_map(const RunConfig& config,
                                                const Gateway& gateway,
                                                const Encoder& encoder) {
  std::map<std::string, std::string> s;
  s["iterations"] = std::to_string(config.iterations);
  s["beam_width"] = std::to_string(config.beam_width);
  s["train_minibatch"] = std::to_string(config.train_minibatch);
  s["agent_count"] = std::to_string(config.agent_count);
  s["error_cap"] = std::to_string(config.error_cap);
  s["feedback_count"] = std::to_string(config.feedback_count);
  s["conflict_threshold"] = fmt_double(config.coordinator.conflict_threshold);
  s["max_clusters"] = std::to_string(config.coordinator.max_clusters);
  s["fusion_sharpness"] = fmt_double(config.coordinator.fusion_sharpness);
  s["probe_gradient_weights"] = config.probe_gradient_weights ? "true" : "false";
  s["successor_cap"] = std::to_string(config.expansion.successor_cap);
  s["mc_samples"] = std::to_string(config.expansion.mc_samples);
  s["diversity_margin"] = fmt_double(config.expansion.diversity_margin);
  s["variants_per_gradient"] = std::to_string(config.expansion.variants_per_gradient);
  s["selection_rounds"] = std::to_string(config.selection_rounds);
  s["probe_minibatch"] = std::to_string(config.probe_minibatch);
  s["strategy"] = config.strategy;
  s["search_mode"] = config.search_mode;
  s["seed"] = std::to_string(config.seed);
  s["patience"] = std::to_string(config.patience);
  s["epsilon"] = fmt_double(config.epsilon);
  s["metric"] = config.metric;
  s["provider"] = gateway.provider_id();
  s["encoder_dimension"] = std::to_string(encoder.dimension());
  return s;
}

}  // namespace

RunReport run(const RunConfig& config, const std::string& initial_prompt) {
  config.validate();
  if (config.train_path.empty() || config.dev_path.empty()) {
    throw std::invalid_argument("train_path and dev_path are required");
  }
  auto resolve_format = [&](const std::string& path) {
    if (config.data_format == "jsonl") return DataFormat::jsonl;
    if (config.data_format == "csv") return DataFormat::csv;
    return format_from_extension(path);
  };
  const Dataset train = load_dataset(config.train_path, resolve_format(config.train_path));
  const Dataset dev = load_dataset(config.dev_path, resolve_format(config.dev_path));
  std::unique_ptr<Gateway> gateway = build_gateway(config.gateway);
  std::unique_ptr<Encoder> encoder = build_encoder(config.encoder);
  return run(config, initial_prompt, *gateway, *encoder, train, dev);
}

RunReport run(const RunConfig& config, const std::string& initial_prompt,
              Gateway& gateway, const Encoder& encoder, const Dataset& train,
              const Dataset& dev) {
  config.validate();
  if (trim(initial_prompt).empty()) {
    throw std::invalid_argument("initial prompt must not be empty");
  }
  if (train.examples.empty() || dev.examples.empty()) {
    throw std::invalid_argument("train and dev sets must not be empty");
  }

  PredictOptions predict_options;
  predict_options.label_vocabulary = union_vocabulary(train, dev);
  predict_options.max_tokens = config.task_max_tokens;
  predict_options.extraction_regex = config.extraction_regex;
  const Predictor predictor = make_gateway_predictor(gateway, predict_options);

  Prompt current;
  current.id = "p0";
  current.text = initial_prompt;
  current.iteration_born = 0;
  current.provenance = "initial";

  RunReport report;
  report.settings = settings_map(config, gateway, encoder);

  const int probe_size =
      std::min(config.probe_minibatch, static_cast<int>(dev.examples.size()));
  const std::vector<LabeledExample> baseline_probe =
      sample_minibatch(dev, probe_size, derive_seed(config.seed, "probe_base"));
  CandidatePrompt baseline;
  baseline.prompt = current;
  double best_score = estimate_reward(baseline, baseline_probe, predictor);
  Prompt best_prompt = current;
  std::vector<double> history = {best_score};

  const Strategy strategy = strategy_from_name(config.strategy);
  const SearchMode mode = search_mode_from_name(config.search_mode);
  const int train_size =
      std::min(config.train_minibatch, static_cast<int>(train.examples.size()));

  int consecutive_failures = 0;
  for (int iteration = 1; iteration <= config.iterations; ++iteration) {
    const StageCounts before = stage_counts(gateway.stats());
    IterationRecord record;
    record.iteration = iteration;
    bool stop = false;

    try {
      const std::vector<LabeledExample> minibatch = sample_minibatch(
          train, train_size,
          derive_seed(config.seed, "train", static_cast<std::uint64_t>(iteration)));

      const std::vector<AgentSpec> agents =
          make_agents(config.agent_count, current, config.error_cap,
                      config.feedback_count);
      GradientGenerationOptions gradient_options;
      gradient_options.temperature = config.gateway.gradient_temperature;
      gradient_options.max_tokens = config.gateway.max_tokens;
      gradient_options.seed = config.seed;
      gradient_options.iteration = iteration;
      const GradientGenerationOutcome gradients = generate_agent_gradients(
          agents, minibatch, predictor, gateway, encoder, gradient_options);
      record.gradients_generated = gradients.set.total();
      record.fallback_agents = gradients.fallback_agents;

      std::vector<double> gradient_scores;
      const std::vector<double>* scores_ptr = nullptr;
      if (config.probe_gradient_weights) {
        // One cheap single-variant application per suggestion, scored on the
        // baseline probe, to bias the fusion weights.
        const std::vector<GradientBlock> flat = gradients.set.flattened();
        ExpansionConfig probe_expansion = config.expansion;
        probe_expansion.variants_per_gradient = 1;
        probe_expansion.mc_samples = 0;
        for (std::size_t i = 0; i < flat.size(); ++i) {
          FusedGradient single;
          single.block = flat[i];
          single.member_indices = {static_cast<int>(i)};
          single.member_weights = {1.0};
          single.cluster_id = static_cast<int>(i);
          double score = 0.0;
          try {
            const std::vector<CandidatePrompt> probes = apply_gradient(
                current, single, gateway, probe_expansion, iteration);
            if (!probes.empty()) {
              score = estimate_reward(probes.front(), baseline_probe, predictor);
            }
          } catch (const std::exception&) {
            score = 0.0;
          }
          gradient_scores.push_back(score);
        }
        scores_ptr = &gradient_scores;
      }

      CoordinatorConfig coordinator = config.coordinator;
      coordinator.fusion_temperature = config.gateway.fusion_temperature;
      coordinator.fusion_max_tokens = config.gateway.max_tokens;
      coordinator.seed =
          derive_seed(config.seed, "clusters", static_cast<std::uint64_t>(iteration));
      const CoordinationOutcome coordination =
          coordinate_and_fuse(gradients.set, gateway, encoder, coordinator, scores_ptr);
      record.fused_count = static_cast<int>(coordination.fused.size());
      record.conflict_count = static_cast<int>(coordination.conflicts.size());
      record.degraded = coordination.degraded;

      ExpansionConfig expansion = config.expansion;
      expansion.application_temperature = config.gateway.application_temperature;
      expansion.paraphrase_temperature = config.gateway.paraphrase_temperature;
      expansion.max_tokens = config.gateway.max_tokens;
      const ExpansionOutcome expanded = expand_prompts(
          current, coordination.fused, gateway, encoder, expansion, iteration);
      record.candidates_generated = static_cast<int>(expanded.candidates.size());
      record.first_generation_variants = expanded.first_generation_variants;
      record.degraded = record.degraded || expanded.degraded;
      record.candidate_pool_hash = pool_hash(expanded.candidates);

      SelectionBudget budget;
      budget.rounds = config.selection_rounds;
      budget.minibatch_size = config.probe_minibatch;
      budget.beam_width = config.beam_width;
      const std::uint64_t select_seed =
          derive_seed(config.seed, "select", static_cast<std::uint64_t>(iteration));
      const SelectionOutcome selection =
          mode == SearchMode::beam
              ? bandit_select(expanded.candidates, dev, predictor, budget, strategy,
                              select_seed)
              : monte_carlo_select(expanded.candidates, dev, predictor, budget,
                                   select_seed);

      std::vector<std::string> beam_ids;
      for (const auto& c : selection.beam) {
        beam_ids.push_back(c.prompt.id);
        record.beam_scores.push_back(c.mean_reward);
      }
      record.beam = join(beam_ids, ",");

      current = selection.best.prompt;
      const double score = selection.best.mean_reward;
      history.push_back(score);
      if (score > best_score) {
        best_score = score;
        best_prompt = current;
      }
      consecutive_failures = 0;

      if (best_score >= 1.0) {
        report.converged_at = iteration;
        stop = true;
      } else if (converged(history, config.patience, config.epsilon)) {
        report.converged_at = iteration;
        stop = true;
      }
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      record.skipped = true;
      record.degraded = true;
      ++consecutive_failures;
      if (consecutive_failures >= 2) {
        report.aborted = true;
        stop = true;
      }
    }

    const StageCounts after = stage_counts(gateway.stats());
    record.gradient_llm_calls = static_cast<int>(after.gradient - before.gradient);
    record.fusion_llm_calls = static_cast<int>(after.fusion - before.fusion);
    record.application_llm_calls =
        static_cast<int>(after.application - before.application);
    record.paraphrase_llm_calls =
        static_cast<int>(after.paraphrase - before.paraphrase);
    record.evaluations_spent = static_cast<int>(after.task - before.task);
    report.per_iteration.push_back(std::move(record));
    if (stop) break;
  }

  report.best_prompt = best_prompt;
  report.best_score = best_score;
  const GatewayStats final_stats = gateway.stats();
  report.total_llm_calls = static_cast<int>(final_stats.samples);
  report.total_eval_examples = static_cast<int>(stage_counts(final_stats).task);
  return report;
}

nlohmann::json report_to_json(const RunReport& report) {
  nlohmann::json j;
  j["best_prompt"] = {
      {"id", report.best_prompt.id},
      {"text", report.best_prompt.text},
      {"parent_id", report.best_prompt.parent_id.has_value()
                        ? nlohmann::json(*report.best_prompt.parent_id)
                        : nlohmann::json(nullptr)},
      {"iteration_born", report.best_prompt.iteration_born},
      {"provenance", report.best_prompt.provenance}};
  j["best_score"] = report.best_score;
  j["converged_at"] = report.converged_at;
  j["aborted"] = report.aborted;
  j["total_llm_calls"] = report.total_llm_calls;
  j["total_eval_examples"] = report.total_eval_examples;
  j["settings"] = report.settings;
  j["per_iteration"] = nlohmann::json::array();
  for (const auto& r : report.per_iteration) {
    j["per_iteration"].push_back(
        {{"iteration", r.iteration},
         {"beam", r.beam},
         {"beam_scores", r.beam_scores},
         {"gradients_generated", r.gradients_generated},
         {"fused_count", r.fused_count},
         {"candidates_generated", r.candidates_generated},
         {"evaluations_spent", r.evaluations_spent},
         {"gradient_llm_calls", r.gradient_llm_calls},
         {"fusion_llm_calls", r.fusion_llm_calls},
         {"application_llm_calls", r.application_llm_calls},
         {"paraphrase_llm_calls", r.paraphrase_llm_calls},
         {"first_generation_variants", r.first_generation_variants},
         {"conflict_count", r.conflict_count},
         {"candidate_pool_hash", r.candidate_pool_hash},
         {"degraded", r.degraded},
         {"skipped", r.skipped},
         {"fallback_agents", r.fallback_agents}});
  }
  return j;
}

}  // namespace pgd
