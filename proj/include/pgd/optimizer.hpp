#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pgd/coordinator.hpp"
#include "pgd/core.hpp"
#include "pgd/embedding.hpp"
#include "pgd/expansion.hpp"
#include "pgd/gateway.hpp"
#include "pgd/selection.hpp"
#include "pgd/tasks.hpp"

namespace pgd {

struct GatewayConfig {
  std::string provider = "mock";  // mock | echo | http
  std::uint64_t mock_seed = 0;
  std::string base_url;
  std::string model = "default";
  std::string token_env = "PGD_API_TOKEN";
  int timeout_seconds = 30;
  std::string templates_dir;  // empty uses the builtin templates
  std::string cache_path;
  int max_retries = 3;
  int backoff_ms = 50;
  double gradient_temperature = 0.7;
  double fusion_temperature = 0.0;
  double application_temperature = 0.0;
  double paraphrase_temperature = 0.9;
  int max_tokens = 512;
};

struct EncoderConfig {
  std::string kind = "mock";  // mock | http
  int dimension = 64;
  std::uint64_t seed = 0;
  std::string base_url;
  std::string model = "default";
  std::string token_env = "PGD_API_TOKEN";
  int timeout_seconds = 30;
};

struct RunConfig {
  int iterations = 10;
  int beam_width = 1;
  std::string train_path;
  std::string dev_path;
  std::string data_format = "auto";  // auto | jsonl | csv
  int train_minibatch = 8;
  int agent_count = 4;
  int error_cap = 4;
  int feedback_count = 4;
  CoordinatorConfig coordinator;
  bool probe_gradient_weights = false;
  ExpansionConfig expansion;
  int selection_rounds = 16;
  int probe_minibatch = 8;
  std::string strategy = "ucb1";
  std::string search_mode = "beam";
  std::uint64_t seed = 0;
  int patience = 3;
  double epsilon = 1e-4;
  GatewayConfig gateway;
  EncoderConfig encoder;
  std::string metric = "accuracy";  // accuracy | f1 | macro_f1
  std::string positive_label;
  std::optional<std::string> extraction_regex;
  int task_max_tokens = 64;

  void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& config);

std::unique_ptr<Gateway> build_gateway(const GatewayConfig& config);
std::unique_ptr<Encoder> build_encoder(const EncoderConfig& config);

/// True when the last `patience` score deltas each stay below `epsilon`.
/// Needs at least patience + 1 entries.
bool converged(const std::vector<double>& history, int patience, double epsilon);

/// Loads the datasets, builds the gateway and encoder from the config, and
/// runs the full loop.
RunReport run(const RunConfig& config, const std::string& initial_prompt);

/// Same loop with injected backends, for tests and embedding callers.
RunReport run(const RunConfig& config, const std::string& initial_prompt,
              Gateway& gateway, const Encoder& encoder, const Dataset& train,
              const Dataset& dev);

/// Full-dataset score under the configured metric (accuracy, f1, macro_f1).
/// Examples whose prediction raises are skipped and excluded from the pairs.
Score evaluate_prompt(const Prompt& prompt, const Dataset& dataset,
                      const Predictor& predictor, const std::string& metric,
                      const std::string& positive_label,
                      std::vector<std::string>* predictions_out = nullptr);

/// Byte-stable JSON: no timestamps, no transport-level counters.
nlohmann::json report_to_json(const RunReport& report);

}  // namespace pgd
