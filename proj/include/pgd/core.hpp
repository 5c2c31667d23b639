#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pgd {

/// A prompt under optimization. `id` is structural ("i2.g1.v0.mc3") so runs
/// with identical settings produce byte-identical reports.
struct Prompt {
  std::string id;
  std::string text;
  std::optional<std::string> parent_id;
  int iteration_born = 0;
  std::string provenance;  // "initial", "applied", "paraphrase", "fallback"

  /// Throws std::invalid_argument on empty id or text.
  void validate() const;
};

struct LabeledExample {
  std::string input;
  std::string gold_label;
  std::map<std::string, std::string> metadata;
};

struct Score {
  double value = 0.0;  // always in [0, 1]
  std::string metric_name;
  int n_evaluated = 0;
};

struct CandidatePrompt {
  Prompt prompt;
  int source_cluster = -1;
  int variant_index = 0;
  bool is_paraphrase = false;
  double mean_reward = 0.0;
  int probes = 0;
};

struct IterationRecord {
  int iteration = 0;
  std::string beam;  // comma-joined prompt ids, best first
  std::vector<double> beam_scores;
  int gradients_generated = 0;
  int fused_count = 0;
  int candidates_generated = 0;
  int evaluations_spent = 0;
  int gradient_llm_calls = 0;
  int fusion_llm_calls = 0;
  int application_llm_calls = 0;
  int paraphrase_llm_calls = 0;
  int first_generation_variants = 0;
  int conflict_count = 0;
  std::string candidate_pool_hash;
  bool degraded = false;
  bool skipped = false;
  std::vector<std::string> fallback_agents;
};

struct RunReport {
  Prompt best_prompt;
  double best_score = 0.0;
  std::vector<IterationRecord> per_iteration;
  int total_llm_calls = 0;
  int total_eval_examples = 0;
  int converged_at = -1;  // iteration index, or -1 if the budget ran out
  bool aborted = false;
  std::map<std::string, std::string> settings;
};

/// True when the two labels agree after trimming and case folding.
bool labels_match(const std::string& a, const std::string& b);

/// Binary F1 for `positive_label`. Returns 0 when precision + recall == 0.
/// Throws std::invalid_argument on size mismatch or empty input.
double f1_score(const std::vector<std::string>& predictions,
                const std::vector<std::string>& golds,
                const std::string& positive_label);

/// Unweighted mean of per-label F1 over every label present in `golds`.
double macro_f1(const std::vector<std::string>& predictions,
                const std::vector<std::string>& golds);

double accuracy(const std::vector<std::string>& predictions,
                const std::vector<std::string>& golds);

}  // namespace pgd
