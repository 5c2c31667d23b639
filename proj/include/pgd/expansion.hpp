#pragma once

#include <vector>

#include "pgd/coordinator.hpp"
#include "pgd/core.hpp"
#include "pgd/embedding.hpp"
#include "pgd/gateway.hpp"

namespace pgd {

struct ExpansionConfig {
  int successor_cap = 8;        // hard ceiling on surviving candidates
  int mc_samples = 2;           // paraphrases drawn per variant
  double diversity_margin = 0.05;  // drop candidates with similarity >= 1 - margin
  int variants_per_gradient = 2;
  double application_temperature = 0.0;
  double paraphrase_temperature = 0.9;
  int max_tokens = 512;

  /// Throws std::invalid_argument unless successor_cap >= 1, mc_samples >= 0,
  /// margin is in (0, 1), and variants_per_gradient >= 1.
  void validate() const;
};

/// Asks the gateway to rewrite `base` under one fused suggestion,
/// `variants_per_gradient` samples in one request. Candidate ids are
/// structural: i<iteration>.g<cluster>.v<variant>.
std::vector<CandidatePrompt> apply_gradient(const Prompt& base,
                                            const FusedGradient& fused, Gateway& gateway,
                                            const ExpansionConfig& config, int iteration);

/// Draws `mc_samples` paraphrases of one candidate (suffix .mc<j>).
std::vector<CandidatePrompt> paraphrase_mc(const CandidatePrompt& candidate,
                                           Gateway& gateway,
                                           const ExpansionConfig& config);

struct FilterResult {
  std::vector<CandidatePrompt> kept;
  int filtered_out = 0;
};

/// Greedy pass in pool order: a candidate survives only when its similarity
/// to every survivor so far stays below 1 - margin. Idempotent; exact
/// duplicates always collapse.
FilterResult semantic_filter(const std::vector<CandidatePrompt>& pool,
                             const Encoder& encoder, double margin);

struct ExpansionOutcome {
  std::vector<CandidatePrompt> candidates;
  bool degraded = false;  // nothing survived, base was re-issued as candidate
  int provider_failures = 0;
  int first_generation_variants = 0;
  int paraphrases_generated = 0;
  int filtered_out = 0;
};

/// Full successor pool for one iteration: apply every fused gradient, then
/// paraphrase every variant, then filter, then truncate to successor_cap in
/// generation order. Paraphrasing happens before filtering, so provider call
/// counts depend only on the configuration, never on filter outcomes.
ExpansionOutcome expand_prompts(const Prompt& base,
                                const std::vector<FusedGradient>& fused,
                                Gateway& gateway, const Encoder& encoder,
                                const ExpansionConfig& config, int iteration);

}  // namespace pgd
