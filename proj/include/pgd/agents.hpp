#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pgd/core.hpp"
#include "pgd/embedding.hpp"
#include "pgd/gateway.hpp"
#include "pgd/tasks.hpp"

namespace pgd {

struct AgentSpec {
  AgentRole role = AgentRole::clarity;
  Prompt current_prompt;
  int error_cap = 4;       // most failing examples shown to the agent
  int feedback_count = 4;  // suggestions requested per agent
};

/// First `count` roles (clarity, examples, format, style) reviewing `prompt`.
/// Throws std::invalid_argument unless 1 <= count <= 4.
std::vector<AgentSpec> make_agents(int count, const Prompt& prompt, int error_cap,
                                   int feedback_count);

struct Judgement {
  LabeledExample example;
  std::string prediction;
};

struct InferenceResult {
  std::vector<Judgement> judged;
  int failures = 0;  // examples whose prediction raised
};

InferenceResult infer_and_label(const Prompt& prompt,
                                const std::vector<LabeledExample>& minibatch,
                                const Predictor& predictor);

/// Mispredicted examples in minibatch order, at most `cap`.
std::vector<Judgement> select_errors(const std::vector<Judgement>& judged, int cap);

/// Greedy farthest-point pick of `cap` inputs, seeded start, used when a
/// minibatch has no errors to show. cap >= |minibatch| returns everything.
std::vector<LabeledExample> diverse_samples(const std::vector<LabeledExample>& minibatch,
                                            int cap, std::uint64_t seed,
                                            const Encoder& encoder);

/// Suggestions grouped per agent for one iteration.
struct GradientSet {
  std::map<AgentRole, std::vector<GradientBlock>> entries;
  int iteration = 0;

  /// Role-major, stable within each role. This is the canonical flat order
  /// everything downstream (clustering, fusion indices) refers into.
  std::vector<GradientBlock> flattened() const;
  int total() const;
};

struct GradientGenerationOptions {
  double temperature = 0.7;
  int max_tokens = 512;
  std::uint64_t seed = 0;
  int iteration = 0;
};

struct GradientGenerationOutcome {
  GradientSet set;
  std::vector<std::string> fallback_agents;  // role names that saw no errors
  std::vector<std::string> failed_agents;
  std::vector<std::string> parse_warnings;
  int prediction_failures = 0;
};

/// Runs every agent concurrently: infer on the minibatch, pick failing
/// examples (diverse ones when nothing fails), ask for suggestions, parse.
/// Throws GradientGenerationError only when every agent fails.
GradientGenerationOutcome generate_agent_gradients(
    const std::vector<AgentSpec>& agents, const std::vector<LabeledExample>& minibatch,
    const Predictor& predictor, Gateway& gateway, const Encoder& encoder,
    const GradientGenerationOptions& options);

}  // namespace pgd
