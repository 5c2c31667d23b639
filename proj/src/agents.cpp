#include "pgd/agents.hpp"

#include <cmath>
#include <future>
#include <limits>
#include <random>
#include <stdexcept>

#include "pgd/errors.hpp"
#include "pgd/util.hpp"

namespace pgd {

std::vector<AgentSpec> make_agents(int count, const Prompt& prompt, int error_cap,
                                   int feedback_count) {
  if (count < 1 || count > 4) {
    throw std::invalid_argument("agent count must be between 1 and 4");
  }
  if (error_cap < 1) throw std::invalid_argument("error_cap must be >= 1");
  if (feedback_count < 1) throw std::invalid_argument("feedback_count must be >= 1");
  std::vector<AgentSpec> agents;
  for (int i = 0; i < count; ++i) {
    AgentSpec spec;
    spec.role = all_roles()[static_cast<std::size_t>(i)];
    spec.current_prompt = prompt;
    spec.error_cap = error_cap;
    spec.feedback_count = feedback_count;
    agents.push_back(std::move(spec));
  }
  return agents;
}

InferenceResult infer_and_label(const Prompt& prompt,
                                const std::vector<LabeledExample>& minibatch,
                                const Predictor& predictor) {
  InferenceResult result;
  for (const auto& example : minibatch) {
    try {
      Judgement j;
      j.example = example;
      j.prediction = predictor(prompt, example);
      result.judged.push_back(std::move(j));
    } catch (const std::exception&) {
      ++result.failures;
    }
  }
  return result;
}

std::vector<Judgement> select_errors(const std::vector<Judgement>& judged, int cap) {
  if (cap < 1) throw std::invalid_argument("error cap must be >= 1");
  std::vector<Judgement> errors;
  for (const auto& j : judged) {
    if (!labels_match(j.prediction, j.example.gold_label)) {
      errors.push_back(j);
      if (static_cast<int>(errors.size()) == cap) break;
    }
  }
  return errors;
}

std::vector<LabeledExample> diverse_samples(const std::vector<LabeledExample>& minibatch,
                                            int cap, std::uint64_t seed,
                                            const Encoder& encoder) {
  if (cap < 1) throw std::invalid_argument("sample cap must be >= 1");
  const std::size_t n = minibatch.size();
  if (n == 0) return {};

  std::vector<std::string> inputs;
  inputs.reserve(n);
  for (const auto& ex : minibatch) inputs.push_back(ex.input);
  const std::vector<EmbeddingVector> vectors = encoder.embed_batch(inputs);

  auto dist_sq = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t d = 0; d < vectors[a].values.size(); ++d) {
      const double diff = vectors[a].values[d] - vectors[b].values[d];
      s += diff * diff;
    }
    return s;
  };

  std::mt19937_64 rng(seed);
  std::vector<bool> chosen(n, false);
  std::vector<std::size_t> order;
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  chosen[first] = true;
  order.push_back(first);

  const std::size_t want = std::min(static_cast<std::size_t>(cap), n);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  while (order.size() < want) {
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      min_d[i] = std::min(min_d[i], dist_sq(i, order.back()));
    }
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      if (min_d[i] > best_d) {
        best_d = min_d[i];
        best = i;
      }
    }
    chosen[best] = true;
    order.push_back(best);
  }

  std::vector<LabeledExample> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back(minibatch[i]);
  return out;
}

std::vector<GradientBlock> GradientSet::flattened() const {
  std::vector<GradientBlock> flat;
  for (const auto& [role, blocks] : entries) {
    flat.insert(flat.end(), blocks.begin(), blocks.end());
  }
  return flat;
}

int GradientSet::total() const {
  int n = 0;
  for (const auto& [role, blocks] : entries) n += static_cast<int>(blocks.size());
  return n;
}

namespace {

std::string format_judgements(const std::vector<Judgement>& errors) {
  std::vector<std::string> lines;
  for (const auto& j : errors) {
    lines.push_back("input: " + j.example.input + " | expected: " +
                    j.example.gold_label + " | predicted: " + j.prediction);
  }
  return join(lines, "\n");
}

std::string format_examples(const std::vector<LabeledExample>& examples) {
  std::vector<std::string> lines;
  for (const auto& ex : examples) {
    lines.push_back("input: " + ex.input + " | expected: " + ex.gold_label);
  }
  return join(lines, "\n");
}

struct AgentResult {
  std::vector<GradientBlock> blocks;
  bool used_fallback = false;
  bool failed = false;
  std::string failure;
  std::vector<std::string> warnings;
  int prediction_failures = 0;
};

AgentResult run_agent(const AgentSpec& spec, const std::vector<LabeledExample>& minibatch,
                      const Predictor& predictor, Gateway& gateway,
                      const Encoder& encoder, const GradientGenerationOptions& options) {
  AgentResult result;
  try {
    const InferenceResult inference =
        infer_and_label(spec.current_prompt, minibatch, predictor);
    result.prediction_failures = inference.failures;

    const std::vector<Judgement> errors = select_errors(inference.judged, spec.error_cap);
    std::string rendered_errors;
    if (!errors.empty()) {
      rendered_errors = format_judgements(errors);
    } else {
      result.used_fallback = true;
      const std::uint64_t seed =
          derive_seed(options.seed, "diverse_" + role_name(spec.role),
                      static_cast<std::uint64_t>(options.iteration));
      rendered_errors = format_examples(
          diverse_samples(minibatch, spec.error_cap, seed, encoder));
    }

    CompletionRequest request;
    request.template_id = "gradient_" + role_name(spec.role);
    request.bindings["prompt"] = spec.current_prompt.text;
    request.bindings["errors"] = rendered_errors;
    request.bindings["m"] = std::to_string(spec.feedback_count);
    request.temperature = options.temperature;
    request.max_tokens = options.max_tokens;
    request.n_samples = 1;

    const std::string raw = gateway.complete(request).front();
    ParsedGradients parsed = parse_gradient_blocks(raw, spec.role, spec.feedback_count);
    result.blocks = std::move(parsed.blocks);
    for (auto& w : parsed.warnings) {
      result.warnings.push_back(role_name(spec.role) + ": " + w);
    }
  } catch (const std::exception& e) {
    result.failed = true;
    result.failure = e.what();
  }
  return result;
}

}  // namespace

GradientGenerationOutcome generate_agent_gradients(
    const std::vector<AgentSpec>& agents, const std::vector<LabeledExample>& minibatch,
    const Predictor& predictor, Gateway& gateway, const Encoder& encoder,
    const GradientGenerationOptions& options) {
  if (agents.empty()) throw std::invalid_argument("no agents configured");
  if (minibatch.empty()) throw std::invalid_argument("empty minibatch");

  std::vector<std::future<AgentResult>> futures;
  futures.reserve(agents.size());
  for (const auto& spec : agents) {
    futures.push_back(std::async(std::launch::async, [&, spec]() {
      return run_agent(spec, minibatch, predictor, gateway, encoder, options);
    }));
  }

  GradientGenerationOutcome outcome;
  outcome.set.iteration = options.iteration;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    AgentResult result = futures[i].get();
    const std::string name = role_name(agents[i].role);
    outcome.prediction_failures += result.prediction_failures;
    for (auto& w : result.warnings) outcome.parse_warnings.push_back(std::move(w));
    if (result.failed) {
      outcome.failed_agents.push_back(name + ": " + result.failure);
      continue;
    }
    if (result.used_fallback) outcome.fallback_agents.push_back(name);
    outcome.set.entries[agents[i].role] = std::move(result.blocks);
  }

  if (outcome.set.entries.empty()) {
    throw GradientGenerationError("every agent failed: " +
                                  join(outcome.failed_agents, "; "));
  }
  return outcome;
}

}  // namespace pgd
