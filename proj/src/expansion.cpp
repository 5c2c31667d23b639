#include "pgd/expansion.hpp"

#include <future>
#include <stdexcept>

#include "pgd/errors.hpp"
#include "pgd/util.hpp"

namespace pgd {

void ExpansionConfig::validate() const {
  if (successor_cap < 1) throw std::invalid_argument("successor_cap must be >= 1");
  if (mc_samples < 0) throw std::invalid_argument("mc_samples must be >= 0");
  if (!(diversity_margin > 0.0 && diversity_margin < 1.0)) {
    throw std::invalid_argument("diversity_margin must be in (0, 1)");
  }
  if (variants_per_gradient < 1) {
    throw std::invalid_argument("variants_per_gradient must be >= 1");
  }
}

std::vector<CandidatePrompt> apply_gradient(const Prompt& base,
                                            const FusedGradient& fused, Gateway& gateway,
                                            const ExpansionConfig& config, int iteration) {
  CompletionRequest request;
  request.template_id = "apply";
  request.bindings["prompt"] = base.text;
  request.bindings["reason"] = fused.block.reason;
  request.bindings["edit"] = fused.block.suggested_edit;
  request.temperature = config.application_temperature;
  request.max_tokens = config.max_tokens;
  request.n_samples = config.variants_per_gradient;

  const std::vector<std::string> texts = gateway.complete(request);
  std::vector<CandidatePrompt> out;
  out.reserve(texts.size());
  for (std::size_t v = 0; v < texts.size(); ++v) {
    if (trim(texts[v]).empty()) continue;
    CandidatePrompt candidate;
    candidate.prompt.id = "i" + std::to_string(iteration) + ".g" +
                          std::to_string(fused.cluster_id) + ".v" + std::to_string(v);
    candidate.prompt.text = texts[v];
    candidate.prompt.parent_id = base.id;
    candidate.prompt.iteration_born = iteration;
    candidate.prompt.provenance = "applied";
    candidate.source_cluster = fused.cluster_id;
    candidate.variant_index = static_cast<int>(v);
    out.push_back(std::move(candidate));
  }
  return out;
}

std::vector<CandidatePrompt> paraphrase_mc(const CandidatePrompt& candidate,
                                           Gateway& gateway,
                                           const ExpansionConfig& config) {
  if (config.mc_samples == 0) return {};
  CompletionRequest request;
  request.template_id = "paraphrase";
  request.bindings["prompt"] = candidate.prompt.text;
  request.temperature = config.paraphrase_temperature;
  request.max_tokens = config.max_tokens;
  request.n_samples = config.mc_samples;

  const std::vector<std::string> texts = gateway.complete(request);
  std::vector<CandidatePrompt> out;
  out.reserve(texts.size());
  for (std::size_t j = 0; j < texts.size(); ++j) {
    if (trim(texts[j]).empty()) continue;
    CandidatePrompt paraphrase;
    paraphrase.prompt.id = candidate.prompt.id + ".mc" + std::to_string(j);
    paraphrase.prompt.text = texts[j];
    paraphrase.prompt.parent_id = candidate.prompt.id;
    paraphrase.prompt.iteration_born = candidate.prompt.iteration_born;
    paraphrase.prompt.provenance = "paraphrase";
    paraphrase.source_cluster = candidate.source_cluster;
    paraphrase.variant_index = candidate.variant_index;
    paraphrase.is_paraphrase = true;
    out.push_back(std::move(paraphrase));
  }
  return out;
}

FilterResult semantic_filter(const std::vector<CandidatePrompt>& pool,
                             const Encoder& encoder, double margin) {
  if (!(margin > 0.0 && margin < 1.0)) {
    throw std::invalid_argument("diversity margin must be in (0, 1)");
  }
  FilterResult result;
  if (pool.empty()) return result;

  std::vector<std::string> texts;
  texts.reserve(pool.size());
  for (const auto& c : pool) texts.push_back(c.prompt.text);
  const std::vector<EmbeddingVector> vectors = encoder.embed_batch(texts);

  std::vector<std::size_t> kept_indices;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    bool keep = true;
    for (std::size_t k : kept_indices) {
      if (cosine_similarity(vectors[i].values, vectors[k].values) >= 1.0 - margin) {
        keep = false;
        break;
      }
    }
    if (keep) {
      kept_indices.push_back(i);
      result.kept.push_back(pool[i]);
    } else {
      ++result.filtered_out;
    }
  }
  return result;
}

ExpansionOutcome expand_prompts(const Prompt& base,
                                const std::vector<FusedGradient>& fused,
                                Gateway& gateway, const Encoder& encoder,
                                const ExpansionConfig& config, int iteration) {
  config.validate();
  base.validate();

  struct GradientExpansion {
    std::vector<CandidatePrompt> pool;  // variant, its paraphrases, next variant...
    int variants = 0;
    int paraphrases = 0;
    int failures = 0;
  };

  std::vector<std::future<GradientExpansion>> futures;
  futures.reserve(fused.size());
  for (const auto& fg : fused) {
    futures.push_back(std::async(std::launch::async, [&, fg]() {
      GradientExpansion expansion;
      std::vector<CandidatePrompt> variants;
      try {
        variants = apply_gradient(base, fg, gateway, config, iteration);
      } catch (const std::exception&) {
        ++expansion.failures;
        return expansion;
      }
      expansion.variants = static_cast<int>(variants.size());
      for (auto& variant : variants) {
        std::vector<CandidatePrompt> paraphrases;
        try {
          paraphrases = paraphrase_mc(variant, gateway, config);
        } catch (const std::exception&) {
          ++expansion.failures;
        }
        expansion.paraphrases += static_cast<int>(paraphrases.size());
        expansion.pool.push_back(std::move(variant));
        for (auto& p : paraphrases) expansion.pool.push_back(std::move(p));
      }
      return expansion;
    }));
  }

  ExpansionOutcome outcome;
  std::vector<CandidatePrompt> pool;
  for (auto& future : futures) {
    GradientExpansion expansion = future.get();
    outcome.first_generation_variants += expansion.variants;
    outcome.paraphrases_generated += expansion.paraphrases;
    outcome.provider_failures += expansion.failures;
    for (auto& c : expansion.pool) pool.push_back(std::move(c));
  }

  FilterResult filtered = semantic_filter(pool, encoder, config.diversity_margin);
  outcome.filtered_out = filtered.filtered_out;
  outcome.candidates = std::move(filtered.kept);
  if (static_cast<int>(outcome.candidates.size()) > config.successor_cap) {
    outcome.candidates.resize(static_cast<std::size_t>(config.successor_cap));
  }

  if (outcome.candidates.empty()) {
    CandidatePrompt fallback;
    fallback.prompt = base;
    fallback.prompt.id = "i" + std::to_string(iteration) + ".fallback";
    fallback.prompt.parent_id = base.id;
    fallback.prompt.iteration_born = iteration;
    fallback.prompt.provenance = "fallback";
    outcome.candidates.push_back(std::move(fallback));
    outcome.degraded = true;
  }
  return outcome;
}

}  // namespace pgd
