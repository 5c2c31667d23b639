#include "pgd/coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <stdexcept>

#include "pgd/errors.hpp"
#include "pgd/util.hpp"

namespace pgd {

void CoordinatorConfig::validate() const {
  if (!(conflict_threshold > 0.0 && conflict_threshold < 1.0)) {
    throw std::invalid_argument("conflict_threshold must be in (0, 1)");
  }
  if (max_clusters < 1) throw std::invalid_argument("max_clusters must be >= 1");
  if (!std::isfinite(fusion_sharpness) || fusion_sharpness < 0.0) {
    throw std::invalid_argument("fusion_sharpness must be finite and >= 0");
  }
}

std::vector<ConflictPair> detect_conflicts(const std::vector<EmbeddingVector>& vectors,
                                           double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("conflict threshold must be in (0, 1)");
  }
  std::vector<ConflictPair> conflicts;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < vectors.size(); ++j) {
      const double sim = cosine_similarity(vectors[i].values, vectors[j].values);
      if (sim < -threshold) {
        conflicts.push_back({static_cast<int>(i), static_cast<int>(j), sim});
      }
    }
  }
  return conflicts;
}

std::vector<double> fusion_weights(const std::vector<double>& scores, double sharpness) {
  if (scores.empty()) throw std::invalid_argument("fusion_weights: empty scores");
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("fusion_weights: non-finite score");
  }
  if (!std::isfinite(sharpness)) {
    throw std::invalid_argument("fusion_weights: non-finite sharpness");
  }
  double max_scaled = -std::numeric_limits<double>::infinity();
  for (double s : scores) max_scaled = std::max(max_scaled, sharpness * s);
  std::vector<double> weights(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    weights[i] = std::exp(sharpness * scores[i] - max_scaled);
    total += weights[i];
  }
  for (double& w : weights) w /= total;
  return weights;
}

namespace {

std::string gradient_text(const GradientBlock& block) {
  return block.reason + "\n" + block.suggested_edit;
}

AgentRole dominant_role(const std::vector<GradientBlock>& flat,
                        const std::vector<int>& members) {
  int counts[4] = {0, 0, 0, 0};
  for (int i : members) {
    ++counts[static_cast<int>(flat[static_cast<std::size_t>(i)].agent_role)];
  }
  int best = 0;
  for (int r = 1; r < 4; ++r) {
    if (counts[r] > counts[best]) best = r;
  }
  return static_cast<AgentRole>(best);
}

std::string format_weight(double w) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", w);
  return buf;
}

struct FusionTask {
  FusedGradient seeded;  // members, weights, cluster id prefilled
  std::string members_text;
  std::string conflicts_text;
};

}  // namespace

CoordinationOutcome coordinate_and_fuse(const GradientSet& set, Gateway& gateway,
                                        const Encoder& encoder,
                                        const CoordinatorConfig& config,
                                        const std::vector<double>* scores) {
  config.validate();
  const std::vector<GradientBlock> flat = set.flattened();
  if (flat.empty()) throw std::invalid_argument("coordinate_and_fuse: empty gradient set");
  if (scores != nullptr && scores->size() != flat.size()) {
    throw std::invalid_argument("coordinate_and_fuse: scores misaligned with gradients");
  }

  std::vector<std::string> texts;
  texts.reserve(flat.size());
  for (const auto& block : flat) texts.push_back(gradient_text(block));
  const std::vector<EmbeddingVector> vectors = encoder.embed_batch(texts);

  CoordinationOutcome outcome;
  outcome.conflicts = detect_conflicts(vectors, config.conflict_threshold);

  const int k = std::min(config.max_clusters, static_cast<int>(flat.size()));
  std::vector<std::vector<double>> points;
  points.reserve(vectors.size());
  for (const auto& v : vectors) {
    double norm_sq = 0.0;
    for (double x : v.values) norm_sq += x * x;
    if (norm_sq == 0.0) {
      std::vector<double> basis(v.values.size(), 0.0);
      basis[v.source_text_hash % basis.size()] = 1.0;
      points.push_back(std::move(basis));
    } else {
      points.push_back(l2_normalized(v.values));
    }
  }
  const ClusterAssignment clusters = kmeans(points, k, config.seed);

  std::vector<FusionTask> tasks;
  for (int c = 0; c < k; ++c) {
    std::vector<int> members;
    for (std::size_t i = 0; i < flat.size(); ++i) {
      if (clusters.labels[i] == c) members.push_back(static_cast<int>(i));
    }
    if (members.empty()) continue;

    std::vector<double> member_scores;
    for (int i : members) {
      member_scores.push_back(scores ? (*scores)[static_cast<std::size_t>(i)] : 0.0);
    }
    const std::vector<double> weights =
        fusion_weights(member_scores, config.fusion_sharpness);

    FusedGradient fused;
    fused.member_indices = members;
    fused.member_weights = weights;
    fused.cluster_id = c;

    if (members.size() == 1) {
      fused.block = flat[static_cast<std::size_t>(members[0])];
      fused.member_weights = {1.0};
      outcome.fused.push_back(std::move(fused));
      continue;
    }

    std::vector<std::size_t> order(members.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (weights[a] != weights[b]) return weights[a] > weights[b];
      return members[a] < members[b];
    });

    std::vector<std::string> member_lines;
    for (std::size_t i : order) {
      const auto& block = flat[static_cast<std::size_t>(members[i])];
      member_lines.push_back("- (weight " + format_weight(weights[i]) + ", " +
                             role_name(block.agent_role) + ") reason: " + block.reason +
                             " | edit: " + block.suggested_edit);
    }

    std::vector<std::string> inside, outside;
    for (const auto& pair : outcome.conflicts) {
      const bool a_in = std::binary_search(members.begin(), members.end(), pair.a);
      const bool b_in = std::binary_search(members.begin(), members.end(), pair.b);
      const std::string line = "suggestion " + std::to_string(pair.a) +
                               " opposes suggestion " + std::to_string(pair.b) +
                               " (similarity " + format_weight(pair.similarity) + ")";
      if (a_in && b_in) {
        inside.push_back(line);
      } else if (a_in || b_in) {
        outside.push_back(line);
      }
    }
    std::string conflicts_text =
        "Inside this group: " + (inside.empty() ? "none" : join(inside, "; "));
    conflicts_text +=
        "\nWith other groups: " + (outside.empty() ? "none" : join(outside, "; "));

    FusionTask task;
    task.seeded = std::move(fused);
    task.members_text = join(member_lines, "\n");
    task.conflicts_text = conflicts_text;
    tasks.push_back(std::move(task));
  }

  struct FusionResult {
    FusedGradient fused;
    bool parse_failed = false;
  };

  std::vector<std::future<FusionResult>> futures;
  for (const auto& task : tasks) {
    futures.push_back(std::async(std::launch::async, [&, task]() {
      FusionResult result;
      result.fused = task.seeded;
      const AgentRole role = dominant_role(flat, task.seeded.member_indices);
      try {
        CompletionRequest request;
        request.template_id = "fuse";
        request.bindings["members"] = task.members_text;
        request.bindings["conflicts"] = task.conflicts_text;
        request.temperature = config.fusion_temperature;
        request.max_tokens = config.fusion_max_tokens;
        request.n_samples = 1;
        const std::string raw = gateway.complete(request).front();
        result.fused.block = parse_fusion(raw, role);
      } catch (const std::exception&) {
        result.parse_failed = true;
        std::size_t top = 0;
        for (std::size_t i = 1; i < task.seeded.member_weights.size(); ++i) {
          if (task.seeded.member_weights[i] > task.seeded.member_weights[top]) top = i;
        }
        result.fused.block =
            flat[static_cast<std::size_t>(task.seeded.member_indices[top])];
        result.fused.fallback = true;
      }
      return result;
    }));
  }

  std::vector<FusedGradient> fused_multi;
  int failures = 0;
  for (auto& future : futures) {
    FusionResult result = future.get();
    if (result.parse_failed) ++failures;
    fused_multi.push_back(std::move(result.fused));
  }
  outcome.fusion_parse_failures = failures;
  outcome.degraded = !tasks.empty() && failures == static_cast<int>(tasks.size());

  for (auto& fused : fused_multi) outcome.fused.push_back(std::move(fused));
  std::sort(outcome.fused.begin(), outcome.fused.end(),
            [](const FusedGradient& a, const FusedGradient& b) {
              return a.cluster_id < b.cluster_id;
            });
  return outcome;
}

}  // namespace pgd
