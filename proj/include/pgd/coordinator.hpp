#pragma once

#include <cstdint>
#include <vector>

#include "pgd/agents.hpp"
#include "pgd/embedding.hpp"
#include "pgd/gateway.hpp"

namespace pgd {

struct CoordinatorConfig {
  double conflict_threshold = 0.3;  // opposing when cosine < -threshold
  int max_clusters = 8;
  double fusion_sharpness = 1.0;  // scales scores inside the softmax
  double fusion_temperature = 0.0;
  int fusion_max_tokens = 512;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument unless threshold is in (0,1),
  /// max_clusters >= 1, and sharpness is finite and >= 0.
  void validate() const;
};

struct ConflictPair {
  int a = 0;  // indices into the flattened gradient list, a < b
  int b = 0;
  double similarity = 0.0;
};

/// One merged suggestion covering a cluster of the flattened gradients.
struct FusedGradient {
  GradientBlock block;
  std::vector<int> member_indices;    // ascending
  std::vector<double> member_weights;  // aligned with member_indices, sums to 1
  int cluster_id = 0;
  bool fallback = false;  // fusion failed, top-weight member passed through
};

struct CoordinationOutcome {
  std::vector<FusedGradient> fused;  // ordered by cluster_id
  std::vector<ConflictPair> conflicts;
  int fusion_parse_failures = 0;
  bool degraded = false;  // every multi-member fusion failed
};

/// Every unordered pair whose cosine similarity is below -threshold.
std::vector<ConflictPair> detect_conflicts(const std::vector<EmbeddingVector>& vectors,
                                           double threshold);

/// softmax(sharpness * scores), computed with max subtraction so a constant
/// shift of the scores leaves the weights unchanged. Throws
/// std::invalid_argument on empty or non-finite input.
std::vector<double> fusion_weights(const std::vector<double>& scores, double sharpness);

/// Embeds the flattened gradients, finds conflicts, clusters into
/// K = min(max_clusters, count) groups, and fuses each multi-member group
/// through the gateway. Singletons pass through unchanged. A failed fusion
/// falls back to its heaviest member. `scores`, when given, must align with
/// the flattened order and biases the member weights; otherwise weights are
/// uniform per cluster.
CoordinationOutcome coordinate_and_fuse(const GradientSet& set, Gateway& gateway,
                                        const Encoder& encoder,
                                        const CoordinatorConfig& config,
                                        const std::vector<double>* scores = nullptr);

}  // namespace pgd
