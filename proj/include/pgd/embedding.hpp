#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace pgd {

struct EmbeddingVector {
  std::vector<double> values;
  std::uint64_t source_text_hash = 0;
};

class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual int dimension() const = 0;
  /// Embeds each text independently: batching is a transport detail and must
  /// not change any individual vector.
  virtual std::vector<EmbeddingVector> embed_batch(
      const std::vector<std::string>& texts) const = 0;

  EmbeddingVector embed(const std::string& text) const;
};

/// Offline encoder hashing character trigrams of "^text$" into `dimension`
/// signed buckets. Deterministic in (text, seed); never returns a zero vector.
std::unique_ptr<Encoder> make_mock_encoder(int dimension = 64, std::uint64_t seed = 0);

struct HttpEncoderOptions {
  std::string base_url;
  std::string model = "default";
  std::string token_env = "PGD_API_TOKEN";
  int timeout_seconds = 30;
  int dimension = 0;  // expected width; 0 accepts whatever comes back
};

std::unique_ptr<Encoder> make_http_encoder(HttpEncoderOptions options);

/// Throws std::invalid_argument on dimension mismatch or a zero-norm input.
/// Result is clamped to [-1, 1].
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// Copy of `v` scaled to unit L2 norm. Throws std::invalid_argument on zero.
std::vector<double> l2_normalized(const std::vector<double>& v);

struct ClusterAssignment {
  std::vector<int> labels;
  std::vector<std::vector<double>> centroids;
  double inertia = 0.0;
  /// Inertia recorded after every assignment step, for monotonicity checks.
  std::vector<double> iteration_inertia;
};

/// Lloyd iterations from a careful seeding (greedy candidate selection over
/// distance-weighted draws). Ties assign to the lowest centroid index; empty
/// clusters are re-seeded at the farthest point. Throws std::invalid_argument
/// when K < 1, K > n, or dimensions disagree.
ClusterAssignment kmeans(const std::vector<std::vector<double>>& vectors, int k,
                         std::uint64_t seed, int max_iterations = 20);

}  // namespace pgd
