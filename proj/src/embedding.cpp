#include "pgd/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "httplib.h"
#include "json.hpp"
#include "pgd/errors.hpp"
#include "pgd/util.hpp"

namespace pgd {

EmbeddingVector Encoder::embed(const std::string& text) const {
  return embed_batch({text}).front();
}

namespace {

class MockEncoder final : public Encoder {
 public:
  MockEncoder(int dimension, std::uint64_t seed)
      : dimension_(dimension), gram_seed_(fnv1a64(hex64(seed))) {
    if (dimension < 1) throw std::invalid_argument("encoder dimension must be >= 1");
  }

  int dimension() const override { return dimension_; }

  std::vector<EmbeddingVector> embed_batch(
      const std::vector<std::string>& texts) const override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) out.push_back(embed_one(text));
    return out;
  }

 private:
  EmbeddingVector embed_one(const std::string& text) const {
    EmbeddingVector v;
    v.source_text_hash = fnv1a64(text);
    v.values.assign(static_cast<std::size_t>(dimension_), 0.0);
    const std::string padded = "^" + text + "$";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      const std::uint64_t h = fnv1a64(std::string_view(padded).substr(i, 3), gram_seed_);
      const std::size_t column = h % static_cast<std::uint64_t>(dimension_);
      const double sign = ((h >> 60) & 1ull) ? 1.0 : -1.0;
      v.values[column] += sign;
    }
    bool all_zero = true;
    for (double x : v.values) {
      if (x != 0.0) {
        all_zero = false;
        break;
      }
    }
    if (all_zero) {
      v.values[v.source_text_hash % static_cast<std::uint64_t>(dimension_)] = 1.0;
    }
    return v;
  }

  int dimension_;
  std::uint64_t gram_seed_;
};

class HttpEncoder final : public Encoder {
 public:
  explicit HttpEncoder(HttpEncoderOptions options) : options_(std::move(options)) {
    const std::string& url = options_.base_url;
    std::size_t scheme = url.find("://");
    std::size_t path_start =
        scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
    if (path_start == std::string::npos) {
      host_ = url;
    } else {
      host_ = url.substr(0, path_start);
      path_prefix_ = url.substr(path_start);
      while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
    if (host_.empty()) throw std::invalid_argument("http encoder needs a base_url");
  }

  int dimension() const override { return options_.dimension; }

  std::vector<EmbeddingVector> embed_batch(
      const std::vector<std::string>& texts) const override {
    nlohmann::json body = {{"model", options_.model}, {"input", texts}};

    httplib::Client client(host_);
    client.set_connection_timeout(options_.timeout_seconds);
    client.set_read_timeout(options_.timeout_seconds);
    httplib::Headers headers;
    const char* token =
        options_.token_env.empty() ? nullptr : std::getenv(options_.token_env.c_str());
    if (token != nullptr && *token != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    auto res = client.Post(path_prefix_ + "/embeddings", headers, body.dump(),
                           "application/json");
    if (!res) {
      throw TransportError("request to " + host_ + " failed: " +
                           httplib::to_string(res.error()));
    }
    if (res->status >= 500) {
      throw TransportError("encoder returned status " + std::to_string(res->status));
    }
    if (res->status != 200) {
      throw ProtocolError("encoder returned status " + std::to_string(res->status) +
                          ": " + res->body);
    }
    try {
      const nlohmann::json parsed = nlohmann::json::parse(res->body);
      const auto& data = parsed.at("data");
      if (data.size() != texts.size()) {
        throw ProtocolError("encoder returned " + std::to_string(data.size()) +
                            " vectors for " + std::to_string(texts.size()) + " inputs");
      }
      std::vector<EmbeddingVector> out(texts.size());
      for (const auto& item : data) {
        const std::size_t index = item.at("index").get<std::size_t>();
        if (index >= out.size()) throw ProtocolError("embedding index out of range");
        EmbeddingVector v;
        v.values = item.at("embedding").get<std::vector<double>>();
        v.source_text_hash = fnv1a64(texts[index]);
        if (options_.dimension > 0 &&
            v.values.size() != static_cast<std::size_t>(options_.dimension)) {
          throw ProtocolError("embedding width " + std::to_string(v.values.size()) +
                              " does not match configured " +
                              std::to_string(options_.dimension));
        }
        out[index] = std::move(v);
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("malformed embedding payload: ") + e.what());
    }
  }

 private:
  HttpEncoderOptions options_;
  std::string host_;
  std::string path_prefix_;
};

}  // namespace

std::unique_ptr<Encoder> make_mock_encoder(int dimension, std::uint64_t seed) {
  return std::make_unique<MockEncoder>(dimension, seed);
}

std::unique_ptr<Encoder> make_http_encoder(HttpEncoderOptions options) {
  return std::make_unique<HttpEncoder>(std::move(options));
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine_similarity: dimension mismatch " +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
  if (a.empty()) throw std::invalid_argument("cosine_similarity: empty vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw std::invalid_argument("cosine_similarity: zero-norm vector");
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<double> l2_normalized(const std::vector<double>& v) {
  double norm_sq = 0.0;
  for (double x : v) norm_sq += x * x;
  if (norm_sq == 0.0) throw std::invalid_argument("cannot normalize a zero vector");
  const double inv = 1.0 / std::sqrt(norm_sq);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
  return out;
}

namespace {

double dist_sq(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

ClusterAssignment kmeans(const std::vector<std::vector<double>>& vectors, int k,
                         std::uint64_t seed, int max_iterations) {
  const std::size_t n = vectors.size();
  if (n == 0) throw std::invalid_argument("kmeans: empty input");
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (static_cast<std::size_t>(k) > n) {
    throw std::invalid_argument("kmeans: k exceeds point count");
  }
  const std::size_t dim = vectors[0].size();
  for (const auto& v : vectors) {
    if (v.size() != dim) throw std::invalid_argument("kmeans: ragged input");
  }
  if (max_iterations < 1) throw std::invalid_argument("kmeans: max_iterations must be >= 1");

  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> centroids;
  centroids.reserve(static_cast<std::size_t>(k));

  // Careful seeding: draw several candidates weighted by squared distance to
  // the nearest chosen centroid, keep the one that shrinks total potential most.
  {
    std::uniform_int_distribution<std::size_t> uniform(0, n - 1);
    centroids.push_back(vectors[uniform(rng)]);
    std::vector<double> best_d2(n);
    for (std::size_t i = 0; i < n; ++i) best_d2[i] = dist_sq(vectors[i], centroids[0]);

    const int trials = 2 + static_cast<int>(std::log2(static_cast<double>(k)));
    while (static_cast<int>(centroids.size()) < k) {
      double total = 0.0;
      for (double d : best_d2) total += d;
      std::size_t best_candidate = 0;
      double best_potential = std::numeric_limits<double>::infinity();
      for (int t = 0; t < trials; ++t) {
        std::size_t candidate;
        if (total <= 0.0) {
          candidate = uniform(rng);
        } else {
          std::discrete_distribution<std::size_t> weighted(best_d2.begin(), best_d2.end());
          candidate = weighted(rng);
        }
        double potential = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          potential += std::min(best_d2[i], dist_sq(vectors[i], vectors[candidate]));
        }
        if (potential < best_potential) {
          best_potential = potential;
          best_candidate = candidate;
        }
      }
      centroids.push_back(vectors[best_candidate]);
      for (std::size_t i = 0; i < n; ++i) {
        best_d2[i] = std::min(best_d2[i], dist_sq(vectors[i], centroids.back()));
      }
    }
  }

  ClusterAssignment result;
  result.labels.assign(n, -1);

  auto assign = [&]() {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = dist_sq(vectors[i], centroids[0]);
      for (int c = 1; c < k; ++c) {
        const double d = dist_sq(vectors[i], centroids[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (result.labels[i] != best) {
        result.labels[i] = best;
        changed = true;
      }
      inertia += best_d;
    }
    result.iteration_inertia.push_back(inertia);
    result.inertia = inertia;
    return changed;
  };

  assign();
  for (int iter = 0; iter < max_iterations; ++iter) {
    std::vector<std::vector<double>> means(static_cast<std::size_t>(k),
                                           std::vector<double>(dim, 0.0));
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(result.labels[i]);
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) means[c][d] += vectors[i][d];
    }
    for (int c = 0; c < k; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      if (counts[cc] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d) means[cc][d] /= counts[cc];
    }

    for (int c = 0; c < k; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      if (counts[cc] > 0) continue;
      // Re-seed an empty cluster at the point farthest from its own centroid.
      std::size_t farthest = n;
      double far_d = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto li = static_cast<std::size_t>(result.labels[i]);
        if (counts[li] <= 1) continue;
        const double d = dist_sq(vectors[i], means[li]);
        if (d > far_d) {
          far_d = d;
          farthest = i;
        }
      }
      if (farthest == n) {
        // Every remaining point coincides with its centroid: steal a
        // duplicate from the largest cluster.
        int largest = 0;
        for (int c2 = 1; c2 < k; ++c2) {
          if (counts[static_cast<std::size_t>(c2)] >
              counts[static_cast<std::size_t>(largest)]) {
            largest = c2;
          }
        }
        for (std::size_t i = 0; i < n; ++i) {
          if (result.labels[i] == largest &&
              counts[static_cast<std::size_t>(largest)] > 1) {
            farthest = i;
            break;
          }
        }
      }
      if (farthest == n) continue;  // k == 1 or nothing to split
      const auto old = static_cast<std::size_t>(result.labels[farthest]);
      --counts[old];
      means[cc] = vectors[farthest];
      counts[cc] = 1;
      result.labels[farthest] = c;
      for (std::size_t d = 0; d < dim; ++d) means[old][d] = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<std::size_t>(result.labels[i]) == old) {
          for (std::size_t d = 0; d < dim; ++d) means[old][d] += vectors[i][d];
        }
      }
      if (counts[old] > 0) {
        for (std::size_t d = 0; d < dim; ++d) means[old][d] /= counts[old];
      }
    }

    centroids = std::move(means);
    if (!assign()) break;
  }

  result.centroids = centroids;
  return result;
}

}  // namespace pgd
