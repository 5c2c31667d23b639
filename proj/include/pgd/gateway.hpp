#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace pgd {

enum class AgentRole { clarity = 0, examples = 1, format = 2, style = 3 };

std::string role_name(AgentRole role);
AgentRole role_from_name(const std::string& name);
const std::vector<AgentRole>& all_roles();

struct CompletionRequest {
  std::string template_id;
  std::map<std::string, std::string> bindings;
  double temperature = 0.0;
  int max_tokens = 512;
  int n_samples = 1;

  /// Throws std::invalid_argument on negative temperature, non-positive
  /// max_tokens, or n_samples < 1.
  void validate() const;
};

/// One parsed suggestion: why the prompt fails and how to edit it.
struct GradientBlock {
  AgentRole agent_role = AgentRole::clarity;
  std::string reason;
  std::string suggested_edit;
  std::string raw_source;
};

struct ParsedGradients {
  std::vector<GradientBlock> blocks;
  std::vector<std::string> warnings;
};

/// Splits a completion on `<<<GRADIENT>>>` markers. Blocks missing a
/// `reason:` or `edit:` field are skipped with a warning. `max_blocks > 0`
/// truncates. Throws EmptyGradientError when nothing parseable remains.
ParsedGradients parse_gradient_blocks(const std::string& raw, AgentRole role,
                                      int max_blocks = 0);

/// Expects exactly one block; extra blocks warn, zero throws FusionParseError.
GradientBlock parse_fusion(const std::string& raw, AgentRole dominant_role,
                           int* warning_count = nullptr);

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string id() const = 0;
  /// Produces the `sample_index`-th completion for one rendered prompt.
  virtual std::string complete_one(const CompletionRequest& request,
                                   const std::string& rendered,
                                   int sample_index) = 0;
};

struct MockOptions {
  std::uint64_t seed = 0;
  bool echo_task_input = false;
};

/// Deterministic offline provider: output is a pure function of the request
/// and the seed, so reruns are byte-identical and tests can recompute it.
std::unique_ptr<Provider> make_mock_provider(MockOptions options = {});

struct HttpProviderOptions {
  std::string base_url;        // e.g. http://localhost:8080/v1
  std::string model = "default";
  std::string token_env = "PGD_API_TOKEN";
  int timeout_seconds = 30;
};

/// POSTs {base_url}/chat/completions with an OpenAI-style JSON body, one
/// provider call per sample. Connection and 5xx failures raise
/// TransportError; malformed response bodies raise ProtocolError.
std::unique_ptr<Provider> make_http_provider(HttpProviderOptions options);

/// Named prompt templates with `{placeholder}` substitution.
class TemplateStore {
 public:
  /// Compiled-in defaults for every stage the optimizer needs.
  static TemplateStore builtin();
  /// Loads every *.txt file in `dir` (stem becomes the template id) on top
  /// of the builtin set. Throws IngestionError when the directory is missing.
  static TemplateStore from_directory(const std::string& dir);

  bool contains(const std::string& id) const;
  const std::string& raw(const std::string& id) const;
  void set(const std::string& id, std::string body);

  /// Substitutes `{identifier}` occurrences from bindings. An unbound
  /// placeholder throws std::invalid_argument before any provider call.
  /// `{{` and `}}` escape literal braces.
  std::string render(const std::string& id,
                     const std::map<std::string, std::string>& bindings) const;

 private:
  std::map<std::string, std::string> templates_;
};

struct GatewayStats {
  long requests = 0;
  long samples = 0;
  long provider_calls = 0;
  long cache_hits = 0;
  std::map<std::string, long> samples_by_template;
};

struct GatewayOptions {
  std::string cache_path;  // empty disables the persistent cache file
  int max_retries = 3;
  int backoff_ms = 50;
};

/// Single entry point for every provider call: renders the template,
/// consults the cache, retries transport failures, and tracks usage.
/// Thread-safe.
class Gateway {
 public:
  Gateway(std::unique_ptr<Provider> provider, TemplateStore templates,
          GatewayOptions options = {});
  ~Gateway();

  /// Returns exactly request.n_samples completions, in sample order.
  std::vector<std::string> complete(const CompletionRequest& request);

  GatewayStats stats() const;
  const TemplateStore& templates() const { return templates_; }
  std::string provider_id() const;

 private:
  std::string cache_key(const CompletionRequest& request, int sample_index) const;
  std::string call_with_retry(const CompletionRequest& request,
                              const std::string& rendered, int sample_index);
  void load_cache_file();
  void append_cache_record(const std::string& key, const std::string& text);

  std::unique_ptr<Provider> provider_;
  TemplateStore templates_;
  GatewayOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::string> cache_;
  GatewayStats stats_;
};

}  // namespace pgd
