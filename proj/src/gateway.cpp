#include "pgd/gateway.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "pgd/errors.hpp"
#include "pgd/util.hpp"

namespace pgd {

std::string role_name(AgentRole role) {
  switch (role) {
    case AgentRole::clarity: return "clarity";
    case AgentRole::examples: return "examples";
    case AgentRole::format: return "format";
    case AgentRole::style: return "style";
  }
  throw std::invalid_argument("unknown agent role");
}

AgentRole role_from_name(const std::string& name) {
  for (AgentRole role : all_roles()) {
    if (role_name(role) == name) return role;
  }
  throw std::invalid_argument("unknown agent role: " + name);
}

const std::vector<AgentRole>& all_roles() {
  static const std::vector<AgentRole> roles = {
      AgentRole::clarity, AgentRole::examples, AgentRole::format, AgentRole::style};
  return roles;
}

void CompletionRequest::validate() const {
  if (template_id.empty()) throw std::invalid_argument("template_id must not be empty");
  if (temperature < 0.0) throw std::invalid_argument("temperature must be >= 0");
  if (max_tokens <= 0) throw std::invalid_argument("max_tokens must be > 0");
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
}

namespace {

constexpr const char* kBlockMarker = "<<<GRADIENT>>>";
constexpr const char* kEndMarker = "<<<END>>>";

bool starts_with_ci(const std::string& line, const char* field, std::string* rest) {
  const std::string lowered = to_lower(line);
  const std::size_t n = std::string(field).size();
  if (lowered.rfind(field, 0) != 0) return false;
  *rest = trim(line.substr(n));
  return true;
}

}  // namespace

ParsedGradients parse_gradient_blocks(const std::string& raw, AgentRole role,
                                      int max_blocks) {
  ParsedGradients out;
  std::size_t pos = raw.find(kBlockMarker);
  int block_index = 0;
  while (pos != std::string::npos) {
    const std::size_t body_start = pos + std::string(kBlockMarker).size();
    const std::size_t next_block = raw.find(kBlockMarker, body_start);
    const std::size_t end_marker = raw.find(kEndMarker, body_start);
    std::size_t body_end = raw.size();
    if (end_marker != std::string::npos &&
        (next_block == std::string::npos || end_marker < next_block)) {
      body_end = end_marker;
    } else if (next_block != std::string::npos) {
      body_end = next_block;
      out.warnings.push_back("block " + std::to_string(block_index) +
                             " missing end marker");
    }
    const std::string body = raw.substr(body_start, body_end - body_start);

    std::string reason, edit;
    int target = 0;  // 0 none, 1 reason, 2 edit
    for (const std::string& line : split_lines(body)) {
      std::string rest;
      if (starts_with_ci(trim(line), "reason:", &rest)) {
        reason = rest;
        target = 1;
      } else if (starts_with_ci(trim(line), "edit:", &rest)) {
        edit = rest;
        target = 2;
      } else if (target == 1 && !trim(line).empty()) {
        reason += reason.empty() ? trim(line) : "\n" + trim(line);
      } else if (target == 2 && !trim(line).empty()) {
        edit += edit.empty() ? trim(line) : "\n" + trim(line);
      }
    }

    if (reason.empty() || edit.empty()) {
      out.warnings.push_back("block " + std::to_string(block_index) +
                             " missing reason or edit, skipped");
    } else {
      GradientBlock block;
      block.agent_role = role;
      block.reason = reason;
      block.suggested_edit = edit;
      block.raw_source = raw.substr(pos, body_end - pos);
      out.blocks.push_back(std::move(block));
    }
    ++block_index;
    pos = next_block;
  }

  if (out.blocks.empty()) {
    throw EmptyGradientError("no parseable gradient block in completion for role " +
                             role_name(role));
  }
  if (max_blocks > 0 && static_cast<int>(out.blocks.size()) > max_blocks) {
    out.warnings.push_back("discarded " +
                           std::to_string(out.blocks.size() - max_blocks) +
                           " blocks over the limit of " + std::to_string(max_blocks));
    out.blocks.resize(static_cast<std::size_t>(max_blocks));
  }
  return out;
}

GradientBlock parse_fusion(const std::string& raw, AgentRole dominant_role,
                           int* warning_count) {
  ParsedGradients parsed;
  try {
    parsed = parse_gradient_blocks(raw, dominant_role);
  } catch (const EmptyGradientError& e) {
    throw FusionParseError(std::string("fusion completion unparseable: ") + e.what());
  }
  int warnings = static_cast<int>(parsed.warnings.size());
  if (parsed.blocks.size() > 1) ++warnings;
  if (warning_count != nullptr) *warning_count += warnings;
  return parsed.blocks.front();
}

// ---------------------------------------------------------------------------
// Mock provider
// ---------------------------------------------------------------------------

namespace {

// Canonical request digest shared by the mock provider and tests that
// recompute its output: template id, then sorted key=value bindings, then the
// seed and the sample index, all joined with unit separators.
std::uint64_t mock_hash(const CompletionRequest& request, std::uint64_t seed,
                        int sample_index) {
  std::string canon = request.template_id;
  for (const auto& [key, value] : request.bindings) {
    canon += '\x1f';
    canon += key;
    canon += '=';
    canon += value;
  }
  canon += '\x1f';
  canon += hex64(seed);
  canon += '#';
  canon += std::to_string(sample_index);
  return fnv1a64(canon);
}

std::string binding_or(const CompletionRequest& request, const std::string& key,
                       const std::string& fallback) {
  auto it = request.bindings.find(key);
  return it == request.bindings.end() ? fallback : it->second;
}

std::vector<std::string> split_csv_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

class MockProvider final : public Provider {
 public:
  explicit MockProvider(MockOptions options) : options_(options) {}

  std::string id() const override { return options_.echo_task_input ? "mock-echo" : "mock"; }

  std::string complete_one(const CompletionRequest& request, const std::string&,
                           int sample_index) override {
    const std::uint64_t h = mock_hash(request, options_.seed, sample_index);
    const std::string tag = hex64(h).substr(0, 8);
    const std::string& tid = request.template_id;

    if (tid.rfind("gradient_", 0) == 0) {
      int m = 4;
      try {
        m = std::stoi(binding_or(request, "m", "4"));
      } catch (const std::exception&) {
        m = 4;
      }
      if (m < 1) m = 1;
      const std::string role = tid.substr(std::string("gradient_").size());
      std::string out;
      for (int k = 0; k < m; ++k) {
        out += kBlockMarker;
        out += "\nreason: " + role + " weakness " + tag + "-" + std::to_string(k) +
               ": the prompt underspecifies " + role + " aspect " + std::to_string(k) +
               "\nedit: revise for " + role + " (" + tag + "-" + std::to_string(k) +
               "): tighten instruction " + std::to_string(k) + "\n";
        out += kEndMarker;
        out += "\n";
      }
      return out;
    }

    if (tid == "fuse") {
      std::string out = kBlockMarker;
      out += "\nreason: merged rationale " + tag +
             "\nedit: merged edit " + tag + "\n";
      out += kEndMarker;
      out += "\n";
      return out;
    }

    if (tid == "apply") {
      const std::string prompt = binding_or(request, "prompt", "");
      const std::string edit = binding_or(request, "edit", "");
      return prompt + "\n[" + edit + "] v" + std::to_string(sample_index);
    }

    if (tid == "paraphrase") {
      const std::string prompt = binding_or(request, "prompt", "");
      return prompt + "\n(paraphrase " + std::to_string(sample_index) + " " + tag + ")";
    }

    if (tid == "task") {
      if (options_.echo_task_input) return binding_or(request, "input", "");
      const std::vector<std::string> labels =
          split_csv_list(binding_or(request, "labels", ""));
      if (labels.empty()) return "mock-label";
      const std::string prompt = binding_or(request, "prompt", "");
      const std::string input = binding_or(request, "input", "");
      const std::uint64_t pick =
          fnv1a64(prompt + '\x1f' + input + '\x1f' + hex64(options_.seed));
      return labels[pick % labels.size()];
    }

    return "mock " + hex64(h) + " s" + std::to_string(sample_index);
  }

 private:
  MockOptions options_;
};

// ---------------------------------------------------------------------------
// HTTP provider
// ---------------------------------------------------------------------------

class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(HttpProviderOptions options) : options_(std::move(options)) {
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
    if (host_.empty()) throw std::invalid_argument("http provider needs a base_url");
  }

  std::string id() const override { return "http:" + options_.base_url + ":" + options_.model; }

  std::string complete_one(const CompletionRequest& request, const std::string& rendered,
                           int) override {
    nlohmann::json body = {
        {"model", options_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", rendered}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
        {"n", 1},
    };

    httplib::Client client(host_);
    client.set_connection_timeout(options_.timeout_seconds);
    client.set_read_timeout(options_.timeout_seconds);
    httplib::Headers headers;
    const char* token =
        options_.token_env.empty() ? nullptr : std::getenv(options_.token_env.c_str());
    if (token != nullptr && *token != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) {
      throw TransportError("request to " + host_ + " failed: " +
                           httplib::to_string(res.error()));
    }
    if (res->status >= 500) {
      throw TransportError("provider returned status " + std::to_string(res->status));
    }
    if (res->status != 200) {
      throw ProtocolError("provider returned status " + std::to_string(res->status) +
                          ": " + res->body);
    }
    try {
      const nlohmann::json parsed = nlohmann::json::parse(res->body);
      return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("malformed completion payload: ") + e.what());
    }
  }

 private:
  HttpProviderOptions options_;
  std::string host_;
  std::string path_prefix_;
};

}  // namespace

std::unique_ptr<Provider> make_mock_provider(MockOptions options) {
  return std::make_unique<MockProvider>(options);
}

std::unique_ptr<Provider> make_http_provider(HttpProviderOptions options) {
  return std::make_unique<HttpProvider>(std::move(options));
}

// ---------------------------------------------------------------------------
// TemplateStore
// ---------------------------------------------------------------------------

namespace {

std::string gradient_template(const std::string& focus, const std::string& ask) {
  return "You review task prompts and diagnose " + focus +
         " problems.\n\n"
         "Current prompt:\n{prompt}\n\n"
         "Examples the prompt got wrong (input, expected, predicted):\n{errors}\n\n" +
         ask +
         "\nPropose up to {m} focused improvements. Write each one as:\n"
         "<<<GRADIENT>>>\n"
         "reason: <why the prompt caused these failures>\n"
         "edit: <a concrete change to the prompt>\n"
         "<<<END>>>\n";
}

}  // namespace

TemplateStore TemplateStore::builtin() {
  TemplateStore store;
  store.set("gradient_clarity",
            gradient_template("clarity",
                              "Look for ambiguous wording, missing definitions, and "
                              "instructions a reader could take two ways."));
  store.set("gradient_examples",
            gradient_template("example-coverage",
                              "Look for missing or misleading demonstrations and "
                              "edge cases the prompt never shows."));
  store.set("gradient_format",
            gradient_template("output-format",
                              "Look for unstated answer formats, label sets, or "
                              "structure the task expects but the prompt omits."));
  store.set("gradient_style",
            gradient_template("style",
                              "Look for tone, verbosity, or phrasing that distracts "
                              "from the task."));
  store.set("fuse",
            "You merge several prompt-improvement suggestions into one.\n\n"
            "Weighted suggestions (highest weight first):\n{members}\n\n"
            "Known conflicts between suggestions:\n{conflicts}\n\n"
            "Reconcile them, favoring higher-weight suggestions when they clash.\n"
            "Respond with exactly one block:\n"
            "<<<GRADIENT>>>\n"
            "reason: <combined rationale>\n"
            "edit: <one merged change>\n"
            "<<<END>>>\n");
  store.set("apply",
            "Rewrite the prompt below so it incorporates the edit while keeping "
            "the original intent.\n\n"
            "Prompt:\n{prompt}\n\n"
            "Why it needs to change:\n{reason}\n\n"
            "Edit to apply:\n{edit}\n\n"
            "Respond with the full rewritten prompt and nothing else.\n");
  store.set("paraphrase",
            "Rewrite the prompt below with different wording but identical "
            "meaning and constraints.\n\n"
            "Prompt:\n{prompt}\n\n"
            "Respond with the full rewritten prompt and nothing else.\n");
  store.set("task",
            "{prompt}\n\n"
            "Input:\n{input}\n\n"
            "Allowed labels: {labels}\n"
            "Respond with exactly one allowed label on the last line.\n");
  return store;
}

TemplateStore TemplateStore::from_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw IngestionError("template directory not found: " + dir);
  }
  TemplateStore store = builtin();
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    std::ifstream in(path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    store.set(path.stem().string(), buffer.str());
  }
  return store;
}

bool TemplateStore::contains(const std::string& id) const {
  return templates_.count(id) > 0;
}

const std::string& TemplateStore::raw(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw std::invalid_argument("unknown template: " + id);
  return it->second;
}

void TemplateStore::set(const std::string& id, std::string body) {
  templates_[id] = std::move(body);
}

std::string TemplateStore::render(
    const std::string& id, const std::map<std::string, std::string>& bindings) const {
  const std::string& body = raw(id);
  std::string out;
  out.reserve(body.size());
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '{' && i + 1 < body.size() && body[i + 1] == '{') {
      out += '{';
      ++i;
      continue;
    }
    if (c == '}' && i + 1 < body.size() && body[i + 1] == '}') {
      out += '}';
      ++i;
      continue;
    }
    if (c == '{') {
      std::size_t j = i + 1;
      while (j < body.size() &&
             (std::isalnum(static_cast<unsigned char>(body[j])) || body[j] == '_')) {
        ++j;
      }
      if (j > i + 1 && j < body.size() && body[j] == '}') {
        const std::string key = body.substr(i + 1, j - i - 1);
        auto it = bindings.find(key);
        if (it == bindings.end()) {
          throw std::invalid_argument("template " + id + " has unbound placeholder {" +
                                      key + "}");
        }
        out += it->second;
        i = j;
        continue;
      }
    }
    out += c;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

Gateway::Gateway(std::unique_ptr<Provider> provider, TemplateStore templates,
                 GatewayOptions options)
    : provider_(std::move(provider)),
      templates_(std::move(templates)),
      options_(std::move(options)) {
  if (!provider_) throw std::invalid_argument("gateway needs a provider");
  if (!options_.cache_path.empty()) load_cache_file();
}

Gateway::~Gateway() = default;

std::string Gateway::provider_id() const { return provider_->id(); }

std::string Gateway::cache_key(const CompletionRequest& request, int sample_index) const {
  char temp_buf[32];
  std::snprintf(temp_buf, sizeof(temp_buf), "%.6g", request.temperature);
  std::string canon = provider_->id();
  canon += '\x1f';
  canon += request.template_id;
  for (const auto& [key, value] : request.bindings) {
    canon += '\x1f';
    canon += key;
    canon += '=';
    canon += value;
  }
  canon += '\x1f';
  canon += temp_buf;
  canon += '\x1f';
  canon += std::to_string(request.max_tokens);
  canon += '#';
  canon += std::to_string(sample_index);
  return hex64(fnv1a64(canon));
}

std::string Gateway::call_with_retry(const CompletionRequest& request,
                                     const std::string& rendered, int sample_index) {
  int backoff = options_.backoff_ms;
  for (int attempt = 0;; ++attempt) {
    try {
      {
        std::lock_guard<std::mutex> lock(mutex_);
        ++stats_.provider_calls;
      }
      return provider_->complete_one(request, rendered, sample_index);
    } catch (const TransportError&) {
      if (attempt >= options_.max_retries) throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }
}

std::vector<std::string> Gateway::complete(const CompletionRequest& request) {
  request.validate();
  const std::string rendered = templates_.render(request.template_id, request.bindings);

  {
    std::lock_guard<std::mutex> lock(mutex_);
    ++stats_.requests;
    stats_.samples += request.n_samples;
    stats_.samples_by_template[request.template_id] += request.n_samples;
  }

  std::vector<std::string> out(static_cast<std::size_t>(request.n_samples));
  for (int k = 0; k < request.n_samples; ++k) {
    const std::string key = cache_key(request, k);
    bool hit = false;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = cache_.find(key);
      if (it != cache_.end()) {
        out[static_cast<std::size_t>(k)] = it->second;
        ++stats_.cache_hits;
        hit = true;
      }
    }
    if (hit) continue;

    const std::string text = call_with_retry(request, rendered, k);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto [it, inserted] = cache_.emplace(key, text);
      out[static_cast<std::size_t>(k)] = it->second;
      if (inserted && !options_.cache_path.empty()) append_cache_record(key, text);
    }
  }
  return out;
}

GatewayStats Gateway::stats() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return stats_;
}

void Gateway::load_cache_file() {
  std::ifstream in(options_.cache_path);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      const nlohmann::json record = nlohmann::json::parse(line);
      cache_[record.at("key").get<std::string>()] = record.at("text").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      continue;  // a torn tail line from a crashed run is not fatal
    }
  }
}

void Gateway::append_cache_record(const std::string& key, const std::string& text) {
  std::ofstream out(options_.cache_path, std::ios::app);
  if (!out) return;
  const nlohmann::json record = {
      {"key", key},
      {"text", text},
      {"ts", std::chrono::duration_cast<std::chrono::milliseconds>(
                 std::chrono::system_clock::now().time_since_epoch())
                 .count()},
  };
  out << record.dump() << "\n";
}

}  // namespace pgd
