#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pgd/core.hpp"
#include "pgd/gateway.hpp"

namespace pgd {

enum class DataFormat { jsonl, csv };

DataFormat format_from_extension(const std::string& path);

struct Dataset {
  std::vector<LabeledExample> examples;
  std::vector<std::string> label_vocabulary;  // sorted unique raw labels
  std::string name;
};

/// Reads JSONL ({"input": ..., "label": ..., extras...}) or headered CSV with
/// `input` and `label` columns; extra fields land in metadata. Throws
/// IngestionError naming the offending line.
Dataset load_dataset(const std::string& path, DataFormat format);

void save_jsonl(const Dataset& dataset, const std::string& path);

/// Uniform sample of `size` distinct examples. Throws std::invalid_argument
/// when size < 1 or size > |dataset|.
std::vector<LabeledExample> sample_minibatch(const Dataset& dataset, int size,
                                             std::uint64_t seed);

using Predictor = std::function<std::string(const Prompt&, const LabeledExample&)>;

struct PredictOptions {
  std::vector<std::string> label_vocabulary;
  std::string template_id = "task";
  int max_tokens = 64;
  /// When set, the first capture group (or whole match) of this pattern is
  /// the raw answer; otherwise the last nonempty completion line is.
  std::optional<std::string> extraction_regex;
};

/// Maps a raw answer to vocabulary form (case-insensitive after trimming).
/// Falls back to the trimmed raw answer when nothing matches.
std::string extract_label(const std::string& completion,
                          const std::vector<std::string>& vocabulary,
                          const std::optional<std::string>& extraction_regex = {});

/// One deterministic (temperature 0) task completion plus label extraction.
/// Gateway failures surface as PredictionUnavailableError.
std::string predict(Gateway& gateway, const Prompt& prompt,
                    const LabeledExample& example, const PredictOptions& options);

Predictor make_gateway_predictor(Gateway& gateway, PredictOptions options);

}  // namespace pgd
