#include "pgd/tasks.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "pgd/errors.hpp"
#include "pgd/util.hpp"

namespace pgd {

DataFormat format_from_extension(const std::string& path) {
  const std::string ext = to_lower(std::filesystem::path(path).extension().string());
  if (ext == ".jsonl" || ext == ".ndjson") return DataFormat::jsonl;
  if (ext == ".csv") return DataFormat::csv;
  throw std::invalid_argument("cannot infer data format from extension of " + path);
}

namespace {

void finish_dataset(Dataset& dataset, const std::string& path) {
  if (dataset.examples.empty()) {
    throw IngestionError(path + ": no examples found");
  }
  std::set<std::string> vocab;
  for (const auto& ex : dataset.examples) vocab.insert(ex.gold_label);
  dataset.label_vocabulary.assign(vocab.begin(), vocab.end());
  dataset.name = std::filesystem::path(path).stem().string();
}

Dataset load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);
  Dataset dataset;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError(path + ":" + std::to_string(line_no) +
                           ": invalid JSON: " + e.what());
    }
    if (!row.is_object() || !row.contains("input") || !row.contains("label")) {
      throw IngestionError(path + ":" + std::to_string(line_no) +
                           ": row must be an object with input and label fields");
    }
    LabeledExample ex;
    try {
      ex.input = row.at("input").get<std::string>();
      ex.gold_label = row.at("label").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw IngestionError(path + ":" + std::to_string(line_no) +
                           ": input and label must be strings");
    }
    for (const auto& [key, value] : row.items()) {
      if (key == "input" || key == "label") continue;
      ex.metadata[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
    dataset.examples.push_back(std::move(ex));
  }
  finish_dataset(dataset, path);
  return dataset;
}

// RFC 4180 field splitting: quoted fields may hold commas, doubled quotes,
// and newlines (rows are re-joined by the caller when a quote stays open).
std::vector<std::string> split_csv_row(const std::string& row, const std::string& path,
                                       int line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const char c = row[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < row.size() && row[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      if (!field.empty()) {
        throw IngestionError(path + ":" + std::to_string(line_no) +
                             ": quote inside unquoted field");
      }
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  if (in_quotes) {
    throw IngestionError(path + ":" + std::to_string(line_no) + ": unterminated quote");
  }
  fields.push_back(field);
  return fields;
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);

  auto read_record = [&](std::string* record, int* line_no) {
    std::string line;
    if (!std::getline(in, line)) return false;
    ++*line_no;
    // Re-join physical lines while a quoted field is open.
    auto quote_open = [](const std::string& s) {
      bool open = false;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') open = !open;
      }
      return open;
    };
    if (!line.empty() && line.back() == '\r') line.pop_back();
    *record = line;
    while (quote_open(*record) && std::getline(in, line)) {
      ++*line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      *record += "\n" + line;
    }
    return true;
  };

  int line_no = 0;
  std::string record;
  if (!read_record(&record, &line_no)) {
    throw IngestionError(path + ": empty file");
  }
  const std::vector<std::string> header = split_csv_row(record, path, line_no);
  std::size_t input_col = header.size(), label_col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name = fold_label(header[i]);
    if (name == "input") input_col = i;
    if (name == "label") label_col = i;
  }
  if (input_col == header.size() || label_col == header.size()) {
    throw IngestionError(path + ":1: header must contain input and label columns");
  }

  Dataset dataset;
  while (read_record(&record, &line_no)) {
    if (trim(record).empty()) continue;
    const std::vector<std::string> fields = split_csv_row(record, path, line_no);
    if (fields.size() != header.size()) {
      throw IngestionError(path + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()));
    }
    LabeledExample ex;
    ex.input = fields[input_col];
    ex.gold_label = fields[label_col];
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i == input_col || i == label_col) continue;
      ex.metadata[header[i]] = fields[i];
    }
    dataset.examples.push_back(std::move(ex));
  }
  finish_dataset(dataset, path);
  return dataset;
}

}  // namespace

Dataset load_dataset(const std::string& path, DataFormat format) {
  return format == DataFormat::jsonl ? load_jsonl(path) : load_csv(path);
}

void save_jsonl(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path);
  for (const auto& ex : dataset.examples) {
    nlohmann::json row = {{"input", ex.input}, {"label", ex.gold_label}};
    for (const auto& [key, value] : ex.metadata) row[key] = value;
    out << row.dump() << "\n";
  }
}

std::vector<LabeledExample> sample_minibatch(const Dataset& dataset, int size,
                                             std::uint64_t seed) {
  const std::size_t n = dataset.examples.size();
  if (size < 1) throw std::invalid_argument("minibatch size must be >= 1");
  if (static_cast<std::size_t>(size) > n) {
    throw std::invalid_argument("minibatch size " + std::to_string(size) +
                                " exceeds dataset size " + std::to_string(n));
  }
  std::vector<std::size_t> indices(n);
  for (std::size_t i = 0; i < n; ++i) indices[i] = i;
  std::mt19937_64 rng(seed);
  std::vector<LabeledExample> out;
  out.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), n - 1);
    std::swap(indices[static_cast<std::size_t>(i)], indices[pick(rng)]);
    out.push_back(dataset.examples[indices[static_cast<std::size_t>(i)]]);
  }
  return out;
}

std::string extract_label(const std::string& completion,
                          const std::vector<std::string>& vocabulary,
                          const std::optional<std::string>& extraction_regex) {
  std::string candidate;
  if (extraction_regex.has_value()) {
    std::regex pattern;
    try {
      pattern = std::regex(*extraction_regex);
    } catch (const std::regex_error& e) {
      throw std::invalid_argument(std::string("bad extraction regex: ") + e.what());
    }
    std::smatch match;
    if (std::regex_search(completion, match, pattern)) {
      candidate = match.size() > 1 && match[1].matched ? match[1].str() : match[0].str();
    }
  } else {
    for (const std::string& line : split_lines(completion)) {
      if (!trim(line).empty()) candidate = line;
    }
  }
  const std::string folded = fold_label(candidate);
  for (const auto& label : vocabulary) {
    if (fold_label(label) == folded) return label;
  }
  return trim(candidate);
}

std::string predict(Gateway& gateway, const Prompt& prompt,
                    const LabeledExample& example, const PredictOptions& options) {
  CompletionRequest request;
  request.template_id = options.template_id;
  request.bindings["prompt"] = prompt.text;
  request.bindings["input"] = example.input;
  request.bindings["labels"] = join(options.label_vocabulary, ", ");
  request.temperature = 0.0;
  request.max_tokens = options.max_tokens;
  request.n_samples = 1;
  std::vector<std::string> completions;
  try {
    completions = gateway.complete(request);
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception& e) {
    throw PredictionUnavailableError(std::string("task completion failed: ") + e.what());
  }
  return extract_label(completions.front(), options.label_vocabulary,
                       options.extraction_regex);
}

Predictor make_gateway_predictor(Gateway& gateway, PredictOptions options) {
  return [&gateway, options](const Prompt& prompt, const LabeledExample& example) {
    return predict(gateway, prompt, example, options);
  };
}

}  // namespace pgd
