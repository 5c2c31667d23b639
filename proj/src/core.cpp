#include "pgd/core.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <stdexcept>

#include "pgd/util.hpp"

namespace pgd {

void Prompt::validate() const {
  if (id.empty()) throw std::invalid_argument("prompt id must not be empty");
  if (text.empty()) throw std::invalid_argument("prompt text must not be empty");
}

bool labels_match(const std::string& a, const std::string& b) {
  return fold_label(a) == fold_label(b);
}

namespace {

void check_pair(const std::vector<std::string>& predictions,
                const std::vector<std::string>& golds) {
  if (predictions.empty()) throw std::invalid_argument("empty prediction set");
  if (predictions.size() != golds.size()) {
    std::ostringstream msg;
    msg << "prediction/gold size mismatch: " << predictions.size() << " vs " << golds.size();
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

double f1_score(const std::vector<std::string>& predictions,
                const std::vector<std::string>& golds,
                const std::string& positive_label) {
  check_pair(predictions, golds);
  const std::string pos = fold_label(positive_label);
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred_pos = fold_label(predictions[i]) == pos;
    const bool gold_pos = fold_label(golds[i]) == pos;
    if (pred_pos && gold_pos) ++tp;
    else if (pred_pos) ++fp;
    else if (gold_pos) ++fn;
  }
  const double denom_p = static_cast<double>(tp + fp);
  const double denom_r = static_cast<double>(tp + fn);
  const double precision = denom_p > 0 ? tp / denom_p : 0.0;
  const double recall = denom_r > 0 ? tp / denom_r : 0.0;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double macro_f1(const std::vector<std::string>& predictions,
                const std::vector<std::string>& golds) {
  check_pair(predictions, golds);
  std::set<std::string> labels;
  for (const auto& g : golds) labels.insert(fold_label(g));
  double sum = 0.0;
  for (const auto& label : labels) sum += f1_score(predictions, golds, label);
  return sum / static_cast<double>(labels.size());
}

double accuracy(const std::vector<std::string>& predictions,
                const std::vector<std::string>& golds) {
  check_pair(predictions, golds);
  long correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (labels_match(predictions[i], golds[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

}  // namespace pgd
