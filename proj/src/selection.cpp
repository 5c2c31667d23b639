#include "pgd/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pgd/errors.hpp"
#include "pgd/util.hpp"

namespace pgd {

std::string strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::ucb1: return "ucb1";
    case Strategy::thompson: return "thompson";
    case Strategy::greedy: return "greedy";
  }
  throw std::invalid_argument("unknown strategy");
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "ucb1") return Strategy::ucb1;
  if (name == "thompson") return Strategy::thompson;
  if (name == "greedy") return Strategy::greedy;
  throw std::invalid_argument("unknown strategy: " + name);
}

std::string search_mode_name(SearchMode mode) {
  switch (mode) {
    case SearchMode::beam: return "beam";
    case SearchMode::monte_carlo: return "monte_carlo";
  }
  throw std::invalid_argument("unknown search mode");
}

SearchMode search_mode_from_name(const std::string& name) {
  if (name == "beam") return SearchMode::beam;
  if (name == "monte_carlo") return SearchMode::monte_carlo;
  throw std::invalid_argument("unknown search mode: " + name);
}

void SelectionBudget::validate() const {
  if (rounds < 1) throw std::invalid_argument("selection rounds must be >= 1");
  if (minibatch_size < 1) throw std::invalid_argument("probe minibatch must be >= 1");
  if (beam_width < 1) throw std::invalid_argument("beam width must be >= 1");
}

double estimate_reward(const CandidatePrompt& candidate,
                       const std::vector<LabeledExample>& minibatch,
                       const Predictor& predictor, RewardProbeReport* report) {
  if (minibatch.empty()) throw std::invalid_argument("empty probe minibatch");
  int evaluated = 0, correct = 0, failures = 0;
  for (const auto& example : minibatch) {
    std::string prediction;
    try {
      prediction = predictor(candidate.prompt, example);
    } catch (const std::exception&) {
      ++failures;
      continue;
    }
    ++evaluated;
    if (labels_match(prediction, example.gold_label)) ++correct;
  }
  if (report != nullptr) {
    report->evaluated = evaluated;
    report->correct = correct;
    report->failures = failures;
  }
  if (evaluated == 0) {
    throw RewardUnavailableError("every probe example failed for candidate " +
                                 candidate.prompt.id);
  }
  return static_cast<double>(correct) / static_cast<double>(evaluated);
}

double ucb_index(double mean, int pulls, long total_pulls) {
  if (pulls <= 0) return std::numeric_limits<double>::infinity();
  return mean + std::sqrt(2.0 * std::log(static_cast<double>(total_pulls)) /
                          static_cast<double>(pulls));
}

namespace {

int first_unpulled(const BanditState& state) {
  for (std::size_t i = 0; i < state.arms.size(); ++i) {
    if (!state.arms[i].frozen && state.arms[i].pulls == 0) return static_cast<int>(i);
  }
  return -1;
}

void require_live_arm(const BanditState& state) {
  for (const auto& arm : state.arms) {
    if (!arm.frozen) return;
  }
  throw RewardUnavailableError("every arm is frozen");
}

}  // namespace

int ucb_select(const BanditState& state) {
  if (state.arms.empty()) throw std::invalid_argument("no arms");
  require_live_arm(state);
  const int unpulled = first_unpulled(state);
  if (unpulled >= 0) return unpulled;
  int best = -1;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < state.arms.size(); ++i) {
    const Arm& arm = state.arms[i];
    if (arm.frozen) continue;
    const double value = ucb_index(arm.mean(), arm.pulls, state.total_pulls);
    if (value > best_value) {
      best_value = value;
      best = static_cast<int>(i);
    }
  }
  return best;
}

int thompson_select(const BanditState& state, std::mt19937_64& rng) {
  if (state.arms.empty()) throw std::invalid_argument("no arms");
  require_live_arm(state);
  int best = -1;
  double best_sample = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < state.arms.size(); ++i) {
    const Arm& arm = state.arms[i];
    if (arm.frozen) continue;
    std::gamma_distribution<double> ga(1.0 + arm.success_pseudo, 1.0);
    std::gamma_distribution<double> gb(1.0 + arm.failure_pseudo, 1.0);
    const double a = ga(rng);
    const double b = gb(rng);
    const double sample = a / (a + b);
    if (sample > best_sample) {
      best_sample = sample;
      best = static_cast<int>(i);
    }
  }
  return best;
}

int greedy_select(const BanditState& state) {
  if (state.arms.empty()) throw std::invalid_argument("no arms");
  require_live_arm(state);
  const int unpulled = first_unpulled(state);
  if (unpulled >= 0) return unpulled;
  int best = -1;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < state.arms.size(); ++i) {
    const Arm& arm = state.arms[i];
    if (arm.frozen) continue;
    if (arm.mean() > best_mean) {
      best_mean = arm.mean();
      best = static_cast<int>(i);
    }
  }
  return best;
}

namespace {

SelectionOutcome run_selection(const std::vector<CandidatePrompt>& candidates,
                               const Dataset& dev, const Predictor& predictor,
                               const SelectionBudget& budget, Strategy strategy,
                               bool uniform_random, std::uint64_t seed) {
  budget.validate();
  if (candidates.empty()) throw std::invalid_argument("no candidates to select from");
  if (dev.examples.empty()) throw std::invalid_argument("empty dev set");

  SelectionOutcome outcome;
  outcome.state.strategy = strategy;
  for (const auto& c : candidates) {
    Arm arm;
    arm.candidate_id = c.prompt.id;
    outcome.state.arms.push_back(std::move(arm));
  }

  const int probe_size =
      std::min(budget.minibatch_size, static_cast<int>(dev.examples.size()));
  std::mt19937_64 strategy_rng(derive_seed(seed, "strategy_draws"));

  for (int round = 0; round < budget.rounds; ++round) {
    int pick = -1;
    try {
      if (uniform_random) {
        require_live_arm(outcome.state);
        std::vector<int> live;
        for (std::size_t i = 0; i < outcome.state.arms.size(); ++i) {
          if (!outcome.state.arms[i].frozen) live.push_back(static_cast<int>(i));
        }
        pick = live[std::uniform_int_distribution<std::size_t>(0, live.size() - 1)(
            strategy_rng)];
      } else {
        switch (strategy) {
          case Strategy::ucb1: pick = ucb_select(outcome.state); break;
          case Strategy::thompson:
            pick = thompson_select(outcome.state, strategy_rng);
            break;
          case Strategy::greedy: pick = greedy_select(outcome.state); break;
        }
      }
    } catch (const RewardUnavailableError&) {
      break;  // nothing left to probe
    }

    const std::vector<LabeledExample> probe = sample_minibatch(
        dev, probe_size, derive_seed(seed, "probe", static_cast<std::uint64_t>(round)));

    Arm& arm = outcome.state.arms[static_cast<std::size_t>(pick)];
    RewardProbeReport report;
    double reward = 0.0;
    try {
      reward = estimate_reward(candidates[static_cast<std::size_t>(pick)], probe,
                               predictor, &report);
    } catch (const RewardUnavailableError&) {
      arm.frozen = true;
      ++outcome.frozen_arms;
      ++outcome.rounds_run;
      continue;
    }
    ++arm.pulls;
    arm.reward_sum += reward;
    arm.success_pseudo += report.correct;
    arm.failure_pseudo += report.evaluated - report.correct;
    ++outcome.state.total_pulls;
    outcome.eval_examples += report.evaluated + report.failures;
    ++outcome.rounds_run;
  }

  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ma = outcome.state.arms[a].mean();
    const double mb = outcome.state.arms[b].mean();
    if (ma != mb) return ma > mb;
    return a < b;
  });

  const std::size_t width =
      std::min(static_cast<std::size_t>(budget.beam_width), candidates.size());
  for (std::size_t i = 0; i < width; ++i) {
    CandidatePrompt c = candidates[order[i]];
    c.mean_reward = outcome.state.arms[order[i]].mean();
    c.probes = outcome.state.arms[order[i]].pulls;
    outcome.beam.push_back(std::move(c));
  }
  outcome.best = outcome.beam.front();
  return outcome;
}

}  // namespace

SelectionOutcome bandit_select(const std::vector<CandidatePrompt>& candidates,
                               const Dataset& dev, const Predictor& predictor,
                               const SelectionBudget& budget, Strategy strategy,
                               std::uint64_t seed) {
  return run_selection(candidates, dev, predictor, budget, strategy, false, seed);
}

SelectionOutcome monte_carlo_select(const std::vector<CandidatePrompt>& candidates,
                                    const Dataset& dev, const Predictor& predictor,
                                    const SelectionBudget& budget, std::uint64_t seed) {
  return run_selection(candidates, dev, predictor, budget, Strategy::ucb1, true, seed);
}

}  // namespace pgd
