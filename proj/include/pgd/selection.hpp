#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pgd/core.hpp"
#include "pgd/tasks.hpp"

namespace pgd {

enum class Strategy { ucb1, thompson, greedy };
enum class SearchMode { beam, monte_carlo };

std::string strategy_name(Strategy strategy);
Strategy strategy_from_name(const std::string& name);
std::string search_mode_name(SearchMode mode);
SearchMode search_mode_from_name(const std::string& name);

struct Arm {
  std::string candidate_id;
  int pulls = 0;
  double reward_sum = 0.0;
  double success_pseudo = 0.0;  // per-example correct counts (Thompson prior tail)
  double failure_pseudo = 0.0;
  bool frozen = false;  // stopped probing after an unavailable reward

  double mean() const { return pulls > 0 ? reward_sum / pulls : 0.0; }
};

struct BanditState {
  std::vector<Arm> arms;
  long total_pulls = 0;
  Strategy strategy = Strategy::ucb1;
};

struct SelectionBudget {
  int rounds = 16;         // probe rounds to spend
  int minibatch_size = 8;  // examples per probe, clamped to the dev set
  int beam_width = 1;

  void validate() const;
};

struct RewardProbeReport {
  int evaluated = 0;
  int correct = 0;
  int failures = 0;
};

/// Fraction of the minibatch the candidate answers correctly, ignoring
/// examples whose prediction raised. Throws RewardUnavailableError when every
/// example failed.
double estimate_reward(const CandidatePrompt& candidate,
                       const std::vector<LabeledExample>& minibatch,
                       const Predictor& predictor,
                       RewardProbeReport* report = nullptr);

/// mean + sqrt(2 ln(total) / pulls); +infinity when the arm is unpulled.
double ucb_index(double mean, int pulls, long total_pulls);

/// Unpulled arms first (lowest index), then the highest index value; ties go
/// to the lowest arm index. Throws RewardUnavailableError if all arms froze.
int ucb_select(const BanditState& state);

/// Samples Beta(1 + successes, 1 + failures) per arm, plays the argmax.
int thompson_select(const BanditState& state, std::mt19937_64& rng);

/// Unpulled arms first, then the best empirical mean.
int greedy_select(const BanditState& state);

struct SelectionOutcome {
  std::vector<CandidatePrompt> beam;  // best first
  CandidatePrompt best;
  BanditState state;
  int rounds_run = 0;
  long eval_examples = 0;
  int frozen_arms = 0;
};

/// Spends `budget.rounds` probes on the candidates, each probe a freshly
/// seeded dev minibatch, then returns the top beam by empirical mean
/// (ties to the earlier candidate).
SelectionOutcome bandit_select(const std::vector<CandidatePrompt>& candidates,
                               const Dataset& dev, const Predictor& predictor,
                               const SelectionBudget& budget, Strategy strategy,
                               std::uint64_t seed);

/// Same probe budget, arms picked uniformly at random each round.
SelectionOutcome monte_carlo_select(const std::vector<CandidatePrompt>& candidates,
                                    const Dataset& dev, const Predictor& predictor,
                                    const SelectionBudget& budget, std::uint64_t seed);

}  // namespace pgd
