// Acceptance gate: every release criterion as one pass/fail line.
// Exit status is the number of failed criteria.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pgd/agents.hpp"
#include "pgd/coordinator.hpp"
#include "pgd/core.hpp"
#include "pgd/embedding.hpp"
#include "pgd/expansion.hpp"
#include "pgd/gateway.hpp"
#include "pgd/lab.hpp"
#include "pgd/optimizer.hpp"
#include "pgd/selection.hpp"
#include "pgd/tasks.hpp"
#include "pgd/util.hpp"
#include "test_support.hpp"

using namespace pgd;

namespace {

struct Problems {
  std::vector<std::string> items;
  std::string note;

  void expect(bool ok, const std::string& message) {
    if (!ok) items.push_back(message);
  }
};

/// Maps each text to a deterministic direction on the unit circle, so pairs
/// realize the whole cosine range and conflicts genuinely occur.
class AngleEncoder final : public Encoder {
 public:
  int dimension() const override { return 2; }

  std::vector<EmbeddingVector> embed_batch(
      const std::vector<std::string>& texts) const override {
    std::vector<EmbeddingVector> out;
    for (const auto& text : texts) {
      const double phi = static_cast<double>(fnv1a64(text) >> 11) * 0x1p-53 *
                         2.0 * 3.141592653589793;
      EmbeddingVector v;
      v.values = {std::cos(phi), std::sin(phi)};
      v.source_text_hash = fnv1a64(text);
      out.push_back(std::move(v));
    }
    return out;
  }
};

CandidatePrompt cand(const std::string& id) {
  CandidatePrompt c;
  c.prompt = {id, "prompt " + id, std::nullopt, 1, "applied"};
  return c;
}

Dataset dev_of(int n) {
  Dataset d;
  for (int i = 0; i < n; ++i) d.examples.push_back({"q" + std::to_string(i), "yes", {}});
  d.label_vocabulary = {"no", "yes"};
  return d;
}

Dataset label_dataset(int n, const std::vector<std::string>& labels) {
  Dataset ds;
  for (int i = 0; i < n; ++i) {
    const std::string label = labels[i % labels.size()];
    ds.examples.push_back({"example " + std::to_string(i) + " about " + label, label, {}});
  }
  std::set<std::string> vocab(labels.begin(), labels.end());
  ds.label_vocabulary.assign(vocab.begin(), vocab.end());
  return ds;
}

/// Deterministic stand-in for a model of known quality: answers correctly on
/// a hash-selected fraction `q` of inputs, fixed per (prompt id, input).
Predictor quality_predictor(std::map<std::string, double> quality) {
  return [quality](const Prompt& p, const LabeledExample& ex) -> std::string {
    const double q = quality.at(p.id);
    const std::uint64_t h = fnv1a64(p.id + '|' + ex.input);
    return (static_cast<double>(h % 100000) / 100000.0) < q ? ex.gold_label
                                                            : "no-" + ex.gold_label;
  };
}

RunConfig accept_config() {
  RunConfig config;
  config.iterations = 3;
  config.beam_width = 2;
  config.train_minibatch = 6;
  config.agent_count = 4;
  config.error_cap = 3;
  config.feedback_count = 3;
  config.coordinator.max_clusters = 4;
  config.expansion.variants_per_gradient = 2;
  config.expansion.mc_samples = 2;
  config.expansion.successor_cap = 8;
  config.selection_rounds = 6;
  config.probe_minibatch = 8;
  config.seed = 11;
  return config;
}

RunReport run_accept(const RunConfig& config, std::uint64_t backend_seed,
                     GatewayStats* stats_out = nullptr) {
  Gateway gateway = pgd::testing::make_mock_gateway(backend_seed);
  auto encoder = make_mock_encoder(64, backend_seed);
  const Dataset train = label_dataset(18, {"alpha", "beta", "gamma"});
  const Dataset dev = label_dataset(12, {"alpha", "beta", "gamma"});
  const RunReport report = run(config, "classify the example", gateway, *encoder, train, dev);
  if (stats_out != nullptr) *stats_out = gateway.stats();
  return report;
}

// 1. Two runs from the same configuration serialize byte-identically.
Problems c1_determinism() {
  Problems p;
  const RunConfig config = accept_config();
  const std::string a = report_to_json(run_accept(config, 11)).dump(2);
  const std::string b = report_to_json(run_accept(config, 11)).dump(2);
  p.expect(a == b, "rerun produced different report bytes");
  p.expect(a.size() > 500, "report suspiciously small: " + std::to_string(a.size()));
  p.note = std::to_string(a.size()) + " report bytes, twice";
  return p;
}

// 2. Per-iteration provider-call accounting matches the closed-form budget.
Problems c2_budget_accounting() {
  Problems p;
  const RunConfig config = accept_config();
  GatewayStats stats;
  const RunReport report = run_accept(config, 11, &stats);

  const int n_agents = config.agent_count;
  const int s = config.expansion.variants_per_gradient;
  const int mc = config.expansion.mc_samples;
  p.expect(report.per_iteration.size() == 3, "run did not use the full iteration budget");
  long staged = 0, evals = 0;
  for (const auto& rec : report.per_iteration) {
    p.expect(!rec.skipped, "iteration skipped under the healthy provider");
    const std::string tag = " (iteration " + std::to_string(rec.iteration) + ")";
    p.expect(rec.gradient_llm_calls == n_agents,
             "gradient calls != agent count" + tag);
    p.expect(rec.gradients_generated == n_agents * config.feedback_count,
             "parsed gradients != agents * feedback" + tag);
    p.expect(rec.application_llm_calls == rec.fused_count * s,
             "application calls != fused * variants" + tag);
    p.expect(rec.paraphrase_llm_calls == rec.first_generation_variants * mc,
             "paraphrase calls != variants * mc" + tag);
    p.expect(rec.fusion_llm_calls >= 0 && rec.fusion_llm_calls <= rec.fused_count,
             "fusion calls outside [0, fused]" + tag);
    p.expect(rec.candidates_generated >= 1 &&
                 rec.candidates_generated <= config.expansion.successor_cap,
             "candidate count outside [1, cap]" + tag);
    staged += rec.gradient_llm_calls + rec.fusion_llm_calls + rec.application_llm_calls +
              rec.paraphrase_llm_calls;
    evals += rec.evaluations_spent;
  }
  p.expect(staged + report.total_eval_examples == report.total_llm_calls,
           "stage calls + task calls != total calls");
  p.expect(report.total_llm_calls == stats.samples,
           "report total != gateway sample count");
  const long baseline = config.probe_minibatch;  // dev is larger, no clamping
  p.expect(evals + baseline == report.total_eval_examples,
           "iteration evals + baseline probe != total evals");

  // Cross-check each stage against the gateway's own per-template counters.
  long recorded_gradient = 0, recorded_fusion = 0, recorded_application = 0,
       recorded_paraphrase = 0;
  for (const auto& rec : report.per_iteration) {
    recorded_gradient += rec.gradient_llm_calls;
    recorded_fusion += rec.fusion_llm_calls;
    recorded_application += rec.application_llm_calls;
    recorded_paraphrase += rec.paraphrase_llm_calls;
  }
  long observed_gradient = 0;
  for (const auto& [template_id, count] : stats.samples_by_template) {
    if (template_id.rfind("gradient_", 0) == 0) observed_gradient += count;
  }
  auto observed = [&stats](const std::string& template_id) -> long {
    const auto it = stats.samples_by_template.find(template_id);
    return it == stats.samples_by_template.end() ? 0 : it->second;
  };
  p.expect(recorded_gradient == observed_gradient, "gradient calls != gateway counter");
  p.expect(recorded_fusion == observed("fuse"), "fusion calls != gateway counter");
  p.expect(recorded_application == observed("apply"), "application calls != gateway counter");
  p.expect(recorded_paraphrase == observed("paraphrase"),
           "paraphrase calls != gateway counter");
  p.expect(report.total_eval_examples == observed("task"), "task calls != gateway counter");
  std::ostringstream note;
  note << report.total_llm_calls << " calls over " << report.per_iteration.size()
       << " iterations, " << report.total_eval_examples << " task evals";
  p.note = note.str();
  return p;
}

// 3. Fused clusters partition the flattened gradients; conflict pairs match
//    an independent recount from the same embeddings.
Problems c3_partition_and_conflicts() {
  Problems p;
  std::mt19937_64 rng(303);
  const AngleEncoder encoder;
  long clusters_checked = 0, conflicts_seen = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint64_t seed = 9000 + trial;
    Gateway gateway = pgd::testing::make_mock_gateway(seed);

    GradientSet set;
    const int agents = 1 + static_cast<int>(rng() % 4);
    for (int a = 0; a < agents; ++a) {
      const AgentRole role = all_roles()[a];
      const int m = 1 + static_cast<int>(rng() % 4);
      CompletionRequest r;
      r.template_id = "gradient_" + role_name(role);
      r.bindings = {{"prompt", "base " + std::to_string(trial)},
                    {"errors", "error text " + std::to_string(trial)},
                    {"m", std::to_string(m)}};
      set.entries[role] = parse_gradient_blocks(gateway.complete(r).front(), role).blocks;
    }
    const int total = set.total();

    CoordinatorConfig config;
    config.max_clusters = 1 + static_cast<int>(rng() % 8);
    config.conflict_threshold = 0.2 + 0.3 * static_cast<double>(rng() % 100) / 100.0;
    config.seed = seed;
    const CoordinationOutcome outcome = coordinate_and_fuse(set, gateway, encoder, config);

    const int expected_clusters = std::min(config.max_clusters, total);
    p.expect(static_cast<int>(outcome.fused.size()) == expected_clusters,
             "cluster count != min(max_clusters, total) in trial " + std::to_string(trial));

    std::vector<int> seen;
    for (const auto& fused : outcome.fused) {
      p.expect(fused.member_indices.size() == fused.member_weights.size(),
               "weights misaligned in trial " + std::to_string(trial));
      p.expect(std::is_sorted(fused.member_indices.begin(), fused.member_indices.end()),
               "member indices unsorted in trial " + std::to_string(trial));
      double sum = 0.0;
      for (double w : fused.member_weights) sum += w;
      p.expect(std::abs(sum - 1.0) <= 1e-9,
               "weights do not sum to 1 in trial " + std::to_string(trial));
      seen.insert(seen.end(), fused.member_indices.begin(), fused.member_indices.end());
      ++clusters_checked;
    }
    std::sort(seen.begin(), seen.end());
    std::vector<int> want(total);
    for (int i = 0; i < total; ++i) want[i] = i;
    p.expect(seen == want, "members are not a partition in trial " + std::to_string(trial));

    // Recount conflicts directly from the same embedded texts.
    const auto flat = set.flattened();
    std::vector<std::string> texts;
    for (const auto& block : flat) texts.push_back(block.reason + "\n" + block.suggested_edit);
    const auto vectors = encoder.embed_batch(texts);
    std::set<std::pair<int, int>> expected;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      for (std::size_t j = i + 1; j < vectors.size(); ++j) {
        if (cosine_similarity(vectors[i].values, vectors[j].values) <
            -config.conflict_threshold) {
          expected.insert({static_cast<int>(i), static_cast<int>(j)});
        }
      }
    }
    std::set<std::pair<int, int>> got;
    for (const auto& c : outcome.conflicts) got.insert({c.a, c.b});
    p.expect(got == expected, "conflict recount mismatch in trial " + std::to_string(trial));
    conflicts_seen += static_cast<long>(got.size());
    if (!p.items.empty()) break;
  }
  p.expect(conflicts_seen > 0, "no conflicts were exercised, the recount is vacuous");
  p.note = "200 trials, " + std::to_string(clusters_checked) + " clusters, " +
           std::to_string(conflicts_seen) + " conflicts";
  return p;
}

// 4. Fusion weights equal the closed-form softmax.
Problems c4_softmax() {
  Problems p;
  const auto w = fusion_weights({0.0, std::log(3.0)}, 1.0);
  p.expect(std::abs(w[0] - 0.25) <= 1e-12, "hand case w0 != 1/4");
  p.expect(std::abs(w[1] - 0.75) <= 1e-12, "hand case w1 != 3/4");

  std::mt19937_64 rng(404);
  std::normal_distribution<double> noise(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    std::vector<double> scores(n);
    for (double& s : scores) s = noise(rng);
    const double sharpness = 0.5 + static_cast<double>(rng() % 40) / 10.0;
    const auto weights = fusion_weights(scores, sharpness);

    double sum = 0.0;
    double max_score = *std::max_element(scores.begin(), scores.end());
    double denom = 0.0;
    for (double s : scores) denom += std::exp(sharpness * (s - max_score));
    for (int i = 0; i < n; ++i) {
      sum += weights[i];
      const double direct = std::exp(sharpness * (scores[i] - max_score)) / denom;
      p.expect(std::abs(weights[i] - direct) <= 1e-12, "weight differs from direct form");
    }
    p.expect(std::abs(sum - 1.0) <= 1e-12, "weights do not sum to 1");

    std::vector<double> shifted = scores;
    for (double& s : shifted) s += 1234.5;
    const auto weights2 = fusion_weights(shifted, sharpness);
    for (int i = 0; i < n; ++i) {
      p.expect(std::abs(weights[i] - weights2[i]) <= 1e-12, "shift changed the weights");
    }
    if (!p.items.empty()) break;
  }
  p.note = "hand case exact, 100 random vectors shift-invariant";
  return p;
}

// 5. The ucb pick equals a brute-force argmax of the closed-form index.
Problems c5_ucb_closed_form() {
  Problems p;
  BanditState hand;
  hand.arms = {{"A", 10, 5.0, 0, 0, false}, {"B", 2, 0.8, 0, 0, false}};
  hand.total_pulls = 12;
  p.expect(ucb_select(hand) == 1, "hand case picked the wrong arm");
  const double index_a = 0.5 + std::sqrt(2.0 * std::log(12.0) / 10.0);
  const double index_b = 0.4 + std::sqrt(2.0 * std::log(12.0) / 2.0);
  p.expect(std::abs(ucb_index(0.5, 10, 12) - index_a) <= 1e-12, "index(A) mismatch");
  p.expect(std::abs(ucb_index(0.4, 2, 12) - index_b) <= 1e-12, "index(B) mismatch");

  // Exhaustive enumeration: every pull profile with 2..4 arms and counts
  // 0..5, under both distinct means and all-equal means (exact index ties),
  // must match an oracle with unpulled-first and lowest-index tie-breaking.
  auto oracle = [](const BanditState& state) {
    for (std::size_t i = 0; i < state.arms.size(); ++i) {
      if (!state.arms[i].frozen && state.arms[i].pulls == 0) return static_cast<int>(i);
    }
    int best_arm = -1;
    double best = -1.0;
    for (std::size_t i = 0; i < state.arms.size(); ++i) {
      const double mean = state.arms[i].reward_sum / state.arms[i].pulls;
      const double index =
          mean + std::sqrt(2.0 * std::log(static_cast<double>(state.total_pulls)) /
                           state.arms[i].pulls);
      if (index > best) {
        best = index;
        best_arm = static_cast<int>(i);
      }
    }
    return best_arm;
  };
  const double mean_table[4] = {0.7, 0.3, 0.5, 0.1};
  long states_checked = 0;
  for (int arms = 2; arms <= 4 && p.items.empty(); ++arms) {
    long profiles = 1;
    for (int i = 0; i < arms; ++i) profiles *= 6;
    for (long profile = 0; profile < profiles; ++profile) {
      for (const bool equal_means : {false, true}) {
        BanditState state;
        long rest = profile;
        for (int i = 0; i < arms; ++i) {
          Arm arm;
          arm.candidate_id = "arm" + std::to_string(i);
          arm.pulls = static_cast<int>(rest % 6);
          rest /= 6;
          arm.reward_sum = arm.pulls * (equal_means ? 0.5 : mean_table[i]);
          state.total_pulls += arm.pulls;
          state.arms.push_back(arm);
        }
        if (ucb_select(state) != oracle(state)) {
          p.items.push_back("enumeration disagreement at profile " +
                            std::to_string(profile));
          break;
        }
        ++states_checked;
      }
      if (!p.items.empty()) break;
    }
  }

  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> mean_dist(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    BanditState state;
    const int arms = 2 + static_cast<int>(rng() % 4);
    for (int i = 0; i < arms; ++i) {
      Arm arm;
      arm.candidate_id = "arm" + std::to_string(i);
      arm.pulls = static_cast<int>(rng() % 7);  // zero exercises unpulled-first
      arm.reward_sum = arm.pulls * mean_dist(rng);
      state.total_pulls += arm.pulls;
      state.arms.push_back(arm);
    }
    int expected = -1;
    for (int i = 0; i < arms; ++i) {
      if (state.arms[i].pulls == 0) {
        expected = i;
        break;
      }
    }
    if (expected < 0) {
      double best = -1.0;
      for (int i = 0; i < arms; ++i) {
        const double mean = state.arms[i].reward_sum / state.arms[i].pulls;
        const double index =
            mean + std::sqrt(2.0 * std::log(static_cast<double>(state.total_pulls)) /
                             state.arms[i].pulls);
        if (index > best) {
          best = index;
          expected = i;
        }
      }
    }
    if (ucb_select(state) != expected) {
      p.items.push_back("brute-force disagreement in trial " + std::to_string(trial));
      break;
    }
  }
  p.note = "hand case, " + std::to_string(states_checked) +
           " enumerated states, 2000 random states";
  return p;
}

struct IdentificationEnv {
  std::vector<CandidatePrompt> candidates;
  Predictor predictor;
  Dataset dev;
};

IdentificationEnv easy_env() {
  IdentificationEnv env;
  env.candidates = {cand("a10"), cand("a50"), cand("a90")};  // best arm last
  env.predictor = quality_predictor({{"a10", 0.1}, {"a50", 0.5}, {"a90", 0.9}});
  env.dev = dev_of(400);
  return env;
}

// 6. Identification rates order ucb >= thompson >= greedy, ucb >= 95%.
Problems c6_identification_order() {
  Problems p;
  const IdentificationEnv env = easy_env();
  SelectionBudget budget;
  budget.rounds = 200;
  budget.minibatch_size = 1;
  const int seeds = 100;
  std::map<Strategy, int> hits;
  for (Strategy s : {Strategy::ucb1, Strategy::thompson, Strategy::greedy}) {
    for (int seed = 0; seed < seeds; ++seed) {
      const auto out =
          bandit_select(env.candidates, env.dev, env.predictor, budget, s, 1000 + seed);
      if (out.best.prompt.id == "a90") ++hits[s];
    }
  }
  const int ucb = hits[Strategy::ucb1];
  const int thompson = hits[Strategy::thompson];
  const int greedy = hits[Strategy::greedy];
  p.expect(ucb >= 95, "ucb identification below 95%");
  p.expect(ucb >= thompson, "thompson beat ucb");
  p.expect(thompson >= greedy, "greedy beat thompson");
  std::ostringstream note;
  note << "ucb " << ucb << "/100, thompson " << thompson << "/100, greedy " << greedy
       << "/100";
  p.note = note.str();
  return p;
}

// 7. Under a tight paired budget, ucb beam beats uniform monte carlo; the
//    exact binomial sign test over disagreements is significant at 0.05.
Problems c7_beam_vs_monte_carlo() {
  Problems p;
  // 19 decoys plus one better arm listed last: with 80 single-example pulls
  // over 20 arms, uniform probing is noise-bound while adaptive allocation
  // is not, so the paired gap is wide enough for 100 seeds.
  std::vector<CandidatePrompt> candidates;
  std::map<std::string, double> quality;
  for (int i = 1; i < 20; ++i) {
    const std::string id = "arm" + std::to_string(i);
    quality[id] = 0.55;
    candidates.push_back(cand(id));
  }
  quality["best"] = 0.85;
  candidates.push_back(cand("best"));
  const Predictor predictor = quality_predictor(quality);
  const Dataset dev = dev_of(400);
  SelectionBudget budget;
  budget.rounds = 80;
  budget.minibatch_size = 1;

  const int seeds = 100;
  int ucb_only = 0, mc_only = 0, ucb_hits = 0, mc_hits = 0;
  for (int seed = 0; seed < seeds; ++seed) {
    const bool u = bandit_select(candidates, dev, predictor, budget, Strategy::ucb1,
                                 5000 + seed)
                       .best.prompt.id == "best";
    const bool m =
        monte_carlo_select(candidates, dev, predictor, budget, 5000 + seed).best.prompt.id ==
        "best";
    ucb_hits += u;
    mc_hits += m;
    if (u && !m) ++ucb_only;
    if (m && !u) ++mc_only;
  }
  p.expect(ucb_hits > mc_hits, "ucb did not beat monte carlo overall");

  const int n = ucb_only + mc_only;
  double tail = 0.0;
  for (int k = ucb_only; k <= n; ++k) {
    const double logc =
        std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    tail += std::exp(logc - n * std::log(2.0));
  }
  p.expect(n > 0, "no disagreements to test");
  p.expect(tail < 0.05, "sign test not significant: p = " + std::to_string(tail));
  std::ostringstream note;
  note << "ucb " << ucb_hits << "/100 vs mc " << mc_hits << "/100, disagreements " << ucb_only
       << ":" << mc_only << ", p = " << tail;
  p.note = note.str();
  return p;
}

// 8. Probe budgets are conserved exactly, and an exhaustive budget recovers
//    the true full-evaluation ranking.
Problems c8_budget_conservation() {
  Problems p;
  std::mt19937_64 rng(808);
  for (int trial = 0; trial < 20; ++trial) {
    const int dev_n = 10 + static_cast<int>(rng() % 21);
    const Dataset dev = dev_of(dev_n);
    const std::vector<CandidatePrompt> candidates = {cand("x"), cand("y"), cand("z")};
    const Predictor predictor =
        quality_predictor({{"x", 0.3}, {"y", 0.6}, {"z", 0.8}});
    SelectionBudget budget;
    budget.rounds = 1 + static_cast<int>(rng() % 12);
    budget.minibatch_size = 1 + static_cast<int>(rng() % 10);
    const auto out = bandit_select(candidates, dev, predictor, budget, Strategy::ucb1,
                                   700 + trial);
    const long probe = std::min(budget.minibatch_size, dev_n);
    p.expect(out.eval_examples == budget.rounds * probe,
             "eval examples != rounds * probe in trial " + std::to_string(trial));
    long pulls = 0;
    for (const auto& arm : out.state.arms) pulls += arm.pulls;
    p.expect(pulls == budget.rounds, "pulls != rounds in trial " + std::to_string(trial));
    p.expect(out.rounds_run == budget.rounds, "rounds_run mismatch");
  }

  // Full-dev probes: every pull scores the whole dev set, so the final
  // ranking must equal the brute-force full-evaluation ranking.
  const Dataset dev = dev_of(20);
  const std::vector<std::string> ids = {"c0", "c1", "c2", "c3", "c4"};
  std::map<std::string, double> quality = {
      {"c0", 0.15}, {"c1", 0.85}, {"c2", 0.55}, {"c3", 0.7}, {"c4", 0.3}};
  std::vector<CandidatePrompt> candidates;
  for (const auto& id : ids) candidates.push_back(cand(id));
  const Predictor predictor = quality_predictor(quality);

  std::vector<std::pair<double, int>> truth;  // (full accuracy, index)
  for (std::size_t i = 0; i < ids.size(); ++i) {
    int correct = 0;
    for (const auto& ex : dev.examples) {
      if (labels_match(predictor(candidates[i].prompt, ex), ex.gold_label)) ++correct;
    }
    truth.push_back({static_cast<double>(correct) / 20.0, static_cast<int>(i)});
  }
  std::stable_sort(truth.begin(), truth.end(), [](const auto& a, const auto& b) {
    return a.first > b.first;
  });

  SelectionBudget budget;
  budget.rounds = 15;
  budget.minibatch_size = 20;
  budget.beam_width = 5;
  const auto out = bandit_select(candidates, dev, predictor, budget, Strategy::ucb1, 3);
  for (std::size_t rank = 0; rank < truth.size(); ++rank) {
    p.expect(out.beam[rank].prompt.id == ids[truth[rank].second],
             "rank " + std::to_string(rank) + " disagrees with the full evaluation");
    p.expect(std::abs(out.beam[rank].mean_reward - truth[rank].first) <= 1e-12,
             "mean at rank " + std::to_string(rank) + " differs from the full accuracy");
  }
  p.note = "20 budget trials conserved; exhaustive ranking matches brute force";
  return p;
}

// 9. Convex averaged regret decays like T^-1/2 with zero projection
//    inequality violations across horizons {100, 1000, 10000} x 50 seeds.
Problems c9_convex_rate() {
  Problems p;
  lab::LabConfig base;
  base.objective = lab::Objective::convex_norm;
  base.dimension = 10;
  base.alignment = 0.9;
  base.second_moment = 1.1;
  base.noise_floor = 1.0;
  base.start_radius = 1.0;
  base.seed = 0;
  const lab::RateStudy study = lab::run_rate_study(base, {100, 1000, 10000}, 50);
  p.expect(study.exponent >= -0.6 && study.exponent <= -0.4,
           "exponent outside [-0.6, -0.4]: " + std::to_string(study.exponent));
  p.expect(study.total_lemma_violations == 0,
           std::to_string(study.total_lemma_violations) + " projection violations");
  p.expect(study.mean_values[0] > study.mean_values[1] &&
               study.mean_values[1] > study.mean_values[2],
           "averaged regret is not decreasing in the horizon");
  std::ostringstream note;
  note << "exponent " << study.exponent << ", 0 violations over 150 traces";
  p.note = note.str();
  return p;
}

// 10. Nonconvex averaged squared gradient decays like T^-1/2, satisfies the
//     per-seed plug-in bound, and never violates the descent inequality.
Problems c10_nonconvex_rate() {
  Problems p;
  lab::LabConfig base;
  base.objective = lab::Objective::nonconvex_sine;
  base.dimension = 10;
  base.alignment = 0.9;
  base.second_moment = 1.1;
  base.noise_floor = 1.0;
  base.start_radius = 3.0;
  base.seed = 1;
  const lab::RateStudy study = lab::run_rate_study(base, {100, 1000, 10000}, 50);
  p.expect(study.exponent >= -0.6 && study.exponent <= -0.4,
           "exponent outside [-0.6, -0.4]: " + std::to_string(study.exponent));
  p.expect(study.total_lemma_violations == 0,
           std::to_string(study.total_lemma_violations) + " descent violations");

  double worst_ratio = 0.0;
  for (int s = 0; s < 50; ++s) {
    lab::LabConfig config = base;
    config.horizon = 1000;
    config.seed = derive_seed(base.seed, "bound", s);
    const lab::Trace trace = lab::simulate_nonconvex(config);
    worst_ratio = std::max(worst_ratio, trace.averaged_value / trace.bound_value);
    if (trace.averaged_value > trace.bound_value) {
      p.items.push_back("plug-in bound violated at seed " + std::to_string(s));
      break;
    }
    if (trace.lemma_violations != 0) {
      p.items.push_back("descent inequality violated at seed " + std::to_string(s));
      break;
    }
  }
  std::ostringstream note;
  note << "exponent " << study.exponent << ", worst value/bound ratio " << worst_ratio;
  p.note = note.str();
  return p;
}

// 11. Two blobs separated by 30 sigma cluster exactly for 100 seeds, with
//     monotonically non-increasing assignment inertia.
Problems c11_cluster_separation() {
  Problems p;
  const double sigma = 0.1;  // centers 3.0 apart = 30 sigma
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(7000 + seed);
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<std::vector<double>> points;
    for (int i = 0; i < 10; ++i) {
      points.push_back({noise(rng), noise(rng), noise(rng), noise(rng)});
    }
    for (int i = 0; i < 10; ++i) {
      points.push_back({3.0 + noise(rng), noise(rng), noise(rng), noise(rng)});
    }
    const ClusterAssignment a = kmeans(points, 2, seed);
    bool clean = a.labels[0] != a.labels[10];
    for (int i = 1; i < 10; ++i) clean = clean && a.labels[i] == a.labels[0];
    for (int i = 11; i < 20; ++i) clean = clean && a.labels[i] == a.labels[10];
    if (!clean) {
      p.items.push_back("blob split failed at seed " + std::to_string(seed));
      break;
    }
    for (std::size_t i = 1; i < a.iteration_inertia.size(); ++i) {
      if (a.iteration_inertia[i] > a.iteration_inertia[i - 1] + 1e-9) {
        p.items.push_back("inertia increased at seed " + std::to_string(seed));
        break;
      }
    }
    if (!p.items.empty()) break;
  }
  p.note = "100/100 exact splits, inertia non-increasing";
  return p;
}

// 12. Successor pools never exceed the cap, and the diversity filter is
//     idempotent and collapses duplicates.
Problems c12_expansion_invariants() {
  Problems p;
  std::mt19937_64 rng(1212);
  const Prompt base{"p0", "the base prompt", std::nullopt, 0, "seed"};
  for (int trial = 0; trial < 500; ++trial) {
    Gateway gateway = pgd::testing::make_mock_gateway(3000 + trial);
    auto encoder = make_mock_encoder(32, 3000 + trial);
    ExpansionConfig config;
    config.successor_cap = 1 + static_cast<int>(rng() % 6);
    config.variants_per_gradient = 1 + static_cast<int>(rng() % 3);
    config.mc_samples = static_cast<int>(rng() % 3);
    const double margins[] = {0.02, 0.05, 0.2, 0.5};
    config.diversity_margin = margins[rng() % 4];

    std::vector<FusedGradient> fused;
    const int clusters = 1 + static_cast<int>(rng() % 3);
    for (int cluster = 0; cluster < clusters; ++cluster) {
      FusedGradient f;
      f.block = {AgentRole::clarity, "reason " + std::to_string(cluster),
                 "edit " + std::to_string(trial) + "." + std::to_string(cluster), ""};
      f.member_indices = {cluster};
      f.member_weights = {1.0};
      f.cluster_id = cluster;
      fused.push_back(f);
    }
    const ExpansionOutcome outcome =
        expand_prompts(base, fused, gateway, *encoder, config, 1 + trial % 5);
    const auto size = static_cast<int>(outcome.candidates.size());
    if (size < 1 || size > config.successor_cap) {
      p.items.push_back("pool size " + std::to_string(size) + " outside [1, cap] in trial " +
                        std::to_string(trial));
      break;
    }
    std::set<std::string> ids;
    for (const auto& c : outcome.candidates) ids.insert(c.prompt.id);
    if (static_cast<int>(ids.size()) != size) {
      p.items.push_back("duplicate candidate ids in trial " + std::to_string(trial));
      break;
    }
  }

  pgd::testing::OneHotEncoder one_hot(4096);
  const std::vector<std::string> words = {"red", "green", "blue", "cyan", "teal", "plum"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<CandidatePrompt> pool;
    const int n = 2 + static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) {
      pool.push_back(cand("t" + std::to_string(trial) + "." + std::to_string(i)));
      pool.back().prompt.text = words[rng() % words.size()];
    }
    const FilterResult once = semantic_filter(pool, one_hot, 0.05);
    const FilterResult twice = semantic_filter(once.kept, one_hot, 0.05);
    if (twice.filtered_out != 0 || twice.kept.size() != once.kept.size()) {
      p.items.push_back("filter is not idempotent in trial " + std::to_string(trial));
      break;
    }
    std::set<std::string> texts;
    for (const auto& c : once.kept) {
      if (!texts.insert(c.prompt.text).second) {
        p.items.push_back("duplicate text survived in trial " + std::to_string(trial));
        break;
      }
    }
    if (!p.items.empty()) break;
  }
  p.note = "500 expansion trials capped, 200 filter trials idempotent";
  return p;
}

struct CriterionSpec {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Problems()> body;
};

}  // namespace

int main() {
  const std::vector<CriterionSpec> criteria = {
      {1, "optimizer reruns are byte-identical", 30.0, c1_determinism},
      {2, "provider-call accounting matches the budget", 30.0, c2_budget_accounting},
      {3, "clusters partition gradients, conflicts recount", 30.0, c3_partition_and_conflicts},
      {4, "fusion weights equal the closed-form softmax", 5.0, c4_softmax},
      {5, "ucb picks the closed-form index argmax", 5.0, c5_ucb_closed_form},
      {6, "identification order ucb >= thompson >= greedy", 10.0, c6_identification_order},
      {7, "ucb beam beats uniform monte carlo (p < 0.05)", 10.0, c7_beam_vs_monte_carlo},
      {8, "probe budget conserved, exhaustive ranking exact", 10.0, c8_budget_conservation},
      {9, "convex regret decay ~ T^-1/2, no projection breaks", 60.0, c9_convex_rate},
      {10, "nonconvex decay ~ T^-1/2, per-seed bound holds", 60.0, c10_nonconvex_rate},
      {11, "separated blobs cluster exactly, 100 seeds", 30.0, c11_cluster_separation},
      {12, "successor cap respected, filter idempotent", 60.0, c12_expansion_invariants},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    Problems problems;
    const auto start = std::chrono::steady_clock::now();
    try {
      problems = criterion.body();
    } catch (const std::exception& e) {
      problems.items.push_back(std::string("exception: ") + e.what());
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > criterion.limit_seconds) {
      problems.items.push_back("exceeded " + std::to_string(criterion.limit_seconds) +
                               "s time limit");
    }
    const bool ok = problems.items.empty();
    if (!ok) ++failures;
    std::printf("[%s] %2d %-52s %6.2fs  %s\n", ok ? "PASS" : "FAIL", criterion.id,
                criterion.name, elapsed,
                ok ? problems.note.c_str() : problems.items.front().c_str());
  }
  if (failures == 0) {
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
  } else {
    std::printf("%d of %zu acceptance criteria FAILED\n", failures, criteria.size());
  }
  return failures;
}
