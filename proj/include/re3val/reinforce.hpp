#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "re3val/decoder.hpp"
#include "re3val/random.hpp"

namespace re3val {

enum class RolloutMode { Beam, Sample };

RolloutMode parse_rollout_mode(std::string_view name);

/// One complete decoded title list with its per-step log-probabilities and
/// its R-Precision reward against the owning query's gold titles.
struct Trajectory {
    std::vector<TokenId> query;
    std::vector<Step> steps;
    std::vector<double> step_log_probs;
    std::vector<std::string> titles;
    double reward = 0.0;

    double log_prob() const;
};

/// Ancestral sample from the masked per-step distributions.
Hypothesis sample_hypothesis(const PolicyParams& params, std::span<const TokenId> query, const TitleTrie& trie,
                             const DecodeConfig& config, Rng& rng);

/// Beam mode returns the finished beams of constrained_beam_search; sample
/// mode draws `beam_size` independent samples. An empty gold set yields no
/// trajectories (the query is skipped).
std::vector<Trajectory> collect_trajectories(const PolicyParams& params, std::span<const TokenId> query,
                                             const std::vector<std::string>& gold_titles, const TitleTrie& trie,
                                             const DecodeConfig& config, RolloutMode mode, std::uint64_t seed);

/// loss = -(1/B) sum_tau R(tau) sum_t log pi(a_t | s_t)
double reinforce_loss(const PolicyParams& params, std::span<const Trajectory> batch);
std::vector<double> reinforce_gradient(const PolicyParams& params, std::span<const Trajectory> batch,
                                       double* loss = nullptr);

struct ReinforceResult {
    PolicyParams params;
    double mean_reward = 0.0;
    double loss = 0.0;
};

/// One gradient-ascent step on the expected reward.
ReinforceResult reinforce_step(const PolicyParams& params, std::span<const Trajectory> batch, double learning_rate);

struct TrainingQuery {
    std::string id;
    std::vector<TokenId> query;
    std::vector<std::string> gold_titles;
};

struct ReinforceSchedule {
    std::size_t epochs = 20;
    double learning_rate = 0.05;
    RolloutMode mode = RolloutMode::Beam;
    std::uint64_t seed = 13;
};

struct EpochTrace {
    std::size_t epoch = 0;
    double mean_reward = 0.0;
    double loss = 0.0;
};

struct ReinforceOutcome {
    PolicyParams params;
    std::vector<EpochTrace> trace;
};

/// Per epoch: visit queries in a seeded shuffled order, collect
/// trajectories for each and apply one reinforce_step per query.
ReinforceOutcome train_reinforce(const PolicyParams& params, const std::vector<TrainingQuery>& queries,
                                 const TitleTrie& trie, const DecodeConfig& config, const ReinforceSchedule& schedule);

/// "epoch,mean_reward,loss" CSV.
std::string trace_csv(const std::vector<EpochTrace>& trace);

} // namespace re3val
