#include "re3val/reinforce.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "re3val/error.hpp"
#include "re3val/metrics.hpp"
#include "re3val/random.hpp"

namespace re3val {

RolloutMode parse_rollout_mode(std::string_view name) {
    if (name == "beam") return RolloutMode::Beam;
    if (name == "sample") return RolloutMode::Sample;
    throw ValidationError("unknown rollout mode: " + std::string(name));
}

double Trajectory::log_prob() const { return std::accumulate(step_log_probs.begin(), step_log_probs.end(), 0.0); }

Hypothesis sample_hypothesis(const PolicyParams& params, std::span<const TokenId> query, const TitleTrie& trie,
                             const DecodeConfig& config, Rng& rng) {
    Hypothesis hyp;
    for (std::size_t t = 0; t < config.max_total_tokens; ++t) {
        auto allowed = candidate_tokens(trie, hyp.node, hyp.titles.size(), config.max_titles_per_beam);
        const auto logp = masked_log_softmax(score_next(params, query, hyp.actions()), allowed);
        double u = rng.uniform();
        TokenId pick = allowed.back();
        for (TokenId tok : allowed) {
            u -= std::exp(logp[tok]);
            if (u < 0.0) {
                pick = tok;
                break;
            }
        }
        apply_action(hyp, trie, pick, std::move(allowed), logp[pick]);
        if (hyp.state == HypothesisState::Finished) return hyp;
    }
    throw TruncationError("sampled trajectory did not finish within " + std::to_string(config.max_total_tokens) +
                          " tokens");
}

std::vector<Trajectory> collect_trajectories(const PolicyParams& params, std::span<const TokenId> query,
                                             const std::vector<std::string>& gold_titles, const TitleTrie& trie,
                                             const DecodeConfig& config, RolloutMode mode, std::uint64_t seed) {
    if (gold_titles.empty()) return {};
    std::vector<Hypothesis> hyps;
    if (mode == RolloutMode::Beam) {
        hyps = constrained_beam_search(params, query, trie, config);
    } else {
        config.validate();
        Rng rng(seed);
        for (std::size_t i = 0; i < config.beam_size; ++i) hyps.push_back(sample_hypothesis(params, query, trie, config, rng));
    }
    std::vector<Trajectory> out;
    out.reserve(hyps.size());
    for (auto& h : hyps) {
        Trajectory tr;
        tr.query.assign(query.begin(), query.end());
        tr.reward = r_precision(h.titles, gold_titles);
        tr.steps = std::move(h.steps);
        tr.step_log_probs = std::move(h.step_log_probs);
        tr.titles = std::move(h.titles);
        out.push_back(std::move(tr));
    }
    return out;
}

std::vector<double> reinforce_gradient(const PolicyParams& params, std::span<const Trajectory> batch, double* loss) {
    if (batch.empty()) throw ValidationError("REINFORCE batch is empty");
    std::vector<double> grad(params.size(), 0.0);
    const double inv = 1.0 / static_cast<double>(batch.size());
    double objective = 0.0;
    for (const auto& tr : batch) {
        // Descent direction on the loss is -R(tau) * grad log pi.
        const double lp = accumulate_log_prob_gradient(params, tr.query, tr.steps, -tr.reward * inv, grad);
        if (tr.reward != 0.0) objective += tr.reward * lp;
    }
    if (loss) *loss = -objective * inv;
    return grad;
}

double reinforce_loss(const PolicyParams& params, std::span<const Trajectory> batch) {
    if (batch.empty()) throw ValidationError("REINFORCE batch is empty");
    double objective = 0.0;
    for (const auto& tr : batch)
        if (tr.reward != 0.0) objective += tr.reward * sequence_log_prob(params, tr.query, tr.steps);
    return -objective / static_cast<double>(batch.size());
}

ReinforceResult reinforce_step(const PolicyParams& params, std::span<const Trajectory> batch, double learning_rate) {
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    double loss = 0.0;
    auto grad = reinforce_gradient(params, batch, &loss);
    if (!std::isfinite(loss)) throw NonFiniteLossError("REINFORCE loss is not finite");
    ReinforceResult out{params, 0.0, loss};
    for (const auto& tr : batch) out.mean_reward += tr.reward;
    out.mean_reward /= static_cast<double>(batch.size());
    auto v = out.params.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= learning_rate * grad[i];
    return out;
}

ReinforceOutcome train_reinforce(const PolicyParams& params, const std::vector<TrainingQuery>& queries,
                                 const TitleTrie& trie, const DecodeConfig& config, const ReinforceSchedule& schedule) {
    ReinforceOutcome out{params, {}};
    std::vector<std::size_t> order(queries.size());
    for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(mix_seed(schedule.seed, epoch));
        rng.shuffle(std::span<std::size_t>(order));
        double reward_sum = 0.0, loss_sum = 0.0;
        std::size_t trajectories = 0, steps = 0;
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            const auto& q = queries[order[pos]];
            try {
                auto batch = collect_trajectories(out.params, q.query, q.gold_titles, trie, config, schedule.mode,
                                                  mix_seed(schedule.seed, (epoch + 1) * 1000003 + order[pos]));
                if (batch.empty()) continue;
                auto step = reinforce_step(out.params, batch, schedule.learning_rate);
                out.params = std::move(step.params);
                reward_sum += step.mean_reward * static_cast<double>(batch.size());
                trajectories += batch.size();
                loss_sum += step.loss;
                ++steps;
            } catch (const ValidationError& e) {
                throw ValidationError("query " + q.id + ": " + e.what());
            } catch (const RuntimeError& e) {
                throw RuntimeError("query " + q.id + ": " + e.what());
            }
        }
        out.trace.push_back({epoch, trajectories ? reward_sum / static_cast<double>(trajectories) : 0.0,
                             steps ? loss_sum / static_cast<double>(steps) : 0.0});
    }
    return out;
}

std::string trace_csv(const std::vector<EpochTrace>& trace) {
    std::string out = "epoch,mean_reward,loss\n";
    char buf[96];
    for (const auto& t : trace) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", t.epoch, t.mean_reward, t.loss);
        out += buf;
    }
    return out;
}

} // namespace re3val
