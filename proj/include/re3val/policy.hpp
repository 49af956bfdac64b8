#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "re3val/corpus.hpp"

namespace re3val {

/// Dimensions of the built-in scoring policy.
struct PolicyShape {
    std::size_t vocab = 0;
    std::size_t embed = 16;
    std::size_t hidden = 32;
    /// Number of most recent prefix tokens the policy sees.
    std::size_t window = 4;

    std::size_t input_dim() const { return embed * (1 + window); }
    std::size_t param_count() const;
    bool operator==(const PolicyShape&) const = default;
};

/// Flat parameter vector for a bag-of-embeddings query encoder, a
/// positional prefix window, one tanh hidden layer and an output layer over
/// the vocabulary. Layout, in order: query embeddings [vocab x embed],
/// prefix embeddings [vocab x embed], W1 [hidden x input_dim], b1 [hidden],
/// W2 [vocab x hidden], b2 [vocab].
class PolicyParams {
  public:
    PolicyParams() = default;
    static PolicyParams zeros(const PolicyShape& shape);
    /// Non-bias entries uniform in [-scale, scale]; biases zero.
    static PolicyParams random(const PolicyShape& shape, std::uint64_t seed, double scale = 0.1);

    const PolicyShape& shape() const { return shape_; }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }

    std::size_t query_embedding_offset(TokenId id) const { return id * shape_.embed; }
    std::size_t prefix_embedding_offset(TokenId id) const { return shape_.vocab * shape_.embed + id * shape_.embed; }
    std::size_t w1_offset() const { return 2 * shape_.vocab * shape_.embed; }
    std::size_t b1_offset() const { return w1_offset() + shape_.hidden * shape_.input_dim(); }
    std::size_t w2_offset() const { return b1_offset() + shape_.hidden; }
    std::size_t b2_offset() const { return w2_offset() + shape_.vocab * shape_.hidden; }

    bool all_finite() const;

    void save(const std::filesystem::path& path, std::uint64_t seed = 0) const;
    static PolicyParams load(const std::filesystem::path& path);

    bool operator==(const PolicyParams&) const = default;

  private:
    PolicyShape shape_;
    std::vector<double> values_;
};

/// Activations of one forward pass, kept for backpropagation.
struct Forward {
    std::vector<double> input;
    std::vector<double> hidden;
    std::vector<double> logits;
};

Forward forward(const PolicyParams& params, std::span<const TokenId> query, std::span<const TokenId> prefix);

/// Next-token logits for (query, decoded prefix). Pure and deterministic.
std::vector<double> score_next(const PolicyParams& params, std::span<const TokenId> query,
                               std::span<const TokenId> prefix);

/// Accumulates d(logits)->d(params) into `grad` for a cached forward pass.
void backward(const PolicyParams& params, std::span<const TokenId> query, std::span<const TokenId> prefix,
              const Forward& fwd, std::span<const double> dlogits, std::span<double> grad);

/// Log-softmax restricted to `allowed`; every other entry is -infinity.
std::vector<double> masked_log_softmax(std::span<const double> logits, std::span<const TokenId> allowed);

/// One decoding step: the token taken and the candidate set it was taken from.
struct Step {
    TokenId action = 0;
    std::vector<TokenId> allowed;

    bool operator==(const Step&) const = default;
};

/// Sum of masked log-probabilities of each step's action; the prefix for
/// step t is the actions of steps 0..t-1.
double sequence_log_prob(const PolicyParams& params, std::span<const TokenId> query, std::span<const Step> steps);

/// Per-step masked log-probabilities.
std::vector<double> step_log_probs(const PolicyParams& params, std::span<const TokenId> query,
                                   std::span<const Step> steps);

/// Adds `weight * d(sequence_log_prob)/d(params)` into `grad` and returns
/// the sequence log-probability.
double accumulate_log_prob_gradient(const PolicyParams& params, std::span<const TokenId> query,
                                    std::span<const Step> steps, double weight, std::span<double> grad);

struct SupervisedExample {
    std::vector<TokenId> query;
    std::vector<Step> steps;
};

/// Mean negative sequence log-probability over the batch.
double supervised_loss(const PolicyParams& params, std::span<const SupervisedExample> batch);
std::vector<double> supervised_gradient(const PolicyParams& params, std::span<const SupervisedExample> batch,
                                        double* loss = nullptr);

struct UpdateResult {
    PolicyParams params;
    double loss = 0.0;
};

/// One full-batch gradient-descent step on the supervised loss.
UpdateResult supervised_step(const PolicyParams& params, std::span<const SupervisedExample> batch,
                             double learning_rate);

struct SupervisedSchedule {
    std::size_t epochs = 10;
    double learning_rate = 0.5;
    std::size_t batch_size = 16;
    std::uint64_t seed = 13;
};

struct SupervisedOutcome {
    PolicyParams params;
    /// Mean minibatch loss per epoch.
    std::vector<double> epoch_loss;
};

/// Minibatch gradient descent over seeded shuffles of `examples`.
SupervisedOutcome train_supervised(const PolicyParams& params, const std::vector<SupervisedExample>& examples,
                                   const SupervisedSchedule& schedule);

} // namespace re3val
