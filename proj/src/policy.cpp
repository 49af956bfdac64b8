#include "re3val/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "re3val/error.hpp"
#include "re3val/jsonl.hpp"
#include "re3val/random.hpp"

namespace re3val {

namespace {
constexpr std::string_view kMagic = "R3POLICY";
constexpr std::uint32_t kVersion = 1;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_token(const PolicyShape& shape, TokenId id) {
    if (id >= shape.vocab) throw ValidationError("token id " + std::to_string(id) + " outside policy vocabulary");
}
} // namespace

std::size_t PolicyShape::param_count() const {
    return 2 * vocab * embed + hidden * input_dim() + hidden + vocab * hidden + vocab;
}

PolicyParams PolicyParams::zeros(const PolicyShape& shape) {
    if (shape.vocab == 0 || shape.embed == 0 || shape.hidden == 0)
        throw ValidationError("policy dimensions must be positive");
    PolicyParams p;
    p.shape_ = shape;
    p.values_.assign(shape.param_count(), 0.0);
    return p;
}

PolicyParams PolicyParams::random(const PolicyShape& shape, std::uint64_t seed, double scale) {
    PolicyParams p = zeros(shape);
    Rng rng(seed);
    auto fill = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) p.values_[i] = rng.uniform(-scale, scale);
    };
    fill(0, p.b1_offset());
    fill(p.w2_offset(), p.b2_offset());
    return p;
}

bool PolicyParams::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void PolicyParams::save(const std::filesystem::path& path, std::uint64_t seed) const {
    BinaryWriter w;
    put_header(w, kMagic, kVersion);
    w.put<std::uint64_t>(seed);
    for (std::size_t d : {shape_.vocab, shape_.embed, shape_.hidden, shape_.window})
        w.put<std::uint64_t>(d);
    w.put_vector(values_);
    write_file_atomic(path, w.str());
}

PolicyParams PolicyParams::load(const std::filesystem::path& path) {
    BinaryReader r(read_file(path), path.string());
    r.expect_header(kMagic, kVersion);
    r.get<std::uint64_t>(); // seed
    PolicyShape shape;
    shape.vocab = r.get<std::uint64_t>();
    shape.embed = r.get<std::uint64_t>();
    shape.hidden = r.get<std::uint64_t>();
    shape.window = r.get<std::uint64_t>();
    PolicyParams p = zeros(shape);
    auto values = r.get_vector<double>();
    if (values.size() != shape.param_count())
        throw ValidationError(path.string() + ": parameter count does not match shape header");
    p.values_ = std::move(values);
    return p;
}

Forward forward(const PolicyParams& params, std::span<const TokenId> query, std::span<const TokenId> prefix) {
    const auto& s = params.shape();
    const auto v = params.values();
    Forward f;
    f.input.assign(s.input_dim(), 0.0);

    if (!query.empty()) {
        const double inv = 1.0 / static_cast<double>(query.size());
        for (TokenId id : query) {
            check_token(s, id);
            const double* e = v.data() + params.query_embedding_offset(id);
            for (std::size_t k = 0; k < s.embed; ++k) f.input[k] += e[k] * inv;
        }
    }
    // Slot 1 holds the most recent prefix token, slot `window` the oldest.
    for (std::size_t slot = 0; slot < s.window && slot < prefix.size(); ++slot) {
        TokenId id = prefix[prefix.size() - 1 - slot];
        check_token(s, id);
        const double* e = v.data() + params.prefix_embedding_offset(id);
        std::copy(e, e + s.embed, f.input.begin() + static_cast<std::ptrdiff_t>((slot + 1) * s.embed));
    }

    const std::size_t d = s.input_dim();
    f.hidden.resize(s.hidden);
    const double* w1 = v.data() + params.w1_offset();
    const double* b1 = v.data() + params.b1_offset();
    for (std::size_t j = 0; j < s.hidden; ++j) {
        double z = b1[j];
        const double* row = w1 + j * d;
        for (std::size_t k = 0; k < d; ++k) z += row[k] * f.input[k];
        f.hidden[j] = std::tanh(z);
    }

    f.logits.resize(s.vocab);
    const double* w2 = v.data() + params.w2_offset();
    const double* b2 = v.data() + params.b2_offset();
    for (std::size_t i = 0; i < s.vocab; ++i) {
        double z = b2[i];
        const double* row = w2 + i * s.hidden;
        for (std::size_t j = 0; j < s.hidden; ++j) z += row[j] * f.hidden[j];
        f.logits[i] = z;
    }
    return f;
}

std::vector<double> score_next(const PolicyParams& params, std::span<const TokenId> query,
                               std::span<const TokenId> prefix) {
    return forward(params, query, prefix).logits;
}

void backward(const PolicyParams& params, std::span<const TokenId> query, std::span<const TokenId> prefix,
              const Forward& fwd, std::span<const double> dlogits, std::span<double> grad) {
    const auto& s = params.shape();
    const auto v = params.values();
    const std::size_t d = s.input_dim();

    std::vector<double> dhidden(s.hidden, 0.0);
    const double* w2 = v.data() + params.w2_offset();
    double* gw2 = grad.data() + params.w2_offset();
    double* gb2 = grad.data() + params.b2_offset();
    for (std::size_t i = 0; i < s.vocab; ++i) {
        const double g = dlogits[i];
        if (g == 0.0) continue;
        gb2[i] += g;
        const double* row = w2 + i * s.hidden;
        double* grow = gw2 + i * s.hidden;
        for (std::size_t j = 0; j < s.hidden; ++j) {
            grow[j] += g * fwd.hidden[j];
            dhidden[j] += g * row[j];
        }
    }

    std::vector<double> dinput(d, 0.0);
    const double* w1 = v.data() + params.w1_offset();
    double* gw1 = grad.data() + params.w1_offset();
    double* gb1 = grad.data() + params.b1_offset();
    for (std::size_t j = 0; j < s.hidden; ++j) {
        const double dz = dhidden[j] * (1.0 - fwd.hidden[j] * fwd.hidden[j]);
        if (dz == 0.0) continue;
        gb1[j] += dz;
        const double* row = w1 + j * d;
        double* grow = gw1 + j * d;
        for (std::size_t k = 0; k < d; ++k) {
            grow[k] += dz * fwd.input[k];
            dinput[k] += dz * row[k];
        }
    }

    if (!query.empty()) {
        const double inv = 1.0 / static_cast<double>(query.size());
        for (TokenId id : query) {
            double* g = grad.data() + params.query_embedding_offset(id);
            for (std::size_t k = 0; k < s.embed; ++k) g[k] += dinput[k] * inv;
        }
    }
    for (std::size_t slot = 0; slot < s.window && slot < prefix.size(); ++slot) {
        TokenId id = prefix[prefix.size() - 1 - slot];
        double* g = grad.data() + params.prefix_embedding_offset(id);
        const double* src = dinput.data() + (slot + 1) * s.embed;
        for (std::size_t k = 0; k < s.embed; ++k) g[k] += src[k];
    }
}

std::vector<double> masked_log_softmax(std::span<const double> logits, std::span<const TokenId> allowed) {
    std::vector<double> out(logits.size(), kNegInf);
    if (allowed.empty()) return out;
    double mx = kNegInf;
    for (TokenId a : allowed) mx = std::max(mx, logits[a]);
    double sum = 0.0;
    for (TokenId a : allowed) sum += std::exp(logits[a] - mx);
    const double lse = mx + std::log(sum);
    for (TokenId a : allowed) out[a] = logits[a] - lse;
    return out;
}

namespace {

void require_allowed(const Step& step, std::size_t t) {
    if (std::find(step.allowed.begin(), step.allowed.end(), step.action) == step.allowed.end())
        throw ConstraintViolation("action " + std::to_string(step.action) + " at step " + std::to_string(t) +
                                  " is outside the allowed set");
}

std::vector<TokenId> prefix_of(std::span<const Step> steps, std::size_t t) {
    std::vector<TokenId> prefix;
    prefix.reserve(t);
    for (std::size_t i = 0; i < t; ++i) prefix.push_back(steps[i].action);
    return prefix;
}

} // namespace

std::vector<double> step_log_probs(const PolicyParams& params, std::span<const TokenId> query,
                                   std::span<const Step> steps) {
    std::vector<double> out;
    out.reserve(steps.size());
    std::vector<TokenId> prefix;
    for (std::size_t t = 0; t < steps.size(); ++t) {
        require_allowed(steps[t], t);
        auto logits = score_next(params, query, prefix);
        out.push_back(masked_log_softmax(logits, steps[t].allowed)[steps[t].action]);
        prefix.push_back(steps[t].action);
    }
    return out;
}

double sequence_log_prob(const PolicyParams& params, std::span<const TokenId> query, std::span<const Step> steps) {
    double total = 0.0;
    for (double lp : step_log_probs(params, query, steps)) total += lp;
    return total;
}

double accumulate_log_prob_gradient(const PolicyParams& params, std::span<const TokenId> query,
                                    std::span<const Step> steps, double weight, std::span<double> grad) {
    double total = 0.0;
    std::vector<double> dlogits(params.shape().vocab, 0.0);
    for (std::size_t t = 0; t < steps.size(); ++t) {
        require_allowed(steps[t], t);
        const auto prefix = prefix_of(steps, t);
        const Forward fwd = forward(params, query, prefix);
        const auto logp = masked_log_softmax(fwd.logits, steps[t].allowed);
        total += logp[steps[t].action];
        if (weight == 0.0 || steps[t].allowed.size() < 2) continue;
        // d log p(a) / d logit_i = [i == a] - p_i over the allowed set.
        std::fill(dlogits.begin(), dlogits.end(), 0.0);
        for (TokenId i : steps[t].allowed) dlogits[i] = -weight * std::exp(logp[i]);
        dlogits[steps[t].action] += weight;
        backward(params, query, prefix, fwd, dlogits, grad);
    }
    return total;
}

std::vector<double> supervised_gradient(const PolicyParams& params, std::span<const SupervisedExample> batch,
                                        double* loss) {
    std::vector<double> grad(params.size(), 0.0);
    if (batch.empty()) throw ValidationError("supervised batch is empty");
    const double w = -1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const auto& ex : batch) total += accumulate_log_prob_gradient(params, ex.query, ex.steps, w, grad);
    if (loss) *loss = -total / static_cast<double>(batch.size());
    return grad;
}

double supervised_loss(const PolicyParams& params, std::span<const SupervisedExample> batch) {
    if (batch.empty()) throw ValidationError("supervised batch is empty");
    double total = 0.0;
    for (const auto& ex : batch) total += sequence_log_prob(params, ex.query, ex.steps);
    return -total / static_cast<double>(batch.size());
}

UpdateResult supervised_step(const PolicyParams& params, std::span<const SupervisedExample> batch,
                             double learning_rate) {
    if (!(learning_rate >= 0.0)) throw ValidationError("learning rate must be non-negative");
    double loss = 0.0;
    auto grad = supervised_gradient(params, batch, &loss);
    if (!std::isfinite(loss)) throw NonFiniteLossError("supervised loss is not finite");
    UpdateResult out{params, loss};
    auto v = out.params.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= learning_rate * grad[i];
    return out;
}

SupervisedOutcome train_supervised(const PolicyParams& params, const std::vector<SupervisedExample>& examples,
                                   const SupervisedSchedule& schedule) {
    SupervisedOutcome out{params, {}};
    if (examples.empty() || schedule.epochs == 0) return out;
    const std::size_t batch = std::max<std::size_t>(1, schedule.batch_size);
    std::vector<std::size_t> order(examples.size());
    std::vector<SupervisedExample> minibatch;
    for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(mix_seed(schedule.seed, epoch));
        rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            minibatch.clear();
            for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i)
                minibatch.push_back(examples[order[i]]);
            auto step = supervised_step(out.params, minibatch, schedule.learning_rate);
            out.params = std::move(step.params);
            loss_sum += step.loss;
            ++batches;
        }
        out.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    }
    return out;
}

} // namespace re3val
