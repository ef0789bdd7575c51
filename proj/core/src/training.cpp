#include "hse/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "hse/errors.hpp"

namespace hse::train {

std::string_view to_string(Architecture a) { return a == Architecture::hierarchical ? "hierarchical" : "flat"; }

Architecture parse_architecture(std::string_view text) {
    if (text == "hierarchical" || text == "hse") return Architecture::hierarchical;
    if (text == "flat" || text == "fse") return Architecture::flat;
    throw std::invalid_argument("unknown architecture '" + std::string(text) +
                                "' (expected hierarchical or flat)");
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ContractError("learning_rate must be finite and >= 0");
    if (!(decay_factor > 0.0) || !std::isfinite(decay_factor))
        throw ContractError("decay_factor must be finite and > 0");
    if (decay_every_epochs < 1) throw ContractError("decay_every_epochs must be >= 1");
    if (epochs < 1) throw ContractError("epochs must be >= 1");
    if (batch_size < 1) throw ContractError("batch_size must be >= 1");
    if (hidden_high < 1) throw ContractError("hidden_high must be >= 1");
    if (architecture == Architecture::hierarchical && hidden_low < 1)
        throw ContractError("hidden_low must be >= 1");
    loss.validate();
}

double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
    const auto decays = static_cast<double>(epoch / config.decay_every_epochs);
    return config.learning_rate / std::pow(config.decay_factor, decays);
}

void optimizer_step(AdamState& state, std::span<tk::Tensor* const> params, double lr) {
    if (state.m.empty()) {
        for (const tk::Tensor* p : params) {
            state.m.emplace_back(p->size(), 0.0);
            state.v.emplace_back(p->size(), 0.0);
        }
    }
    if (state.m.size() != params.size())
        throw ContractError("optimizer_step: parameter list changed between steps");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const tk::Tensor& p = *params[i];
        if (!p.grad) throw ContractError("optimizer_step: parameter " + std::to_string(i) + " has no gradient");
        if (p.grad->size() != p.size() || state.m[i].size() != p.size())
            throw ContractError("optimizer_step: gradient size mismatch for parameter " + std::to_string(i));
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correct1 = 1.0 - std::pow(state.beta1, t);
    const double correct2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        tk::Tensor& p = *params[i];
        const std::vector<double>& g = *p.grad;
        std::vector<double>& m = state.m[i];
        std::vector<double>& v = state.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double m_hat = m[j] / correct1;
            const double v_hat = v[j] / correct2;
            p.values[j] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

namespace {

constexpr double kInitStd = 0.1;  // variance 0.01

void fill_gaussian(tk::Tensor& t, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, kInitStd);
    for (double& v : t.values) v = normal(rng);
}

void init_gru(model::GruParams& g, std::mt19937_64& rng) {
    g.for_each([&rng](const char* name, tk::Tensor& t) {
        if (name[0] != 'b') fill_gaussian(t, rng);
    });
}

void init_linear(model::Linear& l, std::mt19937_64& rng) { fill_gaussian(l.weight, rng); }

}  // namespace

model::HseModelParams init_params(const model::ModelDims& dims, std::uint64_t seed) {
    auto p = model::HseModelParams::zeros(dims);
    std::mt19937_64 rng(seed);
    for (auto* g : {&p.enc_v_low, &p.enc_v_high, &p.enc_p_low, &p.enc_p_high, &p.dec_v_high,
                    &p.dec_v_low, &p.dec_p_high, &p.dec_p_low})
        init_gru(*g, rng);
    for (auto* l : {&p.out_v_high, &p.out_v_low, &p.out_p_high, &p.out_p_low}) init_linear(*l, rng);
    return p;
}

model::FlatModelParams init_flat_params(const model::ModelDims& dims, std::uint64_t seed) {
    auto p = model::FlatModelParams::zeros(dims);
    std::mt19937_64 rng(seed);
    init_gru(p.enc_v, rng);
    init_gru(p.enc_p, rng);
    return p;
}

model::ModelDims dims_for(const data::Corpus& corpus, const TrainConfig& config) {
    model::ModelDims d;
    d.video_dim = corpus.video_dim();
    d.text_dim = corpus.text_dim();
    d.hidden_low = config.architecture == Architecture::flat ? 0 : config.hidden_low;
    d.hidden_high = config.hidden_high;
    return d;
}

namespace {

void accumulate(loss::LossBreakdown& acc, const loss::LossBreakdown& b) {
    acc.match_high += b.match_high;
    acc.match_low += b.match_low;
    acc.cluster_high += b.cluster_high;
    acc.cluster_low += b.cluster_low;
    acc.reconstruct += b.reconstruct;
    acc.total += b.total;
}

void divide(loss::LossBreakdown& acc, double n) {
    acc.match_high /= n;
    acc.match_low /= n;
    acc.cluster_high /= n;
    acc.cluster_low /= n;
    acc.reconstruct /= n;
    acc.total /= n;
}

// Shared epoch loop. `step_loss(tape, params, batch)` binds the params on the
// tape and returns the batch objective.
template <class Params, class LossFn>
std::vector<EpochLog> run_epochs(const data::Corpus& corpus, const TrainConfig& config, Params& params,
                                 LossFn&& step_loss, const ProgressFn& progress) {
    if (corpus.pairs.empty()) throw ContractError("train: empty corpus");

    auto named = params.tensors();
    std::vector<tk::Tensor*> tensors;
    for (auto& [name, t] : named) {
        t->requires_grad = true;
        tensors.push_back(t);
    }

    std::vector<std::size_t> order(corpus.pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    AdamState adam;
    std::vector<EpochLog> log;
    std::vector<const data::Pair*> batch;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        EpochLog entry;
        entry.epoch = epoch;
        entry.learning_rate = lr_at_epoch(config, epoch);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(&corpus.pairs[order[i]]);

            for (tk::Tensor* t : tensors) t->grad.reset();
            tk::Tape tape;
            loss::BatchLoss result;
            try {
                result = step_loss(tape, params, batch);
            } catch (const NumericError& e) {
                throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(entry.batches));
            }
            tape.backward(result.total);
            optimizer_step(adam, tensors, entry.learning_rate);
            accumulate(entry.mean, result.breakdown);
            ++entry.batches;
        }
        divide(entry.mean, static_cast<double>(entry.batches));
        log.push_back(entry);
        if (progress) progress(entry);
    }

    for (tk::Tensor* t : tensors) {
        t->requires_grad = false;
        t->grad.reset();
    }
    return log;
}

void check_corpus(const data::Corpus& corpus, const TrainConfig& config) {
    config.validate();
    corpus.validate();
    // Weak losses only need video/paragraph alignment, so they accept strong corpora too.
    if (corpus.correspondence == data::Correspondence::weak &&
        config.loss.correspondence == data::Correspondence::strong) {
        throw ContractError("corpus has weak correspondence but the loss is configured for strong");
    }
}

}  // namespace

TrainResult train(const data::Corpus& corpus, const TrainConfig& config, const ProgressFn& progress) {
    config.validate();
    if (config.architecture != Architecture::hierarchical)
        throw ContractError("train: use train_flat for the flat architecture");
    if (corpus.pairs.empty()) throw ContractError("train: empty corpus");
    return train(corpus, config, init_params(dims_for(corpus, config), config.seed), progress);
}

TrainResult train(const data::Corpus& corpus, const TrainConfig& config, model::HseModelParams initial,
                  const ProgressFn& progress) {
    check_corpus(corpus, config);
    if (initial.dims.video_dim != corpus.video_dim() || initial.dims.text_dim != corpus.text_dim())
        throw ContractError("train: model feature sizes do not match the corpus");
    TrainResult out{std::move(initial), {}};
    const model::EncoderOptions options{config.carry_low_state};
    out.log = run_epochs(
        corpus, config, out.params,
        [&](tk::Tape& tape, model::HseModelParams& p, std::span<const data::Pair* const> batch) {
            const auto vars = model::bind(tape, p);
            return loss::total_loss(tape, vars, batch, config.loss, options);
        },
        progress);
    return out;
}

FlatTrainResult train_flat(const data::Corpus& corpus, const TrainConfig& config, const ProgressFn& progress) {
    check_corpus(corpus, config);
    if (corpus.pairs.empty()) throw ContractError("train: empty corpus");
    TrainConfig flat = config;
    flat.architecture = Architecture::flat;
    FlatTrainResult out{init_flat_params(dims_for(corpus, flat), config.seed), {}};
    out.log = run_epochs(
        corpus, config, out.params,
        [&](tk::Tape& tape, model::FlatModelParams& p, std::span<const data::Pair* const> batch) {
            const auto vars = model::bind(tape, p);
            return loss::flat_total_loss(tape, vars, batch, config.loss);
        },
        progress);
    return out;
}

}  // namespace hse::train
