#pragma once

// Random parameter and sample builders shared by the unit and acceptance tests.

#include <random>
#include <span>

#include "hse/data.hpp"
#include "hse/losses.hpp"
#include "hse/model.hpp"
#include "oracles.hpp"

namespace fixtures {

inline void fill(hse::tk::Tensor& t, std::mt19937_64& rng, double sd) {
    std::normal_distribution<double> n(0.0, sd);
    for (double& v : t.values) v = n(rng);
}

inline hse::model::GruParams random_gru(std::mt19937_64& rng, std::size_t in, std::size_t hid,
                                        double sd = 0.5) {
    auto g = hse::model::GruParams::zeros(in, hid);
    g.for_each([&](const char*, hse::tk::Tensor& t) { fill(t, rng, sd); });
    return g;
}

inline hse::model::HseModelParams random_model(std::mt19937_64& rng, const hse::model::ModelDims& dims,
                                               double sd = 0.5) {
    auto p = hse::model::HseModelParams::zeros(dims);
    for (auto& [name, t] : p.tensors()) fill(*t, rng, sd);
    return p;
}

inline hse::model::FlatModelParams random_flat(std::mt19937_64& rng, const hse::model::ModelDims& dims,
                                               double sd = 0.5) {
    auto p = hse::model::FlatModelParams::zeros(dims);
    for (auto& [name, t] : p.tensors()) fill(*t, rng, sd);
    return p;
}

inline oracle::Gru to_oracle(const hse::model::GruParams& g) {
    return {g.input_dim,    g.hidden_dim,   g.w_z.values, g.w_r.values, g.w_h.values,
            g.u_z.values,   g.u_r.values,   g.u_h.values, g.b_z.values, g.b_r.values,
            g.b_h.values};
}

inline hse::data::FeatureSeq random_seq(std::mt19937_64& rng, std::size_t len, std::size_t dim) {
    return oracle::random_mat(rng, len, dim);
}

/// A pair with `units` clips/sentences whose lengths are drawn from [1, max_len].
inline hse::data::Pair random_pair(std::mt19937_64& rng, std::size_t clips, std::size_t sentences,
                                   std::size_t max_len, std::size_t dv, std::size_t dt,
                                   const std::string& id) {
    std::uniform_int_distribution<std::size_t> len(1, max_len);
    hse::data::Pair p;
    p.video.id = p.paragraph.id = id;
    for (std::size_t i = 0; i < clips; ++i) p.video.clips.push_back(random_seq(rng, len(rng), dv));
    for (std::size_t i = 0; i < sentences; ++i) p.paragraph.sentences.push_back(random_seq(rng, len(rng), dt));
    return p;
}

/// Unit embeddings of every pair at the current parameters.
struct PinnedTargets {
    std::vector<std::vector<std::vector<double>>> clips, sentences;
};

inline PinnedTargets pin_targets(const hse::model::HseModelParams& p,
                                 std::span<const hse::data::Pair* const> batch) {
    PinnedTargets t;
    for (const auto* pair : batch) {
        t.clips.push_back(hse::model::embed_video(p, pair->video).low);
        t.sentences.push_back(hse::model::embed_paragraph(p, pair->paragraph).low);
    }
    return t;
}

/// Summed reconstruction loss of the batch with unit targets held at `targets`
/// instead of detached from the live encoders.
inline hse::tk::Var pinned_reconstruct(hse::tk::Tape& tape, const hse::model::HseVars& v,
                                       std::span<const hse::data::Pair* const> batch,
                                       const PinnedTargets& targets) {
    hse::tk::Var rec;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const auto& pair = *batch[k];
        auto ve = hse::model::encode_hierarchical(v.enc_v_low, v.enc_v_high, pair.video.clips);
        auto pe = hse::model::encode_hierarchical(v.enc_p_low, v.enc_p_high, pair.paragraph.sentences);
        for (std::size_t i = 0; i < ve.low.size(); ++i)
            ve.low[i] = tape.constant(hse::tk::Tensor::vector(targets.clips[k][i]));
        for (std::size_t i = 0; i < pe.low.size(); ++i)
            pe.low[i] = tape.constant(hse::tk::Tensor::vector(targets.sentences[k][i]));
        const auto fc = pair.video.frame_counts();
        const auto wc = pair.paragraph.word_counts();
        const auto vd = hse::model::decode_hierarchical(v.dec_v_high, v.out_v_high, v.dec_v_low, v.out_v_low,
                                                        ve.high, fc);
        const auto pd = hse::model::decode_hierarchical(v.dec_p_high, v.out_p_high, v.dec_p_low, v.out_p_low,
                                                        pe.high, wc);
        auto r = hse::loss::loss_reconstruct(ve, vd, pair.video, pe, pd, pair.paragraph);
        rec = rec.valid() ? hse::tk::add(rec, r) : r;
    }
    return rec;
}

/// total_loss with pinned reconstruction targets. Its true gradient is what the
/// tape computes for total_loss, so finite differences of it are a fair reference.
inline hse::tk::Var pinned_total(hse::tk::Tape& tape, const hse::model::HseVars& v,
                                 std::span<const hse::data::Pair* const> batch,
                                 const hse::loss::LossConfig& config, const PinnedTargets& targets) {
    auto no_rec = config;
    no_rec.tau = 0.0;
    hse::tk::Var total = hse::loss::total_loss(tape, v, batch, no_rec).total;
    if (config.tau == 0.0) return total;
    const auto rec = pinned_reconstruct(tape, v, batch, targets);
    return hse::tk::add(total, hse::tk::scale(rec, config.tau / static_cast<double>(batch.size())));
}

/// Analytic gradients of `f` for every tensor of `p`, flattened in tensors() order.
template <class F>
std::vector<double> analytic_grads(hse::model::HseModelParams& p, F&& f) {
    auto named = p.tensors();
    for (auto& [n, t] : named) {
        t->requires_grad = true;
        t->grad.reset();
    }
    {
        hse::tk::Tape tape;
        tape.backward(f(tape, hse::model::bind(tape, p)));
    }
    std::vector<double> out;
    for (auto& [n, t] : named) {
        if (t->grad) out.insert(out.end(), t->grad->begin(), t->grad->end());
        else out.insert(out.end(), t->size(), 0.0);
        t->requires_grad = false;
        t->grad.reset();
    }
    return out;
}

}  // namespace fixtures
