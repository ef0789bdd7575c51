#include "hse/gradcheck.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "hse/losses.hpp"
#include "hse/model.hpp"

namespace hse::gradcheck {

namespace {

using tk::Tape;
using tk::Tensor;
using tk::Var;

struct Rng {
    std::mt19937_64 engine;

    std::size_t pick(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(engine);
    }
    Tensor matrix(std::size_t rows, std::size_t cols, double sd = 1.0) {
        std::normal_distribution<double> n(0.0, sd);
        std::vector<double> v(rows * cols);
        for (double& x : v) x = n(engine);
        return Tensor::matrix(rows, cols, std::move(v));
    }
    data::FeatureSeq seq(std::size_t len, std::size_t dim) {
        std::normal_distribution<double> n(0.0, 1.0);
        data::FeatureSeq s(len, std::vector<double>(dim));
        for (auto& row : s)
            for (double& x : row) x = n(engine);
        return s;
    }
    std::vector<data::FeatureSeq> units(std::size_t count, std::size_t dim) {
        std::vector<data::FeatureSeq> u;
        for (std::size_t i = 0; i < count; ++i) u.push_back(seq(pick(1, 4), dim));
        return u;
    }
    model::HseModelParams model(const model::ModelDims& dims) {
        auto p = model::HseModelParams::zeros(dims);
        std::normal_distribution<double> n(0.0, 0.5);
        for (auto& [name, t] : p.tensors())
            for (double& x : t->values) x = n(engine);
        return p;
    }
};

void fold(SuiteResult& r, const tk::GradCheckReport& g) {
    ++r.trials;
    r.coordinates += g.coordinates;
    r.kinks += g.kinks;
    r.max_rel_error = std::max(r.max_rel_error, g.max_rel_error);
    r.max_abs_error = std::max(r.max_abs_error, g.max_abs_error);
}

std::vector<Tensor*> all_tensors(model::HseModelParams& p) {
    std::vector<Tensor*> out;
    for (auto& [name, t] : p.tensors()) out.push_back(t);
    return out;
}

// Random per-entry weights so a vector output becomes a scalar with a generic gradient.
Var project(Tape& tape, Var v, Rng& rng) {
    const Tensor& x = v.value();
    Tensor w = rng.matrix(1, x.size());
    w.shape = x.shape;
    return tk::sum(tk::mul(v, tape.constant(std::move(w))));
}

}  // namespace

std::vector<SuiteResult> run_suites(std::uint64_t seed, std::size_t trials, const tk::GradCheckOptions& options) {
    std::vector<SuiteResult> out;
    for (const char* name : {"loss_match_high", "loss_match_low", "loss_cluster_high", "loss_cluster_low",
                             "loss_match_low_weak", "loss_reconstruct", "encoder", "total_loss"})
        out.push_back(SuiteResult{name});

    Rng rng{std::mt19937_64(seed)};
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const auto mode = trial % 4 == 3 ? loss::SignMode::literal : loss::SignMode::corrected;
        const std::size_t k = rng.pick(2, 4), d = rng.pick(2, 4);
        std::vector<std::size_t> nc(k), ns(k);
        std::size_t tc = 0, ts = 0;
        for (std::size_t i = 0; i < k; ++i) {
            tc += nc[i] = rng.pick(1, 3);
            ts += ns[i] = rng.pick(1, 3);
        }
        Tensor v = rng.matrix(k, d), p = rng.matrix(k, d);
        Tensor c = rng.matrix(tc, d), s = rng.matrix(tc, d), sw = rng.matrix(ts, d);
        Tensor* high[] = {&v, &p};
        Tensor* low[] = {&c, &s};
        Tensor* weak[] = {&c, &sw};
        fold(out[0], tk::finite_diff_check(
                         [&](Tape& t) { return loss::loss_match_high(t.input(v), t.input(p), 0.2, mode); }, high, options));
        fold(out[1], tk::finite_diff_check(
                         [&](Tape& t) { return loss::loss_match_low(t.input(c), t.input(s), 0.2, mode); }, low, options));
        fold(out[2], tk::finite_diff_check(
                         [&](Tape& t) { return loss::loss_cluster_high(t.input(v), t.input(p), 0.2, mode); }, high, options));
        fold(out[3], tk::finite_diff_check(
                         [&](Tape& t) { return loss::loss_cluster_low(t.input(c), t.input(s), 0.2, mode); }, low, options));
        fold(out[4], tk::finite_diff_check(
                         [&](Tape& t) { return loss::loss_match_low_weak(t.input(c), t.input(sw), nc, ns, 0.2, mode); },
                         weak, options));

        const model::ModelDims dims{rng.pick(2, 4), rng.pick(2, 4), rng.pick(2, 4), rng.pick(2, 4)};
        auto params = rng.model(dims);
        const std::size_t units = rng.pick(1, 3);
        data::Pair pair;
        pair.video.id = pair.paragraph.id = "0";
        pair.video.clips = rng.units(units, dims.video_dim);
        pair.paragraph.sentences = rng.units(units, dims.text_dim);

        // Decoders: targets and the high-level seeds are fixed inputs.
        const auto vemb = model::embed_video(params, pair.video);
        const auto pemb = model::embed_paragraph(params, pair.paragraph);
        Tensor vh = Tensor::vector(vemb.high), ph = Tensor::vector(pemb.high);
        auto decoder_tensors = std::vector<Tensor*>{&vh, &ph};
        for (auto& [name, t] : params.tensors())
            if (name.rfind("dec_", 0) == 0 || name.rfind("out_", 0) == 0) decoder_tensors.push_back(t);
        fold(out[5], tk::finite_diff_check(
                         [&](Tape& t) {
                             const auto vars = model::bind(t, params);
                             model::HierEncoding ve{{}, t.input(vh)}, pe{{}, t.input(ph)};
                             for (const auto& x : vemb.low) ve.low.push_back(t.constant(Tensor::vector(x)));
                             for (const auto& x : pemb.low) pe.low.push_back(t.constant(Tensor::vector(x)));
                             const auto fc = pair.video.frame_counts();
                             const auto wc = pair.paragraph.word_counts();
                             const auto vd = model::decode_hierarchical(vars.dec_v_high, vars.out_v_high, vars.dec_v_low,
                                                                        vars.out_v_low, ve.high, fc);
                             const auto pd = model::decode_hierarchical(vars.dec_p_high, vars.out_p_high, vars.dec_p_low,
                                                                        vars.out_p_low, pe.high, wc);
                             return loss::loss_reconstruct(ve, vd, pair.video, pe, pd, pair.paragraph);
                         },
                         decoder_tensors, options));

        // Encoders: every low and high embedding feeds a random projection.
        Rng proj_seed{std::mt19937_64(seed ^ (trial + 1))};
        fold(out[6], tk::finite_diff_check(
                         [&](Tape& t) {
                             Rng proj = proj_seed;
                             const auto vars = model::bind(t, params);
                             const auto ve = model::encode_hierarchical(vars.enc_v_low, vars.enc_v_high, pair.video.clips);
                             const auto pe = model::encode_hierarchical(vars.enc_p_low, vars.enc_p_high,
                                                                        pair.paragraph.sentences);
                             Var acc = tk::add(project(t, ve.high, proj), project(t, pe.high, proj));
                             for (const auto* e : {&ve, &pe})
                                 for (Var u : e->low) acc = tk::add(acc, project(t, u, proj));
                             return acc;
                         },
                         all_tensors(params), options));

        // Whole objective on a batch, tau = 0 so nothing is detached.
        std::vector<data::Pair> batch_pairs;
        for (std::size_t i = 0; i < k; ++i) {
            data::Pair q;
            q.video.id = q.paragraph.id = std::to_string(i);
            const std::size_t n = rng.pick(1, 3);
            q.video.clips = rng.units(n, dims.video_dim);
            q.paragraph.sentences = rng.units(n, dims.text_dim);
            batch_pairs.push_back(std::move(q));
        }
        std::vector<const data::Pair*> batch;
        for (const auto& q : batch_pairs) batch.push_back(&q);
        loss::LossConfig cfg;
        cfg.tau = 0.0;
        cfg.sign_mode = mode;
        cfg.correspondence = trial % 2 ? data::Correspondence::weak : data::Correspondence::strong;
        fold(out[7], tk::finite_diff_check(
                         [&](Tape& t) { return loss::total_loss(t, model::bind(t, params), batch, cfg).total; },
                         all_tensors(params), options));
    }
    return out;
}

}  // namespace hse::gradcheck
