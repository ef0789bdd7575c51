// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "hse/checkpoint.hpp"
#include "hse/evaluation.hpp"
#include "hse/losses.hpp"
#include "hse/training.hpp"

using namespace hse;
using loss::SignMode;
using tk::Tape;
using tk::Tensor;
using tk::Var;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor to_tensor(const oracle::Mat& m) {
    std::vector<double> flat;
    for (const auto& r : m) flat.insert(flat.end(), r.begin(), r.end());
    return Tensor::matrix(m.size(), m[0].size(), std::move(flat));
}

std::vector<const data::Pair*> pointers(const std::vector<data::Pair>& pairs) {
    std::vector<const data::Pair*> out;
    for (const auto& p : pairs) out.push_back(&p);
    return out;
}

// ---------------------------------------------------------------------------
// 1. gradients

Outcome gradient_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    constexpr int trials = 100;
    double worst = 0.0, tape_vs_pinned = 0.0;
    std::size_t coordinates = 0, kinks = 0;
    std::string worst_what = "-";
    auto track = [&](const tk::GradCheckReport& r, const std::string& what) {
        coordinates += r.coordinates;
        kinks += r.kinks;
        if (r.max_rel_error > worst) {
            worst = r.max_rel_error;
            worst_what = what;
        }
    };

    for (int trial = 0; trial < trials; ++trial) {
        std::mt19937_64 rng(1000 + trial);
        auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
        const SignMode mode = trial % 4 == 3 ? SignMode::literal : SignMode::corrected;
        const std::size_t k = pick(2, 4), d = pick(2, 8);

        // Embedding-level losses.
        std::vector<std::size_t> units(k), other(k);
        std::size_t n = 0, m = 0;
        for (std::size_t i = 0; i < k; ++i) {
            n += units[i] = pick(1, 3);
            m += other[i] = pick(1, 3);
        }
        Tensor V = to_tensor(oracle::random_mat(rng, k, d)), P = to_tensor(oracle::random_mat(rng, k, d));
        Tensor C = to_tensor(oracle::random_mat(rng, n, d)), S = to_tensor(oracle::random_mat(rng, n, d));
        Tensor Sw = to_tensor(oracle::random_mat(rng, m, d));
        Tensor* hp[] = {&V, &P};
        Tensor* lp[] = {&C, &S};
        Tensor* wp[] = {&C, &Sw};
        track(tk::finite_diff_check([&](Tape& t) { return loss::loss_match_high(t.input(V), t.input(P), 0.2, mode); }, hp),
              "loss_match_high");
        track(tk::finite_diff_check([&](Tape& t) { return loss::loss_match_low(t.input(C), t.input(S), 0.2, mode); }, lp),
              "loss_match_low");
        track(tk::finite_diff_check([&](Tape& t) { return loss::loss_cluster_high(t.input(V), t.input(P), 0.2, mode); }, hp),
              "loss_cluster_high");
        track(tk::finite_diff_check([&](Tape& t) { return loss::loss_cluster_low(t.input(C), t.input(S), 0.2, mode); }, lp),
              "loss_cluster_low");
        track(tk::finite_diff_check(
                  [&](Tape& t) { return loss::loss_match_low_weak(t.input(C), t.input(Sw), units, other, 0.2, mode); }, wp),
              "loss_match_low_weak");

        // Model-level: reconstruction and the full objective through encode/decode.
        const model::ModelDims dims{pick(2, 4), pick(2, 4), pick(2, 4), pick(2, 4)};
        auto params = fixtures::random_model(rng, dims);
        const bool weak = trial % 2 == 1;
        std::vector<data::Pair> pairs;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t clips = pick(1, 3);
            pairs.push_back(fixtures::random_pair(rng, clips, weak ? pick(1, 3) : clips, 4, dims.video_dim,
                                                  dims.text_dim, std::to_string(i)));
        }
        const auto batch = pointers(pairs);
        loss::LossConfig cfg;
        cfg.tau = 0.05;
        cfg.sign_mode = mode;
        cfg.correspondence = weak ? data::Correspondence::weak : data::Correspondence::strong;
        const auto targets = fixtures::pin_targets(params, batch);

        auto named = params.tensors();
        std::vector<Tensor*> tensors;
        for (auto& [name, t] : named) tensors.push_back(t);

        const std::vector<const data::Pair*> first = {batch[0]};
        const auto first_targets = fixtures::pin_targets(params, first);
        track(tk::finite_diff_check(
                  [&](Tape& t) { return fixtures::pinned_reconstruct(t, model::bind(t, params), first, first_targets); },
                  tensors),
              "loss_reconstruct");

        track(tk::finite_diff_check(
                  [&](Tape& t) { return fixtures::pinned_total(t, model::bind(t, params), batch, cfg, targets); }, tensors),
              "total_loss");
        const auto g_tape = fixtures::analytic_grads(
            params, [&](Tape& t, const model::HseVars& v) { return loss::total_loss(t, v, batch, cfg).total; });
        const auto g_pinned = fixtures::analytic_grads(
            params, [&](Tape& t, const model::HseVars& v) { return fixtures::pinned_total(t, v, batch, cfg, targets); });
        for (std::size_t i = 0; i < g_tape.size(); ++i)
            tape_vs_pinned = std::max(tape_vs_pinned, std::abs(g_tape[i] - g_pinned[i]) / (1.0 + std::abs(g_pinned[i])));
    }
    const double secs = seconds_since(t0);
    Outcome o;
    // Kink skips must stay rare or they could hide a wrong gradient.
    o.pass = worst < 1e-4 && tape_vs_pinned < 1e-12 && secs < 120.0 && kinks * 1000 <= coordinates;
    o.detail = fmt("%d trials x 7 checks, %zu coordinates (%zu skipped at kinks), max rel err %.2e (%s), "
                   "total_loss vs pinned-target grads %.1e, %.1f s",
                   trials, coordinates, kinks, worst, worst_what.c_str(), tape_vs_pinned, secs);
    return o;
}

// ---------------------------------------------------------------------------
// 2. loss oracles

Outcome loss_oracles() {
    std::mt19937_64 rng(2);
    double high = 0.0, low = 0.0, ch = 0.0, cl = 0.0, weak_ref = 0.0, rec = 0.0, avg = 0.0;
    bool weak_exact = true;
    for (int trial = 0; trial < 200; ++trial) {
        auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
        const bool literal = trial % 3 == 0;
        const SignMode mode = literal ? SignMode::literal : SignMode::corrected;
        const std::size_t k = pick(1, 8), d = pick(1, 10);
        const auto v = oracle::random_mat(rng, k, d), p = oracle::random_mat(rng, k, d);
        const std::size_t n = pick(1, 12);
        const auto c = oracle::random_mat(rng, n, d), s = oracle::random_mat(rng, n, d);
        Tape tape;
        const Var V = tape.constant(to_tensor(v)), P = tape.constant(to_tensor(p));
        const Var Cv = tape.constant(to_tensor(c)), Sv = tape.constant(to_tensor(s));
        high = std::max(high, std::abs(loss::loss_match_high(V, P, 0.2, mode).item() - oracle::ranking(v, p, 0.2, literal)));
        low = std::max(low, std::abs(loss::loss_match_low(Cv, Sv, 0.3, mode).item() - oracle::ranking(c, s, 0.3, literal)));
        ch = std::max(ch, std::abs(loss::loss_cluster_high(V, P, 0.2, mode).item() -
                                   (oracle::separation(v, 0.2, literal) + oracle::separation(p, 0.2, literal))));
        cl = std::max(cl, std::abs(loss::loss_cluster_low(Cv, Sv, 0.4, mode).item() -
                                   (oracle::separation(c, 0.4, literal) + oracle::separation(s, 0.4, literal))));

        // Weak: pools split into k videos / paragraphs with independent unit counts.
        std::vector<std::size_t> nc(k), ns(k);
        std::size_t tc = 0, ts = 0;
        for (std::size_t i = 0; i < k; ++i) {
            tc += nc[i] = pick(1, 4);
            ts += ns[i] = pick(1, 4);
        }
        const auto wc = oracle::random_mat(rng, tc, d), ws = oracle::random_mat(rng, ts, d);
        const Var Wc = tape.constant(to_tensor(wc)), Ws = tape.constant(to_tensor(ws));
        const double weak = loss::loss_match_low_weak(Wc, Ws, nc, ns, 0.2, SignMode::corrected).item();
        const Var averaged = loss::avg_match_matrix(Wc, Ws, nc, ns);
        weak_exact = weak_exact && weak == loss::ranking_hinge(averaged, 0.2, SignMode::corrected).item();
        oracle::Mat sim(k, oracle::Vec(k));
        std::size_t oc = 0;
        for (std::size_t i = 0; i < k; ++i) {
            const oracle::Mat ci(wc.begin() + oc, wc.begin() + oc + nc[i]);
            std::size_t os = 0;
            for (std::size_t j = 0; j < k; ++j) {
                const oracle::Mat sj(ws.begin() + os, ws.begin() + os + ns[j]);
                sim[i][j] = oracle::avg_match(ci, sj);
                avg = std::max({avg, std::abs(loss::avg_match(ci, sj) - sim[i][j]),
                                std::abs(averaged.value().at(i, j) - sim[i][j])});
                os += ns[j];
            }
            oc += nc[i];
        }
        weak_ref = std::max(weak_ref, std::abs(weak - oracle::ranking_on(sim, 0.2)));

        // Reconstruction against a loop over units and leaves.
        const auto pair = fixtures::random_pair(rng, pick(1, 4), pick(1, 4), 5, d, pick(1, 6), "x");
        model::HierEmbedding ve{oracle::random_mat(rng, pair.video.clip_count(), 3), {}};
        model::HierEmbedding pe{oracle::random_mat(rng, pair.paragraph.sentence_count(), 3), {}};
        model::DecodedSequence vd{oracle::random_mat(rng, ve.low.size(), 3), {}};
        model::DecodedSequence pd{oracle::random_mat(rng, pe.low.size(), 3), {}};
        for (const auto& clip : pair.video.clips) vd.leaves.push_back(oracle::random_mat(rng, clip.size(), clip[0].size()));
        for (const auto& sent : pair.paragraph.sentences)
            pd.leaves.push_back(oracle::random_mat(rng, sent.size(), sent[0].size()));
        double expect = 0.0;
        auto side = [&](const model::HierEmbedding& e, const model::DecodedSequence& dd,
                        const std::vector<data::FeatureSeq>& raw) {
            for (std::size_t i = 0; i < raw.size(); ++i) {
                double leaves = 0.0;
                for (std::size_t j = 0; j < raw[i].size(); ++j) leaves += oracle::sq_dist(dd.leaves[i][j], raw[i][j]);
                expect += oracle::sq_dist(dd.low[i], e.low[i]) + leaves / static_cast<double>(raw[i].size());
            }
        };
        side(ve, vd, pair.video.clips);
        side(pe, pd, pair.paragraph.sentences);
        rec = std::max(rec, std::abs(loss::loss_reconstruct(ve, vd, pair.video, pe, pd, pair.paragraph) - expect));
    }
    Outcome o;
    o.pass = std::max({high, low, ch, cl, weak_ref, rec}) <= 1e-10 && avg <= 1e-12 && weak_exact;
    o.detail = fmt("200 instances each; max |diff| match_high %.1e match_low %.1e cluster_high %.1e cluster_low %.1e "
                   "weak %.1e reconstruct %.1e; avg_match %.1e; weak == ranking(avg matrix) %s",
                   high, low, ch, cl, weak_ref, rec, avg, weak_exact ? "exact" : "NOT exact");
    return o;
}

// ---------------------------------------------------------------------------
// 3, 10, 11. overfit run

struct OverfitRun {
    data::SynthCorpus synth;
    train::TrainResult result;
    eval::RetrievalPair full, one_unit, three_units;
    double seconds = 0.0;
};

OverfitRun overfit() {
    const auto t0 = std::chrono::steady_clock::now();
    OverfitRun run;
    run.synth = data::synth_generate(data::SynthSpec{});
    train::TrainConfig cfg;
    cfg.epochs = 200;
    cfg.decay_every_epochs = 200;
    run.result = train::train(run.synth.corpus, cfg);
    run.full = eval::evaluate_retrieval(run.result.params, run.synth.corpus);
    run.one_unit = eval::evaluate_partial(run.result.params, run.synth.corpus, 1);
    run.three_units = eval::evaluate_partial(run.result.params, run.synth.corpus, 3);
    run.seconds = seconds_since(t0);
    return run;
}

Outcome overfit_retrieval(const OverfitRun& run) {
    const double p2v = run.full.paragraph_to_video.recall_at.at(1), v2p = run.full.video_to_paragraph.recall_at.at(1);
    Outcome o;
    o.pass = p2v == 1.0 && v2p == 1.0 && run.seconds < 300.0;
    o.detail = fmt("32 pairs, 200 epochs at constant lr %.0e: R@1 p2v %.3f v2p %.3f, final loss %.4f, %.1f s",
                   run.result.log.back().learning_rate, p2v, v2p, run.result.log.back().mean.total, run.seconds);
    return o;
}

Outcome zeroshot_transfer(const OverfitRun& run) {
    const auto zs = eval::zeroshot_classify(run.result.params, run.synth.corpus, run.synth.labels);
    Outcome o;
    o.pass = zs.top1 >= 0.75;
    o.detail = fmt("%zu training clips, %zu label phrases: top-1 %.3f (chance %.3f), top-%zu %.3f", zs.truth.size(),
                   zs.labels.size(), zs.top1, 1.0 / static_cast<double>(zs.labels.size()), zs.top_k, zs.topk);
    return o;
}

Outcome partial_observation(const OverfitRun& run) {
    const double a1 = run.one_unit.paragraph_to_video.recall_at.at(1), b1 = run.one_unit.video_to_paragraph.recall_at.at(1);
    const double a3 = run.three_units.paragraph_to_video.recall_at.at(1),
                 b3 = run.three_units.video_to_paragraph.recall_at.at(1);
    Outcome o;
    o.pass = a3 >= a1 && b3 >= b1;
    o.detail = fmt("R@1 p2v %.3f -> %.3f, v2p %.3f -> %.3f (max_units 1 -> 3)", a1, a3, b1, b3);
    return o;
}

// ---------------------------------------------------------------------------
// 4, 5. held-out trends

data::SynthSpec trend_spec(std::uint64_t seed) {
    data::SynthSpec s;
    s.num_pairs = 96;
    s.num_events = 4;
    s.instance_std = 1.0;
    s.clips_min = 3;
    s.clips_max = 6;
    s.frames_max = s.words_max = 8;
    s.noise_std = 0.3;
    s.seed = seed;
    return s;
}

struct TrendScores {
    double hse = 0, hse_tau0 = 0, fse = 0, weak = 0, no_low = 0;
};

TrendScores trend_scores(std::uint64_t seed) {
    const auto corpus = data::synth_generate(trend_spec(seed)).corpus;
    const auto [train_set, test_set] = data::split(corpus, 64);
    auto base = train::TrainConfig{};
    base.epochs = 30;
    base.decay_every_epochs = 1000;
    base.seed = seed;
    auto score = [&](const train::TrainConfig& c) {
        return eval::evaluate_retrieval(train::train(train_set, c).params, test_set).mean_recall(1);
    };
    TrendScores t;
    t.hse = score(base);
    auto c = base;
    c.loss.tau = 0.0;
    t.hse_tau0 = score(c);
    t.fse = eval::evaluate_retrieval(train::train_flat(train_set, base).params, test_set).mean_recall(1);
    c = base;
    c.loss.correspondence = data::Correspondence::weak;
    t.weak = score(c);
    c = base;
    c.loss.use_low_level = false;
    t.no_low = score(c);
    return t;
}

Outcome hierarchy_trend(const TrendScores& t) {
    Outcome o;
    o.pass = t.hse >= t.hse_tau0 - 0.05 && t.hse_tau0 > t.fse;
    o.detail = fmt("held-out mean R@1 (64/32 split, seed 7): HSE %.3f, HSE[tau=0] %.3f, FSE %.3f", t.hse, t.hse_tau0, t.fse);
    return o;
}

Outcome weak_trend(const TrendScores& t) {
    Outcome o;
    o.pass = t.weak > t.no_low;
    o.detail = fmt("held-out mean R@1 (seed 7): weak %.3f vs no low-level loss %.3f", t.weak, t.no_low);
    return o;
}

// ---------------------------------------------------------------------------
// 6. metric oracles

Outcome metric_oracles() {
    std::mt19937_64 rng(6);
    std::size_t mismatches = 0;
    std::uniform_int_distribution<std::size_t> size(2, 200);
    std::uniform_int_distribution<int> coarse(0, 3);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = size(rng);
        auto sim = oracle::random_mat(rng, n, n);
        if (trial % 4 == 0)
            for (auto& r : sim)
                for (double& x : r) x = coarse(rng);
        const auto ranks = eval::ranks_from_similarity(sim);
        bool ok = ranks == oracle::ranks_by_sort(sim) && eval::median_rank(ranks) == oracle::lower_median_by_sort(ranks);
        for (std::size_t k : {1, 5, 10, 50}) ok = ok && eval::recall_at_k(ranks, k) == oracle::recall_by_count(ranks, k);
        mismatches += !ok;
    }
    Outcome o;
    o.pass = mismatches == 0;
    o.detail = fmt("1000 matrices (n in 2..200, a quarter with heavy ties): %zu mismatches", mismatches);
    return o;
}

// ---------------------------------------------------------------------------
// 7. determinism

struct RunArtifacts {
    std::string checkpoint, log, tsv, json;
};

RunArtifacts full_run() {
    data::SynthSpec spec;
    spec.num_pairs = 24;
    const auto synth = data::synth_generate(spec);
    train::TrainConfig cfg;
    cfg.epochs = 4;
    const auto r = train::train(synth.corpus, cfg);
    RunArtifacts a;
    std::ostringstream ck(std::ios::binary);
    ckpt::write_checkpoint(ck, r.params);
    a.checkpoint = ck.str();
    for (const auto& e : r.log)
        a.log += fmt("%zu %a %a %a %a %a %a %a\n", e.epoch, e.learning_rate, e.mean.match_high, e.mean.match_low,
                     e.mean.cluster_high, e.mean.cluster_low, e.mean.reconstruct, e.mean.total);
    const auto ret = eval::evaluate_retrieval(r.params, synth.corpus);
    const auto zs = eval::zeroshot_classify(r.params, synth.corpus, synth.labels);
    std::ostringstream tsv;
    eval::write_tsv(tsv, ret);
    eval::write_tsv(tsv, zs);
    a.tsv = tsv.str();
    a.json = eval::to_json(ret) + eval::to_json(zs);
    return a;
}

Outcome determinism() {
    const auto a = full_run(), b = full_run();
    Outcome o;
    o.pass = a.checkpoint == b.checkpoint && a.log == b.log && a.tsv == b.tsv && a.json == b.json;
    o.detail = fmt("two train+eval runs: checkpoint %s (%zu bytes), loss log %s, reports %s",
                   a.checkpoint == b.checkpoint ? "identical" : "DIFFER", a.checkpoint.size(),
                   a.log == b.log ? "identical" : "DIFFER", a.tsv == b.tsv && a.json == b.json ? "identical" : "DIFFER");
    return o;
}

// ---------------------------------------------------------------------------
// 8. scale invariance

Outcome scale_invariance() {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> log_scale(-3.0, 3.0);
    std::uniform_int_distribution<std::size_t> dim(1, 16);
    auto factor = [&] { return std::pow(10.0, log_scale(rng)); };
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const std::size_t d = dim(rng);
        const auto u = oracle::random_mat(rng, 1, d)[0], w = oracle::random_mat(rng, 1, d)[0];
        const double a = factor(), b = factor();
        auto au = u, bw = w;
        for (double& x : au) x *= a;
        for (double& x : bw) x *= b;
        worst = std::max(worst, std::abs(loss::match(au, bw) - loss::match(u, w)));
    }
    auto rescale = [&](oracle::Mat m) {
        for (auto& r : m) {
            const double a = factor();
            for (double& x : r) x *= a;
        }
        return m;
    };
    std::size_t rank_changes = 0, argmax_changes = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto q = oracle::random_mat(rng, 40, 8), g = oracle::random_mat(rng, 40, 8);
        rank_changes += eval::rank_matrix(q, g) != eval::rank_matrix(rescale(q), rescale(g));
        const auto clips = oracle::random_mat(rng, 60, 8), labels = oracle::random_mat(rng, 5, 8);
        std::vector<int> truth(60, 0), ids = {0, 1, 2, 3, 4};
        argmax_changes += eval::zeroshot_from_embeddings(clips, truth, labels, ids).predicted !=
                          eval::zeroshot_from_embeddings(rescale(clips), truth, rescale(labels), ids).predicted;
    }
    Outcome o;
    o.pass = worst <= 1e-12 && rank_changes == 0 && argmax_changes == 0;
    o.detail = fmt("10^4 (u, w, a, b) with a, b in [1e-3, 1e3]: max |diff| %.1e; rank matrices changed %zu/100, "
                   "zero-shot argmax changed %zu/100",
                   worst, rank_changes, argmax_changes);
    return o;
}

// ---------------------------------------------------------------------------
// 9. reconstruction identity

Outcome reconstruction_identity() {
    std::mt19937_64 rng(9);
    std::size_t nonzero_at_target = 0, zero_when_perturbed = 0;
    std::uniform_real_distribution<double> mag(-8.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
        const auto pair = fixtures::random_pair(rng, pick(1, 4), pick(1, 4), 5, pick(1, 6), pick(1, 6), "x");
        const std::size_t e = pick(1, 6);
        model::HierEmbedding ve{oracle::random_mat(rng, pair.video.clip_count(), e), {}};
        model::HierEmbedding pe{oracle::random_mat(rng, pair.paragraph.sentence_count(), e), {}};
        model::DecodedSequence vd{ve.low, pair.video.clips}, pd{pe.low, pair.paragraph.sentences};
        nonzero_at_target += loss::loss_reconstruct(ve, vd, pair.video, pe, pd, pair.paragraph) != 0.0;

        // One coordinate anywhere in the decoded outputs moves by ±10^[-8, 1].
        std::vector<double*> slots;
        for (auto* dec : {&vd, &pd}) {
            for (auto& r : dec->low)
                for (double& x : r) slots.push_back(&x);
            for (auto& unit : dec->leaves)
                for (auto& r : unit)
                    for (double& x : r) slots.push_back(&x);
        }
        const double delta = (trial % 2 ? 1.0 : -1.0) * std::pow(10.0, mag(rng));
        *slots[pick(0, slots.size() - 1)] += delta;
        zero_when_perturbed += !(loss::loss_reconstruct(ve, vd, pair.video, pe, pd, pair.paragraph) > 0.0);
    }
    Outcome o;
    o.pass = nonzero_at_target == 0 && zero_when_perturbed == 0;
    o.detail = fmt("1000 random pairs: nonzero at targets %zu, not positive after perturbation %zu", nonzero_at_target,
                   zero_when_perturbed);
    return o;
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const char* name, const Outcome& o) {
        std::printf("%s [%2d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    };

    report(1, "gradient suite", gradient_suite());
    report(2, "loss oracles", loss_oracles());
    const auto run = overfit();
    report(3, "overfit retrieval", overfit_retrieval(run));
    const auto trends = trend_scores(7);
    report(4, "hierarchy trend", hierarchy_trend(trends));
    report(5, "weak-correspondence trend", weak_trend(trends));
    report(6, "metric oracles", metric_oracles());
    report(7, "determinism", determinism());
    report(8, "scale invariance", scale_invariance());
    report(9, "reconstruction identity", reconstruction_identity());
    report(10, "zero-shot transfer", zeroshot_transfer(run));
    report(11, "partial observation", partial_observation(run));

    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
