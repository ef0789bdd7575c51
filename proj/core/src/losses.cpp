#include "hse/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "hse/errors.hpp"

namespace hse::loss {

using tk::Tensor;
using tk::Var;

std::string_view to_string(SignMode m) { return m == SignMode::corrected ? "corrected" : "literal"; }

SignMode parse_sign_mode(std::string_view text) {
    if (text == "corrected") return SignMode::corrected;
    if (text == "literal") return SignMode::literal;
    throw std::invalid_argument("unknown sign mode '" + std::string(text) +
                                "' (expected corrected or literal)");
}

void LossConfig::validate() const {
    for (double m : {alpha, beta, gamma, eta, beta_prime})
        if (!(m > 0.0) || !std::isfinite(m)) throw ContractError("loss margins must be finite and > 0");
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw ContractError("tau must be finite and >= 0");
}

double compose_total(const LossBreakdown& p, double tau) {
    return p.match_high + p.match_low + p.cluster_high + p.cluster_low + tau * p.reconstruct;
}

double match(std::span<const double> u, std::span<const double> w) {
    if (u.size() != w.size()) {
        throw ShapeError("match: dimension mismatch " + std::to_string(u.size()) + " vs " +
                         std::to_string(w.size()));
    }
    double uu = 0.0, ww = 0.0, uw = 0.0;
    for (double x : u) uu += x * x;
    for (double x : w) ww += x * x;
    for (std::size_t i = 0; i < u.size(); ++i) uw += u[i] * w[i];
    const double nu = std::sqrt(uu);
    const double nw = std::sqrt(ww);
    if (!(nu > 0.0) || !(nw > 0.0)) throw DegenerateInputError("match: zero-norm vector");
    return uw / (nu * nw);
}

double avg_match(const std::vector<std::vector<double>>& clips,
                 const std::vector<std::vector<double>>& sentences) {
    if (clips.empty() || sentences.empty()) throw ContractError("avg_match needs n >= 1 and m >= 1");
    double acc = 0.0;
    for (const auto& c : clips)
        for (const auto& s : sentences) acc += match(c, s);
    return acc / static_cast<double>(clips.size() * sentences.size());
}

// ---------------------------------------------------------------------------

namespace {

std::size_t square_size(const Tensor& s, const char* op) {
    if (s.rank() != 2 || s.shape[0] != s.shape[1])
        throw ShapeError(std::string(op) + ": expected a square matrix, got " + tk::to_string(s.shape));
    return s.shape[0];
}

}  // namespace

Var ranking_hinge(Var similarity, double margin, SignMode mode) {
    const Tensor& s = similarity.value();
    const std::size_t k_count = square_size(s, "ranking_hinge");
    const double sign = mode == SignMode::corrected ? 1.0 : -1.0;
    // Each term is [margin + sign * (S[neg] - S[pos])]_+.
    double total = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
        const double pos = s.values[k * k_count + k];
        for (std::size_t kp = 0; kp < k_count; ++kp) {
            if (kp == k) continue;
            const double a = margin + sign * (s.values[kp * k_count + k] - pos);
            const double b = margin + sign * (s.values[k * k_count + kp] - pos);
            total += (a > 0.0 ? a : 0.0) + (b > 0.0 ? b : 0.0);
            similarity.tape().note_branch((a > 0.0) + 2 * (b > 0.0));
        }
    }
    return similarity.tape().record(
        Tensor::scalar(total), std::span<const Var>(&similarity, 1),
        [k_count, margin, sign](const tk::BackwardArgs& args) {
            const auto& sv = args.in[0]->values;
            double* g = args.in_grad[0];
            const double go = args.grad_out[0];
            for (std::size_t k = 0; k < k_count; ++k) {
                const std::size_t pos_at = k * k_count + k;
                const double pos = sv[pos_at];
                for (std::size_t kp = 0; kp < k_count; ++kp) {
                    if (kp == k) continue;
                    const std::size_t col_neg = kp * k_count + k;
                    const std::size_t row_neg = k * k_count + kp;
                    if (margin + sign * (sv[col_neg] - pos) > 0.0) {
                        g[col_neg] += go * sign;
                        g[pos_at] -= go * sign;
                    }
                    if (margin + sign * (sv[row_neg] - pos) > 0.0) {
                        g[row_neg] += go * sign;
                        g[pos_at] -= go * sign;
                    }
                }
            }
        });
}

Var separation_hinge(Var similarity, double margin, SignMode mode) {
    const Tensor& s = similarity.value();
    const std::size_t k_count = square_size(s, "separation_hinge");
    const double sign = mode == SignMode::corrected ? 1.0 : -1.0;
    // Each term is [margin + sign * (S[k'][k] - 1)]_+.
    double total = 0.0;
    for (std::size_t k = 0; k < k_count; ++k)
        for (std::size_t kp = 0; kp < k_count; ++kp) {
            if (kp == k) continue;
            const double a = margin + sign * (s.values[kp * k_count + k] - 1.0);
            total += a > 0.0 ? a : 0.0;
            similarity.tape().note_branch(a > 0.0);
        }
    return similarity.tape().record(
        Tensor::scalar(total), std::span<const Var>(&similarity, 1),
        [k_count, margin, sign](const tk::BackwardArgs& args) {
            const auto& sv = args.in[0]->values;
            double* g = args.in_grad[0];
            for (std::size_t k = 0; k < k_count; ++k)
                for (std::size_t kp = 0; kp < k_count; ++kp) {
                    if (kp == k) continue;
                    const std::size_t at = kp * k_count + k;
                    if (margin + sign * (sv[at] - 1.0) > 0.0) g[at] += args.grad_out[0] * sign;
                }
        });
}

Var block_mean(Var similarity, std::span<const std::size_t> row_groups,
               std::span<const std::size_t> col_groups) {
    const Tensor& s = similarity.value();
    std::size_t rows = 0, cols = 0;
    for (std::size_t r : row_groups) {
        if (r == 0) throw ContractError("block_mean: empty row group");
        rows += r;
    }
    for (std::size_t c : col_groups) {
        if (c == 0) throw ContractError("block_mean: empty column group");
        cols += c;
    }
    if (s.rank() != 2 || s.shape[0] != rows || s.shape[1] != cols) {
        throw ShapeError("block_mean: groups cover " + tk::to_string({rows, cols}) +
                         " but the matrix is " + tk::to_string(s.shape));
    }
    std::vector<std::size_t> row_start(row_groups.size()), col_start(col_groups.size());
    for (std::size_t a = 1; a < row_groups.size(); ++a)
        row_start[a] = row_start[a - 1] + row_groups[a - 1];
    for (std::size_t b = 1; b < col_groups.size(); ++b)
        col_start[b] = col_start[b - 1] + col_groups[b - 1];

    const std::size_t out_rows = row_groups.size(), out_cols = col_groups.size();
    std::vector<std::size_t> rg(row_groups.begin(), row_groups.end());
    std::vector<std::size_t> cg(col_groups.begin(), col_groups.end());
    Tensor out = Tensor::zeros({out_rows, out_cols});
    for (std::size_t a = 0; a < out_rows; ++a)
        for (std::size_t b = 0; b < out_cols; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < rg[a]; ++i)
                for (std::size_t j = 0; j < cg[b]; ++j)
                    acc += s.values[(row_start[a] + i) * cols + col_start[b] + j];
            out.values[a * out_cols + b] = acc / static_cast<double>(rg[a] * cg[b]);
        }

    return similarity.tape().record(
        std::move(out), std::span<const Var>(&similarity, 1),
        [rg, cg, row_start, col_start, cols](const tk::BackwardArgs& args) {
            double* g = args.in_grad[0];
            const std::size_t out_cols = cg.size();
            for (std::size_t a = 0; a < rg.size(); ++a)
                for (std::size_t b = 0; b < cg.size(); ++b) {
                    const double share =
                        args.grad_out[a * out_cols + b] / static_cast<double>(rg[a] * cg[b]);
                    for (std::size_t i = 0; i < rg[a]; ++i)
                        for (std::size_t j = 0; j < cg[b]; ++j)
                            g[(row_start[a] + i) * cols + col_start[b] + j] += share;
                }
        });
}

Var loss_match_high(Var videos, Var paragraphs, double alpha, SignMode mode) {
    if (videos.shape().at(0) != paragraphs.shape().at(0))
        throw ContractError("loss_match_high: video and paragraph counts differ");
    return ranking_hinge(tk::cosine_matrix(videos, paragraphs), alpha, mode);
}

Var loss_match_low(Var clips, Var sentences, double beta, SignMode mode) {
    if (clips.shape().at(0) != sentences.shape().at(0)) {
        throw ContractError(
            "loss_match_low: clips and sentences are not aligned one-to-one; use "
            "loss_match_low_weak for weakly corresponding data");
    }
    return ranking_hinge(tk::cosine_matrix(clips, sentences), beta, mode);
}

Var loss_cluster_high(Var videos, Var paragraphs, double gamma, SignMode mode) {
    return tk::add(separation_hinge(tk::cosine_matrix(videos, videos), gamma, mode),
                   separation_hinge(tk::cosine_matrix(paragraphs, paragraphs), gamma, mode));
}

Var loss_cluster_low(Var clips, Var sentences, double eta, SignMode mode) {
    return tk::add(separation_hinge(tk::cosine_matrix(clips, clips), eta, mode),
                   separation_hinge(tk::cosine_matrix(sentences, sentences), eta, mode));
}

Var avg_match_matrix(Var clips, Var sentences, std::span<const std::size_t> clip_counts,
                     std::span<const std::size_t> sentence_counts) {
    if (clip_counts.size() != sentence_counts.size())
        throw ContractError("avg_match_matrix: video and paragraph counts differ");
    return block_mean(tk::cosine_matrix(clips, sentences), clip_counts, sentence_counts);
}

Var loss_match_low_weak(Var clips, Var sentences, std::span<const std::size_t> clip_counts,
                        std::span<const std::size_t> sentence_counts, double beta_prime,
                        SignMode mode) {
    if (clip_counts.empty()) throw ContractError("loss_match_low_weak: empty batch");
    return ranking_hinge(avg_match_matrix(clips, sentences, clip_counts, sentence_counts),
                         beta_prime, mode);
}

// ---------------------------------------------------------------------------
// Reconstruction

namespace {

Var squared_error(Var got, Var want) { return tk::sum(tk::square(tk::sub(got, want))); }

Var side_reconstruct(const model::HierEncoding& enc, const model::Decoding& dec,
                     const std::vector<data::FeatureSeq>& raw) {
    if (dec.low.size() != enc.low.size() || dec.leaves.size() != raw.size() ||
        enc.low.size() != raw.size()) {
        throw ContractError("loss_reconstruct: decoded unit count differs from the target");
    }
    tk::Tape& tape = enc.high.tape();
    Var total;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (dec.leaves[i].size() != raw[i].size())
            throw ContractError("loss_reconstruct: decoded length differs from the target");
        Var unit = squared_error(dec.low[i], tk::detach(enc.low[i]));
        Var leaves;
        for (std::size_t j = 0; j < raw[i].size(); ++j) {
            Var e = squared_error(dec.leaves[i][j], tape.constant(Tensor::vector(raw[i][j])));
            leaves = leaves.valid() ? tk::add(leaves, e) : e;
        }
        Var term = tk::add(unit, tk::scale(leaves, 1.0 / static_cast<double>(raw[i].size())));
        total = total.valid() ? tk::add(total, term) : term;
    }
    return total;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("loss_reconstruct: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

double side_reconstruct(const model::HierEmbedding& enc, const model::DecodedSequence& dec,
                        const std::vector<data::FeatureSeq>& raw) {
    if (dec.low.size() != enc.low.size() || dec.leaves.size() != raw.size() ||
        enc.low.size() != raw.size()) {
        throw ContractError("loss_reconstruct: decoded unit count differs from the target");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (dec.leaves[i].size() != raw[i].size())
            throw ContractError("loss_reconstruct: decoded length differs from the target");
        double leaves = 0.0;
        for (std::size_t j = 0; j < raw[i].size(); ++j) leaves += sq_dist(dec.leaves[i][j], raw[i][j]);
        total += sq_dist(dec.low[i], enc.low[i]) + leaves * (1.0 / static_cast<double>(raw[i].size()));
    }
    return total;
}

}  // namespace

Var loss_reconstruct(const model::HierEncoding& video, const model::Decoding& video_decoded,
                     const data::VideoSample& video_raw, const model::HierEncoding& paragraph,
                     const model::Decoding& paragraph_decoded,
                     const data::ParagraphSample& paragraph_raw) {
    return tk::add(side_reconstruct(video, video_decoded, video_raw.clips),
                   side_reconstruct(paragraph, paragraph_decoded, paragraph_raw.sentences));
}

double loss_reconstruct(const model::HierEmbedding& video, const model::DecodedSequence& video_decoded,
                        const data::VideoSample& video_raw, const model::HierEmbedding& paragraph,
                        const model::DecodedSequence& paragraph_decoded,
                        const data::ParagraphSample& paragraph_raw) {
    return side_reconstruct(video, video_decoded, video_raw.clips) +
           side_reconstruct(paragraph, paragraph_decoded, paragraph_raw.sentences);
}

// ---------------------------------------------------------------------------
// Combined objective

namespace {

void check_finite(double v, const char* component) {
    if (!std::isfinite(v)) throw NumericError(std::string("loss component '") + component + "' is not finite");
}

}  // namespace

BatchLoss total_loss(tk::Tape& /*tape*/, const model::HseVars& vars,
                     std::span<const data::Pair* const> batch, const LossConfig& config,
                     const model::EncoderOptions& options) {
    if (batch.empty()) throw ContractError("total_loss: empty batch");
    const bool weak = config.correspondence == data::Correspondence::weak;
    const double inv_k = 1.0 / static_cast<double>(batch.size());

    std::vector<Var> videos, paragraphs, clips, sentences;
    std::vector<std::size_t> clip_counts, sentence_counts;
    Var reconstruct;
    for (const data::Pair* pair : batch) {
        if (!weak && pair->video.clip_count() != pair->paragraph.sentence_count()) {
            throw ContractError("total_loss: pair '" + pair->video.id +
                                "' has unequal clip and sentence counts under strong correspondence");
        }
        const auto v = model::encode_hierarchical(vars.enc_v_low, vars.enc_v_high, pair->video.clips, options);
        const auto p = model::encode_hierarchical(vars.enc_p_low, vars.enc_p_high,
                                                  pair->paragraph.sentences, options);
        videos.push_back(v.high);
        paragraphs.push_back(p.high);
        clips.insert(clips.end(), v.low.begin(), v.low.end());
        sentences.insert(sentences.end(), p.low.begin(), p.low.end());
        clip_counts.push_back(v.low.size());
        sentence_counts.push_back(p.low.size());

        if (config.tau > 0.0) {
            const auto frame_counts = pair->video.frame_counts();
            const auto word_counts = pair->paragraph.word_counts();
            const auto vd = model::decode_hierarchical(vars.dec_v_high, vars.out_v_high, vars.dec_v_low,
                                                       vars.out_v_low, v.high, frame_counts);
            const auto pd = model::decode_hierarchical(vars.dec_p_high, vars.out_p_high, vars.dec_p_low,
                                                       vars.out_p_low, p.high, word_counts);
            Var r = loss_reconstruct(v, vd, pair->video, p, pd, pair->paragraph);
            reconstruct = reconstruct.valid() ? tk::add(reconstruct, r) : r;
        }
    }

    const Var v_mat = tk::stack(videos);
    const Var p_mat = tk::stack(paragraphs);
    const Var c_mat = tk::stack(clips);
    const Var s_mat = tk::stack(sentences);
    model::require_finite(v_mat.value(), "video embeddings");
    model::require_finite(p_mat.value(), "paragraph embeddings");

    const Var match_high = tk::scale(loss_match_high(v_mat, p_mat, config.alpha, config.sign_mode), inv_k);
    const Var cluster_high =
        tk::scale(loss_cluster_high(v_mat, p_mat, config.gamma, config.sign_mode), inv_k);

    Var total = match_high;
    BatchLoss out;
    out.breakdown.match_high = match_high.item();
    out.breakdown.cluster_high = cluster_high.item();
    check_finite(out.breakdown.match_high, "match_high");
    check_finite(out.breakdown.cluster_high, "cluster_high");

    Var cluster_low;
    if (config.use_low_level) {
        const Var match_low = tk::scale(
            weak ? loss_match_low_weak(c_mat, s_mat, clip_counts, sentence_counts, config.beta_prime,
                                       config.sign_mode)
                 : loss_match_low(c_mat, s_mat, config.beta, config.sign_mode),
            inv_k);
        cluster_low = tk::scale(loss_cluster_low(c_mat, s_mat, config.eta, config.sign_mode), inv_k);
        out.breakdown.match_low = match_low.item();
        out.breakdown.cluster_low = cluster_low.item();
        check_finite(out.breakdown.match_low, "match_low");
        check_finite(out.breakdown.cluster_low, "cluster_low");
        total = tk::add(total, match_low);
    }
    total = tk::add(total, cluster_high);
    if (cluster_low.valid()) total = tk::add(total, cluster_low);
    if (reconstruct.valid()) {
        const Var rec = tk::scale(reconstruct, inv_k);
        out.breakdown.reconstruct = rec.item();
        check_finite(out.breakdown.reconstruct, "reconstruct");
        total = tk::add(total, tk::scale(rec, config.tau));
    }
    out.breakdown.total = total.item();
    check_finite(out.breakdown.total, "total");
    out.total = total;
    return out;
}

BatchLoss flat_total_loss(tk::Tape& /*tape*/, const model::FlatVars& vars,
                          std::span<const data::Pair* const> batch, const LossConfig& config) {
    if (batch.empty()) throw ContractError("flat_total_loss: empty batch");
    const double inv_k = 1.0 / static_cast<double>(batch.size());
    std::vector<Var> videos, paragraphs;
    for (const data::Pair* pair : batch) {
        videos.push_back(model::encode_flat(vars.enc_v, pair->video.clips));
        paragraphs.push_back(model::encode_flat(vars.enc_p, pair->paragraph.sentences));
    }
    const Var v_mat = tk::stack(videos);
    const Var p_mat = tk::stack(paragraphs);
    model::require_finite(v_mat.value(), "video embeddings");
    model::require_finite(p_mat.value(), "paragraph embeddings");
    const Var match_high = tk::scale(loss_match_high(v_mat, p_mat, config.alpha, config.sign_mode), inv_k);
    const Var cluster_high =
        tk::scale(loss_cluster_high(v_mat, p_mat, config.gamma, config.sign_mode), inv_k);
    BatchLoss out;
    out.breakdown.match_high = match_high.item();
    out.breakdown.cluster_high = cluster_high.item();
    out.total = tk::add(match_high, cluster_high);
    out.breakdown.total = out.total.item();
    check_finite(out.breakdown.total, "total");
    return out;
}

}  // namespace hse::loss
