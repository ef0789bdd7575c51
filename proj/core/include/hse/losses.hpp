#pragma once

// Training objectives over cosine similarities.
//
// A similarity matrix S has S[a][b] = match(row a of the first set, row b of
// the second). With K rows, the corrected-sign forms are
//
//   ranking:    sum_k sum_{k' != k} [m + S[k'][k] - S[k][k]]_+ + [m + S[k][k'] - S[k][k]]_+
//   separation: sum_k sum_{k' != k} [m + S[k'][k] - 1]_+
//
// The literal forms flip which side of the hinge the positive pair sits on:
//
//   ranking:    [m + S[k][k] - S[k'][k]]_+ + [m + S[k][k] - S[k][k']]_+
//   separation: [m + 1 - S[k'][k]]_+

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "hse/data.hpp"
#include "hse/model.hpp"
#include "hse/tensor.hpp"

namespace hse::loss {

enum class SignMode { corrected, literal };

std::string_view to_string(SignMode m);
SignMode parse_sign_mode(std::string_view text);

struct LossConfig {
    double alpha = 0.2;       // high-level matching margin
    double beta = 0.2;        // low-level matching margin
    double gamma = 0.2;       // high-level clustering margin
    double eta = 0.2;         // low-level clustering margin
    double beta_prime = 0.2;  // weak low-level matching margin
    double tau = 5e-4;        // reconstruction weight
    data::Correspondence correspondence = data::Correspondence::strong;
    SignMode sign_mode = SignMode::corrected;
    /// When false the low-level matching and clustering terms are dropped.
    bool use_low_level = true;

    void validate() const;
};

/// Batch-normalised components: each is its raw sum divided by the batch size.
struct LossBreakdown {
    double match_high = 0.0;
    double match_low = 0.0;
    double cluster_high = 0.0;
    double cluster_low = 0.0;
    double reconstruct = 0.0;
    double total = 0.0;
};

/// match_high + match_low + cluster_high + cluster_low + tau * reconstruct,
/// accumulated in exactly that order.
double compose_total(const LossBreakdown& parts, double tau);

// ---------------------------------------------------------------------------
// Value-level similarity

/// Cosine similarity. Throws DegenerateInputError for a zero vector and
/// ShapeError for a dimension mismatch.
double match(std::span<const double> u, std::span<const double> w);

/// Mean of match(c, s) over all clip/sentence pairs of one video and paragraph.
double avg_match(const std::vector<std::vector<double>>& clips,
                 const std::vector<std::vector<double>>& sentences);

// ---------------------------------------------------------------------------
// Tape-level losses

tk::Var ranking_hinge(tk::Var similarity, double margin, SignMode mode);
tk::Var separation_hinge(tk::Var similarity, double margin, SignMode mode);

/// Mean of each (row group, column group) block of a similarity matrix.
tk::Var block_mean(tk::Var similarity, std::span<const std::size_t> row_groups,
                   std::span<const std::size_t> col_groups);

/// Rows of `videos` / `paragraphs` are the K aligned embeddings.
tk::Var loss_match_high(tk::Var videos, tk::Var paragraphs, double alpha, SignMode mode);
/// Rows of `clips` / `sentences` are aligned one-to-one across the batch.
/// Throws ContractError when the row counts differ (use loss_match_low_weak).
tk::Var loss_match_low(tk::Var clips, tk::Var sentences, double beta, SignMode mode);
tk::Var loss_cluster_high(tk::Var videos, tk::Var paragraphs, double gamma, SignMode mode);
tk::Var loss_cluster_low(tk::Var clips, tk::Var sentences, double eta, SignMode mode);

/// [K x K] matrix of averaged clip/sentence matches: entry (a, b) averages over
/// the clips of video a and the sentences of paragraph b.
tk::Var avg_match_matrix(tk::Var clips, tk::Var sentences, std::span<const std::size_t> clip_counts,
                         std::span<const std::size_t> sentence_counts);
/// ranking_hinge applied to avg_match_matrix.
tk::Var loss_match_low_weak(tk::Var clips, tk::Var sentences,
                            std::span<const std::size_t> clip_counts,
                            std::span<const std::size_t> sentence_counts, double beta_prime,
                            SignMode mode);

/// Layer-wise reconstruction for one pair. Encoder targets are detached.
tk::Var loss_reconstruct(const model::HierEncoding& video, const model::Decoding& video_decoded,
                         const data::VideoSample& video_raw,
                         const model::HierEncoding& paragraph,
                         const model::Decoding& paragraph_decoded,
                         const data::ParagraphSample& paragraph_raw);

/// Value-level reconstruction loss over plain embeddings and decoder outputs.
double loss_reconstruct(const model::HierEmbedding& video, const model::DecodedSequence& video_decoded,
                        const data::VideoSample& video_raw, const model::HierEmbedding& paragraph,
                        const model::DecodedSequence& paragraph_decoded,
                        const data::ParagraphSample& paragraph_raw);

struct BatchLoss {
    LossBreakdown breakdown;
    tk::Var total;
};

/// Encodes and decodes every pair of the batch on `tape`, then combines all
/// terms with per-batch normalisation.
BatchLoss total_loss(tk::Tape& tape, const model::HseVars& vars,
                     std::span<const data::Pair* const> batch, const LossConfig& config,
                     const model::EncoderOptions& options = {});

/// Flat baseline objective: high-level matching and clustering only.
BatchLoss flat_total_loss(tk::Tape& tape, const model::FlatVars& vars,
                          std::span<const data::Pair* const> batch, const LossConfig& config);

}  // namespace hse::loss
