#pragma once

// GRU cells, the flat sequence encoder, two-level hierarchical encoders, and
// layer-wise decoders for both modalities.
//
// GRU convention:
//   z  = sigmoid(W_z x + U_z h + b_z)
//   r  = sigmoid(W_r x + U_r h + b_r)
//   h~ = tanh(W_h x + U_h (r * h) + b_h)
//   h' = (1 - z) * h + z * h~
// A sequence embedding is the channel-wise max over the per-step hidden states.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hse/data.hpp"
#include "hse/tensor.hpp"

namespace hse::model {

struct GruParams {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    tk::Tensor w_z, w_r, w_h;  // [hidden x input]
    tk::Tensor u_z, u_r, u_h;  // [hidden x hidden]
    tk::Tensor b_z, b_r, b_h;  // [hidden]

    static GruParams zeros(std::size_t input_dim, std::size_t hidden_dim);

    /// Calls f(name, tensor) in the fixed order w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h.
    template <class F>
    void for_each(F&& f) {
        f("w_z", w_z); f("w_r", w_r); f("w_h", w_h);
        f("u_z", u_z); f("u_r", u_r); f("u_h", u_h);
        f("b_z", b_z); f("b_r", b_r); f("b_h", b_h);
    }
    template <class F>
    void for_each(F&& f) const {
        f("w_z", w_z); f("w_r", w_r); f("w_h", w_h);
        f("u_z", u_z); f("u_r", u_r); f("u_h", u_h);
        f("b_z", b_z); f("b_r", b_r); f("b_h", b_h);
    }
};

/// Affine map y = W h + b projecting a decoder state into a target space.
struct Linear {
    tk::Tensor weight;  // [out x in]
    tk::Tensor bias;    // [out]

    static Linear zeros(std::size_t in_dim, std::size_t out_dim);
};

struct ModelDims {
    std::size_t video_dim = 16;
    std::size_t text_dim = 16;
    std::size_t hidden_low = 32;
    std::size_t hidden_high = 32;

    /// Dimension of the joint video/paragraph space (the pooled high-level state).
    std::size_t embed_dim() const noexcept { return hidden_high; }
    void validate() const;

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

using NamedTensors = std::vector<std::pair<std::string, tk::Tensor*>>;
using ConstNamedTensors = std::vector<std::pair<std::string, const tk::Tensor*>>;

/// Encoders and decoders at both hierarchy levels for both modalities.
struct HseModelParams {
    ModelDims dims;
    GruParams enc_v_low, enc_v_high, enc_p_low, enc_p_high;
    GruParams dec_v_high, dec_v_low, dec_p_high, dec_p_low;
    Linear out_v_high, out_v_low, out_p_high, out_p_low;

    static HseModelParams zeros(const ModelDims& dims);

    /// Every parameter tensor, in the fixed checkpoint / optimizer order.
    NamedTensors tensors();
    ConstNamedTensors tensors() const;
};

/// The flat-sequence baseline: one GRU per modality over all frames / words.
struct FlatModelParams {
    ModelDims dims;
    GruParams enc_v, enc_p;

    static FlatModelParams zeros(const ModelDims& dims);

    NamedTensors tensors();
    ConstNamedTensors tensors() const;
};

bool operator==(const HseModelParams& a, const HseModelParams& b);
bool operator==(const FlatModelParams& a, const FlatModelParams& b);

struct EncoderOptions {
    /// Carry the low-level GRU state from one clip (sentence) into the next
    /// instead of restarting each unit from zero.
    bool carry_low_state = false;
};

// ---------------------------------------------------------------------------
// Tape-level building blocks

struct GruVars {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    tk::Var w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h;
};

struct LinearVars {
    tk::Var weight, bias;
};

/// Trainable binding: backward() writes gradients into `p`'s tensors.
GruVars bind(tk::Tape& tape, GruParams& p);
LinearVars bind(tk::Tape& tape, Linear& p);
/// Read-only binding: copies the tensors onto the tape as constants.
GruVars bind_constant(tk::Tape& tape, const GruParams& p);
LinearVars bind_constant(tk::Tape& tape, const Linear& p);

struct HseVars {
    GruVars enc_v_low, enc_v_high, enc_p_low, enc_p_high;
    GruVars dec_v_high, dec_v_low, dec_p_high, dec_p_low;
    LinearVars out_v_high, out_v_low, out_p_high, out_p_low;
};

HseVars bind(tk::Tape& tape, HseModelParams& p);
HseVars bind_constant(tk::Tape& tape, const HseModelParams& p);

struct FlatVars {
    GruVars enc_v, enc_p;
};

FlatVars bind(tk::Tape& tape, FlatModelParams& p);
FlatVars bind_constant(tk::Tape& tape, const FlatModelParams& p);

tk::Var gru_step(const GruVars& g, tk::Var x, tk::Var h);
tk::Var apply(const LinearVars& l, tk::Var h);

struct SequenceEncoding {
    tk::Var pooled;       // channel-wise max over per-step hidden states
    tk::Var last_hidden;  // final hidden state
};

/// Runs the GRU over `xs` from `h0` (zero when absent). Throws ContractError on
/// an empty sequence.
SequenceEncoding encode_sequence(const GruVars& g, std::span<const tk::Var> xs,
                                 std::optional<tk::Var> h0 = std::nullopt);

/// Feature vectors placed on the tape as constants.
std::vector<tk::Var> constants(tk::Tape& tape, const data::FeatureSeq& seq);

struct HierEncoding {
    std::vector<tk::Var> low;  // one embedding per clip / sentence
    tk::Var high;              // video / paragraph embedding
};

/// Low-level embeddings per unit, then the high-level GRU over them.
HierEncoding encode_hierarchical(const GruVars& low, const GruVars& high,
                                 std::span<const data::FeatureSeq> units,
                                 const EncoderOptions& options = {});

/// Concatenates every unit in order and encodes the result as one sequence.
tk::Var encode_flat(const GruVars& g, std::span<const data::FeatureSeq> units);

struct Decoding {
    std::vector<tk::Var> low;                  // generated unit embeddings
    std::vector<std::vector<tk::Var>> leaves;  // generated frames / words per unit
};

/// The high decoder starts from `high` and runs `counts.size()` zero-input
/// steps; each projected state seeds the low decoder, which runs counts[i]
/// zero-input steps whose projected states are the generated features.
Decoding decode_hierarchical(const GruVars& dec_high, const LinearVars& out_high,
                             const GruVars& dec_low, const LinearVars& out_low, tk::Var high,
                             std::span<const std::size_t> counts);

// ---------------------------------------------------------------------------
// Value-level API

struct HierEmbedding {
    std::vector<std::vector<double>> low;
    std::vector<double> high;
};

std::vector<double> gru_step(const GruParams& p, std::span<const double> x,
                             std::span<const double> h);
std::vector<double> encode_sequence(const GruParams& p, const data::FeatureSeq& xs);
std::vector<double> encode_flat(const GruParams& p, std::span<const data::FeatureSeq> units);

HierEmbedding embed_video(const HseModelParams& p, const data::VideoSample& v,
                          const EncoderOptions& options = {});
HierEmbedding embed_paragraph(const HseModelParams& p, const data::ParagraphSample& s,
                              const EncoderOptions& options = {});

struct DecodedSequence {
    std::vector<std::vector<double>> low;
    std::vector<data::FeatureSeq> leaves;
};

DecodedSequence decode_video(const HseModelParams& p, std::span<const double> high,
                             std::span<const std::size_t> counts);
DecodedSequence decode_paragraph(const HseModelParams& p, std::span<const double> high,
                                 std::span<const std::size_t> counts);

/// Throws NumericError if `t` holds a NaN or infinity.
void require_finite(const tk::Tensor& t, const char* what);

}  // namespace hse::model
