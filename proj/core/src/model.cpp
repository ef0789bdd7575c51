#include "hse/model.hpp"

#include <cmath>

#include "hse/errors.hpp"

namespace hse::model {

using tk::Tape;
using tk::Tensor;
using tk::Var;

GruParams GruParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
    GruParams p;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.w_z = p.w_r = p.w_h = Tensor::zeros({hidden_dim, input_dim});
    p.u_z = p.u_r = p.u_h = Tensor::zeros({hidden_dim, hidden_dim});
    p.b_z = p.b_r = p.b_h = Tensor::zeros({hidden_dim});
    return p;
}

Linear Linear::zeros(std::size_t in_dim, std::size_t out_dim) {
    return Linear{Tensor::zeros({out_dim, in_dim}), Tensor::zeros({out_dim})};
}

void ModelDims::validate() const {
    if (video_dim < 1 || text_dim < 1 || hidden_low < 1 || hidden_high < 1)
        throw ContractError("model dimensions must all be >= 1");
}

HseModelParams HseModelParams::zeros(const ModelDims& d) {
    d.validate();
    HseModelParams p;
    p.dims = d;
    p.enc_v_low = GruParams::zeros(d.video_dim, d.hidden_low);
    p.enc_v_high = GruParams::zeros(d.hidden_low, d.hidden_high);
    p.enc_p_low = GruParams::zeros(d.text_dim, d.hidden_low);
    p.enc_p_high = GruParams::zeros(d.hidden_low, d.hidden_high);
    // Decoders read no input: their state carries everything.
    p.dec_v_high = GruParams::zeros(0, d.hidden_high);
    p.dec_v_low = GruParams::zeros(0, d.hidden_low);
    p.dec_p_high = GruParams::zeros(0, d.hidden_high);
    p.dec_p_low = GruParams::zeros(0, d.hidden_low);
    p.out_v_high = Linear::zeros(d.hidden_high, d.hidden_low);
    p.out_v_low = Linear::zeros(d.hidden_low, d.video_dim);
    p.out_p_high = Linear::zeros(d.hidden_high, d.hidden_low);
    p.out_p_low = Linear::zeros(d.hidden_low, d.text_dim);
    return p;
}

namespace {

template <class Named, class Gru>
void append_gru(Named& out, const std::string& prefix, Gru& g) {
    g.for_each([&](const char* name, auto& t) { out.emplace_back(prefix + "." + name, &t); });
}

template <class Named, class Lin>
void append_linear(Named& out, const std::string& prefix, Lin& l) {
    out.emplace_back(prefix + ".weight", &l.weight);
    out.emplace_back(prefix + ".bias", &l.bias);
}

template <class Named, class P>
Named hse_tensors(P& p) {
    Named out;
    append_gru(out, "enc_v_low", p.enc_v_low);
    append_gru(out, "enc_v_high", p.enc_v_high);
    append_gru(out, "enc_p_low", p.enc_p_low);
    append_gru(out, "enc_p_high", p.enc_p_high);
    append_gru(out, "dec_v_high", p.dec_v_high);
    append_gru(out, "dec_v_low", p.dec_v_low);
    append_gru(out, "dec_p_high", p.dec_p_high);
    append_gru(out, "dec_p_low", p.dec_p_low);
    append_linear(out, "out_v_high", p.out_v_high);
    append_linear(out, "out_v_low", p.out_v_low);
    append_linear(out, "out_p_high", p.out_p_high);
    append_linear(out, "out_p_low", p.out_p_low);
    return out;
}

template <class Named, class P>
Named flat_tensors(P& p) {
    Named out;
    append_gru(out, "enc_v", p.enc_v);
    append_gru(out, "enc_p", p.enc_p);
    return out;
}

template <class A, class B>
bool same_tensors(const A& a, const B& b) {
    const auto ta = a.tensors();
    const auto tb = b.tensors();
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i)
        if (ta[i].first != tb[i].first || !(*ta[i].second == *tb[i].second)) return false;
    return true;
}

}  // namespace

NamedTensors HseModelParams::tensors() { return hse_tensors<NamedTensors>(*this); }
ConstNamedTensors HseModelParams::tensors() const { return hse_tensors<ConstNamedTensors>(*this); }

FlatModelParams FlatModelParams::zeros(const ModelDims& d) {
    if (d.video_dim < 1 || d.text_dim < 1 || d.hidden_high < 1)
        throw ContractError("model dimensions must all be >= 1");
    FlatModelParams p;
    p.dims = d;
    p.dims.hidden_low = 0;  // no low level
    p.enc_v = GruParams::zeros(d.video_dim, d.hidden_high);
    p.enc_p = GruParams::zeros(d.text_dim, d.hidden_high);
    return p;
}

NamedTensors FlatModelParams::tensors() { return flat_tensors<NamedTensors>(*this); }
ConstNamedTensors FlatModelParams::tensors() const { return flat_tensors<ConstNamedTensors>(*this); }

bool operator==(const HseModelParams& a, const HseModelParams& b) {
    return a.dims == b.dims && same_tensors(a, b);
}

bool operator==(const FlatModelParams& a, const FlatModelParams& b) {
    return a.dims == b.dims && same_tensors(a, b);
}

// ---------------------------------------------------------------------------
// Binding

GruVars bind(Tape& tape, GruParams& p) {
    return GruVars{p.input_dim,        p.hidden_dim,       tape.input(p.w_z), tape.input(p.w_r),
                   tape.input(p.w_h),  tape.input(p.u_z),  tape.input(p.u_r), tape.input(p.u_h),
                   tape.input(p.b_z),  tape.input(p.b_r),  tape.input(p.b_h)};
}

LinearVars bind(Tape& tape, Linear& p) { return {tape.input(p.weight), tape.input(p.bias)}; }

GruVars bind_constant(Tape& tape, const GruParams& p) {
    return GruVars{p.input_dim,
                   p.hidden_dim,
                   tape.constant(p.w_z),
                   tape.constant(p.w_r),
                   tape.constant(p.w_h),
                   tape.constant(p.u_z),
                   tape.constant(p.u_r),
                   tape.constant(p.u_h),
                   tape.constant(p.b_z),
                   tape.constant(p.b_r),
                   tape.constant(p.b_h)};
}

LinearVars bind_constant(Tape& tape, const Linear& p) {
    return {tape.constant(p.weight), tape.constant(p.bias)};
}

HseVars bind(Tape& tape, HseModelParams& p) {
    return HseVars{bind(tape, p.enc_v_low),  bind(tape, p.enc_v_high), bind(tape, p.enc_p_low),
                   bind(tape, p.enc_p_high), bind(tape, p.dec_v_high), bind(tape, p.dec_v_low),
                   bind(tape, p.dec_p_high), bind(tape, p.dec_p_low),  bind(tape, p.out_v_high),
                   bind(tape, p.out_v_low),  bind(tape, p.out_p_high), bind(tape, p.out_p_low)};
}

HseVars bind_constant(Tape& tape, const HseModelParams& p) {
    return HseVars{bind_constant(tape, p.enc_v_low),  bind_constant(tape, p.enc_v_high),
                   bind_constant(tape, p.enc_p_low),  bind_constant(tape, p.enc_p_high),
                   bind_constant(tape, p.dec_v_high), bind_constant(tape, p.dec_v_low),
                   bind_constant(tape, p.dec_p_high), bind_constant(tape, p.dec_p_low),
                   bind_constant(tape, p.out_v_high), bind_constant(tape, p.out_v_low),
                   bind_constant(tape, p.out_p_high), bind_constant(tape, p.out_p_low)};
}

FlatVars bind(Tape& tape, FlatModelParams& p) { return {bind(tape, p.enc_v), bind(tape, p.enc_p)}; }

FlatVars bind_constant(Tape& tape, const FlatModelParams& p) {
    return {bind_constant(tape, p.enc_v), bind_constant(tape, p.enc_p)};
}

// ---------------------------------------------------------------------------
// Cells and encoders

namespace {

Var gate_input(const GruVars& g, Var w, Var u, Var b, Var x, Var h) {
    Var pre = tk::matmul(u, h);
    if (g.input_dim > 0) pre = tk::add(tk::matmul(w, x), pre);
    return tk::add(pre, b);
}

}  // namespace

Var gru_step(const GruVars& g, Var x, Var h) {
    if (x.shape() != tk::Shape{g.input_dim} || h.shape() != tk::Shape{g.hidden_dim}) {
        throw ShapeError("gru_step: expected x " + tk::to_string({g.input_dim}) + " and h " +
                         tk::to_string({g.hidden_dim}) + ", got " + tk::to_string(x.shape()) +
                         " and " + tk::to_string(h.shape()));
    }
    Var z = tk::sigmoid(gate_input(g, g.w_z, g.u_z, g.b_z, x, h));
    Var r = tk::sigmoid(gate_input(g, g.w_r, g.u_r, g.b_r, x, h));
    Var candidate = tk::tanh(gate_input(g, g.w_h, g.u_h, g.b_h, x, tk::mul(r, h)));
    Var keep = tk::add_scalar(tk::scale(z, -1.0), 1.0);
    return tk::add(tk::mul(keep, h), tk::mul(z, candidate));
}

Var apply(const LinearVars& l, Var h) { return tk::add(tk::matmul(l.weight, h), l.bias); }

SequenceEncoding encode_sequence(const GruVars& g, std::span<const Var> xs, std::optional<Var> h0) {
    if (xs.empty()) throw ContractError("encode_sequence: empty input sequence");
    Tape& tape = xs.front().tape();
    Var h = h0 ? *h0 : tape.constant(Tensor::zeros({g.hidden_dim}));
    std::vector<Var> states;
    states.reserve(xs.size());
    for (const Var& x : xs) {
        h = gru_step(g, x, h);
        states.push_back(h);
    }
    return {tk::max_over_axis(tk::stack(states), 0), h};
}

std::vector<Var> constants(Tape& tape, const data::FeatureSeq& seq) {
    std::vector<Var> out;
    out.reserve(seq.size());
    for (const auto& v : seq) out.push_back(tape.constant(Tensor::vector(v)));
    return out;
}

HierEncoding encode_hierarchical(const GruVars& low, const GruVars& high,
                                 std::span<const data::FeatureSeq> units,
                                 const EncoderOptions& options) {
    if (units.empty()) throw ContractError("encode_hierarchical: sample has no units");
    Tape& tape = low.w_z.tape();
    HierEncoding out;
    out.low.reserve(units.size());
    std::optional<Var> carry;
    for (const auto& unit : units) {
        if (unit.empty()) throw ContractError("encode_hierarchical: empty unit");
        const auto xs = constants(tape, unit);
        SequenceEncoding enc = encode_sequence(low, xs, options.carry_low_state ? carry : std::nullopt);
        carry = enc.last_hidden;
        out.low.push_back(enc.pooled);
    }
    out.high = encode_sequence(high, out.low).pooled;
    return out;
}

Var encode_flat(const GruVars& g, std::span<const data::FeatureSeq> units) {
    Tape& tape = g.w_z.tape();
    std::vector<Var> xs;
    for (const auto& unit : units)
        for (const auto& v : unit) xs.push_back(tape.constant(Tensor::vector(v)));
    return encode_sequence(g, xs).pooled;
}

Decoding decode_hierarchical(const GruVars& dec_high, const LinearVars& out_high,
                             const GruVars& dec_low, const LinearVars& out_low, Var high,
                             std::span<const std::size_t> counts) {
    if (counts.empty()) throw ContractError("decode_hierarchical: unit count must be >= 1");
    for (std::size_t c : counts)
        if (c == 0) throw ContractError("decode_hierarchical: every unit length must be >= 1");
    Tape& tape = high.tape();
    const Var high_input = tape.constant(Tensor::zeros({dec_high.input_dim}));
    const Var low_input = tape.constant(Tensor::zeros({dec_low.input_dim}));

    Decoding out;
    out.low.reserve(counts.size());
    out.leaves.reserve(counts.size());
    Var h = high;
    for (std::size_t count : counts) {
        h = gru_step(dec_high, high_input, h);
        Var unit = apply(out_high, h);
        out.low.push_back(unit);

        std::vector<Var> leaves;
        leaves.reserve(count);
        Var hl = unit;
        for (std::size_t j = 0; j < count; ++j) {
            hl = gru_step(dec_low, low_input, hl);
            leaves.push_back(apply(out_low, hl));
        }
        out.leaves.push_back(std::move(leaves));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Value-level API

void require_finite(const Tensor& t, const char* what) {
    for (double v : t.values)
        if (!std::isfinite(v)) throw NumericError(std::string(what) + " contains a non-finite value");
}

namespace {

std::vector<double> values_of(Var v) { return v.value().values; }

HierEmbedding to_embedding(const HierEncoding& enc) {
    HierEmbedding out;
    for (const Var& v : enc.low) {
        require_finite(v.value(), "low-level embedding");
        out.low.push_back(values_of(v));
    }
    require_finite(enc.high.value(), "high-level embedding");
    out.high = values_of(enc.high);
    return out;
}

DecodedSequence to_decoded(const Decoding& dec) {
    DecodedSequence out;
    for (const Var& v : dec.low) out.low.push_back(values_of(v));
    for (const auto& unit : dec.leaves) {
        data::FeatureSeq seq;
        for (const Var& v : unit) seq.push_back(values_of(v));
        out.leaves.push_back(std::move(seq));
    }
    return out;
}

}  // namespace

std::vector<double> gru_step(const GruParams& p, std::span<const double> x,
                             std::span<const double> h) {
    Tape tape;
    const GruVars g = bind_constant(tape, p);
    Var xv = tape.constant(Tensor::vector({x.begin(), x.end()}));
    Var hv = tape.constant(Tensor::vector({h.begin(), h.end()}));
    return values_of(gru_step(g, xv, hv));
}

std::vector<double> encode_sequence(const GruParams& p, const data::FeatureSeq& xs) {
    Tape tape;
    const GruVars g = bind_constant(tape, p);
    const auto vars = constants(tape, xs);
    return values_of(encode_sequence(g, vars).pooled);
}

std::vector<double> encode_flat(const GruParams& p, std::span<const data::FeatureSeq> units) {
    Tape tape;
    return values_of(encode_flat(bind_constant(tape, p), units));
}

HierEmbedding embed_video(const HseModelParams& p, const data::VideoSample& v,
                          const EncoderOptions& options) {
    Tape tape;
    return to_embedding(encode_hierarchical(bind_constant(tape, p.enc_v_low),
                                            bind_constant(tape, p.enc_v_high), v.clips, options));
}

HierEmbedding embed_paragraph(const HseModelParams& p, const data::ParagraphSample& s,
                              const EncoderOptions& options) {
    Tape tape;
    return to_embedding(encode_hierarchical(bind_constant(tape, p.enc_p_low),
                                            bind_constant(tape, p.enc_p_high), s.sentences,
                                            options));
}

DecodedSequence decode_video(const HseModelParams& p, std::span<const double> high,
                             std::span<const std::size_t> counts) {
    Tape tape;
    Var h = tape.constant(Tensor::vector({high.begin(), high.end()}));
    return to_decoded(decode_hierarchical(bind_constant(tape, p.dec_v_high),
                                          bind_constant(tape, p.out_v_high),
                                          bind_constant(tape, p.dec_v_low),
                                          bind_constant(tape, p.out_v_low), h, counts));
}

DecodedSequence decode_paragraph(const HseModelParams& p, std::span<const double> high,
                                 std::span<const std::size_t> counts) {
    Tape tape;
    Var h = tape.constant(Tensor::vector({high.begin(), high.end()}));
    return to_decoded(decode_hierarchical(bind_constant(tape, p.dec_p_high),
                                          bind_constant(tape, p.out_p_high),
                                          bind_constant(tape, p.dec_p_low),
                                          bind_constant(tape, p.out_p_low), h, counts));
}

}  // namespace hse::model
