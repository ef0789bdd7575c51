#include "hse/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "hse/errors.hpp"

namespace hse::ckpt {

namespace {

constexpr std::array<char, 4> kMagic = {'H', 'S', 'E', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(bytes, 4);
}

void put_f64(std::ostream& out, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(bytes, 8);
}

void get_bytes(std::istream& in, char* dst, std::size_t n) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError("checkpoint truncated");
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    get_bytes(in, reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& in) {
    unsigned char b[8];
    get_bytes(in, reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

struct Header {
    std::uint32_t video_dim = 0, text_dim = 0, hidden_low = 0, hidden_high = 0, embed_dim = 0;
};

void write_header(std::ostream& out, const Header& h) {
    out.write(kMagic.data(), kMagic.size());
    for (std::uint32_t v : {h.video_dim, h.text_dim, h.hidden_low, h.hidden_high, h.embed_dim})
        put_u32(out, v);
}

Header read_header(std::istream& in) {
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (in.gcount() != 4 || magic != kMagic) throw FormatError("not a checkpoint (bad magic bytes)");
    Header h;
    h.video_dim = get_u32(in);
    h.text_dim = get_u32(in);
    h.hidden_low = get_u32(in);
    h.hidden_high = get_u32(in);
    h.embed_dim = get_u32(in);
    return h;
}

template <class Named>
void write_tensors(std::ostream& out, const Named& tensors) {
    for (const auto& [name, t] : tensors) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<std::uint32_t>(t->rank()));
        for (std::size_t d : t->shape) put_u32(out, static_cast<std::uint32_t>(d));
        for (double v : t->values) put_f64(out, v);
    }
    if (!out) throw std::runtime_error("checkpoint write failed");
}

void read_tensors(std::istream& in, const model::NamedTensors& expected) {
    for (const auto& [name, t] : expected) {
        const std::uint32_t len = get_u32(in);
        if (len > 4096) throw FormatError("implausible tensor name length");
        std::string got(len, '\0');
        get_bytes(in, got.data(), len);
        if (got != name) throw FormatError("expected tensor '" + name + "', found '" + got + "'");
        const std::uint32_t rank = get_u32(in);
        tk::Shape shape(rank);
        for (auto& d : shape) d = get_u32(in);
        if (shape != t->shape) {
            throw FormatError("tensor '" + name + "' has shape " + tk::to_string(shape) +
                              ", header implies " + tk::to_string(t->shape));
        }
        for (double& v : t->values) v = get_f64(in);
    }
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after last tensor");
}

model::ModelDims dims_from(const Header& h) {
    model::ModelDims d{h.video_dim, h.text_dim, h.hidden_low, h.hidden_high};
    if (h.embed_dim != h.hidden_high) throw FormatError("embed_dim must equal hidden_high");
    return d;
}

}  // namespace

void write_checkpoint(std::ostream& out, const model::HseModelParams& p) {
    const auto& d = p.dims;
    write_header(out, {static_cast<std::uint32_t>(d.video_dim), static_cast<std::uint32_t>(d.text_dim),
                       static_cast<std::uint32_t>(d.hidden_low),
                       static_cast<std::uint32_t>(d.hidden_high),
                       static_cast<std::uint32_t>(d.embed_dim())});
    write_tensors(out, p.tensors());
}

void write_checkpoint(std::ostream& out, const model::FlatModelParams& p) {
    const auto& d = p.dims;
    write_header(out, {static_cast<std::uint32_t>(d.video_dim), static_cast<std::uint32_t>(d.text_dim),
                       0u, static_cast<std::uint32_t>(d.hidden_high),
                       static_cast<std::uint32_t>(d.embed_dim())});
    write_tensors(out, p.tensors());
}

model::HseModelParams read_checkpoint(std::istream& in) {
    const Header h = read_header(in);
    if (h.hidden_low == 0) throw FormatError("flat-model checkpoint where a hierarchical one is expected");
    model::ModelDims dims = dims_from(h);
    model::HseModelParams p;
    try {
        p = model::HseModelParams::zeros(dims);
    } catch (const ContractError& e) {
        throw FormatError(std::string("bad dimension header: ") + e.what());
    }
    read_tensors(in, p.tensors());
    return p;
}

model::FlatModelParams read_flat_checkpoint(std::istream& in) {
    const Header h = read_header(in);
    if (h.hidden_low != 0) throw FormatError("hierarchical checkpoint where a flat one is expected");
    model::ModelDims dims = dims_from(h);
    model::FlatModelParams p;
    try {
        p = model::FlatModelParams::zeros(dims);
    } catch (const ContractError& e) {
        throw FormatError(std::string("bad dimension header: ") + e.what());
    }
    read_tensors(in, p.tensors());
    return p;
}

namespace {

template <class P>
void save(const P& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    write_checkpoint(out, params);
}

std::ifstream open(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
    return in;
}

}  // namespace

void save_checkpoint(const model::HseModelParams& params, const std::filesystem::path& path) {
    save(params, path);
}

void save_checkpoint(const model::FlatModelParams& params, const std::filesystem::path& path) {
    save(params, path);
}

model::HseModelParams load_checkpoint(const std::filesystem::path& path) {
    auto in = open(path);
    return read_checkpoint(in);
}

model::FlatModelParams load_flat_checkpoint(const std::filesystem::path& path) {
    auto in = open(path);
    return read_flat_checkpoint(in);
}

ModelKind peek_kind(const std::filesystem::path& path) {
    auto in = open(path);
    return read_header(in).hidden_low == 0 ? ModelKind::flat : ModelKind::hierarchical;
}

}  // namespace hse::ckpt
