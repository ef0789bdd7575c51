#pragma once

// Binary checkpoints.
//
//   magic        4 bytes  "HSE1"
//   header       5 x int32 LE: video_dim, text_dim, hidden_low, hidden_high, embed_dim
//   tensors      in HseModelParams::tensors() order (FlatModelParams::tensors()
//                for flat checkpoints, which carry hidden_low == 0), each as
//                  uint32 LE name length, name bytes,
//                  uint32 LE rank, rank x uint32 LE dims,
//                  product(dims) x float64 LE values
//
// The file ends right after the last tensor.

#include <filesystem>
#include <iosfwd>

#include "hse/model.hpp"

namespace hse::ckpt {

enum class ModelKind { hierarchical, flat };

void write_checkpoint(std::ostream& out, const model::HseModelParams& params);
void write_checkpoint(std::ostream& out, const model::FlatModelParams& params);
void save_checkpoint(const model::HseModelParams& params, const std::filesystem::path& path);
void save_checkpoint(const model::FlatModelParams& params, const std::filesystem::path& path);

/// Throws FormatError on bad magic, header/tensor mismatch, truncation, or trailing bytes.
model::HseModelParams read_checkpoint(std::istream& in);
model::FlatModelParams read_flat_checkpoint(std::istream& in);
model::HseModelParams load_checkpoint(const std::filesystem::path& path);
model::FlatModelParams load_flat_checkpoint(const std::filesystem::path& path);

/// Reads only the magic and header to tell the two layouts apart.
ModelKind peek_kind(const std::filesystem::path& path);

}  // namespace hse::ckpt
