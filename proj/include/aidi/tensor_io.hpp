#pragma once

// Plain tensor files.
//
// Text:   line 1 "shape: d1 d2 ...", then whitespace-separated decimal reals
//         in row-major order ('#' starts a comment).
// Binary: 8-byte magic "AIDIF32\0", uint32 rank, rank x uint64 dims, then
//         float32 values; all little-endian.
//
// Predictor files are a "predictor: <kind>" header, optional "key: value"
// lines and named tensors, each introduced by "tensor: <name>" and followed by
// a text tensor block.

#include "aidi/guidance.hpp"
#include "aidi/latent.hpp"
#include "aidi/predictor.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>

namespace aidi {

Latent read_tensor_text(std::istream& in);
void write_tensor_text(const Latent& t, std::ostream& out);

Latent read_tensor_binary(std::istream& in);
void write_tensor_binary(const Latent& t, std::ostream& out);

/// Detects the binary magic, falls back to text.
Latent load_tensor(const std::filesystem::path& path);
void save_tensor(const Latent& t, const std::filesystem::path& path, bool binary = false);

/// A 2-D tensor (or a 1-D one, read as a single row).
AttentionMap load_attention(const std::filesystem::path& path);

std::unique_ptr<NoisePredictor> read_predictor(std::istream& in);
std::unique_ptr<NoisePredictor> load_predictor(const std::filesystem::path& path);

/// Supports every toy predictor kind.
void write_predictor(const NoisePredictor& pred, std::ostream& out);
void save_predictor(const NoisePredictor& pred, const std::filesystem::path& path);

}  // namespace aidi
