#pragma once

#include "t1/field.hpp"

namespace t1 {

enum class CodecMode { raw, learned };

struct PatchCodecConfig {
    int64_t patch = 16;
    CodecMode mode = CodecMode::raw;
    // 0 picks the mode default: raw pins patch*patch*signal_dim (the codec is
    // then an orthonormal change of basis and decode is exact), learned keeps
    // the same default but may be set lower for lossy compression.
    int64_t token_dim = 0;
    uint64_t seed = 7;
};

struct TokenGrid {
    int64_t rows = 0;
    int64_t cols = 0;
    int64_t dim = 0;
    std::vector<real_t> tokens;  // [rows*cols, dim] row-major over patches

    int64_t count() const { return rows * cols; }
};

// Per-view patch tokenizer. Each patch is flattened row-major channel-minor
// and mapped through a seeded orthonormal basis; token order is patch
// row-major. Raw mode is bijective, learned mode keeps the leading token_dim
// basis vectors and decodes through their transpose.
class PatchCodec {
  public:
    PatchCodec(const FieldSpec& spec, const PatchCodecConfig& cfg);

    int64_t token_dim() const { return token_dim_; }
    int64_t token_rows() const { return rows_; }
    int64_t token_cols() const { return cols_; }
    int64_t tokens_per_view() const { return rows_ * cols_; }
    int64_t flat_dim() const { return flat_dim_; }
    const PatchCodecConfig& config() const { return cfg_; }

    TokenGrid encode(const View& view) const;
    std::vector<real_t> decode(const TokenGrid& grid) const;

    // Patch-center coordinates (same convention as grid_coordinates):
    // [tokens_per_view, metric_dim] row-major.
    std::vector<double> token_coordinates(const std::vector<double>& view_coord) const;

  private:
    FieldSpec spec_;
    PatchCodecConfig cfg_;
    int64_t rows_, cols_, flat_dim_, token_dim_;
    std::shared_ptr<const std::vector<real_t>> basis_;  // [flat_dim, flat_dim] orthonormal rows
};

// Seeded orthonormal basis, cached per (seed, dim). Rows are orthonormal to
// within 1e-10.
std::shared_ptr<const std::vector<real_t>> orthonormal_basis(uint64_t seed, int64_t dim);

}  // namespace t1
