#include "t1/codec.hpp"

#include <cmath>
#include <map>

#include "t1/rng.hpp"

namespace t1 {

std::shared_ptr<const std::vector<real_t>> orthonormal_basis(uint64_t seed, int64_t dim) {
    static std::map<std::pair<uint64_t, int64_t>, std::shared_ptr<const std::vector<real_t>>> cache;
    const auto key = std::make_pair(seed, dim);
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    Rng rng(seed);
    auto m = std::make_shared<std::vector<real_t>>(static_cast<size_t>(dim * dim));
    for (auto& v : *m) v = static_cast<real_t>(rng.normal());

    // Modified Gram-Schmidt with re-orthogonalization; rows end up orthonormal
    // to machine precision.
    real_t* a = m->data();
    for (int64_t k = 0; k < dim; ++k) {
        real_t* rk = a + k * dim;
        for (int pass = 0; pass < 2; ++pass) {
            for (int64_t p = 0; p < k; ++p) {
                const real_t* rp = a + p * dim;
                real_t proj = 0;
                for (int64_t j = 0; j < dim; ++j) proj += rk[j] * rp[j];
                for (int64_t j = 0; j < dim; ++j) rk[j] -= proj * rp[j];
            }
        }
        real_t norm = 0;
        for (int64_t j = 0; j < dim; ++j) norm += rk[j] * rk[j];
        norm = std::sqrt(norm);
        if (!(norm > real_t(1e-8))) throw NumericError("orthonormal_basis: degenerate draw");
        const real_t inv = real_t(1) / norm;
        for (int64_t j = 0; j < dim; ++j) rk[j] *= inv;
    }
    cache.emplace(key, m);
    return m;
}

PatchCodec::PatchCodec(const FieldSpec& spec, const PatchCodecConfig& cfg) : spec_(spec), cfg_(cfg) {
    spec_.validate();
    if (cfg.patch < 1) throw ShapeError("PatchCodec: patch size < 1");
    if (spec.view_height % cfg.patch != 0 || spec.view_width % cfg.patch != 0) {
        throw ShapeError(strf("PatchCodec: %lldx%lld view not divisible by patch %lld",
                              (long long)spec.view_height, (long long)spec.view_width,
                              (long long)cfg.patch));
    }
    rows_ = spec.view_height / cfg.patch;
    cols_ = spec.view_width / cfg.patch;
    flat_dim_ = cfg.patch * cfg.patch * spec.signal_dim;
    token_dim_ = cfg.token_dim == 0 ? flat_dim_ : cfg.token_dim;
    if (cfg.mode == CodecMode::raw && token_dim_ != flat_dim_) {
        throw ShapeError(strf("PatchCodec: raw mode needs token_dim %lld (or 0), got %lld",
                              (long long)flat_dim_, (long long)token_dim_));
    }
    if (token_dim_ < 1 || token_dim_ > flat_dim_) {
        throw ShapeError(strf("PatchCodec: token_dim %lld outside [1,%lld]",
                              (long long)token_dim_, (long long)flat_dim_));
    }
    basis_ = orthonormal_basis(cfg.seed, flat_dim_);
}

TokenGrid PatchCodec::encode(const View& view) const {
    if (static_cast<int64_t>(view.pixels.size()) != spec_.channels_per_view()) {
        throw ShapeError(strf("PatchCodec::encode: view has %zu channel values, expected %lld",
                              view.pixels.size(), (long long)spec_.channels_per_view()));
    }
    const int64_t P = cfg_.patch, W = spec_.view_width, C = spec_.signal_dim;
    TokenGrid grid;
    grid.rows = rows_;
    grid.cols = cols_;
    grid.dim = token_dim_;
    grid.tokens.resize(static_cast<size_t>(rows_ * cols_ * token_dim_));
    std::vector<real_t> flat(static_cast<size_t>(flat_dim_));
    for (int64_t pr = 0; pr < rows_; ++pr) {
        for (int64_t pc = 0; pc < cols_; ++pc) {
            for (int64_t pi = 0; pi < P; ++pi) {
                const real_t* src = view.pixels.data() + (((pr * P + pi) * W) + pc * P) * C;
                std::copy_n(src, P * C, flat.data() + pi * P * C);
            }
            real_t* tok = grid.tokens.data() + (pr * cols_ + pc) * token_dim_;
            const real_t* b = basis_->data();
            for (int64_t d = 0; d < token_dim_; ++d) {
                const real_t* row = b + d * flat_dim_;
                real_t acc = 0;
                for (int64_t j = 0; j < flat_dim_; ++j) acc += row[j] * flat[static_cast<size_t>(j)];
                tok[d] = acc;
            }
        }
    }
    return grid;
}

std::vector<real_t> PatchCodec::decode(const TokenGrid& grid) const {
    if (grid.rows != rows_ || grid.cols != cols_ || grid.dim != token_dim_ ||
        static_cast<int64_t>(grid.tokens.size()) != rows_ * cols_ * token_dim_) {
        throw ShapeError("PatchCodec::decode: token grid does not match codec layout");
    }
    const int64_t P = cfg_.patch, W = spec_.view_width, C = spec_.signal_dim;
    std::vector<real_t> pixels(static_cast<size_t>(spec_.channels_per_view()), real_t(0));
    std::vector<real_t> flat(static_cast<size_t>(flat_dim_));
    for (int64_t pr = 0; pr < rows_; ++pr) {
        for (int64_t pc = 0; pc < cols_; ++pc) {
            const real_t* tok = grid.tokens.data() + (pr * cols_ + pc) * token_dim_;
            std::fill(flat.begin(), flat.end(), real_t(0));
            const real_t* b = basis_->data();
            for (int64_t d = 0; d < token_dim_; ++d) {
                const real_t* row = b + d * flat_dim_;
                const real_t t = tok[d];
                for (int64_t j = 0; j < flat_dim_; ++j) flat[static_cast<size_t>(j)] += t * row[j];
            }
            for (int64_t pi = 0; pi < P; ++pi) {
                real_t* dst = pixels.data() + (((pr * P + pi) * W) + pc * P) * C;
                std::copy_n(flat.data() + pi * P * C, P * C, dst);
            }
        }
    }
    return pixels;
}

std::vector<double> PatchCodec::token_coordinates(const std::vector<double>& view_coord) const {
    if (static_cast<int64_t>(view_coord.size()) != spec_.view_dim()) {
        throw ShapeError("PatchCodec::token_coordinates: view_coord size mismatch");
    }
    const int64_t D = spec_.metric_dim, P = cfg_.patch;
    std::vector<double> out(static_cast<size_t>(rows_ * cols_ * D));
    for (int64_t pr = 0; pr < rows_; ++pr) {
        for (int64_t pc = 0; pc < cols_; ++pc) {
            double* m = out.data() + (pr * cols_ + pc) * D;
            for (int64_t k = 0; k < spec_.view_dim(); ++k) m[k] = view_coord[static_cast<size_t>(k)];
            m[D - 2] = (static_cast<double>(pr * P) + static_cast<double>(P) / 2.0) /
                       static_cast<double>(spec_.view_height);
            m[D - 1] = (static_cast<double>(pc * P) + static_cast<double>(P) / 2.0) /
                       static_cast<double>(spec_.view_width);
        }
    }
    return out;
}

}  // namespace t1
