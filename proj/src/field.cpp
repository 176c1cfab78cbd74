#include "t1/field.hpp"

#include <cmath>

namespace t1 {

void FieldSpec::validate() const {
    if (metric_dim < 2) throw ShapeError(strf("FieldSpec: metric_dim %lld < 2", (long long)metric_dim));
    if (signal_dim < 1) throw ShapeError("FieldSpec: signal_dim < 1");
    if (view_height < 1 || view_width < 1) throw ShapeError("FieldSpec: empty view raster");
    if (num_views < 1) throw ShapeError("FieldSpec: num_views < 1");
}

std::vector<double> grid_coordinates(const FieldSpec& spec, const std::vector<double>& view_coord) {
    spec.validate();
    if (static_cast<int64_t>(view_coord.size()) != spec.view_dim()) {
        throw ShapeError(strf("grid_coordinates: view_coord has %zu components, expected %lld",
                              view_coord.size(), (long long)spec.view_dim()));
    }
    const int64_t H = spec.view_height, W = spec.view_width, D = spec.metric_dim;
    std::vector<double> out(static_cast<size_t>(H * W * D));
    for (int64_t i = 0; i < H; ++i) {
        for (int64_t j = 0; j < W; ++j) {
            double* m = out.data() + (i * W + j) * D;
            for (int64_t k = 0; k < spec.view_dim(); ++k) m[k] = view_coord[static_cast<size_t>(k)];
            m[D - 2] = (static_cast<double>(i) + 0.5) / static_cast<double>(H);
            m[D - 1] = (static_cast<double>(j) + 0.5) / static_cast<double>(W);
        }
    }
    return out;
}

Tensor embed_coordinates(const std::vector<double>& coords, int64_t rows, int64_t dim,
                         int64_t num_freqs) {
    if (rows < 1 || dim < 1 || num_freqs < 1) throw ShapeError("embed_coordinates: bad sizes");
    if (static_cast<int64_t>(coords.size()) != rows * dim) {
        throw ShapeError(strf("embed_coordinates: %zu values do not fill [%lld,%lld]",
                              coords.size(), (long long)rows, (long long)dim));
    }
    const int64_t out_dim = dim * 2 * num_freqs;
    std::vector<real_t> out(static_cast<size_t>(rows * out_dim));
    for (int64_t r = 0; r < rows; ++r) {
        real_t* dst = out.data() + r * out_dim;
        for (int64_t k = 0; k < dim; ++k) {
            const double m = coords[static_cast<size_t>(r * dim + k)];
            double scaled = M_PI * m;
            for (int64_t j = 0; j < num_freqs; ++j) {
                dst[k * 2 * num_freqs + 2 * j] = static_cast<real_t>(std::sin(scaled));
                dst[k * 2 * num_freqs + 2 * j + 1] = static_cast<real_t>(std::cos(scaled));
                scaled *= 2.0;
            }
        }
    }
    return Tensor::from_vector({rows, out_dim}, std::move(out));
}

Tensor embed_timestep(int64_t t, int64_t dim) {
    if (dim < 2 || dim % 2 != 0) throw ShapeError("embed_timestep: dim must be even and >= 2");
    const int64_t half = dim / 2;
    std::vector<real_t> out(static_cast<size_t>(dim));
    for (int64_t k = 0; k < half; ++k) {
        const double freq = std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(half));
        const double arg = static_cast<double>(t) * freq;
        out[static_cast<size_t>(k)] = static_cast<real_t>(std::sin(arg));
        out[static_cast<size_t>(half + k)] = static_cast<real_t>(std::cos(arg));
    }
    return Tensor::from_vector({1, dim}, std::move(out));
}

}  // namespace t1
