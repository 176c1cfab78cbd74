#pragma once

#include <string>
#include <vector>

#include "t1/tensor.hpp"

namespace t1 {

// A field maps metric-space coordinates in [0,1]^metric_dim to signal_dim
// channel values in [-1,1]. Views are axis-aligned H x W rasters; the first
// metric_dim - 2 coordinate components are shared by every pixel of a view,
// the trailing two are the image row/column positions.
struct FieldSpec {
    int64_t metric_dim = 3;
    int64_t signal_dim = 3;
    int64_t view_height = 16;
    int64_t view_width = 16;
    int64_t num_views = 8;

    int64_t view_dim() const { return metric_dim - 2; }
    int64_t pixels_per_view() const { return view_height * view_width; }
    int64_t channels_per_view() const { return pixels_per_view() * signal_dim; }
    void validate() const;
    bool operator==(const FieldSpec&) const = default;
};

struct View {
    std::vector<double> view_coord;  // [view_dim], components in [0,1]
    std::vector<real_t> pixels;      // [H*W*signal_dim] row-major, channel minor
};

struct FieldSample {
    FieldSpec spec;
    std::vector<View> views;
    std::string caption;
};

// Per-pixel coordinates for one view: [H*W, metric_dim] row-major, pixel
// centers at (i + 0.5) / extent.
std::vector<double> grid_coordinates(const FieldSpec& spec, const std::vector<double>& view_coord);

// Frequency features: per coordinate axis, [sin(2^j pi m), cos(2^j pi m)]
// for j = 0..num_freqs-1. Output [rows, dim * 2 * num_freqs].
Tensor embed_coordinates(const std::vector<double>& coords, int64_t rows, int64_t dim,
                         int64_t num_freqs = 10);

// Sinusoidal timestep features, [1, dim]: sin block then cos block,
// frequencies 10000^(-k/half) so the first frequency is 1.
Tensor embed_timestep(int64_t t, int64_t dim = 256);

}  // namespace t1
