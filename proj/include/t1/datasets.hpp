#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "t1/field.hpp"
#include "t1/rng.hpp"

namespace t1 {

enum class ToyColor { red, green, blue };
enum class ToyMotion { left_right, top_bottom };

const char* toy_color_name(ToyColor c);
const char* toy_motion_name(ToyMotion m);  // "left to right" / "top to bottom"
std::string toy_caption(ToyColor c, ToyMotion m);

// A saturated square on a black background, moving linearly across the
// frames. frames == 1 degrades to a still image field (no view coordinate).
struct ToyVideoSpec {
    int64_t height = 16, width = 16;
    int64_t frames = 8;
    int64_t square = 6;
    ToyColor color = ToyColor::red;
    ToyMotion motion = ToyMotion::left_right;
};

// The motion axis advances round(i * (extent - square) / (frames - 1)); the
// transverse offset is one seeded draw, fixed for the whole field.
FieldSample gen_toy_video(const ToyVideoSpec& spec, uint64_t seed);

// Every color x motion combination, offsets_per_class seeded transverse
// offsets each. Deterministic order: (color, motion, offset index).
std::vector<FieldSample> gen_toy_video_set(const ToyVideoSpec& dims, int64_t offsets_per_class,
                                           uint64_t seed);

// Flat-shaded cube on an azimuth ring, rendered back-to-front. The 4-vector
// view coordinate is (azimuth/2pi, (elevation+pi/2)/pi, radius/10, focal/4).
struct ToyViewsSpec {
    int64_t height = 16, width = 16;
    int64_t views = 16;
    ToyColor color = ToyColor::red;
    double camera_radius = 3.0;
    double elevation = 0.42;
    double focal = 1.4;
};

// masks, when given, receives one H*W byte mask per view (1 = object).
FieldSample gen_toy_views(const ToyViewsSpec& spec, uint64_t seed,
                          std::vector<std::vector<uint8_t>>* masks = nullptr);

// Fills mask==0 pixels with draws from N(0, sigma) clamped to [-1,1], in the
// normalized signal space; mask==1 pixels pass through bitwise. The mask is
// per pixel (H*W), covering every channel of that pixel.
View prefill_blank(const FieldSpec& spec, const View& view, const std::vector<uint8_t>& mask,
                   double sigma, Rng& rng);

// Resets mask==0 pixels to the background value; the inverse of
// prefill_blank on a clean render.
View postprocess_mask(const FieldSpec& spec, const View& view, const std::vector<uint8_t>& mask,
                      real_t background = real_t(-1));

// Manifest: one view per line, `relative_image_path, v1,...,v_dv, caption`.
// Consecutive lines sharing a caption form one field. Sources of >= 128 views
// are subsampled to 128 by floor(i * T_src / 128); after that, a field must
// have exactly spec.num_views views or it is skipped with a warning.
struct ManifestReport {
    int64_t records = 0;
    int64_t fields = 0;
    int64_t skipped_records = 0;
    int64_t skipped_fields = 0;
    std::vector<std::string> warnings;
};

class ManifestDataset {
  public:
    struct Record {
        std::string image_path;  // resolved against the manifest directory
        std::vector<double> view_coord;
    };

    int64_t size() const { return static_cast<int64_t>(fields_.size()); }
    const std::string& caption(int64_t idx) const;
    FieldSample load(int64_t idx) const;  // reads the image files now
    // One mask per view from `<image>.mask.pgm` sidecars; a view with no
    // sidecar gets an empty vector.
    std::vector<std::vector<uint8_t>> load_masks(int64_t idx) const;

  private:
    friend ManifestDataset ingest_manifest(const std::string&, const FieldSpec&, ManifestReport*);
    struct FieldEntry {
        std::string caption;
        std::vector<Record> records;
    };
    FieldSpec spec_;
    std::vector<FieldEntry> fields_;
};

ManifestDataset ingest_manifest(const std::string& path, const FieldSpec& spec,
                                ManifestReport* report = nullptr);

std::vector<FieldSample> load_all(const ManifestDataset& ds);

}  // namespace t1
