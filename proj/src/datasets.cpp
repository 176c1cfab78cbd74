#include "t1/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "t1/common.hpp"
#include "t1/image_io.hpp"

namespace t1 {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Vec3 {
    double x, y, z;
};

Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
Vec3 cross(Vec3 a, Vec3 b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
Vec3 normalize(Vec3 a) {
    const double n = std::sqrt(dot(a, a));
    return {a.x / n, a.y / n, a.z / n};
}

std::array<double, 3> color_base01(ToyColor c) {
    switch (c) {
        case ToyColor::red: return {1, 0, 0};
        case ToyColor::green: return {0, 1, 0};
        case ToyColor::blue: return {0, 0, 1};
    }
    throw Error("color_base01: bad enum");
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

const char* toy_color_name(ToyColor c) {
    switch (c) {
        case ToyColor::red: return "red";
        case ToyColor::green: return "green";
        case ToyColor::blue: return "blue";
    }
    throw Error("toy_color_name: bad enum");
}

const char* toy_motion_name(ToyMotion m) {
    switch (m) {
        case ToyMotion::left_right: return "left to right";
        case ToyMotion::top_bottom: return "top to bottom";
    }
    throw Error("toy_motion_name: bad enum");
}

std::string toy_caption(ToyColor c, ToyMotion m) {
    return strf("a %s square moving %s", toy_color_name(c), toy_motion_name(m));
}

FieldSample gen_toy_video(const ToyVideoSpec& spec, uint64_t seed) {
    if (spec.height < 1 || spec.width < 1 || spec.frames < 1) {
        throw ShapeError("gen_toy_video: non-positive dimensions");
    }
    if (spec.square < 1 || spec.square > spec.height || spec.square > spec.width) {
        throw ShapeError(strf("gen_toy_video: square %lld does not fit in %lldx%lld",
                              (long long)spec.square, (long long)spec.height,
                              (long long)spec.width));
    }

    FieldSample out;
    out.spec = {.metric_dim = spec.frames == 1 ? 2 : 3,
                .signal_dim = 3,
                .view_height = spec.height,
                .view_width = spec.width,
                .num_views = spec.frames};
    out.caption = toy_caption(spec.color, spec.motion);

    const bool horizontal = spec.motion == ToyMotion::left_right;
    const int64_t travel_extent = (horizontal ? spec.width : spec.height) - spec.square;
    const int64_t cross_extent = (horizontal ? spec.height : spec.width) - spec.square;
    Rng rng(splitmix64(seed ^ fnv1a64("toy-video")));
    const int64_t cross_off =
        cross_extent > 0
            ? static_cast<int64_t>(rng.randint(static_cast<uint64_t>(cross_extent + 1)))
            : 0;

    const auto base = color_base01(spec.color);
    for (int64_t f = 0; f < spec.frames; ++f) {
        View v;
        if (spec.frames > 1) {
            v.view_coord = {(static_cast<double>(f) + 0.5) / static_cast<double>(spec.frames)};
        }
        v.pixels.assign(static_cast<size_t>(out.spec.channels_per_view()), real_t(-1));
        const int64_t travel_off =
            spec.frames > 1
                ? static_cast<int64_t>(std::llround(static_cast<double>(f * travel_extent) /
                                                    static_cast<double>(spec.frames - 1)))
                : travel_extent / 2;
        const int64_t r0 = horizontal ? cross_off : travel_off;
        const int64_t c0 = horizontal ? travel_off : cross_off;
        for (int64_t r = r0; r < r0 + spec.square; ++r) {
            for (int64_t c = c0; c < c0 + spec.square; ++c) {
                for (int64_t ch = 0; ch < 3; ++ch) {
                    v.pixels[static_cast<size_t>((r * spec.width + c) * 3 + ch)] =
                        static_cast<real_t>(base[static_cast<size_t>(ch)] * 2.0 - 1.0);
                }
            }
        }
        out.views.push_back(std::move(v));
    }
    return out;
}

std::vector<FieldSample> gen_toy_video_set(const ToyVideoSpec& dims, int64_t offsets_per_class,
                                           uint64_t seed) {
    if (offsets_per_class < 1) throw ShapeError("gen_toy_video_set: offsets_per_class < 1");
    std::vector<FieldSample> out;
    uint64_t k = 0;
    for (ToyColor c : {ToyColor::red, ToyColor::green, ToyColor::blue}) {
        for (ToyMotion m : {ToyMotion::left_right, ToyMotion::top_bottom}) {
            for (int64_t i = 0; i < offsets_per_class; ++i, ++k) {
                ToyVideoSpec s = dims;
                s.color = c;
                s.motion = m;
                out.push_back(gen_toy_video(s, splitmix64(seed + k)));
            }
        }
    }
    return out;
}

FieldSample gen_toy_views(const ToyViewsSpec& spec, uint64_t seed,
                          std::vector<std::vector<uint8_t>>* masks) {
    if (spec.height < 1 || spec.width < 1 || spec.views < 1) {
        throw ShapeError("gen_toy_views: non-positive dimensions");
    }
    Rng rng(splitmix64(seed ^ fnv1a64("toy-views")));
    const double elevation = spec.elevation + (rng.uniform() - 0.5) * 0.08;
    const double radius = spec.camera_radius + (rng.uniform() - 0.5) * 0.3;

    FieldSample out;
    out.spec = {.metric_dim = 6,
                .signal_dim = 3,
                .view_height = spec.height,
                .view_width = spec.width,
                .num_views = spec.views};
    out.caption = strf("a %s cube", toy_color_name(spec.color));
    if (masks) masks->clear();

    // Unit cube faces, outward normals, with a flat per-face brightness.
    static const std::array<std::array<Vec3, 4>, 6> faces = {{
        {{{1, -1, -1}, {1, 1, -1}, {1, 1, 1}, {1, -1, 1}}},      // +x
        {{{-1, 1, -1}, {-1, -1, -1}, {-1, -1, 1}, {-1, 1, 1}}},  // -x
        {{{1, 1, -1}, {-1, 1, -1}, {-1, 1, 1}, {1, 1, 1}}},      // +y
        {{{-1, -1, -1}, {1, -1, -1}, {1, -1, 1}, {-1, -1, 1}}},  // -y
        {{{-1, -1, 1}, {1, -1, 1}, {1, 1, 1}, {-1, 1, 1}}},      // +z
        {{{1, -1, -1}, {-1, -1, -1}, {-1, 1, -1}, {1, 1, -1}}},  // -z
    }};
    static const std::array<double, 6> shade = {1.0, 0.55, 0.85, 0.4, 0.7, 0.25};

    const auto base = color_base01(spec.color);
    for (int64_t k = 0; k < spec.views; ++k) {
        const double azimuth =
            2.0 * kPi * static_cast<double>(k) / static_cast<double>(spec.views);
        const Vec3 eye = {radius * std::cos(elevation) * std::cos(azimuth),
                          radius * std::cos(elevation) * std::sin(azimuth),
                          radius * std::sin(elevation)};
        const Vec3 fwd = normalize(eye * -1.0);
        const Vec3 right = normalize(cross(fwd, Vec3{0, 0, 1}));
        const Vec3 up = cross(right, fwd);

        View v;
        v.view_coord = {azimuth / (2.0 * kPi), (elevation + kPi / 2.0) / kPi, radius / 10.0,
                        spec.focal / 4.0};
        v.pixels.assign(static_cast<size_t>(out.spec.channels_per_view()), real_t(-1));
        std::vector<uint8_t> mask(static_cast<size_t>(out.spec.pixels_per_view()), 0);

        // Project all faces, then paint far-to-near.
        struct ProjFace {
            std::array<double, 8> xy;  // 4 corners
            double depth;
            int face;
        };
        std::vector<ProjFace> projected;
        for (int f = 0; f < 6; ++f) {
            ProjFace pf;
            pf.face = f;
            double depth_sum = 0;
            for (int c = 0; c < 4; ++c) {
                const Vec3 d = faces[static_cast<size_t>(f)][static_cast<size_t>(c)] - eye;
                const double zc = dot(d, fwd);
                depth_sum += zc;
                const double u = spec.focal * dot(d, right) / zc;
                const double w = spec.focal * dot(d, up) / zc;
                pf.xy[static_cast<size_t>(2 * c)] = (u * 0.5 + 0.5) * static_cast<double>(spec.width);
                pf.xy[static_cast<size_t>(2 * c + 1)] =
                    (0.5 - w * 0.5) * static_cast<double>(spec.height);
            }
            pf.depth = depth_sum;
            projected.push_back(pf);
        }
        std::stable_sort(projected.begin(), projected.end(),
                         [](const ProjFace& a, const ProjFace& b) { return a.depth > b.depth; });

        for (const ProjFace& pf : projected) {
            // Normalize the projected quad to counter-clockwise so boundary
            // inclusion (cross >= 0) is mirror-invariant.
            std::array<double, 8> q = pf.xy;
            double area2 = 0;
            for (int c = 0; c < 4; ++c) {
                const int nx = (c + 1) % 4;
                area2 += q[static_cast<size_t>(2 * c)] * q[static_cast<size_t>(2 * nx + 1)] -
                         q[static_cast<size_t>(2 * nx)] * q[static_cast<size_t>(2 * c + 1)];
            }
            if (area2 < 0) {
                std::swap(q[2], q[6]);
                std::swap(q[3], q[7]);
            }
            double min_x = q[0], max_x = q[0], min_y = q[1], max_y = q[1];
            for (int c = 1; c < 4; ++c) {
                min_x = std::min(min_x, q[static_cast<size_t>(2 * c)]);
                max_x = std::max(max_x, q[static_cast<size_t>(2 * c)]);
                min_y = std::min(min_y, q[static_cast<size_t>(2 * c + 1)]);
                max_y = std::max(max_y, q[static_cast<size_t>(2 * c + 1)]);
            }
            const int64_t r_lo = std::max<int64_t>(0, static_cast<int64_t>(std::floor(min_y - 0.5)));
            const int64_t r_hi =
                std::min<int64_t>(spec.height - 1, static_cast<int64_t>(std::ceil(max_y)));
            const int64_t c_lo = std::max<int64_t>(0, static_cast<int64_t>(std::floor(min_x - 0.5)));
            const int64_t c_hi =
                std::min<int64_t>(spec.width - 1, static_cast<int64_t>(std::ceil(max_x)));
            for (int64_t r = r_lo; r <= r_hi; ++r) {
                for (int64_t c = c_lo; c <= c_hi; ++c) {
                    const double px = static_cast<double>(c) + 0.5;
                    const double py = static_cast<double>(r) + 0.5;
                    bool inside = true;
                    for (int e = 0; e < 4 && inside; ++e) {
                        const int nx = (e + 1) % 4;
                        const double ex = q[static_cast<size_t>(2 * nx)] - q[static_cast<size_t>(2 * e)];
                        const double ey =
                            q[static_cast<size_t>(2 * nx + 1)] - q[static_cast<size_t>(2 * e + 1)];
                        const double vx = px - q[static_cast<size_t>(2 * e)];
                        const double vy = py - q[static_cast<size_t>(2 * e + 1)];
                        inside = ex * vy - ey * vx >= 0;
                    }
                    if (!inside) continue;
                    mask[static_cast<size_t>(r * spec.width + c)] = 1;
                    for (int64_t ch = 0; ch < 3; ++ch) {
                        v.pixels[static_cast<size_t>((r * spec.width + c) * 3 + ch)] =
                            static_cast<real_t>(-1.0 + 2.0 * shade[static_cast<size_t>(pf.face)] *
                                                           base[static_cast<size_t>(ch)]);
                    }
                }
            }
        }
        if (masks) masks->push_back(std::move(mask));
        out.views.push_back(std::move(v));
    }
    return out;
}

View prefill_blank(const FieldSpec& spec, const View& view, const std::vector<uint8_t>& mask,
                   double sigma, Rng& rng) {
    if (static_cast<int64_t>(mask.size()) != spec.pixels_per_view()) {
        throw ShapeError(strf("prefill_blank: mask has %zu pixels, view has %lld", mask.size(),
                              (long long)spec.pixels_per_view()));
    }
    if (static_cast<int64_t>(view.pixels.size()) != spec.channels_per_view()) {
        throw ShapeError("prefill_blank: view/spec size mismatch");
    }
    View out = view;
    for (int64_t p = 0; p < spec.pixels_per_view(); ++p) {
        if (mask[static_cast<size_t>(p)]) continue;
        for (int64_t ch = 0; ch < spec.signal_dim; ++ch) {
            const double draw = rng.normal() * sigma;
            out.pixels[static_cast<size_t>(p * spec.signal_dim + ch)] =
                static_cast<real_t>(std::clamp(draw, -1.0, 1.0));
        }
    }
    return out;
}

View postprocess_mask(const FieldSpec& spec, const View& view, const std::vector<uint8_t>& mask,
                      real_t background) {
    if (static_cast<int64_t>(mask.size()) != spec.pixels_per_view()) {
        throw ShapeError(strf("postprocess_mask: mask has %zu pixels, view has %lld", mask.size(),
                              (long long)spec.pixels_per_view()));
    }
    if (static_cast<int64_t>(view.pixels.size()) != spec.channels_per_view()) {
        throw ShapeError("postprocess_mask: view/spec size mismatch");
    }
    View out = view;
    for (int64_t p = 0; p < spec.pixels_per_view(); ++p) {
        if (mask[static_cast<size_t>(p)]) continue;
        for (int64_t ch = 0; ch < spec.signal_dim; ++ch) {
            out.pixels[static_cast<size_t>(p * spec.signal_dim + ch)] = background;
        }
    }
    return out;
}

const std::string& ManifestDataset::caption(int64_t idx) const {
    if (idx < 0 || idx >= size()) throw ShapeError("ManifestDataset: index out of range");
    return fields_[static_cast<size_t>(idx)].caption;
}

FieldSample ManifestDataset::load(int64_t idx) const {
    if (idx < 0 || idx >= size()) throw ShapeError("ManifestDataset: index out of range");
    const FieldEntry& fe = fields_[static_cast<size_t>(idx)];
    FieldSample out;
    out.spec = spec_;
    out.caption = fe.caption;
    for (const Record& rec : fe.records) {
        ImageU8 img = read_image(rec.image_path);
        if (img.width != spec_.view_width || img.height != spec_.view_height ||
            img.channels != spec_.signal_dim) {
            throw IoError(strf("%s: image is %lldx%lldx%lld, field wants %lldx%lldx%lld",
                               rec.image_path.c_str(), (long long)img.width, (long long)img.height,
                               (long long)img.channels, (long long)spec_.view_width,
                               (long long)spec_.view_height, (long long)spec_.signal_dim));
        }
        View v;
        v.view_coord = rec.view_coord;
        v.pixels = u8_to_signal(img);
        out.views.push_back(std::move(v));
    }
    return out;
}

std::vector<std::vector<uint8_t>> ManifestDataset::load_masks(int64_t idx) const {
    if (idx < 0 || idx >= size()) throw ShapeError("ManifestDataset: index out of range");
    const FieldEntry& fe = fields_[static_cast<size_t>(idx)];
    std::vector<std::vector<uint8_t>> masks;
    for (const Record& rec : fe.records) {
        const std::string mask_path = rec.image_path + ".mask.pgm";
        if (!std::filesystem::exists(mask_path)) {
            masks.emplace_back();
            continue;
        }
        ImageU8 img = read_pgm(mask_path);
        if (img.width != spec_.view_width || img.height != spec_.view_height) {
            throw IoError(strf("%s: mask is %lldx%lld, field wants %lldx%lld", mask_path.c_str(),
                               (long long)img.width, (long long)img.height,
                               (long long)spec_.view_width, (long long)spec_.view_height));
        }
        std::vector<uint8_t> m(img.data.size());
        for (size_t i = 0; i < m.size(); ++i) m[i] = img.data[i] >= 128 ? 1 : 0;
        masks.push_back(std::move(m));
    }
    return masks;
}

ManifestDataset ingest_manifest(const std::string& path, const FieldSpec& spec,
                                ManifestReport* report) {
    std::ifstream in(path);
    if (!in) throw IoError(strf("%s: cannot open manifest", path.c_str()));
    const std::string dir = std::filesystem::path(path).parent_path().string();

    ManifestReport local;
    ManifestReport& rep = report ? *report : local;
    rep = {};

    ManifestDataset ds;
    ds.spec_ = spec;
    const int64_t d_v = spec.view_dim();

    std::string caption;
    std::vector<ManifestDataset::Record> records;

    auto flush_field = [&]() {
        if (records.empty()) return;
        std::vector<ManifestDataset::Record> kept = std::move(records);
        records.clear();
        if (static_cast<int64_t>(kept.size()) >= 128) {
            std::vector<ManifestDataset::Record> sub;
            const int64_t src = static_cast<int64_t>(kept.size());
            for (int64_t i = 0; i < 128; ++i) {
                sub.push_back(kept[static_cast<size_t>(i * src / 128)]);
            }
            kept = std::move(sub);
        }
        if (static_cast<int64_t>(kept.size()) != spec.num_views) {
            ++rep.skipped_fields;
            rep.warnings.push_back(strf("field '%s' has %zu views, expected %lld; skipped",
                                        caption.c_str(), kept.size(), (long long)spec.num_views));
            return;
        }
        ++rep.fields;
        ds.fields_.push_back({caption, std::move(kept)});
    };

    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        ++rep.records;

        // path, d_v coordinates, caption (the caption may itself contain commas).
        std::vector<std::string> head;
        size_t pos = 0;
        bool bad = false;
        for (int64_t i = 0; i < 1 + d_v; ++i) {
            size_t comma = t.find(',', pos);
            if (comma == std::string::npos) {
                bad = true;
                break;
            }
            head.push_back(trim(t.substr(pos, comma - pos)));
            pos = comma + 1;
        }
        if (bad) {
            ++rep.skipped_records;
            rep.warnings.push_back(strf("%s:%lld: expected path, %lld coordinates, caption",
                                        path.c_str(), (long long)line_no, (long long)d_v));
            continue;
        }
        const std::string rec_caption = trim(t.substr(pos));
        if (head[0].empty() || rec_caption.empty()) {
            ++rep.skipped_records;
            rep.warnings.push_back(
                strf("%s:%lld: empty path or caption", path.c_str(), (long long)line_no));
            continue;
        }

        ManifestDataset::Record rec;
        rec.image_path = dir.empty() ? head[0] : dir + "/" + head[0];
        bool coord_ok = true;
        for (int64_t i = 0; i < d_v; ++i) {
            const std::string& s = head[static_cast<size_t>(1 + i)];
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
                coord_ok = false;
                break;
            }
            rec.view_coord.push_back(v);
        }
        if (!coord_ok) {
            ++rep.skipped_records;
            rep.warnings.push_back(
                strf("%s:%lld: bad view coordinate", path.c_str(), (long long)line_no));
            continue;
        }
        if (!std::filesystem::exists(rec.image_path)) {
            ++rep.skipped_records;
            rep.warnings.push_back(strf("%s:%lld: missing image %s", path.c_str(),
                                        (long long)line_no, rec.image_path.c_str()));
            continue;
        }

        if (rec_caption != caption && !records.empty()) flush_field();
        caption = rec_caption;
        records.push_back(std::move(rec));
    }
    flush_field();

    if (rep.records == 0) rep.warnings.push_back(strf("%s: manifest is empty", path.c_str()));
    return ds;
}

std::vector<FieldSample> load_all(const ManifestDataset& ds) {
    std::vector<FieldSample> out;
    out.reserve(static_cast<size_t>(ds.size()));
    for (int64_t i = 0; i < ds.size(); ++i) out.push_back(ds.load(i));
    return out;
}

}  // namespace t1
