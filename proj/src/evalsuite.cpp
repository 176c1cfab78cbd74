#include "t1/evalsuite.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "t1/common.hpp"

namespace t1 {

double psnr_from_mse(double mse, double peak) {
    if (mse <= 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double view_mse(const View& a, const View& b) {
    if (a.pixels.size() != b.pixels.size() || a.pixels.empty()) {
        throw ShapeError("view_mse: size mismatch or empty view");
    }
    double acc = 0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.pixels.size());
}

double field_mse(const FieldSample& a, const FieldSample& b) {
    if (a.views.size() != b.views.size() || a.views.empty()) {
        throw ShapeError("field_mse: view count mismatch or empty field");
    }
    double acc = 0;
    for (size_t v = 0; v < a.views.size(); ++v) acc += view_mse(a.views[v], b.views[v]);
    return acc / static_cast<double>(a.views.size());
}

double coherence_score(const FieldSpec& spec, const std::vector<View>& views, double threshold) {
    if (views.size() < 3) {
        throw ShapeError(strf("coherence_score: needs >= 3 views, got %zu", views.size()));
    }
    std::vector<std::array<double, 2>> centroids;
    for (const View& v : views) {
        if (static_cast<int64_t>(v.pixels.size()) != spec.channels_per_view()) {
            throw ShapeError("coherence_score: view/spec size mismatch");
        }
        double r_sum = 0, c_sum = 0;
        int64_t count = 0;
        for (int64_t r = 0; r < spec.view_height; ++r) {
            for (int64_t c = 0; c < spec.view_width; ++c) {
                double mean = 0;
                for (int64_t ch = 0; ch < spec.signal_dim; ++ch) {
                    mean += static_cast<double>(
                        v.pixels[static_cast<size_t>((r * spec.view_width + c) * spec.signal_dim +
                                                     ch)]);
                }
                mean /= static_cast<double>(spec.signal_dim);
                if (mean > threshold) {
                    r_sum += static_cast<double>(r);
                    c_sum += static_cast<double>(c);
                    ++count;
                }
            }
        }
        if (count == 0) return std::numeric_limits<double>::infinity();
        centroids.push_back({r_sum / static_cast<double>(count),
                             c_sum / static_cast<double>(count)});
    }

    const size_t nd = centroids.size() - 1;
    std::vector<std::array<double, 2>> disp(nd);
    double mean_r = 0, mean_c = 0;
    for (size_t i = 0; i < nd; ++i) {
        disp[i] = {centroids[i + 1][0] - centroids[i][0], centroids[i + 1][1] - centroids[i][1]};
        mean_r += disp[i][0];
        mean_c += disp[i][1];
    }
    mean_r /= static_cast<double>(nd);
    mean_c /= static_cast<double>(nd);
    double var = 0;
    for (size_t i = 0; i < nd; ++i) {
        const double dr = disp[i][0] - mean_r;
        const double dc = disp[i][1] - mean_c;
        var += dr * dr + dc * dc;
    }
    return std::sqrt(var / static_cast<double>(nd));
}

std::vector<double> field_feature(const FieldSample& field) {
    const int64_t ds = field.spec.signal_dim;
    std::vector<double> sum(static_cast<size_t>(ds), 0), sq(static_cast<size_t>(ds), 0);
    int64_t count = 0;
    for (const View& v : field.views) {
        for (size_t i = 0; i < v.pixels.size(); ++i) {
            const double x = static_cast<double>(v.pixels[i]);
            const size_t ch = i % static_cast<size_t>(ds);
            sum[ch] += x;
            sq[ch] += x * x;
        }
        count += static_cast<int64_t>(v.pixels.size()) / ds;
    }
    if (count == 0) throw ShapeError("field_feature: empty field");
    std::vector<double> feat(static_cast<size_t>(2 * ds));
    for (int64_t ch = 0; ch < ds; ++ch) {
        const double mean = sum[static_cast<size_t>(ch)] / static_cast<double>(count);
        const double var =
            std::max(0.0, sq[static_cast<size_t>(ch)] / static_cast<double>(count) - mean * mean);
        feat[static_cast<size_t>(ch)] = mean;
        feat[static_cast<size_t>(ds + ch)] = std::sqrt(var);
    }
    return feat;
}

int64_t nearest_class(const std::vector<double>& feature,
                      const std::vector<std::vector<double>>& centroids) {
    if (centroids.empty()) throw ShapeError("nearest_class: no centroids");
    int64_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < centroids.size(); ++k) {
        if (centroids[k].size() != feature.size()) {
            throw ShapeError("nearest_class: centroid/feature length mismatch");
        }
        double d = 0;
        for (size_t i = 0; i < feature.size(); ++i) {
            const double diff = feature[i] - centroids[k][i];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = static_cast<int64_t>(k);
        }
    }
    return best;
}

std::vector<std::vector<double>> class_centroids(
    const std::vector<std::vector<const FieldSample*>>& refs_per_class) {
    std::vector<std::vector<double>> out;
    for (const auto& refs : refs_per_class) {
        if (refs.empty()) throw ShapeError("class_centroids: class with no reference fields");
        std::vector<double> acc;
        for (const FieldSample* f : refs) {
            std::vector<double> feat = field_feature(*f);
            if (acc.empty()) acc.assign(feat.size(), 0.0);
            if (acc.size() != feat.size()) {
                throw ShapeError("class_centroids: inconsistent feature lengths");
            }
            for (size_t i = 0; i < feat.size(); ++i) acc[i] += feat[i];
        }
        for (double& x : acc) x /= static_cast<double>(refs.size());
        out.push_back(std::move(acc));
    }
    return out;
}

ReconEval eval_reconstruction(Model& model, const FieldSample& field, int64_t t, uint64_t seed) {
    const NoiseSchedule& sched = model.schedule();
    if (t < 1 || t > sched.T) {
        throw ShapeError(strf("eval_reconstruction: t %lld outside 1..%lld", (long long)t,
                              (long long)sched.T));
    }
    const PatchCodec& codec = model.codec();
    std::vector<std::vector<real_t>> y0;
    std::vector<std::vector<double>> coords;
    for (const View& v : field.views) {
        y0.push_back(codec.encode(v).tokens);
        coords.push_back(v.view_coord);
    }
    Rng rng(splitmix64(seed ^ fnv1a64("eval-recon")));
    DiffusionBatch batch = forward_diffuse_views(y0, t, sched, rng);

    ScoreFn score = model.make_score_fn(model.embed_caption(field.caption), coords);
    std::vector<std::vector<real_t>> eps_hat = score(batch.y_t, t, true);

    const double ab = sched.alpha_bar[static_cast<size_t>(t)];
    const double s_ab = std::sqrt(ab), s_1mab = std::sqrt(1.0 - ab);
    FieldSample recon;
    recon.spec = field.spec;
    recon.caption = field.caption;
    for (size_t vi = 0; vi < batch.y_t.size(); ++vi) {
        TokenGrid grid{codec.token_rows(), codec.token_cols(), codec.token_dim(), {}};
        grid.tokens.resize(batch.y_t[vi].size());
        for (size_t i = 0; i < grid.tokens.size(); ++i) {
            grid.tokens[i] = static_cast<real_t>(
                (static_cast<double>(batch.y_t[vi][i]) -
                 s_1mab * static_cast<double>(eps_hat[vi][i])) /
                s_ab);
        }
        View v;
        v.view_coord = field.views[vi].view_coord;
        v.pixels = codec.decode(grid);
        recon.views.push_back(std::move(v));
    }
    ReconEval out;
    out.mse = field_mse(field, recon);
    out.psnr = psnr_from_mse(out.mse);
    return out;
}

double condition_accuracy(Model& model, const std::vector<std::string>& captions,
                          const std::vector<std::vector<const FieldSample*>>& refs_per_class,
                          int64_t samples_per_class, int64_t gen_views, const SampleOptions& opt,
                          uint64_t seed) {
    if (captions.size() < 2 || captions.size() != refs_per_class.size()) {
        throw ShapeError("condition_accuracy: needs >= 2 classes with references");
    }
    if (samples_per_class < 1) throw ShapeError("condition_accuracy: samples_per_class < 1");
    const FieldSpec& spec = model.config().field;
    const int64_t n_views = std::min<int64_t>(gen_views, spec.num_views);
    const std::vector<std::vector<double>> coords = canonical_view_coords(spec, n_views);
    const std::vector<std::vector<double>> centroids = class_centroids(refs_per_class);

    int64_t hits = 0;
    for (size_t k = 0; k < captions.size(); ++k) {
        ScoreFn score = model.make_score_fn(model.embed_caption(captions[k]), coords);
        for (int64_t s = 0; s < samples_per_class; ++s) {
            Rng rng(splitmix64(seed + 1000003u * static_cast<uint64_t>(k) +
                               static_cast<uint64_t>(s)));
            std::vector<View> views = sample_field(score, spec, model.codec(), coords,
                                                   model.schedule(), opt, rng);
            FieldSample gen;
            gen.spec = spec;
            gen.views = std::move(views);
            if (nearest_class(field_feature(gen), centroids) == static_cast<int64_t>(k)) ++hits;
        }
    }
    return static_cast<double>(hits) /
           static_cast<double>(captions.size() * static_cast<size_t>(samples_per_class));
}

}  // namespace t1
