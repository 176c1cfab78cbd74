#include "t1/diffusion.hpp"

#include <cmath>

namespace t1 {

NoiseSchedule make_schedule(int64_t T, double beta_start, double beta_end) {
    if (T < 1) throw ShapeError("make_schedule: T < 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw NumericError(strf("make_schedule: invalid beta range [%g, %g]", beta_start, beta_end));
    }
    NoiseSchedule s;
    s.T = T;
    s.beta.assign(static_cast<size_t>(T) + 1, 0.0);
    s.alpha.assign(static_cast<size_t>(T) + 1, 1.0);
    s.alpha_bar.assign(static_cast<size_t>(T) + 1, 1.0);
    for (int64_t t = 1; t <= T; ++t) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
        s.beta[t] = beta_start + (beta_end - beta_start) * frac;
        s.alpha[t] = 1.0 - s.beta[t];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    }
    return s;
}

namespace {

// Grid spacing keeps |snapped sums| < 2^13 exactly representable: 2^-40 uses
// 53 mantissa bits in double; the float build needs a coarser grid.
constexpr real_t kGridScale = sizeof(real_t) == 8 ? real_t(1099511627776.0)  // 2^40
                                                  : real_t(2048.0);          // 2^11
constexpr real_t kGridInv = real_t(1) / kGridScale;

void check_t(int64_t t, const NoiseSchedule& sched, const char* who) {
    if (t < 1 || t > sched.T) {
        throw ShapeError(strf("%s: t=%lld outside [1,%lld]", who, (long long)t, (long long)sched.T));
    }
}

}  // namespace

real_t grid_snap(real_t x) { return std::rint(x * kGridScale) * kGridInv; }

DiffusionBatch forward_diffuse_views_with_noise(const std::vector<std::vector<real_t>>& y0_views,
                                                int64_t t, const NoiseSchedule& sched,
                                                const std::vector<real_t>& eps_raw) {
    check_t(t, sched, "forward_diffuse_views");
    if (y0_views.empty()) throw ShapeError("forward_diffuse_views: no views");
    const size_t n = y0_views[0].size();
    if (n == 0 || n != eps_raw.size()) throw ShapeError("forward_diffuse_views: eps size mismatch");
    for (const auto& v : y0_views) {
        if (v.size() != n) throw ShapeError("forward_diffuse_views: ragged views");
    }

    const real_t s0 = static_cast<real_t>(std::sqrt(sched.alpha_bar[static_cast<size_t>(t)]));
    const real_t s1 = static_cast<real_t>(std::sqrt(1.0 - sched.alpha_bar[static_cast<size_t>(t)]));

    DiffusionBatch batch;
    batch.t = t;
    // The noise contribution is snapped once; the canonical eps is defined as
    // that snapped value divided back, so recover_view_noise reproduces it
    // bitwise from any view.
    std::vector<real_t> c(n);
    batch.eps.resize(n);
    for (size_t i = 0; i < n; ++i) {
        c[i] = grid_snap(s1 * eps_raw[i]);
        batch.eps[i] = s1 == real_t(0) ? real_t(0) : c[i] / s1;
    }
    batch.y_t.reserve(y0_views.size());
    for (const auto& y0 : y0_views) {
        std::vector<real_t> yt(n);
        for (size_t i = 0; i < n; ++i) yt[i] = grid_snap(s0 * y0[i]) + c[i];
        batch.y_t.push_back(std::move(yt));
    }
    return batch;
}

DiffusionBatch forward_diffuse_views(const std::vector<std::vector<real_t>>& y0_views, int64_t t,
                                     const NoiseSchedule& sched, Rng& rng) {
    if (y0_views.empty()) throw ShapeError("forward_diffuse_views: no views");
    std::vector<real_t> eps(y0_views[0].size());
    for (auto& e : eps) e = static_cast<real_t>(rng.normal());
    return forward_diffuse_views_with_noise(y0_views, t, sched, eps);
}

std::vector<real_t> recover_view_noise(const std::vector<real_t>& y_t,
                                       const std::vector<real_t>& y0, int64_t t,
                                       const NoiseSchedule& sched) {
    check_t(t, sched, "recover_view_noise");
    if (y_t.size() != y0.size()) throw ShapeError("recover_view_noise: size mismatch");
    const real_t s0 = static_cast<real_t>(std::sqrt(sched.alpha_bar[static_cast<size_t>(t)]));
    const real_t s1 = static_cast<real_t>(std::sqrt(1.0 - sched.alpha_bar[static_cast<size_t>(t)]));
    std::vector<real_t> eps(y_t.size());
    for (size_t i = 0; i < eps.size(); ++i) {
        const real_t c = y_t[i] - grid_snap(s0 * y0[i]);
        eps[i] = s1 == real_t(0) ? real_t(0) : c / s1;
    }
    return eps;
}

Tensor training_loss(const std::vector<Tensor>& eps_pred, const DiffusionBatch& batch) {
    if (eps_pred.empty() || eps_pred.size() != batch.y_t.size()) {
        throw ShapeError("training_loss: view count mismatch");
    }
    const int64_t per_view = static_cast<int64_t>(batch.eps.size());
    Tensor target = Tensor::from_vector({per_view}, batch.eps);
    Tensor total = Tensor::scalar(0);
    for (const auto& pred : eps_pred) {
        if (pred.numel() != per_view) throw ShapeError("training_loss: eps_pred size mismatch");
        Tensor d = sub(reshape(pred, {per_view}), target);
        total = add(total, sum(mul(d, d)));
    }
    const real_t denom = static_cast<real_t>(per_view * static_cast<int64_t>(eps_pred.size()));
    return scale(total, real_t(1) / denom);
}

std::vector<real_t> ddpm_step(const std::vector<real_t>& y_t, const std::vector<real_t>& eps_hat,
                              int64_t t, const NoiseSchedule& sched, Rng* rng) {
    check_t(t, sched, "ddpm_step");
    if (y_t.size() != eps_hat.size()) throw ShapeError("ddpm_step: size mismatch");
    const size_t ti = static_cast<size_t>(t);
    const double beta = sched.beta[ti];
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha[ti]);
    const double eps_coef = beta / std::sqrt(1.0 - sched.alpha_bar[ti]);
    const double sigma = t > 1 ? std::sqrt(beta) : 0.0;
    std::vector<real_t> out(y_t.size());
    for (size_t i = 0; i < out.size(); ++i) {
        double v = inv_sqrt_alpha * (static_cast<double>(y_t[i]) - eps_coef * static_cast<double>(eps_hat[i]));
        if (sigma > 0.0 && rng) v += sigma * rng->normal();
        out[i] = static_cast<real_t>(v);
    }
    return out;
}

GuidanceMaskMode parse_mask_mode(const std::string& name) {
    if (name == "none") return GuidanceMaskMode::none;
    if (name == "all") return GuidanceMaskMode::all;
    if (name == "first3") return GuidanceMaskMode::first3;
    if (name == "color") return GuidanceMaskMode::color;
    throw IoError(strf("unknown guidance mask mode '%s' (none|all|first3|color)", name.c_str()));
}

const char* mask_mode_name(GuidanceMaskMode mode) {
    switch (mode) {
        case GuidanceMaskMode::none: return "none";
        case GuidanceMaskMode::all: return "all";
        case GuidanceMaskMode::first3: return "first3";
        case GuidanceMaskMode::color: return "color";
    }
    return "?";
}

std::vector<uint8_t> guidance_channel_mask(GuidanceMaskMode mode, int64_t token_dim,
                                           int64_t signal_dim) {
    if (token_dim < 1 || signal_dim < 1) throw ShapeError("guidance_channel_mask: bad dims");
    std::vector<uint8_t> mask(static_cast<size_t>(token_dim), 0);
    switch (mode) {
        case GuidanceMaskMode::none:
            break;
        case GuidanceMaskMode::all:
            std::fill(mask.begin(), mask.end(), uint8_t(1));
            break;
        case GuidanceMaskMode::first3:
            for (int64_t i = 0; i < std::min<int64_t>(3, token_dim); ++i) mask[static_cast<size_t>(i)] = 1;
            break;
        case GuidanceMaskMode::color:
            // Channel-minor grouping: token channel i carries color i % signal_dim.
            for (int64_t i = 0; i < token_dim; ++i) {
                if (i % signal_dim < 3) mask[static_cast<size_t>(i)] = 1;
            }
            break;
    }
    return mask;
}

std::vector<real_t> cfg_combine(const std::vector<real_t>& eps_cond,
                                const std::vector<real_t>& eps_uncond, double s,
                                const std::vector<uint8_t>& channel_mask, int64_t token_dim) {
    if (eps_cond.size() != eps_uncond.size()) throw ShapeError("cfg_combine: size mismatch");
    if (token_dim < 1 || eps_cond.size() % static_cast<size_t>(token_dim) != 0) {
        throw ShapeError("cfg_combine: values do not tile token_dim");
    }
    if (channel_mask.size() > static_cast<size_t>(token_dim)) {
        throw ShapeError(strf("cfg_combine: mask length %zu exceeds token_dim %lld",
                              channel_mask.size(), (long long)token_dim));
    }
    // s == 1 is the identity by definition; u + 1*(c-u) would round away from c bitwise.
    if (s == 1.0) return eps_cond;
    std::vector<real_t> out(eps_cond.size());
    for (size_t i = 0; i < out.size(); ++i) {
        const size_t ch = i % static_cast<size_t>(token_dim);
        if (ch < channel_mask.size() && channel_mask[ch]) {
            out[i] = static_cast<real_t>(static_cast<double>(eps_uncond[i]) +
                                         s * (static_cast<double>(eps_cond[i]) -
                                              static_cast<double>(eps_uncond[i])));
        } else {
            out[i] = eps_cond[i];
        }
    }
    return out;
}

std::vector<View> sample_field(const ScoreFn& score, const FieldSpec& spec, const PatchCodec& codec,
                               const std::vector<std::vector<double>>& view_coords,
                               const NoiseSchedule& sched, const SampleOptions& opt, Rng& rng) {
    if (view_coords.empty()) throw ShapeError("sample_field: no views requested");
    const int64_t n = static_cast<int64_t>(view_coords.size());
    const int64_t per_view = codec.tokens_per_view() * codec.token_dim();

    std::vector<std::vector<real_t>> y(static_cast<size_t>(n));
    if (opt.shared_init_noise) {
        std::vector<real_t> shared(static_cast<size_t>(per_view));
        for (auto& v : shared) v = static_cast<real_t>(rng.normal());
        for (auto& yv : y) yv = shared;
    } else {
        for (auto& yv : y) {
            yv.resize(static_cast<size_t>(per_view));
            for (auto& v : yv) v = static_cast<real_t>(rng.normal());
        }
    }

    const auto mask = guidance_channel_mask(opt.mask_mode, codec.token_dim(), spec.signal_dim);
    const bool masked_any = std::find(mask.begin(), mask.end(), uint8_t(1)) != mask.end();
    const bool use_guidance = opt.guidance != 1.0 && masked_any;

    for (int64_t t = sched.T; t >= 1; --t) {
        auto eps_c = score(y, t, true);
        if (static_cast<int64_t>(eps_c.size()) != n) throw ShapeError("sample_field: score view count");
        std::vector<std::vector<real_t>> eps_u;
        if (use_guidance) eps_u = score(y, t, false);
        for (int64_t v = 0; v < n; ++v) {
            const size_t vi = static_cast<size_t>(v);
            std::vector<real_t> eps_hat =
                use_guidance
                    ? cfg_combine(eps_c[vi], eps_u[vi], opt.guidance, mask, codec.token_dim())
                    : std::move(eps_c[vi]);
            y[vi] = ddpm_step(y[vi], eps_hat, t, sched, t > 1 ? &rng : nullptr);
        }
    }

    std::vector<View> views;
    views.reserve(static_cast<size_t>(n));
    for (int64_t v = 0; v < n; ++v) {
        TokenGrid grid;
        grid.rows = codec.token_rows();
        grid.cols = codec.token_cols();
        grid.dim = codec.token_dim();
        grid.tokens = y[static_cast<size_t>(v)];
        View out;
        out.view_coord = view_coords[static_cast<size_t>(v)];
        out.pixels = codec.decode(grid);
        views.push_back(std::move(out));
    }
    return views;
}

}  // namespace t1
