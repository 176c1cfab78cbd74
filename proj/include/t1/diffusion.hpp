#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "t1/codec.hpp"
#include "t1/field.hpp"
#include "t1/rng.hpp"
#include "t1/tensor.hpp"

namespace t1 {

struct NoiseSchedule {
    int64_t T = 0;
    // Index 0 is a convenience slot: beta[0] = 0, alpha[0] = 1, alpha_bar[0] = 1.
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
};

// Linear beta interpolation from beta_start to beta_end over T steps.
NoiseSchedule make_schedule(int64_t T, double beta_start = 1e-4, double beta_end = 0.02);

// One field noised at one timestep. The same eps is shared by every view;
// recover_view_noise returns it bit-for-bit from any (y_t, y_0) pair.
struct DiffusionBatch {
    int64_t t = 0;
    std::vector<real_t> eps;                  // [Z*D]
    std::vector<std::vector<real_t>> y_t;     // n x [Z*D]
};

// Values are snapped to a fixed 2^-40 grid before the additive combination so
// the token sum is exact in floating point; this is what makes noise recovery
// across views bitwise identical. Grid error ~5e-13, invisible to every other
// tolerance in the toolkit.
real_t grid_snap(real_t x);

// Applies y_t = sqrt(ab_t)*y0 + sqrt(1-ab_t)*eps per view with ONE eps for the
// whole field, drawn inside (forward_diffuse_views) or given (with_noise).
DiffusionBatch forward_diffuse_views(const std::vector<std::vector<real_t>>& y0_views, int64_t t,
                                     const NoiseSchedule& sched, Rng& rng);
DiffusionBatch forward_diffuse_views_with_noise(const std::vector<std::vector<real_t>>& y0_views,
                                                int64_t t, const NoiseSchedule& sched,
                                                const std::vector<real_t>& eps_raw);

// (y_t - snap(sqrt(ab_t)*y0)) / sqrt(1-ab_t); equals the stored eps exactly.
std::vector<real_t> recover_view_noise(const std::vector<real_t>& y_t,
                                       const std::vector<real_t>& y0, int64_t t,
                                       const NoiseSchedule& sched);

// Mean over views/tokens/channels of (eps_pred - eps)^2; every view shares the
// same target eps.
Tensor training_loss(const std::vector<Tensor>& eps_pred, const DiffusionBatch& batch);

// mu = (y_t - beta_t/sqrt(1-ab_t) * eps_hat) / sqrt(alpha_t), plus sqrt(beta_t)*z.
// z = 0 at t = 1 or when rng is null.
std::vector<real_t> ddpm_step(const std::vector<real_t>& y_t, const std::vector<real_t>& eps_hat,
                              int64_t t, const NoiseSchedule& sched, Rng* rng);

enum class GuidanceMaskMode { none, all, first3, color };
GuidanceMaskMode parse_mask_mode(const std::string& name);
const char* mask_mode_name(GuidanceMaskMode mode);

// Mask over the token channel dim. "color" groups channels channel-minor and
// selects color index < 3 (all channels for RGB); "first3" masks the first
// three token channels literally.
std::vector<uint8_t> guidance_channel_mask(GuidanceMaskMode mode, int64_t token_dim,
                                           int64_t signal_dim);

// Masked channels: eps_u + s*(eps_c - eps_u). Unmasked channels pass eps_c
// through untouched (bitwise).
std::vector<real_t> cfg_combine(const std::vector<real_t>& eps_cond,
                                const std::vector<real_t>& eps_uncond, double s,
                                const std::vector<uint8_t>& channel_mask, int64_t token_dim);

// Score evaluation for a whole field: per-view eps predictions for the given
// noisy tokens at timestep t, conditional or unconditional branch.
using ScoreFn = std::function<std::vector<std::vector<real_t>>(
    const std::vector<std::vector<real_t>>& y_views, int64_t t, bool conditioned)>;

struct SampleOptions {
    double guidance = 8.5;
    GuidanceMaskMode mask_mode = GuidanceMaskMode::color;
    bool shared_init_noise = false;  // inference default: independent noise per view
};

// Full reverse loop: y_T ~ N(0,I) per view, T..1 ddpm steps with guidance,
// decode through the codec. Deterministic given the rng.
std::vector<View> sample_field(const ScoreFn& score, const FieldSpec& spec, const PatchCodec& codec,
                               const std::vector<std::vector<double>>& view_coords,
                               const NoiseSchedule& sched, const SampleOptions& opt, Rng& rng);

}  // namespace t1
