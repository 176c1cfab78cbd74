#include "t1/model.hpp"

#include <cstring>

#include "t1/common.hpp"

namespace t1 {

namespace {

constexpr double kPi = 3.14159265358979323846;

CodecMode parse_codec_mode(const std::string& s) {
    if (s == "raw") return CodecMode::raw;
    if (s == "learned") return CodecMode::learned;
    throw IoError(strf("codec mode '%s' is not raw|learned", s.c_str()));
}

const char* codec_mode_name(CodecMode m) { return m == CodecMode::raw ? "raw" : "learned"; }

}  // namespace

ModelConfig model_config_from(const Config& cfg) {
    ModelConfig mc;
    mc.field.metric_dim = cfg.get_i64("field", "metric_dim", mc.field.metric_dim);
    mc.field.signal_dim = cfg.get_i64("field", "signal_dim", mc.field.signal_dim);
    mc.field.view_height = cfg.get_i64("field", "height", mc.field.view_height);
    mc.field.view_width = cfg.get_i64("field", "width", mc.field.view_width);
    mc.field.num_views = cfg.get_i64("field", "views", mc.field.num_views);

    mc.codec.patch = cfg.get_i64("codec", "patch", mc.codec.patch);
    mc.codec.mode = parse_codec_mode(cfg.get_str("codec", "mode", codec_mode_name(mc.codec.mode)));
    mc.codec.token_dim = cfg.get_i64("codec", "token_dim", mc.codec.token_dim);
    mc.codec.seed = cfg.get_u64("codec", "seed", mc.codec.seed);

    mc.net.depth = cfg.get_i64("net", "depth", mc.net.depth);
    mc.net.width = cfg.get_i64("net", "width", mc.net.width);
    mc.net.heads = cfg.get_i64("net", "heads", mc.net.heads);
    mc.net.mlp_ratio = cfg.get_i64("net", "mlp_ratio", mc.net.mlp_ratio);
    mc.net.t_embed_dim = cfg.get_i64("net", "t_embed_dim", mc.net.t_embed_dim);
    mc.net.adaln_gate = cfg.get_bool("net", "adaln_gate", mc.net.adaln_gate);
    mc.net.max_tokens = cfg.get_i64("net", "max_tokens", mc.net.max_tokens);
    mc.init_seed = cfg.get_u64("net", "init_seed", mc.init_seed);

    mc.cond_tokens = cfg.get_i64("embedding", "cond_tokens", mc.cond_tokens);
    mc.net.cond_dim = cfg.get_i64("embedding", "cond_dim", mc.net.cond_dim);
    mc.num_freqs = cfg.get_i64("embedding", "num_freqs", mc.num_freqs);
    mc.text_seed = cfg.get_u64("embedding", "text_seed", mc.text_seed);

    mc.sched_steps = cfg.get_i64("schedule", "steps", mc.sched_steps);
    mc.beta_start = cfg.get_f64("schedule", "beta_start", mc.beta_start);
    mc.beta_end = cfg.get_f64("schedule", "beta_end", mc.beta_end);

    mc.sample.guidance = cfg.get_f64("sample", "guidance", mc.sample.guidance);
    mc.sample.mask_mode =
        parse_mask_mode(cfg.get_str("sample", "mask_mode", mask_mode_name(mc.sample.mask_mode)));
    mc.sample.shared_init_noise =
        cfg.get_bool("sample", "shared_init_noise", mc.sample.shared_init_noise);
    return mc;
}

void model_config_to(const ModelConfig& mc, Config& out) {
    out.set_i64("field", "metric_dim", mc.field.metric_dim);
    out.set_i64("field", "signal_dim", mc.field.signal_dim);
    out.set_i64("field", "height", mc.field.view_height);
    out.set_i64("field", "width", mc.field.view_width);
    out.set_i64("field", "views", mc.field.num_views);

    out.set_i64("codec", "patch", mc.codec.patch);
    out.set("codec", "mode", codec_mode_name(mc.codec.mode));
    out.set_i64("codec", "token_dim", mc.codec.token_dim);
    out.set_u64("codec", "seed", mc.codec.seed);

    out.set_i64("net", "depth", mc.net.depth);
    out.set_i64("net", "width", mc.net.width);
    out.set_i64("net", "heads", mc.net.heads);
    out.set_i64("net", "mlp_ratio", mc.net.mlp_ratio);
    out.set_i64("net", "t_embed_dim", mc.net.t_embed_dim);
    out.set_bool("net", "adaln_gate", mc.net.adaln_gate);
    out.set_i64("net", "max_tokens", mc.net.max_tokens);
    out.set_u64("net", "init_seed", mc.init_seed);

    out.set_i64("embedding", "cond_tokens", mc.cond_tokens);
    out.set_i64("embedding", "cond_dim", mc.net.cond_dim);
    out.set_i64("embedding", "num_freqs", mc.num_freqs);
    out.set_u64("embedding", "text_seed", mc.text_seed);

    out.set_i64("schedule", "steps", mc.sched_steps);
    out.set_f64("schedule", "beta_start", mc.beta_start);
    out.set_f64("schedule", "beta_end", mc.beta_end);

    out.set_f64("sample", "guidance", mc.sample.guidance);
    out.set("sample", "mask_mode", mask_mode_name(mc.sample.mask_mode));
    out.set_bool("sample", "shared_init_noise", mc.sample.shared_init_noise);
}

namespace {

ScoreNetConfig derive_net_config(const ModelConfig& mc, const PatchCodec& codec) {
    ScoreNetConfig net = mc.net;
    net.token_dim = codec.token_dim();
    net.coord_embed_dim = mc.field.metric_dim * 2 * mc.num_freqs;
    return net;
}

ScoreNet build_net(const ModelConfig& mc, const PatchCodec& codec) {
    Rng rng(splitmix64(mc.init_seed ^ fnv1a64("score-net-init")));
    return ScoreNet(derive_net_config(mc, codec), rng);
}

}  // namespace

Model::Model(const ModelConfig& mc)
    : cfg_(mc),
      codec_(mc.field, mc.codec),
      net_(build_net(mc, codec_)),
      null_cond_(mc.cond_tokens, mc.net.cond_dim),
      sched_(make_schedule(mc.sched_steps, mc.beta_start, mc.beta_end)) {
    if (mc.num_freqs < 1) throw ShapeError("ModelConfig: num_freqs must be >= 1");
    cfg_.net = net_.config();
}

std::vector<std::pair<std::string, Tensor>> Model::named_params() {
    std::vector<std::pair<std::string, Tensor>> out = net_.named_params();
    out.emplace_back("cond.null", null_cond_.tokens());
    return out;
}

ConditionEmbedding Model::embed_caption(const std::string& caption) const {
    return embed_text_toy(caption, cfg_.cond_tokens, cfg_.net.cond_dim, cfg_.text_seed);
}

std::vector<Tensor> Model::coord_embeds_for(
    const std::vector<std::vector<double>>& view_coords) const {
    std::vector<Tensor> out;
    out.reserve(view_coords.size());
    for (const auto& vc : view_coords) {
        std::vector<double> coords = codec_.token_coordinates(vc);
        out.push_back(embed_coordinates(coords, codec_.tokens_per_view(), cfg_.field.metric_dim,
                                        cfg_.num_freqs));
    }
    return out;
}

ScoreFn Model::make_score_fn(const ConditionEmbedding& cond,
                             const std::vector<std::vector<double>>& view_coords) const {
    std::vector<Tensor> coord_embeds = coord_embeds_for(view_coords);
    Tensor cond_tokens = cond.tokens;
    Tensor null_tokens = null_cond_.tokens();
    const int64_t Z = codec_.tokens_per_view();
    const int64_t D = codec_.token_dim();
    return [this, coord_embeds = std::move(coord_embeds), cond_tokens, null_tokens, Z, D](
               const std::vector<std::vector<real_t>>& y_views, int64_t t, bool conditioned) {
        if (y_views.size() != coord_embeds.size()) {
            throw ShapeError(strf("score: %zu views, coordinates for %zu", y_views.size(),
                                  coord_embeds.size()));
        }
        std::vector<Tensor> tokens;
        tokens.reserve(y_views.size());
        for (const auto& y : y_views) {
            if (static_cast<int64_t>(y.size()) != Z * D) {
                throw ShapeError(strf("score: view has %zu values, want %lld", y.size(),
                                      (long long)(Z * D)));
            }
            tokens.push_back(Tensor::from_vector({Z, D}, y));
        }
        std::vector<Tensor> eps =
            net_.forward(tokens, coord_embeds, t, conditioned ? cond_tokens : null_tokens);
        std::vector<std::vector<real_t>> out;
        out.reserve(eps.size());
        for (const Tensor& e : eps) {
            out.emplace_back(e.data().begin(), e.data().end());
        }
        return out;
    };
}

void Model::load_tensors(const Checkpoint& ckpt) {
    auto params = named_params();
    for (auto& [name, tensor] : params) {
        const Tensor* found = nullptr;
        for (const auto& [n, t] : ckpt.tensors) {
            if (n == name) {
                found = &t;
                break;
            }
        }
        if (!found) throw IoError(strf("checkpoint is missing tensor '%s'", name.c_str()));
        if (found->shape() != tensor.shape()) {
            throw IoError(strf("checkpoint tensor '%s' is %s, model wants %s", name.c_str(),
                               shape_str(found->shape()).c_str(),
                               shape_str(tensor.shape()).c_str()));
        }
        std::memcpy(tensor.data().data(), found->data().data(),
                    sizeof(real_t) * static_cast<size_t>(tensor.numel()));
    }
}

std::vector<std::vector<double>> canonical_view_coords(const FieldSpec& spec, int64_t n) {
    if (n < 1) throw ShapeError("canonical_view_coords: n must be >= 1");
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        if (spec.view_dim() == 0) {
            out.push_back({});
        } else if (spec.view_dim() == 1) {
            out.push_back({(static_cast<double>(i) + 0.5) / static_cast<double>(n)});
        } else if (spec.view_dim() == 4) {
            const double azimuth = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
            out.push_back({azimuth / (2.0 * kPi), (0.42 + kPi / 2.0) / kPi, 0.3, 0.35});
        } else {
            throw ShapeError(strf("canonical_view_coords: no layout for view_dim %lld",
                                  (long long)spec.view_dim()));
        }
    }
    return out;
}

void save_model(const std::string& path, Model& model,
                const std::vector<std::pair<std::string, Tensor>>& extra_tensors,
                const std::vector<std::array<std::string, 3>>& extra_cfg) {
    Config cfg;
    model_config_to(model.config(), cfg);
    for (const auto& e : extra_cfg) cfg.set(e[0], e[1], e[2]);
    Checkpoint ckpt;
    ckpt.config_text = cfg.serialize();
    ckpt.tensors = model.named_params();
    for (const auto& t : extra_tensors) ckpt.tensors.push_back(t);
    save_checkpoint(path, ckpt);
}

Model load_model(const std::string& path, Config* out_cfg, Checkpoint* out_ckpt) {
    Checkpoint ckpt = load_checkpoint(path);
    Config cfg = Config::parse_text(ckpt.config_text, path);
    Model model(model_config_from(cfg));
    model.load_tensors(ckpt);
    if (out_cfg) *out_cfg = cfg;
    if (out_ckpt) *out_ckpt = std::move(ckpt);
    return model;
}

}  // namespace t1
