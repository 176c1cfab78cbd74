#pragma once

#include <string>
#include <utility>
#include <vector>

#include "t1/rng.hpp"
#include "t1/tensor.hpp"

namespace t1 {

struct ScoreNetConfig {
    int64_t depth = 4;
    int64_t width = 128;
    int64_t heads = 4;
    int64_t mlp_ratio = 4;
    int64_t token_dim = 768;
    int64_t cond_dim = 64;
    int64_t coord_embed_dim = 60;  // metric_dim * 2 * num_freqs
    int64_t t_embed_dim = 256;
    bool adaln_gate = true;
    int64_t max_tokens = 65536;

    void validate() const;
    bool operator==(const ScoreNetConfig&) const = default;
};

// layer_norm then (1+gamma) * x + beta; gamma/beta come from the condition so
// zeroed conditioning reduces to plain layer norm.
Tensor ada_layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      real_t eps = real_t(1e-5));

// Decoder-only transformer predicting eps per token. Attention is evaluated
// per view, so tokens of different views never interact; conditioning
// (timestep + pooled condition tokens) modulates every view identically.
// Zero-initialized adaLN heads and output projection make the initial
// prediction exactly zero.
class ScoreNet {
  public:
    ScoreNet(const ScoreNetConfig& cfg, Rng& rng);

    const ScoreNetConfig& config() const { return cfg_; }
    std::vector<std::pair<std::string, Tensor>>& named_params() { return params_; }
    const std::vector<std::pair<std::string, Tensor>>& named_params() const { return params_; }
    Tensor param(const std::string& name) const;
    int64_t param_count() const;

    // view_tokens[v]: [Z_v, token_dim]; view_coord_embeds[v]: [Z_v, coord_embed_dim];
    // cond_tokens: [Zc, cond_dim]. Returns eps per view, [Z_v, token_dim].
    std::vector<Tensor> forward(const std::vector<Tensor>& view_tokens,
                                const std::vector<Tensor>& view_coord_embeds, int64_t t,
                                const Tensor& cond_tokens) const;

    // Attention score elements materialized by the last forward: per block,
    // per view, per head one Z_v x Z_v matrix. Linear in the view count.
    int64_t attn_score_elements() const { return attn_score_elems_; }

  private:
    ScoreNetConfig cfg_;
    std::vector<std::pair<std::string, Tensor>> params_;
    mutable int64_t attn_score_elems_ = 0;

    Tensor add_param(const std::string& name, Shape shape, Rng* rng);
    Tensor p(const std::string& name) const { return param(name); }
};

}  // namespace t1
