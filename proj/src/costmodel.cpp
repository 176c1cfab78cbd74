#include "t1/costmodel.hpp"

#include <sstream>

#include "t1/common.hpp"

namespace t1 {

namespace {

uint64_t u(int64_t v) { return static_cast<uint64_t>(v); }

}  // namespace

CostReport estimate_macs(const ScoreNetConfig& cfg, int64_t tokens_per_view, int64_t n_views,
                         bool view_local, bool text_cond, int64_t cond_tokens) {
    cfg.validate();
    if (tokens_per_view < 1 || n_views < 1 || cond_tokens < 1) {
        throw ShapeError(strf("estimate_macs: Z %lld, n_views %lld, cond_tokens %lld must be >= 1",
                              (long long)tokens_per_view, (long long)n_views,
                              (long long)cond_tokens));
    }
    const uint64_t W = u(cfg.width);
    const uint64_t D = u(cfg.depth);
    const uint64_t Z = u(tokens_per_view);
    const uint64_t n = u(n_views);
    const uint64_t N = n * Z;
    const uint64_t mlp_hidden = W * u(cfg.mlp_ratio);

    CostReport r;
    r.depth = cfg.depth;
    r.width = cfg.width;
    r.heads = cfg.heads;
    r.tokens_per_view = tokens_per_view;
    r.n_views = n_views;
    r.view_local = view_local;
    r.text_cond = text_cond;

    // Per attention group: Q.K^T then scores.V, each N_g^2 * head_dim per head,
    // summing to 2 * W * N_g^2 over the heads.
    const uint64_t sum_ng_sq = view_local ? n * Z * Z : N * N;

    r.macs_qkv = D * 3 * N * W * W;
    r.macs_attn = D * 2 * W * sum_ng_sq;
    r.macs_proj = D * N * W * W;
    r.macs_mlp = D * 2 * N * W * mlp_hidden;

    const uint64_t head_out = W * (cfg.adaln_gate ? 6 : 4);
    r.macs_cond = u(cfg.t_embed_dim) * W + W * W  // timestep MLP
                  + D * W * head_out + W * 2 * W  // per-block and final adaLN heads
                  + (text_cond ? u(cond_tokens) * u(cfg.cond_dim) * W : 0);

    const uint64_t in_dim = u(cfg.token_dim) + u(cfg.coord_embed_dim);
    r.macs_io = N * in_dim * W + N * W * u(cfg.token_dim);

    // Mirrors ScoreNet's parameter list exactly (weights + biases).
    r.param_count = in_dim * W + W                                   // input_proj
                    + u(cfg.t_embed_dim) * W + W + W * W + W         // t_mlp
                    + u(cfg.cond_dim) * W + W                        // cond_proj
                    + D * (W * head_out + head_out                   // adaln head
                           + 4 * (W * W + W)                         // attn q/k/v/o
                           + W * mlp_hidden + mlp_hidden             // mlp fc1
                           + mlp_hidden * W + W)                     // mlp fc2
                    + W * 2 * W + 2 * W                              // final adaln
                    + W * u(cfg.token_dim) + u(cfg.token_dim);       // out_proj

    r.attn_score_scalars = D * u(cfg.heads) * sum_ng_sq;
    r.mlp_act_scalars = D * N * mlp_hidden;
    r.token_act_scalars = D * N * W * 6 + N * (in_dim + W + u(cfg.token_dim));
    return r;
}

uint64_t estimate_memory(const ScoreNetConfig& cfg, int64_t tokens_per_view, int64_t n_views,
                         bool view_local, int64_t bytes_per_scalar) {
    if (bytes_per_scalar < 1) {
        throw ShapeError(strf("estimate_memory: bytes_per_scalar %lld must be >= 1",
                              (long long)bytes_per_scalar));
    }
    return estimate_macs(cfg, tokens_per_view, n_views, view_local, true, 1)
        .memory_bytes(bytes_per_scalar);
}

std::string sweep_csv(const CostSweep& sweep) {
    if (sweep.depth.empty() || sweep.width.empty() || sweep.heads.empty() ||
        sweep.tokens_per_view.empty() || sweep.n_views.empty() || sweep.view_local.empty() ||
        sweep.text_cond.empty()) {
        throw ShapeError("sweep_csv: every range needs at least one value");
    }
    std::ostringstream out;
    out << "depth,width,heads,Z,n_views,view_local,text,macs,act_mem,params\n";
    for (int64_t d : sweep.depth)
        for (int64_t w : sweep.width)
            for (int64_t h : sweep.heads)
                for (int64_t z : sweep.tokens_per_view)
                    for (int64_t n : sweep.n_views)
                        for (bool local : sweep.view_local)
                            for (bool text : sweep.text_cond) {
                                ScoreNetConfig cfg;
                                cfg.depth = d;
                                cfg.width = w;
                                cfg.heads = h;
                                cfg.cond_dim = sweep.cond_dim;
                                cfg.token_dim = sweep.token_dim;
                                CostReport r = estimate_macs(cfg, z, n, local, text,
                                                             sweep.cond_tokens);
                                out << d << ',' << w << ',' << h << ',' << z << ',' << n << ','
                                    << (local ? 1 : 0) << ',' << (text ? 1 : 0) << ','
                                    << r.macs_total() << ','
                                    << r.memory_bytes(static_cast<int64_t>(sizeof(real_t)))
                                    << ',' << r.param_count << '\n';
                            }
    return out.str();
}

}  // namespace t1
