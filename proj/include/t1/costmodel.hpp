#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "t1/scorenet.hpp"

namespace t1 {

// Analytic multiply-accumulate and activation-memory model for one score-net
// forward pass over n_views views of Z tokens each. Counts are exact integer
// evaluations of the layer shapes; macs_total() == sum of the breakdown.
struct CostReport {
    int64_t depth = 0, width = 0, heads = 0;
    int64_t tokens_per_view = 0, n_views = 0;
    bool view_local = true, text_cond = true;

    // Breakdown, MACs (one multiply-accumulate = one unit).
    uint64_t macs_qkv = 0;   // q/k/v projections, all blocks
    uint64_t macs_attn = 0;  // score + value mixing, all blocks
    uint64_t macs_proj = 0;  // attention output projections, all blocks
    uint64_t macs_mlp = 0;   // feed-forward, all blocks
    uint64_t macs_cond = 0;  // timestep MLP, condition projection, adaLN heads
    uint64_t macs_io = 0;    // input embedding and output head

    uint64_t param_count = 0;
    uint64_t attn_score_scalars = 0;  // per block, per group: heads * N_g^2
    uint64_t mlp_act_scalars = 0;
    uint64_t token_act_scalars = 0;

    uint64_t macs_core() const { return macs_qkv + macs_attn + macs_proj + macs_mlp; }
    uint64_t macs_total() const { return macs_core() + macs_cond + macs_io; }
    uint64_t activation_scalars() const {
        return attn_score_scalars + mlp_act_scalars + token_act_scalars;
    }
    uint64_t memory_bytes(int64_t bytes_per_scalar) const {
        return (param_count + activation_scalars()) * static_cast<uint64_t>(bytes_per_scalar);
    }
};

// view_local: attention runs per view (groups of Z tokens); otherwise one
// group of n_views*Z. text_cond adds the condition-token projection; the
// timestep MLP and adaLN heads are always present.
CostReport estimate_macs(const ScoreNetConfig& cfg, int64_t tokens_per_view, int64_t n_views,
                         bool view_local, bool text_cond, int64_t cond_tokens);

uint64_t estimate_memory(const ScoreNetConfig& cfg, int64_t tokens_per_view, int64_t n_views,
                         bool view_local, int64_t bytes_per_scalar);

struct CostSweep {
    std::vector<int64_t> depth, width, heads, tokens_per_view, n_views;
    std::vector<bool> view_local, text_cond;
    int64_t cond_dim = 64, cond_tokens = 16, token_dim = 768;
};

// Cross product of the ranges; one CSV row per point, header included.
// Columns: depth,width,heads,Z,n_views,view_local,text,macs,act_mem,params
std::string sweep_csv(const CostSweep& sweep);

}  // namespace t1
