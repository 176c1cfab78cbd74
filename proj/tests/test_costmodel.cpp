#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "t1/costmodel.hpp"
#include "t1/rng.hpp"

using namespace t1;

namespace {

ScoreNetConfig tiny_cfg() {
    ScoreNetConfig cfg;
    cfg.depth = 1;
    cfg.width = 2;
    cfg.heads = 1;
    cfg.token_dim = 1;
    cfg.coord_embed_dim = 2;
    cfg.cond_dim = 2;
    cfg.t_embed_dim = 2;
    return cfg;
}

ScoreNetConfig xl_cfg() {
    ScoreNetConfig cfg;
    cfg.depth = 28;
    cfg.width = 1152;
    cfg.heads = 16;
    cfg.token_dim = 16;
    cfg.coord_embed_dim = 40;
    cfg.cond_dim = 4096;
    return cfg;
}

}  // namespace

TEST_CASE("core breakdown: hand count at width 2, one token") {
    // Per block at N=1, W=2: qkv 3*N*W^2 = 12, proj N*W^2 = 4,
    // mlp 2*N*W*(4W) = 32, scores+mix 2*W*N^2 = 4. Total 52.
    CostReport r = estimate_macs(tiny_cfg(), 1, 1, true, true, 1);
    CHECK(r.macs_qkv == 12);
    CHECK(r.macs_proj == 4);
    CHECK(r.macs_mlp == 32);
    CHECK(r.macs_attn == 4);
    CHECK(r.macs_core() == 52);
}

TEST_CASE("totals are the sum of the breakdown") {
    CostReport r = estimate_macs(xl_cfg(), 256, 4, true, true, 256);
    CHECK(r.macs_core() == r.macs_qkv + r.macs_attn + r.macs_proj + r.macs_mlp);
    CHECK(r.macs_total() == r.macs_core() + r.macs_cond + r.macs_io);
    CHECK(r.macs_total() > 0);
}

TEST_CASE("transformer-scale estimate lands on published totals") {
    // 28 blocks, width 1152, 16 heads, 256 tokens: 117.06G MACs with text
    // conditioning, 113.31G without, both within 10%.
    CostReport with_text = estimate_macs(xl_cfg(), 256, 1, true, true, 256);
    CostReport no_text = estimate_macs(xl_cfg(), 256, 1, true, false, 256);
    const double g_with = static_cast<double>(with_text.macs_total()) / 1e9;
    const double g_without = static_cast<double>(no_text.macs_total()) / 1e9;
    CHECK(std::abs(g_with - 117.06) / 117.06 < 0.10);
    CHECK(std::abs(g_without - 113.31) / 113.31 < 0.10);
    CHECK(with_text.macs_total() > no_text.macs_total());
}

TEST_CASE("attention term is linear in the view count") {
    ScoreNetConfig cfg = xl_cfg();
    CostReport v1 = estimate_macs(cfg, 256, 1, true, true, 256);
    CostReport v4 = estimate_macs(cfg, 256, 4, true, true, 256);
    CostReport v8 = estimate_macs(cfg, 256, 8, true, true, 256);
    CHECK(v4.macs_attn == 4 * v1.macs_attn);
    CHECK(v8.macs_attn == 8 * v1.macs_attn);
    // Everything token-bound scales the same way.
    CHECK(v4.macs_qkv == 4 * v1.macs_qkv);
    CHECK(v8.macs_mlp == 8 * v1.macs_mlp);
}

TEST_CASE("global attention at 8 views costs 8x the view-local score memory") {
    ScoreNetConfig cfg = xl_cfg();
    CostReport local = estimate_macs(cfg, 1024, 8, true, true, 256);
    CostReport global = estimate_macs(cfg, 1024, 8, false, true, 256);
    CHECK(global.attn_score_scalars == 8 * local.attn_score_scalars);
    CHECK(global.macs_attn == 8 * local.macs_attn);
    // Non-attention terms are unchanged by the grouping.
    CHECK(global.macs_qkv == local.macs_qkv);
    CHECK(global.macs_mlp == local.macs_mlp);
    CHECK(global.param_count == local.param_count);
}

TEST_CASE("score memory floor: one token leaves depth*heads scalars") {
    ScoreNetConfig cfg = tiny_cfg();
    cfg.depth = 3;
    cfg.heads = 1;
    CostReport r = estimate_macs(cfg, 1, 1, true, true, 1);
    CHECK(r.attn_score_scalars == 3);
}

TEST_CASE("parameter count matches the live network") {
    for (bool gate : {true, false}) {
        ScoreNetConfig cfg;
        cfg.depth = 2;
        cfg.width = 16;
        cfg.heads = 2;
        cfg.token_dim = 12;
        cfg.coord_embed_dim = 8;
        cfg.cond_dim = 10;
        cfg.t_embed_dim = 6;
        cfg.adaln_gate = gate;
        Rng init(3);
        ScoreNet net(cfg, init);
        CostReport r = estimate_macs(cfg, 4, 1, true, true, 4);
        CHECK(r.param_count == static_cast<uint64_t>(net.param_count()));
    }
}

TEST_CASE("width doubling roughly quadruples core compute") {
    ScoreNetConfig a = xl_cfg();
    ScoreNetConfig b = xl_cfg();
    b.width = a.width * 2;
    CostReport ra = estimate_macs(a, 256, 1, true, true, 256);
    CostReport rb = estimate_macs(b, 256, 1, true, true, 256);
    const double ratio = static_cast<double>(rb.macs_core()) / static_cast<double>(ra.macs_core());
    // Attention scores scale linearly in width, so the ratio sits just under 4.
    CHECK(ratio > 3.5);
    CHECK(ratio <= 4.0);
}

TEST_CASE("token scaling: view-local attention keeps MACs linear in Z") {
    ScoreNetConfig cfg = xl_cfg();
    // Fix total tokens, split across more views: quadratic term shrinks.
    CostReport one_group = estimate_macs(cfg, 1024, 1, true, true, 256);
    CostReport eight_groups = estimate_macs(cfg, 128, 8, true, true, 256);
    CHECK(one_group.macs_qkv == eight_groups.macs_qkv);
    CHECK(one_group.macs_attn == 8 * eight_groups.macs_attn);
}

TEST_CASE("memory estimate composes params and activations") {
    ScoreNetConfig cfg = xl_cfg();
    CostReport r = estimate_macs(cfg, 256, 2, true, true, 256);
    CHECK(r.memory_bytes(8) == (r.param_count + r.activation_scalars()) * 8);
    CHECK(estimate_memory(cfg, 256, 2, true, 8) == r.memory_bytes(8));
    CHECK(r.memory_bytes(4) * 2 == r.memory_bytes(8));
}

TEST_CASE("sweep csv: one row per grid point, parseable numbers") {
    CostSweep sweep;
    sweep.depth = {1, 2};
    sweep.width = {8};
    sweep.heads = {2};
    sweep.tokens_per_view = {4, 16};
    sweep.n_views = {1};
    sweep.view_local = {true};
    sweep.text_cond = {false};
    sweep.token_dim = 4;
    const std::string csv = sweep_csv(sweep);
    std::istringstream in(csv);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "depth,width,heads,Z,n_views,view_local,text,macs,act_mem,params");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::istringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        REQUIRE(cells.size() == 10);
        ScoreNetConfig cfg;
        cfg.depth = std::stoll(cells[0]);
        cfg.width = std::stoll(cells[1]);
        cfg.heads = std::stoll(cells[2]);
        cfg.token_dim = sweep.token_dim;
        cfg.cond_dim = sweep.cond_dim;
        CostReport r = estimate_macs(cfg, std::stoll(cells[3]), std::stoll(cells[4]),
                                     cells[5] == "1", cells[6] == "1", sweep.cond_tokens);
        CHECK(std::stoull(cells[7]) == r.macs_total());
        CHECK(std::stoull(cells[9]) == r.param_count);
    }
    CHECK(rows == 4);
}
