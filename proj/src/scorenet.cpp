#include "t1/scorenet.hpp"

#include <cmath>

#include "t1/field.hpp"

namespace t1 {

void ScoreNetConfig::validate() const {
    if (depth < 1) throw ShapeError("ScoreNetConfig: depth < 1");
    if (width < 1 || heads < 1 || width % heads != 0) {
        throw ShapeError(strf("ScoreNetConfig: width %lld not divisible by heads %lld",
                              (long long)width, (long long)heads));
    }
    if (mlp_ratio < 1) throw ShapeError("ScoreNetConfig: mlp_ratio < 1");
    if (token_dim < 1 || cond_dim < 1 || coord_embed_dim < 1) {
        throw ShapeError("ScoreNetConfig: nonpositive io dims");
    }
    if (t_embed_dim < 2 || t_embed_dim % 2 != 0) throw ShapeError("ScoreNetConfig: t_embed_dim");
    if (max_tokens < 1) throw ShapeError("ScoreNetConfig: max_tokens < 1");
}

Tensor ada_layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, real_t eps) {
    return modulate_rows(layer_norm_rows(x, eps), gamma, beta);
}

Tensor ScoreNet::add_param(const std::string& name, Shape shape, Rng* rng) {
    Tensor t;
    if (rng) {
        const real_t std = real_t(1) / std::sqrt(static_cast<real_t>(shape[0]));
        t = Tensor::randn(shape, *rng, std);
        t.set_requires_grad(true);
    } else {
        t = Tensor::zeros(std::move(shape), true);
    }
    params_.emplace_back(name, t);
    return t;
}

ScoreNet::ScoreNet(const ScoreNetConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const int64_t W = cfg_.width;
    const int64_t in_dim = cfg_.token_dim + cfg_.coord_embed_dim;
    const int64_t head_out = W * (cfg_.adaln_gate ? 6 : 4);

    add_param("input_proj.weight", {in_dim, W}, &rng);
    add_param("input_proj.bias", {W}, nullptr);
    add_param("t_mlp.fc1.weight", {cfg_.t_embed_dim, W}, &rng);
    add_param("t_mlp.fc1.bias", {W}, nullptr);
    add_param("t_mlp.fc2.weight", {W, W}, &rng);
    add_param("t_mlp.fc2.bias", {W}, nullptr);
    add_param("cond_proj.weight", {cfg_.cond_dim, W}, &rng);
    add_param("cond_proj.bias", {W}, nullptr);
    for (int64_t b = 0; b < cfg_.depth; ++b) {
        const std::string base = strf("block%lld.", (long long)b);
        add_param(base + "adaln.weight", {W, head_out}, nullptr);  // zero-init conditioning head
        add_param(base + "adaln.bias", {head_out}, nullptr);
        add_param(base + "attn.wq", {W, W}, &rng);
        add_param(base + "attn.bq", {W}, nullptr);
        add_param(base + "attn.wk", {W, W}, &rng);
        add_param(base + "attn.bk", {W}, nullptr);
        add_param(base + "attn.wv", {W, W}, &rng);
        add_param(base + "attn.bv", {W}, nullptr);
        add_param(base + "attn.wo", {W, W}, &rng);
        add_param(base + "attn.bo", {W}, nullptr);
        add_param(base + "mlp.fc1.weight", {W, W * cfg_.mlp_ratio}, &rng);
        add_param(base + "mlp.fc1.bias", {W * cfg_.mlp_ratio}, nullptr);
        add_param(base + "mlp.fc2.weight", {W * cfg_.mlp_ratio, W}, &rng);
        add_param(base + "mlp.fc2.bias", {W}, nullptr);
    }
    add_param("final.adaln.weight", {W, 2 * W}, nullptr);
    add_param("final.adaln.bias", {2 * W}, nullptr);
    add_param("out_proj.weight", {W, cfg_.token_dim}, nullptr);  // zero so initial eps == 0
    add_param("out_proj.bias", {cfg_.token_dim}, nullptr);
}

Tensor ScoreNet::param(const std::string& name) const {
    for (const auto& [n, t] : params_) {
        if (n == name) return t;
    }
    throw Error(strf("ScoreNet: no parameter '%s'", name.c_str()));
}

int64_t ScoreNet::param_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
}

namespace {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add_rowvec(matmul(x, w), b);
}

Tensor as_vec(const Tensor& row) {  // [1, D] -> [D]
    return reshape(row, {row.dim(1)});
}

}  // namespace

std::vector<Tensor> ScoreNet::forward(const std::vector<Tensor>& view_tokens,
                                      const std::vector<Tensor>& view_coord_embeds, int64_t t,
                                      const Tensor& cond_tokens) const {
    const int64_t W = cfg_.width;
    const int64_t n_views = static_cast<int64_t>(view_tokens.size());
    if (n_views < 1 || view_coord_embeds.size() != view_tokens.size()) {
        throw ShapeError("ScoreNet::forward: view list mismatch");
    }
    int64_t total_tokens = 0;
    for (int64_t v = 0; v < n_views; ++v) {
        const auto& tok = view_tokens[static_cast<size_t>(v)];
        const auto& ce = view_coord_embeds[static_cast<size_t>(v)];
        if (tok.rank() != 2 || tok.dim(1) != cfg_.token_dim) {
            throw ShapeError(strf("ScoreNet::forward: view %lld tokens are %s, want [*,%lld]",
                                  (long long)v, shape_str(tok.shape()).c_str(),
                                  (long long)cfg_.token_dim));
        }
        if (ce.rank() != 2 || ce.dim(0) != tok.dim(0) || ce.dim(1) != cfg_.coord_embed_dim) {
            throw ShapeError(strf("ScoreNet::forward: view %lld coord embeds are %s", (long long)v,
                                  shape_str(ce.shape()).c_str()));
        }
        total_tokens += tok.dim(0);
    }
    if (total_tokens > cfg_.max_tokens) {
        throw ShapeError(strf("ScoreNet::forward: %lld tokens exceed max_tokens %lld",
                              (long long)total_tokens, (long long)cfg_.max_tokens));
    }
    if (cond_tokens.rank() != 2 || cond_tokens.dim(1) != cfg_.cond_dim) {
        throw ShapeError(strf("ScoreNet::forward: cond tokens are %s, want [*,%lld]",
                              shape_str(cond_tokens.shape()).c_str(), (long long)cfg_.cond_dim));
    }

    // Conditioning vector, shared by every view and block.
    Tensor t_vec = linear(silu(linear(embed_timestep(t, cfg_.t_embed_dim), p("t_mlp.fc1.weight"),
                                      p("t_mlp.fc1.bias"))),
                          p("t_mlp.fc2.weight"), p("t_mlp.fc2.bias"));
    Tensor pooled = reshape(mean_rows(cond_tokens), {1, cfg_.cond_dim});
    Tensor c_vec = silu(linear(pooled, p("cond_proj.weight"), p("cond_proj.bias")));
    Tensor sc = silu(add(t_vec, c_vec));  // [1, W]

    struct BlockMod {
        Tensor g1, b1, gate1, g2, b2, gate2;
    };
    std::vector<BlockMod> mods;
    mods.reserve(static_cast<size_t>(cfg_.depth));
    for (int64_t b = 0; b < cfg_.depth; ++b) {
        const std::string base = strf("block%lld.", (long long)b);
        Tensor h = linear(sc, p(base + "adaln.weight"), p(base + "adaln.bias"));
        BlockMod m;
        int64_t off = 0;
        auto next = [&] {
            Tensor piece = as_vec(slice_cols(h, off, off + W));
            off += W;
            return piece;
        };
        m.g1 = next();
        m.b1 = next();
        if (cfg_.adaln_gate) m.gate1 = next();
        m.g2 = next();
        m.b2 = next();
        if (cfg_.adaln_gate) m.gate2 = next();
        mods.push_back(std::move(m));
    }
    Tensor fin = linear(sc, p("final.adaln.weight"), p("final.adaln.bias"));
    Tensor fin_g = as_vec(slice_cols(fin, 0, W));
    Tensor fin_b = as_vec(slice_cols(fin, W, 2 * W));

    const int64_t head_dim = W / cfg_.heads;
    const real_t attn_scale = real_t(1) / std::sqrt(static_cast<real_t>(head_dim));

    std::vector<Tensor> out;
    out.reserve(static_cast<size_t>(n_views));
    attn_score_elems_ = 0;
    for (int64_t v = 0; v < n_views; ++v) {
        Tensor x = concat_cols(view_tokens[static_cast<size_t>(v)],
                               view_coord_embeds[static_cast<size_t>(v)]);
        Tensor h = linear(x, p("input_proj.weight"), p("input_proj.bias"));
        for (int64_t b = 0; b < cfg_.depth; ++b) {
            const std::string base = strf("block%lld.", (long long)b);
            const BlockMod& m = mods[static_cast<size_t>(b)];

            Tensor a = ada_layer_norm(h, m.g1, m.b1);
            Tensor q = linear(a, p(base + "attn.wq"), p(base + "attn.bq"));
            Tensor k = linear(a, p(base + "attn.wk"), p(base + "attn.bk"));
            Tensor val = linear(a, p(base + "attn.wv"), p(base + "attn.bv"));
            Tensor heads_out;
            for (int64_t hd = 0; hd < cfg_.heads; ++hd) {
                Tensor qh = slice_cols(q, hd * head_dim, (hd + 1) * head_dim);
                Tensor kh = slice_cols(k, hd * head_dim, (hd + 1) * head_dim);
                Tensor vh = slice_cols(val, hd * head_dim, (hd + 1) * head_dim);
                Tensor attn = softmax_rows(scale(matmul_nt(qh, kh), attn_scale));
                attn_score_elems_ += attn.numel();
                Tensor oh = matmul(attn, vh);
                heads_out = hd == 0 ? oh : concat_cols(heads_out, oh);
            }
            Tensor attn_out = linear(heads_out, p(base + "attn.wo"), p(base + "attn.bo"));
            h = cfg_.adaln_gate ? add_gated_rows(h, attn_out, m.gate1) : add(h, attn_out);

            Tensor mm = ada_layer_norm(h, m.g2, m.b2);
            Tensor mlp_out = linear(gelu_tanh(linear(mm, p(base + "mlp.fc1.weight"),
                                                     p(base + "mlp.fc1.bias"))),
                                    p(base + "mlp.fc2.weight"), p(base + "mlp.fc2.bias"));
            h = cfg_.adaln_gate ? add_gated_rows(h, mlp_out, m.gate2) : add(h, mlp_out);
        }
        Tensor f = ada_layer_norm(h, fin_g, fin_b);
        out.push_back(linear(f, p("out_proj.weight"), p("out_proj.bias")));
    }
    return out;
}

}  // namespace t1
