#include "t1/conditioning.hpp"

#include <cmath>
#include <sstream>

#include "t1/checkpoint.hpp"

namespace t1 {

ConditionEmbedding embed_text_toy(const std::string& caption, int64_t Zc, int64_t cond_dim,
                                  uint64_t seed) {
    if (Zc < 1 || cond_dim < 1) throw ShapeError("embed_text_toy: bad dims");
    std::istringstream in(caption);
    std::vector<std::string> words;
    for (std::string w; in >> w;) words.push_back(w);
    if (words.empty()) throw IoError("embed_text_toy: empty caption");

    // Standard-normal rows; rescaled only past the norm cap of 10.
    std::vector<std::vector<real_t>> word_vecs;
    word_vecs.reserve(words.size());
    for (const auto& w : words) {
        Rng rng(splitmix64(seed ^ fnv1a64(w)));
        std::vector<real_t> v(static_cast<size_t>(cond_dim));
        real_t norm2 = 0;
        for (auto& x : v) {
            x = static_cast<real_t>(rng.normal());
            norm2 += x * x;
        }
        const real_t norm = std::sqrt(norm2);
        if (norm > real_t(10)) {
            const real_t inv = real_t(10) / norm;
            for (auto& x : v) x *= inv;
        }
        word_vecs.push_back(std::move(v));
    }

    std::vector<real_t> tokens(static_cast<size_t>(Zc * cond_dim));
    for (int64_t i = 0; i < Zc; ++i) {
        const auto& src = word_vecs[static_cast<size_t>(i) % word_vecs.size()];
        std::copy(src.begin(), src.end(), tokens.begin() + i * cond_dim);
    }
    return {Tensor::from_vector({Zc, cond_dim}, std::move(tokens)), CondSource::text};
}

ConditionEmbedding embed_view(const FieldSpec& spec, const View& view, int64_t cond_dim,
                              uint64_t seed) {
    if (cond_dim < 1) throw ShapeError("embed_view: bad cond_dim");
    if (static_cast<int64_t>(view.pixels.size()) != spec.channels_per_view()) {
        throw ShapeError("embed_view: view does not match spec");
    }
    const int64_t H = spec.view_height, W = spec.view_width, C = spec.signal_dim;
    constexpr int64_t kGrid = 4;
    const int64_t feat_len = kGrid * kGrid * C * 2;

    // Cell mean/std pairs over a fixed 4x4 spatial grid.
    std::vector<double> sum(static_cast<size_t>(kGrid * kGrid * C), 0.0);
    std::vector<double> sum2(static_cast<size_t>(kGrid * kGrid * C), 0.0);
    std::vector<int64_t> count(static_cast<size_t>(kGrid * kGrid), 0);
    for (int64_t i = 0; i < H; ++i) {
        const int64_t gi = i * kGrid / H;
        for (int64_t j = 0; j < W; ++j) {
            const int64_t gj = j * kGrid / W;
            const int64_t cell = gi * kGrid + gj;
            ++count[static_cast<size_t>(cell)];
            for (int64_t c = 0; c < C; ++c) {
                const double v = view.pixels[static_cast<size_t>((i * W + j) * C + c)];
                sum[static_cast<size_t>(cell * C + c)] += v;
                sum2[static_cast<size_t>(cell * C + c)] += v * v;
            }
        }
    }
    std::vector<double> feat(static_cast<size_t>(feat_len));
    for (int64_t cell = 0; cell < kGrid * kGrid; ++cell) {
        const double n = static_cast<double>(std::max<int64_t>(1, count[static_cast<size_t>(cell)]));
        for (int64_t c = 0; c < C; ++c) {
            const double mu = sum[static_cast<size_t>(cell * C + c)] / n;
            const double var = std::max(0.0, sum2[static_cast<size_t>(cell * C + c)] / n - mu * mu);
            feat[static_cast<size_t>((cell * C + c) * 2)] = mu;
            feat[static_cast<size_t>((cell * C + c) * 2 + 1)] = std::sqrt(var);
        }
    }

    Rng rng(splitmix64(seed ^ fnv1a64("view-embed")));
    std::vector<real_t> out(static_cast<size_t>(cond_dim), real_t(0));
    const double scale = 1.0 / std::sqrt(static_cast<double>(feat_len));
    for (auto& o : out) {
        double acc = 0;
        for (double f : feat) acc += rng.normal() * scale * f;
        o = static_cast<real_t>(acc);
    }
    real_t norm2 = 0;
    for (real_t v : out) norm2 += v * v;
    if (norm2 > real_t(0)) {
        const real_t inv = real_t(1) / std::sqrt(norm2);
        for (auto& v : out) v *= inv;
    }
    return {Tensor::from_vector({1, cond_dim}, std::move(out)), CondSource::view};
}

NullCondition::NullCondition(int64_t Zc, int64_t cond_dim) {
    if (Zc < 1 || cond_dim < 1) throw ShapeError("NullCondition: bad dims");
    tokens_ = Tensor::zeros({Zc, cond_dim}, true);
}

void save_external_embeddings(const std::string& path, const ConditionEmbedding& emb) {
    Checkpoint ck;
    ck.config_text = std::string("source = ") + cond_source_name(emb.source) + "\n";
    ck.tensors.emplace_back("cond.tokens", emb.tokens);
    save_checkpoint(path, ck);
}

ConditionEmbedding load_external_embeddings(const std::string& path, int64_t expected_Zc,
                                            int64_t expected_dim) {
    auto ck = load_checkpoint(path);
    for (auto& [name, tensor] : ck.tensors) {
        if (name != "cond.tokens") continue;
        if (tensor.rank() != 2) throw ShapeError(strf("%s: cond.tokens must be rank 2", path.c_str()));
        if ((expected_Zc && tensor.dim(0) != expected_Zc) ||
            (expected_dim && tensor.dim(1) != expected_dim)) {
            throw ShapeError(strf("%s: embedding is %lldx%lld, config wants %lldx%lld", path.c_str(),
                                  (long long)tensor.dim(0), (long long)tensor.dim(1),
                                  (long long)expected_Zc, (long long)expected_dim));
        }
        return {tensor, CondSource::external};
    }
    throw IoError(strf("%s: no cond.tokens tensor", path.c_str()));
}

const char* cond_source_name(CondSource source) {
    switch (source) {
        case CondSource::text: return "text";
        case CondSource::view: return "view";
        case CondSource::null_cond: return "null";
        case CondSource::external: return "external";
    }
    return "?";
}

}  // namespace t1
