#pragma once

#include <string>

#include "t1/field.hpp"
#include "t1/rng.hpp"
#include "t1/tensor.hpp"

namespace t1 {

enum class CondSource { text, view, null_cond, external };

struct ConditionEmbedding {
    Tensor tokens;  // [Zc, cond_dim]
    CondSource source = CondSource::text;
};

// Hash-based stand-in for a text encoder: each whitespace word maps to a
// seeded unit Gaussian vector, rows cyclically padded/truncated to Zc.
// Pure function of (caption, dims, seed).
ConditionEmbedding embed_text_toy(const std::string& caption, int64_t Zc, int64_t cond_dim,
                                  uint64_t seed);

// Single-view image embedder: per-cell mean/std statistics on a fixed 4x4
// grid, through a seeded linear map, normalized; Zc = 1.
ConditionEmbedding embed_view(const FieldSpec& spec, const View& view, int64_t cond_dim,
                              uint64_t seed);

// Learned unconditional embedding for guidance; zero-initialized, trained
// whenever condition dropout swaps it in.
class NullCondition {
  public:
    NullCondition(int64_t Zc, int64_t cond_dim);
    Tensor& tokens() { return tokens_; }
    const Tensor& tokens() const { return tokens_; }
    ConditionEmbedding embedding() const { return {tokens_, CondSource::null_cond}; }

  private:
    Tensor tokens_;
};

void save_external_embeddings(const std::string& path, const ConditionEmbedding& emb);
// expected dims of 0 skip that check.
ConditionEmbedding load_external_embeddings(const std::string& path, int64_t expected_Zc = 0,
                                            int64_t expected_dim = 0);

const char* cond_source_name(CondSource source);

}  // namespace t1
