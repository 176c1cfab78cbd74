#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "t1/checkpoint.hpp"
#include "t1/codec.hpp"
#include "t1/conditioning.hpp"
#include "t1/config.hpp"
#include "t1/diffusion.hpp"
#include "t1/field.hpp"
#include "t1/scorenet.hpp"

namespace t1 {

// Everything needed to rebuild a model: field geometry, codec, score net,
// noise schedule, condition embedding dims, and sampling defaults. The
// score net's token_dim and coord_embed_dim are derived, not stored.
struct ModelConfig {
    FieldSpec field;
    PatchCodecConfig codec;
    ScoreNetConfig net;
    int64_t sched_steps = 200;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    int64_t cond_tokens = 16;  // Zc; net.cond_dim is the embedding width
    int64_t num_freqs = 10;
    uint64_t init_seed = 1;
    uint64_t text_seed = 11;
    SampleOptions sample;
};

// Reads sections [field] [codec] [net] [embedding] [schedule] [sample],
// falling back to the struct defaults for absent keys.
ModelConfig model_config_from(const Config& cfg);
void model_config_to(const ModelConfig& mc, Config& out);

// Score net + codec + schedule + learned null condition, wired together.
// Parameter construction order is fixed; the codec basis is regenerated from
// its seed rather than checkpointed.
class Model {
  public:
    explicit Model(const ModelConfig& mc);

    const ModelConfig& config() const { return cfg_; }
    const PatchCodec& codec() const { return codec_; }
    const NoiseSchedule& schedule() const { return sched_; }
    ScoreNet& net() { return net_; }
    const ScoreNet& net() const { return net_; }
    NullCondition& null_cond() { return null_cond_; }

    // Score-net params plus the trainable "cond.null" tokens.
    std::vector<std::pair<std::string, Tensor>> named_params();

    ConditionEmbedding embed_caption(const std::string& caption) const;
    // [Z, coord_embed_dim] per view, from the codec's token centers.
    std::vector<Tensor> coord_embeds_for(
        const std::vector<std::vector<double>>& view_coords) const;

    // Closure for sample_field: conditional branch uses cond, unconditional
    // the null tokens. Detached inference; bitwise deterministic.
    ScoreFn make_score_fn(const ConditionEmbedding& cond,
                          const std::vector<std::vector<double>>& view_coords) const;

    // Copies same-named tensors from a checkpoint into the live parameters
    // ("opt." entries are ignored). Missing or misshapen tensors are errors.
    void load_tensors(const Checkpoint& ckpt);

  private:
    ModelConfig cfg_;
    PatchCodec codec_;
    ScoreNet net_;
    NullCondition null_cond_;
    NoiseSchedule sched_;
};

// Canonical view coordinates for generation: the frame grid for videos, an
// azimuth ring at the toy camera defaults for 6-dim fields, empty for images.
std::vector<std::vector<double>> canonical_view_coords(const FieldSpec& spec, int64_t n);

// Checkpoint embeds the serialized config; extra_cfg entries are merged in
// (section, key, value) and extra tensors appended after the parameters.
void save_model(const std::string& path, Model& model,
                const std::vector<std::pair<std::string, Tensor>>& extra_tensors = {},
                const std::vector<std::array<std::string, 3>>& extra_cfg = {});

// Rebuilds the model from the embedded config, then loads the tensors. The
// full checkpoint (for optimizer state) and parsed config are optional outs.
Model load_model(const std::string& path, Config* out_cfg = nullptr,
                 Checkpoint* out_ckpt = nullptr);

}  // namespace t1
