#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "t1/config.hpp"
#include "t1/datasets.hpp"
#include "t1/diffusion.hpp"
#include "t1/model.hpp"

namespace t1 {

struct TrainConfig {
    int64_t n_views = 8;       // views sampled per field per step
    int64_t batch_fields = 16;
    int64_t steps = 2000;
    double lr = 1e-4;
    double cond_dropout = 0.1;
    uint64_t seed = 1;
    int64_t checkpoint_every = 500;
    int64_t log_every = 50;
};

// Reads the [train] section, struct defaults for absent keys.
TrainConfig train_config_from(const Config& cfg);
void train_config_to(const TrainConfig& tc, Config& out);

// n distinct view indices in [0, total), uniform without replacement.
std::vector<int64_t> sample_views(int64_t total, int64_t n, Rng& rng);

// One field of a batch: the selected views encoded and noised at a single
// shared (t, eps), the coordinate embeddings, and the condition (the live
// null-condition tensor when dropout fires, so its gradient flows).
struct BatchField {
    const FieldSample* field = nullptr;
    std::vector<int64_t> view_indices;
    DiffusionBatch diff;
    std::vector<Tensor> coord_embeds;
    Tensor cond_tokens;
    bool cond_dropped = false;
};

struct ViewWiseBatch {
    std::vector<BatchField> fields;
};

// Consumes rng in a fixed order per field: view selection, timestep, noise,
// dropout coin. Bitwise deterministic for a given rng state.
ViewWiseBatch build_batch(Model& model, const std::vector<const FieldSample*>& fields,
                          const TrainConfig& tc, Rng& rng);

// Adam with bias correction, no weight decay.
class Adam {
  public:
    explicit Adam(std::vector<std::pair<std::string, Tensor>> params, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);

    void step(double lr);  // applies grads, then the caller zeroes them
    int64_t steps_taken() const { return t_; }

    // Moment tensors named opt.m.<param>/opt.v.<param> plus opt.step, for
    // checkpointing; restore copies them back and sets the step counter.
    std::vector<std::pair<std::string, Tensor>> state_tensors() const;
    void restore(const Checkpoint& ckpt);

  private:
    std::vector<std::pair<std::string, Tensor>> params_;
    std::vector<std::vector<real_t>> m_, v_;
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

// Forward + loss on every field, one backward, one Adam step. Returns the
// pre-update batch loss (mean over fields). Non-finite loss throws.
double train_step(Model& model, const ViewWiseBatch& batch, Adam& opt, double lr);

struct FitResult {
    int64_t steps_run = 0;
    double first_loss = 0;
    double last_loss = 0;
    std::string checkpoint_path;
    std::string csv_path;
};

// Seeded epoch shuffling, per-step forked rng, CSV `step,loss,lr,seconds`,
// periodic checkpoints carrying optimizer state and [resume] step. Passing
// resume_from restarts from that checkpoint's step with identical
// continuation (the caller loads the model from the same file).
FitResult fit(Model& model, const std::vector<FieldSample>& dataset, const TrainConfig& tc,
              const std::string& out_dir, const std::string& resume_from = "");

}  // namespace t1
