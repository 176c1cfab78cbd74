#include "t1/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "t1/common.hpp"

namespace t1 {

TrainConfig train_config_from(const Config& cfg) {
    TrainConfig tc;
    tc.n_views = cfg.get_i64("train", "n_views", tc.n_views);
    tc.batch_fields = cfg.get_i64("train", "batch_fields", tc.batch_fields);
    tc.steps = cfg.get_i64("train", "steps", tc.steps);
    tc.lr = cfg.get_f64("train", "lr", tc.lr);
    tc.cond_dropout = cfg.get_f64("train", "cond_dropout", tc.cond_dropout);
    tc.seed = cfg.get_u64("train", "seed", tc.seed);
    tc.checkpoint_every = cfg.get_i64("train", "checkpoint_every", tc.checkpoint_every);
    tc.log_every = cfg.get_i64("train", "log_every", tc.log_every);
    if (tc.n_views < 1 || tc.batch_fields < 1 || tc.steps < 1) {
        throw IoError("train config: n_views, batch_fields and steps must be >= 1");
    }
    if (tc.cond_dropout < 0 || tc.cond_dropout > 1) {
        throw IoError("train config: cond_dropout must lie in [0,1]");
    }
    return tc;
}

void train_config_to(const TrainConfig& tc, Config& out) {
    out.set_i64("train", "n_views", tc.n_views);
    out.set_i64("train", "batch_fields", tc.batch_fields);
    out.set_i64("train", "steps", tc.steps);
    out.set_f64("train", "lr", tc.lr);
    out.set_f64("train", "cond_dropout", tc.cond_dropout);
    out.set_u64("train", "seed", tc.seed);
    out.set_i64("train", "checkpoint_every", tc.checkpoint_every);
    out.set_i64("train", "log_every", tc.log_every);
}

std::vector<int64_t> sample_views(int64_t total, int64_t n, Rng& rng) {
    if (n < 1 || n > total) {
        throw ShapeError(strf("sample_views: want %lld of %lld views", (long long)n,
                              (long long)total));
    }
    std::vector<int64_t> idx(static_cast<size_t>(total));
    std::iota(idx.begin(), idx.end(), int64_t(0));
    for (int64_t i = 0; i < n; ++i) {
        const int64_t j = i + static_cast<int64_t>(rng.randint(static_cast<uint64_t>(total - i)));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    idx.resize(static_cast<size_t>(n));
    return idx;
}

ViewWiseBatch build_batch(Model& model, const std::vector<const FieldSample*>& fields,
                          const TrainConfig& tc, Rng& rng) {
    if (fields.empty()) throw ShapeError("build_batch: no fields");
    const PatchCodec& codec = model.codec();
    const int64_t T = model.schedule().T;

    ViewWiseBatch batch;
    for (const FieldSample* field : fields) {
        if (!field) throw ShapeError("build_batch: null field");
        if (field->spec != model.config().field) {
            throw ShapeError("build_batch: field spec does not match the model");
        }
        BatchField bf;
        bf.field = field;
        bf.view_indices =
            sample_views(static_cast<int64_t>(field->views.size()), tc.n_views, rng);
        const int64_t t = 1 + static_cast<int64_t>(rng.randint(static_cast<uint64_t>(T)));

        std::vector<std::vector<real_t>> y0;
        std::vector<std::vector<double>> coords;
        for (int64_t vi : bf.view_indices) {
            const View& view = field->views[static_cast<size_t>(vi)];
            y0.push_back(codec.encode(view).tokens);
            coords.push_back(view.view_coord);
        }
        bf.diff = forward_diffuse_views(y0, t, model.schedule(), rng);
        bf.coord_embeds = model.coord_embeds_for(coords);

        bf.cond_dropped = rng.uniform() < tc.cond_dropout;
        bf.cond_tokens = bf.cond_dropped ? model.null_cond().tokens()
                                         : model.embed_caption(field->caption).tokens;
        batch.fields.push_back(std::move(bf));
    }
    return batch;
}

Adam::Adam(std::vector<std::pair<std::string, Tensor>> params, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (params_.empty()) throw ShapeError("Adam: no parameters");
    for (const auto& [name, t] : params_) {
        m_.emplace_back(static_cast<size_t>(t.numel()), real_t(0));
        v_.emplace_back(static_cast<size_t>(t.numel()), real_t(0));
    }
}

void Adam::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor& p = params_[pi].second;
        auto data = p.data();
        auto grad = p.grad();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (size_t i = 0; i < m.size(); ++i) {
            const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
            const double mn = beta1_ * static_cast<double>(m[i]) + (1.0 - beta1_) * g;
            const double vn = beta2_ * static_cast<double>(v[i]) + (1.0 - beta2_) * g * g;
            m[i] = static_cast<real_t>(mn);
            v[i] = static_cast<real_t>(vn);
            data[i] = static_cast<real_t>(static_cast<double>(data[i]) -
                                          lr * (mn / bc1) / (std::sqrt(vn / bc2) + eps_));
        }
    }
}

std::vector<std::pair<std::string, Tensor>> Adam::state_tensors() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        const std::string& name = params_[pi].first;
        out.emplace_back("opt.m." + name,
                         Tensor::from_vector({static_cast<int64_t>(m_[pi].size())}, m_[pi]));
        out.emplace_back("opt.v." + name,
                         Tensor::from_vector({static_cast<int64_t>(v_[pi].size())}, v_[pi]));
    }
    out.emplace_back("opt.step", Tensor::scalar(static_cast<real_t>(t_)));
    return out;
}

void Adam::restore(const Checkpoint& ckpt) {
    auto find = [&](const std::string& name) -> const Tensor& {
        for (const auto& [n, t] : ckpt.tensors) {
            if (n == name) return t;
        }
        throw IoError(strf("checkpoint is missing optimizer tensor '%s'", name.c_str()));
    };
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        const Tensor& tm = find("opt.m." + params_[pi].first);
        const Tensor& tv = find("opt.v." + params_[pi].first);
        if (tm.numel() != static_cast<int64_t>(m_[pi].size()) ||
            tv.numel() != static_cast<int64_t>(v_[pi].size())) {
            throw IoError(strf("optimizer state for '%s' has the wrong size",
                               params_[pi].first.c_str()));
        }
        std::copy(tm.data().begin(), tm.data().end(), m_[pi].begin());
        std::copy(tv.data().begin(), tv.data().end(), v_[pi].begin());
    }
    t_ = static_cast<int64_t>(std::llround(static_cast<double>(find("opt.step").item())));
}

double train_step(Model& model, const ViewWiseBatch& batch, Adam& opt, double lr) {
    if (batch.fields.empty()) throw ShapeError("train_step: empty batch");
    auto params = model.named_params();
    for (auto& [name, t] : params) t.zero_grad();

    Tensor total;
    for (const BatchField& bf : batch.fields) {
        const int64_t Z = model.codec().tokens_per_view();
        const int64_t D = model.codec().token_dim();
        std::vector<Tensor> tokens;
        tokens.reserve(bf.diff.y_t.size());
        for (const auto& y : bf.diff.y_t) tokens.push_back(Tensor::from_vector({Z, D}, y));
        std::vector<Tensor> eps_pred =
            model.net().forward(tokens, bf.coord_embeds, bf.diff.t, bf.cond_tokens);
        Tensor loss = training_loss(eps_pred, bf.diff);
        total = total.defined() ? add(total, loss) : loss;
    }
    Tensor mean_loss = scale(total, real_t(1) / static_cast<real_t>(batch.fields.size()));
    const double value = static_cast<double>(mean_loss.item());
    if (!std::isfinite(value)) {
        throw NumericError(strf("train_step: non-finite loss at optimizer step %lld",
                                (long long)(opt.steps_taken() + 1)));
    }
    GradTape tape(mean_loss);
    tape.backward();
    opt.step(lr);
    return value;
}

namespace {

// Deterministic epoch-shuffled field order; epoch permutations come from a
// dedicated rng stream so resuming at any step reproduces the sequence.
class FieldOrder {
  public:
    FieldOrder(uint64_t seed, int64_t dataset_size) : seed_(seed), n_(dataset_size) {}

    int64_t at(int64_t global_index) {
        const int64_t epoch = global_index / n_;
        if (epoch != cached_epoch_) {
            perm_.resize(static_cast<size_t>(n_));
            std::iota(perm_.begin(), perm_.end(), int64_t(0));
            Rng rng = Rng(seed_).fork(0x9e3779b900000000ull + static_cast<uint64_t>(epoch));
            rng.shuffle(perm_);
            cached_epoch_ = epoch;
        }
        return perm_[static_cast<size_t>(global_index % n_)];
    }

  private:
    uint64_t seed_;
    int64_t n_;
    int64_t cached_epoch_ = -1;
    std::vector<int64_t> perm_;
};

}  // namespace

FitResult fit(Model& model, const std::vector<FieldSample>& dataset, const TrainConfig& tc,
              const std::string& out_dir, const std::string& resume_from) {
    if (dataset.empty()) throw ShapeError("fit: empty dataset");
    std::filesystem::create_directories(out_dir);

    Adam opt(model.named_params());
    int64_t start = 0;
    if (!resume_from.empty()) {
        Checkpoint ckpt = load_checkpoint(resume_from);
        Config cfg = Config::parse_text(ckpt.config_text, resume_from);
        start = cfg.get_i64("resume", "step", 0);
        opt.restore(ckpt);
        if (opt.steps_taken() != start) {
            throw IoError(strf("%s: optimizer step %lld disagrees with resume step %lld",
                               resume_from.c_str(), (long long)opt.steps_taken(),
                               (long long)start));
        }
    }
    if (start >= tc.steps) {
        throw IoError(strf("fit: resume step %lld is past the configured %lld steps",
                           (long long)start, (long long)tc.steps));
    }

    FitResult res;
    res.csv_path = out_dir + "/loss.csv";
    res.checkpoint_path = out_dir + "/ckpt.t1cp";
    std::ofstream csv(res.csv_path, start == 0 ? std::ios::trunc : std::ios::app);
    if (!csv) throw IoError(strf("%s: cannot open loss curve for writing", res.csv_path.c_str()));
    if (start == 0) csv << "step,loss,lr,seconds\n";

    const Rng base(tc.seed);
    FieldOrder order(tc.seed, static_cast<int64_t>(dataset.size()));
    const auto t0 = std::chrono::steady_clock::now();

    auto save = [&](int64_t step_done) {
        save_model(res.checkpoint_path, model, opt.state_tensors(),
                   {{{"resume", "step", strf("%lld", (long long)step_done)}}});
    };

    for (int64_t s = start; s < tc.steps; ++s) {
        std::vector<const FieldSample*> fields;
        fields.reserve(static_cast<size_t>(tc.batch_fields));
        for (int64_t j = 0; j < tc.batch_fields; ++j) {
            fields.push_back(&dataset[static_cast<size_t>(
                order.at(s * tc.batch_fields + j))]);
        }
        Rng step_rng = base.fork(static_cast<uint64_t>(s));
        ViewWiseBatch batch = build_batch(model, fields, tc, step_rng);
        const double loss = train_step(model, batch, opt, tc.lr);

        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        csv << (s + 1) << ',' << format_f64(loss) << ',' << format_f64(tc.lr) << ','
            << strf("%.3f", seconds) << '\n';
        if (s == start) res.first_loss = loss;
        res.last_loss = loss;
        ++res.steps_run;

        if (tc.log_every > 0 && ((s + 1) % tc.log_every == 0 || s + 1 == tc.steps)) {
            std::printf("step %lld/%lld loss %.6f\n", (long long)(s + 1), (long long)tc.steps,
                        loss);
            std::fflush(stdout);
            csv.flush();
        }
        if ((tc.checkpoint_every > 0 && (s + 1) % tc.checkpoint_every == 0) ||
            s + 1 == tc.steps) {
            save(s + 1);
        }
    }
    csv.flush();
    return res;
}

}  // namespace t1
