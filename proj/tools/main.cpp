#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "t1/costmodel.hpp"
#include "t1/datasets.hpp"
#include "t1/evalsuite.hpp"
#include "t1/image_io.hpp"
#include "t1/model.hpp"
#include "t1/training.hpp"

namespace {

using namespace t1;

int usage_error(const CLI::App* cmd, const std::string& message) {
    std::fprintf(stderr, "error: %s\n\n%s", message.c_str(), cmd->help().c_str());
    return 2;
}

void write_views(const std::string& out_dir, const FieldSpec& spec,
                 const std::vector<View>& views, bool png) {
    std::filesystem::create_directories(out_dir);
    for (size_t v = 0; v < views.size(); ++v) {
        const std::string name = strf("view_%03zu.%s", v, png ? "png" : "ppm");
        ImageU8 img = view_to_u8(spec, views[v]);
        write_image(out_dir + "/" + name, img);
    }
}

struct TrainArgs {
    std::string config, data, out = "run", resume;
    int64_t steps = 0;
    int64_t seed = -1;
    bool strict = false;
};

int cmd_train(const CLI::App* cmd, const TrainArgs& a) {
    if (a.config.empty()) return usage_error(cmd, "--config is required");
    if (a.data.empty()) return usage_error(cmd, "--data is required");
    if (a.strict) setenv("T1_THREADS", "1", 1);

    Config cfg = Config::parse_file(a.config);
    ModelConfig mc = model_config_from(cfg);
    TrainConfig tc = train_config_from(cfg);
    cfg.ensure_all_consumed();
    if (a.steps > 0) tc.steps = a.steps;
    if (a.seed >= 0) tc.seed = static_cast<uint64_t>(a.seed);

    ManifestReport report;
    ManifestDataset ds = ingest_manifest(a.data, mc.field, &report);
    for (const std::string& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    std::printf("dataset: %lld fields (%lld records, %lld skipped)\n", (long long)report.fields,
                (long long)report.records, (long long)report.skipped_records);
    std::vector<FieldSample> dataset = load_all(ds);

    Model model = a.resume.empty() ? Model(mc) : load_model(a.resume);
    FitResult res = fit(model, dataset, tc, a.out, a.resume);
    std::printf("trained %lld steps: loss %.6f -> %.6f\ncheckpoint: %s\nloss curve: %s\n",
                (long long)res.steps_run, res.first_loss, res.last_loss,
                res.checkpoint_path.c_str(), res.csv_path.c_str());
    return 0;
}

struct SampleArgs {
    std::string ckpt, caption, cond_view, cond_file, out = "samples";
    int64_t views = 0;
    int64_t steps = 0;
    double guidance = -1;
    int64_t seed = 1;
    bool unconditional = false;
    bool png = false;
};

int cmd_sample(const CLI::App* cmd, const SampleArgs& a) {
    if (a.ckpt.empty()) return usage_error(cmd, "--ckpt is required");
    const int sources = (!a.caption.empty()) + (!a.cond_view.empty()) + (!a.cond_file.empty()) +
                        a.unconditional;
    if (sources != 1) {
        return usage_error(
            cmd, "exactly one of --caption, --cond-view, --cond-file, --unconditional");
    }

    Model model = load_model(a.ckpt);
    const ModelConfig& mc = model.config();
    const int64_t n = a.views > 0 ? a.views : mc.field.num_views;

    ConditionEmbedding cond;
    std::string cond_desc;
    if (!a.caption.empty()) {
        cond = model.embed_caption(a.caption);
        cond_desc = "caption=" + a.caption;
    } else if (!a.cond_view.empty()) {
        ImageU8 img = read_image(a.cond_view);
        View v;
        v.pixels = u8_to_signal(img);
        FieldSpec vs = mc.field;
        vs.view_height = img.height;
        vs.view_width = img.width;
        vs.signal_dim = img.channels;
        cond = embed_view(vs, v, mc.net.cond_dim, mc.text_seed);
        if (cond.tokens.dim(0) != mc.cond_tokens) {
            // Cyclic-pad the single view token to the configured Zc.
            std::vector<real_t> rows;
            for (int64_t r = 0; r < mc.cond_tokens; ++r) {
                auto d = cond.tokens.data();
                rows.insert(rows.end(), d.begin(), d.end());
            }
            cond.tokens = Tensor::from_vector({mc.cond_tokens, mc.net.cond_dim}, rows);
        }
        cond_desc = "view=" + a.cond_view;
    } else if (!a.cond_file.empty()) {
        cond = load_external_embeddings(a.cond_file, mc.cond_tokens, mc.net.cond_dim);
        cond_desc = "file=" + a.cond_file;
    } else {
        cond = model.null_cond().embedding();
        cond_desc = "unconditional";
    }

    SampleOptions opt = mc.sample;
    if (a.guidance >= 0) opt.guidance = a.guidance;
    if (a.unconditional) opt.guidance = 1.0;

    NoiseSchedule sched = model.schedule();
    if (a.steps > 0 && a.steps != sched.T) {
        sched = make_schedule(a.steps, mc.beta_start, mc.beta_end);
    }

    const auto coords = canonical_view_coords(mc.field, n);
    ScoreFn score = model.make_score_fn(cond, coords);
    Rng rng(static_cast<uint64_t>(a.seed));
    std::vector<View> views = sample_field(score, mc.field, model.codec(), coords, sched, opt, rng);

    write_views(a.out, mc.field, views, a.png);
    std::ofstream meta(a.out + "/metadata.txt");
    meta << "seed=" << a.seed << "\n"
         << "guidance=" << format_f64(opt.guidance) << "\n"
         << "steps=" << sched.T << "\n"
         << "views=" << n << "\n"
         << "condition=" << cond_source_name(cond.source) << "\n"
         << cond_desc << "\n";
    meta.close();
    std::printf("wrote %lld views and metadata.txt to %s\n", (long long)n, a.out.c_str());
    return 0;
}

struct CostArgs {
    int64_t depth = 28, width = 1152, heads = 16, tokens = 256, views = 1;
    int64_t token_dim = 16, cond_dim = 4096, cond_tokens = 256;
    bool global_attn = false, no_text = false;
    std::string csv;
};

int cmd_cost(const CostArgs& a) {
    ScoreNetConfig cfg;
    cfg.depth = a.depth;
    cfg.width = a.width;
    cfg.heads = a.heads;
    cfg.token_dim = a.token_dim;
    cfg.cond_dim = a.cond_dim;
    cfg.coord_embed_dim = 40;
    CostReport r = estimate_macs(cfg, a.tokens, a.views, !a.global_attn, !a.no_text,
                                 a.cond_tokens);
    std::printf("depth %lld width %lld heads %lld | %lld tokens x %lld views, %s attention, "
                "text %s\n",
                (long long)r.depth, (long long)r.width, (long long)r.heads,
                (long long)r.tokens_per_view, (long long)r.n_views,
                r.view_local ? "view-local" : "global", r.text_cond ? "on" : "off");
    std::printf("  qkv        %llu\n  attention  %llu\n  projection %llu\n  mlp        %llu\n",
                (unsigned long long)r.macs_qkv, (unsigned long long)r.macs_attn,
                (unsigned long long)r.macs_proj, (unsigned long long)r.macs_mlp);
    std::printf("  core       %llu\n  cond       %llu\n  io         %llu\n",
                (unsigned long long)r.macs_core(), (unsigned long long)r.macs_cond,
                (unsigned long long)r.macs_io);
    std::printf("total MACs   %llu (%.2f G)\n", (unsigned long long)r.macs_total(),
                static_cast<double>(r.macs_total()) / 1e9);
    std::printf("params       %llu\n", (unsigned long long)r.param_count);
    std::printf("activation   %llu scalars (%llu attention scores)\n",
                (unsigned long long)r.activation_scalars(),
                (unsigned long long)r.attn_score_scalars);
    std::printf("memory       %llu bytes at %zu bytes/scalar\n",
                (unsigned long long)r.memory_bytes(static_cast<int64_t>(sizeof(real_t))),
                sizeof(real_t));
    if (!a.csv.empty()) {
        CostSweep sweep;
        sweep.depth = {a.depth};
        sweep.width = {a.width};
        sweep.heads = {a.heads};
        sweep.tokens_per_view = {a.tokens};
        sweep.n_views = {a.views};
        sweep.view_local = {!a.global_attn};
        sweep.text_cond = {!a.no_text};
        sweep.cond_dim = a.cond_dim;
        sweep.cond_tokens = a.cond_tokens;
        sweep.token_dim = a.token_dim;
        std::ofstream out(a.csv);
        if (!out) throw IoError(strf("%s: cannot write CSV", a.csv.c_str()));
        out << sweep_csv(sweep);
        std::printf("csv          %s\n", a.csv.c_str());
    }
    return 0;
}

struct DatagenArgs {
    std::string kind = "video", out = "data";
    int64_t count = 12;
    int64_t seed = 1;
    bool prefill = false;
};

int cmd_datagen(const CLI::App* cmd, const DatagenArgs& a) {
    if (a.kind != "video" && a.kind != "views" && a.kind != "image") {
        return usage_error(cmd, "--kind must be video, views or image");
    }
    if (a.count < 1) return usage_error(cmd, "--count must be >= 1");
    std::filesystem::create_directories(a.out);
    std::ofstream manifest(a.out + "/manifest.csv");
    if (!manifest) throw IoError(strf("%s/manifest.csv: cannot write", a.out.c_str()));

    for (int64_t i = 0; i < a.count; ++i) {
        const std::string fdir = strf("field_%03lld", (long long)i);
        std::filesystem::create_directories(a.out + "/" + fdir);
        FieldSample field;
        std::vector<std::vector<uint8_t>> masks;
        if (a.kind == "views") {
            ToyViewsSpec spec;
            spec.color = static_cast<ToyColor>(i % 3);
            field = gen_toy_views(spec, static_cast<uint64_t>(a.seed) + static_cast<uint64_t>(i),
                                  &masks);
        } else {
            ToyVideoSpec spec;
            spec.color = static_cast<ToyColor>(i % 3);
            spec.motion = static_cast<ToyMotion>((i / 3) % 2);
            if (a.kind == "image") spec.frames = 1;
            field = gen_toy_video(spec, static_cast<uint64_t>(a.seed) + static_cast<uint64_t>(i));
        }
        Rng fill_rng(splitmix64(static_cast<uint64_t>(a.seed ^ (i + 77))));
        for (size_t v = 0; v < field.views.size(); ++v) {
            const std::string rel = strf("%s/view_%03zu.ppm", fdir.c_str(), v);
            View out_view = field.views[v];
            if (a.prefill && v < masks.size()) {
                out_view = prefill_blank(field.spec, out_view, masks[v], 0.1, fill_rng);
            }
            write_ppm(a.out + "/" + rel, view_to_u8(field.spec, out_view));
            if (v < masks.size()) {
                ImageU8 m;
                m.width = field.spec.view_width;
                m.height = field.spec.view_height;
                m.channels = 1;
                for (uint8_t b : masks[v]) m.data.push_back(b ? 255 : 0);
                write_pgm(a.out + "/" + rel + ".mask.pgm", m);
            }
            manifest << rel;
            for (double c : field.views[v].view_coord) manifest << ", " << format_f64(c);
            manifest << ", " << field.caption << "\n";
        }
    }
    manifest.close();
    std::printf("wrote %lld fields and manifest.csv to %s\n", (long long)a.count, a.out.c_str());
    return 0;
}

struct EvalArgs {
    std::string ckpt, data, out;
    int64_t t = 100;
    int64_t seed = 1;
};

int cmd_eval(const CLI::App* cmd, const EvalArgs& a) {
    if (a.ckpt.empty()) return usage_error(cmd, "--ckpt is required");
    if (a.data.empty()) return usage_error(cmd, "--data is required");

    Model model = load_model(a.ckpt);
    ManifestReport report;
    ManifestDataset ds = ingest_manifest(a.data, model.config().field, &report);
    for (const std::string& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    if (ds.size() == 0) throw IoError(strf("%s: no usable fields", a.data.c_str()));

    std::ostringstream csv;
    csv << "field,caption,mse,psnr\n";
    double mse_sum = 0, psnr_sum = 0;
    for (int64_t i = 0; i < ds.size(); ++i) {
        FieldSample field = ds.load(i);
        ReconEval r = eval_reconstruction(model, field, a.t,
                                          static_cast<uint64_t>(a.seed) +
                                              static_cast<uint64_t>(i));
        csv << i << ',' << field.caption << ',' << format_f64(r.mse) << ','
            << format_f64(r.psnr) << '\n';
        mse_sum += r.mse;
        psnr_sum += r.psnr;
    }
    std::printf("%lld fields at t=%lld: mean mse %.6f, mean psnr %.2f dB\n", (long long)ds.size(),
                (long long)a.t, mse_sum / static_cast<double>(ds.size()),
                psnr_sum / static_cast<double>(ds.size()));
    if (!a.out.empty()) {
        std::ofstream f(a.out);
        if (!f) throw IoError(strf("%s: cannot write CSV", a.out.c_str()));
        f << csv.str();
        std::printf("report: %s\n", a.out.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"view-wise diffusion field toolkit"};
    app.require_subcommand(0, 1);

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train a model on a manifest dataset");
    train->add_option("--config", train_args.config, "run configuration file");
    train->add_option("--data", train_args.data, "manifest csv");
    train->add_option("--out", train_args.out, "output directory");
    train->add_option("--steps", train_args.steps, "override [train] steps");
    train->add_option("--seed", train_args.seed, "override [train] seed");
    train->add_option("--resume", train_args.resume, "checkpoint to resume from");
    train->add_flag("--strict-deterministic", train_args.strict, "force single-threaded work");

    SampleArgs sample_args;
    CLI::App* sample = app.add_subcommand("sample", "generate views from a checkpoint");
    sample->add_option("--ckpt", sample_args.ckpt, "model checkpoint");
    sample->add_option("--caption", sample_args.caption, "text condition");
    sample->add_option("--cond-view", sample_args.cond_view, "image file condition");
    sample->add_option("--cond-file", sample_args.cond_file, "precomputed embedding file");
    sample->add_flag("--unconditional", sample_args.unconditional, "use the null condition");
    sample->add_option("--views", sample_args.views, "number of views (default: field views)");
    sample->add_option("--steps", sample_args.steps, "denoising steps (default: model schedule)");
    sample->add_option("--guidance", sample_args.guidance, "guidance scale (default 8.5)");
    sample->add_option("--seed", sample_args.seed, "sampling seed");
    sample->add_option("--out", sample_args.out, "output directory");
    sample->add_flag("--png", sample_args.png, "write png instead of ppm");

    CostArgs cost_args;
    CLI::App* cost = app.add_subcommand("cost", "analytic MACs / memory estimate");
    cost->add_option("--depth", cost_args.depth, "transformer blocks");
    cost->add_option("--width", cost_args.width, "hidden width");
    cost->add_option("--heads", cost_args.heads, "attention heads");
    cost->add_option("--tokens", cost_args.tokens, "tokens per view");
    cost->add_option("--views", cost_args.views, "view count");
    cost->add_option("--token-dim", cost_args.token_dim, "token channel count");
    cost->add_option("--cond-dim", cost_args.cond_dim, "condition embedding width");
    cost->add_option("--cond-tokens", cost_args.cond_tokens, "condition token count");
    cost->add_flag("--global", cost_args.global_attn, "global instead of view-local attention");
    cost->add_flag("--no-text", cost_args.no_text, "drop the text-conditioning cost");
    cost->add_option("--csv", cost_args.csv, "also write a one-row CSV");

    DatagenArgs datagen_args;
    CLI::App* datagen = app.add_subcommand("datagen", "emit a toy dataset and manifest");
    datagen->add_option("--kind", datagen_args.kind, "video | views | image");
    datagen->add_option("--count", datagen_args.count, "number of fields");
    datagen->add_option("--out", datagen_args.out, "output directory");
    datagen->add_option("--seed", datagen_args.seed, "generator seed");
    datagen->add_flag("--prefill", datagen_args.prefill, "noise-fill the background (views kind)");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "reconstruction metrics on a dataset");
    eval->add_option("--ckpt", eval_args.ckpt, "model checkpoint");
    eval->add_option("--data", eval_args.data, "manifest csv");
    eval->add_option("--t", eval_args.t, "noising timestep");
    eval->add_option("--seed", eval_args.seed, "noise seed");
    eval->add_option("--out", eval_args.out, "per-field CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(train, train_args);
        if (sample->parsed()) return cmd_sample(sample, sample_args);
        if (cost->parsed()) return cmd_cost(cost_args);
        if (datagen->parsed()) return cmd_datagen(datagen, datagen_args);
        if (eval->parsed()) return cmd_eval(eval, eval_args);
    } catch (const t1::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    std::fprintf(stderr, "%s", app.help().c_str());
    return 2;
}
