#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "t1/datasets.hpp"
#include "t1/evalsuite.hpp"
#include "t1/model.hpp"

using namespace t1;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        static int c = 0;
        path = fs::temp_directory_path() /
               fs::path("t1mc-" + std::to_string(::getpid()) + "-" + std::to_string(c++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& rel = "") const { return (path / rel).string(); }
};

ModelConfig small_mc() {
    ModelConfig mc;
    mc.field.metric_dim = 3;
    mc.field.signal_dim = 3;
    mc.field.view_height = 8;
    mc.field.view_width = 8;
    mc.field.num_views = 4;
    mc.codec.patch = 4;
    mc.net.depth = 2;
    mc.net.width = 24;
    mc.net.heads = 2;
    mc.sched_steps = 12;
    mc.cond_tokens = 4;
    mc.net.cond_dim = 16;
    return mc;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const char* bin = std::getenv("T1_BIN");
    REQUIRE(bin != nullptr);
    const int status = std::system((std::string(bin) + " " + args).c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

}  // namespace

TEST_CASE("model save/load: parameters and config round-trip bitwise") {
    TempDir dir;
    ModelConfig mc = small_mc();
    Model model(mc);
    // Give the zero-initialized tails recognizable values.
    {
        auto params = model.named_params();
        auto d = params.back().second.data();
        for (size_t i = 0; i < d.size(); ++i) d[i] = static_cast<real_t>(0.01 * (i + 1));
    }
    save_model(dir.str("m.t1cp"), model);
    Model loaded = load_model(dir.str("m.t1cp"));

    auto pa = model.named_params();
    auto pb = loaded.named_params();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].first == pb[i].first);
        REQUIRE(pa[i].second.numel() == pb[i].second.numel());
        CHECK(std::memcmp(pa[i].second.data().data(), pb[i].second.data().data(),
                          static_cast<size_t>(pa[i].second.numel()) * sizeof(real_t)) == 0);
    }
    Config ca, cb;
    model_config_to(model.config(), ca);
    model_config_to(loaded.config(), cb);
    CHECK(ca.serialize() == cb.serialize());
}

TEST_CASE("model load: a missing parameter tensor is an error") {
    TempDir dir;
    Model model(small_mc());
    save_model(dir.str("m.t1cp"), model);
    Checkpoint ckpt = load_checkpoint(dir.str("m.t1cp"));
    REQUIRE(!ckpt.tensors.empty());
    ckpt.tensors.pop_back();  // drop cond.null
    save_checkpoint(dir.str("cut.t1cp"), ckpt);
    CHECK_THROWS_AS(load_model(dir.str("cut.t1cp")), IoError);
}

TEST_CASE("score closure matches a direct net evaluation bitwise") {
    ModelConfig mc = small_mc();
    Model model(mc);
    ToyVideoSpec dims;
    dims.height = 8;
    dims.width = 8;
    dims.frames = 4;
    dims.square = 3;
    FieldSample field = gen_toy_video(dims, 13);

    const int64_t Z = model.codec().tokens_per_view();
    const int64_t D = model.codec().token_dim();
    std::vector<std::vector<double>> coords;
    std::vector<std::vector<real_t>> y;
    Rng rng(5);
    for (const View& v : field.views) {
        coords.push_back(v.view_coord);
        TokenGrid g = model.codec().encode(v);
        for (real_t& x : g.tokens) x += static_cast<real_t>(0.1) * rng.normal();
        y.push_back(g.tokens);
    }
    ConditionEmbedding cond = model.embed_caption(field.caption);
    ScoreFn score = model.make_score_fn(cond, coords);

    for (bool conditioned : {true, false}) {
        auto got = score(y, 3, conditioned);
        std::vector<Tensor> tokens;
        for (const auto& yv : y) tokens.push_back(Tensor::from_vector({Z, D}, yv));
        auto direct = model.net().forward(tokens, model.coord_embeds_for(coords), 3,
                                          conditioned ? cond.tokens
                                                      : model.null_cond().tokens());
        REQUIRE(got.size() == direct.size());
        for (size_t v = 0; v < got.size(); ++v) {
            auto d = direct[v].data();
            REQUIRE(got[v].size() == d.size());
            CHECK(std::memcmp(got[v].data(), d.data(), d.size() * sizeof(real_t)) == 0);
        }
    }
}

TEST_CASE("canonical view coordinates per modality") {
    FieldSpec video;
    video.metric_dim = 3;
    auto vc = canonical_view_coords(video, 4);
    REQUIRE(vc.size() == 4);
    CHECK(vc[1] == std::vector<double>{0.375});

    FieldSpec cam;
    cam.metric_dim = 6;
    auto cc = canonical_view_coords(cam, 8);
    REQUIRE(cc.size() == 8);
    REQUIRE(cc[2].size() == 4);
    CHECK(cc[2][0] == doctest::Approx(0.25));

    FieldSpec image;
    image.metric_dim = 2;
    auto ic = canonical_view_coords(image, 1);
    REQUIRE(ic.size() == 1);
    CHECK(ic[0].empty());
}

TEST_CASE("cli: missing arguments exit 2") {
    CHECK(run_cli("> /dev/null 2>&1") == 2);
    CHECK(run_cli("train > /dev/null 2>&1") == 2);
    CHECK(run_cli("sample > /dev/null 2>&1") == 2);
    CHECK(run_cli("eval > /dev/null 2>&1") == 2);
}

TEST_CASE("cli: cost prints totals and writes a parseable csv") {
    TempDir dir;
    const std::string out = dir.str("cost.txt");
    const std::string csv = dir.str("cost.csv");
    CHECK(run_cli("cost --depth 2 --width 64 --heads 2 --tokens 16 --views 2 --csv " + csv +
                  " > " + out + " 2>&1") == 0);
    const std::string text = slurp(out);
    CHECK(text.find("total MACs") != std::string::npos);
    std::ifstream f(csv);
    std::string header, row;
    REQUIRE(std::getline(f, header));
    REQUIRE(std::getline(f, row));
    CHECK(header == "depth,width,heads,Z,n_views,view_local,text,macs,act_mem,params");
    CHECK(row.substr(0, 10) == "2,64,2,16,");
}

TEST_CASE("cli: datagen, train, sample, eval pipeline") {
    TempDir dir;
    CHECK(run_cli("datagen --kind video --count 4 --out " + dir.str("data") +
                  " --seed 3 > /dev/null 2>&1") == 0);
    CHECK(fs::exists(dir.str("data/manifest.csv")));
    CHECK(fs::exists(dir.str("data/field_003/view_007.ppm")));

    std::ofstream cfg(dir.str("run.cfg"));
    cfg << "[field]\nmetric_dim = 3\nsignal_dim = 3\nheight = 16\nwidth = 16\nviews = 8\n"
        << "[codec]\npatch = 4\ntoken_dim = 48\n"
        << "[net]\ndepth = 1\nwidth = 32\nheads = 2\n"
        << "[schedule]\nsteps = 10\n"
        << "[train]\nn_views = 2\nbatch_fields = 2\nsteps = 3\ncheckpoint_every = 2\n"
        << "log_every = 0\n";
    cfg.close();
    CHECK(run_cli("train --config " + dir.str("run.cfg") + " --data " +
                  dir.str("data/manifest.csv") + " --out " + dir.str("run") +
                  " --seed 4 > /dev/null 2>&1") == 0);
    CHECK(fs::exists(dir.str("run/ckpt.t1cp")));
    CHECK(fs::exists(dir.str("run/loss.csv")));

    const std::string sample_args = " --caption \"a red square moving left to right\""
                                    " --views 2 --steps 4 --seed 11 --out ";
    CHECK(run_cli("sample --ckpt " + dir.str("run/ckpt.t1cp") + sample_args + dir.str("s1") +
                  " > /dev/null 2>&1") == 0);
    CHECK(run_cli("sample --ckpt " + dir.str("run/ckpt.t1cp") + sample_args + dir.str("s2") +
                  " > /dev/null 2>&1") == 0);
    CHECK(fs::exists(dir.str("s1/view_001.ppm")));
    CHECK(slurp(dir.str("s1/view_000.ppm")) == slurp(dir.str("s2/view_000.ppm")));
    CHECK(slurp(dir.str("s1/view_001.ppm")) == slurp(dir.str("s2/view_001.ppm")));
    const std::string meta = slurp(dir.str("s1/metadata.txt"));
    CHECK(meta.find("seed=11") != std::string::npos);
    CHECK(meta.find("guidance=8.5") != std::string::npos);
    CHECK(meta.find("steps=4") != std::string::npos);

    CHECK(run_cli("eval --ckpt " + dir.str("run/ckpt.t1cp") + " --data " +
                  dir.str("data/manifest.csv") + " --t 5 --out " + dir.str("eval.csv") +
                  " > /dev/null 2>&1") == 0);
    const std::string report = slurp(dir.str("eval.csv"));
    CHECK(report.substr(0, 23) == "field,caption,mse,psnr\n");
}

TEST_CASE("cli: datagen views kind writes mask sidecars, image kind has no coords") {
    TempDir dir;
    CHECK(run_cli("datagen --kind views --count 1 --out " + dir.str("v") +
                  " --seed 2 > /dev/null 2>&1") == 0);
    CHECK(fs::exists(dir.str("v/field_000/view_000.ppm")));
    CHECK(fs::exists(dir.str("v/field_000/view_000.ppm.mask.pgm")));
    std::ifstream vm(dir.str("v/manifest.csv"));
    std::string line;
    REQUIRE(std::getline(vm, line));
    // path + 4 coordinates + caption
    CHECK(std::count(line.begin(), line.end(), ',') == 5);

    CHECK(run_cli("datagen --kind image --count 1 --out " + dir.str("i") +
                  " --seed 2 > /dev/null 2>&1") == 0);
    std::ifstream im(dir.str("i/manifest.csv"));
    REQUIRE(std::getline(im, line));
    CHECK(std::count(line.begin(), line.end(), ',') == 1);
}
