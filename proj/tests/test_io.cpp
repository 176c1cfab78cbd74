#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "t1/checkpoint.hpp"
#include "t1/config.hpp"
#include "t1/image_io.hpp"
#include "t1/rng.hpp"

using namespace t1;

namespace {

std::string tmp_path(const char* name) { return std::string("/tmp/t1_io_") + name; }

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("checkpoint roundtrip preserves order, shapes, and bits") {
    Rng rng(1);
    Checkpoint ck;
    ck.config_text = "[net]\ndepth = 4\n";
    ck.tensors.emplace_back("b.weight", Tensor::randn({3, 5}, rng));
    ck.tensors.emplace_back("a.bias", Tensor::randn({7}, rng));
    const auto path = tmp_path("ck.bin");
    save_checkpoint(path, ck);
    auto back = load_checkpoint(path);
    CHECK(back.config_text == ck.config_text);
    REQUIRE(back.tensors.size() == 2);
    CHECK(back.tensors[0].first == "b.weight");  // insertion order, not sorted
    CHECK(back.tensors[1].first == "a.bias");
    CHECK(back.tensors[0].second.shape() == Shape{3, 5});
    for (int i = 0; i < 15; ++i) CHECK(back.tensors[0].second.data()[i] == ck.tensors[0].second.data()[i]);

    save_checkpoint(tmp_path("ck2.bin"), ck);
    CHECK(slurp(path) == slurp(tmp_path("ck2.bin")));  // serialization is deterministic
}

TEST_CASE("checkpoint rejects corruption") {
    Checkpoint ck;
    ck.tensors.emplace_back("w", Tensor::full({2, 2}, 1.5));
    const auto path = tmp_path("ck3.bin");
    save_checkpoint(path, ck);

    auto bytes = slurp(path);
    bytes[bytes.size() / 2] ^= 0x40;
    std::ofstream(path, std::ios::binary).write(bytes.data(), (std::streamsize)bytes.size());
    CHECK_THROWS_AS(load_checkpoint(path), IoError);

    std::ofstream(path, std::ios::binary).write(bytes.data(), 10);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);

    std::ofstream(path, std::ios::binary) << "NOPEnope";
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
}

TEST_CASE("config parse and serialize are stable") {
    const std::string text =
        "# run settings\n"
        "[net]\n"
        "depth = 4\n"
        "width = 128\n"
        "\n"
        "[train]\n"
        "lr = 0.0001\n"
        "resume = false\n";
    auto cfg = Config::parse_text(text);
    CHECK(cfg.get_i64("net", "depth", 0) == 4);
    CHECK(cfg.get_f64("train", "lr", 0) == 0.0001);
    CHECK(cfg.get_bool("train", "resume", true) == false);
    CHECK(cfg.get_i64("net", "width", 0) == 128);
    cfg.ensure_all_consumed();

    auto again = Config::parse_text(cfg.serialize());
    CHECK(again.serialize() == cfg.serialize());
}

TEST_CASE("config flags unknown keys with their line") {
    auto cfg = Config::parse_text("[net]\ndepth = 4\ndeppth = 9\n");
    CHECK(cfg.get_i64("net", "depth", 0) == 4);
    try {
        cfg.ensure_all_consumed();
        FAIL("expected unknown-key error");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("deppth") != std::string::npos);
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
}

TEST_CASE("config rejects malformed input") {
    CHECK_THROWS_AS(Config::parse_text("[net\nx = 1\n"), IoError);
    CHECK_THROWS_AS(Config::parse_text("[net]\njust a line\n"), IoError);
    CHECK_THROWS_AS(Config::parse_text("[net]\nx = 1\nx = 2\n"), IoError);
    CHECK_THROWS_AS(Config::parse_text("[a]\nx = zzz\n").get_i64("a", "x", 0), IoError);
}

TEST_CASE("doubles survive text roundtrip exactly") {
    for (double v : {1.0 / 3.0, 1e-17, 123456.789, -0.0001, 2.0}) {
        CHECK(std::strtod(format_f64(v).c_str(), nullptr) == v);
    }
    Config cfg;
    cfg.set_f64("x", "v", 1.0 / 3.0);
    auto back = Config::parse_text(cfg.serialize());
    CHECK(back.get_f64("x", "v", 0) == 1.0 / 3.0);
}

TEST_CASE("ppm and pgm roundtrip bytes") {
    ImageU8 img;
    img.width = 3;
    img.height = 2;
    img.channels = 3;
    img.data = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 250, 251, 252, 253, 254, 255};
    write_ppm(tmp_path("a.ppm"), img);
    auto back = read_ppm(tmp_path("a.ppm"));
    CHECK(back.width == 3);
    CHECK(back.height == 2);
    CHECK(back.data == img.data);

    ImageU8 g;
    g.width = 2;
    g.height = 2;
    g.channels = 1;
    g.data = {0, 128, 200, 255};
    write_pgm(tmp_path("a.pgm"), g);
    CHECK(read_pgm(tmp_path("a.pgm")).data == g.data);

    CHECK_THROWS_AS(read_ppm(tmp_path("a.pgm")), IoError);
}

TEST_CASE("png roundtrip when support is built in") {
    if (!png_supported()) return;
    ImageU8 img;
    img.width = 4;
    img.height = 3;
    img.channels = 3;
    Rng rng(8);
    img.data.resize(36);
    for (auto& b : img.data) b = static_cast<uint8_t>(rng.randint(256));
    write_png(tmp_path("a.png"), img);
    auto back = read_png(tmp_path("a.png"));
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.channels == 3);
    CHECK(back.data == img.data);
}

TEST_CASE("signal byte mapping hits the documented endpoints") {
    FieldSpec spec{.metric_dim = 3, .signal_dim = 1, .view_height = 1, .view_width = 5, .num_views = 1};
    View v;
    v.view_coord = {0.0};
    v.pixels = {-1.0, 0.0, 1.0, -2.0, 2.0};  // out-of-range values clamp
    auto img = view_to_u8(spec, v);
    CHECK(img.data == std::vector<uint8_t>{0, 128, 255, 0, 255});
    auto sig = u8_to_signal(img);
    CHECK(sig[0] == -1.0);
    CHECK(sig[2] == 1.0);
    CHECK(std::abs(sig[1] - (128.0 / 255.0 * 2.0 - 1.0)) < 1e-12);
}
