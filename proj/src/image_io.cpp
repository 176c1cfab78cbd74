#include "t1/image_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

#ifdef T1_HAS_PNG
#include <png.h>
#endif

namespace t1 {

namespace {

void write_pnm(const std::string& path, const ImageU8& img, int channels, const char* magic) {
    if (img.channels != channels || img.width < 1 || img.height < 1 ||
        static_cast<int64_t>(img.data.size()) != img.width * img.height * img.channels) {
        throw IoError(strf("%s: image does not match %s layout", path.c_str(), magic));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(strf("%s: cannot open for writing", path.c_str()));
    f << magic << "\n" << img.width << " " << img.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!f) throw IoError(strf("%s: write failed", path.c_str()));
}

int pnm_token(std::istream& in, const std::string& path) {
    // Skips whitespace and '#' comments between header fields.
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
        } else if (!std::isspace(c)) {
            break;
        }
    }
    if (c == EOF) throw IoError(strf("%s: truncated header", path.c_str()));
    int v = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw IoError(strf("%s: malformed header", path.c_str()));
    return v;
}

ImageU8 read_pnm(const std::string& path, int channels, const char* magic) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(strf("%s: cannot open", path.c_str()));
    char m0 = 0, m1 = 0;
    f.get(m0);
    f.get(m1);
    if (m0 != magic[0] || m1 != magic[1]) throw IoError(strf("%s: not a %s file", path.c_str(), magic));
    ImageU8 img;
    img.width = pnm_token(f, path);
    img.height = pnm_token(f, path);
    const int maxval = pnm_token(f, path);
    if (maxval != 255) throw IoError(strf("%s: unsupported maxval %d", path.c_str(), maxval));
    img.channels = channels;
    img.data.resize(static_cast<size_t>(img.width * img.height * channels));
    f.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (f.gcount() != static_cast<std::streamsize>(img.data.size())) {
        throw IoError(strf("%s: truncated pixel data", path.c_str()));
    }
    return img;
}

std::string lower_ext(const std::string& path) {
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return ext;
}

}  // namespace

void write_ppm(const std::string& path, const ImageU8& img) { write_pnm(path, img, 3, "P6"); }
ImageU8 read_ppm(const std::string& path) { return read_pnm(path, 3, "P6"); }
void write_pgm(const std::string& path, const ImageU8& img) { write_pnm(path, img, 1, "P5"); }
ImageU8 read_pgm(const std::string& path) { return read_pnm(path, 1, "P5"); }

#ifdef T1_HAS_PNG

bool png_supported() { return true; }

void write_png(const std::string& path, const ImageU8& img) {
    if ((img.channels != 1 && img.channels != 3) || img.width < 1 || img.height < 1 ||
        static_cast<int64_t>(img.data.size()) != img.width * img.height * img.channels) {
        throw IoError(strf("%s: image does not match png layout", path.c_str()));
    }
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError(strf("%s: cannot open for writing", path.c_str()));
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw IoError(strf("%s: png write failed", path.c_str()));
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                 8, img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(img.height));
    const int64_t stride = img.width * img.channels;
    for (int64_t y = 0; y < img.height; ++y) {
        rows[static_cast<size_t>(y)] = const_cast<png_bytep>(img.data.data() + y * stride);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

ImageU8 read_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError(strf("%s: cannot open", path.c_str()));
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        std::fclose(fp);
        throw IoError(strf("%s: png read failed", path.c_str()));
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_set_expand(png);        // palette/gray<8/tRNS to 8-bit
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    ImageU8 img;
    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    img.channels = png_get_channels(png, info);
    if (img.channels != 1 && img.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError(strf("%s: unsupported channel count", path.c_str()));
    }
    img.data.resize(static_cast<size_t>(img.width * img.height * img.channels));
    std::vector<png_bytep> rows(static_cast<size_t>(img.height));
    const int64_t stride = img.width * img.channels;
    for (int64_t y = 0; y < img.height; ++y) rows[static_cast<size_t>(y)] = img.data.data() + y * stride;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

#else

bool png_supported() { return false; }
void write_png(const std::string& path, const ImageU8&) {
    throw IoError(strf("%s: png support not built in", path.c_str()));
}
ImageU8 read_png(const std::string& path) {
    throw IoError(strf("%s: png support not built in", path.c_str()));
}

#endif

ImageU8 read_image(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "ppm") return read_ppm(path);
    if (ext == "pgm") return read_pgm(path);
    if (ext == "png") return read_png(path);
    throw IoError(strf("%s: unsupported image extension", path.c_str()));
}

void write_image(const std::string& path, const ImageU8& img) {
    const std::string ext = lower_ext(path);
    if (ext == "ppm") return write_ppm(path, img);
    if (ext == "pgm") return write_pgm(path, img);
    if (ext == "png") return write_png(path, img);
    throw IoError(strf("%s: unsupported image extension", path.c_str()));
}

ImageU8 view_to_u8(const FieldSpec& spec, const View& view) {
    if (static_cast<int64_t>(view.pixels.size()) != spec.channels_per_view()) {
        throw ShapeError("view_to_u8: pixel count does not match spec");
    }
    ImageU8 img;
    img.width = spec.view_width;
    img.height = spec.view_height;
    img.channels = spec.signal_dim;
    img.data.resize(view.pixels.size());
    for (size_t i = 0; i < view.pixels.size(); ++i) {
        const double v = (static_cast<double>(view.pixels[i]) + 1.0) * 0.5 * 255.0;
        img.data[i] = static_cast<uint8_t>(std::min(255.0, std::max(0.0, std::round(v))));
    }
    return img;
}

std::vector<real_t> u8_to_signal(const ImageU8& img) {
    std::vector<real_t> out(img.data.size());
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<real_t>(static_cast<double>(img.data[i]) / 255.0 * 2.0 - 1.0);
    }
    return out;
}

}  // namespace t1
