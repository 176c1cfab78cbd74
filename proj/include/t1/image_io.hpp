#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "t1/field.hpp"

namespace t1 {

struct ImageU8 {
    int64_t width = 0, height = 0, channels = 0;
    std::vector<uint8_t> data;  // row-major, channel minor
};

void write_ppm(const std::string& path, const ImageU8& img);  // P6, channels == 3
ImageU8 read_ppm(const std::string& path);
void write_pgm(const std::string& path, const ImageU8& img);  // P5, channels == 1
ImageU8 read_pgm(const std::string& path);

bool png_supported();
void write_png(const std::string& path, const ImageU8& img);  // channels 1 or 3
ImageU8 read_png(const std::string& path);

// Dispatch by extension (.ppm/.pgm/.png).
ImageU8 read_image(const std::string& path);
void write_image(const std::string& path, const ImageU8& img);

// Signal values live in [-1,1]; bytes map through v -> round((v+1)/2 * 255)
// with clamping, and back through b/255*2 - 1.
ImageU8 view_to_u8(const FieldSpec& spec, const View& view);
std::vector<real_t> u8_to_signal(const ImageU8& img);

}  // namespace t1
