#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graspforge/depth_image.hpp"

namespace gf {

// 16-bit grayscale PNG, depth in millimeters, 0 = invalid.
std::vector<uint8_t> encode_depth_png(const DepthImage& img);
DepthImage decode_depth_png(const std::vector<uint8_t>& bytes);

// Raw format: 16-byte header (magic "GFDI", u32 width, u32 height,
// u32 reserved, little-endian) then row-major float32 LE meters.
std::vector<uint8_t> encode_depth_raw(const DepthImage& img);
DepthImage decode_depth_raw(const std::vector<uint8_t>& bytes);

// Dispatch on extension: ".png" or ".gfdi".
void save_depth(const DepthImage& img, const std::string& path);
DepthImage load_depth(const std::string& path);

}  // namespace gf
