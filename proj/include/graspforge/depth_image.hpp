#pragma once

#include <vector>

namespace gf {

// Single-channel depth grid in meters, camera-frame Z. 0 marks invalid
// (no-data) pixels throughout the project.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // row-major

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h, 0.0f) {}

  float& at(int row, int col) { return pixels[static_cast<size_t>(row) * width + col]; }
  float at(int row, int col) const { return pixels[static_cast<size_t>(row) * width + col]; }
  bool valid(int row, int col) const { return at(row, col) > 0.0f; }
  bool in_bounds(int row, int col) const {
    return row >= 0 && row < height && col >= 0 && col < width;
  }

  int valid_count() const {
    int n = 0;
    for (float p : pixels) n += (p > 0.0f);
    return n;
  }

  bool operator==(const DepthImage&) const = default;
};

}  // namespace gf
