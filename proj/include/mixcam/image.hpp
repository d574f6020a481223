#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mixcam/tensor.hpp"

namespace mixcam {

// Dense class-index mask, row-major; 0 is background.
struct Mask {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(std::size_t h, std::size_t w) : height(h), width(w), data(h * w, 0) {}
  std::uint8_t& at(std::size_t y, std::size_t x) { return data[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return data[y * width + x]; }
  bool operator==(const Mask&) const = default;
};

// Align-corner bilinear resampling of a planar [C,H,W] image.
Tensor resize_bilinear(const Tensor& chw, std::size_t out_h, std::size_t out_w);
std::vector<double> resize_plane_bilinear(const double* src, std::size_t h, std::size_t w,
                                          std::size_t out_h, std::size_t out_w);
std::vector<double> resize_plane_nearest(const double* src, std::size_t h, std::size_t w,
                                         std::size_t out_h, std::size_t out_w);
Mask resize_nearest(const Mask& m, std::size_t out_h, std::size_t out_w);

// Binary netpbm writers/readers. write_ppm expects [3,H,W] values in [0,1];
// write_pgm16 expects one [H,W] plane in [0,1] and emits 16-bit big-endian
// samples as the format requires.
void write_ppm(const std::filesystem::path& path, const Tensor& image01);
Tensor read_ppm(const std::filesystem::path& path);
void write_pgm8(const std::filesystem::path& path, const Mask& mask);
Mask read_pgm8(const std::filesystem::path& path);
void write_pgm16(const std::filesystem::path& path, const double* plane01, std::size_t h,
                 std::size_t w);
std::vector<std::uint16_t> read_pgm16(const std::filesystem::path& path, std::size_t* h,
                                      std::size_t* w);

}  // namespace mixcam
