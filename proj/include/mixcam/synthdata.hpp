#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mixcam/image.hpp"
#include "mixcam/tensor.hpp"

namespace mixcam {

// One scene: image in [0,1], multi-hot image-level label, and the pixel mask
// (evaluation only; the trainer never reads it).
struct SceneSample {
  Tensor image;               // [3,H,W]
  std::vector<double> label;  // length C, entries 0/1
  Mask mask;                  // indices 0..C, 0 = background
  std::uint64_t id = 0;
};

struct DatasetConfig {
  std::size_t classes = 5;  // circle, square, triangle, ring, cross
  std::size_t image_size = 64;
  std::size_t shapes_min = 1, shapes_max = 3;
  double shape_frac_min = 0.25, shape_frac_max = 0.5;  // of the image extent
  double background_amplitude = 0.12;
  double color_noise = 0.12;
  std::size_t train_size = 2000, val_size = 500;
  std::uint64_t seed = 42;

  void validate() const;
};

struct Dataset {
  std::size_t classes = 0;
  std::size_t height = 0, width = 0;
  std::vector<SceneSample> samples;
};

struct SplitDataset {
  Dataset train, val;
};

// Shape-kind names for class c (kinds cycle when classes > 5).
std::string class_name(std::size_t c, std::size_t classes);

// Deterministic per (seed, sample id); generation parallelizes per sample
// with an owned rng stream each, so scheduling never changes the output.
SplitDataset generate_dataset(const DatasetConfig& cfg);

// "MXDS" container: magic | version u32 | classes u32 | H u32 | W u32 |
// count u64 | per record: id u64, image u8 planar [3,H,W] (value*255
// rounded), mask u8 [H,W], label u8 [classes]. Little-endian integers.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

inline constexpr std::uint32_t kDatasetVersion = 1;

}  // namespace mixcam
