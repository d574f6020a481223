#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mixcam/checkpoint.hpp"
#include "mixcam/tensor.hpp"

using mixcam::load_checkpoint;
using mixcam::NamedTensors;
using mixcam::save_checkpoint;
using mixcam::Tensor;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  auto p = fs::temp_directory_path() / name;
  fs::remove(p);
  return p;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("checkpoint round-trips byte-identically") {
  NamedTensors ckpt;
  ckpt.put("conv1.weight", Tensor::from_data({2, 3}, {1.0, -2.5, 3.25, 0.0, 1e-300, -0.0}));
  ckpt.put("conv1.bias", Tensor::from_data({2}, {0.5, -0.5}));
  ckpt.put("adam/step", Tensor::from_data({1}, {7.0}));
  ckpt.put("scalar", Tensor::scalar(42.0));

  const auto p1 = temp_file("mixcam_ckpt_a.mxcm");
  const auto p2 = temp_file("mixcam_ckpt_b.mxcm");
  save_checkpoint(p1, ckpt);
  NamedTensors loaded = load_checkpoint(p1);
  save_checkpoint(p2, loaded);

  CHECK(slurp(p1) == slurp(p2));
  CHECK(loaded.items.size() == 4);
  CHECK(loaded.require("conv1.weight").shape() == mixcam::Shape{2, 3});
  CHECK(loaded.require("conv1.weight").value()[1] == -2.5);
  CHECK(loaded.require("scalar").rank() == 0);
  CHECK(loaded.require("scalar").item() == 42.0);
  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("checkpoint header layout is bit-exact") {
  NamedTensors ckpt;
  ckpt.put("w", Tensor::from_data({1}, {1.0}));
  const auto p = temp_file("mixcam_ckpt_hdr.mxcm");
  save_checkpoint(p, ckpt);
  const auto bytes = slurp(p);
  REQUIRE(bytes.size() == 4 + 4 + 4 + 4 + 1 + 4 + 8 + 8);
  CHECK(bytes[0] == 'M');
  CHECK(bytes[1] == 'X');
  CHECK(bytes[2] == 'C');
  CHECK(bytes[3] == 'M');
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);  // version u32 LE
  CHECK(static_cast<unsigned char>(bytes[8]) == 1);  // count u32 LE
  CHECK(static_cast<unsigned char>(bytes[12]) == 1);  // name length
  CHECK(bytes[16] == 'w');
  CHECK(static_cast<unsigned char>(bytes[17]) == 1);  // rank
  CHECK(static_cast<unsigned char>(bytes[21]) == 1);  // extent u64 LE
  fs::remove(p);
}

TEST_CASE("truncated and corrupt checkpoints raise structured errors") {
  NamedTensors ckpt;
  ckpt.put("w", Tensor::from_data({4}, {1, 2, 3, 4}));
  const auto p = temp_file("mixcam_ckpt_trunc.mxcm");
  save_checkpoint(p, ckpt);
  auto bytes = slurp(p);

  const auto truncated = temp_file("mixcam_ckpt_trunc2.mxcm");
  {
    std::ofstream os(truncated, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 10));
  }
  CHECK_THROWS_AS(load_checkpoint(truncated), mixcam::Error);

  const auto bad_magic = temp_file("mixcam_ckpt_magic.mxcm");
  {
    bytes[0] = 'Z';
    std::ofstream os(bad_magic, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(bad_magic), doctest::Contains("magic"), mixcam::Error);

  CHECK_THROWS_AS(load_checkpoint(temp_file("mixcam_ckpt_missing.mxcm")), mixcam::Error);
  fs::remove(p);
  fs::remove(truncated);
  fs::remove(bad_magic);
}
