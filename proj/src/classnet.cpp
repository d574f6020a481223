#include "mixcam/classnet.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "mixcam/ops.hpp"
#include "mixcam/rng.hpp"

namespace mixcam {

std::size_t ClassNetConfig::downsample() const {
  std::size_t d = 1;
  for (std::size_t s : strides) d *= s;
  return d;
}

void ClassNetConfig::validate() const {
  if (classes < 2) fail(ErrorCategory::config, "classnet: classes must be >= 2");
  if (channels.empty() || channels.size() != strides.size()) {
    fail(ErrorCategory::config, "classnet: channels and strides must be non-empty and equal length");
  }
  if (kernel_size == 0 || kernel_size % 2 == 0) {
    fail(ErrorCategory::config, "classnet: kernel size must be odd");
  }
  for (std::size_t s : strides) {
    if (s == 0) fail(ErrorCategory::config, "classnet: strides must be positive");
  }
  const std::size_t d = downsample();
  if (input_size == 0 || input_size % d != 0) {
    fail(ErrorCategory::config, "classnet: input extent " + std::to_string(input_size) +
                                    " not divisible by downsample factor " + std::to_string(d));
  }
}

ClassNet::ClassNet(ClassNetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  auto rng = make_rng(seed, 0x1217);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t cin = cfg_.input_channels;
  const std::size_t k = cfg_.kernel_size;
  for (std::size_t b = 0; b < cfg_.channels.size(); ++b) {
    const std::size_t cout = cfg_.channels[b];
    const double std_dev = std::sqrt(2.0 / static_cast<double>(cin * k * k));
    Tensor w = Tensor::zeros({cout, cin, k, k}, true);
    for (double& v : w.value_mut()) v = normal(rng) * std_dev;
    conv_w_.push_back(w);
    conv_b_.push_back(Tensor::zeros({cout}, true));
    cin = cout;
  }
  const std::size_t kf = cfg_.feature_channels();
  const double fc_std = std::sqrt(1.0 / static_cast<double>(kf));
  fc_w_ = Tensor::zeros({cfg_.classes, kf}, true);
  for (double& v : fc_w_.value_mut()) v = normal(rng) * fc_std;
  fc_b_ = Tensor::zeros({cfg_.classes}, true);
}

Tensor ClassNet::extract_features(const Tensor& image) const {
  if (image.rank() != 3 || image.shape()[0] != cfg_.input_channels ||
      image.shape()[1] != cfg_.input_size || image.shape()[2] != cfg_.input_size) {
    fail(ErrorCategory::shape,
         "extract_features: expected [" + std::to_string(cfg_.input_channels) + "," +
             std::to_string(cfg_.input_size) + "," + std::to_string(cfg_.input_size) + "], got " +
             shape_str(image.shape()));
  }
  Tensor x = image;
  const std::size_t pad = cfg_.kernel_size / 2;
  for (std::size_t b = 0; b < conv_w_.size(); ++b) {
    x = ops::relu(ops::conv2d(x, conv_w_[b], conv_b_[b], cfg_.strides[b], pad));
  }
  return x;
}

Tensor ClassNet::classify(const Tensor& features) const {
  const std::size_t kf = cfg_.feature_channels();
  if (features.rank() != 3 || features.shape()[0] != kf) {
    fail(ErrorCategory::shape, "classify: expected [" + std::to_string(kf) +
                                   ",Hf,Wf] features, got " + shape_str(features.shape()));
  }
  Tensor pooled = ops::global_avg_pool(features);
  Tensor scores = ops::matmul(fc_w_, ops::reshape(pooled, {kf, 1}));
  return ops::add(ops::reshape(scores, {cfg_.classes}), fc_b_);
}

Tensor ClassNet::cam_from_features(const Tensor& features) const {
  const std::size_t kf = cfg_.feature_channels();
  if (features.rank() != 3 || features.shape()[0] != kf) {
    fail(ErrorCategory::shape, "cam: expected [" + std::to_string(kf) + ",Hf,Wf] features, got " +
                                   shape_str(features.shape()));
  }
  const std::size_t hf = features.shape()[1], wf = features.shape()[2];
  Tensor flat = ops::reshape(features, {kf, hf * wf});
  Tensor scores = ops::matmul(fc_w_, flat);  // classifier bias excluded by construction
  return ops::reshape(scores, {cfg_.classes, hf, wf});
}

ResponseMap ClassNet::cam_raw(const Tensor& image, std::vector<std::size_t> valid) const {
  ResponseMap map;
  map.raw = cam_from_features(extract_features(image));
  if (valid.empty()) {
    for (std::size_t c = 0; c < cfg_.classes; ++c) map.valid.push_back(c);
  } else {
    map.valid = std::move(valid);
  }
  return map;
}

std::vector<std::pair<std::string, Tensor>> ClassNet::parameters() {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t b = 0; b < conv_w_.size(); ++b) {
    out.emplace_back("conv" + std::to_string(b + 1) + ".weight", conv_w_[b]);
    out.emplace_back("conv" + std::to_string(b + 1) + ".bias", conv_b_[b]);
  }
  out.emplace_back("classifier.weight", fc_w_);
  out.emplace_back("classifier.bias", fc_b_);
  return out;
}

void ClassNet::load_parameters(const NamedTensors& tensors) {
  for (auto& [name, param] : parameters()) {
    Tensor stored = tensors.require(name);
    if (!same_shape(stored.shape(), param.shape())) {
      fail(ErrorCategory::shape, "checkpoint: tensor '" + name + "' has shape " +
                                     shape_str(stored.shape()) + ", expected " +
                                     shape_str(param.shape()));
    }
    std::copy(stored.value().begin(), stored.value().end(), param.value_mut().begin());
  }
}

void ClassNet::describe(NamedTensors& out) const {
  auto vec = [](std::initializer_list<double> v) {
    return Tensor::from_data({v.size()}, std::vector<double>(v));
  };
  out.put("meta/classes", vec({static_cast<double>(cfg_.classes)}));
  out.put("meta/input_size", vec({static_cast<double>(cfg_.input_size)}));
  out.put("meta/input_channels", vec({static_cast<double>(cfg_.input_channels)}));
  out.put("meta/kernel_size", vec({static_cast<double>(cfg_.kernel_size)}));
  std::vector<double> ch(cfg_.channels.begin(), cfg_.channels.end());
  std::vector<double> st(cfg_.strides.begin(), cfg_.strides.end());
  out.put("meta/channels", Tensor::from_data({ch.size()}, ch));
  out.put("meta/strides", Tensor::from_data({st.size()}, st));
}

ClassNetConfig ClassNet::config_from_meta(const NamedTensors& tensors) {
  ClassNetConfig cfg;
  auto scalar = [&](const char* name) {
    return static_cast<std::size_t>(tensors.require(name).value()[0]);
  };
  cfg.classes = scalar("meta/classes");
  cfg.input_size = scalar("meta/input_size");
  cfg.input_channels = scalar("meta/input_channels");
  cfg.kernel_size = scalar("meta/kernel_size");
  cfg.channels.clear();
  for (double v : tensors.require("meta/channels").value()) {
    cfg.channels.push_back(static_cast<std::size_t>(v));
  }
  cfg.strides.clear();
  for (double v : tensors.require("meta/strides").value()) {
    cfg.strides.push_back(static_cast<std::size_t>(v));
  }
  cfg.validate();
  return cfg;
}

ResponseMap cam_normalized(const ResponseMap& map) {
  if (!map.raw.defined()) fail(ErrorCategory::state, "cam_normalized: raw map not computed");
  const std::size_t c = map.raw.shape()[0];
  const std::size_t hw = map.raw.shape()[1] * map.raw.shape()[2];
  ResponseMap out;
  out.raw = map.raw;
  out.valid = map.valid;
  out.normalized = Tensor::zeros(map.raw.shape());
  const auto raw = map.raw.value();
  auto norm = out.normalized.value_mut();
  for (std::size_t i = 0; i < c; ++i) {
    const double* src = raw.data() + i * hw;
    double* dst = norm.data() + i * hw;
    double mx = 0.0;
    for (std::size_t j = 0; j < hw; ++j) mx = std::max(mx, src[j]);
    if (mx > 1e-12) {
      for (std::size_t j = 0; j < hw; ++j) dst[j] = src[j] > 0.0 ? src[j] / mx : 0.0;
    }
    // else: all-negative (or zero) class plane stays all zeros
  }
  return out;
}

Tensor spatial_class_probability(const ResponseMap& map) {
  if (!map.raw.defined()) {
    fail(ErrorCategory::state, "spatial_class_probability: raw map not computed");
  }
  Tensor volume = map.raw;
  Tensor magnitude = ops::add(ops::relu(volume), ops::relu(ops::scalar_mul(volume, -1.0)));
  Tensor max_abs = ops::reduce_max_all(magnitude);
  Tensor scaled = volume;
  if (max_abs.item() > 1e-12) {
    scaled = ops::div(volume, ops::broadcast_to(ops::reshape(max_abs, {1, 1, 1}),
                                                volume.shape()));
  }
  return ops::softmax(scaled, 0);
}

namespace {

template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const char* what) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    fail(ErrorCategory::io, std::string("response dump: truncated while reading ") + what);
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void export_response_raw(const std::filesystem::path& path, const ResponseMap& map) {
  if (!map.raw.defined() || map.raw.rank() != 3) {
    fail(ErrorCategory::state, "response dump: raw map not computed");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCategory::io, "response dump: cannot open '" + path.string() + "'");
  os.write("MXRM", 4);
  for (std::size_t d = 0; d < 3; ++d) {
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(map.raw.shape()[d]));
  }
  for (double v : map.raw.value()) write_le<double>(os, v);
  if (!os) fail(ErrorCategory::io, "response dump: write failed for '" + path.string() + "'");
}

ResponseMap import_response_raw(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCategory::io, "response dump: cannot open '" + path.string() + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "MXRM", 4) != 0) {
    fail(ErrorCategory::io, "response dump: bad magic (expected MXRM)");
  }
  const auto c = read_le<std::uint32_t>(is, "classes");
  const auto h = read_le<std::uint32_t>(is, "height");
  const auto w = read_le<std::uint32_t>(is, "width");
  std::vector<double> data(static_cast<std::size_t>(c) * h * w);
  for (double& v : data) v = read_le<double>(is, "scores");
  ResponseMap map;
  map.raw = Tensor::from_data({c, h, w}, std::move(data));
  for (std::size_t i = 0; i < c; ++i) map.valid.push_back(i);
  return map;
}

}  // namespace mixcam
