#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mixcam/checkpoint.hpp"
#include "mixcam/tensor.hpp"

namespace mixcam {

struct ClassNetConfig {
  std::size_t input_size = 64;
  std::size_t input_channels = 3;
  std::vector<std::size_t> channels = {16, 32, 64, 64};
  std::vector<std::size_t> strides = {2, 2, 2, 1};
  std::size_t kernel_size = 3;
  std::size_t classes = 5;

  std::size_t downsample() const;         // product of strides
  std::size_t feature_channels() const { return channels.back(); }
  std::size_t feature_size() const { return input_size / downsample(); }
  void validate() const;
};

// Per-class spatial response scores. `raw` is the linear map of the feature
// volume through the classifier weights (bias excluded); `normalized` is the
// max-normalized evaluation view, empty until cam_normalized fills it.
struct ResponseMap {
  Tensor raw;                        // [C, Hf, Wf]
  Tensor normalized;                 // [C, Hf, Wf] in [0,1]
  std::vector<std::size_t> valid;    // C-bar: classes present in the label
};

// Feature extractor (stacked conv+relu blocks), global average pooling and a
// single linear classifier.
class ClassNet {
 public:
  ClassNet(ClassNetConfig cfg, std::uint64_t seed);

  const ClassNetConfig& config() const { return cfg_; }

  Tensor extract_features(const Tensor& image) const;  // [K, Hf, Wf]
  Tensor classify(const Tensor& features) const;       // [C] logits, pre-sigmoid
  Tensor logits(const Tensor& image) const { return classify(extract_features(image)); }

  // M^c(h,w) = sum_k theta^c_k f_k(h,w); shares the features subgraph so the
  // classification and response paths backpropagate into the same extractor.
  Tensor cam_from_features(const Tensor& features) const;
  ResponseMap cam_raw(const Tensor& image, std::vector<std::size_t> valid = {}) const;

  std::vector<std::pair<std::string, Tensor>> parameters();
  void load_parameters(const NamedTensors& tensors);

  // Model hyperparameters under "meta/" so checkpoints are self-describing.
  void describe(NamedTensors& out) const;
  static ClassNetConfig config_from_meta(const NamedTensors& tensors);

 private:
  ClassNetConfig cfg_;
  std::vector<Tensor> conv_w_, conv_b_;
  Tensor fc_w_, fc_b_;  // [C,K], [C]
};

// Per class: clamp negatives to zero, divide by the per-class max when it
// exceeds 1e-12, otherwise the class plane is all zeros.
ResponseMap cam_normalized(const ResponseMap& map);

// P: normalize the whole raw volume by its global max |value|, then softmax
// across the class axis at every position. Differentiable.
Tensor spatial_class_probability(const ResponseMap& map);

// "MXRM" raw response dump: magic | C,Hf,Wf u32 | f64 little-endian scores.
void export_response_raw(const std::filesystem::path& path, const ResponseMap& map);
ResponseMap import_response_raw(const std::filesystem::path& path);

}  // namespace mixcam
