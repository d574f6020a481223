#include "mixcam/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mixcam {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const auto r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    fail(ErrorCategory::config, "config: key '" + key + "' expects an unsigned integer, got '" +
                                    v + "'");
  }
}

double parse_f64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    fail(ErrorCategory::config, "config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  fail(ErrorCategory::config, "config: key '" + key + "' expects a boolean, got '" + v + "'");
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_u64(key, item));
  }
  if (out.empty()) fail(ErrorCategory::config, "config: key '" + key + "' expects a list");
  return out;
}

std::string fmt_f64(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_size_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  data.validate();
  model.validate();
  augment.validate();
  loss.validate();
  pseudo.validate();
  if (data.classes != model.classes) {
    fail(ErrorCategory::config, "config: dataset and model class counts differ");
  }
  if (data.image_size != model.input_size) {
    fail(ErrorCategory::config, "config: dataset extent and model input extent differ");
  }
  if (epochs == 0) fail(ErrorCategory::config, "config: epochs must be >= 1");
  if (batch_size == 0) fail(ErrorCategory::config, "config: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail(ErrorCategory::config, "config: learning_rate must be > 0");
  if (weight_decay < 0.0) fail(ErrorCategory::config, "config: weight_decay must be >= 0");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "classes",        "image_size",     "shapes_min",    "shapes_max",
      "shape_frac_min", "shape_frac_max", "background_amplitude", "color_noise",
      "train_size",     "val_size",       "channels",      "strides",
      "kernel_size",    "alpha",          "flip_prob",     "crop_min",
      "crop_max",       "scale_min",      "scale_max",     "color_jitter",
      "lambda_ent",     "lambda_con",     "tau_bg",        "upsample",
      "epochs",         "batch_size",     "learning_rate", "weight_decay",
      "mixup",          "seed",
  };
  return keys;
}

void config_set(RunConfig& cfg, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "classes") {
    cfg.data.classes = parse_u64(key, v);
    cfg.model.classes = cfg.data.classes;
  } else if (key == "image_size") {
    cfg.data.image_size = parse_u64(key, v);
    cfg.model.input_size = cfg.data.image_size;
  } else if (key == "shapes_min") {
    cfg.data.shapes_min = parse_u64(key, v);
  } else if (key == "shapes_max") {
    cfg.data.shapes_max = parse_u64(key, v);
  } else if (key == "shape_frac_min") {
    cfg.data.shape_frac_min = parse_f64(key, v);
  } else if (key == "shape_frac_max") {
    cfg.data.shape_frac_max = parse_f64(key, v);
  } else if (key == "background_amplitude") {
    cfg.data.background_amplitude = parse_f64(key, v);
  } else if (key == "color_noise") {
    cfg.data.color_noise = parse_f64(key, v);
  } else if (key == "train_size") {
    cfg.data.train_size = parse_u64(key, v);
  } else if (key == "val_size") {
    cfg.data.val_size = parse_u64(key, v);
  } else if (key == "channels") {
    cfg.model.channels = parse_size_list(key, v);
  } else if (key == "strides") {
    cfg.model.strides = parse_size_list(key, v);
  } else if (key == "kernel_size") {
    cfg.model.kernel_size = parse_u64(key, v);
  } else if (key == "alpha") {
    cfg.augment.alpha = parse_f64(key, v);
  } else if (key == "flip_prob") {
    cfg.augment.flip_prob = parse_f64(key, v);
  } else if (key == "crop_min") {
    cfg.augment.crop_min = parse_f64(key, v);
  } else if (key == "crop_max") {
    cfg.augment.crop_max = parse_f64(key, v);
  } else if (key == "scale_min") {
    cfg.augment.scale_min = parse_f64(key, v);
  } else if (key == "scale_max") {
    cfg.augment.scale_max = parse_f64(key, v);
  } else if (key == "color_jitter") {
    cfg.augment.color_jitter = parse_f64(key, v);
  } else if (key == "lambda_ent") {
    cfg.loss.lambda_ent = parse_f64(key, v);
  } else if (key == "lambda_con") {
    cfg.loss.lambda_con = parse_f64(key, v);
  } else if (key == "tau_bg") {
    cfg.pseudo.tau_bg = parse_f64(key, v);
  } else if (key == "upsample") {
    if (v == "bilinear") {
      cfg.pseudo.mode = PseudoLabelConfig::Upsample::bilinear;
    } else if (v == "nearest") {
      cfg.pseudo.mode = PseudoLabelConfig::Upsample::nearest;
    } else {
      fail(ErrorCategory::config, "config: upsample must be 'bilinear' or 'nearest'");
    }
  } else if (key == "epochs") {
    cfg.epochs = parse_u64(key, v);
  } else if (key == "batch_size") {
    cfg.batch_size = parse_u64(key, v);
  } else if (key == "learning_rate") {
    cfg.learning_rate = parse_f64(key, v);
  } else if (key == "weight_decay") {
    cfg.weight_decay = parse_f64(key, v);
  } else if (key == "mixup") {
    cfg.mixup = parse_bool(key, v);
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, v);
    cfg.data.seed = cfg.seed;
  } else {
    fail(ErrorCategory::config, "config: unknown key '" + key + "'");
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCategory::io, "config: cannot open '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCategory::config, "config: line " + std::to_string(lineno) + " of '" +
                                      path.string() + "' is not 'key = value'");
    }
    config_set(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "# resolved run configuration\n";
  os << "classes = " << cfg.data.classes << "\n";
  os << "image_size = " << cfg.data.image_size << "\n";
  os << "shapes_min = " << cfg.data.shapes_min << "\n";
  os << "shapes_max = " << cfg.data.shapes_max << "\n";
  os << "shape_frac_min = " << fmt_f64(cfg.data.shape_frac_min) << "\n";
  os << "shape_frac_max = " << fmt_f64(cfg.data.shape_frac_max) << "\n";
  os << "background_amplitude = " << fmt_f64(cfg.data.background_amplitude) << "\n";
  os << "color_noise = " << fmt_f64(cfg.data.color_noise) << "\n";
  os << "train_size = " << cfg.data.train_size << "\n";
  os << "val_size = " << cfg.data.val_size << "\n";
  os << "channels = " << fmt_size_list(cfg.model.channels) << "\n";
  os << "strides = " << fmt_size_list(cfg.model.strides) << "\n";
  os << "kernel_size = " << cfg.model.kernel_size << "\n";
  os << "alpha = " << fmt_f64(cfg.augment.alpha) << "\n";
  os << "flip_prob = " << fmt_f64(cfg.augment.flip_prob) << "\n";
  os << "crop_min = " << fmt_f64(cfg.augment.crop_min) << "\n";
  os << "crop_max = " << fmt_f64(cfg.augment.crop_max) << "\n";
  os << "scale_min = " << fmt_f64(cfg.augment.scale_min) << "\n";
  os << "scale_max = " << fmt_f64(cfg.augment.scale_max) << "\n";
  os << "color_jitter = " << fmt_f64(cfg.augment.color_jitter) << "\n";
  os << "lambda_ent = " << fmt_f64(cfg.loss.lambda_ent) << "\n";
  os << "lambda_con = " << fmt_f64(cfg.loss.lambda_con) << "\n";
  os << "tau_bg = " << fmt_f64(cfg.pseudo.tau_bg) << "\n";
  os << "upsample = "
     << (cfg.pseudo.mode == PseudoLabelConfig::Upsample::bilinear ? "bilinear" : "nearest")
     << "\n";
  os << "epochs = " << cfg.epochs << "\n";
  os << "batch_size = " << cfg.batch_size << "\n";
  os << "learning_rate = " << fmt_f64(cfg.learning_rate) << "\n";
  os << "weight_decay = " << fmt_f64(cfg.weight_decay) << "\n";
  os << "mixup = " << (cfg.mixup ? "true" : "false") << "\n";
  os << "seed = " << cfg.seed << "\n";
  return os.str();
}

}  // namespace mixcam
