#include "mixcam/synthdata.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "mixcam/parallel.hpp"
#include "mixcam/rng.hpp"

namespace mixcam {
namespace {

constexpr char kMagic[4] = {'M', 'X', 'D', 'S'};
constexpr std::uint64_t kSampleSalt = 0xDA7A5E7;
constexpr int kPlacementRetries = 64;
constexpr double kMinVisible = 0.30;

struct Rgb {
  double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) {
    r = c, g = x;
  } else if (hp < 2) {
    r = x, g = c;
  } else if (hp < 3) {
    g = c, b = x;
  } else if (hp < 4) {
    g = x, b = c;
  } else if (hp < 5) {
    r = x, b = c;
  } else {
    r = c, b = x;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

// Class base colors. The curated 5-class palette keeps the confusable shape
// pairs (circle/ring, square/cross) in nearby hues so geometry, not color,
// carries most of the discriminative signal.
Rgb base_color(std::size_t c, std::size_t classes) {
  static constexpr Rgb kPalette[5] = {
      {0.78, 0.34, 0.30},  // circle
      {0.30, 0.42, 0.76},  // square
      {0.36, 0.70, 0.38},  // triangle
      {0.72, 0.42, 0.30},  // ring
      {0.32, 0.52, 0.70},  // cross
  };
  if (classes == 5) return kPalette[c];
  return hsv_to_rgb(std::fmod(0.03 + static_cast<double>(c) / classes, 1.0), 0.42, 0.66);
}

constexpr const char* kKindNames[5] = {"circle", "square", "triangle", "ring", "cross"};

bool inside_shape(std::size_t kind, double dy, double dx, double r) {
  switch (kind) {
    case 0:  // circle
      return dy * dy + dx * dx <= r * r;
    case 1:  // square
      return std::abs(dy) <= 0.88 * r && std::abs(dx) <= 0.88 * r;
    case 2: {  // triangle, apex up
      if (dy < -r || dy > 0.82 * r) return false;
      const double t = (dy + r) / (1.82 * r);  // 0 at apex, 1 at base
      return std::abs(dx) <= t * r;
    }
    case 3: {  // ring
      const double d2 = dy * dy + dx * dx;
      return d2 <= r * r && d2 >= (0.5 * r) * (0.5 * r);
    }
    default: {  // cross
      const double arm = 0.34 * r;
      return (std::abs(dx) <= arm && std::abs(dy) <= r) ||
             (std::abs(dy) <= arm && std::abs(dx) <= r);
    }
  }
}

std::vector<std::size_t> raster_shape(std::size_t kind, double cy, double cx, double r,
                                      std::size_t extent) {
  std::vector<std::size_t> pixels;
  const auto lo_y = static_cast<std::size_t>(std::max(0.0, std::floor(cy - r)));
  const auto hi_y = static_cast<std::size_t>(std::min<double>(extent - 1, std::ceil(cy + r)));
  const auto lo_x = static_cast<std::size_t>(std::max(0.0, std::floor(cx - r)));
  const auto hi_x = static_cast<std::size_t>(std::min<double>(extent - 1, std::ceil(cx + r)));
  for (std::size_t y = lo_y; y <= hi_y; ++y) {
    for (std::size_t x = lo_x; x <= hi_x; ++x) {
      if (inside_shape(kind, static_cast<double>(y) - cy, static_cast<double>(x) - cx, r)) {
        pixels.push_back(y * extent + x);
      }
    }
  }
  return pixels;
}

// Smoothstep-interpolated value noise on a coarse lattice.
void paint_background(Tensor& image, std::size_t extent, double amplitude,
                      std::mt19937_64& rng) {
  constexpr std::size_t kCells = 4;
  std::uniform_real_distribution<double> base_jit(-0.04, 0.04);
  std::uniform_real_distribution<double> amp(-amplitude, amplitude);
  double lattice[3][kCells + 1][kCells + 1];
  double base[3];
  for (auto& b : base) b = 0.40 + base_jit(rng);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i <= kCells; ++i) {
      for (std::size_t j = 0; j <= kCells; ++j) lattice[c][i][j] = base[c] + amp(rng);
    }
  }
  auto v = image.value_mut();
  for (std::size_t y = 0; y < extent; ++y) {
    const double fy = static_cast<double>(y) / (extent - 1) * kCells;
    const auto iy = std::min<std::size_t>(static_cast<std::size_t>(fy), kCells - 1);
    double ty = fy - static_cast<double>(iy);
    ty = ty * ty * (3.0 - 2.0 * ty);
    for (std::size_t x = 0; x < extent; ++x) {
      const double fx = static_cast<double>(x) / (extent - 1) * kCells;
      const auto ix = std::min<std::size_t>(static_cast<std::size_t>(fx), kCells - 1);
      double tx = fx - static_cast<double>(ix);
      tx = tx * tx * (3.0 - 2.0 * tx);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = lattice[c][iy][ix] * (1 - tx) + lattice[c][iy][ix + 1] * tx;
        const double bot = lattice[c][iy + 1][ix] * (1 - tx) + lattice[c][iy + 1][ix + 1] * tx;
        v[(c * extent + y) * extent + x] = top * (1 - ty) + bot * ty;
      }
    }
  }
}

SceneSample generate_sample(const DatasetConfig& cfg, std::uint64_t id) {
  auto rng = make_rng(cfg.seed, kSampleSalt, id);
  const std::size_t extent = cfg.image_size;

  SceneSample s;
  s.id = id;
  s.image = Tensor::zeros({3, extent, extent});
  s.mask = Mask(extent, extent);
  s.label.assign(cfg.classes, 0.0);

  paint_background(s.image, extent, cfg.background_amplitude, rng);

  std::uniform_int_distribution<std::size_t> count_d(cfg.shapes_min, cfg.shapes_max);
  const std::size_t n_shapes = count_d(rng);

  // Distinct classes per scene (partial Fisher-Yates).
  std::vector<std::size_t> pool(cfg.classes);
  for (std::size_t i = 0; i < cfg.classes; ++i) pool[i] = i;
  for (std::size_t i = 0; i < n_shapes; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, cfg.classes - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }

  std::uniform_real_distribution<double> frac_d(cfg.shape_frac_min, cfg.shape_frac_max);
  std::vector<std::size_t> full_count(n_shapes, 0);
  std::vector<std::size_t> placed_class(n_shapes, 0);

  for (std::size_t i = 0; i < n_shapes; ++i) {
    const std::size_t cls = pool[i];
    const std::size_t kind = cls % 5;
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
      const double r = 0.5 * frac_d(rng) * static_cast<double>(extent);
      std::uniform_real_distribution<double> pos(r, static_cast<double>(extent - 1) - r);
      const double cy = pos(rng), cx = pos(rng);
      const auto pixels = raster_shape(kind, cy, cx, r, extent);
      if (pixels.empty()) continue;

      Mask candidate = s.mask;
      for (std::size_t p : pixels) candidate.data[p] = static_cast<std::uint8_t>(cls + 1);

      // Later shapes occlude earlier ones; every placed shape must keep at
      // least kMinVisible of its own pixels.
      bool ok = true;
      for (std::size_t j = 0; j < i && ok; ++j) {
        std::size_t visible = 0;
        for (std::size_t p = 0; p < candidate.data.size(); ++p) {
          if (candidate.data[p] == placed_class[j] + 1) ++visible;
        }
        ok = static_cast<double>(visible) >=
             kMinVisible * static_cast<double>(full_count[j]);
      }
      if (!ok) continue;

      s.mask = std::move(candidate);
      full_count[i] = pixels.size();
      placed_class[i] = cls;
      placed = true;
    }
    if (!placed) {
      fail(ErrorCategory::data,
           "generate_dataset: placement infeasible for sample " + std::to_string(id));
    }
  }

  // Colorize from the final mask so occluded parts never leak through.
  std::uniform_real_distribution<double> noise(-cfg.color_noise, cfg.color_noise);
  auto img = s.image.value_mut();
  const std::size_t hw = extent * extent;
  for (std::size_t p = 0; p < hw; ++p) {
    const std::uint8_t m = s.mask.data[p];
    if (m == 0) continue;
    const Rgb base = base_color(m - 1, cfg.classes);
    img[0 * hw + p] = base.r + noise(rng);
    img[1 * hw + p] = base.g + noise(rng);
    img[2 * hw + p] = base.b + noise(rng);
  }

  // Quantize to the on-disk u8 grid so generated and reloaded datasets match.
  for (double& v : img) {
    v = std::clamp(v, 0.0, 1.0);
    v = std::round(v * 255.0) / 255.0;
  }

  for (std::size_t p = 0; p < hw; ++p) {
    if (s.mask.data[p] > 0) s.label[s.mask.data[p] - 1] = 1.0;
  }
  return s;
}

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
    fail(ErrorCategory::io, std::string("dataset: truncated while reading ") + what);
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void DatasetConfig::validate() const {
  if (classes < 2) fail(ErrorCategory::config, "dataset: classes must be >= 2");
  if (image_size < 8) fail(ErrorCategory::config, "dataset: image_size must be >= 8");
  if (shapes_min < 1 || shapes_max < shapes_min || shapes_max > classes) {
    fail(ErrorCategory::config, "dataset: invalid shapes-per-image range");
  }
  if (!(shape_frac_min > 0.0 && shape_frac_max < 1.0 && shape_frac_min <= shape_frac_max)) {
    fail(ErrorCategory::config, "dataset: shape size range must lie within (0,1)");
  }
  if (background_amplitude < 0.0 || color_noise < 0.0) {
    fail(ErrorCategory::config, "dataset: noise amplitudes must be >= 0");
  }
}

std::string class_name(std::size_t c, std::size_t classes) {
  if (classes <= 5) return kKindNames[c % 5];
  return std::string(kKindNames[c % 5]) + "_" + std::to_string(c / 5);
}

SplitDataset generate_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  SplitDataset out;
  for (Dataset* ds : {&out.train, &out.val}) {
    ds->classes = cfg.classes;
    ds->height = cfg.image_size;
    ds->width = cfg.image_size;
  }
  out.train.samples.resize(cfg.train_size);
  out.val.samples.resize(cfg.val_size);
  // Ids form one global space; the val split continues after train.
  parallel_for(cfg.train_size + cfg.val_size, [&](std::size_t i) {
    if (i < cfg.train_size) {
      out.train.samples[i] = generate_sample(cfg, i);
    } else {
      out.val.samples[i - cfg.train_size] = generate_sample(cfg, i);
    }
  });
  return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCategory::io, "dataset: cannot open '" + path.string() + "' for writing");
  os.write(kMagic, 4);
  write_le<std::uint32_t>(os, kDatasetVersion);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.classes));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.height));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.width));
  write_le<std::uint64_t>(os, ds.samples.size());
  std::vector<unsigned char> buf;
  for (const SceneSample& s : ds.samples) {
    write_le<std::uint64_t>(os, s.id);
    const auto img = s.image.value();
    buf.resize(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
      buf[i] = static_cast<unsigned char>(std::lround(std::clamp(img[i], 0.0, 1.0) * 255.0));
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    os.write(reinterpret_cast<const char*>(s.mask.data.data()),
             static_cast<std::streamsize>(s.mask.data.size()));
    for (double l : s.label) {
      const unsigned char b = l > 0.0 ? 1 : 0;
      os.write(reinterpret_cast<const char*>(&b), 1);
    }
  }
  if (!os) fail(ErrorCategory::io, "dataset: write failed for '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCategory::io, "dataset: cannot open '" + path.string() + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    fail(ErrorCategory::io, "dataset: bad magic in '" + path.string() + "' (expected MXDS)");
  }
  const auto version = read_le<std::uint32_t>(is, "version");
  if (version != kDatasetVersion) {
    fail(ErrorCategory::io, "dataset: unsupported version " + std::to_string(version));
  }
  Dataset ds;
  ds.classes = read_le<std::uint32_t>(is, "classes");
  ds.height = read_le<std::uint32_t>(is, "height");
  ds.width = read_le<std::uint32_t>(is, "width");
  const auto count = read_le<std::uint64_t>(is, "sample count");
  ds.samples.resize(count);
  const std::size_t hw = ds.height * ds.width;
  std::vector<unsigned char> buf(3 * hw);
  for (auto& s : ds.samples) {
    s.id = read_le<std::uint64_t>(is, "sample id");
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      fail(ErrorCategory::io, "dataset: truncated image payload");
    }
    s.image = Tensor::zeros({3, ds.height, ds.width});
    auto v = s.image.value_mut();
    for (std::size_t i = 0; i < buf.size(); ++i) v[i] = buf[i] / 255.0;
    s.mask = Mask(ds.height, ds.width);
    if (!is.read(reinterpret_cast<char*>(s.mask.data.data()),
                 static_cast<std::streamsize>(hw))) {
      fail(ErrorCategory::io, "dataset: truncated mask payload");
    }
    s.label.resize(ds.classes);
    for (double& l : s.label) {
      unsigned char b;
      if (!is.read(reinterpret_cast<char*>(&b), 1)) {
        fail(ErrorCategory::io, "dataset: truncated label payload");
      }
      l = b ? 1.0 : 0.0;
    }
  }
  return ds;
}

}  // namespace mixcam
