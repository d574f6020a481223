#include "mixcam/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace mixcam {
namespace {

// Source coordinate for an output index under align-corner mapping.
inline double src_coord(std::size_t dst, std::size_t dst_n, std::size_t src_n) {
  if (dst_n <= 1 || src_n <= 1) return 0.0;
  return static_cast<double>(dst) * static_cast<double>(src_n - 1) /
         static_cast<double>(dst_n - 1);
}

int parse_pnm_int(std::istream& is, const char* what) {
  // Skips whitespace and '#' comments per the netpbm header rules.
  int c = is.peek();
  while (c == '#' || std::isspace(c)) {
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else {
      is.get();
    }
    c = is.peek();
  }
  int v;
  if (!(is >> v)) fail(ErrorCategory::io, std::string("pnm: malformed header field: ") + what);
  return v;
}

std::uint8_t to_u8(double v) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0));
}

}  // namespace

std::vector<double> resize_plane_bilinear(const double* src, std::size_t h, std::size_t w,
                                          std::size_t out_h, std::size_t out_w) {
  std::vector<double> out(out_h * out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = src_coord(y, out_h, h);
    const std::size_t y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double sx = src_coord(x, out_w, w);
      const std::size_t x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - static_cast<double>(x0);
      const double top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
      const double bot = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
      out[y * out_w + x] = top * (1.0 - fy) + bot * fy;
    }
  }
  return out;
}

std::vector<double> resize_plane_nearest(const double* src, std::size_t h, std::size_t w,
                                         std::size_t out_h, std::size_t out_w) {
  std::vector<double> out(out_h * out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const std::size_t sy =
        std::min(static_cast<std::size_t>(std::lround(src_coord(y, out_h, h))), h - 1);
    for (std::size_t x = 0; x < out_w; ++x) {
      const std::size_t sx =
          std::min(static_cast<std::size_t>(std::lround(src_coord(x, out_w, w))), w - 1);
      out[y * out_w + x] = src[sy * w + sx];
    }
  }
  return out;
}

Tensor resize_bilinear(const Tensor& chw, std::size_t out_h, std::size_t out_w) {
  if (chw.rank() != 3) {
    fail(ErrorCategory::shape, "resize: expected [C,H,W], got " + shape_str(chw.shape()));
  }
  const std::size_t c = chw.shape()[0], h = chw.shape()[1], w = chw.shape()[2];
  Tensor out = Tensor::zeros({c, out_h, out_w});
  for (std::size_t i = 0; i < c; ++i) {
    const auto plane =
        resize_plane_bilinear(chw.value().data() + i * h * w, h, w, out_h, out_w);
    std::copy(plane.begin(), plane.end(), out.value_mut().data() + i * out_h * out_w);
  }
  return out;
}

Mask resize_nearest(const Mask& m, std::size_t out_h, std::size_t out_w) {
  Mask out(out_h, out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const std::size_t sy =
        std::min(static_cast<std::size_t>(std::lround(src_coord(y, out_h, m.height))),
                 m.height - 1);
    for (std::size_t x = 0; x < out_w; ++x) {
      const std::size_t sx =
          std::min(static_cast<std::size_t>(std::lround(src_coord(x, out_w, m.width))),
                   m.width - 1);
      out.at(y, x) = m.at(sy, sx);
    }
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const Tensor& image01) {
  if (image01.rank() != 3 || image01.shape()[0] != 3) {
    fail(ErrorCategory::shape, "ppm: expected [3,H,W], got " + shape_str(image01.shape()));
  }
  const std::size_t h = image01.shape()[1], w = image01.shape()[2];
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCategory::io, "ppm: cannot open '" + path.string() + "' for writing");
  os << "P6\n" << w << " " << h << "\n255\n";
  const auto v = image01.value();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const char b = static_cast<char>(to_u8(v[(c * h + y) * w + x]));
        os.write(&b, 1);
      }
    }
  }
  if (!os) fail(ErrorCategory::io, "ppm: write failed for '" + path.string() + "'");
}

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCategory::io, "ppm: cannot open '" + path.string() + "'");
  std::string magic;
  is >> magic;
  if (magic != "P6") fail(ErrorCategory::io, "ppm: bad magic '" + magic + "' (expected P6)");
  const int w = parse_pnm_int(is, "width");
  const int h = parse_pnm_int(is, "height");
  const int maxval = parse_pnm_int(is, "maxval");
  if (w <= 0 || h <= 0 || maxval != 255) fail(ErrorCategory::io, "ppm: unsupported header");
  is.get();  // single whitespace after maxval
  std::vector<unsigned char> raw(static_cast<std::size_t>(3 * w * h));
  if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    fail(ErrorCategory::io, "ppm: truncated pixel data in '" + path.string() + "'");
  }
  Tensor out = Tensor::zeros({3, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
  auto v = out.value_mut();
  const std::size_t hw = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  for (std::size_t i = 0; i < hw; ++i) {
    for (std::size_t c = 0; c < 3; ++c) v[c * hw + i] = raw[i * 3 + c] / 255.0;
  }
  return out;
}

void write_pgm8(const std::filesystem::path& path, const Mask& mask) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCategory::io, "pgm: cannot open '" + path.string() + "' for writing");
  os << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(mask.data.data()),
           static_cast<std::streamsize>(mask.data.size()));
  if (!os) fail(ErrorCategory::io, "pgm: write failed for '" + path.string() + "'");
}

Mask read_pgm8(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCategory::io, "pgm: cannot open '" + path.string() + "'");
  std::string magic;
  is >> magic;
  if (magic != "P5") fail(ErrorCategory::io, "pgm: bad magic '" + magic + "' (expected P5)");
  const int w = parse_pnm_int(is, "width");
  const int h = parse_pnm_int(is, "height");
  const int maxval = parse_pnm_int(is, "maxval");
  if (w <= 0 || h <= 0 || maxval != 255) fail(ErrorCategory::io, "pgm: unsupported header");
  is.get();
  Mask out(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  if (!is.read(reinterpret_cast<char*>(out.data.data()),
               static_cast<std::streamsize>(out.data.size()))) {
    fail(ErrorCategory::io, "pgm: truncated pixel data in '" + path.string() + "'");
  }
  return out;
}

void write_pgm16(const std::filesystem::path& path, const double* plane01, std::size_t h,
                 std::size_t w) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCategory::io, "pgm: cannot open '" + path.string() + "' for writing");
  os << "P5\n" << w << " " << h << "\n65535\n";
  for (std::size_t i = 0; i < h * w; ++i) {
    const double clamped = std::clamp(plane01[i], 0.0, 1.0);
    const auto s = static_cast<std::uint16_t>(std::lround(clamped * 65535.0));
    // 2-byte samples are most-significant-byte first.
    const char bytes[2] = {static_cast<char>(s >> 8), static_cast<char>(s & 0xff)};
    os.write(bytes, 2);
  }
  if (!os) fail(ErrorCategory::io, "pgm: write failed for '" + path.string() + "'");
}

std::vector<std::uint16_t> read_pgm16(const std::filesystem::path& path, std::size_t* h,
                                      std::size_t* w) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCategory::io, "pgm: cannot open '" + path.string() + "'");
  std::string magic;
  is >> magic;
  if (magic != "P5") fail(ErrorCategory::io, "pgm: bad magic '" + magic + "' (expected P5)");
  const int iw = parse_pnm_int(is, "width");
  const int ih = parse_pnm_int(is, "height");
  const int maxval = parse_pnm_int(is, "maxval");
  if (iw <= 0 || ih <= 0 || maxval != 65535) fail(ErrorCategory::io, "pgm: unsupported header");
  is.get();
  const std::size_t n = static_cast<std::size_t>(iw) * static_cast<std::size_t>(ih);
  std::vector<std::uint16_t> out(n);
  for (auto& s : out) {
    unsigned char b[2];
    if (!is.read(reinterpret_cast<char*>(b), 2)) {
      fail(ErrorCategory::io, "pgm: truncated pixel data in '" + path.string() + "'");
    }
    s = static_cast<std::uint16_t>((b[0] << 8) | b[1]);
  }
  if (h) *h = static_cast<std::size_t>(ih);
  if (w) *w = static_cast<std::size_t>(iw);
  return out;
}

}  // namespace mixcam
