#include "ispw/imagecore.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "ispw/binary_io.hpp"
#include "ispw/simd/kernels.hpp"

namespace ispw {

namespace binio {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

}  // namespace binio

CoordMap make_coord_map(std::size_t height, std::size_t width) {
  CoordMap m(height, width);
  for (std::size_t r = 0; r < height; ++r) {
    const float y = height > 1 ? static_cast<float>(-1.0 + 2.0 * double(r) / double(height - 1)) : 0.0f;
    for (std::size_t c = 0; c < width; ++c) {
      const float x = width > 1 ? static_cast<float>(-1.0 + 2.0 * double(c) / double(width - 1)) : 0.0f;
      m.at(0, r, c) = x;
      m.at(1, r, c) = y;
    }
  }
  return m;
}

namespace detail {

void downsample_plane_2x(std::span<const float> in, std::size_t h, std::size_t w, std::span<float> out) {
  const std::size_t ow = w / 2;
  for (std::size_t r = 0; r < h / 2; ++r) {
    const float* a = in.data() + (2 * r) * w;
    const float* b = a + w;
    for (std::size_t c = 0; c < ow; ++c) {
      out[r * ow + c] = 0.25f * ((a[2 * c] + a[2 * c + 1]) + (b[2 * c] + b[2 * c + 1]));
    }
  }
}

void upsample_plane_2x(std::span<const float> in, std::size_t h, std::size_t w, std::span<float> out) {
  const std::size_t ow = 2 * w;
  for (std::size_t r = 0; r < 2 * h; ++r) {
    for (std::size_t c = 0; c < ow; ++c) out[r * ow + c] = in[(r / 2) * w + c / 2];
  }
}

void blur_plane(std::span<const float> in, std::size_t h, std::size_t w, const std::vector<float>& kernel,
                std::span<float> out) {
  const std::size_t size = kernel.size();
  const std::size_t rad = size / 2;
  std::vector<float> padded(w + 2 * rad);
  std::vector<float> tmp(h * w, 0.0f);
  for (std::size_t r = 0; r < h; ++r) {
    const float* row = in.data() + r * w;
    for (std::size_t i = 0; i < padded.size(); ++i) {
      const auto src = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(rad);
      padded[i] = row[std::clamp<std::ptrdiff_t>(src, 0, static_cast<std::ptrdiff_t>(w) - 1)];
    }
    std::span<float> dst(tmp.data() + r * w, w);
    for (std::size_t t = 0; t < size; ++t) {
      simd::axpy(kernel[t], std::span<const float>(padded.data() + t, w), dst);
    }
  }
  for (std::size_t r = 0; r < h; ++r) {
    std::span<float> dst(out.data() + r * w, w);
    std::fill(dst.begin(), dst.end(), 0.0f);
    for (std::size_t t = 0; t < size; ++t) {
      const auto src = static_cast<std::ptrdiff_t>(r + t) - static_cast<std::ptrdiff_t>(rad);
      const auto rr = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(src, 0, static_cast<std::ptrdiff_t>(h) - 1));
      simd::axpy(kernel[t], std::span<const float>(tmp.data() + rr * w, w), dst);
    }
  }
}

}  // namespace detail

std::vector<float> gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0) {
    throw ParameterError("gaussian kernel size must be odd and >= 1, got " + std::to_string(size));
  }
  if (!(sigma > 0.0)) throw ParameterError("gaussian sigma must be > 0");
  const int rad = size / 2;
  std::vector<double> taps(static_cast<std::size_t>(size));
  double sum = 0.0;
  for (int i = -rad; i <= rad; ++i) {
    taps[static_cast<std::size_t>(i + rad)] = std::exp(-double(i * i) / (2.0 * sigma * sigma));
    sum += taps[static_cast<std::size_t>(i + rad)];
  }
  std::vector<float> out(taps.size());
  for (std::size_t i = 0; i < taps.size(); ++i) out[i] = static_cast<float>(taps[i] / sum);
  return out;
}

MaskImage binarize(const MaskImage& m) {
  MaskImage out(m.height(), m.width());
  auto src = m.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= 0.5f ? 1.0f : 0.0f;
  return out;
}

float sample_bilinear(std::span<const float> plane, std::size_t h, std::size_t w, double x, double y) {
  x = std::clamp(x, 0.0, double(w - 1));
  y = std::clamp(y, 0.0, double(h - 1));
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x1 = std::min(x0 + 1, w - 1);
  const std::size_t y1 = std::min(y0 + 1, h - 1);
  const double fx = x - double(x0);
  const double fy = y - double(y0);
  const double top = (1.0 - fx) * plane[y0 * w + x0] + fx * plane[y0 * w + x1];
  const double bot = (1.0 - fx) * plane[y1 * w + x0] + fx * plane[y1 * w + x1];
  return static_cast<float>((1.0 - fy) * top + fy * bot);
}

namespace {

std::uint8_t quantize8(float v) {
  const float c = std::clamp(std::isfinite(v) ? v : 0.0f, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

// Netpbm header: magic, width, height, maxval, exactly one whitespace byte.
struct PnmHeader {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t payload_offset = 0;
};

PnmHeader parse_pnm_header(const std::vector<std::uint8_t>& bytes, const char* magic, const std::string& what) {
  std::size_t pos = 0;
  auto fail = [&](const std::string& msg) -> PnmHeader {
    throw FormatError(what + ": " + msg + " at byte offset " + std::to_string(pos));
  };
  if (bytes.size() < 2 || bytes[0] != magic[0] || bytes[1] != magic[1]) {
    return fail(std::string("bad magic, expected ") + magic);
  }
  pos = 2;
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> std::size_t {
    skip_ws();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) fail("expected decimal number");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 28)) fail("header value too large");
      ++pos;
    }
    return v;
  };
  PnmHeader h;
  h.width = number();
  h.height = number();
  const std::size_t maxval = number();
  if (maxval != 255) fail("maxval must be 255, got " + std::to_string(maxval));
  if (h.width == 0 || h.height == 0) fail("zero image dimension");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail("missing whitespace after maxval");
  ++pos;
  h.payload_offset = pos;
  return h;
}

}  // namespace

std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
  const std::string header = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 3 * img.pixels());
  for (std::size_t r = 0; r < img.height(); ++r) {
    for (std::size_t c = 0; c < img.width(); ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) out.push_back(quantize8(img.at(ch, r, c)));
    }
  }
  return out;
}

RgbImage decode_ppm(const std::vector<std::uint8_t>& bytes) {
  const PnmHeader h = parse_pnm_header(bytes, "P6", "ppm");
  const std::size_t need = 3 * h.width * h.height;
  if (bytes.size() - h.payload_offset < need) {
    throw FormatError("ppm: truncated payload at byte offset " + std::to_string(bytes.size()) + " (expected " +
                      std::to_string(need) + " payload bytes)");
  }
  RgbImage img(h.height, h.width);
  const std::uint8_t* p = bytes.data() + h.payload_offset;
  for (std::size_t r = 0; r < h.height; ++r) {
    for (std::size_t c = 0; c < h.width; ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) img.at(ch, r, c) = static_cast<float>(*p++) / 255.0f;
    }
  }
  return img;
}

RgbImage read_ppm(const std::string& path) { return decode_ppm(binio::read_file(path)); }
void write_ppm(const std::string& path, const RgbImage& img) { binio::write_file(path, encode_ppm(img)); }

MaskImage read_pgm_mask(const std::string& path) {
  const auto bytes = binio::read_file(path);
  const PnmHeader h = parse_pnm_header(bytes, "P5", "pgm");
  if (bytes.size() - h.payload_offset < h.width * h.height) {
    throw FormatError("pgm: truncated payload at byte offset " + std::to_string(bytes.size()));
  }
  MaskImage m(h.height, h.width);
  auto v = m.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = bytes[h.payload_offset + i] >= 128 ? 1.0f : 0.0f;
  return m;
}

void write_pgm_mask(const std::string& path, const MaskImage& mask) {
  const std::string header = "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (float v : mask.values()) out.push_back(v >= 0.5f ? 255 : 0);
  binio::write_file(path, out);
}

std::vector<std::uint8_t> encode_raw4(const RawImage& raw) {
  std::vector<std::uint8_t> out{'R', 'A', 'W', '4'};
  out.reserve(12 + 4 * raw.size());
  binio::put_u32(out, static_cast<std::uint32_t>(raw.height()));
  binio::put_u32(out, static_cast<std::uint32_t>(raw.width()));
  for (float v : raw.values()) binio::put_f32(out, v);
  return out;
}

RawImage decode_raw4(const std::vector<std::uint8_t>& bytes) {
  binio::Reader rd(bytes, "raw4");
  if (rd.str(4) != "RAW4") {
    throw FormatError("raw4: bad magic at byte offset 0");
  }
  const std::uint32_t h = rd.u32();
  const std::uint32_t w = rd.u32();
  if (h == 0 || w == 0) rd.fail("zero image dimension");
  const std::size_t expect = 4ull * h * w * 4ull;
  if (rd.remaining() != expect) {
    rd.fail("payload size " + std::to_string(rd.remaining()) + " does not match header (" + std::to_string(expect) +
            ")");
  }
  std::vector<float> data(4ull * h * w);
  for (float& v : data) {
    v = rd.f32();
    if (!std::isfinite(v) || v < 0.0f) rd.fail("non-finite or negative sample");
  }
  return RawImage(h, w, std::move(data));
}

RawImage read_raw4(const std::string& path) { return decode_raw4(binio::read_file(path)); }
void write_raw4(const std::string& path, const RawImage& raw) { binio::write_file(path, encode_raw4(raw)); }

}  // namespace ispw
