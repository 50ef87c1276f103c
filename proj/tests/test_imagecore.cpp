#include <cmath>
#include <filesystem>

#include "ispw/binary_io.hpp"
#include "ispw/imagecore.hpp"
#include "support.hpp"

using namespace ispw;
using testsupport::random_image;

TEST_CASE("image construction validates dimensions and payload size") {
  CHECK_THROWS_AS(RgbImage(0, 3), DimensionError);
  CHECK_THROWS_AS(RgbImage(2, 2, std::vector<float>(11)), DimensionError);
  RgbImage ok(2, 3, 0.25f);
  CHECK(ok.size() == 18);
}

TEST_CASE("downsample of a constant image is constant") {
  RgbImage img(6, 4, 0.3f);
  auto d = downsample_bilinear_2x(img);
  CHECK(d.height() == 3);
  CHECK(d.width() == 2);
  for (float v : d.values()) CHECK(v == doctest::Approx(0.3f));
}

TEST_CASE("downsample of a 2x2 checker block is 0.5") {
  MaskImage m(2, 2, std::vector<float>{0, 1, 1, 0});
  CHECK(downsample_bilinear_2x(m).at(0, 0, 0) == 0.5f);
}

TEST_CASE("downsample equals brute-force block mean") {
  SplitMix64 rng(1);
  auto img = random_image<RgbImage>(8, 8, rng);
  auto d = downsample_bilinear_2x(img);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t q = 0; q < 4; ++q) {
        const float want = 0.25f * ((img.at(c, 2 * r, 2 * q) + img.at(c, 2 * r, 2 * q + 1)) +
                                    (img.at(c, 2 * r + 1, 2 * q) + img.at(c, 2 * r + 1, 2 * q + 1)));
        CHECK(d.at(c, r, q) == want);
      }
    }
  }
}

TEST_CASE("downsample rejects odd dimensions") {
  CHECK_THROWS_AS(downsample_bilinear_2x(RgbImage(3, 4)), DimensionError);
  CHECK_THROWS_AS(downsample_bilinear_2x(RgbImage(4, 5)), DimensionError);
}

TEST_CASE("nearest upsample replicates pixels") {
  auto one = upsample_nearest_2x(MaskImage(1, 1, 1.0f));
  CHECK(one.height() == 2);
  for (float v : one.values()) CHECK(v == 1.0f);

  MaskImage col(2, 1, std::vector<float>{0, 1});
  auto up = upsample_nearest_2x(col);
  CHECK(up.height() == 4);
  CHECK(up.width() == 2);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 2; ++c) CHECK(up.at(0, r, c) == (r < 2 ? 0.0f : 1.0f));
  }
}

TEST_CASE("binary mask survives upsample then downsample then threshold") {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    MaskImage m(5 + trial % 3, 4 + trial % 5);
    for (float& v : m.values()) v = rng.uniform() < 0.5 ? 0.0f : 1.0f;
    CHECK(binarize(downsample_bilinear_2x(upsample_nearest_2x(m))) == m);
  }
}

TEST_CASE("gaussian kernel is normalized and matches the closed form") {
  const auto k = gaussian_kernel(9, 2.0);
  double sum = 0.0;
  for (float v : k) sum += v;
  CHECK(std::abs(sum - 1.0) < 1e-7);
  double z = 0.0;
  for (int i = -4; i <= 4; ++i) z += std::exp(-double(i * i) / 8.0);
  CHECK(k[4] == doctest::Approx(1.0 / z).epsilon(1e-7));
  CHECK_THROWS_AS(gaussian_kernel(8, 2.0), ParameterError);
  CHECK_THROWS_AS(gaussian_kernel(9, 0.0), ParameterError);
}

TEST_CASE("blurring a centered impulse reproduces the separable kernel") {
  MaskImage imp(9, 9, 0.0f);
  imp.at(0, 4, 4) = 1.0f;
  const auto k = gaussian_kernel(9, 2.0);
  auto out = gaussian_blur(imp, 9, 2.0);
  for (std::size_t r = 0; r < 9; ++r) {
    for (std::size_t c = 0; c < 9; ++c) CHECK(out.at(0, r, c) == doctest::Approx(double(k[r]) * k[c]).epsilon(1e-6));
  }
}

TEST_CASE("blur of a constant is that constant and commutes with offsets") {
  SplitMix64 rng(3);
  RgbImage flat(7, 12, 0.42f);
  const auto blurred = gaussian_blur(flat);
  for (float v : blurred.values()) CHECK(v == doctest::Approx(0.42f).epsilon(1e-6));
  auto img = random_image<RgbImage>(13, 10, rng, 0.0, 0.5);
  auto shifted = img;
  for (float& v : shifted.values()) v += 0.25f;
  auto a = gaussian_blur(img), b = gaussian_blur(shifted);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(b.values()[i] - a.values()[i] - 0.25f) < 1e-6);
}

TEST_CASE("resampling and blur stay within the input range per channel") {
  SplitMix64 rng(4);
  for (int t = 0; t < 10; ++t) {
    auto img = random_image<RgbImage>(10, 8, rng, 0.1, 0.9);
    for (const auto& out : {gaussian_blur(img, 5, 1.3), upsample_nearest_2x(img)}) {
      for (std::size_t c = 0; c < 3; ++c) {
        const auto [lo, hi] = std::minmax_element(img.plane(c).begin(), img.plane(c).end());
        for (float v : out.plane(c)) {
          CHECK(v >= *lo - 1e-6f);
          CHECK(v <= *hi + 1e-6f);
        }
      }
    }
    auto d = downsample_bilinear_2x(img);
    for (std::size_t c = 0; c < 3; ++c) {
      const auto [lo, hi] = std::minmax_element(img.plane(c).begin(), img.plane(c).end());
      for (float v : d.plane(c)) CHECK((v >= *lo && v <= *hi));
    }
  }
}

TEST_CASE("coordinate map spans [-1,1] monotonically") {
  auto m = make_coord_map(5, 7);
  CHECK(m.at(0, 0, 0) == -1.0f);
  CHECK(m.at(0, 0, 6) == 1.0f);
  CHECK(m.at(1, 0, 0) == -1.0f);
  CHECK(m.at(1, 4, 0) == 1.0f);
  for (std::size_t c = 1; c < 7; ++c) CHECK(m.at(0, 2, c) > m.at(0, 2, c - 1));
  for (std::size_t r = 1; r < 5; ++r) CHECK(m.at(1, r, 3) > m.at(1, r - 1, 3));
}

TEST_CASE("ppm quantization round trip") {
  RgbImage px(1, 1);
  px.at(0, 0, 0) = 1.0f;
  px.at(1, 0, 0) = 0.0f;
  px.at(2, 0, 0) = 0.5f;
  const auto bytes = encode_ppm(px);
  const std::string header = "P6\n1 1\n255\n";
  REQUIRE(bytes.size() == header.size() + 3);
  CHECK(bytes[header.size()] == 255);
  CHECK(bytes[header.size() + 1] == 0);
  CHECK(bytes[header.size() + 2] == 128);
  auto back = decode_ppm(bytes);
  CHECK(back.at(0, 0, 0) == 1.0f);
  CHECK(back.at(1, 0, 0) == 0.0f);
  CHECK(back.at(2, 0, 0) == 128.0f / 255.0f);

  RgbImage zeros(3, 4, 0.0f);
  CHECK(decode_ppm(encode_ppm(zeros)) == zeros);
}

TEST_CASE("ppm header parsing and errors") {
  std::string text = "P6\n2 2\n255\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  for (int i = 0; i < 12; ++i) bytes.push_back(std::uint8_t(i * 20));
  auto img = decode_ppm(bytes);
  CHECK(img.height() == 2);
  CHECK(img.width() == 2);
  CHECK(img.at(0, 1, 1) == 180.0f / 255.0f);

  auto bad_magic = bytes;
  bad_magic[1] = '5';
  CHECK_THROWS_AS(decode_ppm(bad_magic), FormatError);
  auto truncated = bytes;
  truncated.pop_back();
  try {
    decode_ppm(truncated);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }
  std::string sixteen = "P6\n1 1\n65535\n\0\0\0\0\0\0";
  CHECK_THROWS_AS(decode_ppm(std::vector<std::uint8_t>(sixteen.begin(), sixteen.end())), FormatError);
}

TEST_CASE("raw4 container round trip and size") {
  SplitMix64 rng(5);
  auto raw = random_image<RawImage>(3, 5, rng);
  CHECK(decode_raw4(encode_raw4(raw)) == raw);
  CHECK(encode_raw4(RawImage(1, 1)).size() == 28);
  auto bytes = encode_raw4(raw);
  bytes[3] = '5';
  CHECK_THROWS_AS(decode_raw4(bytes), FormatError);
  auto short_bytes = encode_raw4(raw);
  short_bytes.resize(short_bytes.size() - 4);
  CHECK_THROWS_AS(decode_raw4(short_bytes), FormatError);
}

TEST_CASE("file round trips through disk") {
  auto dir = testsupport::scratch_dir("imagecore");
  SplitMix64 rng(6);
  auto raw = random_image<RawImage>(4, 4, rng);
  write_raw4((dir / "a.raw4").string(), raw);
  CHECK(read_raw4((dir / "a.raw4").string()) == raw);
  MaskImage m(3, 3);
  m.at(0, 1, 2) = 1.0f;
  write_pgm_mask((dir / "m.pgm").string(), m);
  CHECK(read_pgm_mask((dir / "m.pgm").string()) == m);
  CHECK_THROWS_AS(read_ppm((dir / "missing.ppm").string()), IoError);
}
