#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "naf/image_io.hpp"

using namespace naf;

namespace {

// Minimal P6 reader that only accepts the exact header layout written by
// encode_ppm.
std::vector<int> read_p6(const std::vector<std::uint8_t>& bytes, int& w, int& h) {
  std::string text(bytes.begin(), bytes.end());
  std::istringstream is(text);
  std::string magic;
  int maxval;
  is >> magic >> w >> h >> maxval;
  is.get();
  REQUIRE(magic == "P6");
  REQUIRE(maxval == 255);
  const std::size_t start = static_cast<std::size_t>(is.tellg());
  return std::vector<int>(bytes.begin() + start, bytes.end());
}

}  // namespace

TEST_SUITE("image_io") {
  TEST_CASE("quantization and interleaving") {
    std::vector<float> chw(3 * 2 * 3);
    for (std::size_t i = 0; i < chw.size(); ++i) chw[i] = 1.0f;
    chw[0] = 0.5f;       // R of pixel 0
    chw[6 + 1] = 0.0f;   // G of pixel 1
    chw[12 + 5] = 2.0f;  // B of pixel 5, clamped
    int w = 0, h = 0;
    const auto px = read_p6(encode_ppm(chw, 2, 3), w, h);
    CHECK(w == 3);
    CHECK(h == 2);
    REQUIRE(px.size() == 18);
    CHECK(px[0] == 128);
    CHECK(px[1] == 255);
    CHECK(px[3 + 1] == 0);
    CHECK(px[15 + 2] == 255);
  }

  TEST_CASE("files round-trip through the byte grid") {
    const auto dir = fixture::temp_dir("ppm");
    std::vector<float> chw(3 * 32 * 32);
    for (std::size_t i = 0; i < chw.size(); ++i) chw[i] = static_cast<float>(i % 256) / 255.0f;
    write_image(chw, dir / "a.ppm");
    const RgbImage img = read_image(dir / "a.ppm");
    CHECK(img.height == 32);
    CHECK(img.width == 32);
    CHECK(fixture::max_abs_diff(std::vector<double>(img.chw.begin(), img.chw.end()),
                                std::vector<double>(chw.begin(), chw.end())) < 1e-7);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("malformed files are rejected") {
    const std::string p3 = "P3\n1 1\n255\n0 0 0\n";
    CHECK_THROWS_AS(decode_ppm(std::vector<std::uint8_t>(p3.begin(), p3.end())), ImageFormatError);
    const std::string deep = "P6\n1 1\n65535\n";
    CHECK_THROWS_AS(decode_ppm(std::vector<std::uint8_t>(deep.begin(), deep.end())), ImageFormatError);
    const std::string shortp = "P6\n2 1\n255\nabc";
    CHECK_THROWS_AS(decode_ppm(std::vector<std::uint8_t>(shortp.begin(), shortp.end())), ImageFormatError);
    const std::string comment = "P6\n# made by hand\n1 1\n255\nabc";
    const RgbImage ok = decode_ppm(std::vector<std::uint8_t>(comment.begin(), comment.end()));
    CHECK(ok.chw[0] == doctest::Approx(97 / 255.0));
    CHECK_THROWS_WITH(read_image("/nonexistent/x.ppm"), doctest::Contains("/nonexistent/x.ppm"));
  }

  TEST_CASE("tiles are laid out row by row with gaps") {
    const std::vector<float> a(3 * 4, 0.0f), b(3 * 4, 0.5f);
    const RgbImage t = tile_images({{a, b}, {b, a}}, 2, 2, 1, 1.0f);
    CHECK(t.width == 5);
    CHECK(t.height == 5);
    const auto at = [&](int c, int y, int x) { return t.chw[(c * 5 + y) * 5 + x]; };
    CHECK(at(0, 0, 0) == 0.0f);
    CHECK(at(0, 0, 2) == 1.0f);
    CHECK(at(1, 0, 3) == 0.5f);
    CHECK(at(2, 3, 0) == 0.5f);
    CHECK(at(2, 4, 4) == 0.0f);
    CHECK_THROWS_AS(tile_images({{a, b}, {a}}, 2, 2), std::invalid_argument);
  }
}
