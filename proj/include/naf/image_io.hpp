#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace naf {

class ImageFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Planar 3-channel image of arbitrary size, values in [0, 1].
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<float> chw;
};

// Binary PPM (P6, maxval 255). Values are clamped and quantized round-half-up.
std::vector<std::uint8_t> encode_ppm(std::span<const float> chw, int height, int width);
RgbImage decode_ppm(std::span<const std::uint8_t> bytes);

void write_image(std::span<const float> chw, int height, int width,
                 const std::filesystem::path& path);
// 3x32x32 image.
void write_image(std::span<const float> chw, const std::filesystem::path& path);
RgbImage read_image(const std::filesystem::path& path);

// Tiles equally sized images row by row with `gap` pixels of `fill` between
// tiles. Every row must hold the same number of tiles.
RgbImage tile_images(const std::vector<std::vector<std::span<const float>>>& rows,
                     int height, int width, int gap = 2, float fill = 1.0f);

}  // namespace naf
