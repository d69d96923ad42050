#include "naf/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "naf/data.hpp"

namespace naf {

std::vector<std::uint8_t> encode_ppm(std::span<const float> chw, int height, int width) {
  if (height <= 0 || width <= 0) throw ImageFormatError("encode_ppm: empty image");
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  if (chw.size() != 3 * plane) {
    throw ImageFormatError("encode_ppm: expected " + std::to_string(3 * plane) +
                           " values, got " + std::to_string(chw.size()));
  }
  const std::string head =
      "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(head.begin(), head.end());
  out.reserve(head.size() + 3 * plane);
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) out.push_back(quantize_unit(chw[c * plane + p]));
  }
  return out;
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
    tok.push_back(static_cast<char>(bytes[pos++]));
  }
  return tok;
}

int header_int(std::span<const std::uint8_t> bytes, std::size_t& pos, const char* what) {
  const std::string tok = next_token(bytes, pos);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), ::isdigit) || tok.size() > 6) {
    throw ImageFormatError(std::string("PPM header: bad ") + what + " '" + tok + "'");
  }
  return std::stoi(tok);
}

}  // namespace

RgbImage decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P6") throw ImageFormatError("not a binary PPM (missing P6 magic)");
  RgbImage img;
  img.width = header_int(bytes, pos, "width");
  img.height = header_int(bytes, pos, "height");
  const int maxval = header_int(bytes, pos, "maxval");
  if (maxval != 255) {
    throw ImageFormatError("PPM maxval " + std::to_string(maxval) + " unsupported (need 255)");
  }
  if (img.width <= 0 || img.height <= 0) throw ImageFormatError("PPM has zero size");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw ImageFormatError("PPM header not terminated");
  }
  ++pos;
  const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
  if (bytes.size() - pos != 3 * plane) {
    throw ImageFormatError("PPM pixel data is " + std::to_string(bytes.size() - pos) +
                           " bytes, expected " + std::to_string(3 * plane));
  }
  img.chw.resize(3 * plane);
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) img.chw[c * plane + p] = bytes[pos + 3 * p + c] / 255.0f;
  }
  return img;
}

void write_image(std::span<const float> chw, int height, int width,
                 const std::filesystem::path& path) {
  write_file(path, encode_ppm(chw, height, width));
}

void write_image(std::span<const float> chw, const std::filesystem::path& path) {
  write_image(chw, kImageSide, kImageSide, path);
}

RgbImage read_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_ppm(bytes);
  } catch (const ImageFormatError& e) {
    throw ImageFormatError(path.string() + ": " + e.what());
  }
}

RgbImage tile_images(const std::vector<std::vector<std::span<const float>>>& rows, int height,
                     int width, int gap, float fill) {
  if (rows.empty() || rows.front().empty()) throw std::invalid_argument("tile_images: no tiles");
  const int cols = static_cast<int>(rows.front().size());
  const std::size_t tile_plane = static_cast<std::size_t>(height) * width;
  RgbImage out;
  out.height = static_cast<int>(rows.size()) * height + (static_cast<int>(rows.size()) - 1) * gap;
  out.width = cols * width + (cols - 1) * gap;
  const std::size_t plane = static_cast<std::size_t>(out.height) * out.width;
  out.chw.assign(3 * plane, fill);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<int>(rows[r].size()) != cols) {
      throw std::invalid_argument("tile_images: ragged rows");
    }
    for (int k = 0; k < cols; ++k) {
      const auto& tile = rows[r][k];
      if (tile.size() != 3 * tile_plane) throw std::invalid_argument("tile_images: tile size");
      const int y0 = static_cast<int>(r) * (height + gap);
      const int x0 = k * (width + gap);
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < height; ++y) {
          std::copy_n(tile.begin() + c * tile_plane + static_cast<std::size_t>(y) * width, width,
                      out.chw.begin() + c * plane +
                          static_cast<std::size_t>(y0 + y) * out.width + x0);
        }
      }
    }
  }
  return out;
}

}  // namespace naf
