#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "naf/tensor.hpp"

namespace naf {

inline constexpr int kImageSide = 32;
inline constexpr int kImageChannels = 3;
inline constexpr std::size_t kImagePlane = kImageSide * kImageSide;
inline constexpr std::size_t kImageValues = kImageChannels * kImagePlane;
inline constexpr std::size_t kRecordBytes = 1 + kImageValues;
inline constexpr int kBatchFileRecords = 10000;
inline constexpr int kTrainPoolSize = 50000;
inline constexpr int kValStart = 45000;

class DataFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Planar CHW image with values in [0, 1].
using Image = std::vector<float>;

// One CIFAR-10 record: label byte and 1024 R, 1024 G, 1024 B bytes in
// row-major order.
struct ImageRecord {
  int index = 0;
  std::uint8_t label = 0;
  std::array<std::uint8_t, kImageValues> pixels{};

  // byte / 255 per value.
  Image clean() const;
};

std::vector<ImageRecord> parse_cifar10_batch(std::span<const std::uint8_t> bytes,
                                             int first_index = 0);
std::vector<std::uint8_t> serialize_cifar10_batch(std::span<const ImageRecord> records);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// Round-half-up quantization of a [0, 1] value to a byte.
std::uint8_t quantize_unit(double v);

// ---------------------------------------------------------------------------
// Degradations

// Normalized Gaussian taps for i in [-r, r], r = ceil(3 sigma); [1] for sigma 0.
std::vector<double> gaussian_kernel_1d(double sigma);

// Mirror index without repeating the edge sample: -1 -> 1, n -> n - 2.
int reflect_index(int i, int n);

// Separable blur (horizontal then vertical) of each plane of a CHW image with
// reflect padding.
Image gaussian_blur(std::span<const float> img, int channels, int height, int width,
                    double sigma);
// 3x32x32 image, sigma in [0, 3].
Image gaussian_blur(std::span<const float> img, double sigma);

// Unclamped N(0, (sigma/255)^2) samples from the counter stream `seed`.
// Consecutive pairs come from one Box-Muller transform.
std::vector<double> gaussian_noise_field(std::size_t count, double sigma_noise,
                                         std::uint64_t seed);
// img + noise, clamped to [0, 1]. sigma_noise is in 0-255 pixel units.
Image add_gaussian_noise(std::span<const float> img, double sigma_noise, std::uint64_t seed);

enum class Split { Train, Val, Test };
const char* split_name(Split s);

struct DegradationSpec {
  double sigma_blur = 0.0;   // [0, 3]
  double sigma_noise = 0.0;  // [0, 30], 0-255 units
  std::uint64_t noise_seed = 0;
  friend bool operator==(const DegradationSpec&, const DegradationSpec&) = default;
};

inline constexpr double kMaxBlurSigma = 3.0;
inline constexpr double kMaxNoiseSigma = 30.0;

// Pure function of (dataset_seed, split, index); each split has its own stream.
DegradationSpec make_degradation_spec(std::uint64_t dataset_seed, Split split, int index);

// Blur, then noise, then clamp.
Image degrade(const ImageRecord& record, const DegradationSpec& spec);

// ---------------------------------------------------------------------------
// Dataset

struct Cifar10 {
  std::vector<ImageRecord> train_pool;  // data_batch_1..5, indices 0..49999
  std::vector<ImageRecord> test;        // test_batch, indices 0..9999
};

std::vector<std::string> cifar10_file_names();
// Throws DataFormatError naming every missing file.
Cifar10 load_cifar10(const std::filesystem::path& dir);

struct DatasetSplit {
  std::vector<int> train;  // 0..44999
  std::vector<int> val;    // 45000..49999
  std::vector<int> test;   // 0..9999 of the test file
};

// Standard partition, optionally truncated to the first `train_n`, `val_n`,
// `test_n` indices of each split (negative = whole split).
DatasetSplit make_split(const Cifar10& data, int train_n = -1, int val_n = -1,
                        int test_n = -1);

// Fixed (degraded, clean) pairs, one per selected record.
struct PairedSet {
  Split split = Split::Train;
  std::vector<int> indices;
  std::vector<DegradationSpec> specs;
  std::vector<float> degraded;  // size() * kImageValues
  std::vector<float> clean;     // size() * kImageValues

  std::size_t size() const { return indices.size(); }
  std::span<const float> degraded_image(std::size_t i) const {
    return std::span<const float>(degraded).subspan(i * kImageValues, kImageValues);
  }
  std::span<const float> clean_image(std::size_t i) const {
    return std::span<const float>(clean).subspan(i * kImageValues, kImageValues);
  }
};

PairedSet build_pairs(std::span<const ImageRecord> pool, std::span<const int> indices,
                      Split split, std::uint64_t dataset_seed);

// Positions [0, count) shuffled by a Fisher-Yates pass keyed on epoch_seed and
// cut into batches of batch_size; the last batch may be short.
std::vector<std::vector<int>> make_batches(std::size_t count, int batch_size,
                                           std::uint64_t epoch_seed);

struct Batch {
  Tensor degraded;  // (b, 3, 32, 32)
  Tensor clean;
};

Batch gather_batch(const PairedSet& set, std::span<const int> positions);

// FNV-1a over the raw float bytes of the degraded images in `positions`.
std::uint64_t degraded_checksum(const PairedSet& set, std::span<const int> positions);

// Advisory cache of degraded inputs: one CIFAR-layout record per pair with the
// label byte 0 and pixels quantized round-half-up.
void write_degraded_cache(const std::filesystem::path& path, const PairedSet& set);
// True when the file matches the quantized recomputation byte for byte.
bool verify_degraded_cache(const std::filesystem::path& path, const PairedSet& set);

// ---------------------------------------------------------------------------
// Synthetic data in the CIFAR-10 binary layout, for environments without the
// real archive.

std::vector<ImageRecord> synthesize_images(int count, std::uint64_t seed, int first_index = 0);
// Writes data_batch_1..5.bin and test_batch.bin (10000 records each).
void write_synthetic_cifar10(const std::filesystem::path& dir, std::uint64_t seed);

}  // namespace naf
