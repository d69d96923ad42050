#include "naf/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "naf/rng.hpp"

namespace naf {

Image ImageRecord::clean() const {
  Image img(kImageValues);
  for (std::size_t i = 0; i < kImageValues; ++i) img[i] = static_cast<float>(pixels[i] / 255.0);
  return img;
}

std::vector<ImageRecord> parse_cifar10_batch(std::span<const std::uint8_t> bytes,
                                             int first_index) {
  if (bytes.size() % kRecordBytes != 0) {
    const std::size_t whole = bytes.size() / kRecordBytes;
    std::ostringstream os;
    os << "CIFAR-10 batch is truncated: " << bytes.size() << " bytes is not a multiple of "
       << kRecordBytes << " (expected " << whole * kRecordBytes << " or "
       << (whole + 1) * kRecordBytes << " bytes)";
    throw DataFormatError(os.str());
  }
  const std::size_t count = bytes.size() / kRecordBytes;
  std::vector<ImageRecord> records(count);
  for (std::size_t r = 0; r < count; ++r) {
    const std::uint8_t* src = bytes.data() + r * kRecordBytes;
    if (src[0] > 9) {
      throw DataFormatError("CIFAR-10 record " + std::to_string(r) + " has label byte " +
                            std::to_string(src[0]) + " (> 9)");
    }
    records[r].index = first_index + static_cast<int>(r);
    records[r].label = src[0];
    std::memcpy(records[r].pixels.data(), src + 1, kImageValues);
  }
  return records;
}

std::vector<std::uint8_t> serialize_cifar10_batch(std::span<const ImageRecord> records) {
  std::vector<std::uint8_t> out(records.size() * kRecordBytes);
  for (std::size_t r = 0; r < records.size(); ++r) {
    std::uint8_t* dst = out.data() + r * kRecordBytes;
    dst[0] = records[r].label;
    std::memcpy(dst + 1, records[r].pixels.data(), kImageValues);
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::uint8_t quantize_unit(double v) {
  const double q = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::min(q, 255.0));
}

std::vector<double> gaussian_kernel_1d(double sigma) {
  if (!(sigma >= 0.0)) {
    throw std::invalid_argument("gaussian_kernel_1d: sigma must be non-negative, got " +
                                std::to_string(sigma));
  }
  if (sigma == 0.0) return {1.0};
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-static_cast<double>(i) * i / (2.0 * sigma * sigma));
    total += k[i + r];
  }
  for (double& v : k) v /= total;
  return k;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Image gaussian_blur(std::span<const float> img, int channels, int height, int width,
                    double sigma) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  if (img.size() != plane * channels) {
    throw std::invalid_argument("gaussian_blur: image has " + std::to_string(img.size()) +
                                " values, expected " + std::to_string(plane * channels));
  }
  const std::vector<double> k = gaussian_kernel_1d(sigma);
  const int r = static_cast<int>(k.size() / 2);
  Image out(img.size());
  std::vector<double> tmp(plane);
  for (int c = 0; c < channels; ++c) {
    const float* src = img.data() + c * plane;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double acc = 0.0;
        for (int j = -r; j <= r; ++j) acc += k[j + r] * src[y * width + reflect_index(x + j, width)];
        tmp[y * width + x] = acc;
      }
    }
    float* dst = out.data() + c * plane;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double acc = 0.0;
        for (int j = -r; j <= r; ++j) acc += k[j + r] * tmp[reflect_index(y + j, height) * width + x];
        dst[y * width + x] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Image gaussian_blur(std::span<const float> img, double sigma) {
  if (!(sigma >= 0.0 && sigma <= kMaxBlurSigma)) {
    throw std::invalid_argument("gaussian_blur: sigma " + std::to_string(sigma) +
                                " outside [0, 3]");
  }
  return gaussian_blur(img, kImageChannels, kImageSide, kImageSide, sigma);
}

std::vector<double> gaussian_noise_field(std::size_t count, double sigma_noise,
                                         std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<double> out(count);
  const double scale = sigma_noise / 255.0;
  for (std::size_t i = 0; i < count; i += 2) {
    double z0;
    double z1;
    rng.normal_pair(z0, z1);
    out[i] = scale * z0;
    if (i + 1 < count) out[i + 1] = scale * z1;
  }
  return out;
}

Image add_gaussian_noise(std::span<const float> img, double sigma_noise, std::uint64_t seed) {
  Image out(img.begin(), img.end());
  if (sigma_noise == 0.0) return out;
  const std::vector<double> noise = gaussian_noise_field(img.size(), sigma_noise, seed);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(std::clamp(static_cast<double>(img[i]) + noise[i], 0.0, 1.0));
  }
  return out;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

DegradationSpec make_degradation_spec(std::uint64_t dataset_seed, Split split, int index) {
  const std::uint64_t split_key = derive_key(dataset_seed, 0x5350 + static_cast<int>(split));
  CounterRng rng(derive_key(split_key, static_cast<std::uint64_t>(index)));
  DegradationSpec spec;
  spec.sigma_blur = rng.uniform(0.0, kMaxBlurSigma);
  spec.sigma_noise = rng.uniform(0.0, kMaxNoiseSigma);
  spec.noise_seed = rng.next();
  return spec;
}

Image degrade(const ImageRecord& record, const DegradationSpec& spec) {
  const Image clean = record.clean();
  const Image blurred = gaussian_blur(clean, spec.sigma_blur);
  return add_gaussian_noise(blurred, spec.sigma_noise, spec.noise_seed);
}

std::vector<std::string> cifar10_file_names() {
  return {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
          "data_batch_4.bin", "data_batch_5.bin", "test_batch.bin"};
}

Cifar10 load_cifar10(const std::filesystem::path& dir) {
  std::vector<std::string> missing;
  for (const std::string& name : cifar10_file_names()) {
    if (!std::filesystem::is_regular_file(dir / name)) missing.push_back(name);
  }
  if (!missing.empty()) {
    std::ostringstream os;
    os << "CIFAR-10 binary files missing in '" << dir.string() << "':";
    for (const auto& m : missing) os << " " << m;
    os << " (expected data_batch_1.bin .. data_batch_5.bin and test_batch.bin; "
          "`nafnet synth-data --out DIR` writes a synthetic stand-in)";
    throw DataFormatError(os.str());
  }
  Cifar10 data;
  const auto names = cifar10_file_names();
  for (int b = 0; b < 5; ++b) {
    const auto bytes = read_file(dir / names[b]);
    auto recs = parse_cifar10_batch(bytes, static_cast<int>(data.train_pool.size()));
    data.train_pool.insert(data.train_pool.end(), recs.begin(), recs.end());
  }
  data.test = parse_cifar10_batch(read_file(dir / names[5]), 0);
  return data;
}

DatasetSplit make_split(const Cifar10& data, int train_n, int val_n, int test_n) {
  const int pool = static_cast<int>(data.train_pool.size());
  const int val_start = std::min(kValStart, pool);
  auto take = [](int begin, int end, int limit) {
    std::vector<int> out;
    const int stop = limit < 0 ? end : std::min(end, begin + limit);
    for (int i = begin; i < stop; ++i) out.push_back(i);
    return out;
  };
  DatasetSplit s;
  s.train = take(0, val_start, train_n);
  s.val = take(val_start, pool, val_n);
  s.test = take(0, static_cast<int>(data.test.size()), test_n);
  return s;
}

PairedSet build_pairs(std::span<const ImageRecord> pool, std::span<const int> indices,
                      Split split, std::uint64_t dataset_seed) {
  PairedSet set;
  set.split = split;
  set.indices.assign(indices.begin(), indices.end());
  set.specs.reserve(indices.size());
  set.degraded.resize(indices.size() * kImageValues);
  set.clean.resize(indices.size() * kImageValues);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const ImageRecord& rec = pool[static_cast<std::size_t>(indices[i])];
    const DegradationSpec spec = make_degradation_spec(dataset_seed, split, rec.index);
    const Image clean = rec.clean();
    const Image noisy = degrade(rec, spec);
    std::copy(clean.begin(), clean.end(), set.clean.begin() + i * kImageValues);
    std::copy(noisy.begin(), noisy.end(), set.degraded.begin() + i * kImageValues);
    set.specs.push_back(spec);
  }
  return set;
}

std::vector<std::vector<int>> make_batches(std::size_t count, int batch_size,
                                           std::uint64_t epoch_seed) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  if (count == 0) throw std::invalid_argument("make_batches: empty split");
  std::vector<int> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = static_cast<int>(i);
  CounterRng rng(epoch_seed);
  for (std::size_t i = count - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<std::vector<int>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t stop = std::min(count, start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + start, order.begin() + stop);
  }
  return batches;
}

Batch gather_batch(const PairedSet& set, std::span<const int> positions) {
  const int b = static_cast<int>(positions.size());
  std::vector<float> deg(positions.size() * kImageValues);
  std::vector<float> cln(positions.size() * kImageValues);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto p = static_cast<std::size_t>(positions[i]);
    std::copy_n(set.degraded.begin() + p * kImageValues, kImageValues,
                deg.begin() + i * kImageValues);
    std::copy_n(set.clean.begin() + p * kImageValues, kImageValues,
                cln.begin() + i * kImageValues);
  }
  const Shape shape{b, kImageChannels, kImageSide, kImageSide};
  return Batch{Tensor(shape, std::move(deg)), Tensor(shape, std::move(cln))};
}

std::uint64_t degraded_checksum(const PairedSet& set, std::span<const int> positions) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int p : positions) {
    auto img = set.degraded_image(static_cast<std::size_t>(p));
    const auto* bytes = reinterpret_cast<const unsigned char*>(img.data());
    for (std::size_t i = 0; i < img.size_bytes(); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

namespace {
std::vector<std::uint8_t> cache_bytes(const PairedSet& set) {
  std::vector<std::uint8_t> out(set.size() * kRecordBytes);
  for (std::size_t i = 0; i < set.size(); ++i) {
    std::uint8_t* dst = out.data() + i * kRecordBytes;
    dst[0] = 0;
    auto img = set.degraded_image(i);
    for (std::size_t v = 0; v < kImageValues; ++v) dst[1 + v] = quantize_unit(img[v]);
  }
  return out;
}
}  // namespace

void write_degraded_cache(const std::filesystem::path& path, const PairedSet& set) {
  write_file(path, cache_bytes(set));
}

bool verify_degraded_cache(const std::filesystem::path& path, const PairedSet& set) {
  return read_file(path) == cache_bytes(set);
}

}  // namespace naf
