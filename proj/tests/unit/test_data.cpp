#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "naf/data.hpp"
#include "oracles.hpp"

using namespace naf;

namespace {

std::vector<ImageRecord> sample_records(int count) {
  std::vector<ImageRecord> recs(count);
  for (int r = 0; r < count; ++r) {
    recs[r].index = r;
    recs[r].label = static_cast<std::uint8_t>(r % 10);
    for (std::size_t i = 0; i < kImageValues; ++i) {
      recs[r].pixels[i] = static_cast<std::uint8_t>((i * 7 + r * 13) % 256);
    }
  }
  return recs;
}

double psnr_of(const Image& a, const Image& b) {
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += std::pow(static_cast<double>(a[i]) - b[i], 2);
  return -10.0 * std::log10(mse / a.size());
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("batch files round-trip and use the documented record layout") {
    const auto recs = sample_records(3);
    const auto bytes = serialize_cifar10_batch(recs);
    REQUIRE(bytes.size() == 3 * 3073);
    CHECK(bytes[3073] == 1);            // label of record 1
    CHECK(bytes[3073 + 1 + 1024] == recs[1].pixels[1024]);  // first green byte
    const auto back = parse_cifar10_batch(bytes, 100);
    REQUIRE(back.size() == 3);
    CHECK(back[2].index == 102);
    CHECK(back[2].label == 2);
    CHECK(back[2].pixels == recs[2].pixels);
  }

  TEST_CASE("a full batch file holds 10000 records") {
    const std::vector<std::uint8_t> bytes(30730000, 0);
    CHECK(parse_cifar10_batch(bytes).size() == 10000);
  }

  TEST_CASE("truncated files and bad labels are rejected") {
    std::vector<std::uint8_t> bytes(3073 * 2 - 5, 0);
    CHECK_THROWS_WITH_AS(parse_cifar10_batch(bytes), doctest::Contains("truncated"), DataFormatError);
    std::vector<std::uint8_t> bad(3073, 0);
    bad[0] = 10;
    CHECK_THROWS_WITH_AS(parse_cifar10_batch(bad), doctest::Contains("label"), DataFormatError);
  }

  TEST_CASE("missing files are all named") {
    const auto dir = fixture::temp_dir("missing");
    write_file(dir / "data_batch_1.bin", std::vector<std::uint8_t>(3073, 0));
    try {
      load_cifar10(dir);
      FAIL("expected DataFormatError");
    } catch (const DataFormatError& e) {
      const std::string what = e.what();
      const std::string listed = what.substr(0, what.find(" (expected"));
      CHECK(listed.find("data_batch_2.bin") != std::string::npos);
      CHECK(listed.find("test_batch.bin") != std::string::npos);
      CHECK(listed.find("data_batch_1.bin") == std::string::npos);
    }
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("quantization and pixel scaling") {
    CHECK(quantize_unit(0.5) == 128);
    CHECK(quantize_unit(0.0) == 0);
    CHECK(quantize_unit(1.0) == 255);
    CHECK(quantize_unit(-0.2) == 0);
    CHECK(quantize_unit(1.7) == 255);
    CHECK(quantize_unit(100.0 / 255.0) == 100);
    ImageRecord r;
    r.pixels[5] = 51;
    CHECK(r.clean()[5] == doctest::Approx(0.2));
  }

  TEST_CASE("reflect_index mirrors without repeating the edge") {
    CHECK(reflect_index(-1, 5) == 1);
    CHECK(reflect_index(-2, 5) == 2);
    CHECK(reflect_index(5, 5) == 3);
    CHECK(reflect_index(6, 5) == 2);
    CHECK(reflect_index(3, 5) == 3);
    for (int i = -20; i < 30; ++i) CHECK(reflect_index(i, 7) == oracle::reflect(i, 7));
  }

  TEST_CASE("gaussian kernel is normalized with radius ceil(3 sigma)") {
    CHECK(gaussian_kernel_1d(0.0) == std::vector<double>{1.0});
    for (double s : {0.3, 1.0, 1.7, 3.0}) {
      const auto k = gaussian_kernel_1d(s);
      CHECK(k.size() == static_cast<std::size_t>(2 * std::ceil(3 * s) + 1));
      CHECK(std::accumulate(k.begin(), k.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(gaussian_kernel_1d(-1.0), std::invalid_argument);
  }

  TEST_CASE("separable blur matches the dense 2-D filter") {
    CounterRng rng(5);
    Image img(kImageValues);
    for (float& v : img) v = static_cast<float>(rng.uniform());
    for (double sigma : {0.4, 1.0, 2.2, 3.0}) {
      CAPTURE(sigma);
      const Image out = gaussian_blur(img, sigma);
      const int radius = static_cast<int>(std::ceil(3 * sigma));
      for (int c = 0; c < 3; ++c) {
        std::vector<double> plane(img.begin() + c * kImagePlane, img.begin() + (c + 1) * kImagePlane);
        const auto ref = oracle::dense_blur(plane, 32, 32, sigma, radius);
        std::vector<double> got(out.begin() + c * kImagePlane, out.begin() + (c + 1) * kImagePlane);
        CHECK(fixture::max_abs_diff(got, ref) < 1e-5);
      }
    }
    CHECK(gaussian_blur(img, 0.0) == img);
    CHECK_THROWS_AS(gaussian_blur(img, 3.5), std::invalid_argument);
  }

  TEST_CASE("noise is reproducible, scaled to pixel units and clamped") {
    const auto a = gaussian_noise_field(20000, 25.5, 77);
    CHECK(a == gaussian_noise_field(20000, 25.5, 77));
    CHECK(a != gaussian_noise_field(20000, 25.5, 78));
    double s2 = 0;
    for (double v : a) s2 += v * v;
    CHECK(std::sqrt(s2 / a.size()) == doctest::Approx(0.1).epsilon(0.02));

    Image flat(kImageValues, 0.02f);
    const Image noisy = add_gaussian_noise(flat, 30.0, 3);
    CHECK(*std::min_element(noisy.begin(), noisy.end()) == 0.0f);
    CHECK(*std::max_element(noisy.begin(), noisy.end()) <= 1.0f);
    CHECK(add_gaussian_noise(flat, 0.0, 3) == flat);
  }

  TEST_CASE("degradation specs are deterministic, in range and split-specific") {
    for (int i = 0; i < 500; ++i) {
      const auto s = make_degradation_spec(0, Split::Train, i);
      CHECK(s == make_degradation_spec(0, Split::Train, i));
      CHECK(s.sigma_blur >= 0.0);
      CHECK(s.sigma_blur <= kMaxBlurSigma);
      CHECK(s.sigma_noise >= 0.0);
      CHECK(s.sigma_noise <= kMaxNoiseSigma);
    }
    CHECK_FALSE(make_degradation_spec(0, Split::Train, 3) == make_degradation_spec(0, Split::Test, 3));
    CHECK_FALSE(make_degradation_spec(0, Split::Train, 3) == make_degradation_spec(1, Split::Train, 3));
    CHECK_FALSE(make_degradation_spec(0, Split::Train, 3) == make_degradation_spec(0, Split::Train, 4));
  }

  TEST_CASE("make_batches partitions every position exactly once") {
    for (std::size_t count : {1u, 15u, 16u, 17u, 100u}) {
      for (int bs : {1, 4, 16}) {
        const auto batches = make_batches(count, bs, 9);
        std::vector<int> all;
        for (std::size_t b = 0; b < batches.size(); ++b) {
          CHECK(batches[b].size() == (b + 1 < batches.size() ? static_cast<std::size_t>(bs)
                                                              : count - b * bs));
          all.insert(all.end(), batches[b].begin(), batches[b].end());
        }
        std::sort(all.begin(), all.end());
        std::vector<int> expect(count);
        std::iota(expect.begin(), expect.end(), 0);
        CHECK(all == expect);
      }
    }
    CHECK(make_batches(100, 16, 1) == make_batches(100, 16, 1));
    CHECK(make_batches(100, 16, 1) != make_batches(100, 16, 2));
    CHECK_THROWS_AS(make_batches(0, 16, 1), std::invalid_argument);
  }

  TEST_CASE("splits follow the standard partition") {
    const Cifar10 data = load_cifar10(fixture::data_dir());
    REQUIRE(data.train_pool.size() == 50000);
    REQUIRE(data.test.size() == 10000);
    const DatasetSplit full = make_split(data);
    CHECK(full.train.size() == 45000);
    CHECK(full.val.size() == 5000);
    CHECK(full.val.front() == kValStart);
    CHECK(full.test.size() == 10000);
    const DatasetSplit sub = make_split(data, 64, 32, 10);
    CHECK(sub.train.size() == 64);
    CHECK(sub.val.front() == kValStart);
    CHECK(sub.val.size() == 32);
    CHECK(sub.test.size() == 10);
  }

  TEST_CASE("paired sets hold fixed degradations of the clean images") {
    const Cifar10 data = load_cifar10(fixture::data_dir());
    const DatasetSplit sp = make_split(data, 8, 4, 4);
    const PairedSet train = build_pairs(data.train_pool, sp.train, Split::Train, 0);
    const PairedSet again = build_pairs(data.train_pool, sp.train, Split::Train, 0);
    CHECK(train.degraded == again.degraded);
    REQUIRE(train.size() == 8);
    const Image clean = data.train_pool[3].clean();
    CHECK(std::equal(clean.begin(), clean.end(), train.clean_image(3).begin()));
    const Image deg = degrade(data.train_pool[3], make_degradation_spec(0, Split::Train, 3));
    CHECK(std::equal(deg.begin(), deg.end(), train.degraded_image(3).begin()));

    const std::vector<int> pos{5, 1};
    const Batch b = gather_batch(train, pos);
    CHECK(b.degraded.shape() == Shape{2, 3, 32, 32});
    CHECK(b.clean.at(1, 2, 31, 31) == train.clean_image(1)[kImageValues - 1]);
    CHECK(degraded_checksum(train, pos) == degraded_checksum(again, pos));
    CHECK(degraded_checksum(train, pos) != degraded_checksum(train, std::vector<int>{1, 5}));
  }

  TEST_CASE("degraded cache round-trips and detects edits") {
    const Cifar10 data = load_cifar10(fixture::data_dir());
    const DatasetSplit sp = make_split(data, 4, 4, 4);
    const PairedSet val = build_pairs(data.train_pool, sp.val, Split::Val, 0);
    const auto dir = fixture::temp_dir("cache");
    const auto path = dir / "val.bin";
    write_degraded_cache(path, val);
    CHECK(std::filesystem::file_size(path) == 4 * kRecordBytes);
    CHECK(verify_degraded_cache(path, val));
    const auto recs = parse_cifar10_batch(read_file(path));
    CHECK(recs[2].pixels[17] == quantize_unit(val.degraded_image(2)[17]));
    auto bytes = read_file(path);
    bytes[100] ^= 1;
    write_file(path, bytes);
    CHECK_FALSE(verify_degraded_cache(path, val));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("synthetic images are deterministic") {
    const auto a = synthesize_images(3, 0, 0);
    const auto b = synthesize_images(3, 0, 0);
    CHECK(a[2].pixels == b[2].pixels);
    CHECK(a[1].pixels != a[2].pixels);
    CHECK(synthesize_images(1, 1, 0)[0].pixels != a[0].pixels);
  }

  TEST_CASE("blur keeps a constant image and degraded pixels stay in [0, 1]") {
    const Image flat(kImageValues, 0.37f);
    for (double sigma : {0.5, 1.5, 3.0}) {
      const Image out = gaussian_blur(flat, sigma);
      CHECK(fixture::max_abs_diff(fixture::as_double_span(out), fixture::as_double_span(flat)) < 1e-6);
    }
    const Cifar10 data = load_cifar10(fixture::data_dir());
    for (int i = 0; i < 50; ++i) {
      const Image d = degrade(data.test[i], make_degradation_spec(0, Split::Test, i));
      CHECK(*std::min_element(d.begin(), d.end()) >= 0.0f);
      CHECK(*std::max_element(d.begin(), d.end()) <= 1.0f);
    }
  }

  TEST_CASE("an all-255 record is an all-ones image") {
    ImageRecord r;
    r.label = 7;
    r.pixels.fill(255);
    const auto back = parse_cifar10_batch(serialize_cifar10_batch(std::vector<ImageRecord>{r}));
    CHECK(back[0].label == 7);
    for (float v : back[0].clean()) CHECK(v == 1.0f);
  }

  TEST_CASE("unit-sigma kernel has radius 3 and the normalized center tap") {
    const auto k = gaussian_kernel_1d(1.0);
    REQUIRE(k.size() == 7);
    double z = 1.0;
    for (int i = 1; i <= 3; ++i) z += 2.0 * std::exp(-0.5 * i * i);
    CHECK(k[3] == doctest::Approx(1.0 / z).epsilon(1e-12));
    CHECK(k[3] == doctest::Approx(0.39905).epsilon(1e-4));
    for (int i = 0; i < 3; ++i) CHECK(k[i] == k[6 - i]);
  }

  TEST_CASE("a million noise samples at sigma 30 have the right spread") {
    const auto a = gaussian_noise_field(1000000, 30.0, 5);
    double s = 0.0, s2 = 0.0;
    for (double v : a) {
      s += v;
      s2 += v * v;
    }
    const double mean = s / a.size();
    const double sd = std::sqrt(s2 / a.size() - mean * mean);
    CHECK(std::abs(sd - 30.0 / 255.0) < 0.01 * 30.0 / 255.0);
  }

  TEST_CASE("degradation strength orders PSNR; a null spec is the clean image") {
    const Cifar10 data = load_cifar10(fixture::data_dir());
    double weak = 0.0, strong = 0.0;
    for (int i = 0; i < 100; ++i) {
      const ImageRecord& r = data.test[i];
      const Image clean = r.clean();
      CHECK(degrade(r, DegradationSpec{0.0, 0.0, 9}) == clean);
      weak += psnr_of(degrade(r, DegradationSpec{1.0, 5.0, 100u + i}), clean);
      const double p = psnr_of(degrade(r, DegradationSpec{3.0, 30.0, 100u + i}), clean);
      CHECK(std::isfinite(p));
      strong += p;
    }
    CHECK(strong < weak);
  }

  TEST_CASE("50000 positions in batches of 16 give 3125 full batches") {
    const auto b = make_batches(50000, 16, 3);
    CHECK(b.size() == 3125);
    for (const auto& x : b) CHECK(x.size() == 16);
    CHECK(b == make_batches(50000, 16, 3));
  }
}
