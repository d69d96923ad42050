#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <unistd.h>
#include <vector>

#include "naf/data.hpp"
#include "naf/rng.hpp"
#include "naf/tensor.hpp"

namespace fixture {

// Synthetic dataset shared by the tests; ctest creates it once through the
// data fixture, standalone runs create it on first use.
inline std::filesystem::path data_dir() {
  static const std::filesystem::path dir = [] {
    const std::filesystem::path d = NAF_TEST_DATA_DIR;
    bool complete = true;
    for (const auto& name : naf::cifar10_file_names()) {
      const auto p = d / name;
      if (!std::filesystem::exists(p) || std::filesystem::file_size(p) != 30730000) complete = false;
    }
    if (!complete) naf::write_synthetic_cifar10(d, 0);
    return d;
  }();
  return dir;
}

// Fresh empty directory unique to this process and tag.
inline std::filesystem::path temp_dir(const std::string& tag) {
  const auto d = std::filesystem::temp_directory_path() /
                 ("naf_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

template <typename T = float>
naf::BasicTensor<T> random_tensor(naf::Shape s, std::uint64_t seed, double lo = -1.0,
                                  double hi = 1.0, bool requires_grad = false) {
  naf::CounterRng rng(seed);
  std::vector<T> v(s.numel());
  for (T& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return naf::BasicTensor<T>(s, std::move(v), requires_grad);
}

template <typename T>
std::vector<double> as_double(const naf::BasicTensor<T>& t) {
  return std::vector<double>(t.data().begin(), t.data().end());
}

inline std::vector<double> as_double_span(std::span<const float> s) {
  return std::vector<double>(s.begin(), s.end());
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = a.size() == b.size() ? 0.0 : 1e300;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace fixture
