#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace naf {

inline constexpr double kGradCheckTolerance = 1e-3;
inline constexpr double kGradCheckStep = 1e-3;

struct GradCheckEntry {
  std::string name;   // case name, e.g. "conv2d[3x3,pad1]"
  std::string op;     // tape op (or composite) under test
  double max_rel_err = 0.0;
  std::string worst;
  std::size_t coordinates = 0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool passed() const;
  std::vector<std::string> failed_ops() const;
};

// Names of every differentiable op recorded on the tape.
const std::vector<std::string>& tape_op_names();

// Central-difference check (double precision) of every tape op, every block
// composite, each variant's block and a width-8 miniature model. A non-empty
// fault_op scales the upstream gradient of that op by fault_scale during
// backward, which must make the affected cases fail.
GradCheckReport run_gradcheck_suite(const std::string& fault_op = {}, double fault_scale = 1.5,
                                    std::ostream* log = nullptr);

}  // namespace naf
