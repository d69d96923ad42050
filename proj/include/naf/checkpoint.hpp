#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "naf/nn.hpp"
#include "naf/train.hpp"

namespace naf {

// File layout (all integers little-endian):
//   "NAFC" | u32 version | u64 header length | header (JSON text) | payload
// The header lists every parameter with its shape and the byte offsets of its
// values and Adam moments inside the payload, the payload length and its
// FNV-1a 64 checksum. The payload is raw little-endian float32.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  int epoch = -1;
  double best_val_psnr = 0.0;
  int best_epoch = -1;
  nlohmann::json run_config = nlohmann::json::object();
};

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind {
    Io,
    BadMagic,
    VersionMismatch,
    Truncated,
    BadHeader,
    ChecksumMismatch,
    NameMismatch,
    ShapeMismatch,
  };
  CheckpointError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

void save_checkpoint(const std::filesystem::path& path, const ModelState& model,
                     const AdamState& opt, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  ModelState model;
  AdamState opt;
  CheckpointMeta meta;
};

// Rebuilds the model from the architecture stored in the header.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Loads into an existing model, rejecting any difference in parameter names
// (NameMismatch, listing the difference) or shapes (ShapeMismatch).
CheckpointMeta load_checkpoint_into(const std::filesystem::path& path, ModelState& model,
                                    AdamState& opt);

}  // namespace naf
