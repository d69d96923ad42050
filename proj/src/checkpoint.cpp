#include "naf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "naf/data.hpp"
#include "naf/run_config.hpp"

namespace naf {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'N', 'A', 'F', 'C'};
constexpr std::size_t kPreamble = 4 + 4 + 8;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}
std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_floats(std::vector<std::uint8_t>& out, std::span<const float> values) {
  for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
}
void get_floats(const std::uint8_t* p, std::span<float> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(get_u32(p + 4 * i));
  }
}

std::string fnv1a_hex(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

struct ParsedFile {
  json header;
  std::vector<std::uint8_t> payload;
};

ParsedFile parse_file(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointError::Kind::Io, e.what());
  }
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(CheckpointError::Kind::BadMagic,
                          path.string() + ": not a checkpoint (missing NAFC magic)");
  }
  if (bytes.size() < kPreamble) {
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          path.string() + ": truncated preamble");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::VersionMismatch,
                          path.string() + ": format version " + std::to_string(version) +
                              ", this build reads version " +
                              std::to_string(kCheckpointVersion));
  }
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  if (header_len > bytes.size() - kPreamble) {
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          path.string() + ": header declares " + std::to_string(header_len) +
                              " bytes but only " + std::to_string(bytes.size() - kPreamble) +
                              " remain");
  }
  ParsedFile f;
  try {
    f.header = json::parse(bytes.begin() + kPreamble,
                           bytes.begin() + static_cast<std::ptrdiff_t>(kPreamble + header_len));
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::BadHeader,
                          path.string() + ": unreadable header: " + e.what());
  }
  f.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(kPreamble + header_len),
                   bytes.end());

  std::uint64_t declared = 0;
  std::string checksum;
  try {
    declared = f.header.at("payload_bytes").get<std::uint64_t>();
    checksum = f.header.at("checksum").get<std::string>();
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::BadHeader,
                          path.string() + ": header lacks payload description: " + e.what());
  }
  if (f.payload.size() != declared) {
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          path.string() + ": payload is " + std::to_string(f.payload.size()) +
                              " bytes, header declares " + std::to_string(declared));
  }
  if (fnv1a_hex(f.payload) != checksum) {
    throw CheckpointError(CheckpointError::Kind::ChecksumMismatch,
                          path.string() + ": payload checksum mismatch");
  }
  return f;
}

struct HeaderParam {
  std::string name;
  Shape shape;
  std::uint64_t offset, m_offset, v_offset;
};

std::vector<HeaderParam> header_params(const json& header, std::size_t payload_bytes) {
  std::vector<HeaderParam> out;
  try {
    for (const json& p : header.at("params")) {
      HeaderParam hp;
      hp.name = p.at("name").get<std::string>();
      const auto dims = p.at("shape").get<std::vector<int>>();
      if (dims.size() != 4) throw CheckpointError(CheckpointError::Kind::BadHeader, "shape of " + hp.name + " is not 4-D");
      hp.shape = Shape{dims[0], dims[1], dims[2], dims[3]};
      hp.offset = p.at("offset").get<std::uint64_t>();
      hp.m_offset = p.at("m_offset").get<std::uint64_t>();
      hp.v_offset = p.at("v_offset").get<std::uint64_t>();
      const std::uint64_t bytes = hp.shape.numel() * 4;
      for (std::uint64_t off : {hp.offset, hp.m_offset, hp.v_offset}) {
        if (off + bytes > payload_bytes) {
          throw CheckpointError(CheckpointError::Kind::BadHeader,
                                "offsets of " + hp.name + " exceed the payload");
        }
      }
      out.push_back(std::move(hp));
    }
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::BadHeader,
                          std::string("malformed parameter table: ") + e.what());
  }
  return out;
}

CheckpointMeta read_meta(const json& header) {
  CheckpointMeta meta;
  try {
    meta.epoch = header.at("epoch").get<int>();
    meta.best_val_psnr = header.at("best_val_psnr").get<double>();
    meta.best_epoch = header.at("best_epoch").get<int>();
    meta.run_config = header.at("run_config");
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::BadHeader,
                          std::string("malformed metadata: ") + e.what());
  }
  return meta;
}

void fill(const ParsedFile& f, ModelState& model, AdamState& opt) {
  const auto hp = header_params(f.header, f.payload.size());

  std::vector<std::string> have;
  for (const auto& p : hp) have.push_back(p.name);
  const std::vector<std::string> want = model.names();
  if (have != want) {
    const std::set<std::string> hs(have.begin(), have.end());
    const std::set<std::string> ws(want.begin(), want.end());
    std::ostringstream os;
    os << "checkpoint parameters do not match the model.";
    for (const auto& n : hs) {
      if (ws.count(n) == 0) os << "\n  only in checkpoint: " << n;
    }
    for (const auto& n : ws) {
      if (hs.count(n) == 0) os << "\n  only in model: " << n;
    }
    if (hs == ws) os << "\n  same names in a different order";
    throw CheckpointError(CheckpointError::Kind::NameMismatch, os.str());
  }

  auto& params = model.params();
  for (std::size_t i = 0; i < hp.size(); ++i) {
    if (!(hp[i].shape == params[i].second.shape())) {
      throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                            "parameter " + hp[i].name + " has shape " + hp[i].shape.str() +
                                " in the checkpoint but " + params[i].second.shape().str() +
                                " in the model");
    }
  }

  AdamState loaded = AdamState::for_model(model);
  try {
    const json& adam = f.header.at("adam");
    loaded.step = adam.at("step").get<std::int64_t>();
    loaded.beta1 = adam.at("beta1").get<double>();
    loaded.beta2 = adam.at("beta2").get<double>();
    loaded.eps = adam.at("eps").get<double>();
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::BadHeader,
                          std::string("malformed optimizer state: ") + e.what());
  }
  for (std::size_t i = 0; i < hp.size(); ++i) {
    get_floats(f.payload.data() + hp[i].offset, params[i].second.mutable_data());
    get_floats(f.payload.data() + hp[i].m_offset, loaded.m[i]);
    get_floats(f.payload.data() + hp[i].v_offset, loaded.v[i]);
  }
  opt = std::move(loaded);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelState& model,
                     const AdamState& opt, const CheckpointMeta& meta) {
  const auto& params = model.params();
  if (opt.m.size() != params.size() || opt.v.size() != params.size()) {
    throw std::invalid_argument("save_checkpoint: optimizer state does not match the model");
  }
  std::vector<std::uint8_t> payload;
  json table = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, t] = params[i];
    const Shape& s = t.shape();
    json entry{{"name", name}, {"shape", {s.n, s.c, s.h, s.w}}};
    entry["offset"] = payload.size();
    put_floats(payload, t.data());
    entry["m_offset"] = payload.size();
    put_floats(payload, opt.m[i]);
    entry["v_offset"] = payload.size();
    put_floats(payload, opt.v[i]);
    table.push_back(std::move(entry));
  }

  json header{{"model", to_json(model.config())},
              {"run_config", meta.run_config},
              {"epoch", meta.epoch},
              {"best_val_psnr", meta.best_val_psnr},
              {"best_epoch", meta.best_epoch},
              {"adam", {{"step", opt.step}, {"beta1", opt.beta1}, {"beta2", opt.beta2},
                        {"eps", opt.eps}}},
              {"params", std::move(table)},
              {"payload_bytes", payload.size()},
              {"checksum", fnv1a_hex(payload)}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> bytes(kMagic, kMagic + 4);
  put_u32(bytes, kCheckpointVersion);
  put_u64(bytes, text.size());
  bytes.insert(bytes.end(), text.begin(), text.end());
  bytes.insert(bytes.end(), payload.begin(), payload.end());
  try {
    write_file(path, bytes);
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointError::Kind::Io, e.what());
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const ParsedFile f = parse_file(path);
  ModelConfig cfg;
  try {
    cfg = model_config_from_json(f.header.at("model"));
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointError::Kind::BadHeader,
                          path.string() + ": bad model description: " + e.what());
  }
  LoadedCheckpoint out;
  out.model = make_model<float>(cfg, 0);
  fill(f, out.model, out.opt);
  out.meta = read_meta(f.header);
  return out;
}

CheckpointMeta load_checkpoint_into(const std::filesystem::path& path, ModelState& model,
                                    AdamState& opt) {
  const ParsedFile f = parse_file(path);
  fill(f, model, opt);
  return read_meta(f.header);
}

}  // namespace naf
