#include "cresmd/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cresmd/error.hpp"

namespace cresmd {
namespace {

constexpr char kMagic[4] = {'C', 'R', 'M', 'D'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(CheckpointError::Kind::kTruncated,
                            std::string("checkpoint truncated while reading ") + what);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

nlohmann::json manifest_of(const CResMDModel<float>& model) {
  return {{"format", "cresmd-checkpoint"},
          {"kind", model_kind_name(model.kind())},
          {"arch", model.arch().to_json()},
          {"space", model.space().to_json()}};
}

void check_expected(const ArchConfig& found, const ArchConfig& expected) {
  const auto mismatch = [](const char* field, int got, int want) {
    throw CheckpointError(CheckpointError::Kind::kArchitectureMismatch,
                          std::string("architecture mismatch: ") + field + " is " + std::to_string(got) +
                              " in the checkpoint, expected " + std::to_string(want));
  };
  if (found.channels != expected.channels) mismatch("channels", found.channels, expected.channels);
  if (found.blocks != expected.blocks) mismatch("blocks", found.blocks, expected.blocks);
  if (found.groups != expected.groups) mismatch("groups", found.groups, expected.groups);
  if (found.image_channels != expected.image_channels) {
    mismatch("image_channels", found.image_channels, expected.image_channels);
  }
  if (found.condition_dim != expected.condition_dim) {
    mismatch("condition_dim", found.condition_dim, expected.condition_dim);
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const CResMDModel<float>& model) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(manifest_of(model).dump());
  const auto params = model.named_parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : p.tensor.data()) w.f32(v);
  }
  return w.take();
}

CResMDModel<float> deserialize_checkpoint(const std::vector<std::uint8_t>& bytes,
                                          const std::optional<ArchConfig>& expected) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(CheckpointError::Kind::kNotACheckpoint, "not a checkpoint (bad magic)");
  }
  const std::vector<std::uint8_t> body(bytes.begin() + 4, bytes.end());
  Reader r(body);
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::kVersion,
                          "unsupported checkpoint version " + std::to_string(version) + " (expected " +
                              std::to_string(kCheckpointVersion) + ")");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(r.str("manifest"));
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(CheckpointError::Kind::kCorrupt, std::string("unreadable manifest: ") + e.what());
  }

  ArchConfig arch;
  DegradationSpace space;
  ModelKind kind = ModelKind::kConditional;
  try {
    arch = ArchConfig::from_json(manifest.at("arch"));
    space = DegradationSpace::from_json(manifest.at("space"));
    const auto kind_name = manifest.at("kind").get<std::string>();
    if (kind_name == "baseline") {
      kind = ModelKind::kBaseline;
    } else if (kind_name != "conditional") {
      throw FormatError("unknown model kind " + kind_name);
    }
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kCorrupt, std::string("invalid manifest: ") + e.what());
  }
  if (expected) check_expected(arch, *expected);

  CResMDModel<float> model(arch, space, kind, 0);
  const auto params = model.named_parameters();
  const std::uint32_t count = r.u32("tensor count");
  if (count != params.size()) {
    throw CheckpointError(CheckpointError::Kind::kCorrupt,
                          "checkpoint holds " + std::to_string(count) + " tensors, architecture needs " +
                              std::to_string(params.size()));
  }
  for (const auto& p : params) {
    const std::string name = r.str("tensor name");
    if (name != p.name) {
      throw CheckpointError(CheckpointError::Kind::kCorrupt,
                            "expected tensor '" + p.name + "', found '" + name + "'");
    }
    const std::uint32_t rank = r.u32("tensor rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u32("tensor dims"));
    if (shape != p.tensor.shape()) {
      throw CheckpointError(CheckpointError::Kind::kCorrupt,
                            "tensor '" + name + "' has shape " + shape_to_string(shape) + ", expected " +
                                shape_to_string(p.tensor.shape()));
    }
    Tensor<float> t = p.tensor;
    for (float& v : t.data()) v = r.f32("tensor payload");
  }
  if (!r.at_end()) throw CheckpointError(CheckpointError::Kind::kCorrupt, "trailing bytes after last tensor");
  return model;
}

void save_checkpoint(const CResMDModel<float>& model, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

CResMDModel<float> load_checkpoint(const std::filesystem::path& path, const std::optional<ArchConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, expected);
}

std::string checkpoint_hash(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cresmd
