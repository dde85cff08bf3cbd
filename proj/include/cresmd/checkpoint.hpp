#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "cresmd/model.hpp"

namespace cresmd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout, all integers little-endian u32:
//   "CRMD" | version | manifest length | manifest (UTF-8 JSON) |
//   tensor count | per tensor: name length, name, rank, dims..., f32 payload
std::vector<std::uint8_t> serialize_checkpoint(const CResMDModel<float>& model);
CResMDModel<float> deserialize_checkpoint(const std::vector<std::uint8_t>& bytes,
                                          const std::optional<ArchConfig>& expected = std::nullopt);

void save_checkpoint(const CResMDModel<float>& model, const std::filesystem::path& path);
// When `expected` is given, every architecture field must match it.
CResMDModel<float> load_checkpoint(const std::filesystem::path& path,
                                   const std::optional<ArchConfig>& expected = std::nullopt);

// FNV-1a 64-bit of the serialized bytes, as 16 hex digits.
std::string checkpoint_hash(const std::vector<std::uint8_t>& bytes);

}  // namespace cresmd
