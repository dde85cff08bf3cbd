#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cresmd/image.hpp"

namespace cresmd {

// Every *.ppm / *.pgm file in `dir`, sorted by file name.
std::vector<Image> load_dataset_dir(const std::filesystem::path& dir);

// Deterministic synthetic "natural-like" RGB image: fractal value-noise
// background, hard-edged shapes, stripes and fine grain. 8-bit quantized.
Image procedural_texture(int size, std::uint64_t seed);

// Writes `count` textures as tex_000.ppm, tex_001.ppm, ...
void write_procedural_dataset(const std::filesystem::path& dir, int count, int size, std::uint64_t seed);

}  // namespace cresmd
