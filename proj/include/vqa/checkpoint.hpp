#pragma once

#include <filesystem>
#include <utility>

#include "vqa/model.hpp"

namespace vqa {

// Versioned binary container, little-endian: magic "VQCP", version, config
// dims, then named tensors with shapes. Save/load round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams<float>& params);

std::pair<ModelConfig, ModelParams<float>> load_checkpoint(const std::filesystem::path& path);

}  // namespace vqa
