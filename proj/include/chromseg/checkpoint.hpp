#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "chromseg/network.hpp"
#include "chromseg/train.hpp"

namespace chromseg::nn {

// CHRCKPT1, little-endian:
//   "CHRCKPT1" | u32 version (1) | u8 depth | u16 base_filters | u8 num_classes |
//   u8 has_optimizer_state | u64 param_count |
//   param_count f32 in ModelParams order (per layer: weights, then bias) |
//   when flagged: param_count f32 Adam m, then param_count f32 Adam v.
inline constexpr std::size_t kCheckpointHeaderBytes = 25;
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetConfig config;
  ModelParams<float> params;
  std::optional<AdamState> optimizer;  // step count is not stored
};

std::vector<std::uint8_t> encode_checkpoint(const NetConfig& config, const ModelParams<float>& params,
                                            const AdamState* optimizer = nullptr);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const NetConfig& config, const ModelParams<float>& params,
                     const AdamState* optimizer = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace chromseg::nn
