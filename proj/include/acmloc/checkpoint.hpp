#pragma once
// Versioned checkpoint container.
//
// Layout: "ACMC", u32 version, u32 header length, UTF-8 JSON header
// (dimensions, architecture, step count, tensor shapes, training config),
// then every tensor as little-endian float32 in header order.

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "acmloc/network.hpp"

namespace acmloc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    Network<float> network;
    std::int64_t step = 0;
    nlohmann::json config;  // training config snapshot, may be null
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace acmloc
