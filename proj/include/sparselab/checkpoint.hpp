#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sparselab/nn.hpp"

namespace sparselab {

// Flat binary container: 8-byte magic, u64 little-endian header length, a
// JSON header, then a raw payload. Checkpoints put the stored parameters
// (phi for powerprop layers) as little-endian doubles in declaration order,
// weight then bias per layer. See docs/formats.md.
void write_container(const std::filesystem::path& path, const char magic[8],
                     const nlohmann::json& header, const std::vector<unsigned char>& payload);
std::pair<nlohmann::json, std::vector<unsigned char>> read_container(
    const std::filesystem::path& path, const char magic[8]);

void save_checkpoint(const std::filesystem::path& path, const Network& net,
                     const nlohmann::json& meta = nlohmann::json::object());
Network load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta_out = nullptr);

}  // namespace sparselab
