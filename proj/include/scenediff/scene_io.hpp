#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "scenediff/voxel.hpp"

namespace scenediff {

enum class SceneEncoding { Raw, RunLength };

/// Binary scene container ("VXSC", version 1). Layout, little-endian:
///   magic[4] version:u16 flags:u16 (bit0 = RLE) dims:3*u32 K:u16
///   palette:K*3*u8 names:K*(len:u16 bytes)
///   payload: X*Y*Z u8 labels (x-fastest) or RLE pairs (count:u32 label:u8)
/// Class weights are not stored; a loaded table has unit weights.
std::vector<std::uint8_t> encode_scene(const VoxelGrid& grid, const ClassTable& table, SceneEncoding encoding);
std::pair<VoxelGrid, ClassTable> decode_scene(std::span<const std::uint8_t> bytes);

void save_scene(const VoxelGrid& grid, const ClassTable& table, const std::filesystem::path& path,
                SceneEncoding encoding = SceneEncoding::RunLength);
std::pair<VoxelGrid, ClassTable> load_scene(const std::filesystem::path& path);

/// ASCII PLY, one colored vertex per occupied voxel at its center.
std::string ply_string(const VoxelGrid& grid, const ClassTable& table);
void export_ply(const VoxelGrid& grid, const ClassTable& table, const std::filesystem::path& path);

/// One binary PPM (P6) per z-layer, named <stem>_z<k>.ppm. Returns the paths.
std::vector<std::filesystem::path> export_slices(const VoxelGrid& grid, const ClassTable& table,
                                                 const std::filesystem::path& stem);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace scenediff
