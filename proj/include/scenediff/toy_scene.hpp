#pragma once

#include <cstdint>

#include "scenediff/voxel.hpp"

namespace scenediff {

/// Procedural outdoor scene parameters. Classes are assigned in the order
/// free, ground, road, building, vehicle, pole, sidewalk, vegetation,
/// pedestrian, barrier, other; `num_classes` picks a prefix of that list.
struct ToySceneParams {
  Dims dims{16, 16, 4};
  int num_classes = 5;
  int max_buildings = 3;
  int max_vehicles = 3;
  int max_poles = 3;
};

inline constexpr int kToyMinClasses = 4;
inline constexpr int kToyMaxClasses = 11;

/// Class table for toy scenes, colored with the CarlaSC palette by name.
ClassTable toy_class_table(int num_classes);

VoxelGrid generate_toy_scene(const ToySceneParams& params, std::uint64_t seed);

/// `count` scenes with per-scene seeds derived from `seed`.
std::vector<VoxelGrid> generate_toy_dataset(const ToySceneParams& params, int count, std::uint64_t seed);

}  // namespace scenediff
