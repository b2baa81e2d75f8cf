#include "scenediff/toy_scene.hpp"

#include <algorithm>
#include <array>
#include <string>

namespace scenediff {

namespace {

enum ToyClass : std::uint16_t {
  kFree = 0,
  kGround,
  kRoad,
  kBuilding,
  kVehicle,
  kPole,
  kSidewalk,
  kVegetation,
  kPedestrian,
  kBarrier,
  kOther,
};

constexpr std::array<const char*, kToyMaxClasses> kToyNames = {
    "Free", "Ground", "Road", "Building", "Vehicles", "Pole",
    "Sidewalk", "Vegetation", "Pedestrian", "Barrier", "Other"};

struct Box {
  int x0, y0, z0, x1, y1, z1;  // half-open
};

class SceneBuilder {
 public:
  SceneBuilder(const ToySceneParams& p, Rng& rng) : p_(p), rng_(rng), grid_(p.dims) {}

  bool enabled(ToyClass c) const { return c < p_.num_classes; }

  void fill(const Box& b, std::uint16_t label, bool overwrite = true) {
    const Dims& d = p_.dims;
    for (int z = std::max(b.z0, 0); z < std::min(b.z1, d.z); ++z)
      for (int y = std::max(b.y0, 0); y < std::min(b.y1, d.y); ++y)
        for (int x = std::max(b.x0, 0); x < std::min(b.x1, d.x); ++x) {
          auto& l = grid_.at(x, y, z);
          if (overwrite || l == kFree) l = label;
        }
  }

  bool free_above_ground(const Box& b) const {
    for (int z = std::max(b.z0, 1); z < std::min(b.z1, p_.dims.z); ++z)
      for (int y = b.y0; y < b.y1; ++y)
        for (int x = b.x0; x < b.x1; ++x)
          if (x < 0 || y < 0 || x >= p_.dims.x || y >= p_.dims.y || grid_.at(x, y, z) != kFree)
            return false;
    return true;
  }

  bool on_road(int x, int y) const {
    return road_along_x_ ? (y >= road_lo_ && y < road_hi_) : (x >= road_lo_ && x < road_hi_);
  }

  bool footprint_clear_of_road(const Box& b, int margin) const {
    for (int y = b.y0 - margin; y < b.y1 + margin; ++y)
      for (int x = b.x0 - margin; x < b.x1 + margin; ++x)
        if (on_road(x, y)) return false;
    return true;
  }

  VoxelGrid build() {
    const Dims& d = p_.dims;
    fill({0, 0, 0, d.x, d.y, 1}, kGround);

    road_along_x_ = rng_.below(2) == 0;
    const int across = road_along_x_ ? d.y : d.x;
    const int width = std::max(2, across / 5);
    road_lo_ = rng_.between(1, std::max(1, across - width - 1));
    road_hi_ = road_lo_ + width;
    if (road_along_x_) {
      fill({0, road_lo_, 0, d.x, road_hi_, 1}, kRoad);
      if (enabled(kSidewalk)) {
        fill({0, road_lo_ - 1, 0, d.x, road_lo_, 1}, kSidewalk);
        fill({0, road_hi_, 0, d.x, road_hi_ + 1, 1}, kSidewalk);
      }
    } else {
      fill({road_lo_, 0, 0, road_hi_, d.y, 1}, kRoad);
      if (enabled(kSidewalk)) {
        fill({road_lo_ - 1, 0, 0, road_lo_, d.y, 1}, kSidewalk);
        fill({road_hi_, 0, 0, road_hi_ + 1, d.y, 1}, kSidewalk);
      }
    }

    const int buildings = rng_.between(1, std::max(1, p_.max_buildings));
    for (int i = 0; i < buildings; ++i) place_building();

    if (enabled(kVehicle)) {
      const int vehicles = rng_.between(1, std::max(1, p_.max_vehicles));
      for (int i = 0; i < vehicles; ++i) place_vehicle();
    }
    if (enabled(kPole)) {
      const int poles = rng_.between(1, std::max(1, p_.max_poles));
      for (int i = 0; i < poles; ++i) place_pole();
    }
    if (enabled(kVegetation)) place_tree();
    if (enabled(kPedestrian)) place_pedestrian();
    if (enabled(kBarrier)) place_barrier();
    if (enabled(kOther)) place_other();
    return std::move(grid_);
  }

 private:
  void place_building() {
    const Dims& d = p_.dims;
    for (int attempt = 0; attempt < 20; ++attempt) {
      int sx = rng_.between(2, std::max(2, d.x / 4));
      int sy = rng_.between(2, std::max(2, d.y / 4));
      int h = rng_.between(1, d.z - 1);
      int x0 = rng_.between(0, d.x - sx);
      int y0 = rng_.between(0, d.y - sy);
      Box b{x0, y0, 1, x0 + sx, y0 + sy, 1 + h};
      if (!footprint_clear_of_road(b, enabled(kSidewalk) ? 1 : 0) || !free_above_ground(b)) continue;
      fill(b, kBuilding);
      return;
    }
  }

  void place_vehicle() {
    for (int attempt = 0; attempt < 20; ++attempt) {
      bool long_x = road_along_x_;
      int sx = long_x ? 2 : 1, sy = long_x ? 1 : 2;
      int x0, y0;
      if (road_along_x_) {
        x0 = rng_.between(0, p_.dims.x - sx);
        y0 = rng_.between(road_lo_, road_hi_ - sy);
      } else {
        x0 = rng_.between(road_lo_, road_hi_ - sx);
        y0 = rng_.between(0, p_.dims.y - sy);
      }
      Box b{x0, y0, 1, x0 + sx, y0 + sy, 2};
      if (!free_above_ground(b)) continue;
      fill(b, kVehicle);
      return;
    }
  }

  bool random_offroad_cell(int& x, int& y) {
    for (int attempt = 0; attempt < 30; ++attempt) {
      x = rng_.between(0, p_.dims.x - 1);
      y = rng_.between(0, p_.dims.y - 1);
      if (!on_road(x, y) && free_above_ground({x, y, 1, x + 1, y + 1, p_.dims.z})) return true;
    }
    return false;
  }

  void place_pole() {
    int x, y;
    if (!random_offroad_cell(x, y)) return;
    int h = rng_.between(std::min(2, p_.dims.z - 1), p_.dims.z - 1);
    fill({x, y, 1, x + 1, y + 1, 1 + h}, kPole);
  }

  void place_tree() {
    int x, y;
    if (!random_offroad_cell(x, y)) return;
    fill({x, y, 1, x + 1, y + 1, p_.dims.z}, kVegetation);
    if (p_.dims.z > 2) fill({x - 1, y - 1, p_.dims.z - 1, x + 2, y + 2, p_.dims.z}, kVegetation, false);
  }

  void place_pedestrian() {
    int x, y;
    if (!random_offroad_cell(x, y)) return;
    fill({x, y, 1, x + 1, y + 1, std::min(3, p_.dims.z)}, kPedestrian);
  }

  void place_barrier() {
    const int len = std::max(2, (road_along_x_ ? p_.dims.x : p_.dims.y) / 4);
    for (int attempt = 0; attempt < 20; ++attempt) {
      int start = rng_.between(0, (road_along_x_ ? p_.dims.x : p_.dims.y) - len);
      int side = rng_.below(2) == 0 ? road_lo_ - 1 - (enabled(kSidewalk) ? 1 : 0)
                                    : road_hi_ + (enabled(kSidewalk) ? 1 : 0);
      Box b = road_along_x_ ? Box{start, side, 1, start + len, side + 1, 2}
                            : Box{side, start, 1, side + 1, start + len, 2};
      if (!free_above_ground(b)) continue;
      fill(b, kBarrier);
      return;
    }
  }

  void place_other() {
    int x, y;
    if (!random_offroad_cell(x, y)) return;
    fill({x, y, 1, x + 2, y + 1, 2}, kOther, false);
  }

  const ToySceneParams& p_;
  Rng& rng_;
  VoxelGrid grid_;
  bool road_along_x_ = true;
  int road_lo_ = 0;
  int road_hi_ = 0;
};

}  // namespace

ClassTable toy_class_table(int num_classes) {
  if (num_classes < kToyMinClasses || num_classes > kToyMaxClasses)
    fail(ErrorKind::InvalidArgument, "toy scenes support " + std::to_string(kToyMinClasses) + ".." +
                                         std::to_string(kToyMaxClasses) + " classes");
  const ClassTable carla = carla_class_table();
  std::vector<std::string> names;
  std::vector<Rgb> colors;
  for (int k = 0; k < num_classes; ++k) {
    names.emplace_back(kToyNames[static_cast<std::size_t>(k)]);
    colors.push_back(carla.colors()[static_cast<std::size_t>(*carla.find(names.back()))]);
  }
  return ClassTable(std::move(names), std::move(colors));
}

VoxelGrid generate_toy_scene(const ToySceneParams& params, std::uint64_t seed) {
  if (params.dims.x < 8 || params.dims.y < 8 || params.dims.z < 4)
    fail(ErrorKind::InvalidArgument, "toy scene dims must be at least 8x8x4, got " + to_string(params.dims));
  if (params.num_classes < kToyMinClasses || params.num_classes > kToyMaxClasses)
    fail(ErrorKind::InvalidArgument, "toy scenes support " + std::to_string(kToyMinClasses) + ".." +
                                         std::to_string(kToyMaxClasses) + " classes");
  Rng rng(seed);
  SceneBuilder builder(params, rng);
  return builder.build();
}

std::vector<VoxelGrid> generate_toy_dataset(const ToySceneParams& params, int count, std::uint64_t seed) {
  std::vector<VoxelGrid> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  Rng root(seed);
  for (int i = 0; i < count; ++i) out.push_back(generate_toy_scene(params, root.split(static_cast<std::uint64_t>(i)).next()));
  return out;
}

}  // namespace scenediff
