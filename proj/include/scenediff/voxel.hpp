#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scenediff/error.hpp"
#include "scenediff/rng.hpp"

namespace scenediff {

/// Voxel counts along x, y, z. Linear index is x-fastest.
struct Dims {
  int x = 0;
  int y = 0;
  int z = 0;

  std::size_t volume() const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) *
           static_cast<std::size_t>(z);
  }
  std::size_t index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(x) * (static_cast<std::size_t>(iy) +
                                          static_cast<std::size_t>(y) * static_cast<std::size_t>(iz));
  }
  bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& d);

using Rgb = std::array<std::uint8_t, 3>;

/// Class metadata. Index 0 is always the free label.
class ClassTable {
 public:
  ClassTable() = default;
  ClassTable(std::vector<std::string> names, std::vector<Rgb> colors,
             std::vector<double> weights = {});

  int num_classes() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Rgb>& colors() const { return colors_; }
  const std::vector<double>& weights() const { return weights_; }

  void set_weights(std::vector<double> weights);

  /// Index of the class with the given name, if any.
  std::optional<int> find(const std::string& name) const;

 private:
  std::vector<std::string> names_;
  std::vector<Rgb> colors_;
  std::vector<double> weights_;
};

/// The 11-class CarlaSC layout (free + 10 semantic classes) and its palette.
ClassTable carla_class_table();

/// Dense grid of class labels.
struct VoxelGrid {
  Dims dims;
  std::vector<std::uint16_t> labels;

  VoxelGrid() = default;
  explicit VoxelGrid(Dims d, std::uint16_t fill = 0) : dims(d), labels(d.volume(), fill) {}

  std::uint16_t& at(int x, int y, int z) { return labels[dims.index(x, y, z)]; }
  std::uint16_t at(int x, int y, int z) const { return labels[dims.index(x, y, z)]; }

  std::size_t occupied_count() const;
  bool operator==(const VoxelGrid&) const = default;
};

/// Throws InvalidLabel if any label is >= num_classes.
void check_labels(const VoxelGrid& grid, int num_classes);

/// Per-voxel distributions (or logits) over K classes, voxel-major:
/// values[v * K + k].
template <class Tag>
struct BasicField {
  Dims dims;
  int num_classes = 0;
  std::vector<double> values;

  BasicField() = default;
  BasicField(Dims d, int k, double fill = 0.0)
      : dims(d), num_classes(k), values(d.volume() * static_cast<std::size_t>(k), fill) {}

  std::size_t voxel_count() const { return dims.volume(); }
  std::span<double> voxel(std::size_t v) {
    return {values.data() + v * static_cast<std::size_t>(num_classes),
            static_cast<std::size_t>(num_classes)};
  }
  std::span<const double> voxel(std::size_t v) const {
    return {values.data() + v * static_cast<std::size_t>(num_classes),
            static_cast<std::size_t>(num_classes)};
  }
};

struct ProbabilityTag {};
struct LogitTag {};
using CategoricalField = BasicField<ProbabilityTag>;
using LogitField = BasicField<LogitTag>;

CategoricalField one_hot(const VoxelGrid& grid, int num_classes);

/// Per-voxel argmax; ties go to the lowest index.
VoxelGrid argmax_decode(const CategoricalField& field);
VoxelGrid argmax_decode(const LogitField& field);

/// Per-voxel softmax in 64-bit.
CategoricalField softmax(const LogitField& logits);

/// IoU value for a class that is absent from both grids.
inline constexpr double kUndefinedIou = -1.0;

struct MetricsReport {
  std::vector<double> per_class_iou;  // kUndefinedIou where undefined
  double miou = 0.0;
  double completion_iou = 0.0;
};

/// Occupancy IoU (label != 0). Two empty scenes score 1.
double completion_iou(const VoxelGrid& pred, const VoxelGrid& gt);

/// Per-class IoU over all K classes including free; mIoU averages the
/// defined entries.
MetricsReport mean_iou(const VoxelGrid& pred, const VoxelGrid& gt, const ClassTable& table);

/// Accumulates intersections and unions over many scenes so dataset-level
/// IoUs pool voxels rather than averaging per-scene scores.
class IouAccumulator {
 public:
  explicit IouAccumulator(int num_classes);
  void add(const VoxelGrid& pred, const VoxelGrid& gt);
  MetricsReport report() const;

 private:
  std::vector<std::uint64_t> intersection_;
  std::vector<std::uint64_t> union_;
  std::uint64_t occ_intersection_ = 0;
  std::uint64_t occ_union_ = 0;
};

/// Arithmetic mean of the defined entries (kUndefinedIou entries skipped).
double mean_of_defined(std::span<const double> per_class_iou);

/// w_k = 1 / log(1.02 + f_k), rescaled to mean 1.
std::vector<double> inverse_frequency_weights(std::span<const VoxelGrid> dataset, int num_classes);

/// Class histogram over a dataset, normalized to frequencies.
std::vector<double> class_frequencies(std::span<const VoxelGrid> dataset, int num_classes);

/// Binary occupancy grid keeping ceil(rate * occupied) randomly chosen
/// occupied voxels of `grid`.
VoxelGrid sparsify(const VoxelGrid& grid, double rate, std::uint64_t seed);

/// Binarized occupancy (0 free, 1 occupied).
VoxelGrid occupancy(const VoxelGrid& grid);

}  // namespace scenediff
