#include "scenediff/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace scenediff {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::InvalidLabel: return "invalid-label";
    case ErrorKind::DimMismatch: return "dim-mismatch";
    case ErrorKind::BadMagic: return "bad-magic";
    case ErrorKind::VersionMismatch: return "version-mismatch";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::ConfigMismatch: return "config-mismatch";
    case ErrorKind::NonFiniteLoss: return "non-finite-loss";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

std::string to_string(const Dims& d) {
  return std::to_string(d.x) + "x" + std::to_string(d.y) + "x" + std::to_string(d.z);
}

ClassTable::ClassTable(std::vector<std::string> names, std::vector<Rgb> colors,
                       std::vector<double> weights)
    : names_(std::move(names)), colors_(std::move(colors)) {
  if (names_.empty()) fail(ErrorKind::InvalidArgument, "class table needs at least one class");
  if (colors_.size() != names_.size())
    fail(ErrorKind::InvalidArgument, "class table: names and colors differ in length");
  if (weights.empty()) weights.assign(names_.size(), 1.0);
  set_weights(std::move(weights));
}

void ClassTable::set_weights(std::vector<double> weights) {
  if (weights.size() != names_.size())
    fail(ErrorKind::InvalidArgument, "class table: weight count differs from class count");
  bool any_positive = false;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorKind::InvalidArgument, "class weights must be finite and >= 0");
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) fail(ErrorKind::InvalidArgument, "at least one class weight must be positive");
  weights_ = std::move(weights);
}

std::optional<int> ClassTable::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  return std::nullopt;
}

ClassTable carla_class_table() {
  return ClassTable(
      {"Free", "Building", "Barrier", "Other", "Pedestrian", "Pole", "Road", "Ground", "Sidewalk",
       "Vegetation", "Vehicles"},
      {Rgb{255, 255, 255}, Rgb{255, 200, 0}, Rgb{255, 120, 50}, Rgb{55, 90, 80}, Rgb{255, 30, 30},
       Rgb{255, 240, 150}, Rgb{255, 0, 255}, Rgb{175, 0, 75}, Rgb{75, 0, 75}, Rgb{0, 175, 0},
       Rgb{100, 150, 245}});
}

std::size_t VoxelGrid::occupied_count() const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](std::uint16_t l) { return l != 0; }));
}

void check_labels(const VoxelGrid& grid, int num_classes) {
  if (grid.labels.size() != grid.dims.volume())
    fail(ErrorKind::DimMismatch, "label count does not match grid dims " + to_string(grid.dims));
  for (std::uint16_t l : grid.labels)
    if (l >= num_classes)
      fail(ErrorKind::InvalidLabel,
           "label " + std::to_string(l) + " >= class count " + std::to_string(num_classes));
}

CategoricalField one_hot(const VoxelGrid& grid, int num_classes) {
  check_labels(grid, num_classes);
  CategoricalField field(grid.dims, num_classes, 0.0);
  for (std::size_t v = 0; v < grid.labels.size(); ++v) field.voxel(v)[grid.labels[v]] = 1.0;
  return field;
}

namespace {

template <class Field>
VoxelGrid argmax_impl(const Field& field) {
  VoxelGrid grid(field.dims);
  for (std::size_t v = 0; v < field.voxel_count(); ++v) {
    auto p = field.voxel(v);
    // max_element returns the first maximum, which is the lowest index.
    grid.labels[v] = static_cast<std::uint16_t>(std::max_element(p.begin(), p.end()) - p.begin());
  }
  return grid;
}

void require_same_dims(const VoxelGrid& a, const VoxelGrid& b) {
  if (a.dims != b.dims)
    fail(ErrorKind::DimMismatch, "grid dims differ: " + to_string(a.dims) + " vs " + to_string(b.dims));
}

}  // namespace

VoxelGrid argmax_decode(const CategoricalField& field) { return argmax_impl(field); }
VoxelGrid argmax_decode(const LogitField& field) { return argmax_impl(field); }

CategoricalField softmax(const LogitField& logits) {
  CategoricalField out(logits.dims, logits.num_classes);
  for (std::size_t v = 0; v < logits.voxel_count(); ++v) {
    auto in = logits.voxel(v);
    auto p = out.voxel(v);
    double m = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < in.size(); ++k) sum += (p[k] = std::exp(in[k] - m));
    for (double& x : p) x /= sum;
  }
  return out;
}

double completion_iou(const VoxelGrid& pred, const VoxelGrid& gt) {
  require_same_dims(pred, gt);
  std::size_t inter = 0, uni = 0;
  for (std::size_t v = 0; v < gt.labels.size(); ++v) {
    bool a = pred.labels[v] != 0, b = gt.labels[v] != 0;
    inter += a && b;
    uni += a || b;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double mean_of_defined(std::span<const double> per_class_iou) {
  double sum = 0.0;
  int n = 0;
  for (double x : per_class_iou) {
    if (x == kUndefinedIou) continue;
    sum += x;
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

IouAccumulator::IouAccumulator(int num_classes)
    : intersection_(static_cast<std::size_t>(num_classes), 0),
      union_(static_cast<std::size_t>(num_classes), 0) {}

void IouAccumulator::add(const VoxelGrid& pred, const VoxelGrid& gt) {
  require_same_dims(pred, gt);
  const int k = static_cast<int>(union_.size());
  check_labels(pred, k);
  check_labels(gt, k);
  for (std::size_t v = 0; v < gt.labels.size(); ++v) {
    std::uint16_t a = pred.labels[v], b = gt.labels[v];
    if (a == b) {
      ++intersection_[a];
      ++union_[a];
    } else {
      ++union_[a];
      ++union_[b];
    }
    bool oa = a != 0, ob = b != 0;
    occ_intersection_ += oa && ob;
    occ_union_ += oa || ob;
  }
}

MetricsReport IouAccumulator::report() const {
  MetricsReport r;
  r.per_class_iou.resize(union_.size());
  for (std::size_t k = 0; k < union_.size(); ++k)
    r.per_class_iou[k] = union_[k] == 0 ? kUndefinedIou
                                        : static_cast<double>(intersection_[k]) / static_cast<double>(union_[k]);
  r.miou = mean_of_defined(r.per_class_iou);
  r.completion_iou =
      occ_union_ == 0 ? 1.0 : static_cast<double>(occ_intersection_) / static_cast<double>(occ_union_);
  return r;
}

MetricsReport mean_iou(const VoxelGrid& pred, const VoxelGrid& gt, const ClassTable& table) {
  IouAccumulator acc(table.num_classes());
  acc.add(pred, gt);
  return acc.report();
}

std::vector<double> class_frequencies(std::span<const VoxelGrid> dataset, int num_classes) {
  if (dataset.empty()) fail(ErrorKind::EmptyInput, "class frequencies of an empty dataset");
  std::vector<double> counts(static_cast<std::size_t>(num_classes), 0.0);
  double total = 0.0;
  for (const VoxelGrid& g : dataset) {
    check_labels(g, num_classes);
    for (std::uint16_t l : g.labels) counts[l] += 1.0;
    total += static_cast<double>(g.labels.size());
  }
  if (total == 0.0) fail(ErrorKind::EmptyInput, "dataset contains no voxels");
  for (double& c : counts) c /= total;
  return counts;
}

std::vector<double> inverse_frequency_weights(std::span<const VoxelGrid> dataset, int num_classes) {
  std::vector<double> w = class_frequencies(dataset, num_classes);
  for (double& x : w) x = 1.0 / std::log(1.02 + x);
  double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  for (double& x : w) x /= mean;
  return w;
}

VoxelGrid occupancy(const VoxelGrid& grid) {
  VoxelGrid out(grid.dims);
  for (std::size_t v = 0; v < grid.labels.size(); ++v) out.labels[v] = grid.labels[v] != 0 ? 1 : 0;
  return out;
}

VoxelGrid sparsify(const VoxelGrid& grid, double rate, std::uint64_t seed) {
  if (!(rate > 0.0 && rate <= 1.0))
    fail(ErrorKind::InvalidArgument, "sparsify rate must lie in (0, 1], got " + std::to_string(rate));
  std::vector<std::size_t> occupied;
  for (std::size_t v = 0; v < grid.labels.size(); ++v)
    if (grid.labels[v] != 0) occupied.push_back(v);
  const auto keep = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(occupied.size()) - 1e-9));
  Rng rng(seed);
  // Partial Fisher-Yates: the first `keep` slots become a uniform subset.
  for (std::size_t i = 0; i < keep; ++i) {
    std::size_t j = i + rng.below(occupied.size() - i);
    std::swap(occupied[i], occupied[j]);
  }
  VoxelGrid out(grid.dims);
  for (std::size_t i = 0; i < keep; ++i) out.labels[occupied[i]] = 1;
  return out;
}

}  // namespace scenediff
