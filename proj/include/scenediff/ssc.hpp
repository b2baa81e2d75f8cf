#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "scenediff/checkpoint.hpp"
#include "scenediff/training.hpp"
#include "scenediff/voxel.hpp"

namespace scenediff {

struct CompletionTask {
  VoxelGrid condition;  // binary occupancy: 0 free, 1 observed
  VoxelGrid target;
  double rate = 1.0;
};

/// Sparsifies each scene; task i uses a seed derived from (seed, i).
std::vector<CompletionTask> build_tasks(std::span<const VoxelGrid> dataset, double rate, std::uint64_t seed);

/// Throws InvalidArgument if dims differ or the condition marks a voxel the
/// target leaves free.
void check_task(const CompletionTask& task);

std::vector<VoxelGrid> task_targets(std::span<const CompletionTask> tasks);
std::vector<VoxelGrid> task_conditions(std::span<const CompletionTask> tasks);

/// Diffusion training with the condition channel concatenated to x_t. The
/// network is initialised from `train.seed`; `config` must be conditioned.
DiffusionTrainResult train_conditional(std::span<const CompletionTask> tasks, const DenoiserConfig& config,
                                       const NoiseSchedule& schedule, const DiffusionTrainConfig& train,
                                       const EpochCallback& on_epoch = {});

/// sample_loop with the condition held fixed over all steps.
VoxelGrid complete(const DenoisingModel& model, const VoxelGrid& condition, const NoiseSchedule& schedule, Rng& rng,
                   ReverseMode mode = ReverseMode::Marginalize);

/// Discriminative completion with the denoiser architecture: x_t channels
/// are zero and the time embedding is fixed at t = 0.
class BaselineCompleter {
 public:
  explicit BaselineCompleter(ConvDenoiser<float> net);

  const ConvDenoiser<float>& network() const { return net_; }
  nn::Tensor<float> logits(const VoxelGrid& condition) const;
  VoxelGrid predict(const VoxelGrid& condition) const;

 private:
  ConvDenoiser<float> net_;
};

template <class T>
nn::Tensor<T> baseline_input(const DenoiserConfig& config, const VoxelGrid& condition);

struct BaselineTrainConfig {
  nn::AdamConfig adam;
  int epochs = 10;
  int batch_size = 4;
  std::uint64_t seed = 0;
  /// Per-class weights w_k; empty means inverse-frequency weights of the targets.
  std::vector<double> class_weights;
};

struct BaselineTrainResult {
  BaselineCompleter model;
  std::vector<double> epoch_losses;
};

BaselineTrainResult train_baseline(std::span<const CompletionTask> tasks, const DenoiserConfig& config,
                                   const BaselineTrainConfig& train,
                                   const std::function<void(int epoch, double loss)>& on_epoch = {});

Checkpoint baseline_checkpoint(const BaselineCompleter& model);
BaselineCompleter baseline_from_checkpoint(const Checkpoint& ckpt);

/// Most frequent class over all training targets.
int majority_class(std::span<const VoxelGrid> targets);

/// A completion method: maps (task, task index) to a prediction. Stochastic
/// methods must derive their randomness from the task index only.
struct CompletionMethod {
  std::string name;
  std::function<VoxelGrid(const CompletionTask&, std::size_t)> predict;
};

CompletionMethod majority_method(int label);
CompletionMethod oracle_method();
CompletionMethod all_free_method();
CompletionMethod baseline_method(const BaselineCompleter& model, std::string name = "baseline");
/// One sample per task, seeded from (seed, task index).
CompletionMethod diffusion_method(const DenoisingModel& model, const NoiseSchedule& schedule, std::uint64_t seed,
                                  std::string name = "diffusion");
/// n samples per task; keeps the one with the best scene mIoU against the
/// target. Uses the target, so it is reported as a separate method.
CompletionMethod best_of_n_method(const DenoisingModel& model, const NoiseSchedule& schedule, std::uint64_t seed, int n,
                                  std::string name = "");

struct MethodResult {
  std::string name;
  MetricsReport metrics;
};

/// Pooled per-class IoU, mIoU and completion IoU for every method.
std::vector<MethodResult> evaluate(std::span<const CompletionMethod> methods, std::span<const CompletionTask> tasks,
                                   int num_classes);

/// Wide aligned table: method, mIoU, completion IoU, one column per class.
void write_eval_table(std::ostream& os, std::span<const MethodResult> results, const ClassTable& classes);
/// One row per (method, class) plus "mIoU" and "completion" rows.
void write_eval_csv(std::ostream& os, std::span<const MethodResult> results, const ClassTable& classes);

}  // namespace scenediff
