#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "scenediff/denoiser.hpp"
#include "scenediff/diffusion.hpp"

namespace scenediff {

struct LossRecord {
  double total = 0.0;
  double vb = 0.0;
  double aux = 0.0;
};

/// Scenes and, for a conditioned denoiser, one condition grid per scene.
struct TrainBatch {
  std::span<const VoxelGrid> scenes;
  std::span<const VoxelGrid> conditions;
};

/// One optimizer step: per example draw t ~ U{1..T}, corrupt x0 through
/// q_marginal + sample_field, score with diffusion_loss, backpropagate;
/// gradients are averaged over the batch before the Adam update.
LossRecord train_step(ConvDenoiser<float>& net, nn::Adam<float>& opt, const TrainBatch& batch,
                      const NoiseSchedule& schedule, double w0, Rng& rng);

/// Loss at fixed (t, noise) draws derived from `seed`; no parameter update.
LossRecord evaluate_loss(const ConvDenoiser<float>& net, const TrainBatch& batch, const NoiseSchedule& schedule,
                         double w0, std::uint64_t seed, int draws_per_scene = 1);

struct DiffusionTrainConfig {
  nn::AdamConfig adam;
  double w0 = 0.001;
  int epochs = 10;
  int batch_size = 4;
  std::uint64_t seed = 0;
};

struct DiffusionTrainResult {
  ConvDenoiser<float> net;
  std::vector<LossRecord> epoch_losses;
  long steps = 0;
};

using EpochCallback = std::function<void(int epoch, const LossRecord&)>;

/// Shuffled minibatch training over `scenes` (with matching `conditions`
/// when the network is conditioned).
DiffusionTrainResult train_diffusion(ConvDenoiser<float> net, std::span<const VoxelGrid> scenes,
                                     std::span<const VoxelGrid> conditions, const NoiseSchedule& schedule,
                                     const DiffusionTrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace scenediff
