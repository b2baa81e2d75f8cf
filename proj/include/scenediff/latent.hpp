#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "scenediff/checkpoint.hpp"
#include "scenediff/diffusion.hpp"
#include "scenediff/training.hpp"
#include "scenediff/vqvae.hpp"

namespace scenediff {

/// Diffusion over codebook indices. The index grid is treated as a voxel
/// grid with N = codebook size categories.
struct LatentDiffusionConfig {
  int codebook_size = 64;
  int steps = 100;
  ScheduleKind schedule = ScheduleKind::Cosine;
  DenoiserConfig denoiser;  // num_classes must equal codebook_size

  /// Throws ConfigMismatch unless N matches `vq` and the denoiser.
  void validate(const VqVaeConfig& vq) const;
};

/// Denoiser config for index diffusion: widths/kernel/time from `base`,
/// N input and output channels, unconditioned.
DenoiserConfig latent_denoiser_config(const DenoiserConfig& base, int codebook_size);

/// q(x_t | x_0) over N codes, x_0 = one-hot of the indices.
CategoricalField corrupt_indices(const IndexGrid& idx, int t, int codebook_size, const NoiseSchedule& schedule);

/// Encodes every scene and returns its index grid viewed as a label grid.
std::vector<VoxelGrid> encode_dataset(const VqVae<float>& vqvae, std::span<const VoxelGrid> dataset);

/// Precomputes index grids with `vqvae` and trains a fresh index-space
/// denoiser initialised from `train.seed`.
DiffusionTrainResult train_latent_denoiser(std::span<const VoxelGrid> dataset, const VqVae<float>& vqvae,
                                           const LatentDiffusionConfig& config, const DiffusionTrainConfig& train,
                                           const EpochCallback& on_epoch = {});

/// sample_loop in index space -> codebook lookup -> decode -> argmax.
VoxelGrid sample_latent(const DenoisingModel& denoiser, const VqVae<float>& vqvae, Dims latent_dims,
                        const NoiseSchedule& schedule, Rng& rng, ReverseMode mode = ReverseMode::Marginalize);

/// Bundles the index denoiser with its VQ-VAE in one file.
Checkpoint latent_checkpoint(const ConvDenoiser<float>& denoiser, const VqVae<float>& vqvae, const DenoiserMeta& meta);

struct LatentModel {
  ConvDenoiser<float> denoiser;
  VqVae<float> vqvae;
  DenoiserMeta meta;
};

/// Restores a latent checkpoint. When `vqvae_override` is given it replaces
/// the bundled VQ-VAE; its codebook size must equal the denoiser's N.
LatentModel latent_from_checkpoint(const Checkpoint& ckpt, const VqVae<float>* vqvae_override = nullptr);

struct TimingConfig {
  Dims voxel_dims{16, 16, 4};
  int num_classes = 5;
  int steps = 20;
  DenoiserConfig denoiser;  // widths etc.; num_classes is overwritten
  VqVaeConfig vqvae;        // stride is overwritten per latent config
  std::vector<std::array<int, 3>> latent_strides{{2, 2, 2}, {4, 4, 2}, {8, 8, 4}};
  int trials = 3;
  int epoch_scenes = 4;
  std::uint64_t seed = 0;
};

struct TimingRow {
  std::string label;  // "voxel" or "latent"
  Dims resolution;
  double train_seconds_per_epoch = 0.0;
  double sample_seconds = 0.0;
};

/// Median wall-clock over `trials` of one training epoch and one sample per
/// configuration; the first row is the voxel-space baseline. Models are
/// freshly initialised since timing does not depend on the weights.
std::vector<TimingRow> timing_report(const TimingConfig& config);

void write_timing_table(std::ostream& os, std::span<const TimingRow> rows);
void write_timing_csv(std::ostream& os, std::span<const TimingRow> rows);

}  // namespace scenediff
