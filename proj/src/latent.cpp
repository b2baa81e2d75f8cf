#include "scenediff/latent.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <iomanip>
#include <ostream>

#include "scenediff/toy_scene.hpp"

namespace scenediff {

void LatentDiffusionConfig::validate(const VqVaeConfig& vq) const {
  if (codebook_size != vq.codebook_size)
    fail(ErrorKind::ConfigMismatch, "latent N = " + std::to_string(codebook_size) + " but the VQ-VAE codebook has " +
                                        std::to_string(vq.codebook_size) + " codes");
  if (denoiser.num_classes != codebook_size)
    fail(ErrorKind::ConfigMismatch, "latent denoiser must have N input/output channels");
  if (denoiser.conditioned) fail(ErrorKind::ConfigMismatch, "latent diffusion is unconditional");
  if (steps < 1) fail(ErrorKind::InvalidArgument, "latent diffusion needs T >= 1");
  denoiser.validate();
}

DenoiserConfig latent_denoiser_config(const DenoiserConfig& base, int codebook_size) {
  DenoiserConfig c = base;
  c.num_classes = codebook_size;
  c.conditioned = false;
  return c;
}

CategoricalField corrupt_indices(const IndexGrid& idx, int t, int codebook_size, const NoiseSchedule& schedule) {
  for (std::uint16_t i : idx.indices)
    if (i >= codebook_size)
      fail(ErrorKind::InvalidLabel, "index " + std::to_string(i) + " >= codebook size " + std::to_string(codebook_size));
  return q_marginal(one_hot(as_voxel_grid(idx), codebook_size), t, schedule);
}

std::vector<VoxelGrid> encode_dataset(const VqVae<float>& vqvae, std::span<const VoxelGrid> dataset) {
  std::vector<VoxelGrid> out;
  out.reserve(dataset.size());
  for (const VoxelGrid& g : dataset) out.push_back(as_voxel_grid(vqvae.encode_indices(g)));
  return out;
}

DiffusionTrainResult train_latent_denoiser(std::span<const VoxelGrid> dataset, const VqVae<float>& vqvae,
                                           const LatentDiffusionConfig& config, const DiffusionTrainConfig& train,
                                           const EpochCallback& on_epoch) {
  config.validate(vqvae.config());
  if (dataset.empty()) fail(ErrorKind::EmptyInput, "latent training dataset is empty");
  const std::vector<VoxelGrid> indices = encode_dataset(vqvae, dataset);
  const NoiseSchedule schedule = make_schedule(config.schedule, config.steps);
  return train_diffusion(ConvDenoiser<float>::init(config.denoiser, train.seed), indices, {}, schedule, train,
                         on_epoch);
}

VoxelGrid sample_latent(const DenoisingModel& denoiser, const VqVae<float>& vqvae, Dims latent_dims,
                        const NoiseSchedule& schedule, Rng& rng, ReverseMode mode) {
  const int n = vqvae.config().codebook_size;
  if (denoiser.num_classes() != n)
    fail(ErrorKind::ConfigMismatch, "latent denoiser has " + std::to_string(denoiser.num_classes()) +
                                        " categories but the codebook has " + std::to_string(n));
  // Throws DimMismatch when the latent grid cannot come from this encoder.
  vqvae.config().latent_dims(vqvae.config().voxel_dims(latent_dims));
  const VoxelGrid idx = sample_loop(denoiser, latent_dims, nullptr, schedule, rng, mode);
  return vqvae.decode_indices(as_index_grid(idx, n));
}

Checkpoint latent_checkpoint(const ConvDenoiser<float>& denoiser, const VqVae<float>& vqvae, const DenoiserMeta& meta) {
  LatentDiffusionConfig lc;
  lc.codebook_size = denoiser.config().num_classes;
  lc.steps = meta.steps;
  lc.schedule = meta.schedule;
  lc.denoiser = denoiser.config();
  lc.validate(vqvae.config());
  Checkpoint ckpt = denoiser_checkpoint(denoiser, meta);
  ckpt.metadata["kind"] = "latent";
  append_vqvae(ckpt, vqvae, "vqvae.");
  return ckpt;
}

LatentModel latent_from_checkpoint(const Checkpoint& ckpt, const VqVae<float>* vqvae_override) {
  if (!ckpt.has_meta("kind") || ckpt.meta("kind") != "latent")
    fail(ErrorKind::ConfigMismatch, "checkpoint is not a latent diffusion checkpoint");
  LatentModel m{denoiser_from_checkpoint(ckpt), vqvae_override ? *vqvae_override : vqvae_from_checkpoint(ckpt),
                denoiser_meta(ckpt)};
  LatentDiffusionConfig lc;
  lc.codebook_size = m.denoiser.config().num_classes;
  lc.steps = m.meta.steps;
  lc.schedule = m.meta.schedule;
  lc.denoiser = m.denoiser.config();
  lc.validate(m.vqvae.config());
  return m;
}

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
double seconds(F&& f) {
  const auto start = Clock::now();
  f();
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Runs one warm-up and then `trials` timed calls of each function.
TimingRow time_config(std::string label, Dims res, int trials, const std::function<void()>& train_epoch,
                      const std::function<void()>& sample) {
  train_epoch();
  sample();
  std::vector<double> tr, sa;
  for (int i = 0; i < trials; ++i) {
    tr.push_back(seconds(train_epoch));
    sa.push_back(seconds(sample));
  }
  return {std::move(label), res, median(tr), median(sa)};
}

}  // namespace

std::vector<TimingRow> timing_report(const TimingConfig& config) {
  if (config.trials < 1) fail(ErrorKind::InvalidArgument, "timing needs at least one trial");
  if (config.epoch_scenes < 1) fail(ErrorKind::InvalidArgument, "timing needs at least one scene per epoch");
  ToySceneParams params;
  params.dims = config.voxel_dims;
  params.num_classes = config.num_classes;
  const std::vector<VoxelGrid> scenes = generate_toy_dataset(params, config.epoch_scenes, config.seed);
  const NoiseSchedule schedule = make_schedule(ScheduleKind::Cosine, config.steps);
  DiffusionTrainConfig train;
  train.epochs = 1;
  train.seed = config.seed;

  std::vector<TimingRow> rows;
  {
    DenoiserConfig dc = config.denoiser;
    dc.num_classes = config.num_classes;
    dc.conditioned = false;
    const ConvDenoiser<float> net = ConvDenoiser<float>::init(dc, config.seed);
    const NetworkDenoiser model(net);
    rows.push_back(time_config(
        "voxel", config.voxel_dims, config.trials, [&] { train_diffusion(net, scenes, {}, schedule, train); },
        [&] {
          Rng rng(config.seed);
          sample_loop(model, config.voxel_dims, nullptr, schedule, rng);
        }));
  }
  for (const auto& stride : config.latent_strides) {
    VqVaeConfig vc = config.vqvae;
    vc.num_classes = config.num_classes;
    vc.stride = stride;
    const VqVae<float> vq = VqVae<float>::init(vc, config.seed);
    const Dims ld = vc.latent_dims(config.voxel_dims);
    const DenoiserConfig dc = latent_denoiser_config(config.denoiser, vc.codebook_size);
    const ConvDenoiser<float> net = ConvDenoiser<float>::init(dc, config.seed);
    const NetworkDenoiser model(net);
    const std::vector<VoxelGrid> indices = encode_dataset(vq, scenes);
    rows.push_back(time_config(
        "latent", ld, config.trials, [&] { train_diffusion(net, indices, {}, schedule, train); },
        [&] {
          Rng rng(config.seed);
          sample_latent(model, vq, ld, schedule, rng);
        }));
  }
  return rows;
}

void write_timing_table(std::ostream& os, std::span<const TimingRow> rows) {
  os << std::left << std::setw(8) << "method" << std::setw(12) << "resolution" << std::right << std::setw(16)
     << "train s/epoch" << std::setw(16) << "sample s/scene" << '\n';
  for (const TimingRow& r : rows)
    os << std::left << std::setw(8) << r.label << std::setw(12) << to_string(r.resolution) << std::right << std::fixed
       << std::setprecision(4) << std::setw(16) << r.train_seconds_per_epoch << std::setw(16) << r.sample_seconds
       << '\n';
  os.unsetf(std::ios::floatfield);
}

void write_timing_csv(std::ostream& os, std::span<const TimingRow> rows) {
  os << "method,dx,dy,dz,train_seconds_per_epoch,sample_seconds\n";
  for (const TimingRow& r : rows)
    os << r.label << ',' << r.resolution.x << ',' << r.resolution.y << ',' << r.resolution.z << ','
       << std::setprecision(9) << r.train_seconds_per_epoch << ',' << r.sample_seconds << '\n';
}

}  // namespace scenediff
