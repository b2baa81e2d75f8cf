#include "scenediff/training.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace scenediff {

namespace {

void check_batch(const ConvDenoiser<float>& net, const TrainBatch& batch) {
  if (batch.scenes.empty()) fail(ErrorKind::EmptyInput, "training batch is empty");
  if (net.config().conditioned && batch.conditions.size() != batch.scenes.size())
    fail(ErrorKind::DimMismatch, "conditioned training needs one condition per scene");
  if (!net.config().conditioned && !batch.conditions.empty())
    fail(ErrorKind::DimMismatch, "unconditioned denoiser given condition grids");
}

struct ExampleResult {
  DiffusionLoss loss;
  int t;
};

ExampleResult run_example(const ConvDenoiser<float>& net, const VoxelGrid& x0, const VoxelGrid* condition, int t,
                          const NoiseSchedule& schedule, double w0, Rng& rng, nn::ParamSet<float>* grads) {
  const int k = net.config().num_classes;
  const VoxelGrid x_t = sample_field(q_marginal(one_hot(x0, k), t, schedule), rng);
  ConvDenoiser<float>::Cache cache;
  const nn::Tensor<float> logits = net.forward(net.make_input(x_t, condition), t, grads ? &cache : nullptr);
  LogitField dlogits;
  const DiffusionLoss loss = diffusion_loss(x0, t, to_logit_field(logits), x_t, w0, schedule, grads ? &dlogits : nullptr);
  if (grads) net.backward(cache, from_logit_field<float>(dlogits), *grads);
  return {loss, t};
}

void accumulate(LossRecord& r, const DiffusionLoss& l) {
  r.total += l.total;
  r.vb += l.vb;
  r.aux += l.aux;
}

void scale(LossRecord& r, double s) {
  r.total *= s;
  r.vb *= s;
  r.aux *= s;
}

}  // namespace

LossRecord train_step(ConvDenoiser<float>& net, nn::Adam<float>& opt, const TrainBatch& batch,
                      const NoiseSchedule& schedule, double w0, Rng& rng) {
  check_batch(net, batch);
  nn::ParamSet<float> grads = net.params().zeros_like();
  LossRecord record;
  for (std::size_t i = 0; i < batch.scenes.size(); ++i) {
    const int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.steps()))) + 1;
    const VoxelGrid* cond = batch.conditions.empty() ? nullptr : &batch.conditions[i];
    const ExampleResult r = run_example(net, batch.scenes[i], cond, t, schedule, w0, rng, &grads);
    if (!std::isfinite(r.loss.total)) {
      std::ostringstream msg;
      msg << "non-finite loss at optimizer step " << opt.steps() << " (example " << i << ", t=" << r.t
          << ", vb=" << r.loss.vb << ", aux=" << r.loss.aux << ")";
      fail(ErrorKind::NonFiniteLoss, msg.str());
    }
    accumulate(record, r.loss);
  }
  const double inv = 1.0 / static_cast<double>(batch.scenes.size());
  for (float& g : grads.values()) g = static_cast<float>(g * inv);
  scale(record, inv);
  opt.update(net.params().values(), grads.values());
  return record;
}

LossRecord evaluate_loss(const ConvDenoiser<float>& net, const TrainBatch& batch, const NoiseSchedule& schedule,
                         double w0, std::uint64_t seed, int draws_per_scene) {
  check_batch(net, batch);
  Rng rng(seed);
  LossRecord record;
  int n = 0;
  for (std::size_t i = 0; i < batch.scenes.size(); ++i)
    for (int d = 0; d < draws_per_scene; ++d, ++n) {
      const int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.steps()))) + 1;
      const VoxelGrid* cond = batch.conditions.empty() ? nullptr : &batch.conditions[i];
      accumulate(record, run_example(net, batch.scenes[i], cond, t, schedule, w0, rng, nullptr).loss);
    }
  scale(record, 1.0 / n);
  return record;
}

DiffusionTrainResult train_diffusion(ConvDenoiser<float> net, std::span<const VoxelGrid> scenes,
                                     std::span<const VoxelGrid> conditions, const NoiseSchedule& schedule,
                                     const DiffusionTrainConfig& config, const EpochCallback& on_epoch) {
  if (scenes.empty()) fail(ErrorKind::EmptyInput, "training dataset is empty");
  if (config.batch_size < 1) fail(ErrorKind::InvalidArgument, "batch size must be positive");
  check_batch(net, {scenes, conditions});
  nn::Adam<float> opt(config.adam, net.params().size());
  Rng rng(config.seed);
  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<VoxelGrid> batch_scenes, batch_conds;

  DiffusionTrainResult result{std::move(net), {}, 0};
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    LossRecord epoch_loss;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch_scenes.clear();
      batch_conds.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_scenes.push_back(scenes[order[i]]);
        if (!conditions.empty()) batch_conds.push_back(conditions[order[i]]);
      }
      const LossRecord r = train_step(result.net, opt, {batch_scenes, batch_conds}, schedule, config.w0, rng);
      epoch_loss.total += r.total;
      epoch_loss.vb += r.vb;
      epoch_loss.aux += r.aux;
      ++batches;
      ++result.steps;
    }
    scale(epoch_loss, 1.0 / batches);
    result.epoch_losses.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return result;
}

}  // namespace scenediff
