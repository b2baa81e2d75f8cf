#include "scenediff/ssc.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "scenediff/losses.hpp"

namespace scenediff {

std::vector<CompletionTask> build_tasks(std::span<const VoxelGrid> dataset, double rate, std::uint64_t seed) {
  const Rng root(seed);
  std::vector<CompletionTask> tasks;
  tasks.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::uint64_t task_seed = root.split(i).next();
    tasks.push_back({sparsify(dataset[i], rate, task_seed), dataset[i], rate});
  }
  return tasks;
}

void check_task(const CompletionTask& task) {
  if (task.condition.dims != task.target.dims) fail(ErrorKind::DimMismatch, "condition and target dims differ");
  for (std::size_t v = 0; v < task.condition.labels.size(); ++v) {
    if (task.condition.labels[v] > 1) fail(ErrorKind::InvalidLabel, "condition grid must be binary");
    if (task.condition.labels[v] && task.target.labels[v] == 0)
      fail(ErrorKind::InvalidArgument, "condition marks a voxel that the target leaves free");
  }
}

std::vector<VoxelGrid> task_targets(std::span<const CompletionTask> tasks) {
  std::vector<VoxelGrid> out;
  for (const auto& t : tasks) out.push_back(t.target);
  return out;
}

std::vector<VoxelGrid> task_conditions(std::span<const CompletionTask> tasks) {
  std::vector<VoxelGrid> out;
  for (const auto& t : tasks) out.push_back(t.condition);
  return out;
}

DiffusionTrainResult train_conditional(std::span<const CompletionTask> tasks, const DenoiserConfig& config,
                                       const NoiseSchedule& schedule, const DiffusionTrainConfig& train,
                                       const EpochCallback& on_epoch) {
  if (!config.conditioned)
    fail(ErrorKind::DimMismatch, "conditional training needs K+1 input channels, got " +
                                     std::to_string(config.in_channels()));
  if (tasks.empty()) fail(ErrorKind::EmptyInput, "no completion tasks");
  for (const auto& t : tasks) check_task(t);
  const std::vector<VoxelGrid> targets = task_targets(tasks);
  const std::vector<VoxelGrid> conditions = task_conditions(tasks);
  return train_diffusion(ConvDenoiser<float>::init(config, train.seed), targets, conditions, schedule, train, on_epoch);
}

VoxelGrid complete(const DenoisingModel& model, const VoxelGrid& condition, const NoiseSchedule& schedule, Rng& rng,
                   ReverseMode mode) {
  return sample_loop(model, condition.dims, &condition, schedule, rng, mode);
}

template <class T>
nn::Tensor<T> baseline_input(const DenoiserConfig& config, const VoxelGrid& condition) {
  if (!config.conditioned) fail(ErrorKind::DimMismatch, "baseline needs a conditioned denoiser config");
  nn::Tensor<T> in(config.in_channels(), condition.dims);
  auto occ = in.channel(config.num_classes);
  for (std::size_t v = 0; v < condition.labels.size(); ++v) occ[v] = condition.labels[v] ? T(1) : T(0);
  return in;
}

template nn::Tensor<float> baseline_input<float>(const DenoiserConfig&, const VoxelGrid&);
template nn::Tensor<double> baseline_input<double>(const DenoiserConfig&, const VoxelGrid&);

BaselineCompleter::BaselineCompleter(ConvDenoiser<float> net) : net_(std::move(net)) {
  if (!net_.config().conditioned) fail(ErrorKind::DimMismatch, "baseline needs a conditioned denoiser config");
}

nn::Tensor<float> BaselineCompleter::logits(const VoxelGrid& condition) const {
  return net_.forward(baseline_input<float>(net_.config(), condition), 0);
}

VoxelGrid BaselineCompleter::predict(const VoxelGrid& condition) const {
  return argmax_decode(to_logit_field(logits(condition)));
}

BaselineTrainResult train_baseline(std::span<const CompletionTask> tasks, const DenoiserConfig& config,
                                   const BaselineTrainConfig& train,
                                   const std::function<void(int epoch, double loss)>& on_epoch) {
  if (tasks.empty()) fail(ErrorKind::EmptyInput, "no completion tasks");
  if (train.batch_size < 1) fail(ErrorKind::InvalidArgument, "batch size must be positive");
  for (const auto& t : tasks) check_task(t);
  const int k = config.num_classes;
  std::vector<double> weights = train.class_weights;
  if (weights.empty()) {
    const std::vector<VoxelGrid> targets = task_targets(tasks);
    weights = inverse_frequency_weights(targets, k);
  }
  if (static_cast<int>(weights.size()) != k) fail(ErrorKind::DimMismatch, "class weight count differs from K");

  BaselineTrainResult result{BaselineCompleter(ConvDenoiser<float>::init(config, train.seed)), {}};
  ConvDenoiser<float> net = result.model.network();
  nn::Adam<float> opt(train.adam, net.params().size());
  Rng rng(train.seed);
  std::vector<std::size_t> order(tasks.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= train.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(train.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(train.batch_size));
      nn::ParamSet<float> grads = net.params().zeros_like();
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const CompletionTask& task = tasks[order[i]];
        ConvDenoiser<float>::Cache cache;
        const nn::Tensor<float> logits = net.forward(baseline_input<float>(config, task.condition), 0, &cache);
        nn::Tensor<float> dlogits;
        const double loss = weighted_cross_entropy(task.target, logits, weights, &dlogits);
        if (!std::isfinite(loss))
          fail(ErrorKind::NonFiniteLoss, "non-finite baseline loss at optimizer step " + std::to_string(opt.steps()));
        net.backward(cache, dlogits, grads);
        batch_loss += loss;
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (float& g : grads.values()) g = static_cast<float>(g * inv);
      opt.update(net.params().values(), grads.values());
      epoch_loss += batch_loss * inv;
      ++batches;
    }
    epoch_loss /= batches;
    result.epoch_losses.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  result.model = BaselineCompleter(std::move(net));
  return result;
}

Checkpoint baseline_checkpoint(const BaselineCompleter& model) {
  Checkpoint ckpt;
  ckpt.metadata["kind"] = "baseline";
  write_denoiser_config(ckpt, model.network().config(), "denoiser.");
  append_params(ckpt, model.network().params(), "denoiser.");
  return ckpt;
}

BaselineCompleter baseline_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.has_meta("kind") || ckpt.meta("kind") != "baseline")
    fail(ErrorKind::ConfigMismatch, "checkpoint is not a baseline checkpoint");
  return BaselineCompleter(denoiser_from_checkpoint(ckpt));
}

int majority_class(std::span<const VoxelGrid> targets) {
  if (targets.empty()) fail(ErrorKind::EmptyInput, "no targets to count");
  std::vector<std::uint64_t> counts;
  for (const VoxelGrid& g : targets)
    for (std::uint16_t l : g.labels) {
      if (l >= counts.size()) counts.resize(l + 1u, 0);
      ++counts[l];
    }
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

CompletionMethod majority_method(int label) {
  return {"majority", [label](const CompletionTask& t, std::size_t) {
            return VoxelGrid(t.condition.dims, static_cast<std::uint16_t>(label));
          }};
}

CompletionMethod oracle_method() {
  return {"oracle", [](const CompletionTask& t, std::size_t) { return t.target; }};
}

CompletionMethod all_free_method() {
  return {"all-free", [](const CompletionTask& t, std::size_t) { return VoxelGrid(t.condition.dims); }};
}

CompletionMethod baseline_method(const BaselineCompleter& model, std::string name) {
  return {std::move(name), [&model](const CompletionTask& t, std::size_t) { return model.predict(t.condition); }};
}

CompletionMethod diffusion_method(const DenoisingModel& model, const NoiseSchedule& schedule, std::uint64_t seed,
                                  std::string name) {
  return {std::move(name), [&model, &schedule, seed](const CompletionTask& t, std::size_t i) {
            Rng rng = Rng(seed).split(i);
            return complete(model, t.condition, schedule, rng);
          }};
}

CompletionMethod best_of_n_method(const DenoisingModel& model, const NoiseSchedule& schedule, std::uint64_t seed, int n,
                                  std::string name) {
  if (n < 1) fail(ErrorKind::InvalidArgument, "best-of-n needs n >= 1");
  if (name.empty()) name = "diffusion (best of " + std::to_string(n) + ")";
  return {std::move(name), [&model, &schedule, seed, n](const CompletionTask& t, std::size_t i) {
            Rng rng = Rng(seed).split(i);
            VoxelGrid best;
            double best_score = -1.0;
            for (int s = 0; s < n; ++s) {
              VoxelGrid g = complete(model, t.condition, schedule, rng);
              IouAccumulator acc(model.num_classes());
              acc.add(g, t.target);
              const double score = acc.report().miou;
              if (score > best_score) {
                best_score = score;
                best = std::move(g);
              }
            }
            return best;
          }};
}

std::vector<MethodResult> evaluate(std::span<const CompletionMethod> methods, std::span<const CompletionTask> tasks,
                                   int num_classes) {
  if (methods.empty()) fail(ErrorKind::EmptyInput, "no methods to evaluate");
  if (tasks.empty()) fail(ErrorKind::EmptyInput, "no tasks to evaluate");
  std::vector<MethodResult> out;
  for (const CompletionMethod& m : methods) {
    IouAccumulator acc(num_classes);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const VoxelGrid pred = m.predict(tasks[i], i);
      if (pred.dims != tasks[i].target.dims)
        fail(ErrorKind::DimMismatch, "method '" + m.name + "' returned dims " + to_string(pred.dims));
      acc.add(pred, tasks[i].target);
    }
    out.push_back({m.name, acc.report()});
  }
  return out;
}

namespace {

std::string pct(double v) {
  if (v == kUndefinedIou) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * v;
  return s.str();
}

}  // namespace

void write_eval_table(std::ostream& os, std::span<const MethodResult> results, const ClassTable& classes) {
  std::size_t name_w = 6;
  for (const auto& r : results) name_w = std::max(name_w, r.name.size());
  std::vector<std::size_t> col_w;
  os << std::left << std::setw(static_cast<int>(name_w + 2)) << "method" << std::right << std::setw(8) << "mIoU"
     << std::setw(8) << "IoU";
  for (int c = 0; c < classes.num_classes(); ++c) {
    col_w.push_back(std::max<std::size_t>(7, classes.names()[static_cast<std::size_t>(c)].size()) + 1);
    os << std::setw(static_cast<int>(col_w.back())) << classes.names()[static_cast<std::size_t>(c)];
  }
  os << '\n';
  for (const auto& r : results) {
    os << std::left << std::setw(static_cast<int>(name_w + 2)) << r.name << std::right << std::setw(8)
       << pct(r.metrics.miou) << std::setw(8) << pct(r.metrics.completion_iou);
    for (int c = 0; c < classes.num_classes(); ++c)
      os << std::setw(static_cast<int>(col_w[static_cast<std::size_t>(c)]))
         << pct(r.metrics.per_class_iou[static_cast<std::size_t>(c)]);
    os << '\n';
  }
}

void write_eval_csv(std::ostream& os, std::span<const MethodResult> results, const ClassTable& classes) {
  os << "method,class,iou\n";
  os << std::setprecision(10);
  for (const auto& r : results) {
    for (int c = 0; c < classes.num_classes(); ++c) {
      const double v = r.metrics.per_class_iou[static_cast<std::size_t>(c)];
      os << r.name << ',' << classes.names()[static_cast<std::size_t>(c)] << ',';
      if (v == kUndefinedIou)
        os << "nan";
      else
        os << v;
      os << '\n';
    }
    os << r.name << ",mIoU," << r.metrics.miou << '\n';
    os << r.name << ",completion," << r.metrics.completion_iou << '\n';
  }
}

}  // namespace scenediff
