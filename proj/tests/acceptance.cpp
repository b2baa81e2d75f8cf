// Acceptance harness: one PASS/FAIL line per criterion, echoed to
// acceptance_summary.txt. Pass criterion numbers as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "scenediff/checkpoint.hpp"
#include "scenediff/diffusion.hpp"
#include "scenediff/latent.hpp"
#include "scenediff/scene_io.hpp"
#include "scenediff/ssc.hpp"
#include "scenediff/toy_scene.hpp"
#include "scenediff/vqvae.hpp"

using namespace scenediff;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// ---- independent oracles ------------------------------------------------

using Dense = std::vector<std::vector<long double>>;

Dense dense_step(int k, double beta) {
  Dense m(static_cast<std::size_t>(k), std::vector<long double>(static_cast<std::size_t>(k), beta / k));
  for (int i = 0; i < k; ++i) m[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] += 1.0L - beta;
  return m;
}

Dense identity(int k) { return dense_step(k, 0.0); }

Dense multiply(const Dense& a, const Dense& b) {
  const std::size_t n = a.size();
  Dense c(n, std::vector<long double>(n, 0.0L));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t m = 0; m < n; ++m)
      for (std::size_t j = 0; j < n; ++j) c[i][j] += a[i][m] * b[m][j];
  return c;
}

// Sum over x0 of p(x0) q(x_{t-1} = j | x_t, x0), each term from the joint
// q(x_{t-1}, x_t | x0) over all label pairs.
std::vector<double> enumerated_posterior(int k, int x_t, const std::vector<double>& x0_dist, int t,
                                         const NoiseSchedule& s) {
  Dense prev = identity(k);
  for (int u = 1; u < t; ++u) prev = multiply(prev, dense_step(k, s.beta(u)));
  const Dense step = dense_step(k, s.beta(t));
  std::vector<long double> out(static_cast<std::size_t>(k), 0.0L);
  for (int a = 0; a < k; ++a) {
    std::vector<long double> joint(static_cast<std::size_t>(k));
    long double evidence = 0;
    for (int j = 0; j < k; ++j)
      evidence += joint[static_cast<std::size_t>(j)] = prev[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)] *
                                                       step[static_cast<std::size_t>(j)][static_cast<std::size_t>(x_t)];
    if (evidence == 0) continue;
    for (int j = 0; j < k; ++j)
      out[static_cast<std::size_t>(j)] += x0_dist[static_cast<std::size_t>(a)] * joint[static_cast<std::size_t>(j)] / evidence;
  }
  const long double z = std::accumulate(out.begin(), out.end(), 0.0L);
  std::vector<double> r;
  for (long double v : out) r.push_back(static_cast<double>(v / z));
  return r;
}

std::vector<double> random_distribution(int k, Rng& rng) {
  std::vector<double> p(static_cast<std::size_t>(k));
  double z = 0;
  for (double& v : p) z += (v = -std::log(1.0 - rng.uniform()));
  for (double& v : p) v /= z;
  return p;
}

std::vector<double> histogram(std::span<const VoxelGrid> grids, int k) {
  std::vector<double> h(static_cast<std::size_t>(k), 0.0);
  double n = 0;
  for (const auto& g : grids)
    for (auto l : g.labels) h[l] += 1, n += 1;
  for (double& v : h) v /= n;
  return h;
}

double l1(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

ToySceneParams toy(int k = 5) {
  ToySceneParams p;
  p.dims = {16, 16, 4};
  p.num_classes = k;
  return p;
}

DenoiserConfig toy_denoiser(int k, bool conditioned) {
  DenoiserConfig c;
  c.num_classes = k;
  c.conditioned = conditioned;
  c.widths = {16, 32, 16};
  c.time_dim = 16;
  c.time_hidden = 32;
  return c;
}

// ---- 1 ------------------------------------------------------------------

Outcome transition_exactness() {
  double worst = 0;
  for (ScheduleKind kind : {ScheduleKind::Cosine, ScheduleKind::Linear}) {
    const NoiseSchedule s = make_schedule(kind, 100);
    for (int k : {2, 4, 8, 16}) {
      const UniformTransition q(k, s);
      Dense product = identity(k);
      for (int t = 1; t <= 100; ++t) {
        product = multiply(product, dense_step(k, s.beta(t)));
        const Matrix closed = q.cumulative_matrix(t);
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j)
            worst = std::max(worst, std::abs(closed(i, j) -
                                             static_cast<double>(product[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])));
      }
    }
  }
  return {worst <= 1e-10, "max |Qbar - Q1..Qt| = " + fmt(worst)};
}

// ---- 2 ------------------------------------------------------------------

Outcome forward_marginal() {
  const int k = 6, T = 100, n = 50000;
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, T);
  Rng rng(2024);
  VoxelGrid x({n, 1, 1}, 3);
  const std::set<int> checkpoints{1, T / 2, T};
  double worst = 0;
  std::string detail;
  for (int t = 1; t <= T; ++t) {
    x = sample_field(q_onestep(one_hot(x, k), t, s), rng);
    if (!checkpoints.count(t)) continue;
    const CategoricalField closed = q_marginal(one_hot(VoxelGrid({1, 1, 1}, 3), k), t, s);
    const std::vector<double> want(closed.values.begin(), closed.values.end());
    const double d = l1(histogram(std::span<const VoxelGrid>(&x, 1), k), want);
    worst = std::max(worst, d);
    detail += "t=" + std::to_string(t) + " L1=" + fmt(d, 3) + " ";
  }
  return {worst < 0.02, detail};
}

// ---- 3 ------------------------------------------------------------------

Outcome posterior_exactness() {
  Rng rng(7);
  double worst = 0, worst_norm = 0;
  int pairs = 0;
  for (int k = 2; k <= 6; ++k) {
    const NoiseSchedule s = make_schedule(k % 2 ? ScheduleKind::Linear : ScheduleKind::Cosine, 20);
    for (int t = 2; t <= 20; ++t) {
      for (int i = 0; i < 11; ++i, ++pairs) {
        VoxelGrid x_t({1, 1, 1});
        x_t.labels[0] = static_cast<std::uint16_t>(rng.below(static_cast<std::uint64_t>(k)));
        std::vector<double> x0 = random_distribution(k, rng);
        if (i % 3 == 0) {
          std::fill(x0.begin(), x0.end(), 0.0);
          x0[rng.below(static_cast<std::uint64_t>(k))] = 1.0;
        }
        CategoricalField f({1, 1, 1}, k);
        std::copy(x0.begin(), x0.end(), f.values.begin());
        const CategoricalField got = posterior(x_t, f, t, s);
        const auto want = enumerated_posterior(k, x_t.labels[0], x0, t, s);
        double sum = 0;
        for (int j = 0; j < k; ++j) {
          worst = std::max(worst, std::abs(got.values[static_cast<std::size_t>(j)] - want[static_cast<std::size_t>(j)]));
          sum += got.values[static_cast<std::size_t>(j)];
        }
        worst_norm = std::max(worst_norm, std::abs(sum - 1.0));
      }
    }
  }
  return {pairs >= 1000 && worst <= 1e-10 && worst_norm <= 1e-9,
          std::to_string(pairs) + " pairs, max err " + fmt(worst) + ", max |sum-1| " + fmt(worst_norm)};
}

// ---- 4 ------------------------------------------------------------------

Outcome loss_sanity() {
  Rng rng(11);
  const int T = 20;
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, T);
  double min_loss = 1e300, max_perfect = 0, max_w0_gap = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(9));
    const int t = 1 + static_cast<int>(rng.below(T));
    VoxelGrid x0({3, 2, 2});
    for (auto& l : x0.labels) l = static_cast<std::uint16_t>(rng.below(static_cast<std::uint64_t>(k)));
    const VoxelGrid x_t = sample_field(q_marginal(one_hot(x0, k), t, s), rng);
    LogitField logits(x0.dims, k);
    for (double& v : logits.values) v = rng.uniform(-4, 4);
    const double w0 = rng.uniform(0, 1);
    min_loss = std::min(min_loss, diffusion_loss(x0, t, logits, x_t, w0, s).total);

    const DiffusionLoss plain = diffusion_loss(x0, t, logits, x_t, 0.0, s);
    max_w0_gap = std::max(max_w0_gap, std::abs(plain.total - plain.vb));

    LogitField perfect(x0.dims, k, -60.0);
    for (std::size_t v = 0; v < x0.labels.size(); ++v) perfect.voxel(v)[x0.labels[v]] = 60.0;
    max_perfect = std::max(max_perfect, std::abs(diffusion_loss(x0, t, perfect, x_t, w0, s).total));
  }
  return {min_loss >= 0.0 && max_perfect <= 1e-6 && max_w0_gap == 0.0,
          "min loss " + fmt(min_loss) + ", max perfect-prediction loss " + fmt(max_perfect) +
              ", max |total - vb| at w0=0 " + fmt(max_w0_gap)};
}

// ---- 5 ------------------------------------------------------------------

template <class F>
std::pair<std::size_t, double> fd_check(std::vector<double>& params, const std::vector<double>& analytic, F&& loss,
                                        double h, double tol) {
  std::size_t failed = 0;
  double worst = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double lp = loss();
    params[i] = keep - h;
    const double lm = loss();
    params[i] = keep;
    const double fd = (lp - lm) / (2 * h);
    const double rel = std::abs(fd - analytic[i]) / std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
    worst = std::max(worst, rel);
    if (rel >= tol) ++failed;
  }
  return {failed, worst};
}

Outcome gradient_fidelity() {
  std::size_t total = 0, failed = 0;
  double worst_den = 0, worst_vq = 0;
  for (bool conditioned : {false, true}) {
    DenoiserConfig c;
    c.num_classes = 3;
    c.conditioned = conditioned;
    c.widths = {4, 6, 4};
    c.time_dim = 6;
    c.time_hidden = 5;
    ConvDenoiser<double> net = ConvDenoiser<double>::init(c, 3);
    Rng rng(4);
    for (double& v : net.params().values()) v += rng.uniform(-0.3, 0.3);
    nn::Tensor<double> in(c.in_channels(), {4, 4, 2}), up(3, {4, 4, 2});
    for (double& v : in.data) v = rng.uniform(-1, 1);
    for (double& v : up.data) v = rng.uniform(-1, 1);
    const auto grads = net.backward(in, 9, up);
    const auto [f, w] = fd_check(
        net.params().values(), grads.values(),
        [&] {
          const auto out = net.forward(in, 9);
          return std::inner_product(out.data.begin(), out.data.end(), up.data.begin(), 0.0);
        },
        1e-4, 1e-4);
    total += net.params().size();
    failed += f;
    worst_den = std::max(worst_den, w);
  }

  VqVaeConfig vc;
  vc.num_classes = 3;
  vc.hidden = 4;
  vc.code_dim = 3;
  vc.codebook_size = 6;
  vc.stride = {2, 2, 2};
  VqVae<double> vq = VqVae<double>::init(vc, 5);
  Rng rng(6);
  for (double& v : vq.params().values()) v += rng.uniform(-0.3, 0.3);
  for (double& v : vq.codebook().codes) v = rng.uniform(-0.5, 0.5);
  VoxelGrid x({4, 4, 2});
  for (auto& l : x.labels) l = static_cast<std::uint16_t>(rng.below(3));
  const std::vector<double> w{0.7, 1.3, 1.0};
  nn::ParamSet<double> grads = vq.params().zeros_like();
  std::vector<double> code_grads;
  IndexGrid idx;
  vq.loss_and_grad(x, w, grads, code_grads, &idx);
  const auto z0 = vq.encode(vq.make_input(x));
  const auto [zq, idx0] = quantize(vq.codebook(), z0);
  auto shift = zq;
  for (std::size_t i = 0; i < shift.data.size(); ++i) shift.data[i] -= z0.data[i];
  // Straight-through surrogate with the quantization offset frozen.
  const auto [f, wv] = fd_check(
      vq.params().values(), grads.values(),
      [&] {
        const auto z = vq.encode(vq.make_input(x));
        auto st = z;
        for (std::size_t i = 0; i < st.data.size(); ++i) st.data[i] += shift.data[i];
        const VqLoss l = vqvae_loss(x, vq.decode(st), z, zq, w, vc.beta_commit);
        return l.recon + l.commit;
      },
      1e-5, 1e-3);
  total += vq.params().size();
  failed += f;
  worst_vq = wv;

  std::vector<double> codes = vq.codebook().codes;
  const auto [fc, wc] = fd_check(
      codes, code_grads,
      [&] {
        Codebook<double> cb = vq.codebook();
        cb.codes = codes;
        return vqvae_loss(x, vq.decode(zq), z0, lookup(cb, idx), w, vc.beta_commit).codebook;
      },
      1e-5, 1e-3);
  total += codes.size();
  failed += fc;
  worst_vq = std::max(worst_vq, wc);

  return {failed == 0 && idx == idx0, std::to_string(total - failed) + "/" + std::to_string(total) +
                                          " parameters pass; worst rel err denoiser " + fmt(worst_den, 3) + ", vq " +
                                          fmt(worst_vq, 3)};
}

// ---- 6 ------------------------------------------------------------------

Outcome metric_arithmetic() {
  // Per-class IoU rows (free, building, barrier, other, pedestrian, pole,
  // road, ground, sidewalk, vegetation, vehicle) and their reference mIoU.
  const std::vector<double> ours{96.00, 31.75, 3.42, 25.43, 46.22, 43.32, 84.57, 13.01, 67.50, 37.45, 55.46};
  const std::vector<double> without{96.40, 27.72, 3.15, 8.77, 22.15, 37.14, 89.02, 18.22, 59.25, 29.74, 47.72};
  const double a = mean_of_defined(ours), b = mean_of_defined(without);
  return {std::abs(a - 45.83) <= 0.01 && std::abs(b - 39.94) <= 0.01,
          "mIoU " + fmt(a, 6) + " (45.83), " + fmt(b, 6) + " (39.94)"};
}

// ---- 7 ------------------------------------------------------------------

Outcome quantizer_exactness() {
  Rng rng(13);
  int vectors = 0, mismatches = 0, idempotence_failures = 0;
  while (vectors < 10000) {
    const int n = 2 + static_cast<int>(rng.below(63));
    const int d = 1 + static_cast<int>(rng.below(16));
    Codebook<double> cb(n, d);
    for (double& c : cb.codes) c = rng.uniform(-1, 1);
    LatentGrid<double> z(d, {10, 10, 1});
    for (double& v : z.data) v = rng.uniform(-1.2, 1.2);
    const auto [z_q, idx] = quantize(cb, z);
    for (std::size_t p = 0; p < z.plane(); ++p, ++vectors) {
      int best = -1;
      long double best_d = 1e300L;
      for (int m = 0; m < n; ++m) {
        long double dist = 0;
        for (int j = 0; j < d; ++j) {
          const long double e = static_cast<long double>(z.channel(j)[p]) - cb.code(m)[static_cast<std::size_t>(j)];
          dist += e * e;
        }
        if (dist < best_d) best_d = dist, best = m;
      }
      if (idx.indices[p] != best) ++mismatches;
    }
    if (quantize(cb, z_q).first.data != z_q.data) ++idempotence_failures;
  }
  return {mismatches == 0 && idempotence_failures == 0,
          std::to_string(vectors) + " vectors, " + std::to_string(mismatches) + " mismatches, " +
              std::to_string(idempotence_failures) + " idempotence failures"};
}

// ---- 8 ------------------------------------------------------------------

constexpr int kGenEpochs = 30;
constexpr int kSmoothWindow = 5;

Outcome toy_generation() {
  const int k = 5, T = 20;
  const auto data = generate_toy_dataset(toy(k), 200, 100);
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, T);
  DiffusionTrainConfig cfg;
  cfg.epochs = kGenEpochs;
  cfg.batch_size = 4;
  cfg.seed = 1;
  cfg.adam.learning_rate = 2e-3;
  const auto result = train_diffusion(ConvDenoiser<float>::init(toy_denoiser(k, false), 1), data, {}, s, cfg,
                                      [](int e, const LossRecord& r) {
                                        std::cout << "    epoch " << e << " loss " << fmt(r.total) << std::endl;
                                      });
  std::vector<double> smoothed;
  for (int start = 0; start + kSmoothWindow <= kGenEpochs; start += kSmoothWindow) {
    double sum = 0;
    for (int e = start; e < start + kSmoothWindow; ++e) sum += result.epoch_losses[static_cast<std::size_t>(e)].total;
    smoothed.push_back(sum / kSmoothWindow);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < smoothed.size(); ++i) monotone = monotone && smoothed[i] < smoothed[i - 1];

  const NetworkDenoiser model(result.net);
  std::vector<VoxelGrid> samples;
  for (int i = 0; i < 64; ++i) {
    Rng rng = Rng(77).split(static_cast<std::uint64_t>(i));
    samples.push_back(sample_loop(model, {16, 16, 4}, nullptr, s, rng));
  }
  const auto hd = histogram(data, k), hs = histogram(samples, k);
  const double dist = l1(hd, hs);
  std::string detail = "smoothed losses";
  for (double v : smoothed) detail += " " + fmt(v);
  detail += "; histogram L1 " + fmt(dist, 3) + " (data";
  for (double v : hd) detail += " " + fmt(v, 3);
  detail += " | samples";
  for (double v : hs) detail += " " + fmt(v, 3);
  detail += ")";
  return {monotone && dist < 0.15, detail};
}

// ---- 9 ------------------------------------------------------------------

constexpr int kSscEpochs = 30;

Outcome toy_completion() {
  const int k = 5, T = 20;
  const auto train_scenes = generate_toy_dataset(toy(k), 200, 200);
  const auto test_scenes = generate_toy_dataset(toy(k), 40, 201);
  const auto train_tasks = build_tasks(train_scenes, 0.1, 1);
  const auto test_tasks = build_tasks(test_scenes, 0.1, 2);
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, T);

  DiffusionTrainConfig dcfg;
  dcfg.epochs = kSscEpochs;
  dcfg.batch_size = 4;
  dcfg.seed = 3;
  dcfg.adam.learning_rate = 2e-3;
  const auto diffusion = train_conditional(train_tasks, toy_denoiser(k, true), s, dcfg, [](int e, const LossRecord& r) {
    std::cout << "    diffusion epoch " << e << " loss " << fmt(r.total) << std::endl;
  });
  BaselineTrainConfig bcfg;
  bcfg.epochs = kSscEpochs;
  bcfg.batch_size = 4;
  bcfg.seed = 3;
  bcfg.adam.learning_rate = 2e-3;
  const auto baseline = train_baseline(train_tasks, toy_denoiser(k, true), bcfg, [](int e, double loss) {
    std::cout << "    baseline epoch " << e << " loss " << fmt(loss) << std::endl;
  });

  const NetworkDenoiser model(diffusion.net);
  const std::vector<CompletionMethod> methods{majority_method(majority_class(task_targets(train_tasks))),
                                              baseline_method(baseline.model), diffusion_method(model, s, 9)};
  const auto results = evaluate(methods, test_tasks, k);
  std::ostringstream table;
  write_eval_table(table, results, toy_class_table(k));
  std::cout << table.str();
  const double maj = results[0].metrics.miou, base = results[1].metrics.miou, diff = results[2].metrics.miou;
  return {diff > maj && diff >= base - 0.20, "mIoU majority " + fmt(100 * maj) + ", baseline " + fmt(100 * base) +
                                                 ", diffusion " + fmt(100 * diff)};
}

// ---- 10 -----------------------------------------------------------------

Outcome latent_speed() {
  TimingConfig c;
  c.voxel_dims = {16, 16, 4};
  c.num_classes = 5;
  c.steps = 20;
  c.denoiser = toy_denoiser(5, false);
  c.vqvae.codebook_size = 64;
  c.latent_strides = {{2, 2, 2}, {4, 4, 2}, {8, 8, 4}};
  c.trials = 5;
  c.epoch_scenes = 4;
  const auto rows = timing_report(c);
  std::ostringstream table;
  write_timing_table(table, rows);
  std::cout << table.str();
  bool ok = rows[2].sample_seconds < rows[0].sample_seconds;  // 4x compression in x and y
  for (std::size_t i = 2; i < rows.size(); ++i) ok = ok && rows[i].sample_seconds <= rows[i - 1].sample_seconds;
  std::string detail = "sample s:";
  for (const auto& r : rows) detail += " " + r.label + "@" + to_string(r.resolution) + "=" + fmt(r.sample_seconds, 3);
  return {ok, detail};
}

// ---- 11 -----------------------------------------------------------------

constexpr int kVqEpochs = 30;

Outcome vq_ablation() {
  const int k = 5;
  const auto train = generate_toy_dataset(toy(k), 100, 300);
  const auto held_out = generate_toy_dataset(toy(k), 40, 301);
  std::vector<double> mious;
  std::string detail;
  for (const std::array<int, 3> stride : {std::array<int, 3>{8, 8, 4}, {4, 4, 2}, {2, 2, 2}}) {
    VqVaeConfig c;
    c.num_classes = k;
    c.codebook_size = 64;
    c.stride = stride;
    VqTrainConfig t;
    t.epochs = kVqEpochs;
    t.batch_size = 4;
    t.seed = 4;
    t.adam.learning_rate = 2e-3;
    const auto r = train_vqvae(train, c, t);
    const double m = reconstruction_metrics(r.model, held_out).miou;
    mious.push_back(m);
    detail += to_string(c.latent_dims(toy(k).dims)) + " mIoU " + fmt(100 * m) + "; ";
    std::cout << "    latent " << to_string(c.latent_dims(toy(k).dims)) << " train mIoU "
              << fmt(100 * r.epochs.back().recon.miou) << " held-out mIoU " << fmt(100 * m) << std::endl;
  }
  return {mious[0] <= mious[1] && mious[1] <= mious[2], detail};
}

// ---- 12 -----------------------------------------------------------------

Outcome round_trips() {
  Rng rng(17);
  int scene_failures = 0;
  const ClassTable table = carla_class_table();
  for (int i = 0; i < 1000; ++i) {
    const Dims d{1 + static_cast<int>(rng.below(24)), 1 + static_cast<int>(rng.below(24)),
                 1 + static_cast<int>(rng.below(8))};
    VoxelGrid g(d);
    const bool runs = i % 2 == 0;
    std::uint16_t label = 0;
    for (auto& l : g.labels) {
      if (!runs || rng.below(8) == 0) label = static_cast<std::uint16_t>(rng.below(11));
      l = label;
    }
    for (SceneEncoding enc : {SceneEncoding::Raw, SceneEncoding::RunLength}) {
      const auto bytes = encode_scene(g, table, enc);
      const auto [back, back_table] = decode_scene(bytes);
      if (back != g || back_table.names() != table.names() || back_table.colors() != table.colors() ||
          encode_scene(back, back_table, enc) != bytes)
        ++scene_failures;
    }
  }

  const fs::path dir = fs::temp_directory_path() / ("scenediff_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  int ckpt_failures = 0;
  VoxelGrid x({16, 16, 4}), cond({16, 16, 4});
  for (auto& l : x.labels) l = static_cast<std::uint16_t>(rng.below(5));
  for (auto& l : cond.labels) l = static_cast<std::uint16_t>(rng.below(2));
  {
    const auto net = ConvDenoiser<float>::init(toy_denoiser(5, true), 8);
    save_checkpoint(denoiser_checkpoint(net, {}), dir / "d.vxdn");
    const auto back = denoiser_from_checkpoint(load_checkpoint(dir / "d.vxdn"));
    for (int t : {1, 10, 20})
      if (back.forward(back.make_input(x, &cond), t).data != net.forward(net.make_input(x, &cond), t).data)
        ++ckpt_failures;
  }
  {
    const auto vq = VqVae<float>::init(VqVaeConfig{}, 9);
    save_checkpoint(vqvae_checkpoint(vq), dir / "v.vxdn");
    const auto back = vqvae_from_checkpoint(load_checkpoint(dir / "v.vxdn"));
    const IndexGrid idx = vq.encode_indices(x);
    if (back.encode_indices(x) != idx || back.decode(lookup(back.codebook(), idx)).data !=
                                             vq.decode(lookup(vq.codebook(), idx)).data)
      ++ckpt_failures;
    const auto latent = ConvDenoiser<float>::init(latent_denoiser_config(toy_denoiser(5, false), 64), 10);
    save_checkpoint(latent_checkpoint(latent, vq, {}), dir / "l.vxdn");
    const LatentModel lm = latent_from_checkpoint(load_checkpoint(dir / "l.vxdn"));
    const VoxelGrid lidx = as_voxel_grid(idx);
    if (lm.denoiser.forward(lm.denoiser.make_input(lidx, nullptr), 5).data !=
            latent.forward(latent.make_input(lidx, nullptr), 5).data ||
        lm.vqvae.reconstruct(x) != vq.reconstruct(x))
      ++ckpt_failures;
  }
  fs::remove_all(dir);
  return {scene_failures == 0 && ckpt_failures == 0,
          "2000 scene encodes, " + std::to_string(scene_failures) + " failures; checkpoint failures " +
              std::to_string(ckpt_failures)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "transition-matrix exactness", 10, transition_exactness},
      {2, "forward-marginal correctness", 30, forward_marginal},
      {3, "posterior exactness", 60, posterior_exactness},
      {4, "loss sanity", 60, loss_sanity},
      {5, "gradient fidelity", 120, gradient_fidelity},
      {6, "metric arithmetic", 10, metric_arithmetic},
      {7, "quantizer exactness", 60, quantizer_exactness},
      {8, "toy end-to-end generation", 15 * 60, toy_generation},
      {9, "toy scene completion", 30 * 60, toy_completion},
      {10, "latent speed trend", 600, latent_speed},
      {11, "vq-vae ablation trend", 30 * 60, vq_ablation},
      {12, "format round-trips", 120, round_trips},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  std::ofstream summary("acceptance_summary.txt");
  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    std::cout << "running " << c.id << ": " << c.name << std::endl;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_seconds) {
      o.pass = false;
      o.detail += "; over the " + fmt(c.budget_seconds) + " s budget";
    }
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
         << std::fixed << std::setprecision(1) << secs << " s]";
    std::cout << line.str() << std::endl;
    summary << line.str() << std::endl;
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
