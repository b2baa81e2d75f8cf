#pragma once

#include <span>
#include <string>
#include <vector>

#include "scenediff/rng.hpp"
#include "scenediff/voxel.hpp"

namespace scenediff {

enum class ScheduleKind { Cosine, Linear };

ScheduleKind parse_schedule_kind(const std::string& s);
std::string to_string(ScheduleKind kind);

/// Corruption rates for steps 1..T. Step 0 is the clean data (alpha_bar = 1).
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  /// Builds from explicit betas in [0, 1]; alpha_bar is their running
  /// product of (1 - beta).
  static NoiseSchedule from_betas(std::vector<double> betas);

  int steps() const { return static_cast<int>(beta_.size()); }
  double beta(int t) const { return beta_.at(static_cast<std::size_t>(t - 1)); }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bar_.at(static_cast<std::size_t>(t - 1)); }

  const std::vector<double>& betas() const { return beta_; }
  const std::vector<double>& alpha_bars() const { return alpha_bar_; }

 private:
  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
};

/// cosine: alpha_bar from the squared-cosine curve with offset 0.008, betas
/// clipped to (0, 0.999]; linear: betas evenly spaced over [1e-4, 0.5].
NoiseSchedule make_schedule(ScheduleKind kind, int steps);

/// Dense row-major K x K matrix for oracle-style checks.
struct Matrix {
  int n = 0;
  std::vector<double> a;

  explicit Matrix(int size = 0, double fill = 0.0) : n(size), a(static_cast<std::size_t>(size) * size, fill) {}
  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
  static Matrix identity(int size);
  Matrix operator*(const Matrix& rhs) const;
};

/// Uniform categorical transitions: Q_t = (1-b_t) I + (b_t/K) 11^T.
class UniformTransition {
 public:
  UniformTransition(int num_classes, NoiseSchedule schedule);

  int num_classes() const { return k_; }
  const NoiseSchedule& schedule() const { return schedule_; }

  Matrix step_matrix(int t) const;
  /// Closed form alpha_bar_t I + ((1-alpha_bar_t)/K) 11^T.
  Matrix cumulative_matrix(int t) const;

 private:
  int k_;
  NoiseSchedule schedule_;
};

/// x0 Qbar_t row-wise: alpha_bar_t p + (1 - alpha_bar_t)/K.
CategoricalField q_marginal(const CategoricalField& x0, int t, const NoiseSchedule& schedule);

/// x_{t-1} Q_t row-wise: (1 - beta_t) p + beta_t/K.
CategoricalField q_onestep(const CategoricalField& x_prev, int t, const NoiseSchedule& schedule);

/// Independent per-voxel categorical draws.
VoxelGrid sample_field(const CategoricalField& field, Rng& rng);

/// q(x_{t-1} | x_t, x0) marginalized over a (possibly soft) x0
/// distribution. Valid for 2 <= t <= T.
CategoricalField posterior(const VoxelGrid& x_t, const CategoricalField& x0_dist, int t,
                           const NoiseSchedule& schedule);

/// Floor applied to probabilities inside logarithms.
inline constexpr double kProbFloor = 1e-12;

/// sum_k q_k (log q_k - log max(p_k, floor)), with 0 log 0 = 0.
double kl_categorical(std::span<const double> q, std::span<const double> p);

struct DiffusionLoss {
  double total = 0.0;
  double vb = 0.0;
  double aux = 0.0;
};

/// Hybrid variational + auxiliary cross-entropy loss, averaged over voxels.
/// For t >= 2 the VB term is KL(q(x_{t-1}|x_t,x0) || p_theta(x_{t-1}|x_t));
/// at t = 1 it is the decoder NLL -log p_theta(x0|x1). When `grad` is
/// non-null it receives d total / d logits.
DiffusionLoss diffusion_loss(const VoxelGrid& x0, int t, const LogitField& logits, const VoxelGrid& x_t,
                             double w0, const NoiseSchedule& schedule, LogitField* grad = nullptr);

/// p_theta(x0_tilde | x_t [, condition]) as logits.
class DenoisingModel {
 public:
  virtual ~DenoisingModel() = default;
  virtual int num_classes() const = 0;
  virtual LogitField predict(const VoxelGrid& x_t, const VoxelGrid* condition, int t) const = 0;
};

enum class ReverseMode {
  /// Sum the analytic posterior over the predicted x0 distribution.
  Marginalize,
  /// Draw a hard x0 from the prediction, then use its posterior.
  SampleX0,
};

VoxelGrid reverse_step(const VoxelGrid& x_t, int t, const DenoisingModel& model, const VoxelGrid* condition,
                       const NoiseSchedule& schedule, Rng& rng, ReverseMode mode = ReverseMode::Marginalize);

/// Ancestral sampling from uniform noise at t = T down to x_0.
VoxelGrid sample_loop(const DenoisingModel& model, Dims dims, const VoxelGrid* condition,
                      const NoiseSchedule& schedule, Rng& rng, ReverseMode mode = ReverseMode::Marginalize);

}  // namespace scenediff
