#include "scenediff/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace scenediff {

ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "cosine") return ScheduleKind::Cosine;
  if (s == "linear") return ScheduleKind::Linear;
  fail(ErrorKind::InvalidArgument, "unknown schedule kind '" + s + "' (expected cosine or linear)");
}

std::string to_string(ScheduleKind kind) { return kind == ScheduleKind::Cosine ? "cosine" : "linear"; }

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) fail(ErrorKind::InvalidArgument, "noise schedule needs at least one step");
  NoiseSchedule s;
  s.beta_ = std::move(betas);
  s.alpha_bar_.resize(s.beta_.size());
  double running = 1.0;
  for (std::size_t i = 0; i < s.beta_.size(); ++i) {
    const double b = s.beta_[i];
    if (!(b >= 0.0 && b <= 1.0)) fail(ErrorKind::InvalidArgument, "beta must lie in [0, 1]");
    running *= 1.0 - b;
    s.alpha_bar_[i] = running;
  }
  return s;
}

NoiseSchedule make_schedule(ScheduleKind kind, int steps) {
  if (steps < 1) fail(ErrorKind::InvalidArgument, "schedule needs T >= 1");
  std::vector<double> betas(static_cast<std::size_t>(steps));
  if (kind == ScheduleKind::Cosine) {
    constexpr double s = 0.008;
    auto f = [&](double t) {
      const double c = std::cos((t / steps + s) / (1.0 + s) * std::numbers::pi / 2.0);
      return c * c;
    };
    const double f0 = f(0.0);
    double prev = 1.0;
    for (int t = 1; t <= steps; ++t) {
      const double ab = f(t) / f0;
      betas[static_cast<std::size_t>(t - 1)] = std::clamp(1.0 - ab / prev, 1e-12, 0.999);
      prev = ab;
    }
  } else {
    constexpr double lo = 1e-4, hi = 0.5;
    for (int t = 0; t < steps; ++t)
      betas[static_cast<std::size_t>(t)] = steps == 1 ? lo : lo + (hi - lo) * t / (steps - 1);
  }
  return NoiseSchedule::from_betas(std::move(betas));
}

Matrix Matrix::identity(int size) {
  Matrix m(size);
  for (int i = 0; i < size; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
  Matrix out(n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const double a_ik = (*this)(i, k);
      for (int j = 0; j < n; ++j) out(i, j) += a_ik * rhs(k, j);
    }
  return out;
}

UniformTransition::UniformTransition(int num_classes, NoiseSchedule schedule)
    : k_(num_classes), schedule_(std::move(schedule)) {
  if (k_ < 1) fail(ErrorKind::InvalidArgument, "transition needs K >= 1");
}

Matrix UniformTransition::step_matrix(int t) const {
  const double b = schedule_.beta(t);
  Matrix m(k_, b / k_);
  for (int i = 0; i < k_; ++i) m(i, i) += 1.0 - b;
  return m;
}

Matrix UniformTransition::cumulative_matrix(int t) const {
  const double ab = schedule_.alpha_bar(t);
  Matrix m(k_, (1.0 - ab) / k_);
  for (int i = 0; i < k_; ++i) m(i, i) += ab;
  return m;
}

namespace {

void check_step(int t, int lo, const NoiseSchedule& schedule) {
  if (t < lo || t > schedule.steps())
    fail(ErrorKind::InvalidArgument, "step " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                                         std::to_string(schedule.steps()) + "]");
}

CategoricalField mix_with_uniform(const CategoricalField& in, double keep) {
  CategoricalField out = in;
  const double add = (1.0 - keep) / in.num_classes;
  for (double& p : out.values) p = keep * p + add;
  return out;
}

/// Closed-form pieces of q(x_{t-1} | x_t, x0) for uniform transitions.
struct PosteriorTerms {
  double beta;       // beta_t
  double ab_prev;    // alpha_bar_{t-1}
  double z_same;     // q(x_t = c | x0 = c)
  double z_other;    // q(x_t = c | x0 != c)
  double a_same;     // q(x_t = c | x_{t-1} = c)
  double a_other;    // q(x_t = c | x_{t-1} != c)
  double mix;        // (1 - alpha_bar_{t-1}) / K

  PosteriorTerms(int t, int k, const NoiseSchedule& s) {
    beta = s.beta(t);
    ab_prev = s.alpha_bar(t - 1);
    const double ab = s.alpha_bar(t);
    z_same = ab + (1.0 - ab) / k;
    z_other = (1.0 - ab) / k;
    a_same = 1.0 - beta + beta / k;
    a_other = beta / k;
    mix = (1.0 - ab_prev) / k;
  }
};

/// Posterior at one voxel; r is scratch of size K.
void posterior_voxel(const PosteriorTerms& pt, int xt, std::span<const double> pi, std::span<double> out,
                     std::span<double> r) {
  const std::size_t k = pi.size();
  double r_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double z = static_cast<int>(i) == xt ? pt.z_same : pt.z_other;
    r[i] = z > 0.0 ? pi[i] / z : 0.0;
    r_sum += r[i];
  }
  double total = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double a = static_cast<int>(j) == xt ? pt.a_same : pt.a_other;
    out[j] = a * (pt.ab_prev * r[j] + pt.mix * r_sum);
    total += out[j];
  }
  if (total > 0.0)
    for (double& p : out) p /= total;
}

/// Given g = dL/dp for the posterior output, writes dL/dpi.
void posterior_voxel_backward(const PosteriorTerms& pt, int xt, std::span<const double> g, std::span<double> dpi) {
  const std::size_t k = g.size();
  double ag_sum = 0.0;
  for (std::size_t j = 0; j < k; ++j) ag_sum += (static_cast<int>(j) == xt ? pt.a_same : pt.a_other) * g[j];
  for (std::size_t i = 0; i < k; ++i) {
    const bool same = static_cast<int>(i) == xt;
    const double z = same ? pt.z_same : pt.z_other;
    const double a = same ? pt.a_same : pt.a_other;
    dpi[i] = z > 0.0 ? (pt.ab_prev * a * g[i] + pt.mix * ag_sum) / z : 0.0;
  }
}

void softmax_voxel(std::span<const double> logits, std::span<double> p, std::span<double> log_p) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) sum += std::exp(logits[k] - m);
  const double lse = m + std::log(sum);
  for (std::size_t k = 0; k < logits.size(); ++k) {
    log_p[k] = logits[k] - lse;
    p[k] = std::exp(log_p[k]);
  }
}

int draw(std::span<const double> p, Rng& rng) {
  const double u = rng.uniform();
  double c = 0.0;
  int last_positive = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] <= 0.0) continue;
    c += p[k];
    last_positive = static_cast<int>(k);
    if (u < c) return last_positive;
  }
  return last_positive;
}

}  // namespace

CategoricalField q_marginal(const CategoricalField& x0, int t, const NoiseSchedule& schedule) {
  check_step(t, 1, schedule);
  return mix_with_uniform(x0, schedule.alpha_bar(t));
}

CategoricalField q_onestep(const CategoricalField& x_prev, int t, const NoiseSchedule& schedule) {
  check_step(t, 1, schedule);
  return mix_with_uniform(x_prev, 1.0 - schedule.beta(t));
}

VoxelGrid sample_field(const CategoricalField& field, Rng& rng) {
  VoxelGrid out(field.dims);
  for (std::size_t v = 0; v < field.voxel_count(); ++v)
    out.labels[v] = static_cast<std::uint16_t>(draw(field.voxel(v), rng));
  return out;
}

CategoricalField posterior(const VoxelGrid& x_t, const CategoricalField& x0_dist, int t,
                           const NoiseSchedule& schedule) {
  check_step(t, 2, schedule);
  if (x_t.dims != x0_dist.dims) fail(ErrorKind::DimMismatch, "posterior: x_t and x0 dims differ");
  check_labels(x_t, x0_dist.num_classes);
  const PosteriorTerms pt(t, x0_dist.num_classes, schedule);
  CategoricalField out(x_t.dims, x0_dist.num_classes);
  std::vector<double> scratch(static_cast<std::size_t>(x0_dist.num_classes));
  for (std::size_t v = 0; v < out.voxel_count(); ++v)
    posterior_voxel(pt, x_t.labels[v], x0_dist.voxel(v), out.voxel(v), scratch);
  return out;
}

double kl_categorical(std::span<const double> q, std::span<const double> p) {
  if (q.size() != p.size()) fail(ErrorKind::DimMismatch, "kl_categorical: length mismatch");
  double kl = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (q[k] <= 0.0) continue;
    kl += q[k] * (std::log(q[k]) - std::log(std::max(p[k], kProbFloor)));
  }
  return std::max(kl, 0.0);
}

DiffusionLoss diffusion_loss(const VoxelGrid& x0, int t, const LogitField& logits, const VoxelGrid& x_t,
                             double w0, const NoiseSchedule& schedule, LogitField* grad) {
  check_step(t, 1, schedule);
  if (x0.dims != logits.dims || x_t.dims != logits.dims)
    fail(ErrorKind::DimMismatch, "diffusion_loss: x0, x_t and logits dims differ");
  const int k = logits.num_classes;
  check_labels(x0, k);
  check_labels(x_t, k);
  const std::size_t n = logits.voxel_count();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (grad) *grad = LogitField(logits.dims, k, 0.0);

  const auto ks = static_cast<std::size_t>(k);
  std::vector<double> pi(ks), log_pi(ks), q(ks), p(ks), onehot(ks), g(ks), dpi(ks), scratch(ks);
  const PosteriorTerms pt(std::max(t, 2), k, schedule);

  DiffusionLoss loss;
  for (std::size_t v = 0; v < n; ++v) {
    softmax_voxel(logits.voxel(v), pi, log_pi);
    const int label = x0.labels[v];
    const double nll = -log_pi[static_cast<std::size_t>(label)];
    loss.aux += nll;
    // d(aux)/dlogits = pi - onehot; d(vb)/dpi accumulates into dpi.
    std::fill(dpi.begin(), dpi.end(), 0.0);
    if (t == 1) {
      loss.vb += nll;
    } else {
      std::fill(onehot.begin(), onehot.end(), 0.0);
      onehot[static_cast<std::size_t>(label)] = 1.0;
      posterior_voxel(pt, x_t.labels[v], onehot, q, scratch);
      posterior_voxel(pt, x_t.labels[v], pi, p, scratch);
      loss.vb += kl_categorical(q, p);
      if (grad) {
        for (std::size_t j = 0; j < ks; ++j) g[j] = (q[j] > 0.0 && p[j] > kProbFloor) ? -q[j] / p[j] : 0.0;
        posterior_voxel_backward(pt, x_t.labels[v], g, dpi);
      }
    }
    if (grad) {
      auto out = grad->voxel(v);
      double dot = 0.0;
      for (std::size_t j = 0; j < ks; ++j) dot += pi[j] * dpi[j];
      const double vb_nll = t == 1 ? 1.0 : 0.0;
      for (std::size_t j = 0; j < ks; ++j) {
        const double target = j == static_cast<std::size_t>(label) ? 1.0 : 0.0;
        out[j] = inv_n * (pi[j] * (dpi[j] - dot) + (w0 + vb_nll) * (pi[j] - target));
      }
    }
  }
  loss.vb *= inv_n;
  loss.aux *= inv_n;
  loss.total = loss.vb + w0 * loss.aux;
  return loss;
}

VoxelGrid reverse_step(const VoxelGrid& x_t, int t, const DenoisingModel& model, const VoxelGrid* condition,
                       const NoiseSchedule& schedule, Rng& rng, ReverseMode mode) {
  check_step(t, 1, schedule);
  const LogitField logits = model.predict(x_t, condition, t);
  if (logits.dims != x_t.dims || logits.num_classes != model.num_classes())
    fail(ErrorKind::DimMismatch, "denoiser output shape does not match x_t");
  CategoricalField x0_dist = softmax(logits);
  if (t == 1) return sample_field(x0_dist, rng);
  if (mode == ReverseMode::SampleX0) x0_dist = one_hot(sample_field(x0_dist, rng), x0_dist.num_classes);
  return sample_field(posterior(x_t, x0_dist, t, schedule), rng);
}

VoxelGrid sample_loop(const DenoisingModel& model, Dims dims, const VoxelGrid* condition,
                      const NoiseSchedule& schedule, Rng& rng, ReverseMode mode) {
  if (condition && condition->dims != dims) fail(ErrorKind::DimMismatch, "condition dims differ from sample dims");
  const int k = model.num_classes();
  VoxelGrid x(dims);
  for (auto& l : x.labels) l = static_cast<std::uint16_t>(rng.below(static_cast<std::uint64_t>(k)));
  for (int t = schedule.steps(); t >= 1; --t) x = reverse_step(x, t, model, condition, schedule, rng, mode);
  return x;
}

}  // namespace scenediff
