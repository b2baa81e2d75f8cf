#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "scenediff/diffusion.hpp"

using namespace scenediff;

namespace {

// Explicit product Q_1 ... Q_t built from dense single-step matrices.
Matrix explicit_product(const UniformTransition& q, int t) {
  Matrix m = Matrix::identity(q.num_classes());
  for (int s = 1; s <= t; ++s) m = m * q.step_matrix(s);
  return m;
}

Matrix dense_step(int k, double beta) {
  Matrix m(k, beta / k);
  for (int i = 0; i < k; ++i) m(i, i) += 1.0 - beta;
  return m;
}

// q(x_{t-1} | x_t, x0) for a soft x0 by brute-force enumeration of all
// (x0, x_{t-1}) label pairs against explicitly multiplied matrices.
std::vector<double> enumerated_posterior(int k, int x_t, std::span<const double> x0_dist, int t,
                                         const NoiseSchedule& s) {
  Matrix prev = Matrix::identity(k);
  for (int u = 1; u < t; ++u) prev = prev * dense_step(k, s.beta(u));
  const Matrix step = dense_step(k, s.beta(t));
  const Matrix full = prev * step;
  std::vector<double> out(static_cast<std::size_t>(k), 0.0);
  for (int a = 0; a < k; ++a) {
    const double evidence = full(a, x_t);
    if (evidence == 0.0) continue;
    for (int j = 0; j < k; ++j) out[static_cast<std::size_t>(j)] += x0_dist[static_cast<std::size_t>(a)] * prev(a, j) * step(j, x_t) / evidence;
  }
  const double z = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& v : out) v /= z;
  return out;
}

std::vector<double> random_distribution(int k, Rng& rng) {
  std::vector<double> p(static_cast<std::size_t>(k));
  double z = 0;
  for (double& v : p) z += (v = -std::log(1.0 - rng.uniform()));
  for (double& v : p) v /= z;
  return p;
}

CategoricalField field_of(std::span<const double> p) {
  CategoricalField f({1, 1, 1}, static_cast<int>(p.size()));
  std::copy(p.begin(), p.end(), f.values.begin());
  return f;
}

class FixedModel : public DenoisingModel {
 public:
  FixedModel(VoxelGrid target, int k) : target_(std::move(target)), k_(k) {}
  int num_classes() const override { return k_; }
  LogitField predict(const VoxelGrid& x_t, const VoxelGrid*, int) const override {
    LogitField l(x_t.dims, k_, -1e4);
    for (std::size_t v = 0; v < x_t.labels.size(); ++v) l.voxel(v)[target_.labels[v]] = 0.0;
    return l;
  }

 private:
  VoxelGrid target_;
  int k_;
};

// Logits that depend on x_t so different noise gives different outputs.
class EchoModel : public DenoisingModel {
 public:
  explicit EchoModel(int k) : k_(k) {}
  int num_classes() const override { return k_; }
  LogitField predict(const VoxelGrid& x_t, const VoxelGrid*, int t) const override {
    LogitField l(x_t.dims, k_);
    for (std::size_t v = 0; v < x_t.labels.size(); ++v) {
      l.voxel(v)[x_t.labels[v]] = 1.0;
      l.voxel(v)[0] += 0.01 * t;
    }
    return l;
  }

 private:
  int k_;
};

VoxelGrid random_grid(Dims d, int k, Rng& rng) {
  VoxelGrid g(d);
  for (auto& l : g.labels) l = static_cast<std::uint16_t>(rng.below(static_cast<std::uint64_t>(k)));
  return g;
}

}  // namespace

TEST(Schedule, CosineShape) {
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 100);
  EXPECT_GT(s.alpha_bar(1), s.alpha_bar(50));
  EXPECT_GT(s.alpha_bar(50), s.alpha_bar(100));
  EXPECT_LT(s.alpha_bar(100), 1e-3);
  EXPECT_EQ(s.alpha_bar(0), 1.0);
  for (int t = 1; t < 100; ++t) EXPECT_GT(s.alpha_bar(t), s.alpha_bar(t + 1));
}

TEST(Schedule, CosineMatchesFormulaWhereUnclipped) {
  const int T = 100;
  const double off = 0.008;
  auto f = [&](int t) {
    const double c = std::cos((static_cast<double>(t) / T + off) / (1 + off) * std::numbers::pi / 2);
    return c * c;
  };
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, T);
  for (int t = 1; t <= T; ++t) {
    const double beta = 1.0 - f(t) / f(t - 1);
    if (beta < 0.999) {
      EXPECT_NEAR(s.alpha_bar(t), f(t) / f(0), 1e-12) << t;
    }
    EXPECT_LE(s.beta(t), 0.999);
    EXPECT_GT(s.beta(t), 0.0);
  }
}

TEST(Schedule, AlphaBarIsRunningProduct) {
  for (auto kind : {ScheduleKind::Cosine, ScheduleKind::Linear})
    for (int T : {1, 7, 100}) {
      const NoiseSchedule s = make_schedule(kind, T);
      double prod = 1.0;
      for (int t = 1; t <= T; ++t) {
        prod *= 1.0 - s.beta(t);
        EXPECT_NEAR(s.alpha_bar(t), prod, 1e-12);
      }
    }
}

TEST(Schedule, LinearEndpoints) {
  EXPECT_DOUBLE_EQ(make_schedule(ScheduleKind::Linear, 1).beta(1), 1e-4);
  const NoiseSchedule s = make_schedule(ScheduleKind::Linear, 10);
  EXPECT_DOUBLE_EQ(s.beta(1), 1e-4);
  EXPECT_DOUBLE_EQ(s.beta(10), 0.5);
  EXPECT_NEAR(s.beta(2) - s.beta(1), (0.5 - 1e-4) / 9, 1e-15);
}

TEST(Schedule, ZeroStepsRejected) {
  EXPECT_THROW(make_schedule(ScheduleKind::Cosine, 0), Error);
  EXPECT_THROW(NoiseSchedule::from_betas({0.5, 1.5}), Error);
}

TEST(Schedule, ParseKind) {
  EXPECT_EQ(parse_schedule_kind("cosine"), ScheduleKind::Cosine);
  EXPECT_EQ(parse_schedule_kind("linear"), ScheduleKind::Linear);
  EXPECT_EQ(to_string(ScheduleKind::Linear), "linear");
  EXPECT_THROW(parse_schedule_kind("sigmoid"), Error);
}

TEST(Transition, RowsAndColumnsSumToOne) {
  for (auto kind : {ScheduleKind::Cosine, ScheduleKind::Linear})
    for (int k : {2, 5, 16, 64}) {
      const UniformTransition q(k, make_schedule(kind, 100));
      for (int t : {1, 2, 50, 99, 100}) {
        for (const Matrix& m : {q.step_matrix(t), q.cumulative_matrix(t)})
          for (int i = 0; i < k; ++i) {
            double row = 0, col = 0;
            for (int j = 0; j < k; ++j) row += m(i, j), col += m(j, i);
            EXPECT_NEAR(row, 1.0, 1e-12);
            EXPECT_NEAR(col, 1.0, 1e-12);
          }
      }
    }
}

TEST(Transition, ClosedFormMatchesExplicitProduct) {
  for (auto kind : {ScheduleKind::Cosine, ScheduleKind::Linear})
    for (int k : {2, 4, 8, 16}) {
      const UniformTransition q(k, make_schedule(kind, 100));
      Matrix prod = Matrix::identity(k);
      for (int t = 1; t <= 100; ++t) {
        prod = prod * dense_step(k, q.schedule().beta(t));
        const Matrix closed = q.cumulative_matrix(t);
        for (std::size_t i = 0; i < prod.a.size(); ++i) ASSERT_NEAR(closed.a[i], prod.a[i], 1e-10) << k << " " << t;
      }
    }
}

TEST(QMarginal, IdentityAndTotalCorruption) {
  Rng rng(1);
  const VoxelGrid g = random_grid({3, 3, 2}, 5, rng);
  const CategoricalField x0 = one_hot(g, 5);
  const NoiseSchedule keep = NoiseSchedule::from_betas({0.0});
  EXPECT_EQ(q_marginal(x0, 1, keep).values, x0.values);
  const NoiseSchedule wipe = NoiseSchedule::from_betas({1.0});
  for (double v : q_marginal(x0, 1, wipe).values) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(QMarginal, MatchesMatrixProduct) {
  Rng rng(2);
  for (int k : {2, 3, 7, 16}) {
    const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 100);
    const UniformTransition q(k, s);
    const VoxelGrid g = random_grid({4, 2, 1}, k, rng);
    const CategoricalField x0 = one_hot(g, k);
    Matrix prod = Matrix::identity(k);
    for (int t = 1; t <= 100; ++t) {
      prod = prod * q.step_matrix(t);
      const CategoricalField m = q_marginal(x0, t, s);
      for (std::size_t v = 0; v < g.labels.size(); ++v)
        for (int j = 0; j < k; ++j) ASSERT_NEAR(m.voxel(v)[static_cast<std::size_t>(j)], prod(g.labels[v], j), 1e-10);
    }
  }
}

TEST(QMarginal, NearUniformAtFinalStep) {
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 100);
  VoxelGrid g({1, 1, 1});
  for (int k : {2, 5, 11}) {
    const CategoricalField m = q_marginal(one_hot(g, k), 100, s);
    for (double v : m.values) EXPECT_NEAR(v, 1.0 / k, 1e-3);
  }
}

TEST(QMarginal, StepOutOfRange) {
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 10);
  const CategoricalField x0 = one_hot(VoxelGrid({1, 1, 1}), 3);
  EXPECT_THROW(q_marginal(x0, 0, s), Error);
  EXPECT_THROW(q_marginal(x0, 11, s), Error);
  EXPECT_THROW(q_onestep(x0, 0, s), Error);
}

TEST(QOnestep, ZeroBetaIsIdentityAndUniformIsStationary) {
  Rng rng(3);
  const auto p = random_distribution(6, rng);
  const NoiseSchedule s = NoiseSchedule::from_betas({0.0, 0.3});
  EXPECT_EQ(q_onestep(field_of(p), 1, s).values, p);
  const std::vector<double> u(6, 1.0 / 6);
  for (double v : q_onestep(field_of(u), 2, s).values) EXPECT_NEAR(v, 1.0 / 6, 1e-15);
}

TEST(QOnestep, CompositionEqualsMarginal) {
  Rng rng(4);
  for (auto kind : {ScheduleKind::Cosine, ScheduleKind::Linear}) {
    const NoiseSchedule s = make_schedule(kind, 50);
    const VoxelGrid g = random_grid({3, 2, 2}, 6, rng);
    CategoricalField x = one_hot(g, 6);
    for (int t = 1; t <= 50; ++t) {
      x = q_onestep(x, t, s);
      const CategoricalField m = q_marginal(one_hot(g, 6), t, s);
      for (std::size_t i = 0; i < x.values.size(); ++i) ASSERT_NEAR(x.values[i], m.values[i], 1e-10);
    }
  }
}

TEST(SampleField, OneHotIsDeterministic) {
  Rng rng(5), draw(6);
  const VoxelGrid g = random_grid({4, 4, 2}, 5, rng);
  EXPECT_EQ(sample_field(one_hot(g, 5), draw), g);
}

TEST(SampleField, SameSeedSameGrid) {
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 10);
  const CategoricalField f = q_marginal(one_hot(VoxelGrid({5, 5, 2}), 4), 7, s);
  Rng a(9), b(9);
  EXPECT_EQ(sample_field(f, a), sample_field(f, b));
}

TEST(SampleField, MonteCarloFrequencies) {
  const std::vector<double> p{0.05, 0.4, 0.25, 0.3};
  CategoricalField f({100000, 1, 1}, 4);
  for (std::size_t v = 0; v < f.voxel_count(); ++v) std::copy(p.begin(), p.end(), f.voxel(v).begin());
  Rng rng(10);
  const VoxelGrid g = sample_field(f, rng);
  std::vector<double> freq(4, 0.0);
  for (auto l : g.labels) freq[l] += 1.0 / 100000;
  double l1 = 0;
  for (int k = 0; k < 4; ++k) l1 += std::abs(freq[static_cast<std::size_t>(k)] - p[static_cast<std::size_t>(k)]);
  EXPECT_LT(l1, 0.01);
}

TEST(ForwardProcess, AncestralCorruptionMatchesMarginal) {
  const int k = 6, T = 20, n = 50000;
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, T);
  VoxelGrid x0({n, 1, 1});
  for (std::size_t v = 0; v < x0.labels.size(); ++v) x0.labels[v] = static_cast<std::uint16_t>(v % 2 ? 2 : 0);
  Rng rng(11);
  VoxelGrid x = x0;
  for (int t = 1; t <= T; ++t) {
    x = sample_field(q_onestep(one_hot(x, k), t, s), rng);
    if (t != 1 && t != T / 2 && t != T) continue;
    const CategoricalField m = q_marginal(one_hot(x0, k), t, s);
    for (int start : {0, 2}) {
      // Separate histograms for the two source classes.
      const std::uint16_t src = start == 0 ? 0 : 2;
      std::vector<double> emp(k, 0.0), want(k, 0.0);
      double cnt = 0;
      for (std::size_t v = 0; v < x.labels.size(); ++v)
        if (x0.labels[v] == src) emp[x.labels[v]] += 1, cnt += 1;
      const std::size_t rep = src == 0 ? 0 : 1;
      double l1 = 0;
      for (int j = 0; j < k; ++j) l1 += std::abs(emp[static_cast<std::size_t>(j)] / cnt - m.voxel(rep)[static_cast<std::size_t>(j)]);
      EXPECT_LT(l1, 0.03) << "t=" << t;
    }
  }
}

TEST(Posterior, MatchesExhaustiveEnumeration) {
  Rng rng(12);
  for (auto kind : {ScheduleKind::Cosine, ScheduleKind::Linear}) {
    const NoiseSchedule s = make_schedule(kind, 20);
    for (int trial = 0; trial < 400; ++trial) {
      const int k = 2 + static_cast<int>(rng.below(5));
      const int t = 2 + static_cast<int>(rng.below(19));
      VoxelGrid x_t({1, 1, 1});
      x_t.labels[0] = static_cast<std::uint16_t>(rng.below(static_cast<std::uint64_t>(k)));
      std::vector<double> x0 = random_distribution(k, rng);
      if (trial % 3 == 0) {
        std::fill(x0.begin(), x0.end(), 0.0);
        x0[rng.below(static_cast<std::uint64_t>(k))] = 1.0;
      }
      const CategoricalField got = posterior(x_t, field_of(x0), t, s);
      const auto want = enumerated_posterior(k, x_t.labels[0], x0, t, s);
      double sum = 0;
      for (int j = 0; j < k; ++j) {
        EXPECT_NEAR(got.values[static_cast<std::size_t>(j)], want[static_cast<std::size_t>(j)], 1e-10);
        sum += got.values[static_cast<std::size_t>(j)];
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(Posterior, DeltaWhenFirstStepKeepsEverything) {
  const NoiseSchedule s = NoiseSchedule::from_betas({0.0, 0.5});
  for (int x0 = 0; x0 < 4; ++x0)
    for (int xt = 0; xt < 4; ++xt) {
      VoxelGrid g({1, 1, 1});
      g.labels[0] = static_cast<std::uint16_t>(xt);
      VoxelGrid src({1, 1, 1});
      src.labels[0] = static_cast<std::uint16_t>(x0);
      const CategoricalField p = posterior(g, one_hot(src, 4), 2, s);
      for (int j = 0; j < 4; ++j) EXPECT_NEAR(p.values[static_cast<std::size_t>(j)], j == x0 ? 1.0 : 0.0, 1e-15);
    }
}

TEST(Posterior, UniformInputWithFullResampling) {
  const NoiseSchedule s = NoiseSchedule::from_betas({0.3, 1.0});
  VoxelGrid g({1, 1, 1});
  g.labels[0] = 2;
  const std::vector<double> u(5, 0.2);
  for (double v : posterior(g, field_of(u), 2, s).values) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(Posterior, RejectsFirstStep) {
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 5);
  EXPECT_THROW(posterior(VoxelGrid({1, 1, 1}), one_hot(VoxelGrid({1, 1, 1}), 3), 1, s), Error);
}

TEST(Kl, Basics) {
  const std::vector<double> p{0.2, 0.3, 0.5};
  EXPECT_DOUBLE_EQ(kl_categorical(p, p), 0.0);
  const std::vector<double> q{0.0, 1.0, 0.0};
  EXPECT_NEAR(kl_categorical(q, p), -std::log(0.3), 1e-15);
  const std::vector<double> zero{1.0, 0.0, 0.0};
  EXPECT_NEAR(kl_categorical(zero, std::vector<double>{0.0, 0.5, 0.5}), -std::log(kProbFloor), 1e-9);
  EXPECT_THROW(kl_categorical(p, std::vector<double>{0.5, 0.5}), Error);
}

TEST(Kl, ExtendedPrecisionOracle) {
  Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(10));
    const auto q = random_distribution(k, rng);
    const auto p = random_distribution(k, rng);
    long double want = 0;
    for (int i = 0; i < k; ++i) {
      const long double qi = q[static_cast<std::size_t>(i)], pi = p[static_cast<std::size_t>(i)];
      want += qi * (std::log(qi) - std::log(pi));
    }
    const double got = kl_categorical(q, p);
    EXPECT_NEAR(got, static_cast<double>(want), 1e-12);
    EXPECT_GE(got, 0.0);
  }
}

TEST(DiffusionLoss, PerfectPredictionIsZero) {
  Rng rng(14);
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 20);
  const VoxelGrid x0 = random_grid({4, 3, 2}, 5, rng);
  LogitField logits(x0.dims, 5);
  for (std::size_t v = 0; v < x0.labels.size(); ++v)
    for (int k = 0; k < 5; ++k) logits.voxel(v)[static_cast<std::size_t>(k)] = std::log((k == x0.labels[v] ? 1.0 : 0.0) + 1e-12);
  for (int t : {1, 2, 10, 20}) {
    const VoxelGrid x_t = sample_field(q_marginal(one_hot(x0, 5), t, s), rng);
    const DiffusionLoss l = diffusion_loss(x0, t, logits, x_t, 0.001, s);
    EXPECT_LT(l.vb, 1e-6);
    EXPECT_LT(l.aux, 1e-5);
    EXPECT_GE(l.vb, 0.0);
  }
}

TEST(DiffusionLoss, ZeroAuxWeightGivesVbExactly) {
  Rng rng(15);
  const NoiseSchedule s = make_schedule(ScheduleKind::Linear, 10);
  const VoxelGrid x0 = random_grid({3, 3, 1}, 4, rng);
  LogitField logits(x0.dims, 4);
  for (double& v : logits.values) v = rng.uniform(-2, 2);
  for (int t = 1; t <= 10; ++t) {
    const VoxelGrid x_t = sample_field(q_marginal(one_hot(x0, 4), t, s), rng);
    const DiffusionLoss l = diffusion_loss(x0, t, logits, x_t, 0.0, s);
    EXPECT_EQ(l.total, l.vb);
    const DiffusionLoss l2 = diffusion_loss(x0, t, logits, x_t, 0.5, s);
    EXPECT_NEAR(l2.total, l2.vb + 0.5 * l2.aux, 1e-15);
  }
}

TEST(DiffusionLoss, AlwaysNonNegative) {
  Rng rng(16);
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 30);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(6));
    const VoxelGrid x0 = random_grid({2, 2, 2}, k, rng);
    const int t = 1 + static_cast<int>(rng.below(30));
    const VoxelGrid x_t = sample_field(q_marginal(one_hot(x0, k), t, s), rng);
    LogitField logits(x0.dims, k);
    for (double& v : logits.values) v = rng.uniform(-20, 20);
    const DiffusionLoss l = diffusion_loss(x0, t, logits, x_t, 0.01, s);
    EXPECT_GE(l.vb, 0.0);
    EXPECT_GE(l.aux, 0.0);
    EXPECT_GE(l.total, 0.0);
  }
}

TEST(DiffusionLoss, VbMatchesHandAssembly) {
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 10);
  VoxelGrid x0({1, 1, 1}), x_t({1, 1, 1});
  x0.labels[0] = 1;
  x_t.labels[0] = 3;
  LogitField logits({1, 1, 1}, 4);
  logits.values = {0.3, -1.2, 0.8, 0.1};
  const CategoricalField pred = softmax(logits);
  const CategoricalField q = posterior(x_t, one_hot(x0, 4), 5, s);
  const CategoricalField p = posterior(x_t, pred, 5, s);
  const double want = kl_categorical(q.values, p.values);
  const DiffusionLoss l = diffusion_loss(x0, 5, logits, x_t, 0.1, s);
  EXPECT_NEAR(l.vb, want, 1e-14);
  EXPECT_NEAR(l.aux, -std::log(pred.values[1]), 1e-14);
  const DiffusionLoss l1 = diffusion_loss(x0, 1, logits, x_t, 0.1, s);
  EXPECT_NEAR(l1.vb, -std::log(pred.values[1]), 1e-14);
}

TEST(DiffusionLoss, GradientMatchesFiniteDifferences) {
  Rng rng(17);
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 10);
  for (int t : {1, 2, 6, 10}) {
    const VoxelGrid x0 = random_grid({2, 2, 1}, 4, rng);
    const VoxelGrid x_t = sample_field(q_marginal(one_hot(x0, 4), t, s), rng);
    LogitField logits(x0.dims, 4);
    for (double& v : logits.values) v = rng.uniform(-2, 2);
    LogitField grad;
    diffusion_loss(x0, t, logits, x_t, 0.3, s, &grad);
    for (std::size_t i = 0; i < logits.values.size(); ++i) {
      LogitField lp = logits, lm = logits;
      lp.values[i] += 1e-5;
      lm.values[i] -= 1e-5;
      const double fd = (diffusion_loss(x0, t, lp, x_t, 0.3, s).total - diffusion_loss(x0, t, lm, x_t, 0.3, s).total) / 2e-5;
      EXPECT_NEAR(grad.values[i], fd, 1e-7 + 1e-5 * std::abs(fd)) << "t=" << t << " i=" << i;
    }
  }
}

TEST(DiffusionLoss, StepOutOfRange) {
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 5);
  const VoxelGrid g({1, 1, 1});
  EXPECT_THROW(diffusion_loss(g, 0, LogitField({1, 1, 1}, 2), g, 0.0, s), Error);
  EXPECT_THROW(diffusion_loss(g, 6, LogitField({1, 1, 1}, 2), g, 0.0, s), Error);
}

TEST(ReverseStep, ShapeAndDeterminism) {
  Rng rng(18);
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 10);
  const EchoModel model(5);
  const VoxelGrid x = random_grid({4, 4, 2}, 5, rng);
  for (int t : {1, 5, 10}) {
    Rng a(3), b(3);
    const VoxelGrid ya = reverse_step(x, t, model, nullptr, s, a);
    EXPECT_EQ(ya.dims, x.dims);
    check_labels(ya, 5);
    EXPECT_EQ(ya, reverse_step(x, t, model, nullptr, s, b));
  }
}

TEST(ReverseStep, FirstStepReturnsPredictedGrid) {
  Rng rng(19);
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 10);
  const VoxelGrid target = random_grid({4, 3, 2}, 4, rng);
  const FixedModel model(target, 4);
  for (int trial = 0; trial < 5; ++trial) {
    const VoxelGrid x1 = random_grid(target.dims, 4, rng);
    EXPECT_EQ(reverse_step(x1, 1, model, nullptr, s, rng), target);
    EXPECT_EQ(reverse_step(x1, 1, model, nullptr, s, rng, ReverseMode::SampleX0), target);
  }
}

TEST(SampleLoop, ValidAndSeedDependent) {
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 8);
  const EchoModel model(4);
  Rng a(1), b(2);
  const VoxelGrid ga = sample_loop(model, {5, 5, 2}, nullptr, s, a);
  const VoxelGrid gb = sample_loop(model, {5, 5, 2}, nullptr, s, b);
  EXPECT_EQ(ga.dims, (Dims{5, 5, 2}));
  check_labels(ga, 4);
  EXPECT_NE(ga, gb);
}

TEST(SampleLoop, SingleStepDegenerateModel) {
  Rng rng(20);
  const VoxelGrid target = random_grid({3, 3, 3}, 6, rng);
  const FixedModel model(target, 6);
  EXPECT_EQ(sample_loop(model, target.dims, nullptr, make_schedule(ScheduleKind::Cosine, 1), rng), target);
  // Longer chains also converge to the prediction since each posterior is
  // built from the same one-hot x0.
  for (auto mode : {ReverseMode::Marginalize, ReverseMode::SampleX0})
    EXPECT_EQ(sample_loop(model, target.dims, nullptr, make_schedule(ScheduleKind::Cosine, 6), rng, mode), target);
}

TEST(SampleLoop, ConditionDimsChecked) {
  const EchoModel model(3);
  Rng rng(1);
  const VoxelGrid cond({2, 2, 2});
  EXPECT_THROW(sample_loop(model, {3, 3, 3}, &cond, make_schedule(ScheduleKind::Cosine, 2), rng), Error);
}
