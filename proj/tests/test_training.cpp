#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "scenediff/toy_scene.hpp"
#include "scenediff/training.hpp"

using namespace scenediff;

namespace {

DenoiserConfig tiny() {
  DenoiserConfig c;
  c.num_classes = 4;
  c.widths = {8, 8, 8};
  c.time_dim = 8;
  c.time_hidden = 8;
  return c;
}

std::vector<VoxelGrid> scenes(int n, std::uint64_t seed) {
  ToySceneParams p;
  p.dims = {8, 8, 4};
  p.num_classes = 4;
  return generate_toy_dataset(p, n, seed);
}

}  // namespace

TEST(TrainStep, OneSceneLossDecreasesOver200Steps) {
  const auto data = scenes(1, 3);
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 10);
  ConvDenoiser<float> net = ConvDenoiser<float>::init(tiny(), 1);
  const double before = evaluate_loss(net, {data, {}}, s, 0.001, 77, 20).total;
  nn::AdamConfig cfg;
  cfg.learning_rate = 3e-3;
  nn::Adam<float> opt(cfg, net.params().size());
  Rng rng(5);
  for (int i = 0; i < 200; ++i) train_step(net, opt, {data, {}}, s, 0.001, rng);
  const double after = evaluate_loss(net, {data, {}}, s, 0.001, 77, 20).total;
  EXPECT_LT(after, before);
  EXPECT_LT(after, 0.5 * before);
  EXPECT_EQ(opt.steps(), 200);
}

TEST(TrainStep, ZeroLearningRateLeavesParams) {
  const auto data = scenes(2, 4);
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 10);
  ConvDenoiser<float> net = ConvDenoiser<float>::init(tiny(), 1);
  const auto before = net.params().values();
  nn::AdamConfig cfg;
  cfg.learning_rate = 0.0;
  nn::Adam<float> opt(cfg, net.params().size());
  Rng rng(1);
  for (int i = 0; i < 3; ++i) train_step(net, opt, {data, {}}, s, 0.001, rng);
  EXPECT_EQ(net.params().values(), before);
}

TEST(TrainStep, NonFiniteLossAborts) {
  const auto data = scenes(1, 4);
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 10);
  ConvDenoiser<float> net = ConvDenoiser<float>::init(tiny(), 1);
  net.params().view("out.b")[0] = std::numeric_limits<float>::quiet_NaN();
  nn::Adam<float> opt({}, net.params().size());
  Rng rng(1);
  try {
    train_step(net, opt, {data, {}}, s, 0.001, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteLoss);
    EXPECT_NE(std::string(e.what()).find("t="), std::string::npos);
  }
}

TEST(TrainStep, BatchChecks) {
  const auto data = scenes(2, 4);
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 10);
  ConvDenoiser<float> net = ConvDenoiser<float>::init(tiny(), 1);
  nn::Adam<float> opt({}, net.params().size());
  Rng rng(1);
  EXPECT_THROW(train_step(net, opt, {{}, {}}, s, 0.001, rng), Error);
  EXPECT_THROW(train_step(net, opt, {data, data}, s, 0.001, rng), Error);
}

TEST(TrainDiffusion, IdenticalSeedsGiveIdenticalParams) {
  const auto data = scenes(6, 8);
  const NoiseSchedule s = make_schedule(ScheduleKind::Cosine, 10);
  DiffusionTrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 11;
  const auto a = train_diffusion(ConvDenoiser<float>::init(tiny(), 1), data, {}, s, cfg);
  const auto b = train_diffusion(ConvDenoiser<float>::init(tiny(), 1), data, {}, s, cfg);
  EXPECT_EQ(a.net.params().values(), b.net.params().values());
  EXPECT_EQ(a.steps, 4);
  ASSERT_EQ(a.epoch_losses.size(), 2u);
  cfg.seed = 12;
  const auto c = train_diffusion(ConvDenoiser<float>::init(tiny(), 1), data, {}, s, cfg);
  EXPECT_NE(a.net.params().values(), c.net.params().values());
}

TEST(TrainDiffusion, CallbackSeesEveryEpoch) {
  const auto data = scenes(2, 8);
  DiffusionTrainConfig cfg;
  cfg.epochs = 3;
  std::vector<int> seen;
  train_diffusion(ConvDenoiser<float>::init(tiny(), 1), data, {}, make_schedule(ScheduleKind::Linear, 5), cfg,
                  [&](int e, const LossRecord& r) {
                    seen.push_back(e);
                    EXPECT_TRUE(std::isfinite(r.total));
                  });
  EXPECT_EQ(seen, (std::vector<int>{1, 2, 3}));
}
