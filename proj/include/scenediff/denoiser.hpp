#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "scenediff/diffusion.hpp"
#include "scenediff/nn.hpp"
#include "scenediff/voxel.hpp"

namespace scenediff {

/// Three-stage 3D conv encoder-decoder predicting x0 logits from x_t
/// (optionally concatenated with an occupancy channel) and the step t.
struct DenoiserConfig {
  int num_classes = 5;
  bool conditioned = false;
  std::array<int, 3> widths{32, 64, 32};
  int kernel = 3;
  int time_dim = 16;
  int time_hidden = 32;

  int in_channels() const { return num_classes + (conditioned ? 1 : 0); }
  int time_bias_width() const { return widths[0] + widths[1] + widths[2]; }

  /// Throws InvalidArgument when the configuration is unusable.
  void validate() const;

  bool operator==(const DenoiserConfig&) const = default;
};

/// Sinusoidal embedding: dim/2 sines then dim/2 cosines of t * f_i with
/// f_i = 10000^(-i/(dim/2)).
std::vector<double> time_embedding(int t, int dim);

template <class T>
class ConvDenoiser {
 public:
  /// Activations kept by forward() for the backward pass.
  struct Cache {
    nn::Tensor<T> input;
    std::vector<T> embed, time_pre, time_hidden, time_bias;
    nn::Tensor<T> a1, h1, a2, h2, a3, h3;
  };

  explicit ConvDenoiser(DenoiserConfig config);

  /// Fan-in scaled uniform initialization, deterministic in `seed`.
  static ConvDenoiser init(const DenoiserConfig& config, std::uint64_t seed);

  const DenoiserConfig& config() const { return config_; }
  nn::ParamSet<T>& params() { return params_; }
  const nn::ParamSet<T>& params() const { return params_; }

  nn::Tensor<T> forward(const nn::Tensor<T>& input, int t, Cache* cache = nullptr) const;

  /// Accumulates parameter gradients for `upstream` = dL/dlogits.
  void backward(const Cache& cache, const nn::Tensor<T>& upstream, nn::ParamSet<T>& grads) const;

  /// Convenience form that reruns the forward pass.
  nn::ParamSet<T> backward(const nn::Tensor<T>& input, int t, const nn::Tensor<T>& upstream) const;

  /// One-hot of x_t plus, when conditioned, the binarized condition.
  nn::Tensor<T> make_input(const VoxelGrid& x_t, const VoxelGrid* condition) const;

  template <class U>
  ConvDenoiser<U> cast() const {
    ConvDenoiser<U> out(config_);
    out.params() = params_.template cast<U>();
    return out;
  }

 private:
  DenoiserConfig config_;
  nn::ParamSet<T> params_;
};

/// Build the parameter layout for a config (values zero).
template <class T>
nn::ParamSet<T> denoiser_layout(const DenoiserConfig& config);

/// Channel-major tensor -> voxel-major logits.
template <class T>
LogitField to_logit_field(const nn::Tensor<T>& t);

/// Voxel-major field gradient -> channel-major tensor.
template <class T>
nn::Tensor<T> from_logit_field(const LogitField& f);

/// Adapts a trained network to the sampler interface.
class NetworkDenoiser : public DenoisingModel {
 public:
  explicit NetworkDenoiser(ConvDenoiser<float> net) : net_(std::move(net)) {}

  int num_classes() const override { return net_.config().num_classes; }
  LogitField predict(const VoxelGrid& x_t, const VoxelGrid* condition, int t) const override;

  const ConvDenoiser<float>& network() const { return net_; }

 private:
  ConvDenoiser<float> net_;
};

}  // namespace scenediff
