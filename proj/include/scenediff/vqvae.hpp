#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "scenediff/checkpoint.hpp"
#include "scenediff/nn.hpp"
#include "scenediff/voxel.hpp"

namespace scenediff {

struct VqVaeConfig {
  int num_classes = 5;
  int hidden = 16;
  int code_dim = 8;
  int codebook_size = 64;
  /// Total downsampling per axis (x, y, z); each a power of two.
  std::array<int, 3> stride{4, 4, 2};
  double beta_commit = 0.25;

  void validate() const;
  /// Per-stage strides: each stage halves every axis that still needs it.
  std::vector<std::array<int, 3>> stage_strides() const;
  /// Latent dims for an input; throws DimMismatch when not divisible.
  Dims latent_dims(Dims input) const;
  Dims voxel_dims(Dims latent) const;

  bool operator==(const VqVaeConfig&) const = default;
};

/// Full-size profile: N = 1100, d = 11, 128x128x8 -> 32x32x2.
VqVaeConfig full_scale_vqvae_config();

/// Latent vectors, channel-major with `channels` = code dimension.
template <class T>
using LatentGrid = nn::Tensor<T>;

struct IndexGrid {
  Dims dims;
  std::vector<std::uint16_t> indices;

  bool operator==(const IndexGrid&) const = default;
};

VoxelGrid as_voxel_grid(const IndexGrid& idx);
IndexGrid as_index_grid(const VoxelGrid& grid, int codebook_size);

template <class T>
struct Codebook {
  int size = 0;
  int dim = 0;
  std::vector<T> codes;  // [size][dim]
  std::vector<std::uint64_t> usage;

  Codebook() = default;
  Codebook(int n, int d) : size(n), dim(d), codes(static_cast<std::size_t>(n) * d, T(0)), usage(static_cast<std::size_t>(n), 0) {}

  std::span<T> code(int i) { return {codes.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)}; }
  std::span<const T> code(int i) const {
    return {codes.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
  /// Codes with usage below `threshold`.
  int dead_count(std::uint64_t threshold) const;
};

/// Uniform init in [-1/N, 1/N].
template <class T>
Codebook<T> init_codebook(int size, int dim, Rng& rng);

/// Index of the nearest code to `v` (squared L2; ties -> lowest index).
template <class T>
int nearest_code(const Codebook<T>& codebook, std::span<const T> v);

/// Snaps every latent vector to its nearest code.
template <class T>
std::pair<LatentGrid<T>, IndexGrid> quantize(const Codebook<T>& codebook, const LatentGrid<T>& z);

/// Codes looked up by index.
template <class T>
LatentGrid<T> lookup(const Codebook<T>& codebook, const IndexGrid& idx);

struct VqLoss {
  double total = 0.0;
  double recon = 0.0;
  double codebook = 0.0;
  double commit = 0.0;
};

template <class T>
struct VqLossGrads {
  nn::Tensor<T> logits;  // d loss / d recon_logits
  nn::Tensor<T> z;       // commitment gradient, z_q held constant
  nn::Tensor<T> z_q;     // codebook gradient, z held constant
};

/// recon: voxel-mean weighted cross-entropy -w_x log softmax(logits)_x.
/// codebook: position-mean |sg(z) - z_q|^2. commit: beta |z - sg(z_q)|^2.
template <class T>
VqLoss vqvae_loss(const VoxelGrid& x, const nn::Tensor<T>& recon_logits, const LatentGrid<T>& z,
                  const LatentGrid<T>& z_q, std::span<const double> class_weights, double beta_commit,
                  VqLossGrads<T>* grads = nullptr);

template <class T>
class VqVae {
 public:
  struct ChainCache {
    std::vector<nn::Tensor<T>> pre;   // pre-activations per layer
    std::vector<nn::Tensor<T>> post;  // layer inputs; post[0] is the chain input
  };

  explicit VqVae(VqVaeConfig config);
  static VqVae init(const VqVaeConfig& config, std::uint64_t seed);

  const VqVaeConfig& config() const { return config_; }
  nn::ParamSet<T>& params() { return params_; }
  const nn::ParamSet<T>& params() const { return params_; }
  Codebook<T>& codebook() { return codebook_; }
  const Codebook<T>& codebook() const { return codebook_; }

  nn::Tensor<T> make_input(const VoxelGrid& x) const;

  LatentGrid<T> encode(const nn::Tensor<T>& x, ChainCache* cache = nullptr) const;
  nn::Tensor<T> decode(const LatentGrid<T>& z_q, ChainCache* cache = nullptr) const;

  /// Accumulate parameter gradients; returns dL/d(chain input) when requested.
  void encode_backward(const ChainCache& cache, const LatentGrid<T>& dz, nn::ParamSet<T>& grads) const;
  LatentGrid<T> decode_backward(const ChainCache& cache, const nn::Tensor<T>& dlogits, nn::ParamSet<T>& grads) const;

  /// Full pass with straight-through gradients. Fills parameter and
  /// codebook gradients (accumulating) and returns the loss terms.
  VqLoss loss_and_grad(const VoxelGrid& x, std::span<const double> class_weights, nn::ParamSet<T>& grads,
                       std::vector<T>& codebook_grads, IndexGrid* indices = nullptr,
                       LatentGrid<T>* latent = nullptr) const;

  /// encode -> quantize -> decode -> argmax.
  VoxelGrid reconstruct(const VoxelGrid& x) const;
  IndexGrid encode_indices(const VoxelGrid& x) const;
  VoxelGrid decode_indices(const IndexGrid& idx) const;

  template <class U>
  VqVae<U> cast() const {
    VqVae<U> out(config_);
    out.params() = params_.template cast<U>();
    Codebook<U> cb(codebook_.size, codebook_.dim);
    for (std::size_t i = 0; i < codebook_.codes.size(); ++i) cb.codes[i] = static_cast<U>(codebook_.codes[i]);
    cb.usage = codebook_.usage;
    out.codebook() = std::move(cb);
    return out;
  }

 private:
  struct Layer {
    std::size_t w, b;  // parameter indices
    int in_ch, out_ch;
    nn::ConvGeom geom;
    bool transposed;
    bool activation;
  };

  nn::Tensor<T> run_chain(const std::vector<Layer>& layers, const nn::Tensor<T>& in, ChainCache* cache,
                          const std::vector<Dims>& out_dims) const;
  nn::Tensor<T> chain_backward(const std::vector<Layer>& layers, const ChainCache& cache, nn::Tensor<T> grad,
                               nn::ParamSet<T>& grads) const;
  std::vector<Dims> decoder_dims(Dims latent) const;

  VqVaeConfig config_;
  nn::ParamSet<T> params_;
  Codebook<T> codebook_;
  std::vector<Layer> encoder_;
  std::vector<Layer> decoder_;
};

/// Resets codes whose usage is below `threshold` to distinct vectors drawn
/// from `recent_latents`, preferring vectors whose current code can spare
/// them. Usage counters of the result are recounted on the buffer.
template <class T>
Codebook<T> reinit_dead_codes(const Codebook<T>& codebook, std::span<const std::vector<T>> recent_latents,
                              std::uint64_t threshold, Rng& rng);

struct VqTrainConfig {
  nn::AdamConfig adam;
  int epochs = 20;
  int batch_size = 4;
  std::uint64_t seed = 0;
  std::uint64_t dead_threshold = 1;
  /// Class weights; empty means inverse-frequency weights of the dataset.
  std::vector<double> class_weights;
};

struct VqEpochReport {
  int epoch = 0;
  VqLoss loss;
  MetricsReport recon;
  int dead_codes = 0;
};

struct VqTrainResult {
  VqVae<float> model;
  std::vector<VqEpochReport> epochs;
};

VqTrainResult train_vqvae(std::span<const VoxelGrid> dataset, const VqVaeConfig& config, const VqTrainConfig& train,
                          const std::function<void(const VqEpochReport&)>& on_epoch = {});

/// Pooled reconstruction metrics over a dataset.
MetricsReport reconstruction_metrics(const VqVae<float>& model, std::span<const VoxelGrid> dataset);

void write_vqvae_config(Checkpoint& ckpt, const VqVaeConfig& config, const std::string& prefix);
VqVaeConfig read_vqvae_config(const Checkpoint& ckpt, const std::string& prefix);
/// Appends config, encoder/decoder parameters and the "codebook" array.
void append_vqvae(Checkpoint& ckpt, const VqVae<float>& model, const std::string& prefix = "vqvae.");
Checkpoint vqvae_checkpoint(const VqVae<float>& model);
VqVae<float> vqvae_from_checkpoint(const Checkpoint& ckpt, const std::string& prefix = "vqvae.");

}  // namespace scenediff
