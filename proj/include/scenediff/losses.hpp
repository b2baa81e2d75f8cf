#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "scenediff/nn.hpp"
#include "scenediff/voxel.hpp"

namespace scenediff {

/// Voxel-mean of -w_x log softmax(logits)_x. When `grad` is non-null it is
/// overwritten with d loss / d logits.
template <class T>
double weighted_cross_entropy(const VoxelGrid& target, const nn::Tensor<T>& logits, std::span<const double> weights,
                              nn::Tensor<T>* grad = nullptr) {
  if (logits.dims != target.dims) fail(ErrorKind::DimMismatch, "cross-entropy: logits and target dims differ");
  const int k = logits.channels;
  if (static_cast<int>(weights.size()) != k) fail(ErrorKind::DimMismatch, "cross-entropy: weight count differs from K");
  check_labels(target, k);
  const std::size_t n = target.labels.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (grad) *grad = nn::Tensor<T>(k, target.dims);
  std::vector<double> p(static_cast<std::size_t>(k));
  double loss = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    double m = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) m = std::max(m, static_cast<double>(logits.channel(c)[v]));
    double sum = 0.0;
    for (int c = 0; c < k; ++c) sum += (p[static_cast<std::size_t>(c)] = std::exp(logits.channel(c)[v] - m));
    const int label = target.labels[v];
    const double w = weights[static_cast<std::size_t>(label)];
    loss += w * (std::log(sum) + m - static_cast<double>(logits.channel(label)[v]));
    if (grad)
      for (int c = 0; c < k; ++c)
        grad->channel(c)[v] = static_cast<T>(inv_n * w * (p[static_cast<std::size_t>(c)] / sum - (c == label ? 1.0 : 0.0)));
  }
  return loss * inv_n;
}

}  // namespace scenediff
