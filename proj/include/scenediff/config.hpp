#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "scenediff/denoiser.hpp"
#include "scenediff/diffusion.hpp"
#include "scenediff/vqvae.hpp"

namespace scenediff {

/// Settings shared by the command-line tools. Every key has a default; the
/// file format is "key = value" lines with '#' comments.
struct RunConfig {
  Dims dims{16, 16, 4};
  int classes = 5;
  int steps = 20;
  ScheduleKind schedule = ScheduleKind::Cosine;
  double w0 = 0.001;
  double lr = 0.001;
  int batch_size = 4;
  int epochs = 10;
  double sparsity = 0.1;
  std::array<int, 3> widths{16, 32, 16};
  int kernel = 3;
  int time_dim = 16;
  int time_hidden = 32;
  int vq_codebook_size = 64;
  int vq_code_dim = 8;
  std::array<int, 3> vq_stride{4, 4, 2};
  double vq_beta_commit = 0.25;
  int vq_hidden = 16;
  int vq_batch_size = 4;
  std::uint64_t seed = 0;
  std::string data;
  std::string out;

  /// Keys in documentation order.
  static const std::vector<std::string>& keys();
  /// Throws InvalidArgument for an unknown key or unparsable value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  DenoiserConfig denoiser(bool conditioned) const;
  VqVaeConfig vqvae() const;
  NoiseSchedule noise_schedule() const { return make_schedule(schedule, steps); }
};

struct ParsedConfig {
  RunConfig config;
  std::vector<std::string> defaulted;  // keys absent from the file
};

/// Errors name the source, line and key: unknown keys, duplicates, lines
/// without '=', bad values.
ParsedConfig parse_run_config(std::string_view text, const std::string& source = "<config>");
ParsedConfig load_run_config(const std::filesystem::path& path);

/// "key = value" for every key.
std::string format_run_config(const RunConfig& config);

/// 128x128x8 grids, K = 11, T = 100, N = 1100, d = 11, stride 4x4x4.
RunConfig full_scale_run_config();

Dims parse_dims(const std::string& text);

}  // namespace scenediff
