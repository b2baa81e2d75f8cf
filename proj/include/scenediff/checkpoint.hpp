#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "scenediff/denoiser.hpp"

namespace scenediff {

struct NamedArray {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> data;
};

/// Versioned parameter container ("VXDN"). Layout, little-endian:
///   magic[4] version:u16 meta_len:u32 meta (UTF-8 "key=value\n" lines)
///   count:u32, then per array: name_len:u32 name ndim:u32 dims:ndim*u32
///   data:prod(dims)*f32
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<NamedArray> arrays;

  const NamedArray& array(const std::string& name) const;
  const std::string& meta(const std::string& key) const;
  bool has_meta(const std::string& key) const { return metadata.count(key) != 0; }
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameter arrays of a ParamSet, one record per named entry.
void append_params(Checkpoint& ckpt, const nn::ParamSet<float>& params, const std::string& prefix);
/// Fills `params` from records named prefix + name; layout must match.
void read_params(const Checkpoint& ckpt, nn::ParamSet<float>& params, const std::string& prefix);

void write_denoiser_config(Checkpoint& ckpt, const DenoiserConfig& config, const std::string& prefix);
DenoiserConfig read_denoiser_config(const Checkpoint& ckpt, const std::string& prefix);

/// Metadata accompanying a trained denoiser.
struct DenoiserMeta {
  ScheduleKind schedule = ScheduleKind::Cosine;
  int steps = 100;
  double w0 = 0.001;
  long train_steps = 0;
};

Checkpoint denoiser_checkpoint(const ConvDenoiser<float>& net, const DenoiserMeta& meta);

/// Restores a denoiser. When `expected` is given and differs from the
/// stored config, throws ConfigMismatch.
ConvDenoiser<float> denoiser_from_checkpoint(const Checkpoint& ckpt, const DenoiserConfig* expected = nullptr,
                                             const std::string& prefix = "denoiser.");
DenoiserMeta denoiser_meta(const Checkpoint& ckpt);

}  // namespace scenediff
