#include "scenediff/checkpoint.hpp"

#include <sstream>

#include "scenediff/bytes.hpp"
#include "scenediff/scene_io.hpp"

namespace scenediff {

namespace {

constexpr char kMagic[4] = {'V', 'X', 'D', 'N'};
constexpr std::uint16_t kVersion = 1;

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    fail(ErrorKind::ConfigMismatch, "checkpoint metadata '" + key + "' is not an integer: " + v);
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    fail(ErrorKind::ConfigMismatch, "checkpoint metadata '" + key + "' is not a number: " + v);
  }
}

std::string fmt_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

const NamedArray& Checkpoint::array(const std::string& name) const {
  for (const NamedArray& a : arrays)
    if (a.name == name) return a;
  fail(ErrorKind::ConfigMismatch, "checkpoint has no array named '" + name + "'");
}

const std::string& Checkpoint::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) fail(ErrorKind::ConfigMismatch, "checkpoint metadata lacks '" + key + "'");
  return it->second;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u16(kVersion);
  std::string meta;
  for (const auto& [k, v] : ckpt.metadata) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      fail(ErrorKind::InvalidArgument, "checkpoint metadata key/value contains a reserved character");
    meta += k + "=" + v + "\n";
  }
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.text(meta);
  w.u32(static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const NamedArray& a : ckpt.arrays) {
    std::size_t n = 1;
    for (std::uint32_t d : a.shape) n *= d;
    if (n != a.data.size()) fail(ErrorKind::DimMismatch, "array '" + a.name + "' shape does not match its data");
    w.u32(static_cast<std::uint32_t>(a.name.size()));
    w.text(a.name);
    w.u32(static_cast<std::uint32_t>(a.shape.size()));
    for (std::uint32_t d : a.shape) w.u32(d);
    for (float x : a.data) w.f32(x);
  }
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4) fail(ErrorKind::Truncated, "checkpoint shorter than its magic");
  auto magic = r.bytes(4);
  for (int i = 0; i < 4; ++i)
    if (magic[static_cast<std::size_t>(i)] != static_cast<std::uint8_t>(kMagic[i]))
      fail(ErrorKind::BadMagic, "not a VXDN checkpoint");
  const std::uint16_t version = r.u16();
  if (version != kVersion) fail(ErrorKind::VersionMismatch, "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  std::istringstream meta(r.text(r.u32()));
  for (std::string line; std::getline(meta, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Truncated, "malformed checkpoint metadata line: " + line);
    ckpt.metadata[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.text(r.u32());
    a.shape.resize(r.u32());
    std::size_t n = 1;
    for (std::uint32_t& d : a.shape) n *= (d = r.u32());
    if (n * 4 > r.remaining()) fail(ErrorKind::Truncated, "checkpoint array '" + a.name + "' is truncated");
    a.data.resize(n);
    for (float& x : a.data) x = r.f32();
    ckpt.arrays.push_back(std::move(a));
  }
  if (r.remaining() != 0) fail(ErrorKind::Truncated, "trailing bytes after checkpoint arrays");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

void append_params(Checkpoint& ckpt, const nn::ParamSet<float>& params, const std::string& prefix) {
  for (std::size_t i = 0; i < params.layout().size(); ++i) {
    const nn::ParamInfo& info = params.layout()[i];
    NamedArray a;
    a.name = prefix + info.name;
    for (int s : info.shape) a.shape.push_back(static_cast<std::uint32_t>(s));
    auto v = params.view(i);
    a.data.assign(v.begin(), v.end());
    ckpt.arrays.push_back(std::move(a));
  }
}

void read_params(const Checkpoint& ckpt, nn::ParamSet<float>& params, const std::string& prefix) {
  for (std::size_t i = 0; i < params.layout().size(); ++i) {
    const nn::ParamInfo& info = params.layout()[i];
    const NamedArray& a = ckpt.array(prefix + info.name);
    std::vector<std::uint32_t> expected;
    for (int s : info.shape) expected.push_back(static_cast<std::uint32_t>(s));
    if (a.shape != expected) fail(ErrorKind::ConfigMismatch, "array '" + a.name + "' has an unexpected shape");
    std::copy(a.data.begin(), a.data.end(), params.view(i).begin());
  }
}

void write_denoiser_config(Checkpoint& ckpt, const DenoiserConfig& c, const std::string& prefix) {
  auto& m = ckpt.metadata;
  m[prefix + "classes"] = std::to_string(c.num_classes);
  m[prefix + "conditioned"] = c.conditioned ? "1" : "0";
  m[prefix + "widths"] =
      std::to_string(c.widths[0]) + "," + std::to_string(c.widths[1]) + "," + std::to_string(c.widths[2]);
  m[prefix + "kernel"] = std::to_string(c.kernel);
  m[prefix + "time_dim"] = std::to_string(c.time_dim);
  m[prefix + "time_hidden"] = std::to_string(c.time_hidden);
}

DenoiserConfig read_denoiser_config(const Checkpoint& ckpt, const std::string& prefix) {
  DenoiserConfig c;
  auto get = [&](const std::string& k) { return to_int(prefix + k, ckpt.meta(prefix + k)); };
  c.num_classes = get("classes");
  c.conditioned = get("conditioned") != 0;
  c.kernel = get("kernel");
  c.time_dim = get("time_dim");
  c.time_hidden = get("time_hidden");
  std::istringstream widths(ckpt.meta(prefix + "widths"));
  std::string part;
  for (int& w : c.widths) {
    if (!std::getline(widths, part, ',')) fail(ErrorKind::ConfigMismatch, "malformed denoiser widths metadata");
    w = to_int(prefix + "widths", part);
  }
  return c;
}

Checkpoint denoiser_checkpoint(const ConvDenoiser<float>& net, const DenoiserMeta& meta) {
  Checkpoint ckpt;
  ckpt.metadata["kind"] = "denoiser";
  ckpt.metadata["schedule"] = to_string(meta.schedule);
  ckpt.metadata["T"] = std::to_string(meta.steps);
  ckpt.metadata["w0"] = fmt_double(meta.w0);
  ckpt.metadata["step"] = std::to_string(meta.train_steps);
  write_denoiser_config(ckpt, net.config(), "denoiser.");
  append_params(ckpt, net.params(), "denoiser.");
  return ckpt;
}

ConvDenoiser<float> denoiser_from_checkpoint(const Checkpoint& ckpt, const DenoiserConfig* expected,
                                             const std::string& prefix) {
  const DenoiserConfig stored = read_denoiser_config(ckpt, prefix);
  if (expected && !(*expected == stored))
    fail(ErrorKind::ConfigMismatch, "checkpoint denoiser config differs from the requested config");
  ConvDenoiser<float> net(stored);
  read_params(ckpt, net.params(), prefix);
  return net;
}

DenoiserMeta denoiser_meta(const Checkpoint& ckpt) {
  DenoiserMeta m;
  m.schedule = parse_schedule_kind(ckpt.meta("schedule"));
  m.steps = to_int("T", ckpt.meta("T"));
  m.w0 = to_double("w0", ckpt.meta("w0"));
  m.train_steps = std::stol(ckpt.meta("step"));
  return m;
}

}  // namespace scenediff
