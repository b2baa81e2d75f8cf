#include "scenediff/config.hpp"

#include <charconv>
#include <functional>
#include <map>

#include "scenediff/scene_io.hpp"

namespace scenediff {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  fail(ErrorKind::InvalidArgument, "key '" + key + "': cannot parse '" + value + "' as " + what);
}

template <class I>
I parse_integer(const std::string& key, const std::string& value) {
  I out{};
  const auto r = std::from_chars(value.data(), value.data() + value.size(), out);
  if (r.ec != std::errc() || r.ptr != value.data() + value.size()) bad_value(key, value, "an integer");
  return out;
}

int parse_positive(const std::string& key, const std::string& value) {
  const int v = parse_integer<int>(key, value);
  if (v < 1) fail(ErrorKind::InvalidArgument, "key '" + key + "' must be positive, got " + value);
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    bad_value(key, value, "a number");
  }
  if (used != value.size()) bad_value(key, value, "a number");
  return v;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : value) {
    if (c == 'x' || c == ',' || c == ' ') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

std::array<int, 3> parse_triple(const std::string& key, const std::string& value) {
  const auto parts = split_list(value);
  if (parts.size() != 3) bad_value(key, value, "three integers");
  return {parse_positive(key, parts[0]), parse_positive(key, parts[1]), parse_positive(key, parts[2])};
}

std::string triple(int a, int b, int c, char sep) {
  return std::to_string(a) + sep + std::to_string(b) + sep + std::to_string(c);
}

// Shortest text that parses back to the same double.
std::string real(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"dims",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          const auto t = parse_triple(k, v);
          c.dims = {t[0], t[1], t[2]};
        },
        [](const RunConfig& c) { return triple(c.dims.x, c.dims.y, c.dims.z, 'x'); }}},
      {"classes", {[](RunConfig& c, const std::string& k, const std::string& v) { c.classes = parse_positive(k, v); },
                   [](const RunConfig& c) { return std::to_string(c.classes); }}},
      {"steps", {[](RunConfig& c, const std::string& k, const std::string& v) { c.steps = parse_positive(k, v); },
                 [](const RunConfig& c) { return std::to_string(c.steps); }}},
      {"schedule",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.schedule = parse_schedule_kind(v); },
        [](const RunConfig& c) { return std::string(to_string(c.schedule)); }}},
      {"w0", {[](RunConfig& c, const std::string& k, const std::string& v) { c.w0 = parse_real(k, v); },
              [](const RunConfig& c) { return real(c.w0); }}},
      {"lr", {[](RunConfig& c, const std::string& k, const std::string& v) { c.lr = parse_real(k, v); },
              [](const RunConfig& c) { return real(c.lr); }}},
      {"batch_size",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.batch_size = parse_positive(k, v); },
        [](const RunConfig& c) { return std::to_string(c.batch_size); }}},
      {"epochs", {[](RunConfig& c, const std::string& k, const std::string& v) { c.epochs = parse_integer<int>(k, v); },
                  [](const RunConfig& c) { return std::to_string(c.epochs); }}},
      {"sparsity", {[](RunConfig& c, const std::string& k, const std::string& v) { c.sparsity = parse_real(k, v); },
                    [](const RunConfig& c) { return real(c.sparsity); }}},
      {"denoiser.widths",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.widths = parse_triple(k, v); },
        [](const RunConfig& c) { return triple(c.widths[0], c.widths[1], c.widths[2], ','); }}},
      {"denoiser.kernel",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.kernel = parse_positive(k, v); },
        [](const RunConfig& c) { return std::to_string(c.kernel); }}},
      {"denoiser.time_dim",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.time_dim = parse_positive(k, v); },
        [](const RunConfig& c) { return std::to_string(c.time_dim); }}},
      {"denoiser.time_hidden",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.time_hidden = parse_positive(k, v); },
        [](const RunConfig& c) { return std::to_string(c.time_hidden); }}},
      {"vq.codebook_size",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.vq_codebook_size = parse_positive(k, v); },
        [](const RunConfig& c) { return std::to_string(c.vq_codebook_size); }}},
      {"vq.code_dim",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.vq_code_dim = parse_positive(k, v); },
        [](const RunConfig& c) { return std::to_string(c.vq_code_dim); }}},
      {"vq.stride",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.vq_stride = parse_triple(k, v); },
        [](const RunConfig& c) { return triple(c.vq_stride[0], c.vq_stride[1], c.vq_stride[2], 'x'); }}},
      {"vq.beta_commit",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.vq_beta_commit = parse_real(k, v); },
        [](const RunConfig& c) { return real(c.vq_beta_commit); }}},
      {"vq.hidden", {[](RunConfig& c, const std::string& k, const std::string& v) { c.vq_hidden = parse_positive(k, v); },
                     [](const RunConfig& c) { return std::to_string(c.vq_hidden); }}},
      {"vq.batch_size",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.vq_batch_size = parse_positive(k, v); },
        [](const RunConfig& c) { return std::to_string(c.vq_batch_size); }}},
      {"seed", {[](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_integer<std::uint64_t>(k, v); },
                [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"data", {[](RunConfig& c, const std::string&, const std::string& v) { c.data = v; },
                [](const RunConfig& c) { return c.data; }}},
      {"out", {[](RunConfig& c, const std::string&, const std::string& v) { c.out = v; },
               [](const RunConfig& c) { return c.out; }}},
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& [name, f] : fields())
    if (name == key) return &f;
  return nullptr;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) fail(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
  f->set(*this, key, value);
}

std::string RunConfig::get(const std::string& key) const {
  const Field* f = find_field(key);
  if (!f) fail(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
  return f->get(*this);
}

DenoiserConfig RunConfig::denoiser(bool conditioned) const {
  DenoiserConfig d;
  d.num_classes = classes;
  d.conditioned = conditioned;
  d.widths = widths;
  d.kernel = kernel;
  d.time_dim = time_dim;
  d.time_hidden = time_hidden;
  d.validate();
  return d;
}

VqVaeConfig RunConfig::vqvae() const {
  VqVaeConfig v;
  v.num_classes = classes;
  v.hidden = vq_hidden;
  v.code_dim = vq_code_dim;
  v.codebook_size = vq_codebook_size;
  v.stride = vq_stride;
  v.beta_commit = vq_beta_commit;
  v.validate();
  return v;
}

ParsedConfig parse_run_config(std::string_view text, const std::string& source) {
  ParsedConfig parsed;
  std::map<std::string, int> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    const auto eq = body.find('=');
    if (eq == std::string::npos) fail(ErrorKind::InvalidArgument, where + "expected 'key = value', got '" + body + "'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!find_field(key)) fail(ErrorKind::InvalidArgument, where + "unknown key '" + key + "'");
    if (auto it = seen.find(key); it != seen.end())
      fail(ErrorKind::InvalidArgument,
           where + "duplicate key '" + key + "' (first set on line " + std::to_string(it->second) + ")");
    seen[key] = line_no;
    try {
      parsed.config.set(key, value);
    } catch (const Error& e) {
      fail(e.kind(), where + e.what());
    }
  }
  for (const std::string& key : RunConfig::keys())
    if (!seen.count(key)) parsed.defaulted.push_back(key);
  return parsed;
}

ParsedConfig load_run_config(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  return parse_run_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), path.string());
}

std::string format_run_config(const RunConfig& config) {
  std::string out;
  for (const std::string& key : RunConfig::keys()) out += key + " = " + config.get(key) + "\n";
  return out;
}

RunConfig full_scale_run_config() {
  RunConfig c;
  c.dims = {128, 128, 8};
  c.classes = 11;
  c.steps = 100;
  c.batch_size = 8;
  c.vq_batch_size = 4;
  c.vq_codebook_size = 1100;
  c.vq_code_dim = 11;
  c.vq_stride = {4, 4, 4};
  c.vq_hidden = 32;
  c.widths = {32, 64, 32};
  return c;
}

Dims parse_dims(const std::string& text) {
  const auto t = parse_triple("dims", text);
  return {t[0], t[1], t[2]};
}

}  // namespace scenediff
