#include "scenediff/scene_io.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "scenediff/bytes.hpp"

namespace scenediff {

namespace {

constexpr char kSceneMagic[4] = {'V', 'X', 'S', 'C'};
constexpr std::uint16_t kSceneVersion = 1;
constexpr std::uint16_t kFlagRle = 1;

}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

std::vector<std::uint8_t> encode_scene(const VoxelGrid& grid, const ClassTable& table, SceneEncoding encoding) {
  const int k = table.num_classes();
  if (k > 255) fail(ErrorKind::InvalidArgument, "scene files hold at most 255 classes");
  check_labels(grid, k);

  ByteWriter w;
  for (char c : kSceneMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u16(kSceneVersion);
  w.u16(encoding == SceneEncoding::RunLength ? kFlagRle : 0);
  w.u32(static_cast<std::uint32_t>(grid.dims.x));
  w.u32(static_cast<std::uint32_t>(grid.dims.y));
  w.u32(static_cast<std::uint32_t>(grid.dims.z));
  w.u16(static_cast<std::uint16_t>(k));
  for (const Rgb& c : table.colors())
    for (std::uint8_t ch : c) w.u8(ch);
  for (const std::string& name : table.names()) {
    if (name.size() > 0xffff) fail(ErrorKind::InvalidArgument, "class name too long");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.text(name);
  }

  if (encoding == SceneEncoding::Raw) {
    for (std::uint16_t l : grid.labels) w.u8(static_cast<std::uint8_t>(l));
  } else {
    std::size_t i = 0;
    while (i < grid.labels.size()) {
      std::size_t j = i;
      while (j < grid.labels.size() && grid.labels[j] == grid.labels[i] && j - i < 0xffffffffu) ++j;
      w.u32(static_cast<std::uint32_t>(j - i));
      w.u8(static_cast<std::uint8_t>(grid.labels[i]));
      i = j;
    }
  }
  return std::move(w.buffer());
}

std::pair<VoxelGrid, ClassTable> decode_scene(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4) fail(ErrorKind::Truncated, "scene file shorter than its magic");
  auto magic = r.bytes(4);
  for (int i = 0; i < 4; ++i)
    if (magic[static_cast<std::size_t>(i)] != static_cast<std::uint8_t>(kSceneMagic[i]))
      fail(ErrorKind::BadMagic, "not a VXSC scene file");
  const std::uint16_t version = r.u16();
  if (version != kSceneVersion)
    fail(ErrorKind::VersionMismatch, "unsupported scene version " + std::to_string(version));
  const std::uint16_t flags = r.u16();
  Dims dims;
  dims.x = static_cast<int>(r.u32());
  dims.y = static_cast<int>(r.u32());
  dims.z = static_cast<int>(r.u32());
  const int k = r.u16();
  if (k == 0) fail(ErrorKind::InvalidArgument, "scene declares zero classes");

  std::vector<Rgb> colors(static_cast<std::size_t>(k));
  for (Rgb& c : colors)
    for (std::uint8_t& ch : c) ch = r.u8();
  std::vector<std::string> names(static_cast<std::size_t>(k));
  for (std::string& name : names) name = r.text(r.u16());

  VoxelGrid grid(dims);
  const std::size_t n = dims.volume();
  if (flags & kFlagRle) {
    std::size_t filled = 0;
    while (filled < n) {
      const std::uint32_t count = r.u32();
      const std::uint8_t label = r.u8();
      if (count == 0 || count > n - filled) fail(ErrorKind::Truncated, "run-length payload overruns the grid");
      std::fill_n(grid.labels.begin() + static_cast<std::ptrdiff_t>(filled), count, label);
      filled += count;
    }
  } else {
    auto payload = r.bytes(n);
    std::copy(payload.begin(), payload.end(), grid.labels.begin());
  }
  if (r.remaining() != 0) fail(ErrorKind::Truncated, "trailing bytes after scene payload");
  check_labels(grid, k);
  return {std::move(grid), ClassTable(std::move(names), std::move(colors))};
}

void save_scene(const VoxelGrid& grid, const ClassTable& table, const std::filesystem::path& path,
                SceneEncoding encoding) {
  write_file(path, encode_scene(grid, table, encoding));
}

std::pair<VoxelGrid, ClassTable> load_scene(const std::filesystem::path& path) {
  return decode_scene(read_file(path));
}

std::string ply_string(const VoxelGrid& grid, const ClassTable& table) {
  check_labels(grid, table.num_classes());
  std::ostringstream out;
  out << "ply\nformat ascii 1.0\nelement vertex " << grid.occupied_count() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (int z = 0; z < grid.dims.z; ++z)
    for (int y = 0; y < grid.dims.y; ++y)
      for (int x = 0; x < grid.dims.x; ++x) {
        const std::uint16_t l = grid.at(x, y, z);
        if (l == 0) continue;
        const Rgb& c = table.colors()[l];
        out << x + 0.5 << ' ' << y + 0.5 << ' ' << z + 0.5 << ' ' << int(c[0]) << ' ' << int(c[1]) << ' '
            << int(c[2]) << '\n';
      }
  return out.str();
}

void export_ply(const VoxelGrid& grid, const ClassTable& table, const std::filesystem::path& path) {
  const std::string text = ply_string(grid, table);
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::filesystem::path> export_slices(const VoxelGrid& grid, const ClassTable& table,
                                                 const std::filesystem::path& stem) {
  check_labels(grid, table.num_classes());
  std::vector<std::filesystem::path> paths;
  for (int z = 0; z < grid.dims.z; ++z) {
    ByteWriter w;
    w.text("P6\n" + std::to_string(grid.dims.x) + " " + std::to_string(grid.dims.y) + "\n255\n");
    // Image rows run top to bottom, so flip y to keep +y pointing up.
    for (int y = grid.dims.y - 1; y >= 0; --y)
      for (int x = 0; x < grid.dims.x; ++x) {
        const Rgb& c = table.colors()[grid.at(x, y, z)];
        for (std::uint8_t ch : c) w.u8(ch);
      }
    std::filesystem::path p = stem;
    p += "_z" + std::to_string(z) + ".ppm";
    write_file(p, w.buffer());
    paths.push_back(std::move(p));
  }
  return paths;
}

}  // namespace scenediff
