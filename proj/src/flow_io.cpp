#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <regex>

#include "waterwave/flow.hpp"

namespace waterwave {

namespace {

static_assert(std::endian::native == std::endian::little, "flow I/O assumes a little-endian host");

constexpr char kMagic[4] = {'P', 'I', 'E', 'H'};
constexpr std::int32_t kMaxDim = 1 << 15;

}  // namespace

void write_flo(const std::filesystem::path& path, const FlowField& flow) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::int32_t w = static_cast<std::int32_t>(flow.width()), h = static_cast<std::int32_t>(flow.height());
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  const Eigen::ArrayXf data = flow.vectors.data().cast<float>();
  out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size() * sizeof(float)));
  if (!out) throw IoError("write failed for " + path.string());
}

FlowField read_flo(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  std::int32_t w = 0, h = 0;
  if (!in.read(magic, 4)) throw FormatError(path.string() + ": truncated header");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(path.string() + ": bad magic, not a .flo file");
  if (!in.read(reinterpret_cast<char*>(&w), 4) || !in.read(reinterpret_cast<char*>(&h), 4))
    throw FormatError(path.string() + ": truncated header");
  if (w < 1 || h < 1 || w > kMaxDim || h > kMaxDim)
    throw FormatError(path.string() + ": implausible dimensions " + std::to_string(w) + "x" + std::to_string(h));
  Eigen::ArrayXf data(Index(w) * h * 2);
  if (!in.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size() * sizeof(float))))
    throw FormatError(path.string() + ": truncated payload");
  FlowField flow(h, w);
  flow.vectors.data() = data.cast<double>();
  update_validity(flow);
  return flow;
}

std::vector<FlowField> load_flow_dir(const std::filesystem::path& directory, Index expected, Index height,
                                     Index width) {
  std::vector<FlowField> flows;
  for (Index i = 0; i < expected; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "flow_%05ld.flo", static_cast<long>(i));
    const auto path = directory / name;
    if (!std::filesystem::exists(path)) throw SequenceGapError("missing flow file " + path.string());
    flows.push_back(read_flo(path));
    if (flows.back().height() != height || flows.back().width() != width)
      throw ShapeError(path.string() + " does not match the video frame size");
    flows.back().from = i;
    flows.back().to = i + 1;
  }
  return flows;
}

void save_flow_dir(const std::vector<FlowField>& flows, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  for (std::size_t i = 0; i < flows.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "flow_%05zu.flo", i);
    write_flo(directory / name, flows[i]);
  }
}

}  // namespace waterwave
