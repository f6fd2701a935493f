#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "waterwave/pipeline.hpp"

namespace waterwave {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'W', 'W', 'F', '1'};
constexpr std::uint64_t kMaxSegment = std::uint64_t(1) << 32;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(std::string("corrupt checkpoint: truncated ") + what);
  return v;
}

std::string get_string(std::istream& is, std::uint32_t len, const char* what) {
  std::string s(len, '\0');
  if (len && !is.read(s.data(), len)) throw FormatError(std::string("corrupt checkpoint: truncated ") + what);
  return s;
}

nlohmann::json shape_json(const Shape4& s) { return {s.t, s.h, s.w, s.c}; }
Shape4 shape_from(const nlohmann::json& j) {
  return {j.at(0).get<Index>(), j.at(1).get<Index>(), j.at(2).get<Index>(), j.at(3).get<Index>()};
}

}  // namespace

void save_checkpoint(const FieldCheckpoint& ck, const std::filesystem::path& path) {
  nlohmann::json meta;
  meta["config"] = nlohmann::json::parse(config_to_json(ck.config));
  meta["video_shape"] = shape_json(ck.video_shape);
  meta["fit_shape"] = shape_json(ck.fit_shape);
  meta["iteration"] = ck.iteration;
  const std::string blob = meta.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(blob.size()));
  os.write(blob.data(), std::streamsize(blob.size()));
  const auto& segs = ck.params.segments();
  put<std::uint32_t>(os, static_cast<std::uint32_t>(segs.size()));
  for (const auto& s : segs) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.name.size()));
    os.write(s.name.data(), std::streamsize(s.name.size()));
    for (Index d : {s.shape.t, s.shape.h, s.shape.w, s.shape.c}) put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(s.size()));
    const auto v = ck.params.values(s.name);
    os.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(float)));
  }
  if (!os) throw IoError("write failed for " + path.string());
}

FieldCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("corrupt checkpoint: bad magic");
  const auto version = get<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw FormatError("corrupt checkpoint: unsupported version " + std::to_string(version));
  const auto blob_len = get<std::uint32_t>(is, "config length");
  const std::string blob = get_string(is, blob_len, "config");

  FieldCheckpoint ck;
  try {
    const auto meta = nlohmann::json::parse(blob);
    ck.config = config_from_json(meta.at("config").dump());
    ck.video_shape = shape_from(meta.at("video_shape"));
    ck.fit_shape = shape_from(meta.at("fit_shape"));
    ck.iteration = meta.at("iteration").get<long>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint: bad config blob: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("corrupt checkpoint: ") + e.what());
  }

  const auto count = get<std::uint32_t>(is, "segment count");
  if (count > 1024) throw FormatError("corrupt checkpoint: implausible segment count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(is, "segment name");
    if (name_len > 256) throw FormatError("corrupt checkpoint: implausible segment name length");
    const std::string name = get_string(is, name_len, "segment name");
    Shape4 shape;
    shape.t = get<std::uint32_t>(is, "segment shape");
    shape.h = get<std::uint32_t>(is, "segment shape");
    shape.w = get<std::uint32_t>(is, "segment shape");
    shape.c = get<std::uint32_t>(is, "segment shape");
    const auto len = get<std::uint64_t>(is, "segment length");
    if (len > kMaxSegment || static_cast<Index>(len) != shape.size())
      throw FormatError("corrupt checkpoint: segment " + name + " length does not match its shape");
    ck.params.add(name, shape);
    auto v = ck.params.values(name);
    if (len && !is.read(reinterpret_cast<char*>(v.data()), std::streamsize(len * sizeof(float))))
      throw FormatError("corrupt checkpoint: truncated segment " + name);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("corrupt checkpoint: trailing bytes");

  // The stored segments must be exactly what this configuration builds.
  const auto expected = field::init_params(ck.config, ck.video_shape.c);
  if (expected.segments().size() != ck.params.segments().size())
    throw FormatError("corrupt checkpoint: segment set does not match the configuration");
  for (const auto& s : expected.segments())
    if (!ck.params.contains(s.name) || ck.params.segment(s.name).shape != s.shape)
      throw FormatError("corrupt checkpoint: segment " + s.name + " missing or misshapen");
  return ck;
}

}  // namespace waterwave
