#include <png.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <regex>

#include "waterwave/core.hpp"

namespace fs = std::filesystem;

namespace waterwave {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Frame read_png(const fs::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw IoError("not a PNG file: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialization failed");
  }
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const Index width = png_get_image_width(png, info);
  const Index height = png_get_image_height(png, info);
  const Index channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * height);
  rows.resize(height);
  for (Index y = 0; y < height; ++y) rows[y] = pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Frame frame(1, height, width, channels);
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x)
      for (Index c = 0; c < channels; ++c) frame(0, y, x, c) = rows[y][x * channels + c] / 255.0;
  return frame;
}

Frame read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  auto token = [&]() {
    std::string tok;
    char ch;
    while (in.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(ch);
    }
    return tok;
  };
  if (token() != "P6") throw IoError("not a binary PPM (P6): " + path.string());
  Index width = 0, height = 0, maxval = 0;
  try {
    width = std::stol(token());
    height = std::stol(token());
    maxval = std::stol(token());
  } catch (const std::exception&) {
    throw IoError("malformed PPM header: " + path.string());
  }
  if (maxval != 255) throw IoError("only maxval 255 PPM supported: " + path.string());
  if (width <= 0 || height <= 0 || width > 65535 || height > 65535)
    throw IoError("bad PPM dimensions: " + path.string());
  std::vector<unsigned char> bytes(static_cast<std::size_t>(width * height * 3));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw IoError("truncated PPM: " + path.string());
  Frame frame(1, height, width, 3);
  for (Index i = 0; i < frame.size(); ++i) frame.data()[i] = bytes[i] / 255.0;
  return frame;
}

}  // namespace

Frame read_image(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".png") return read_png(path);
  if (ext == ".ppm") return read_ppm(path);
  throw IoError("unsupported image type: " + path.string());
}

void write_png(const Frame& image, const fs::path& path) {
  if (image.frames() != 1) throw ShapeError("write_png expects a single frame");
  const Index channels = image.channels();
  if (channels != 1 && channels != 3) throw ShapeError("write_png expects 1 or 3 channels");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialization failed");
  }
  std::vector<png_byte> pixels(static_cast<std::size_t>(image.size()));
  for (Index i = 0; i < image.size(); ++i) pixels[i] = quantize_u8(image.data()[i]);
  std::vector<png_bytep> rows(image.height());
  for (Index y = 0; y < image.height(); ++y) rows[y] = pixels.data() + y * image.width() * channels;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width(), image.height(), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0) throw IoError("failed writing " + path.string());
}

VideoVolume load_frames(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw IoError("not a directory: " + directory.string());
  static const std::regex pattern(R"(frame_(\d{5})\.(png|ppm))");
  std::map<Index, fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, m, pattern)) continue;
    const Index idx = std::stol(m[1].str());
    if (!files.emplace(idx, entry.path()).second)
      throw FormatError("duplicate frame index " + std::to_string(idx) + " in " + directory.string());
  }
  if (files.empty()) throw IoError("no frame_%05d.png/ppm files in " + directory.string());
  Index expected = 0;
  for (const auto& [idx, path] : files) {
    if (idx != expected) throw SequenceGapError("missing frame index " + std::to_string(expected) + " in " + directory.string());
    ++expected;
  }

  VideoVolume video;
  Index t = 0;
  for (const auto& [idx, path] : files) {
    Frame frame = read_image(path);
    if (t == 0) {
      Shape4 s = frame.shape();
      s.t = static_cast<Index>(files.size());
      video = VideoVolume(s);
    } else if (frame.height() != video.height() || frame.width() != video.width() ||
               frame.channels() != video.channels()) {
      throw ShapeError("frame " + path.filename().string() + " has shape " + frame.shape().str() +
                       ", expected " + video.frame(0).shape().str());
    }
    std::copy(frame.data().data(), frame.data().data() + frame.size(), video.frame_data(t));
    ++t;
  }
  return video;
}

void save_frames(const VideoVolume& video, const fs::path& directory) {
  if (video.frames() < 1) throw ShapeError("cannot save an empty video");
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw IoError("cannot create " + directory.string() + ": " + ec.message());
  char name[32];
  for (Index t = 0; t < video.frames(); ++t) {
    std::snprintf(name, sizeof(name), "frame_%05ld.png", static_cast<long>(t));
    write_png(video.frame(t), directory / name);
  }
}

}  // namespace waterwave
