#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include "doctest.h"
#include "unit/test_support.hpp"
#include "waterwave/core.hpp"

using namespace waterwave;

namespace {

void write_ppm(const std::filesystem::path& path, int w, int h, unsigned char value) {
  std::ofstream os(path, std::ios::binary);
  os << "P6\n" << w << " " << h << "\n255\n";
  for (int i = 0; i < w * h * 3; ++i) os.put(static_cast<char>(value));
}

}  // namespace

TEST_CASE("load_frames reads a single black PNG as zeros") {
  test::TempDir dir("core");
  write_png(Frame(1, 2, 2, 3, 0.0), dir / "frame_00000.png");
  const VideoVolume v = load_frames(dir.path());
  CHECK(v.shape() == Shape4{1, 2, 2, 3});
  CHECK(v.data().abs().maxCoeff() == 0.0);
}

TEST_CASE("load_frames counts frames and maps byte 255 to exactly 1") {
  test::TempDir dir("core");
  for (int t = 0; t < 16; ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05d.png", t);
    write_png(Frame(1, 64, 64, 3, 1.0), dir / name);
  }
  const VideoVolume v = load_frames(dir.path());
  CHECK(v.frames() == 16);
  CHECK(v.height() == 64);
  CHECK((v.data() == 1.0).all());
}

TEST_CASE("load_frames reads binary PPM") {
  test::TempDir dir("core");
  write_ppm(dir / "frame_00000.ppm", 3, 2, 51);
  const VideoVolume v = load_frames(dir.path());
  CHECK(v.shape() == Shape4{1, 2, 3, 3});
  CHECK(v.data().maxCoeff() == doctest::Approx(51.0 / 255.0).epsilon(1e-15));
}

TEST_CASE("load_frames error classes") {
  SUBCASE("gap") {
    test::TempDir dir("core");
    write_png(Frame(1, 4, 4, 3), dir / "frame_00000.png");
    write_png(Frame(1, 4, 4, 3), dir / "frame_00002.png");
    CHECK_THROWS_AS(load_frames(dir.path()), SequenceGapError);
  }
  SUBCASE("mixed resolution") {
    test::TempDir dir("core");
    write_png(Frame(1, 4, 4, 3), dir / "frame_00000.png");
    write_png(Frame(1, 4, 6, 3), dir / "frame_00001.png");
    CHECK_THROWS_AS(load_frames(dir.path()), ShapeError);
  }
  SUBCASE("unreadable") {
    test::TempDir dir("core");
    std::ofstream(dir / "frame_00000.png") << "not an image";
    CHECK_THROWS_AS(load_frames(dir.path()), IoError);
  }
  SUBCASE("empty directory") {
    test::TempDir dir("core");
    CHECK_THROWS_AS(load_frames(dir.path()), DataError);
  }
}

TEST_CASE("save_frames quantizes 0.5 to byte 128") {
  test::TempDir dir("core");
  save_frames(VideoVolume(1, 3, 3, 3, 0.5), dir.path());
  const VideoVolume v = load_frames(dir.path());
  CHECK((v.data() == 128.0 / 255.0).all());
  CHECK(quantize_u8(0.5) == 128);
  CHECK(quantize_u8(-3.0) == 0);
  CHECK(quantize_u8(7.0) == 255);
}

TEST_CASE("save/load roundtrip error is bounded by half a quantization step") {
  // Every byte level, plus values at the edges of each rounding interval.
  VideoVolume v(1, 32, 24, 1);
  for (Index i = 0; i < 256; ++i) {
    v.data()[3 * i] = double(i) / 255.0;
    v.data()[3 * i + 1] = std::max(0.0, (double(i) - 0.4999) / 255.0);
    v.data()[3 * i + 2] = std::min(1.0, (double(i) + 0.4999) / 255.0);
  }
  std::mt19937_64 rng(3);
  const VideoVolume r = test::random_volume(Shape4{3, 17, 9, 3}, rng);
  for (const VideoVolume* src : {static_cast<const VideoVolume*>(&v), &r}) {
    test::TempDir dir("core");
    save_frames(*src, dir.path());
    const VideoVolume back = load_frames(dir.path());
    CHECK((back.data() - src->data()).abs().maxCoeff() <= 1.0 / 510.0 + 1e-15);
  }
}

TEST_CASE("save_frames rejects an empty volume") {
  test::TempDir dir("core");
  CHECK_THROWS_AS(save_frames(VideoVolume(0, 2, 2, 3), dir.path()), ShapeError);
}

TEST_CASE("normalized_coords maps corners, midpoints and windows") {
  SUBCASE("2x2x2 corners") {
    const CoordGrid g = normalized_coords(FrameWindow{0, 2, 2}, 2, 2);
    REQUIRE(g.voxels() == 8);
    for (Index i = 0; i < 8; ++i) {
      const Index t = i / 4, y = (i / 2) % 2, x = i % 2;
      CHECK(g.xyz(0, i) == double(x));
      CHECK(g.xyz(1, i) == double(y));
      CHECK(g.xyz(2, i) == double(t));
    }
  }
  SUBCASE("odd axis midpoint") {
    const CoordGrid g = normalized_coords(FrameWindow{0, 1, 1}, 5, 3);
    CHECK(g.xyz(0, 1) == 0.5);        // x = 1 of 3
    CHECK(g.xyz(1, 2 * 3) == 0.5);    // y = 2 of 5
    CHECK(g.xyz(2, 0) == 0.0);        // single frame maps to 0
  }
  SUBCASE("window uses full-video time normalization") {
    const CoordGrid g = normalized_coords(FrameWindow{4, 8, 16}, 2, 2);
    for (Index t = 0; t < 4; ++t) CHECK(g.xyz(2, t * 4) == double(4 + t) / 15.0);
  }
  SUBCASE("bijection onto its grid") {
    const CoordGrid g = normalized_coords(FrameWindow{0, 3, 3}, 4, 5);
    std::set<std::tuple<double, double, double>> seen;
    for (Index i = 0; i < g.voxels(); ++i) {
      const Index x = std::lround(g.xyz(0, i) * 4), y = std::lround(g.xyz(1, i) * 3), t = std::lround(g.xyz(2, i) * 2);
      CHECK(i == (t * 4 + y) * 5 + x);
      seen.emplace(g.xyz(0, i), g.xyz(1, i), g.xyz(2, i));
    }
    CHECK(seen.size() == std::size_t(g.voxels()));
  }
  SUBCASE("window outside the video") {
    CHECK_THROWS_AS(normalized_coords(FrameWindow{14, 18, 16}, 2, 2), InvalidArgument);
    CHECK_THROWS_AS(normalized_coords(FrameWindow{3, 3, 16}, 2, 2), InvalidArgument);
  }
}

TEST_CASE("psnr") {
  const VideoVolume zero(2, 4, 4, 3, 0.0);
  CHECK(std::isinf(psnr(zero, zero)));
  CHECK(psnr(zero, VideoVolume(2, 4, 4, 3, 0.1)) == doctest::Approx(10.0 * std::log10(1.0 / 0.01)).epsilon(1e-12));
  CHECK(psnr(zero, VideoVolume(2, 4, 4, 3, 1.0)) == 0.0);
  std::mt19937_64 rng(5);
  const auto a = test::random_volume(Shape4{2, 4, 4, 3}, rng), b = test::random_volume(Shape4{2, 4, 4, 3}, rng);
  CHECK(psnr(a, b) == psnr(b, a));
  CHECK_THROWS_AS(psnr(zero, VideoVolume(2, 4, 4, 1)), ShapeError);
}

TEST_CASE("validate_video enforces the volume invariants") {
  CHECK_NOTHROW(validate_video(VideoVolume(1, 2, 2, 3, 0.5)));
  CHECK_THROWS(validate_video(VideoVolume(1, 1, 2, 3)));
  CHECK_THROWS(validate_video(VideoVolume(1, 2, 2, 2)));
  CHECK_THROWS(validate_video(VideoVolume(1, 2, 2, 1, 1.5)));
  VideoVolume nan(1, 2, 2, 1);
  nan.data()[0] = std::nan("");
  CHECK_THROWS(validate_video(nan));
}
