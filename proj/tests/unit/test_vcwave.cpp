#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "unit/test_support.hpp"
#include "waterwave/vcwave.hpp"

using namespace waterwave;

namespace {

double scene(double y, double x) { return 0.5 + 0.2 * std::sin(0.7 * x) * std::cos(0.45 * y) + 0.01 * x; }

// Object translating by `dx` pixels per frame; frame t samples scene(y, x - t dx).
VideoVolume translating(Index T, Index H, Index W, Index C, Index dx) {
  VideoVolume v(Shape4{T, H, W, C});
  for (Index t = 0; t < T; ++t)
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x)
        for (Index c = 0; c < C; ++c) v(t, y, x, c) = scene(double(y), double(x - t * dx)) + 0.05 * double(c);
  return v;
}

std::vector<FlowField> uniform_flows(Index T, Index H, Index W, double dx, double dy) {
  std::vector<FlowField> flows;
  for (Index t = 0; t + 1 < T; ++t) {
    FlowField f = uniform_flow(H, W, dx, dy);
    f.from = t;
    f.to = t + 1;
    flows.push_back(std::move(f));
  }
  return flows;
}

// Direct evaluation of the mask rule with replicated-border 3x3 means.
Volume<double> mask_oracle(const Volume<double>& ht, const Volume<double>& lh, const Volume<double>& hl,
                           const Volume<double>& hh, double b0, double b1) {
  const Index T2 = ht.frames(), H = ht.height(), W = ht.width(), C = ht.channels();
  auto detail = [&](Index t, Index y, Index x) {
    y = std::clamp<Index>(y, 0, H - 1);
    x = std::clamp<Index>(x, 0, W - 1);
    double m = 0;
    for (Index c = 0; c < C; ++c)
      for (const auto* b : {&lh, &hl, &hh}) m = std::max(m, std::abs((*b)(t, y / 2, x / 2, c)));
    return m;
  };
  auto aggregated = [&](Index t, Index y, Index x) {
    double s = 0;
    for (Index dy = -1; dy <= 1; ++dy)
      for (Index dx = -1; dx <= 1; ++dx) s += detail(t, y + dy, x + dx);
    return s / 9.0;
  };
  Volume<double> out(T2, H, W, 1);
  for (Index tau = 0; tau < T2; ++tau)
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x) {
        double h = 0;
        for (Index c = 0; c < C; ++c) h = std::max(h, std::abs(ht(tau, y, x, c)));
        const double s = 0.5 * (aggregated(2 * tau, y, x) + aggregated(2 * tau + 1, y, x));
        out(tau, y, x, 0) = (h > b0 && s < b1) ? 1.0 : 0.0;
      }
  return out;
}

struct MaskInputs {
  Volume<double> ht, lh, hl, hh;
};

MaskInputs random_mask_inputs(std::mt19937_64& rng, Index T2, Index H, Index W, Index C) {
  const Shape4 ts{T2, H, W, C}, ss{2 * T2, H / 2, W / 2, C};
  MaskInputs in{test::random_volume(ts, rng, -0.004, 0.004), test::random_volume(ss, rng, -0.012, 0.012),
                test::random_volume(ss, rng, -0.012, 0.012), test::random_volume(ss, rng, -0.012, 0.012)};
  return in;
}

}  // namespace

TEST_CASE("mask mode names") {
  CHECK(parse_mask_mode("complement") == BasicMaskMode::Complement);
  CHECK(parse_mask_mode("as-written") == BasicMaskMode::AsWritten);
  CHECK(to_string(parse_mask_mode(to_string(BasicMaskMode::AsWritten))) == "as-written");
  CHECK_THROWS_AS(parse_mask_mode("inverse"), InvalidArgument);
  MaskThresholds bad;
  bad.beta0 = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("align_window") {
  SUBCASE("zero flows leave the window unchanged") {
    std::mt19937_64 rng(1);
    const VideoVolume v = test::random_volume(Shape4{6, 8, 10, 3}, rng);
    const auto a = align_window(v, FrameWindow{1, 5, 6}, uniform_flows(6, 8, 10, 0, 0));
    CHECK(a.reference == 4);
    CHECK((a.frames.data() - v.frames_range(1, 5).data()).abs().maxCoeff() < 1e-15);
    CHECK((a.validity.data() == 1.0).all());
  }
  SUBCASE("translation is undone on the valid region") {
    const Index T = 4, H = 12, W = 16;
    const VideoVolume v = translating(T, H, W, 2, 1);
    const auto a = align_window(v, FrameWindow{0, T, T}, uniform_flows(T, H, W, -1.0, 0.0));
    CHECK(a.reference == T - 1);
    for (Index t = 0; t < T; ++t)
      for (Index y = 0; y < H; ++y)
        for (Index x = 0; x < W; ++x) {
          // Frame t is reached by shifting T-1-t pixels left.
          const bool inside = x - (T - 1 - t) >= 0;
          CHECK(a.validity(t, y, x, 0) == (inside ? 1.0 : 0.0));
          if (inside)
            for (Index c = 0; c < 2; ++c) CHECK(std::abs(a.frames(t, y, x, c) - v(T - 1, y, x, c)) < 1e-12);
        }
  }
  SUBCASE("bad windows and missing flows") {
    const VideoVolume v(Shape4{4, 8, 8, 1});
    CHECK_THROWS_AS(align_window(v, FrameWindow{2, 6, 4}, uniform_flows(4, 8, 8, 0, 0)), InvalidArgument);
    CHECK_THROWS_AS(align_window(v, FrameWindow{0, 4, 4}, uniform_flows(2, 8, 8, 0, 0)), InvalidArgument);
  }
}

TEST_CASE("vcwave_decompose") {
  SUBCASE("static video has no temporal detail") {
    std::mt19937_64 rng(2);
    const Frame f = test::random_volume(Shape4{1, 8, 8, 3}, rng);
    VideoVolume v(Shape4{4, 8, 8, 3});
    for (Index t = 0; t < 4; ++t) v.data().segment(t * f.size(), f.size()) = f.data();
    const auto b = vcwave_decompose(v, FrameWindow{0, 4, 4}, uniform_flows(4, 8, 8, 0, 0));
    CHECK(b.bands.temporal.high.shape() == Shape4{2, 8, 8, 3});
    CHECK(b.bands.spatial.lh.shape() == Shape4{4, 4, 4, 3});
    CHECK(b.bands.temporal.high.data().abs().maxCoeff() < 1e-15);
    CHECK((b.temporal_validity.data() == 1.0).all());
  }
  SUBCASE("gain flicker appears as the gain difference times the scene") {
    std::mt19937_64 rng(3);
    const Frame s = test::random_volume(Shape4{1, 6, 6, 1}, rng, 0.2, 0.8);
    const double g[] = {1.0, 1.2, 0.9, 0.85};
    VideoVolume v(Shape4{4, 6, 6, 1});
    for (Index t = 0; t < 4; ++t) v.data().segment(t * s.size(), s.size()) = g[t] * s.data();
    const auto b = vcwave_decompose(v, FrameWindow{0, 4, 4}, uniform_flows(4, 6, 6, 0, 0));
    for (Index tau = 0; tau < 2; ++tau) {
      const auto diff = (g[2 * tau + 1] - g[2 * tau]) * s.data();
      CHECK((b.bands.temporal.high.frame(tau).data() - diff).abs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("moving object with exact flows") {
    const Index T = 4, H = 12, W = 16;
    const VideoVolume v = translating(T, H, W, 1, 2);
    const auto b = vcwave_decompose(v, FrameWindow{0, T, T}, uniform_flows(T, H, W, -2.0, 0.0));
    double worst = 0;
    for (Index i = 0; i < b.temporal_validity.size(); ++i)
      if (b.temporal_validity.data()[i] > 0) worst = std::max(worst, std::abs(b.bands.temporal.high.data()[i]));
    CHECK(worst < 1e-12);
    // Without alignment the same video has large temporal detail.
    const auto raw = vcwave_decompose(v, FrameWindow{0, T, T}, uniform_flows(T, H, W, 0.0, 0.0));
    CHECK(raw.bands.temporal.high.data().abs().maxCoeff() > 0.05);
  }
  SUBCASE("odd window length") {
    const VideoVolume v(Shape4{3, 8, 8, 1});
    CHECK_THROWS_AS(vcwave_decompose(v, FrameWindow{0, 3, 3}, uniform_flows(3, 8, 8, 0, 0)), InvalidArgument);
  }
}

TEST_CASE("inconsistency mask examples") {
  const Shape4 ts{1, 8, 8, 3}, ss{2, 4, 4, 3};
  const Volume<double> zero_s(ss);
  SUBCASE("no temporal detail gives no positives") {
    const auto m = inconsistency_mask(Volume<double>(ts), zero_s, zero_s, zero_s, MaskThresholds{});
    CHECK(m.values.shape() == Shape4{1, 8, 8, 1});
    CHECK(m.coverage() == 0.0);
  }
  SUBCASE("flicker on a flat region is flagged everywhere") {
    const auto m = inconsistency_mask(Volume<double>(ts, 0.1), zero_s, zero_s, zero_s, MaskThresholds{});
    CHECK(m.coverage() == 1.0);
  }
  SUBCASE("strong texture suppresses the mask") {
    const Volume<double> tex(ss, 0.3);
    const auto m = inconsistency_mask(Volume<double>(ts, 0.1), tex, zero_s, zero_s, MaskThresholds{});
    CHECK(m.coverage() == 0.0);
  }
  SUBCASE("grids must agree") {
    CHECK_THROWS_AS(inconsistency_mask(Volume<double>(ts), Volume<double>(Shape4{2, 3, 4, 3}), zero_s, zero_s,
                                       MaskThresholds{}),
                    ShapeError);
  }
}

TEST_CASE("inconsistency mask matches a direct evaluation") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const auto in = random_mask_inputs(rng, 2, 10, 12, 3);
    const MaskThresholds thr{0.002, 0.012};
    const auto m = inconsistency_mask(in.ht, in.lh, in.hl, in.hh, thr);
    const auto ref = mask_oracle(in.ht, in.lh, in.hl, in.hh, thr.beta0, thr.beta1);
    CHECK((m.values.data() == ref.data()).all());
    CHECK(m.coverage() > 0.0);
    CHECK(m.coverage() < 1.0);
  }
}

TEST_CASE("inconsistency mask invariants") {
  std::mt19937_64 rng(5);
  const auto in = random_mask_inputs(rng, 2, 8, 8, 2);
  const MaskThresholds thr{0.002, 0.012};
  const auto base = inconsistency_mask(in.ht, in.lh, in.hl, in.hh, thr).values;

  SUBCASE("sign of the bands does not matter") {
    Volume<double> ht = in.ht, lh = in.lh;
    ht.data() = -ht.data();
    lh.data() = -lh.data();
    CHECK((inconsistency_mask(ht, lh, in.hl, in.hh, thr).values.data() == base.data()).all());
  }
  SUBCASE("scaling bands and thresholds together") {
    for (const double k : {0.5, 4.0}) {
      Volume<double> ht = in.ht, lh = in.lh, hl = in.hl, hh = in.hh;
      for (auto* v : {&ht, &lh, &hl, &hh}) v->data() *= k;
      const auto m = inconsistency_mask(ht, lh, hl, hh, MaskThresholds{k * thr.beta0, k * thr.beta1});
      CHECK((m.values.data() == base.data()).all());
    }
  }
  SUBCASE("monotone in the thresholds") {
    const auto looser = inconsistency_mask(in.ht, in.lh, in.hl, in.hh, MaskThresholds{0.001, 0.02}).values;
    const auto tighter = inconsistency_mask(in.ht, in.lh, in.hl, in.hh, MaskThresholds{0.003, 0.008}).values;
    CHECK((looser.data() >= base.data()).all());
    CHECK((tighter.data() <= base.data()).all());
  }
  SUBCASE("more temporal detail never removes a positive") {
    Volume<double> ht = in.ht;
    ht.data() *= 2.0;
    CHECK((inconsistency_mask(ht, in.lh, in.hl, in.hh, thr).values.data() >= base.data()).all());
  }
}

TEST_CASE("resample_mask") {
  Volume<double> m(2, 4, 4, 1);
  for (Index t = 0; t < 2; ++t)
    for (Index y = 0; y < 4; ++y)
      for (Index x = 0; x < 4; ++x) m(t, y, x, 0) = double(t * 100 + y * 10 + x);
  const auto same = resample_mask(m, Shape4{2, 4, 4, 3});
  CHECK((same.data() == m.data()).all());
  const auto spatial = resample_mask(m, Shape4{4, 2, 2, 3});
  CHECK(spatial.shape() == Shape4{4, 2, 2, 1});
  CHECK(spatial(0, 0, 0, 0) == 0.0);
  CHECK(spatial(1, 1, 1, 0) == 22.0);
  CHECK(spatial(2, 0, 1, 0) == 102.0);
  CHECK(spatial(3, 1, 0, 0) == 120.0);
  CHECK_THROWS_AS(resample_mask(Volume<double>(), Shape4{1, 1, 1, 1}), ShapeError);
}

TEST_CASE("save_mask_pngs") {
  test::TempDir dir("masks");
  InconsistencyMask m{Volume<double>(3, 4, 6, 1), {}, MaskSource::Output};
  m.values(1, 2, 3, 0) = 1.0;
  save_mask_pngs(m, dir / "out");
  for (Index tau = 0; tau < 3; ++tau) {
    char name[32];
    std::snprintf(name, sizeof name, "mask_%05ld.png", static_cast<long>(tau));
    const Frame f = read_image(dir.path() / "out" / name);
    CHECK(f.height() == 4);
    CHECK(f.width() == 6);
    CHECK(f(0, 2, 3, 0) == (tau == 1 ? 1.0 : 0.0));
    CHECK(f(0, 0, 0, 0) == 0.0);
  }
}

TEST_CASE("losses against direct sums") {
  std::mt19937_64 rng(6);
  const Index T2 = 2, H = 8, W = 6, C = 3;
  const Volume<double> ht = test::random_volume(Shape4{T2, H, W, C}, rng, -1, 1);
  InconsistencyMask mask{Volume<double>(T2, H, W, 1), {}, MaskSource::Output};
  Volume<double> validity(T2, H, W, 1);
  std::bernoulli_distribution coin(0.5);
  for (Index i = 0; i < mask.values.size(); ++i) {
    mask.values.data()[i] = coin(rng) ? 1.0 : 0.0;
    validity.data()[i] = coin(rng) ? 1.0 : 0.0;
  }

  SUBCASE("loss_tc") {
    double num = 0, den = 0;
    for (Index t = 0; t < T2; ++t)
      for (Index y = 0; y < H; ++y)
        for (Index x = 0; x < W; ++x)
          for (Index c = 0; c < C; ++c) {
            num += validity(t, y, x, 0) * mask.values(t, y, x, 0) * std::abs(ht(t, y, x, c));
            den += validity(t, y, x, 0);
          }
    CHECK(loss_tc(mask, ht, validity) == doctest::Approx(num / den).epsilon(1e-13));
    double all = 0;
    for (Index i = 0; i < ht.size(); ++i) all += mask.values.data()[i / C] * std::abs(ht.data()[i]);
    CHECK(loss_tc(mask, ht) == doctest::Approx(all / double(ht.size())).epsilon(1e-13));
    CHECK(loss_tc(mask, ht, Volume<double>(T2, H, W, 1)) == 0.0);
  }
  SUBCASE("loss_detail") {
    const Shape4 ss{2 * T2, H / 2, W / 2, C};
    SpatialBands<double> f{test::random_volume(ss, rng), test::random_volume(ss, rng), test::random_volume(ss, rng),
                           test::random_volume(ss, rng)};
    SpatialBands<double> v{test::random_volume(ss, rng), test::random_volume(ss, rng), test::random_volume(ss, rng),
                           test::random_volume(ss, rng)};
    const double expected = ((f.lh.data() - v.lh.data()).abs().sum() + (f.hl.data() - v.hl.data()).abs().sum() +
                             (f.hh.data() - v.hh.data()).abs().sum()) /
                            double(3 * ss.size());
    CHECK(loss_detail(f, v) == doctest::Approx(expected).epsilon(1e-13));
    // LL is not part of the detail loss.
    f.ll.data() += 5.0;
    CHECK(loss_detail(f, v) == doctest::Approx(expected).epsilon(1e-13));
    SpatialBands<double> wrong = v;
    wrong.hh = Volume<double>(Shape4{1, 1, 1, C});
    CHECK_THROWS_AS(loss_detail(f, wrong), ShapeError);
  }
  SUBCASE("loss_basic in both modes") {
    const Shape4 ts{T2, H, W, C}, ss{2 * T2, H / 2, W / 2, C};
    const auto lf = test::random_volume(ts, rng), lv = test::random_volume(ts, rng);
    const auto sf = test::random_volume(ss, rng), sv = test::random_volume(ss, rng);
    for (const auto mode : {BasicMaskMode::AsWritten, BasicMaskMode::Complement}) {
      auto weight = [&](double m) { return mode == BasicMaskMode::Complement ? 1.0 - m : m; };
      double num_t = 0, den_t = 0;
      for (Index t = 0; t < T2; ++t)
        for (Index y = 0; y < H; ++y)
          for (Index x = 0; x < W; ++x)
            for (Index c = 0; c < C; ++c) {
              num_t += validity(t, y, x, 0) * weight(mask.values(t, y, x, 0)) * std::abs(lf(t, y, x, c) - lv(t, y, x, c));
              den_t += validity(t, y, x, 0);
            }
      double num_s = 0;
      for (Index t = 0; t < ss.t; ++t)
        for (Index y = 0; y < ss.h; ++y)
          for (Index x = 0; x < ss.w; ++x)
            for (Index c = 0; c < C; ++c)
              num_s += weight(mask.values(t / 2, 2 * y, 2 * x, 0)) * std::abs(sf(t, y, x, c) - sv(t, y, x, c));
      const double expected = num_t / den_t + num_s / double(ss.size());
      CHECK(loss_basic(lf, lv, sf, sv, mask, mode, &validity) == doctest::Approx(expected).epsilon(1e-13));
    }
    CHECK_THROWS_AS(loss_basic(lf, lv, sv, lf, mask, BasicMaskMode::Complement, nullptr), ShapeError);
  }
}

TEST_CASE("tape losses agree with the plain versions in float") {
  std::mt19937_64 rng(7);
  const Shape4 ts{1, 4, 4, 3};
  const auto ht = test::random_volume(ts, rng, -1, 1);
  InconsistencyMask mask{Volume<double>(1, 4, 4, 1, 1.0), {}, MaskSource::Output};
  mask.values(0, 1, 1, 0) = 0.0;
  nn::Tape<float> tape(false);
  const Volume<float> valid(1, 4, 4, 1, 1.0f);
  const float got = tape.scalar(nn::loss_tc(tape, mask, tape.constant(ht.cast<float>()), valid));
  CHECK(got == doctest::Approx(loss_tc(mask, ht)).epsilon(1e-6));
}
