#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "unit/test_support.hpp"
#include "waterwave/wavelet.hpp"

using namespace waterwave;

namespace {

Signal<double> sig(std::initializer_list<double> v) {
  Signal<double> s(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) s[i++] = x;
  return s;
}

// Midpoint-rule integral of F(t) * 2^{j/2} psi(2^j t - k) over [0,1], with F
// piecewise constant on the sample grid. Oversampling makes every
// quadrature node fall strictly inside one sample cell and one half of psi.
double brute_force_coefficient(const std::vector<double>& samples, int j, long k) {
  const std::size_t n = samples.size(), nodes = n * 16;
  double acc = 0.0;
  for (std::size_t q = 0; q < nodes; ++q) {
    const double t = (double(q) + 0.5) / double(nodes);
    const double u = std::exp2(j) * t - double(k);
    const double psi = (u >= 0.0 && u < 0.5) ? 1.0 : ((u >= 0.5 && u < 1.0) ? -1.0 : 0.0);
    acc += samples[std::size_t(t * double(n))] * psi;
  }
  return std::exp2(0.5 * j) * acc / double(nodes);
}

}  // namespace

TEST_CASE("lift_split separates parity") {
  const auto s = lift_split(sig({1, 2, 3, 4}));
  CHECK((s.even == sig({1, 3})).all());
  CHECK((s.odd == sig({2, 4})).all());
  const auto t = lift_split(sig({1, 1}));
  CHECK(t.even[0] == 1.0);
  CHECK(t.odd[0] == 1.0);
  CHECK_THROWS_AS(lift_split(sig({1, 2, 3, 4, 5})), ShapeError);
  CHECK_THROWS_AS(lift_split(sig({1})), ShapeError);
}

TEST_CASE("Haar lifting forward and inverse on hand examples") {
  auto a = lift_forward(sig({5, 5}));
  CHECK(a.low[0] == 5.0);
  CHECK(a.high[0] == 0.0);
  auto b = lift_forward(sig({1, 3}));
  CHECK(b.low[0] == 2.0);
  CHECK(b.high[0] == 2.0);
  auto c = lift_forward(sig({1, 3, 5, 9}));
  CHECK((c.low == sig({2, 7})).all());
  CHECK((c.high == sig({2, 4})).all());
  CHECK((lift_inverse(sig({2}), sig({2})) == sig({1, 3})).all());
  CHECK((lift_inverse(sig({5}), sig({0})) == sig({5, 5})).all());
  CHECK_THROWS_AS(lift_inverse(sig({1, 2}), sig({1})), ShapeError);
}

TEST_CASE("Haar lifting agrees with a direct mean/difference filter bank") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3, 3);
  Signal<double> s(64);
  for (Index i = 0; i < 64; ++i) s[i] = u(rng);
  const auto l = lift_forward(s);
  for (Index i = 0; i < 32; ++i) {
    CHECK(l.low[i] == doctest::Approx(0.5 * (s[2 * i] + s[2 * i + 1])).epsilon(1e-14));
    CHECK(l.high[i] == doctest::Approx(s[2 * i + 1] - s[2 * i]).epsilon(1e-14));
  }
}

TEST_CASE("lifting roundtrip on 1024 random samples and non-Haar filters") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 1);
  Signal<double> s(1024);
  for (Index i = 0; i < s.size(); ++i) s[i] = n(rng);
  const auto h = lift_forward(s);
  CHECK((lift_inverse(h.low, h.high) - s).abs().maxCoeff() < 1e-12);

  LiftingFilters cdf;
  cdf.predict = {0.5, 0.5};
  cdf.update = {0.25, 0.25};
  cdf.name = "cdf53";
  const auto g = lift_forward(s, cdf);
  CHECK((lift_inverse(g.low, g.high, cdf) - s).abs().maxCoeff() < 1e-12);

  LiftingFilters bad;
  bad.predict = {};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad.predict = {std::nan("")};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("dwt_temporal examples") {
  SUBCASE("static video") {
    std::mt19937_64 rng(1);
    const auto frame = test::random_volume(Shape4{1, 3, 4, 3}, rng);
    Volume<double> v(Shape4{4, 3, 4, 3});
    for (Index t = 0; t < 4; ++t) v.data().segment(t * frame.size(), frame.size()) = frame.data();
    const auto b = dwt_temporal(v);
    CHECK(b.high.data().abs().maxCoeff() < 1e-12);
    CHECK(!b.truncated);
  }
  SUBCASE("two frames A, A + delta") {
    Volume<double> v(Shape4{2, 2, 2, 1});
    for (Index i = 0; i < 4; ++i) {
      v.data()[i] = 0.1 * double(i);
      v.data()[4 + i] = 0.1 * double(i) + 0.25;
    }
    const auto b = dwt_temporal(v);
    for (Index i = 0; i < 4; ++i) {
      CHECK(b.high.data()[i] == doctest::Approx(0.25).epsilon(1e-14));
      CHECK(b.low.data()[i] == doctest::Approx(0.1 * double(i) + 0.125).epsilon(1e-14));
    }
  }
  SUBCASE("odd T drops the last frame") {
    std::mt19937_64 rng(4);
    auto v = test::random_volume(Shape4{5, 2, 2, 1}, rng);
    const auto b = dwt_temporal(v);
    CHECK(b.truncated);
    CHECK(b.low.frames() == 2);
    v.data().tail(4).setConstant(100.0);
    const auto c = dwt_temporal(v);
    CHECK((c.low.data() == b.low.data()).all());
  }
  CHECK_THROWS_AS(dwt_temporal(Volume<double>(Shape4{1, 2, 2, 1})), ShapeError);
}

TEST_CASE("dwt_spatial examples") {
  SUBCASE("constant frame") {
    const auto b = dwt_spatial(Volume<double>(Shape4{2, 6, 4, 3}, 0.7));
    CHECK(b.lh.data().abs().maxCoeff() < 1e-12);
    CHECK(b.hl.data().abs().maxCoeff() < 1e-12);
    CHECK(b.hh.data().abs().maxCoeff() < 1e-12);
    CHECK((b.ll.data() - 0.7).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("alternating columns land in HL") {
    Volume<double> v(Shape4{1, 4, 4, 1});
    for (Index y = 0; y < 4; ++y)
      for (Index x = 0; x < 4; ++x) v(0, y, x, 0) = (x % 2 == 0) ? 1.0 : 3.0;
    const auto b = dwt_spatial(v);
    CHECK((b.hl.data() - 2.0).abs().maxCoeff() < 1e-12);
    CHECK(b.lh.data().abs().maxCoeff() < 1e-12);
    CHECK(b.hh.data().abs().maxCoeff() < 1e-12);
    CHECK((b.ll.data() - 2.0).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("alternating rows land in LH") {
    Volume<double> v(Shape4{1, 4, 4, 1});
    for (Index y = 0; y < 4; ++y)
      for (Index x = 0; x < 4; ++x) v(0, y, x, 0) = (y % 2 == 0) ? 1.0 : 3.0;
    const auto b = dwt_spatial(v);
    CHECK((b.lh.data() - 2.0).abs().maxCoeff() < 1e-12);
    CHECK(b.hl.data().abs().maxCoeff() < 1e-12);
  }
  SUBCASE("odd sizes are truncated") {
    std::mt19937_64 rng(8);
    const auto v = test::random_volume(Shape4{1, 5, 7, 2}, rng);
    const auto b = dwt_spatial(v);
    CHECK(b.truncated_h);
    CHECK(b.truncated_w);
    CHECK(b.ll.shape() == Shape4{1, 2, 3, 2});
  }
  CHECK_THROWS_AS(dwt_spatial(Volume<double>(Shape4{1, 1, 4, 1})), ShapeError);
}

TEST_CASE("perfect reconstruction and linearity on random volumes") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> half(1, 4), halfxy(1, 8), ch(1, 3);
  for (int trial = 0; trial < 30; ++trial) {
    const Shape4 s{2 * half(rng), 2 * halfxy(rng), 2 * halfxy(rng), ch(rng)};
    const auto x = test::random_volume(s, rng, -1, 1), y = test::random_volume(s, rng, -1, 1);
    const auto bt = dwt_temporal(x);
    CHECK((idwt_temporal(bt.low, bt.high).data() - x.data()).abs().maxCoeff() < 1e-12);
    const auto bs = dwt_spatial(x);
    CHECK((idwt_spatial(bs).data() - x.data()).abs().maxCoeff() < 1e-12);

    Volume<double> z(s);
    z.data() = 0.3 * x.data() - 1.7 * y.data();
    const auto bx = dwt(x), by = dwt(y), bz = dwt(z);
    CHECK((bz.temporal.high.data() - (0.3 * bx.temporal.high.data() - 1.7 * by.temporal.high.data())).abs().maxCoeff() <
          1e-12);
    CHECK((bz.spatial.hh.data() - (0.3 * bx.spatial.hh.data() - 1.7 * by.spatial.hh.data())).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("adjoint transforms satisfy <Ax, y> = <x, A^T y>") {
  std::mt19937_64 rng(5);
  const Shape4 s{4, 6, 8, 2};
  const auto x = test::random_volume(s, rng, -1, 1);
  const auto bt = dwt_temporal(x);
  const auto dl = test::random_volume(bt.low.shape(), rng, -1, 1), dh = test::random_volume(bt.high.shape(), rng, -1, 1);
  const double lhs_t = (bt.low.data() * dl.data()).sum() + (bt.high.data() * dh.data()).sum();
  const double rhs_t = (x.data() * dwt_temporal_adjoint(dl, dh, s).data()).sum();
  CHECK(lhs_t == doctest::Approx(rhs_t).epsilon(1e-12));

  const auto bs = dwt_spatial(x);
  const Shape4 q = bs.ll.shape();
  const auto a = test::random_volume(q, rng, -1, 1), b = test::random_volume(q, rng, -1, 1),
             c = test::random_volume(q, rng, -1, 1), d = test::random_volume(q, rng, -1, 1);
  const double lhs_s = (bs.ll.data() * a.data()).sum() + (bs.lh.data() * b.data()).sum() +
                       (bs.hl.data() * c.data()).sum() + (bs.hh.data() * d.data()).sum();
  const double rhs_s = (x.data() * dwt_spatial_adjoint(a, b, c, d, s).data()).sum();
  CHECK(lhs_s == doctest::Approx(rhs_s).epsilon(1e-12));
}

TEST_CASE("haar_coefficient examples") {
  // psi itself on 8 samples.
  const std::vector<double> psi{1, 1, 1, 1, -1, -1, -1, -1};
  CHECK(haar_coefficient(psi, 0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<double> constant(16, 0.4);
  for (int j = 0; j < 4; ++j)
    for (long k = 0; k < (1L << j); ++k) CHECK(std::abs(haar_coefficient(constant, j, k)) < 1e-15);
  // psi(2t) restricted to [0,1/2) has coefficient 1/sqrt(2) at (1,0).
  const std::vector<double> psi2{1, 1, -1, -1, 0, 0, 0, 0};
  CHECK(haar_coefficient(psi2, 1, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(haar_coefficient(psi2, 1, 1) == 0.0);
  CHECK_THROWS_AS(haar_coefficient(psi, 3, 0), InvalidArgument);
  CHECK_THROWS_AS(haar_coefficient(psi, 1, 2), InvalidArgument);
  CHECK_THROWS_AS(haar_coefficient(psi, 0, -1), InvalidArgument);
}

TEST_CASE("haar_coefficient matches brute-force quadrature") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> s(32);
  for (double& v : s) v = u(rng);
  for (int j = 0; j < 5; ++j)
    for (long k = 0; k < (1L << j); ++k)
      CHECK(haar_coefficient(s, j, k) == doctest::Approx(brute_force_coefficient(s, j, k)).epsilon(1e-12));
}

TEST_CASE("cascaded lifting high bands equal scaled Haar coefficients") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  const int m = 6;
  Signal<double> s(1 << m);
  for (Index i = 0; i < s.size(); ++i) s[i] = u(rng);
  const std::vector<double> samples(s.data(), s.data() + s.size());
  const HaarCascade c = haar_cascade(s, m);
  REQUIRE(c.highs.size() == std::size_t(m));
  CHECK(c.low[0] == doctest::Approx(s.mean()).epsilon(1e-14));
  for (int j = 0; j < m; ++j) {
    const Signal<double>& h = c.highs[std::size_t(m - j - 1)];
    REQUIRE(h.size() == (1 << j));
    for (long k = 0; k < (1L << j); ++k) {
      const double oracle = brute_force_coefficient(samples, j, k);
      CHECK(haar_lifting_scale(j) * h[k] == doctest::Approx(oracle).epsilon(1e-12));
    }
  }
}
