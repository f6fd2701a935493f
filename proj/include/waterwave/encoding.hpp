#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "waterwave/nn/ops.hpp"
#include "waterwave/nn/params.hpp"

namespace waterwave {

/// Multi-resolution hash grid over the unit cube.
struct HashGridConfig {
  int n_levels = 8;
  int base_resolution = 4;
  double per_level_scale = 1.45;
  int feature_dim = 2;
  Index table_size = Index(1) << 14;
  double init_scale = 1e-4;

  void validate() const {
    if (n_levels < 1) throw InvalidArgument("hash grid needs at least one level");
    if (base_resolution < 1) throw InvalidArgument("base resolution must be >= 1");
    if (!(per_level_scale > 1.0)) throw InvalidArgument("per-level scale must exceed 1");
    if (feature_dim < 1) throw InvalidArgument("feature dimension must be >= 1");
    if (table_size < 1 || (table_size & (table_size - 1)) != 0 || table_size > (Index(1) << 31))
      throw InvalidArgument("table size must be a power of two <= 2^31");
    if (!(init_scale >= 0.0)) throw InvalidArgument("init scale must be >= 0");
  }

  /// Cells per axis at level n.
  Index resolution(int n) const {
    return static_cast<Index>(std::floor(base_resolution * std::pow(per_level_scale, n)));
  }
  /// Vertices per axis at level n.
  Index vertices(int n) const { return resolution(n) + 1; }
  bool dense(int n) const {
    const Index v = vertices(n);
    return v * v * v <= table_size;
  }
  Index embedding_width() const { return Index(n_levels) * feature_dim; }
  Index parameter_count() const { return Index(n_levels) * table_size * feature_dim; }
};

inline constexpr std::uint32_t kHashPrime1 = 1u;
inline constexpr std::uint32_t kHashPrime2 = 2654435761u;
inline constexpr std::uint32_t kHashPrime3 = 805459861u;

/// Per-level grid geometry, precomputed once per encoding pass.
struct LevelGeometry {
  Index resolution = 0;
  Index vertices = 0;
  bool dense = false;
  std::uint32_t mask = 0;

  LevelGeometry() = default;
  LevelGeometry(int level, const HashGridConfig& cfg)
      : resolution(cfg.resolution(level)),
        vertices(cfg.vertices(level)),
        dense(cfg.dense(level)),
        mask(static_cast<std::uint32_t>(cfg.table_size - 1)) {}

  Index slot(Index x, Index y, Index z) const {
    if (dense) return x + vertices * (y + vertices * z);
    const std::uint32_t h = (static_cast<std::uint32_t>(x) * kHashPrime1) ^ (static_cast<std::uint32_t>(y) * kHashPrime2) ^
                            (static_cast<std::uint32_t>(z) * kHashPrime3);
    return static_cast<Index>(h & mask);
  }
};

/// Table slot of integer vertex (x, y, z) at `level`: row-major when the
/// level's vertex grid fits in the table, spatial hash otherwise.
inline Index hash_index(const std::array<Index, 3>& cell, int level, const HashGridConfig& cfg) {
  return LevelGeometry(level, cfg).slot(cell[0], cell[1], cell[2]);
}

/// Coarse-to-fine level weight (1 - cos(pi * clamp(alpha - n, 0, 1))) / 2.
inline double anneal_weight(int level, double alpha) {
  const double x = std::min(std::max(alpha - level, 0.0), 1.0);
  return (1.0 - std::cos(M_PI * x)) / 2.0;
}

/// alpha = N k / s, uncapped.
inline double progress(long iteration, int n_levels, double anneal_steps) {
  if (!(anneal_steps > 0)) throw InvalidArgument("anneal steps must be positive");
  if (iteration < 0) throw InvalidArgument("iteration must be >= 0");
  return static_cast<double>(n_levels) * static_cast<double>(iteration) / anneal_steps;
}

/// Trilinear corners of one point at one level.
struct Corners {
  std::array<Index, 8> slot{};
  std::array<double, 8> weight{};
};

/// Returns false when the coordinate had to be clamped into the unit cube.
inline bool level_corners(const Eigen::Vector3d& coord, const LevelGeometry& geo, Corners& out) {
  const Index res = geo.resolution;
  bool inside = true;
  std::array<Index, 3> base{};
  std::array<double, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    double u = coord[a];
    if (!(u >= 0.0 && u <= 1.0)) {
      inside = false;
      u = std::isfinite(u) ? std::min(std::max(u, 0.0), 1.0) : 0.0;
    }
    const double p = u * static_cast<double>(res);
    base[a] = std::min<Index>(static_cast<Index>(p), res - 1);
    frac[a] = p - static_cast<double>(base[a]);
  }
  for (int k = 0; k < 8; ++k) {
    const int dx = k & 1, dy = (k >> 1) & 1, dz = (k >> 2) & 1;
    out.slot[k] = geo.slot(base[0] + dx, base[1] + dy, base[2] + dz);
    out.weight[k] = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) * (dz ? frac[2] : 1.0 - frac[2]);
  }
  return inside;
}

inline bool level_corners(const Eigen::Vector3d& coord, int level, const HashGridConfig& cfg, Corners& out) {
  return level_corners(coord, LevelGeometry(level, cfg), out);
}

/// Table layout inside a parameter segment: level-major, then slot, then feature.
inline Index table_offset(int level, Index slot, const HashGridConfig& cfg) {
  return (Index(level) * cfg.table_size + slot) * cfg.feature_dim;
}

/// Adds a hash table segment initialized uniformly in [-init_scale, init_scale].
template <typename Scalar>
void add_hash_table(nn::ParamStore<Scalar>& store, const std::string& name, const HashGridConfig& cfg,
                    std::mt19937_64& rng) {
  cfg.validate();
  store.add(name, Shape4{1, cfg.n_levels, cfg.table_size, cfg.feature_dim});
  std::uniform_real_distribution<double> dist(-cfg.init_scale, cfg.init_scale);
  auto v = store.values(name);
  for (Index i = 0; i < v.size(); ++i) v[i] = Scalar(dist(rng));
}

/// Embedding of a single coordinate (levels concatenated in order).
template <typename Derived>
Eigen::VectorXd encode(const Eigen::Vector3d& coord, const Eigen::DenseBase<Derived>& table, const HashGridConfig& cfg,
                       double alpha) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cfg.embedding_width());
  Corners corners;
  for (int n = 0; n < cfg.n_levels; ++n) {
    level_corners(coord, n, cfg, corners);
    const double aw = anneal_weight(n, alpha);
    for (int k = 0; k < 8; ++k)
      for (int d = 0; d < cfg.feature_dim; ++d)
        out[n * cfg.feature_dim + d] +=
            aw * corners.weight[k] * static_cast<double>(table(table_offset(n, corners.slot[k], cfg) + d));
  }
  return out;
}

namespace nn {

/// Batched encoding of 3 x n coordinates into an (1,1,n,N*D) feature batch.
/// Gradients flow to `table` only; coordinates are constants. Returns the
/// number of coordinates clamped into the unit cube through `clamped`.
template <typename Scalar>
Var hash_encode(Tape<Scalar>& tape, Var table, const Eigen::Matrix<double, 3, Eigen::Dynamic>& xyz,
                const HashGridConfig& cfg, double alpha, Index* clamped = nullptr) {
  if (tape.shape(table).size() != cfg.parameter_count())
    throw ShapeError("hash_encode: table has " + std::to_string(tape.shape(table).size()) + " entries, config wants " +
                     std::to_string(cfg.parameter_count()));
  if (cfg.parameter_count() > Index(INT32_MAX)) throw InvalidArgument("hash_encode: table too large for 32-bit slots");
  const Index n = xyz.cols(), L = cfg.n_levels, D = cfg.feature_dim, width = cfg.embedding_width();
  struct Cache {
    std::vector<std::int32_t> slot;  // n x L x 8, table offsets
    std::vector<Scalar> weight;      // matching interpolation x anneal weights
  };
  auto cache = std::make_shared<Cache>();
  const bool keep = tape.grad_enabled() && tape.requires_grad(table);
  if (keep) {
    cache->slot.resize(std::size_t(n * L * 8));
    cache->weight.resize(std::size_t(n * L * 8));
  }
  std::vector<double> level_w(L);
  std::vector<LevelGeometry> geo(L);
  for (int l = 0; l < L; ++l) {
    level_w[l] = anneal_weight(l, alpha);
    geo[l] = LevelGeometry(l, cfg);
  }

  const auto& tv = tape.value(table).data();
  Volume<Scalar> out(nn::batch_shape(n, width));
  Index outside = 0;
#pragma omp parallel for reduction(+ : outside) schedule(static)
  for (Index i = 0; i < n; ++i) {
    Corners corners;
    Scalar* o = out.data().data() + i * width;
    const Eigen::Vector3d p = xyz.col(i);
    for (int l = 0; l < L; ++l) {
      if (level_w[l] == 0.0 && !keep) continue;
      if (!level_corners(p, geo[l], corners) && l == 0) ++outside;
      for (int k = 0; k < 8; ++k) {
        const Index off = table_offset(l, corners.slot[k], cfg);
        const Scalar w = static_cast<Scalar>(level_w[l] * corners.weight[k]);
        for (int d = 0; d < D; ++d) o[l * D + d] += w * tv[off + d];
        if (keep) {
          const std::size_t c = std::size_t((i * L + l) * 8 + k);
          cache->slot[c] = static_cast<std::int32_t>(off);
          cache->weight[c] = w;
        }
      }
    }
  }
  if (clamped) *clamped = outside;
  return tape.record(std::move(out), {table}, [table, cache, n, L, D, width](Tape<Scalar>& t, const auto& g) {
    Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(t.value(table).size());
    for (Index i = 0; i < n; ++i) {
      for (int l = 0; l < L; ++l) {
        const Scalar* gi = g.data() + i * width + l * D;
        for (int k = 0; k < 8; ++k) {
          const std::size_t c = std::size_t((i * L + l) * 8 + k);
          const double w = cache->weight[c];
          if (w == 0) continue;
          const std::int32_t off = cache->slot[c];
          for (int d = 0; d < D; ++d) acc[off + d] += w * static_cast<double>(gi[d]);
        }
      }
    }
    t.grad_buffer(table) += acc.cast<Scalar>();
  });
}

}  // namespace nn
}  // namespace waterwave
