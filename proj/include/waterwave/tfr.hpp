#pragma once

#include <string>

#include "waterwave/core.hpp"
#include "waterwave/encoding.hpp"
#include "waterwave/flow.hpp"
#include "waterwave/nn/mlp.hpp"

namespace waterwave {

/// Guidance channels per pixel (see transmission_guidance).
inline constexpr Index kGuidanceWidth = 4;

/// Rectification network for the pair (t, t+1): input is the hash embedding
/// of the base-warped coordinate at t+1 followed by the guidance.
inline nn::MlpSpec tfr_mlp_spec(const HashGridConfig& grid, std::vector<Index> hidden = {64, 64}) {
  return nn::MlpSpec{grid.embedding_width() + kGuidanceWidth, std::move(hidden), 2, nn::Head::Linear};
}

/// Normalized (x + dx, y + dy, t + 1) for every pixel of the base flow f_{t+1 -> t}.
inline Eigen::Matrix<double, 3, Eigen::Dynamic> tfr_coords(const FlowField& base, Index t, Index total_frames) {
  const Index H = base.height(), W = base.width();
  Eigen::Matrix<double, 3, Eigen::Dynamic> xyz(3, H * W);
  const double tn = axis_coord(t + 1, total_frames);
  const double sx = W > 1 ? 1.0 / double(W - 1) : 0.0, sy = H > 1 ? 1.0 / double(H - 1) : 0.0;
  for (Index y = 0; y < H; ++y)
    for (Index x = 0; x < W; ++x) {
      xyz(0, y * W + x) = (double(x) + base.dx(y, x)) * sx;
      xyz(1, y * W + x) = (double(y) + base.dy(y, x)) * sy;
      xyz(2, y * W + x) = tn;
    }
  return xyz;
}

namespace nn {

/// Rectified flow = base + MLP(concat(encode(coords), guidance)), returned as
/// a 1 x H x W x 2 variable. With a zero-initialized output layer the result
/// equals the base flow exactly.
template <typename Scalar>
Var rectify_flow(Tape<Scalar>& tape, const FlowField& base, Index t, Index total_frames, const Volume<double>& guidance,
                 Var table, const HashGridConfig& grid, double alpha, ParamStore<Scalar>& store,
                 const std::string& prefix, const MlpSpec& spec, Index* clamped = nullptr) {
  const Index H = base.height(), W = base.width();
  if (guidance.shape() != Shape4{1, H, W, kGuidanceWidth})
    throw ShapeError("rectify_flow: guidance " + guidance.shape().str() + " does not match the flow");
  if (spec.input != grid.embedding_width() + kGuidanceWidth)
    throw ShapeError("rectify_flow: MLP input width " + std::to_string(spec.input) + " != embedding + guidance");
  Var p = hash_encode(tape, table, tfr_coords(base, t, total_frames), grid, alpha, clamped);
  Var sigma = tape.constant(guidance.cast<Scalar>().reshaped(batch_shape(H * W, kGuidanceWidth)));
  Var residual = mlp_forward(tape, spec, store, prefix, concat_features(tape, p, sigma));
  residual = reshape(tape, residual, Shape4{1, H, W, 2});
  return add(tape, tape.constant(base.vectors.cast<Scalar>()), residual);
}

}  // namespace nn

/// Value-only form of nn::rectify_flow.
template <typename Scalar>
FlowField rectify_flow(const FlowField& base, Index t, Index total_frames, const Volume<double>& guidance,
                       const HashGridConfig& grid, double alpha, nn::ParamStore<Scalar>& store,
                       const std::string& table_name, const std::string& prefix, const nn::MlpSpec& spec) {
  nn::Tape<Scalar> tape(false);
  nn::Var table = store.bind(tape, table_name);
  nn::Var out = nn::rectify_flow(tape, base, t, total_frames, guidance, table, grid, alpha, store, prefix, spec);
  FlowField flow(base.height(), base.width());
  flow.vectors = tape.value(out).template cast<double>();
  flow.from = base.from;
  flow.to = base.to;
  update_validity(flow);
  return flow;
}

}  // namespace waterwave
