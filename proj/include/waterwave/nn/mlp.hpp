#pragma once

#include <random>
#include <string>
#include <vector>

#include "waterwave/nn/ops.hpp"
#include "waterwave/nn/params.hpp"

namespace waterwave::nn {

enum class Head { Sigmoid, Linear };

/// Fully connected network: affine + ReLU per hidden layer, then an affine
/// output layer followed by the head activation.
struct MlpSpec {
  Index input = 0;
  std::vector<Index> hidden{64, 64};
  Index output = 0;
  Head head = Head::Sigmoid;

  void validate() const {
    if (input < 1 || output < 1) throw InvalidArgument("MLP widths must be >= 1");
    for (Index h : hidden)
      if (h < 1) throw InvalidArgument("MLP hidden widths must be >= 1");
  }
  Index layers() const { return static_cast<Index>(hidden.size()) + 1; }
  Index layer_in(Index l) const { return l == 0 ? input : hidden[l - 1]; }
  Index layer_out(Index l) const { return l == layers() - 1 ? output : hidden[l]; }
};

inline std::string weight_name(const std::string& prefix, Index l) { return prefix + ".w" + std::to_string(l); }
inline std::string bias_name(const std::string& prefix, Index l) { return prefix + ".b" + std::to_string(l); }

/// Adds the network's segments to `store`: He-uniform hidden weights, zero
/// biases; the output layer is Xavier-uniform, or all zero with `zero_output`.
template <typename Scalar>
void add_mlp(ParamStore<Scalar>& store, const std::string& prefix, const MlpSpec& spec, std::mt19937_64& rng,
             bool zero_output) {
  spec.validate();
  for (Index l = 0; l < spec.layers(); ++l) {
    const Index in = spec.layer_in(l), out = spec.layer_out(l);
    store.add(weight_name(prefix, l), Shape4{1, 1, in, out});
    store.add(bias_name(prefix, l), Shape4{1, 1, 1, out});
    const bool last = l == spec.layers() - 1;
    if (last && zero_output) continue;
    const double bound = last ? std::sqrt(6.0 / double(in + out)) : std::sqrt(6.0 / double(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = store.values(weight_name(prefix, l));
    for (Index i = 0; i < w.size(); ++i) w[i] = Scalar(dist(rng));
  }
}

/// Forward pass on a batch `x` of shape (1,1,n,input); returns (1,1,n,output).
template <typename Scalar>
Var mlp_forward(Tape<Scalar>& tape, const MlpSpec& spec, ParamStore<Scalar>& store, const std::string& prefix, Var x) {
  if (tape.shape(x).c != spec.input)
    throw ShapeError("MLP " + prefix + " expects input width " + std::to_string(spec.input) + ", got " +
                     std::to_string(tape.shape(x).c));
  Var h = x;
  for (Index l = 0; l < spec.layers(); ++l) {
    h = linear(tape, h, store.bind(tape, weight_name(prefix, l)), store.bind(tape, bias_name(prefix, l)));
    if (l + 1 < spec.layers()) {
      h = relu(tape, h);
    } else if (spec.head == Head::Sigmoid) {
      h = sigmoid(tape, h);
    }
  }
  return h;
}

}  // namespace waterwave::nn
