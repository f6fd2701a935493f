#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "waterwave/volume.hpp"

namespace waterwave::nn {

/// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode trace of tensor operations.
///
/// Every op records its output value and a closure that maps the output
/// gradient to gradients of its inputs. Nodes are appended in evaluation
/// order, so a reverse sweep visits them topologically. With gradients
/// disabled the tape only carries values (inference).
///
/// Non-smooth ops (ReLU, |.|, bilinear cells, mask gates) fold their discrete
/// decisions into signature(); two evaluations with equal signatures lie on
/// the same smooth piece of the loss.
template <typename Scalar_>
class Tape {
 public:
  using Scalar = Scalar_;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using Tensor = Volume<Scalar>;
  using Backward = std::function<void(Tape&, const Array&)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled), serial_(next_serial()) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::uint64_t serial() const { return serial_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor value) { return push(std::move(value), false, {}); }
  Var leaf(Tensor value) { return push(std::move(value), grad_enabled_, {}); }

  /// Records an op output. The closure is kept only when some parent needs
  /// a gradient.
  Var record(Tensor value, std::initializer_list<Var> parents, Backward backward) {
    bool needs = false;
    if (grad_enabled_)
      for (Var p : parents) needs = needs || nodes_[p.id].requires_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
  }
  Var record(Tensor value, const std::vector<Var>& parents, Backward backward) {
    bool needs = false;
    if (grad_enabled_)
      for (Var p : parents) needs = needs || nodes_[p.id].requires_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
  }

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Shape4& shape(Var v) const { return nodes_[v.id].value.shape(); }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  Scalar scalar(Var v) const { return nodes_[v.id].value.data()[0]; }

  /// Gradient buffer of v, zero-initialized on first use.
  Array& grad_buffer(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.size() == 0) n.grad = Array::Zero(n.value.size());
    return n.grad;
  }

  /// Gradient of the last backward() target w.r.t. v (zeros if none flowed).
  Array grad(Var v) const {
    const Node& n = nodes_[v.id];
    return n.grad.size() ? n.grad : Array::Zero(n.value.size());
  }

  void backward(Var loss) {
    if (!grad_enabled_) throw InvalidArgument("backward on a tape without gradients");
    if (nodes_[loss.id].value.size() != 1) throw ShapeError("backward target must be a scalar");
    grad_buffer(loss)[0] = Scalar(1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
      n.backward(*this, n.grad);
    }
  }

  /// Branch tracking costs a hash per element; it is off outside gradient checks.
  void track_branches(bool on) { track_branches_ = on; }
  bool tracking_branches() const { return track_branches_; }

  void note_branch(std::uint64_t bits) {
    signature_ ^= bits + 0x9e3779b97f4a7c15ULL + (signature_ << 6) + (signature_ >> 2);
  }
  std::uint64_t signature() const { return signature_; }

 private:
  struct Node {
    Tensor value;
    Array grad;
    bool requires_grad = false;
    Backward backward;
  };

  static std::uint64_t next_serial() {
    static std::atomic<std::uint64_t> counter{1};
    return counter++;
  }

  Var push(Tensor value, bool requires_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), Array(), requires_grad, std::move(backward)});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  bool grad_enabled_;
  bool track_branches_ = false;
  std::uint64_t serial_;
  std::uint64_t signature_ = 0xcbf29ce484222325ULL;
  std::vector<Node> nodes_;
};

}  // namespace waterwave::nn
