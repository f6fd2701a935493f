#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "waterwave/nn/tape.hpp"

namespace waterwave::nn {

/// Named flat segments of trainable values with a matching gradient buffer.
template <typename Scalar_>
class ParamStore {
 public:
  using Scalar = Scalar_;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  struct Segment {
    std::string name;
    Index offset = 0;
    Shape4 shape;
    Index size() const { return shape.size(); }
  };

  /// Appends a zero-filled segment. Segment sizes never change afterwards.
  const Segment& add(const std::string& name, const Shape4& shape) {
    if (index_.count(name)) throw InvalidArgument("duplicate parameter segment " + name);
    Segment seg{name, values_.size(), shape};
    Array grown = Array::Zero(values_.size() + shape.size());
    grown.head(values_.size()) = values_;
    values_ = std::move(grown);
    grads_ = Array::Zero(values_.size());
    index_[name] = segments_.size();
    segments_.push_back(seg);
    return segments_.back();
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Segment& segment(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw InvalidArgument("unknown parameter segment " + name);
    return segments_[it->second];
  }
  const std::vector<Segment>& segments() const { return segments_; }

  Array& values() { return values_; }
  const Array& values() const { return values_; }
  Array& grads() { return grads_; }
  const Array& grads() const { return grads_; }
  Index size() const { return values_.size(); }

  auto values(const std::string& name) {
    const auto& s = segment(name);
    return values_.segment(s.offset, s.size());
  }
  auto values(const std::string& name) const {
    const auto& s = segment(name);
    return values_.segment(s.offset, s.size());
  }
  auto grads(const std::string& name) const {
    const auto& s = segment(name);
    return grads_.segment(s.offset, s.size());
  }

  void zero_grad() { grads_.setZero(); }

  /// Leaf for segment `name` on `tape`; repeated binds on one tape share the leaf.
  Var bind(Tape<Scalar>& tape, const std::string& name) {
    if (tape.serial() != bound_serial_) {
      bindings_.clear();
      bound_serial_ = tape.serial();
    }
    const auto& s = segment(name);
    for (const auto& [seg, var] : bindings_)
      if (seg == s.name) return var;
    Var v = tape.leaf(Volume<Scalar>(s.shape, values(name)));
    bindings_.emplace_back(s.name, v);
    return v;
  }

  /// Adds gradients that reached this store's leaves on `tape`.
  void pull_grads(const Tape<Scalar>& tape) {
    if (tape.serial() != bound_serial_) return;
    for (const auto& [seg, var] : bindings_) {
      const auto& s = segment(seg);
      grads_.segment(s.offset, s.size()) += tape.grad(var);
    }
  }

  template <typename Other>
  ParamStore<Other> cast() const {
    ParamStore<Other> out;
    for (const auto& s : segments_) out.add(s.name, s.shape);
    out.values() = values_.template cast<Other>();
    return out;
  }

 private:
  std::vector<Segment> segments_;
  std::unordered_map<std::string, std::size_t> index_;
  Array values_;
  Array grads_;
  std::uint64_t bound_serial_ = 0;
  std::vector<std::pair<std::string, Var>> bindings_;
};

}  // namespace waterwave::nn
