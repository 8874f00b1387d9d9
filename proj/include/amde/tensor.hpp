#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace amde {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> value;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until first accumulation

  void ensure_grad();
  void accumulate_grad(std::span<const double> g);
};

}  // namespace detail

// Dense 64-bit tensor. Copies share storage (handle semantics), so gradients
// accumulated during backward are visible through every handle to the same
// node. Distinct tensors never alias.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor ones(Shape shape, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int dim(int axis) const;
  int rank() const { return static_cast<int>(shape().size()); }
  std::size_t size() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double at(std::size_t flat) const;
  double item() const;  // scalar only

  bool requires_grad() const;
  void set_requires_grad(bool v);
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Deep copy; the clone starts without grad and detached from any tape.
  Tensor clone(bool requires_grad = false) const;

  bool same_node(const Tensor& other) const { return impl_ == other.impl_; }
  bool all_finite() const;

  detail::TensorImpl* impl() const { return impl_.get(); }
  std::shared_ptr<detail::TensorImpl> share() const { return impl_; }
  static Tensor wrap(std::shared_ptr<detail::TensorImpl> impl);

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Ordered record of executed differentiable operations. Operations append in
// execution order, so inputs of each entry precede it; one reverse sweep
// propagates gradients and visits every entry exactly once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Gradients of
  // tape intermediates are reset per call; leaf gradients accumulate across
  // calls until zero_grad.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  std::size_t last_backward_visits() const { return last_backward_visits_; }
  bool produced_here(const Tensor& t) const;
  void clear();

  // Every entry's inputs must be leaves or outputs of earlier entries.
  bool validate_topology() const;

  void record(std::vector<std::shared_ptr<detail::TensorImpl>> inputs,
              std::shared_ptr<detail::TensorImpl> output, std::function<void()> backward);

 private:
  struct Entry {
    std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
    std::shared_ptr<detail::TensorImpl> output;
    std::function<void()> backward;
  };
  std::vector<Entry> entries_;
  std::unordered_set<const detail::TensorImpl*> outputs_;
  std::size_t last_backward_visits_ = 0;
};

// While in scope, differentiable ops record onto the given tape. Without an
// active scope ops run forward-only, which is how frozen models are evaluated
// (possibly from several threads, each without a tape).
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

}  // namespace amde
