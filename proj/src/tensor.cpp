#include "amde/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "amde/error.hpp"

namespace amde {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace detail {

void TensorImpl::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

void TensorImpl::accumulate_grad(std::span<const double> g) {
  ensure_grad();
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
}

}  // namespace detail

static void validate_shape(const Shape& shape) {
  for (int d : shape) {
    if (d <= 0) throw Error(ErrorKind::Dimension, "tensor extents must be positive, got " + shape_str(shape));
  }
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  validate_shape(shape);
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->value.assign(shape_numel(shape), v);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return wrap(std::move(impl));
}

Tensor Tensor::ones(Shape shape, bool requires_grad) {
  return full(std::move(shape), 1.0, requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  validate_shape(shape);
  if (data.size() != shape_numel(shape)) {
    throw Error(ErrorKind::Dimension,
                "data length " + std::to_string(data.size()) + " does not fill shape " + shape_str(shape));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->value = std::move(data);
  impl->requires_grad = requires_grad;
  return wrap(std::move(impl));
}

Tensor Tensor::scalar(double v) { return from_data({}, {v}); }

static const detail::TensorImpl& deref(const std::shared_ptr<detail::TensorImpl>& p) {
  if (!p) throw Error(ErrorKind::Contract, "operation on an undefined tensor");
  return *p;
}

const Shape& Tensor::shape() const { return deref(impl_).shape; }

int Tensor::dim(int axis) const {
  const auto& s = shape();
  if (axis < 0 || axis >= static_cast<int>(s.size()))
    throw Error(ErrorKind::Axis, "axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[static_cast<std::size_t>(axis)];
}

std::size_t Tensor::size() const { return deref(impl_).value.size(); }

std::span<const double> Tensor::data() const { return deref(impl_).value; }

std::span<double> Tensor::mutable_data() {
  deref(impl_);
  return impl_->value;
}

double Tensor::at(std::size_t flat) const {
  const auto& v = deref(impl_).value;
  if (flat >= v.size()) throw Error(ErrorKind::Contract, "flat index out of range");
  return v[flat];
}

double Tensor::item() const {
  if (size() != 1) throw Error(ErrorKind::Contract, "item() requires a scalar, got " + shape_str(shape()));
  return impl_->value[0];
}

bool Tensor::requires_grad() const { return deref(impl_).requires_grad; }

void Tensor::set_requires_grad(bool v) {
  deref(impl_);
  impl_->requires_grad = v;
}

bool Tensor::has_grad() const { return deref(impl_).grad.size() == impl_->value.size(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw Error(ErrorKind::Contract, "tensor has no gradient buffer");
  return impl_->grad;
}

void Tensor::zero_grad() {
  deref(impl_);
  impl_->grad.assign(impl_->value.size(), 0.0);
}

Tensor Tensor::clone(bool requires_grad) const {
  return from_data(shape(), std::vector<double>(data().begin(), data().end()), requires_grad);
}

bool Tensor::all_finite() const {
  for (double v : deref(impl_).value) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor Tensor::wrap(std::shared_ptr<detail::TensorImpl> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

// ---------------------------------------------------------------------------
// Tape

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

void Tape::record(std::vector<std::shared_ptr<detail::TensorImpl>> inputs,
                  std::shared_ptr<detail::TensorImpl> output, std::function<void()> backward) {
  outputs_.insert(output.get());
  entries_.push_back(Entry{std::move(inputs), std::move(output), std::move(backward)});
}

bool Tape::produced_here(const Tensor& t) const {
  return t.defined() && outputs_.count(t.impl()) != 0;
}

void Tape::clear() {
  entries_.clear();
  outputs_.clear();
  last_backward_visits_ = 0;
}

bool Tape::validate_topology() const {
  std::unordered_set<const detail::TensorImpl*> seen;
  for (const auto& e : entries_) {
    for (const auto& in : e.inputs) {
      // A valid input is either a leaf (never produced on this tape) or the
      // output of an earlier entry.
      if (outputs_.count(in.get()) != 0 && seen.count(in.get()) == 0) return false;
    }
    seen.insert(e.output.get());
  }
  return true;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw Error(ErrorKind::Contract, "backward requires a scalar loss");
  if (!produced_here(loss))
    throw Error(ErrorKind::Contract, "backward requires a loss produced on this tape");

  // Intermediate gradients belong to a single sweep; leaves keep accumulating.
  for (const auto& e : entries_) e.output->grad.assign(e.output->value.size(), 0.0);

  loss.impl()->grad[0] = 1.0;

  last_backward_visits_ = 0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    ++last_backward_visits_;
    const auto& g = it->output->grad;
    const bool all_zero = std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; });
    if (!all_zero) it->backward();
  }
}

}  // namespace amde
