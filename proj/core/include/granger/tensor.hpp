#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "granger/rng.hpp"

namespace granger {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

// Thrown when operand shapes are incompatible.  Carries both shapes.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(std::string op, Shape lhs, Shape rhs);
  const Shape& lhs() const { return lhs_; }
  const Shape& rhs() const { return rhs_; }

 private:
  Shape lhs_, rhs_;
};

// Thrown when a value falls outside an op's documented domain
// (log of a non-positive number, sqrt of a negative, fully masked
// softmax row, dropout rate outside [0, 1)).
class DomainError : public std::domain_error {
  using std::domain_error::domain_error;
};

// Thrown on tape misuse: backward with no recorded ops, or backward
// twice without a fresh forward pass.
class TapeError : public std::logic_error {
  using std::logic_error::logic_error;
};

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
};
}  // namespace detail

// Shared handle to an n-dimensional array of doubles.  Copies alias the
// same storage; ops return fresh tensors.  When an active Tape exists and
// an input requires gradients, ops record their backward closure on it.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from_vector(Shape shape, std::vector<double> data,
                            bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t size() const { return impl_->value.size(); }
  std::size_t rank() const { return impl_->shape.size(); }
  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool b) { impl_->requires_grad = b; }

  std::span<double> data() { return impl_->value; }
  std::span<const double> data() const { return impl_->value; }

  double item() const;
  double at(std::initializer_list<std::size_t> idx) const;

  // Gradient accumulated by the last backward pass (zeros before any).
  std::span<const double> grad() const;
  void zero_grad();

  // Deep copy with no gradient history.
  Tensor detach_copy() const;

  detail::TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }
  static Tensor wrap(std::shared_ptr<detail::TensorImpl> impl) {
    return Tensor(std::move(impl));
  }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Records backward closures for one forward pass.  Construction installs
// the tape as the active one for this thread; destruction restores the
// previous.  backward() replays closures in reverse, accumulating into
// .grad of every tensor that requires gradients.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void backward(const Tensor& loss);
  std::size_t op_count() const { return ops_.size(); }

  static Tape* active();
  static void record(std::function<void()> backward_fn);

 private:
  std::vector<std::function<void()>> ops_;
  std::size_t replayed_ = 0;  // ops consumed by the last backward()
  Tape* prev_ = nullptr;
};

enum class OpKind {
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kExp,
  kLog,
  kSigmoid,
  kSoftplus,
  kGelu,
  kSquare,
  kSqrt,
};

// Elementwise ops broadcast the trailing dimensions: a shape suffix of the
// other operand's shape is tiled, scalars broadcast everywhere.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);

Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

// log(a + eps) with exact zeros mapped to -inf: a structural zero stays a
// hard gate instead of leaking through the eps floor.  Requires a >= 0.
Tensor log_gate(const Tensor& a, double eps);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);

// Uniform dispatch over the ops above; binary kinds require b.
Tensor elementwise(OpKind kind, const Tensor& a, const Tensor* b = nullptr);

// Batched matrix product on the last two axes; leading axes broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose_last2(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor slice_axis(const Tensor& a, std::size_t axis, std::size_t start,
                  std::size_t len);
Tensor concat_lastdim(std::span<const Tensor> parts);

// Numerically stable softmax over the last axis.  -inf entries get zero
// weight; a row of only -inf is an error.
Tensor softmax_lastdim(const Tensor& a);

// Normalizes the last axis to zero mean and unit variance (eps inside the
// square root), then applies elementwise gain and bias of that length.
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// Inverted dropout: zeroes with probability rate and scales survivors by
// 1/(1-rate) so the expectation is unchanged.  Identity when training is
// false or rate is zero.  rate must lie in [0, 1).
Tensor dropout(const Tensor& a, double rate, bool training, Rng& rng);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

}  // namespace granger
