#include "granger/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace granger {

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ", ";
    os << s[i];
  }
  os << ']';
  return os.str();
}

ShapeError::ShapeError(std::string op, Shape lhs, Shape rhs)
    : std::invalid_argument(op + ": incompatible shapes " + shape_str(lhs) +
                            " and " + shape_str(rhs)),
      lhs_(std::move(lhs)),
      rhs_(std::move(rhs)) {}

namespace {

using detail::TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;

void ensure_grad(TensorImpl& t) {
  if (t.grad.size() != t.value.size()) t.grad.assign(t.value.size(), 0.0);
}

ImplPtr make_impl(Shape shape, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->value.assign(shape_size(shape), 0.0);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return impl;
}

// Right-aligned broadcast plan.  Missing leading axes count as extent 1.
struct Bcast {
  Shape out;
  std::vector<std::size_t> sa, sb;  // per-axis element strides into a and b
  bool same = false;
};

Bcast broadcast_plan(const char* op, const Shape& a, const Shape& b) {
  Bcast p;
  if (a == b) {
    p.out = a;
    p.same = true;
    return p;
  }
  std::size_t rank = std::max(a.size(), b.size());
  p.out.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) throw ShapeError(op, a, b);
    p.out[i] = std::max(da, db);
  }
  auto strides = [&](const Shape& s) {
    std::vector<std::size_t> st(rank, 0);
    std::size_t acc = 1;
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::size_t axis = rank - 1 - i;
      std::size_t extent = s[s.size() - 1 - i];
      st[axis] = extent == 1 ? 0 : acc;
      acc *= extent;
    }
    return st;
  };
  p.sa = strides(a);
  p.sb = strides(b);
  return p;
}

// Calls f(i, ia, ib) for every flat index i of the plan's output shape,
// with ia/ib the matching flat offsets into the operands.
template <typename F>
void bcast_for_each(const Bcast& p, F&& f) {
  std::size_t total = shape_size(p.out);
  if (p.same) {
    for (std::size_t i = 0; i < total; ++i) f(i, i, i);
    return;
  }
  std::size_t rank = p.out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < total; ++i) {
    f(i, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      ia += p.sa[d];
      ib += p.sb[d];
      if (idx[d] < p.out[d]) break;
      idx[d] = 0;
      ia -= p.sa[d] * p.out[d];
      ib -= p.sb[d] * p.out[d];
    }
  }
}

bool tape_should_record(bool requires_grad) {
  return requires_grad && Tape::active() != nullptr;
}

// Binary elementwise with broadcast.  fwd(a, b) gives the value; da and db
// give the partials as functions of (a, b, out).
template <typename Fwd, typename Da, typename Db>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd,
                 Da da, Db db) {
  Bcast plan = broadcast_plan(name, a.shape(), b.shape());
  bool req = a.requires_grad() || b.requires_grad();
  ImplPtr out = make_impl(plan.out, req);
  const double* av = a.impl_ptr()->value.data();
  const double* bv = b.impl_ptr()->value.data();
  double* ov = out->value.data();
  bcast_for_each(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
    ov[i] = fwd(av[ia], bv[ib]);
  });
  if (tape_should_record(req)) {
    Tape::record([ai = a.impl_ptr(), bi = b.impl_ptr(), out,
                  plan = std::move(plan), da, db]() {
      ensure_grad(*out);
      if (ai->requires_grad) ensure_grad(*ai);
      if (bi->requires_grad) ensure_grad(*bi);
      const double* av = ai->value.data();
      const double* bv = bi->value.data();
      const double* ov = out->value.data();
      const double* og = out->grad.data();
      bcast_for_each(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
        double g = og[i];
        if (ai->requires_grad) ai->grad[ia] += da(av[ia], bv[ib], ov[i]) * g;
        if (bi->requires_grad) bi->grad[ib] += db(av[ia], bv[ib], ov[i]) * g;
      });
    });
  }
  return Tensor::wrap(out);
}

// Unary elementwise.  dfdx(x, y) is the derivative at x with y = f(x).
template <typename Fwd, typename Dfdx>
Tensor unary_op(const Tensor& a, Fwd fwd, Dfdx dfdx) {
  bool req = a.requires_grad();
  ImplPtr out = make_impl(a.shape(), req);
  const double* av = a.impl_ptr()->value.data();
  double* ov = out->value.data();
  std::size_t n = out->value.size();
  for (std::size_t i = 0; i < n; ++i) ov[i] = fwd(av[i]);
  if (tape_should_record(req)) {
    Tape::record([ai = a.impl_ptr(), out, dfdx]() {
      ensure_grad(*out);
      ensure_grad(*ai);
      std::size_t n = out->value.size();
      for (std::size_t i = 0; i < n; ++i)
        ai->grad[i] += dfdx(ai->value[i], out->value[i]) * out->grad[i];
    });
  }
  return Tensor::wrap(out);
}

double sigmoid_stable(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_stable(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double norm_cdf(double x) {
  return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(make_impl(std::move(shape), requires_grad));
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  auto impl = make_impl(std::move(shape), requires_grad);
  std::fill(impl->value.begin(), impl->value.end(), v);
  return Tensor(std::move(impl));
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> data,
                           bool requires_grad) {
  if (shape_size(shape) != data.size())
    throw ShapeError("from_vector", shape, Shape{data.size()});
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->value = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return full(Shape{}, v, requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item", shape(), Shape{1});
  return impl_->value[0];
}

double Tensor::at(std::initializer_list<std::size_t> idx) const {
  if (idx.size() != rank()) throw ShapeError("at", shape(), Shape(idx));
  std::size_t off = 0, d = 0;
  for (std::size_t i : idx) {
    if (i >= impl_->shape[d]) throw ShapeError("at", shape(), Shape(idx));
    off = off * impl_->shape[d] + i;
    ++d;
  }
  return impl_->value[off];
}

std::span<const double> Tensor::grad() const {
  ensure_grad(*impl_);
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->value.size(), 0.0); }

Tensor Tensor::detach_copy() const {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = impl_->shape;
  impl->value = impl_->value;
  impl->requires_grad = false;
  return Tensor(std::move(impl));
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Tape() {
  prev_ = g_active_tape;
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::function<void()> backward_fn) {
  if (g_active_tape) g_active_tape->ops_.push_back(std::move(backward_fn));
}

void Tape::backward(const Tensor& loss) {
  if (ops_.empty()) throw TapeError("backward: tape recorded no operations");
  if (replayed_ == ops_.size())
    throw TapeError("backward: called twice without a new forward pass");
  if (loss.size() != 1) throw ShapeError("backward", loss.shape(), Shape{1});
  ensure_grad(*loss.impl());
  loss.impl()->grad[0] = 1.0;
  std::size_t begin = replayed_;
  replayed_ = ops_.size();
  for (std::size_t i = ops_.size(); i-- > begin;) ops_[i]();
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; });
}

Tensor add(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
Tensor mul(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }

Tensor neg(const Tensor& a) {
  return unary_op(
      a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double x : a.data())
    if (!(x > 0.0))
      throw DomainError("log: input must be strictly positive, got " +
                        std::to_string(x));
  return unary_op(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor log_gate(const Tensor& a, double eps) {
  if (!(eps > 0.0))
    throw DomainError("log_gate: eps must be positive, got " +
                      std::to_string(eps));
  for (double x : a.data())
    if (x < 0.0)
      throw DomainError("log_gate: input must be non-negative, got " +
                        std::to_string(x));
  return unary_op(
      a,
      [eps](double x) {
        return x == 0.0 ? -std::numeric_limits<double>::infinity()
                        : std::log(x + eps);
      },
      [eps](double x, double) { return x == 0.0 ? 0.0 : 1.0 / (x + eps); });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a, [](double x) { return sigmoid_stable(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      a, [](double x) { return softplus_stable(x); },
      [](double x, double) { return sigmoid_stable(x); });
}

Tensor gelu(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x * norm_cdf(x); },
      [](double x, double) { return norm_cdf(x) + x * norm_pdf(x); });
}

Tensor square(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
  for (double x : a.data())
    if (x < 0.0)
      throw DomainError("sqrt: input must be non-negative, got " +
                        std::to_string(x));
  return unary_op(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Tensor elementwise(OpKind kind, const Tensor& a, const Tensor* b) {
  auto need_b = [&]() -> const Tensor& {
    if (!b) throw std::invalid_argument("elementwise: binary op needs b");
    return *b;
  };
  switch (kind) {
    case OpKind::kAdd: return add(a, need_b());
    case OpKind::kSub: return sub(a, need_b());
    case OpKind::kMul: return mul(a, need_b());
    case OpKind::kDiv: return div(a, need_b());
    case OpKind::kNeg: return neg(a);
    case OpKind::kExp: return exp(a);
    case OpKind::kLog: return log(a);
    case OpKind::kSigmoid: return sigmoid(a);
    case OpKind::kSoftplus: return softplus(a);
    case OpKind::kGelu: return gelu(a);
    case OpKind::kSquare: return square(a);
    case OpKind::kSqrt: return sqrt(a);
  }
  throw std::invalid_argument("elementwise: unknown op kind");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2)
    throw ShapeError("matmul", a.shape(), b.shape());
  std::size_t m = a.shape()[a.rank() - 2];
  std::size_t k = a.shape()[a.rank() - 1];
  std::size_t k2 = b.shape()[b.rank() - 2];
  std::size_t n = b.shape()[b.rank() - 1];
  if (k != k2) throw ShapeError("matmul", a.shape(), b.shape());

  Shape la(a.shape().begin(), a.shape().end() - 2);
  Shape lb(b.shape().begin(), b.shape().end() - 2);
  Bcast plan = broadcast_plan("matmul", la, lb);
  Shape out_shape = plan.out;
  out_shape.push_back(m);
  out_shape.push_back(n);

  bool req = a.requires_grad() || b.requires_grad();
  ImplPtr out = make_impl(out_shape, req);
  const double* av = a.impl_ptr()->value.data();
  const double* bv = b.impl_ptr()->value.data();
  double* ov = out->value.data();
  std::size_t as = m * k, bs = k * n, os = m * n;
  bcast_for_each(plan, [&](std::size_t batch, std::size_t ia, std::size_t ib) {
    const double* A = av + ia * as;
    const double* B = bv + ib * bs;
    double* C = ov + batch * os;
    for (std::size_t i = 0; i < m; ++i) {
      double* Ci = C + i * n;
      const double* Ai = A + i * k;
      for (std::size_t kk = 0; kk < k; ++kk) {
        double aik = Ai[kk];
        const double* Bk = B + kk * n;
        for (std::size_t j = 0; j < n; ++j) Ci[j] += aik * Bk[j];
      }
    }
  });
  if (tape_should_record(req)) {
    Tape::record([ai = a.impl_ptr(), bi = b.impl_ptr(), out,
                  plan = std::move(plan), m, k, n, as, bs, os]() {
      ensure_grad(*out);
      if (ai->requires_grad) ensure_grad(*ai);
      if (bi->requires_grad) ensure_grad(*bi);
      const double* av = ai->value.data();
      const double* bv = bi->value.data();
      const double* og = out->grad.data();
      bcast_for_each(plan, [&](std::size_t batch, std::size_t ia,
                               std::size_t ib) {
        const double* A = av + ia * as;
        const double* B = bv + ib * bs;
        const double* G = og + batch * os;
        if (ai->requires_grad) {
          double* dA = ai->grad.data() + ia * as;
          for (std::size_t i = 0; i < m; ++i) {
            const double* Gi = G + i * n;
            for (std::size_t kk = 0; kk < k; ++kk) {
              const double* Bk = B + kk * n;
              double s = 0.0;
              for (std::size_t j = 0; j < n; ++j) s += Gi[j] * Bk[j];
              dA[i * k + kk] += s;
            }
          }
        }
        if (bi->requires_grad) {
          double* dB = bi->grad.data() + ib * bs;
          for (std::size_t kk = 0; kk < k; ++kk) {
            double* dBk = dB + kk * n;
            for (std::size_t i = 0; i < m; ++i) {
              double aik = A[i * k + kk];
              const double* Gi = G + i * n;
              for (std::size_t j = 0; j < n; ++j) dBk[j] += aik * Gi[j];
            }
          }
        }
      });
    });
  }
  return Tensor::wrap(out);
}

Tensor transpose_last2(const Tensor& a) {
  if (a.rank() < 2) throw ShapeError("transpose_last2", a.shape(), Shape{0, 0});
  std::size_t m = a.shape()[a.rank() - 2];
  std::size_t n = a.shape()[a.rank() - 1];
  Shape out_shape = a.shape();
  out_shape[a.rank() - 2] = n;
  out_shape[a.rank() - 1] = m;
  bool req = a.requires_grad();
  ImplPtr out = make_impl(std::move(out_shape), req);
  const double* av = a.impl_ptr()->value.data();
  double* ov = out->value.data();
  std::size_t batches = a.size() / (m * n);
  for (std::size_t b = 0; b < batches; ++b) {
    const double* A = av + b * m * n;
    double* O = ov + b * m * n;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) O[j * m + i] = A[i * n + j];
  }
  if (tape_should_record(req)) {
    Tape::record([ai = a.impl_ptr(), out, m, n, batches]() {
      ensure_grad(*out);
      ensure_grad(*ai);
      for (std::size_t b = 0; b < batches; ++b) {
        const double* G = out->grad.data() + b * m * n;
        double* dA = ai->grad.data() + b * m * n;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) dA[i * n + j] += G[j * m + i];
      }
    });
  }
  return Tensor::wrap(out);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    throw ShapeError("reshape", a.shape(), shape);
  bool req = a.requires_grad();
  auto out = std::make_shared<detail::TensorImpl>();
  out->shape = std::move(shape);
  out->value = std::vector<double>(a.data().begin(), a.data().end());
  out->requires_grad = req;
  if (tape_should_record(req)) {
    Tape::record([ai = a.impl_ptr(), out]() {
      ensure_grad(*out);
      ensure_grad(*ai);
      for (std::size_t i = 0; i < out->grad.size(); ++i)
        ai->grad[i] += out->grad[i];
    });
  }
  return Tensor::wrap(out);
}

Tensor slice_axis(const Tensor& a, std::size_t axis, std::size_t start,
                  std::size_t len) {
  if (axis >= a.rank() || start + len > a.shape()[axis] || len == 0)
    throw ShapeError("slice_axis", a.shape(), Shape{axis, start, len});
  Shape out_shape = a.shape();
  out_shape[axis] = len;
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= a.shape()[d];
  for (std::size_t d = axis + 1; d < a.rank(); ++d) inner *= a.shape()[d];
  std::size_t extent = a.shape()[axis];
  bool req = a.requires_grad();
  ImplPtr out = make_impl(std::move(out_shape), req);
  const double* av = a.impl_ptr()->value.data();
  double* ov = out->value.data();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(av + (o * extent + start) * inner, len * inner,
                ov + o * len * inner);
  if (tape_should_record(req)) {
    Tape::record([ai = a.impl_ptr(), out, outer, inner, extent, start, len]() {
      ensure_grad(*out);
      ensure_grad(*ai);
      for (std::size_t o = 0; o < outer; ++o) {
        const double* g = out->grad.data() + o * len * inner;
        double* dA = ai->grad.data() + (o * extent + start) * inner;
        for (std::size_t i = 0; i < len * inner; ++i) dA[i] += g[i];
      }
    });
  }
  return Tensor::wrap(out);
}

Tensor concat_lastdim(std::span<const Tensor> parts) {
  if (parts.empty())
    throw std::invalid_argument("concat_lastdim: no tensors given");
  Shape base = parts[0].shape();
  if (base.empty()) throw ShapeError("concat_lastdim", base, Shape{});
  std::size_t total_last = 0;
  bool req = false;
  for (const Tensor& t : parts) {
    Shape s = t.shape();
    if (s.size() != base.size() ||
        !std::equal(s.begin(), s.end() - 1, base.begin()))
      throw ShapeError("concat_lastdim", base, s);
    total_last += s.back();
    req = req || t.requires_grad();
  }
  Shape out_shape = base;
  out_shape.back() = total_last;
  std::size_t rows = shape_size(out_shape) / total_last;
  ImplPtr out = make_impl(std::move(out_shape), req);
  double* ov = out->value.data();
  std::size_t col = 0;
  std::vector<ImplPtr> impls;
  std::vector<std::size_t> offsets;
  for (const Tensor& t : parts) {
    std::size_t w = t.shape().back();
    const double* tv = t.data().data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(tv + r * w, w, ov + r * total_last + col);
    impls.push_back(t.impl_ptr());
    offsets.push_back(col);
    col += w;
  }
  if (tape_should_record(req)) {
    Tape::record([impls = std::move(impls), offsets = std::move(offsets), out,
                  rows, total_last]() {
      ensure_grad(*out);
      for (std::size_t p = 0; p < impls.size(); ++p) {
        TensorImpl& t = *impls[p];
        if (!t.requires_grad) continue;
        ensure_grad(t);
        std::size_t w = t.shape.back();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* g = out->grad.data() + r * total_last + offsets[p];
          double* dT = t.grad.data() + r * w;
          for (std::size_t i = 0; i < w; ++i) dT[i] += g[i];
        }
      }
    });
  }
  return Tensor::wrap(out);
}

Tensor softmax_lastdim(const Tensor& a) {
  if (a.rank() == 0 || a.shape().back() == 0)
    throw ShapeError("softmax_lastdim", a.shape(), Shape{0});
  std::size_t last = a.shape().back();
  std::size_t rows = a.size() / last;
  bool req = a.requires_grad();
  ImplPtr out = make_impl(a.shape(), req);
  const double* av = a.impl_ptr()->value.data();
  double* ov = out->value.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av + r * last;
    double* y = ov + r * last;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < last; ++i) mx = std::max(mx, x[i]);
    if (mx == -std::numeric_limits<double>::infinity())
      throw DomainError("softmax_lastdim: fully masked row (all -inf)");
    double s = 0.0;
    for (std::size_t i = 0; i < last; ++i) {
      y[i] = std::exp(x[i] - mx);
      s += y[i];
    }
    for (std::size_t i = 0; i < last; ++i) y[i] /= s;
  }
  if (tape_should_record(req)) {
    Tape::record([ai = a.impl_ptr(), out, rows, last]() {
      ensure_grad(*out);
      ensure_grad(*ai);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = out->value.data() + r * last;
        const double* gy = out->grad.data() + r * last;
        double* gx = ai->grad.data() + r * last;
        double dot = 0.0;
        for (std::size_t i = 0; i < last; ++i) dot += y[i] * gy[i];
        for (std::size_t i = 0; i < last; ++i) gx[i] += y[i] * (gy[i] - dot);
      }
    });
  }
  return Tensor::wrap(out);
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                  double eps) {
  if (a.rank() == 0 || a.shape().back() == 0)
    throw ShapeError("layer_norm", a.shape(), Shape{0});
  std::size_t last = a.shape().back();
  if (gain.shape() != Shape{last})
    throw ShapeError("layer_norm", a.shape(), gain.shape());
  if (bias.shape() != Shape{last})
    throw ShapeError("layer_norm", a.shape(), bias.shape());
  std::size_t rows = a.size() / last;
  bool req = a.requires_grad() || gain.requires_grad() || bias.requires_grad();
  ImplPtr out = make_impl(a.shape(), req);
  const double* av = a.impl_ptr()->value.data();
  const double* gv = gain.impl_ptr()->value.data();
  const double* bv = bias.impl_ptr()->value.data();
  double* ov = out->value.data();
  auto xhat = std::make_shared<std::vector<double>>(a.size());
  auto inv = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av + r * last;
    double* y = ov + r * last;
    double* xh = xhat->data() + r * last;
    double mean = 0.0;
    for (std::size_t i = 0; i < last; ++i) mean += x[i];
    mean /= static_cast<double>(last);
    double var = 0.0;
    for (std::size_t i = 0; i < last; ++i) {
      double d = x[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(last);
    double iv = 1.0 / std::sqrt(var + eps);
    (*inv)[r] = iv;
    for (std::size_t i = 0; i < last; ++i) {
      xh[i] = (x[i] - mean) * iv;
      y[i] = gv[i] * xh[i] + bv[i];
    }
  }
  if (tape_should_record(req)) {
    Tape::record([ai = a.impl_ptr(), gi = gain.impl_ptr(),
                  bi = bias.impl_ptr(), out, xhat, inv, rows, last]() {
      ensure_grad(*out);
      if (ai->requires_grad) ensure_grad(*ai);
      if (gi->requires_grad) ensure_grad(*gi);
      if (bi->requires_grad) ensure_grad(*bi);
      const double* gv = gi->value.data();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gy = out->grad.data() + r * last;
        const double* xh = xhat->data() + r * last;
        double iv = (*inv)[r];
        if (bi->requires_grad)
          for (std::size_t i = 0; i < last; ++i) bi->grad[i] += gy[i];
        if (gi->requires_grad)
          for (std::size_t i = 0; i < last; ++i) gi->grad[i] += gy[i] * xh[i];
        if (ai->requires_grad) {
          double mean_dxh = 0.0, mean_dxh_xh = 0.0;
          for (std::size_t i = 0; i < last; ++i) {
            double dxh = gy[i] * gv[i];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh[i];
          }
          mean_dxh /= static_cast<double>(last);
          mean_dxh_xh /= static_cast<double>(last);
          double* gx = ai->grad.data() + r * last;
          for (std::size_t i = 0; i < last; ++i) {
            double dxh = gy[i] * gv[i];
            gx[i] += iv * (dxh - mean_dxh - xh[i] * mean_dxh_xh);
          }
        }
      }
    });
  }
  return Tensor::wrap(out);
}

Tensor dropout(const Tensor& a, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw DomainError("dropout: rate must lie in [0, 1), got " +
                      std::to_string(rate));
  if (!training || rate == 0.0) return a;
  bool req = a.requires_grad();
  ImplPtr out = make_impl(a.shape(), req);
  const double* av = a.impl_ptr()->value.data();
  double* ov = out->value.data();
  double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double m = rng.uniform() >= rate ? keep_scale : 0.0;
    (*mask)[i] = m;
    ov[i] = av[i] * m;
  }
  if (tape_should_record(req)) {
    Tape::record([ai = a.impl_ptr(), out, mask]() {
      ensure_grad(*out);
      ensure_grad(*ai);
      for (std::size_t i = 0; i < out->grad.size(); ++i)
        ai->grad[i] += out->grad[i] * (*mask)[i];
    });
  }
  return Tensor::wrap(out);
}

Tensor sum(const Tensor& a) {
  bool req = a.requires_grad();
  ImplPtr out = make_impl(Shape{}, req);
  double s = 0.0;
  for (double x : a.data()) s += x;
  out->value[0] = s;
  if (tape_should_record(req)) {
    Tape::record([ai = a.impl_ptr(), out]() {
      ensure_grad(*out);
      ensure_grad(*ai);
      double g = out->grad[0];
      for (double& d : ai->grad) d += g;
    });
  }
  return Tensor::wrap(out);
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean", a.shape(), Shape{1});
  return mul(sum(a), 1.0 / static_cast<double>(a.size()));
}

}  // namespace granger
