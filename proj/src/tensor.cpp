#include "dgr/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "dgr/error.hpp"

namespace dgr {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

int64_t numel_of(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

std::vector<double>& TensorImpl::grad_buf() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  int64_t n = numel_of(shape);
  if (n <= 0) throw RuntimeError("tensor shape " + shape_str(shape) + " has no elements");
  impl->shape = std::move(shape);
  impl->data.assign(static_cast<size_t>(n), value);
  impl->requires_grad = requires_grad;
  return wrap(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (numel_of(shape) != static_cast<int64_t>(data.size()))
    throw RuntimeError("tensor data size " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return wrap(std::move(impl));
}

double Tensor::value() const {
  if (numel() != 1) throw RuntimeError("value() requires a scalar tensor, got " + shape_str(shape()));
  return impl_->data[0];
}

std::span<const double> Tensor::grad() const { return impl_->grad; }

void Tensor::zero_grad() { impl_->grad.clear(); }

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Tape() {
  prev_ = g_active_tape;
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::shared_ptr<TensorImpl> out, std::function<void()> fn) {
  entries_.push_back({std::move(out), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw RuntimeError("backward already ran on this tape");
  if (!loss.defined() || loss.numel() != 1)
    throw RuntimeError("backward requires a scalar loss");
  consumed_ = true;
  loss.impl()->grad_buf()[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!it->out->grad.empty()) it->fn();
  }
  entries_.clear();
  entries_.shrink_to_fit();
}

namespace {

void check_finite(const char* op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x))
      throw RuntimeError(std::string(op) + " produced a non-finite value");
  }
}

bool want_record(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

Tensor make_result(Shape shape, std::vector<double> data, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor::wrap(std::move(impl));
}

// ---------------------------------------------------------------------------
// broadcasting
// ---------------------------------------------------------------------------

struct BcastPlan {
  Shape out_shape;
  std::vector<int64_t> stride_a, stride_b;  // per output axis, 0 where broadcast
  int64_t n = 0;
  bool same_shape = false;
};

BcastPlan make_bcast(const char* op, const Shape& a, const Shape& b) {
  BcastPlan p;
  if (a == b) {
    p.out_shape = a;
    p.n = numel_of(a);
    p.same_shape = true;
    return p;
  }
  int ra = static_cast<int>(a.size()), rb = static_cast<int>(b.size());
  int r = std::max(ra, rb);
  p.out_shape.resize(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) {
    int64_t da = (i < r - ra) ? 1 : a[static_cast<size_t>(i - (r - ra))];
    int64_t db = (i < r - rb) ? 1 : b[static_cast<size_t>(i - (r - rb))];
    if (da != db && da != 1 && db != 1)
      throw RuntimeError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                         shape_str(b) + " are not broadcast-compatible");
    p.out_shape[static_cast<size_t>(i)] = std::max(da, db);
  }
  p.n = numel_of(p.out_shape);
  // Row-major strides, zeroed on broadcast axes.
  auto strides_for = [&](const Shape& s, int rs) {
    std::vector<int64_t> full(static_cast<size_t>(r), 0);
    int64_t st = 1;
    for (int i = rs - 1; i >= 0; --i) {
      full[static_cast<size_t>(i + (r - rs))] = (s[static_cast<size_t>(i)] == 1) ? 0 : st;
      st *= s[static_cast<size_t>(i)];
    }
    return full;
  };
  p.stride_a = strides_for(a, ra);
  p.stride_b = strides_for(b, rb);
  return p;
}

template <class F>
void for_each_bcast(const BcastPlan& p, F&& f) {
  if (p.same_shape) {
    for (int64_t i = 0; i < p.n; ++i) f(i, i, i);
    return;
  }
  int r = static_cast<int>(p.out_shape.size());
  std::vector<int64_t> idx(static_cast<size_t>(r), 0);
  int64_t ia = 0, ib = 0;
  for (int64_t o = 0; o < p.n; ++o) {
    f(o, ia, ib);
    for (int ax = r - 1; ax >= 0; --ax) {
      size_t u = static_cast<size_t>(ax);
      ++idx[u];
      ia += p.stride_a[u];
      ib += p.stride_b[u];
      if (idx[u] < p.out_shape[u]) break;
      ia -= p.stride_a[u] * p.out_shape[u];
      ib -= p.stride_b[u] * p.out_shape[u];
      idx[u] = 0;
    }
  }
}

// dfa/dfb take (a, b, out) and return the local partial.
template <class F, class DFA, class DFB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, F f, DFA dfa, DFB dfb) {
  BcastPlan plan = make_bcast(name, a.shape(), b.shape());
  std::vector<double> out(static_cast<size_t>(plan.n));
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for_each_bcast(plan, [&](int64_t o, int64_t ia, int64_t ib) { out[static_cast<size_t>(o)] = f(pa[ia], pb[ib]); });
  check_finite(name, out);
  bool rec = want_record({&a, &b});
  Tensor res = make_result(plan.out_shape, std::move(out), rec);
  if (rec) {
    auto ai = a.impl(), bi = b.impl(), oi = res.impl();
    bool na = a.requires_grad(), nb = b.requires_grad();
    Tape::active()->record(oi, [ai, bi, oi, plan, dfa, dfb, na, nb]() {
      const double* pa2 = ai->data.data();
      const double* pb2 = bi->data.data();
      const double* po = oi->data.data();
      const double* g = oi->grad.data();
      double* ga = na ? ai->grad_buf().data() : nullptr;
      double* gb = nb ? bi->grad_buf().data() : nullptr;
      for_each_bcast(plan, [&](int64_t o, int64_t ia, int64_t ib) {
        double go = g[o];
        if (ga) ga[ia] += go * dfa(pa2[ia], pb2[ib], po[o]);
        if (gb) gb[ib] += go * dfb(pa2[ia], pb2[ib], po[o]);
      });
    });
  }
  return res;
}

template <class F, class DF>
Tensor unary_op(const char* name, const Tensor& a, F f, DF dfdx) {
  const auto& in = a.impl()->data;
  std::vector<double> out(in.size());
  for (size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  check_finite(name, out);
  bool rec = want_record({&a});
  Tensor res = make_result(a.shape(), std::move(out), rec);
  if (rec) {
    auto ai = a.impl(), oi = res.impl();
    Tape::active()->record(oi, [ai, oi, dfdx]() {
      const double* x = ai->data.data();
      const double* y = oi->data.data();
      const double* g = oi->grad.data();
      double* ga = ai->grad_buf().data();
      for (size_t i = 0; i < ai->data.size(); ++i) ga[i] += g[i] * dfdx(x[i], y[i]);
    });
  }
  return res;
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary_op(
      "add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary_op(
      "mul_scalar", a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& a) {
  return unary_op(
      "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor abs(const Tensor& a) {
  // subgradient 0 at the kink
  return unary_op(
      "abs", a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  // derivative defined as 0 at x == 0 so exact zeros stay differentiable
  return unary_op(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double x, double y) { return x > 0.0 ? 0.5 / y : 0.0; });
}

Tensor sin(const Tensor& a) {
  return unary_op(
      "sin", a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Tensor cos(const Tensor& a) {
  return unary_op(
      "cos", a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary_op(
      "leaky_relu", a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) throw RuntimeError("clamp: lo must be <= hi");
  // derivative 0 at and beyond the boundaries
  return unary_op(
      "clamp", a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor square(const Tensor& a) {
  return unary_op(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.data()) acc += x;
  std::vector<double> out{acc};
  check_finite("sum", out);
  bool rec = want_record({&a});
  Tensor res = make_result({1}, std::move(out), rec);
  if (rec) {
    auto ai = a.impl(), oi = res.impl();
    Tape::active()->record(oi, [ai, oi]() {
      double g = oi->grad[0];
      double* ga = ai->grad_buf().data();
      for (size_t i = 0; i < ai->data.size(); ++i) ga[i] += g;
    });
  }
  return res;
}

Tensor mean(const Tensor& a) {
  double inv = 1.0 / static_cast<double>(a.numel());
  double acc = 0.0;
  for (double x : a.data()) acc += x;
  std::vector<double> out{acc * inv};
  check_finite("mean", out);
  bool rec = want_record({&a});
  Tensor res = make_result({1}, std::move(out), rec);
  if (rec) {
    auto ai = a.impl(), oi = res.impl();
    Tape::active()->record(oi, [ai, oi, inv]() {
      double g = oi->grad[0] * inv;
      double* ga = ai->grad_buf().data();
      for (size_t i = 0; i < ai->data.size(); ++i) ga[i] += g;
    });
  }
  return res;
}

namespace {
Tensor reduce_axis(const char* name, const Tensor& a, int axis, bool keepdim, bool take_mean) {
  int r = a.rank();
  if (axis < 0 || axis >= r) throw RuntimeError(std::string(name) + ": axis out of range");
  const Shape& s = a.shape();
  int64_t pre = 1, post = 1;
  for (int i = 0; i < axis; ++i) pre *= s[static_cast<size_t>(i)];
  for (int i = axis + 1; i < r; ++i) post *= s[static_cast<size_t>(i)];
  int64_t len = s[static_cast<size_t>(axis)];
  Shape out_shape;
  for (int i = 0; i < r; ++i) {
    if (i == axis) {
      if (keepdim) out_shape.push_back(1);
    } else {
      out_shape.push_back(s[static_cast<size_t>(i)]);
    }
  }
  if (out_shape.empty()) out_shape.push_back(1);
  double scale = take_mean ? 1.0 / static_cast<double>(len) : 1.0;
  std::vector<double> out(static_cast<size_t>(pre * post), 0.0);
  const double* pa = a.data().data();
  for (int64_t p = 0; p < pre; ++p)
    for (int64_t l = 0; l < len; ++l) {
      const double* row = pa + (p * len + l) * post;
      double* orow = out.data() + p * post;
      for (int64_t q = 0; q < post; ++q) orow[q] += row[q];
    }
  if (take_mean)
    for (double& x : out) x *= scale;
  check_finite(name, out);
  bool rec = want_record({&a});
  Tensor res = make_result(std::move(out_shape), std::move(out), rec);
  if (rec) {
    auto ai = a.impl(), oi = res.impl();
    Tape::active()->record(oi, [ai, oi, pre, len, post, scale]() {
      const double* g = oi->grad.data();
      double* ga = ai->grad_buf().data();
      for (int64_t p = 0; p < pre; ++p)
        for (int64_t l = 0; l < len; ++l) {
          double* row = ga + (p * len + l) * post;
          const double* grow = g + p * post;
          for (int64_t q = 0; q < post; ++q) row[q] += grow[q] * scale;
        }
    });
  }
  return res;
}
}  // namespace

Tensor sum_axis(const Tensor& a, int axis, bool keepdim) {
  return reduce_axis("sum_axis", a, axis, keepdim, false);
}

Tensor mean_axis(const Tensor& a, int axis, bool keepdim) {
  return reduce_axis("mean_axis", a, axis, keepdim, true);
}

// ---------------------------------------------------------------------------
// structural ops
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape new_shape) {
  if (numel_of(new_shape) != a.numel())
    throw RuntimeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(new_shape));
  std::vector<double> out(a.data().begin(), a.data().end());
  bool rec = want_record({&a});
  Tensor res = make_result(std::move(new_shape), std::move(out), rec);
  if (rec) {
    auto ai = a.impl(), oi = res.impl();
    Tape::active()->record(oi, [ai, oi]() {
      const double* g = oi->grad.data();
      double* ga = ai->grad_buf().data();
      for (size_t i = 0; i < ai->data.size(); ++i) ga[i] += g[i];
    });
  }
  return res;
}

Tensor narrow(const Tensor& a, int axis, int64_t start, int64_t length) {
  int r = a.rank();
  if (axis < 0 || axis >= r) throw RuntimeError("narrow: axis out of range");
  const Shape& s = a.shape();
  int64_t dim = s[static_cast<size_t>(axis)];
  if (start < 0 || length <= 0 || start + length > dim)
    throw RuntimeError("narrow: range out of bounds");
  int64_t pre = 1, post = 1;
  for (int i = 0; i < axis; ++i) pre *= s[static_cast<size_t>(i)];
  for (int i = axis + 1; i < r; ++i) post *= s[static_cast<size_t>(i)];
  Shape out_shape = s;
  out_shape[static_cast<size_t>(axis)] = length;
  std::vector<double> out(static_cast<size_t>(pre * length * post));
  const double* pa = a.data().data();
  for (int64_t p = 0; p < pre; ++p)
    std::memcpy(out.data() + p * length * post, pa + (p * dim + start) * post,
                static_cast<size_t>(length * post) * sizeof(double));
  bool rec = want_record({&a});
  Tensor res = make_result(std::move(out_shape), std::move(out), rec);
  if (rec) {
    auto ai = a.impl(), oi = res.impl();
    Tape::active()->record(oi, [ai, oi, pre, post, dim, start, length]() {
      const double* g = oi->grad.data();
      double* ga = ai->grad_buf().data();
      for (int64_t p = 0; p < pre; ++p) {
        double* dst = ga + (p * dim + start) * post;
        const double* src = g + p * length * post;
        for (int64_t i = 0; i < length * post; ++i) dst[i] += src[i];
      }
    });
  }
  return res;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw RuntimeError("concat: no inputs");
  int r = parts[0].rank();
  if (axis < 0 || axis >= r) throw RuntimeError("concat: axis out of range");
  Shape out_shape = parts[0].shape();
  int64_t total = 0;
  for (const Tensor& t : parts) {
    if (t.rank() != r) throw RuntimeError("concat: rank mismatch");
    for (int i = 0; i < r; ++i)
      if (i != axis && t.dim(i) != out_shape[static_cast<size_t>(i)])
        throw RuntimeError("concat: shape mismatch on axis " + std::to_string(i));
    total += t.dim(axis);
  }
  out_shape[static_cast<size_t>(axis)] = total;
  int64_t pre = 1, post = 1;
  for (int i = 0; i < axis; ++i) pre *= out_shape[static_cast<size_t>(i)];
  for (int i = axis + 1; i < r; ++i) post *= out_shape[static_cast<size_t>(i)];
  std::vector<double> out(static_cast<size_t>(pre * total * post));
  int64_t offset = 0;
  for (const Tensor& t : parts) {
    int64_t len = t.dim(axis);
    const double* src = t.data().data();
    for (int64_t p = 0; p < pre; ++p)
      std::memcpy(out.data() + (p * total + offset) * post, src + p * len * post,
                  static_cast<size_t>(len * post) * sizeof(double));
    offset += len;
  }
  bool rec = false;
  {
    std::vector<const Tensor*> ptrs;
    for (const Tensor& t : parts) ptrs.push_back(&t);
    if (Tape::active())
      for (const Tensor* t : ptrs)
        if (t->requires_grad()) rec = true;
  }
  Tensor res = make_result(std::move(out_shape), std::move(out), rec);
  if (rec) {
    std::vector<std::shared_ptr<TensorImpl>> impls;
    std::vector<int64_t> lens;
    std::vector<bool> needs;
    for (const Tensor& t : parts) {
      impls.push_back(t.impl());
      lens.push_back(t.dim(axis));
      needs.push_back(t.requires_grad());
    }
    auto oi = res.impl();
    Tape::active()->record(oi, [impls, lens, needs, oi, pre, post, total]() {
      const double* g = oi->grad.data();
      int64_t off = 0;
      for (size_t k = 0; k < impls.size(); ++k) {
        int64_t len = lens[k];
        if (needs[k]) {
          double* ga = impls[k]->grad_buf().data();
          for (int64_t p = 0; p < pre; ++p) {
            const double* src = g + (p * total + off) * post;
            double* dst = ga + p * len * post;
            for (int64_t i = 0; i < len * post; ++i) dst[i] += src[i];
          }
        }
        off += len;
      }
    });
  }
  return res;
}

Tensor select(const Tensor& a, int64_t flat_index) {
  if (flat_index < 0 || flat_index >= a.numel()) throw RuntimeError("select: index out of range");
  std::vector<double> out{a.at(flat_index)};
  bool rec = want_record({&a});
  Tensor res = make_result({1}, std::move(out), rec);
  if (rec) {
    auto ai = a.impl(), oi = res.impl();
    Tape::active()->record(oi, [ai, oi, flat_index]() {
      ai->grad_buf()[static_cast<size_t>(flat_index)] += oi->grad[0];
    });
  }
  return res;
}

Tensor stack_scalars(const std::vector<Tensor>& scalars) {
  if (scalars.empty()) throw RuntimeError("stack_scalars: no inputs");
  std::vector<double> out;
  bool rec = false;
  for (const Tensor& t : scalars) {
    if (t.numel() != 1) throw RuntimeError("stack_scalars: all inputs must be scalars");
    out.push_back(t.at(0));
    if (Tape::active() && t.requires_grad()) rec = true;
  }
  Tensor res = make_result({static_cast<int64_t>(scalars.size())}, std::move(out), rec);
  if (rec) {
    std::vector<std::shared_ptr<TensorImpl>> impls;
    std::vector<bool> needs;
    for (const Tensor& t : scalars) {
      impls.push_back(t.impl());
      needs.push_back(t.requires_grad());
    }
    auto oi = res.impl();
    Tape::active()->record(oi, [impls, needs, oi]() {
      for (size_t k = 0; k < impls.size(); ++k)
        if (needs[k]) impls[k]->grad_buf()[0] += oi->grad[k];
    });
  }
  return res;
}

Tensor make_grid(const Tensor& x, const Tensor& y) {
  if (x.rank() != 4 || y.rank() != 4 || x.dim(1) != 1 || y.dim(1) != 1 || x.shape() != y.shape())
    throw RuntimeError("make_grid: expects two [N,1,H,W] tensors of equal shape");
  int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  std::vector<double> out(static_cast<size_t>(n * h * w * 2));
  const double* px = x.data().data();
  const double* py = y.data().data();
  for (int64_t i = 0; i < n * h * w; ++i) {
    out[static_cast<size_t>(2 * i)] = px[i];
    out[static_cast<size_t>(2 * i + 1)] = py[i];
  }
  bool rec = want_record({&x, &y});
  Tensor res = make_result({n, h, w, 2}, std::move(out), rec);
  if (rec) {
    auto xi = x.impl(), yi = y.impl(), oi = res.impl();
    bool nx = x.requires_grad(), ny = y.requires_grad();
    Tape::active()->record(oi, [xi, yi, oi, nx, ny, n, h, w]() {
      const double* g = oi->grad.data();
      double* gx = nx ? xi->grad_buf().data() : nullptr;
      double* gy = ny ? yi->grad_buf().data() : nullptr;
      for (int64_t i = 0; i < n * h * w; ++i) {
        if (gx) gx[i] += g[2 * i];
        if (gy) gy[i] += g[2 * i + 1];
      }
    });
  }
  return res;
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

namespace {

void im2col(const double* img, int64_t cin, int64_t h, int64_t w, int64_t kh, int64_t kw,
            int stride, int padding, int64_t oh, int64_t ow, double* col) {
  // col is [cin*kh*kw] x [oh*ow], row-major
  for (int64_t ci = 0; ci < cin; ++ci)
    for (int64_t ki = 0; ki < kh; ++ki)
      for (int64_t kj = 0; kj < kw; ++kj) {
        double* row = col + ((ci * kh + ki) * kw + kj) * oh * ow;
        const double* plane = img + ci * h * w;
        for (int64_t oy = 0; oy < oh; ++oy) {
          int64_t iy = oy * stride - padding + ki;
          double* dst = row + oy * ow;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, 0.0);
            continue;
          }
          const double* srow = plane + iy * w;
          for (int64_t ox = 0; ox < ow; ++ox) {
            int64_t ix = ox * stride - padding + kj;
            dst[ox] = (ix >= 0 && ix < w) ? srow[ix] : 0.0;
          }
        }
      }
}

void col2im_accum(const double* col, int64_t cin, int64_t h, int64_t w, int64_t kh, int64_t kw,
                  int stride, int padding, int64_t oh, int64_t ow, double* img) {
  for (int64_t ci = 0; ci < cin; ++ci)
    for (int64_t ki = 0; ki < kh; ++ki)
      for (int64_t kj = 0; kj < kw; ++kj) {
        const double* row = col + ((ci * kh + ki) * kw + kj) * oh * ow;
        double* plane = img + ci * h * w;
        for (int64_t oy = 0; oy < oh; ++oy) {
          int64_t iy = oy * stride - padding + ki;
          if (iy < 0 || iy >= h) continue;
          double* drow = plane + iy * w;
          const double* srow = row + oy * ow;
          for (int64_t ox = 0; ox < ow; ++ox) {
            int64_t ix = ox * stride - padding + kj;
            if (ix >= 0 && ix < w) drow[ix] += srow[ox];
          }
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
  if (input.rank() != 4) throw RuntimeError("conv2d: input must be [N,C,H,W]");
  if (weight.rank() != 4) throw RuntimeError("conv2d: weight must be [Cout,Cin,kh,kw]");
  if (bias.rank() != 1) throw RuntimeError("conv2d: bias must be [Cout]");
  int64_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  int64_t cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != cin)
    throw RuntimeError("conv2d: input channels " + std::to_string(cin) +
                       " do not match weight channels " + std::to_string(weight.dim(1)));
  if (bias.dim(0) != cout) throw RuntimeError("conv2d: bias size does not match Cout");
  if (kh % 2 == 0 || kw % 2 == 0) throw RuntimeError("conv2d: kernel dims must be odd");
  if (stride < 1) throw RuntimeError("conv2d: stride must be >= 1");
  if (padding < 0) throw RuntimeError("conv2d: padding must be >= 0");
  int64_t oh = (h + 2 * padding - kh) / stride + 1;
  int64_t ow = (w + 2 * padding - kw) / stride + 1;
  if (oh <= 0 || ow <= 0) throw RuntimeError("conv2d: kernel larger than padded input");
  int64_t k = cin * kh * kw;

  std::vector<double> out(static_cast<size_t>(n * cout * oh * ow));
  std::vector<double> col(static_cast<size_t>(k * oh * ow));
  ConstMap wmat(weight.data().data(), cout, k);
  const double* pb = bias.data().data();
  for (int64_t ni = 0; ni < n; ++ni) {
    im2col(input.data().data() + ni * cin * h * w, cin, h, w, kh, kw, stride, padding, oh, ow,
           col.data());
    ConstMap cmat(col.data(), k, oh * ow);
    MutMap omat(out.data() + ni * cout * oh * ow, cout, oh * ow);
    omat.noalias() = wmat * cmat;
    for (int64_t co = 0; co < cout; ++co) omat.row(co).array() += pb[co];
  }
  check_finite("conv2d", out);

  bool rec = want_record({&input, &weight, &bias});
  Tensor res = make_result({n, cout, oh, ow}, std::move(out), rec);
  if (rec) {
    auto ii = input.impl(), wi = weight.impl(), bi = bias.impl(), oi = res.impl();
    bool ni_ = input.requires_grad(), nw = weight.requires_grad(), nb = bias.requires_grad();
    Tape::active()->record(oi, [=]() {
      const double* g = oi->grad.data();
      std::vector<double> col2(static_cast<size_t>(k * oh * ow));
      ConstMap wmat2(wi->data.data(), cout, k);
      double* gw = nw ? wi->grad_buf().data() : nullptr;
      double* gb = nb ? bi->grad_buf().data() : nullptr;
      double* gi = ni_ ? ii->grad_buf().data() : nullptr;
      std::vector<double> colgrad(ni_ ? static_cast<size_t>(k * oh * ow) : 0);
      for (int64_t b = 0; b < n; ++b) {
        ConstMap gmat(g + b * cout * oh * ow, cout, oh * ow);
        if (gb)
          for (int64_t co = 0; co < cout; ++co) gb[co] += gmat.row(co).sum();
        if (gw) {
          im2col(ii->data.data() + b * cin * h * w, cin, h, w, kh, kw, stride, padding, oh, ow,
                 col2.data());
          ConstMap cmat(col2.data(), k, oh * ow);
          MutMap gwmat(gw, cout, k);
          gwmat.noalias() += gmat * cmat.transpose();
        }
        if (gi) {
          MutMap cgmat(colgrad.data(), k, oh * ow);
          cgmat.noalias() = wmat2.transpose() * gmat;
          col2im_accum(colgrad.data(), cin, h, w, kh, kw, stride, padding, oh, ow,
                       gi + b * cin * h * w);
        }
      }
    });
  }
  return res;
}

// ---------------------------------------------------------------------------
// upsample_bilinear
// ---------------------------------------------------------------------------

namespace {
struct LerpTable {
  std::vector<int64_t> i0, i1;
  std::vector<double> w1;  // weight of i1; weight of i0 is 1-w1
};

LerpTable make_lerp(int64_t in_len, int64_t out_len, int factor) {
  LerpTable t;
  t.i0.resize(static_cast<size_t>(out_len));
  t.i1.resize(static_cast<size_t>(out_len));
  t.w1.resize(static_cast<size_t>(out_len));
  double inv = 1.0 / static_cast<double>(factor);
  for (int64_t o = 0; o < out_len; ++o) {
    double src = (static_cast<double>(o) + 0.5) * inv - 0.5;
    if (src <= 0.0) {
      t.i0[o] = t.i1[o] = 0;
      t.w1[o] = 0.0;
    } else if (src >= static_cast<double>(in_len - 1)) {
      t.i0[o] = t.i1[o] = in_len - 1;
      t.w1[o] = 0.0;
    } else {
      int64_t f = static_cast<int64_t>(src);
      t.i0[o] = f;
      t.i1[o] = f + 1;
      t.w1[o] = src - static_cast<double>(f);
    }
  }
  return t;
}
}  // namespace

Tensor upsample_bilinear(const Tensor& input, int factor) {
  if (input.rank() != 4) throw RuntimeError("upsample_bilinear: input must be [N,C,H,W]");
  if (factor < 2) throw RuntimeError("upsample_bilinear: factor must be >= 2");
  int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  int64_t oh = h * factor, ow = w * factor;
  LerpTable ty = make_lerp(h, oh, factor);
  LerpTable tx = make_lerp(w, ow, factor);
  std::vector<double> out(static_cast<size_t>(n * c * oh * ow));
  const double* pin = input.data().data();
  for (int64_t nc = 0; nc < n * c; ++nc) {
    const double* plane = pin + nc * h * w;
    double* oplane = out.data() + nc * oh * ow;
    for (int64_t oy = 0; oy < oh; ++oy) {
      const double* r0 = plane + ty.i0[oy] * w;
      const double* r1 = plane + ty.i1[oy] * w;
      double wy = ty.w1[oy];
      double* orow = oplane + oy * ow;
      for (int64_t ox = 0; ox < ow; ++ox) {
        double wx = tx.w1[ox];
        double v0 = r0[tx.i0[ox]] * (1.0 - wx) + r0[tx.i1[ox]] * wx;
        double v1 = r1[tx.i0[ox]] * (1.0 - wx) + r1[tx.i1[ox]] * wx;
        orow[ox] = v0 * (1.0 - wy) + v1 * wy;
      }
    }
  }
  check_finite("upsample_bilinear", out);
  bool rec = want_record({&input});
  Tensor res = make_result({n, c, oh, ow}, std::move(out), rec);
  if (rec) {
    auto ii = input.impl(), oi = res.impl();
    Tape::active()->record(oi, [ii, oi, ty, tx, n, c, h, w, oh, ow]() {
      const double* g = oi->grad.data();
      double* gi = ii->grad_buf().data();
      for (int64_t nc = 0; nc < n * c; ++nc) {
        double* gplane = gi + nc * h * w;
        const double* goplane = g + nc * oh * ow;
        for (int64_t oy = 0; oy < oh; ++oy) {
          double wy = ty.w1[oy];
          int64_t y0 = ty.i0[oy], y1 = ty.i1[oy];
          const double* grow = goplane + oy * ow;
          for (int64_t ox = 0; ox < ow; ++ox) {
            double wx = tx.w1[ox];
            int64_t x0 = tx.i0[ox], x1 = tx.i1[ox];
            double go = grow[ox];
            gplane[y0 * w + x0] += go * (1.0 - wy) * (1.0 - wx);
            gplane[y0 * w + x1] += go * (1.0 - wy) * wx;
            gplane[y1 * w + x0] += go * wy * (1.0 - wx);
            gplane[y1 * w + x1] += go * wy * wx;
          }
        }
      }
    });
  }
  return res;
}

// ---------------------------------------------------------------------------
// grid_sample_bilinear
// ---------------------------------------------------------------------------

GridSample grid_sample_bilinear(const Tensor& input, const Tensor& grid) {
  if (input.rank() != 4) throw RuntimeError("grid_sample: input must be [N,C,H,W]");
  if (grid.rank() != 4 || grid.dim(3) != 2)
    throw RuntimeError("grid_sample: grid must be [N,H',W',2]");
  if (grid.dim(0) != input.dim(0)) throw RuntimeError("grid_sample: batch mismatch");
  int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  int64_t gh = grid.dim(1), gw = grid.dim(2);
  std::vector<double> out(static_cast<size_t>(n * c * gh * gw), 0.0);
  std::vector<double> mask(static_cast<size_t>(n * gh * gw), 0.0);
  const double* pin = input.data().data();
  const double* pg = grid.data().data();
  double maxx = static_cast<double>(w - 1), maxy = static_cast<double>(h - 1);
  for (int64_t b = 0; b < n; ++b) {
    const double* gimg = pg + b * gh * gw * 2;
    for (int64_t p = 0; p < gh * gw; ++p) {
      double x = gimg[2 * p], y = gimg[2 * p + 1];
      bool inb = x >= 0.0 && x <= maxx && y >= 0.0 && y <= maxy;
      if (!inb) continue;
      mask[static_cast<size_t>(b * gh * gw + p)] = 1.0;
      int64_t x0 = static_cast<int64_t>(x), y0 = static_cast<int64_t>(y);
      int64_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      double fx = x - static_cast<double>(x0), fy = y - static_cast<double>(y0);
      for (int64_t ci = 0; ci < c; ++ci) {
        const double* plane = pin + (b * c + ci) * h * w;
        double v00 = plane[y0 * w + x0], v01 = plane[y0 * w + x1];
        double v10 = plane[y1 * w + x0], v11 = plane[y1 * w + x1];
        out[static_cast<size_t>((b * c + ci) * gh * gw + p)] =
            (v00 * (1.0 - fx) + v01 * fx) * (1.0 - fy) + (v10 * (1.0 - fx) + v11 * fx) * fy;
      }
    }
  }
  check_finite("grid_sample", out);
  bool rec = want_record({&input, &grid});
  GridSample gs;
  gs.values = make_result({n, c, gh, gw}, std::move(out), rec);
  gs.mask = make_result({n, 1, gh, gw}, std::move(mask), false);
  if (rec) {
    auto ii = input.impl(), gi_ = grid.impl(), oi = gs.values.impl();
    bool nin = input.requires_grad(), ngr = grid.requires_grad();
    Tape::active()->record(oi, [ii, gi_, oi, nin, ngr, n, c, h, w, gh, gw, maxx, maxy]() {
      const double* g = oi->grad.data();
      const double* pin2 = ii->data.data();
      const double* pg2 = gi_->data.data();
      double* gin = nin ? ii->grad_buf().data() : nullptr;
      double* ggr = ngr ? gi_->grad_buf().data() : nullptr;
      for (int64_t b = 0; b < n; ++b) {
        const double* gimg = pg2 + b * gh * gw * 2;
        for (int64_t p = 0; p < gh * gw; ++p) {
          double x = gimg[2 * p], y = gimg[2 * p + 1];
          bool inb = x >= 0.0 && x <= maxx && y >= 0.0 && y <= maxy;
          if (!inb) continue;
          int64_t x0 = static_cast<int64_t>(x), y0 = static_cast<int64_t>(y);
          int64_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
          double fx = x - static_cast<double>(x0), fy = y - static_cast<double>(y0);
          double dgx = 0.0, dgy = 0.0;
          for (int64_t ci = 0; ci < c; ++ci) {
            double go = g[(b * c + ci) * gh * gw + p];
            if (go == 0.0 && !ggr) continue;
            const double* plane = pin2 + (b * c + ci) * h * w;
            double v00 = plane[y0 * w + x0], v01 = plane[y0 * w + x1];
            double v10 = plane[y1 * w + x0], v11 = plane[y1 * w + x1];
            if (gin) {
              double* gplane = gin + (b * c + ci) * h * w;
              gplane[y0 * w + x0] += go * (1.0 - fx) * (1.0 - fy);
              gplane[y0 * w + x1] += go * fx * (1.0 - fy);
              gplane[y1 * w + x0] += go * (1.0 - fx) * fy;
              gplane[y1 * w + x1] += go * fx * fy;
            }
            if (ggr) {
              dgx += go * ((v01 - v00) * (1.0 - fy) + (v11 - v10) * fy);
              dgy += go * ((v10 - v00) * (1.0 - fx) + (v11 - v01) * fx);
            }
          }
          if (ggr) {
            ggr[b * gh * gw * 2 + 2 * p] += dgx;
            ggr[b * gh * gw * 2 + 2 * p + 1] += dgy;
          }
        }
      }
    });
  }
  return gs;
}

}  // namespace dgr
