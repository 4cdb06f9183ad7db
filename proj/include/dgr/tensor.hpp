#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dgr {

using Shape = std::vector<int64_t>;

int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward touches it
  bool requires_grad = false;

  // Sized and zeroed on first access.
  std::vector<double>& grad_buf();
};

// Handle over a shared f64 buffer, row-major. Tensors are values: ops never
// mutate their inputs. Leaf parameters are the one exception; the optimizer
// rewrites their data in place between tapes.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }
  int64_t dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }

  std::span<const double> data() const { return impl_->data; }
  // For parameter updates and buffer fills only; never call on a tensor that
  // is already part of a recorded graph.
  std::span<double> mutable_data() { return impl_->data; }

  double value() const;  // scalar tensors only
  double at(int64_t flat) const { return impl_->data[static_cast<size_t>(flat)]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool b) { impl_->requires_grad = b; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const;
  void zero_grad();

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  static Tensor wrap(std::shared_ptr<TensorImpl> impl) {
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
  }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Eager recording context. Ops record onto the innermost active tape when any
// input requires grad; backward replays entries in reverse execution order
// exactly once, then frees them.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void backward(const Tensor& loss);
  size_t size() const { return entries_.size(); }

  static Tape* active();
  void record(std::shared_ptr<TensorImpl> out, std::function<void()> fn);

 private:
  struct Entry {
    std::shared_ptr<TensorImpl> out;
    std::function<void()> fn;
  };
  std::vector<Entry> entries_;
  Tape* prev_ = nullptr;
  bool consumed_ = false;
};

// ---- elementwise and reduction ops ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor square(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_axis(const Tensor& a, int axis, bool keepdim = true);
Tensor mean_axis(const Tensor& a, int axis, bool keepdim = true);

// ---- structural ops ----
Tensor reshape(const Tensor& a, Shape new_shape);
Tensor narrow(const Tensor& a, int axis, int64_t start, int64_t length);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor select(const Tensor& a, int64_t flat_index);              // -> shape {1}
Tensor stack_scalars(const std::vector<Tensor>& scalars);        // -> shape {k}
Tensor make_grid(const Tensor& x, const Tensor& y);              // [N,1,H,W] x2 -> [N,H,W,2]

// ---- image ops ----
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding);
Tensor upsample_bilinear(const Tensor& input, int factor);

struct GridSample {
  Tensor values;  // differentiable w.r.t. input values and grid coordinates
  Tensor mask;    // 1 where the sample was in bounds, 0 otherwise; constant
};
// grid holds continuous (x, y) pixel coordinates of the input. Out-of-bounds
// samples produce value 0, mask 0.
GridSample grid_sample_bilinear(const Tensor& input, const Tensor& grid);

// operator sugar
inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator+(double s, const Tensor& a) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator-(double s, const Tensor& a) { return add_scalar(neg(a), s); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator/(const Tensor& a, double s) { return mul_scalar(a, 1.0 / s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

}  // namespace dgr
