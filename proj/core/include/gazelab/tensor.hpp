#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gazelab/common.hpp"

namespace gazelab {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {
struct TensorNode;
}

// Dense double tensor participating in a reverse-mode tape. Copies are
// shallow; ops build an implicit DAG through parent links, and backward()
// on a scalar walks it in reverse topological order.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t size() const;
    std::size_t rank() const { return shape().size(); }
    bool requires_grad() const;

    double item() const;  // scalar tensors only
    std::span<const double> data() const;
    std::span<const double> grad() const;  // zeros until backward touches the leaf

    void zero_grad();
    void backward() const;

    // Deep copy of the values into a fresh leaf (drops graph history).
    Tensor detach(bool requires_grad = false) const;

    const detail::TensorNode* node() const { return node_.get(); }

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::TensorNode> node_;

    friend Tensor make_op(std::string, Shape, std::vector<double>, std::vector<Tensor>,
                          std::function<void(detail::TensorNode&)>);
};

// ---- elementwise / arithmetic ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ---- structural ----
Tensor reshape(const Tensor& a, Shape shape);
Tensor flatten(const Tensor& a);
Tensor concat(const std::vector<Tensor>& parts);  // 1-d result
Tensor pick(const Tensor& a, std::size_t index);  // scalar a[index] (flat)

// ---- linear algebra / conv ----
Tensor matmul(const Tensor& a, const Tensor& b);               // [n,m]x[m,p]
Tensor conv2d(const Tensor& input, const Tensor& kernel,        // [C,H,W], [OC,C,kh,kw]
              const Tensor& bias);                              // [OC]; stride 1, valid
Tensor avg_pool2d(const Tensor& input, std::size_t window);     // [C,H,W], stride=window

// ---- nonlinearities / reductions ----
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor l2_norm(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

// Domain-safe inverse trig. The forward value clamps inputs to [-1, 1]; the
// gradient is evaluated at the point clamped to [-1+kAcosDelta, 1-kAcosDelta],
// which caps its magnitude instead of zeroing it at the domain edges.
inline constexpr double kAcosDelta = 1e-7;
Tensor acos(const Tensor& a);
Tensor asin(const Tensor& a);
Tensor atan2(const Tensor& y, const Tensor& x);

// ---- masking ----
Tensor masked_select(const Tensor& a, const Tensor& mask);                    // 1-d
Tensor masked_assign(const Tensor& a, const Tensor& mask, const Tensor& v);   // a*(1-m)+v*m

// sign with sign(0) = 0; plain value helper, not a graph op.
std::vector<double> sign(std::span<const double> v);

// Max relative error between analytic gradients of f at x and central finite
// differences with the given step. f must map a tensor to a scalar tensor.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                         const Tensor& x, double step);

}  // namespace gazelab
