#include "gazelab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "gazelab/detail/node.hpp"

namespace gazelab {

std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

using detail::TensorNode;

namespace {

void check_positive_dims(const Shape& s, const char* op) {
    for (std::size_t d : s)
        if (d == 0) throw shape_error(std::string(op) + ": zero dimension in shape " + shape_str(s));
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw shape_error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                          " vs " + shape_str(b.shape()));
}

}  // namespace

using detail::node_of;

Tensor make_op(std::string op, Shape shape, std::vector<double> data,
               std::vector<Tensor> parents, std::function<void(TensorNode&)> backward_fn) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->op = std::move(op);
    bool needs = false;
    for (const auto& p : parents) needs = needs || p.requires_grad();
    if (needs) {
        n->requires_grad = true;
        n->is_leaf = false;
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(n));
}

// ---- construction ----

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return from_data(shape, std::vector<double>(numel(shape), 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    return from_data(shape, std::vector<double>(numel(shape), value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    check_positive_dims(shape, "from_data");
    if (numel(shape) != data.size())
        throw shape_error("from_data: shape " + shape_str(shape) + " does not match " +
                          std::to_string(data.size()) + " values");
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    if (requires_grad) n->ensure_grad();
    return Tensor(std::move(n));
}

const Shape& Tensor::shape() const {
    if (!node_) throw contract_error("shape(): undefined tensor");
    return node_->shape;
}

std::size_t Tensor::size() const { return shape().empty() ? 0 : node_->data.size(); }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

double Tensor::item() const {
    if (!node_ || node_->data.size() != 1)
        throw contract_error("item(): tensor is not scalar");
    return node_->data[0];
}

std::span<const double> Tensor::data() const {
    if (!node_) throw contract_error("data(): undefined tensor");
    return node_->data;
}

std::span<const double> Tensor::grad() const {
    if (!node_) throw contract_error("grad(): undefined tensor");
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() {
    if (!node_) return;
    node_->grad.assign(node_->data.size(), 0.0);
}

Tensor Tensor::detach(bool requires_grad) const {
    if (!node_) throw contract_error("detach(): undefined tensor");
    return from_data(node_->shape, node_->data, requires_grad);
}

void Tensor::backward() const {
    if (!node_) throw contract_error("backward(): undefined tensor");
    if (node_->data.size() != 1)
        throw contract_error("backward(): loss must be scalar, got " + shape_str(node_->shape));

    // Iterative post-order DFS for topological order.
    std::vector<TensorNode*> topo;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto [n, i] = stack.back();
        if (i < n->parents.size()) {
            stack.back().second++;
            TensorNode* p = &node_of(n->parents[i]);
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            topo.push_back(n);
            stack.pop_back();
        }
    }

    // Interior grads are scratch space for this invocation; leaf grads
    // accumulate across calls.
    for (TensorNode* n : topo) {
        if (!n->is_leaf) n->grad.assign(n->data.size(), 0.0);
        else n->ensure_grad();
    }
    node_->ensure_grad();
    node_->grad[0] += 1.0;

    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
    if (!node_->is_leaf) node_->grad.clear();
}

// ---- elementwise helpers ----

namespace {

template <typename Fwd, typename Bwd>
Tensor elementwise_binary(const char* op, const Tensor& a, const Tensor& b, Fwd f, Bwd dfdab) {
    check_same_shape(op, a, b);
    const auto& ad = a.data();
    const auto& bd = b.data();
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(ad[i], bd[i]);
    return make_op(op, a.shape(), std::move(out), {a, b}, [dfdab](TensorNode& self) {
        TensorNode& pa = node_of(self.parents[0]);
        TensorNode& pb = node_of(self.parents[1]);
        if (pa.requires_grad) pa.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        for (std::size_t i = 0; i < self.data.size(); ++i) {
            auto [da, db] = dfdab(pa.data[i], pb.data[i]);
            if (pa.requires_grad) pa.grad[i] += self.grad[i] * da;
            if (pb.requires_grad) pb.grad[i] += self.grad[i] * db;
        }
    });
}

template <typename Fwd, typename Bwd>
Tensor elementwise_unary(const char* op, const Tensor& a, Fwd f, Bwd dfdx) {
    const auto& ad = a.data();
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(ad[i]);
    return make_op(op, a.shape(), std::move(out), {a}, [dfdx](TensorNode& self) {
        TensorNode& pa = node_of(self.parents[0]);
        if (!pa.requires_grad) return;
        pa.ensure_grad();
        for (std::size_t i = 0; i < self.data.size(); ++i)
            pa.grad[i] += self.grad[i] * dfdx(pa.data[i]);
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return elementwise_binary("add", a, b, [](double x, double y) { return x + y; },
                              [](double, double) { return std::pair{1.0, 1.0}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return elementwise_binary("sub", a, b, [](double x, double y) { return x - y; },
                              [](double, double) { return std::pair{1.0, -1.0}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return elementwise_binary("mul", a, b, [](double x, double y) { return x * y; },
                              [](double x, double y) { return std::pair{y, x}; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return elementwise_binary("div", a, b, [](double x, double y) { return x / y; },
                              [](double x, double y) {
                                  return std::pair{1.0 / y, -x / (y * y)};
                              });
}

Tensor add_scalar(const Tensor& a, double s) {
    return elementwise_unary("add_scalar", a, [s](double x) { return x + s; },
                             [](double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
    return elementwise_unary("mul_scalar", a, [s](double x) { return x * s; },
                             [s](double) { return s; });
}

Tensor neg(const Tensor& a) {
    return elementwise_unary("neg", a, [](double x) { return -x; },
                             [](double) { return -1.0; });
}

Tensor relu(const Tensor& a) {
    // Subgradient at 0 is 0.
    return elementwise_unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                             [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
    return elementwise_unary("tanh", a, [](double x) { return std::tanh(x); },
                             [](double x) {
                                 double t = std::tanh(x);
                                 return 1.0 - t * t;
                             });
}

Tensor square(const Tensor& a) {
    return elementwise_unary("square", a, [](double x) { return x * x; },
                             [](double x) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
    return elementwise_unary("sqrt", a, [](double x) { return std::sqrt(x); },
                             [](double x) { return x > 0.0 ? 0.5 / std::sqrt(x) : 0.0; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (lo > hi) throw contract_error("clamp: lo > hi");
    return elementwise_unary("clamp", a,
                             [lo, hi](double x) { return std::min(hi, std::max(lo, x)); },
                             [lo, hi](double x) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

namespace {
// Forward is exact on [-1,1]; only the gradient backs off the domain edge so
// it stays finite (and nonzero) at perfect alignment.
inline double clamp_dom(double x) { return std::min(1.0, std::max(-1.0, x)); }
inline double clamp_cos(double x) {
    return std::min(1.0 - kAcosDelta, std::max(-1.0 + kAcosDelta, x));
}
}  // namespace

Tensor acos(const Tensor& a) {
    return elementwise_unary("acos", a,
                             [](double x) { return std::acos(clamp_dom(x)); },
                             [](double x) {
                                 double c = clamp_cos(x);
                                 return -1.0 / std::sqrt(1.0 - c * c);
                             });
}

Tensor asin(const Tensor& a) {
    return elementwise_unary("asin", a,
                             [](double x) { return std::asin(clamp_dom(x)); },
                             [](double x) {
                                 double c = clamp_cos(x);
                                 return 1.0 / std::sqrt(1.0 - c * c);
                             });
}

Tensor atan2(const Tensor& y, const Tensor& x) {
    return elementwise_binary("atan2", y, x,
                              [](double yy, double xx) { return std::atan2(yy, xx); },
                              [](double yy, double xx) {
                                  double d = yy * yy + xx * xx;
                                  if (d == 0.0) return std::pair{0.0, 0.0};
                                  return std::pair{xx / d, -yy / d};
                              });
}

// ---- structural ----

Tensor reshape(const Tensor& a, Shape shape) {
    check_positive_dims(shape, "reshape");
    if (numel(shape) != a.size())
        throw shape_error("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape) +
                          " changes element count");
    std::vector<double> out(a.data().begin(), a.data().end());
    return make_op("reshape", std::move(shape), std::move(out), {a}, [](TensorNode& self) {
        TensorNode& pa = node_of(self.parents[0]);
        if (!pa.requires_grad) return;
        pa.ensure_grad();
        for (std::size_t i = 0; i < self.data.size(); ++i) pa.grad[i] += self.grad[i];
    });
}

Tensor flatten(const Tensor& a) { return reshape(a, {a.size()}); }

Tensor concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw contract_error("concat: no inputs");
    std::vector<double> out;
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    const std::size_t total = out.size();
    return make_op("concat", {total}, std::move(out), parts, [](TensorNode& self) {
        std::size_t off = 0;
        for (auto& parent : self.parents) {
            TensorNode& p = node_of(parent);
            if (p.requires_grad) {
                p.ensure_grad();
                for (std::size_t i = 0; i < p.data.size(); ++i)
                    p.grad[i] += self.grad[off + i];
            }
            off += p.data.size();
        }
    });
}

Tensor pick(const Tensor& a, std::size_t index) {
    if (index >= a.size())
        throw contract_error("pick: index " + std::to_string(index) + " out of range for " +
                             shape_str(a.shape()));
    return make_op("pick", {1}, {a.data()[index]}, {a}, [index](TensorNode& self) {
        TensorNode& pa = node_of(self.parents[0]);
        if (!pa.requires_grad) return;
        pa.ensure_grad();
        pa.grad[index] += self.grad[0];
    });
}

// ---- reductions ----

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return make_op("sum", {1}, {s}, {a}, [](TensorNode& self) {
        TensorNode& pa = node_of(self.parents[0]);
        if (!pa.requires_grad) return;
        pa.ensure_grad();
        for (std::size_t i = 0; i < pa.data.size(); ++i) pa.grad[i] += self.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    const double inv = 1.0 / static_cast<double>(a.size());
    return make_op("mean", {1}, {s * inv}, {a}, [inv](TensorNode& self) {
        TensorNode& pa = node_of(self.parents[0]);
        if (!pa.requires_grad) return;
        pa.ensure_grad();
        for (std::size_t i = 0; i < pa.data.size(); ++i) pa.grad[i] += self.grad[0] * inv;
    });
}

Tensor dot(const Tensor& a, const Tensor& b) {
    check_same_shape("dot", a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
    return make_op("dot", {1}, {s}, {a, b}, [](TensorNode& self) {
        TensorNode& pa = node_of(self.parents[0]);
        TensorNode& pb = node_of(self.parents[1]);
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (std::size_t i = 0; i < pa.data.size(); ++i)
                pa.grad[i] += self.grad[0] * pb.data[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (std::size_t i = 0; i < pb.data.size(); ++i)
                pb.grad[i] += self.grad[0] * pa.data[i];
        }
    });
}

Tensor l2_norm(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    double n = std::sqrt(s);
    return make_op("l2_norm", {1}, {n}, {a}, [n](TensorNode& self) {
        TensorNode& pa = node_of(self.parents[0]);
        if (!pa.requires_grad || n == 0.0) return;
        pa.ensure_grad();
        for (std::size_t i = 0; i < pa.data.size(); ++i)
            pa.grad[i] += self.grad[0] * pa.data[i] / n;
    });
}

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
        throw shape_error("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                          shape_str(b.shape()));
    const std::size_t n = a.shape()[0], m = a.shape()[1], p = b.shape()[1];
    std::vector<double> out(n * p, 0.0);
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < m; ++k) {
            const double av = ad[i * m + k];
            for (std::size_t j = 0; j < p; ++j) out[i * p + j] += av * bd[k * p + j];
        }
    return make_op("matmul", {n, p}, std::move(out), {a, b}, [n, m, p](TensorNode& self) {
        TensorNode& pa = node_of(self.parents[0]);
        TensorNode& pb = node_of(self.parents[1]);
        if (pa.requires_grad) {
            pa.ensure_grad();  // dA = dC * B^T
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < p; ++j) {
                    const double g = self.grad[i * p + j];
                    for (std::size_t k = 0; k < m; ++k)
                        pa.grad[i * m + k] += g * pb.data[k * p + j];
                }
        }
        if (pb.requires_grad) {
            pb.ensure_grad();  // dB = A^T * dC
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < m; ++k) {
                    const double av = pa.data[i * m + k];
                    for (std::size_t j = 0; j < p; ++j)
                        pb.grad[k * p + j] += av * self.grad[i * p + j];
                }
        }
    });
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
    if (input.rank() != 3)
        throw shape_error("conv2d: input must be [C,H,W], got " + shape_str(input.shape()));
    if (kernel.rank() != 4)
        throw shape_error("conv2d: kernel must be [OC,C,kh,kw], got " + shape_str(kernel.shape()));
    const std::size_t C = input.shape()[0], H = input.shape()[1], W = input.shape()[2];
    const std::size_t OC = kernel.shape()[0], KC = kernel.shape()[1];
    const std::size_t KH = kernel.shape()[2], KW = kernel.shape()[3];
    if (KC != C)
        throw shape_error("conv2d: channel mismatch " + shape_str(input.shape()) + " vs " +
                          shape_str(kernel.shape()));
    if (bias.rank() != 1 || bias.shape()[0] != OC)
        throw shape_error("conv2d: bias must be [" + std::to_string(OC) + "], got " +
                          shape_str(bias.shape()));
    if (H < KH || W < KW)
        throw shape_error("conv2d: input " + shape_str(input.shape()) +
                          " smaller than kernel " + shape_str(kernel.shape()));
    const std::size_t OH = H - KH + 1, OW = W - KW + 1;

    std::vector<double> out(OC * OH * OW);
    const auto& in = input.data();
    const auto& kd = kernel.data();
    const auto& bd = bias.data();
    for (std::size_t oc = 0; oc < OC; ++oc)
        for (std::size_t i = 0; i < OH; ++i)
            for (std::size_t j = 0; j < OW; ++j) {
                double acc = bd[oc];
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t u = 0; u < KH; ++u) {
                        const double* irow = &in[c * H * W + (i + u) * W + j];
                        const double* krow = &kd[((oc * C + c) * KH + u) * KW];
                        for (std::size_t v = 0; v < KW; ++v) acc += irow[v] * krow[v];
                    }
                out[(oc * OH + i) * OW + j] = acc;
            }

    auto bwd = [C, H, W, OC, KH, KW, OH, OW](TensorNode& self) {
        TensorNode& pin = node_of(self.parents[0]);
        TensorNode& pk = node_of(self.parents[1]);
        TensorNode& pb = node_of(self.parents[2]);
        if (pin.requires_grad) pin.ensure_grad();
        if (pk.requires_grad) pk.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        for (std::size_t oc = 0; oc < OC; ++oc)
            for (std::size_t i = 0; i < OH; ++i)
                for (std::size_t j = 0; j < OW; ++j) {
                    const double g = self.grad[(oc * OH + i) * OW + j];
                    if (g == 0.0) continue;
                    if (pb.requires_grad) pb.grad[oc] += g;
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t u = 0; u < KH; ++u) {
                            double* girow = pin.requires_grad
                                                ? &pin.grad[c * H * W + (i + u) * W + j]
                                                : nullptr;
                            const double* irow = &pin.data[c * H * W + (i + u) * W + j];
                            const std::size_t kbase = ((oc * C + c) * KH + u) * KW;
                            for (std::size_t v = 0; v < KW; ++v) {
                                if (girow) girow[v] += g * pk.data[kbase + v];
                                if (pk.requires_grad) pk.grad[kbase + v] += g * irow[v];
                            }
                        }
                }
    };
    return make_op("conv2d", {OC, OH, OW}, std::move(out), {input, kernel, bias}, bwd);
}

Tensor avg_pool2d(const Tensor& input, std::size_t window) {
    if (input.rank() != 3)
        throw shape_error("avg_pool2d: input must be [C,H,W], got " + shape_str(input.shape()));
    if (window == 0) throw contract_error("avg_pool2d: zero window");
    const std::size_t C = input.shape()[0], H = input.shape()[1], W = input.shape()[2];
    const std::size_t OH = H / window, OW = W / window;
    if (OH == 0 || OW == 0)
        throw shape_error("avg_pool2d: window " + std::to_string(window) + " too large for " +
                          shape_str(input.shape()));
    const double inv = 1.0 / static_cast<double>(window * window);
    std::vector<double> out(C * OH * OW, 0.0);
    const auto& in = input.data();
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < OH; ++i)
            for (std::size_t j = 0; j < OW; ++j) {
                double acc = 0.0;
                for (std::size_t u = 0; u < window; ++u)
                    for (std::size_t v = 0; v < window; ++v)
                        acc += in[c * H * W + (i * window + u) * W + (j * window + v)];
                out[(c * OH + i) * OW + j] = acc * inv;
            }
    auto bwd = [C, H, W, OH, OW, window, inv](TensorNode& self) {
        TensorNode& pin = node_of(self.parents[0]);
        if (!pin.requires_grad) return;
        pin.ensure_grad();
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < OH; ++i)
                for (std::size_t j = 0; j < OW; ++j) {
                    const double g = self.grad[(c * OH + i) * OW + j] * inv;
                    for (std::size_t u = 0; u < window; ++u)
                        for (std::size_t v = 0; v < window; ++v)
                            pin.grad[c * H * W + (i * window + u) * W + (j * window + v)] += g;
                }
    };
    return make_op("avg_pool2d", {C, OH, OW}, std::move(out), {input}, bwd);
}

// ---- masking ----

namespace {
void check_binary_mask(const char* op, const Tensor& mask) {
    for (double v : mask.data())
        if (v != 0.0 && v != 1.0)
            throw contract_error(std::string(op) + ": mask must be binary");
}
}  // namespace

Tensor masked_select(const Tensor& a, const Tensor& mask) {
    check_same_shape("masked_select", a, mask);
    check_binary_mask("masked_select", mask);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask.data()[i] == 1.0) idx.push_back(i);
    if (idx.empty()) throw contract_error("masked_select: empty mask");
    std::vector<double> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = a.data()[idx[i]];
    return make_op("masked_select", {idx.size()}, std::move(out), {a},
                   [idx](TensorNode& self) {
                       TensorNode& pa = node_of(self.parents[0]);
                       if (!pa.requires_grad) return;
                       pa.ensure_grad();
                       for (std::size_t i = 0; i < idx.size(); ++i)
                           pa.grad[idx[i]] += self.grad[i];
                   });
}

Tensor masked_assign(const Tensor& a, const Tensor& mask, const Tensor& v) {
    check_same_shape("masked_assign", a, mask);
    check_same_shape("masked_assign", a, v);
    check_binary_mask("masked_assign", mask);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = mask.data()[i] == 1.0 ? v.data()[i] : a.data()[i];
    std::vector<double> m(mask.data().begin(), mask.data().end());
    return make_op("masked_assign", a.shape(), std::move(out), {a, v},
                   [m](TensorNode& self) {
                       TensorNode& pa = node_of(self.parents[0]);
                       TensorNode& pv = node_of(self.parents[1]);
                       if (pa.requires_grad) pa.ensure_grad();
                       if (pv.requires_grad) pv.ensure_grad();
                       for (std::size_t i = 0; i < self.data.size(); ++i) {
                           if (pa.requires_grad && m[i] == 0.0) pa.grad[i] += self.grad[i];
                           if (pv.requires_grad && m[i] == 1.0) pv.grad[i] += self.grad[i];
                       }
                   });
}

std::vector<double> sign(std::span<const double> v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = v[i] > 0.0 ? 1.0 : (v[i] < 0.0 ? -1.0 : 0.0);
    return out;
}

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                         const Tensor& x, double step) {
    Tensor leaf = x.detach(true);
    Tensor loss = f(leaf);
    loss.backward();
    std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());

    std::vector<double> base(x.data().begin(), x.data().end());
    double max_rel = 0.0;
    for (std::size_t i = 0; i < base.size(); ++i) {
        std::vector<double> hi = base, lo = base;
        hi[i] += step;
        lo[i] -= step;
        double fh = f(Tensor::from_data(x.shape(), hi)).item();
        double fl = f(Tensor::from_data(x.shape(), lo)).item();
        double numeric = (fh - fl) / (2.0 * step);
        if (!std::isfinite(numeric) || !std::isfinite(analytic[i]))
            throw numeric_error("finite_diff_check: non-finite value at coordinate " +
                                std::to_string(i));
        double rel = std::abs(analytic[i] - numeric) /
                     (std::abs(analytic[i]) + std::abs(numeric) + 1e-12);
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace gazelab
