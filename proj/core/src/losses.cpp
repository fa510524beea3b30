#include "gazelab/losses.hpp"

#include <cmath>

#include "gazelab/detail/node.hpp"

namespace gazelab {

namespace {

void check_nonzero(const char* op, std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    if (s == 0.0) throw contract_error(std::string(op) + ": zero direction vector");
}

Tensor vec3(const std::array<double, 3>& v) {
    return Tensor::from_data({3}, {v[0], v[1], v[2]});
}

// (pitch, yaw) of a direction vector as a differentiable [2] tensor.
Tensor pitchyaw_of(const Tensor& g) {
    Tensor n = l2_norm(g);
    Tensor unit = div(g, concat({n, n, n}));
    Tensor p = asin(neg(pick(unit, 1)));
    Tensor y = atan2(neg(pick(unit, 0)), neg(pick(unit, 2)));
    return concat({p, y});
}

}  // namespace

Tensor angular_error_deg(const Tensor& g, const Tensor& t) {
    if (g.size() != 3 || t.size() != 3)
        throw shape_error("angular_error_deg: expected 3-vectors, got " + shape_str(g.shape()) +
                          " and " + shape_str(t.shape()));
    check_nonzero("angular_error_deg", g.data());
    check_nonzero("angular_error_deg", t.data());
    Tensor c = div(dot(g, t), mul(l2_norm(g), l2_norm(t)));
    return mul_scalar(acos(c), kDegPerRad);
}

Tensor angular_error_deg(const Tensor& g, const std::array<double, 3>& t) {
    return angular_error_deg(g, vec3(t));
}

double ground_truth_error_deg(const std::array<double, 3>& g, const GazeLabel& y) {
    return angle_between_deg(g, y.vec);
}

Tensor tv_loss(const Tensor& img) {
    Tensor x = img;
    if (x.rank() == 3 && x.shape()[0] == 1) x = reshape(x, {x.shape()[1], x.shape()[2]});
    if (x.rank() != 2)
        throw shape_error("tv_loss: expected [h,w] image, got " + shape_str(img.shape()));
    const std::size_t h = x.shape()[0], w = x.shape()[1];
    if (h < 2 || w < 2)
        throw contract_error("tv_loss: image must be at least 2x2, got " + shape_str(x.shape()));

    // Single primitive: forward double loop, analytic backward.
    const auto& d = x.data();
    const double norm = 1.0 / static_cast<double>((h - 1) * (w - 1));
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < h; ++i)
        for (std::size_t j = 0; j + 1 < w; ++j) {
            double dh = d[i * w + j + 1] - d[i * w + j];
            double dv = d[(i + 1) * w + j] - d[i * w + j];
            acc += dh * dh + dv * dv;
        }
    return make_op("tv_loss", {1}, {acc * norm}, {x}, [h, w, norm](detail::TensorNode& self) {
        auto& p = detail::node_of(self.parents[0]);
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g = self.grad[0] * norm;
        for (std::size_t i = 0; i + 1 < h; ++i)
            for (std::size_t j = 0; j + 1 < w; ++j) {
                double dh = p.data[i * w + j + 1] - p.data[i * w + j];
                double dv = p.data[(i + 1) * w + j] - p.data[i * w + j];
                p.grad[i * w + j + 1] += 2.0 * g * dh;
                p.grad[(i + 1) * w + j] += 2.0 * g * dv;
                p.grad[i * w + j] -= 2.0 * g * (dh + dv);
            }
    });
}

LossBreakdown attack_objective(const std::vector<Tensor>& heads, const std::array<double, 3>& t,
                               const std::vector<Tensor>& attacked_images, double lambda_tv) {
    if (lambda_tv < 0.0) throw contract_error("attack_objective: lambda_tv < 0");
    if (heads.empty()) throw contract_error("attack_objective: no heads");

    LossBreakdown out;
    Tensor angular;
    for (const auto& head : heads) {
        Tensor e = angular_error_deg(head, t);
        out.per_head.push_back(e.item());
        angular = angular.defined() ? add(angular, e) : e;
    }
    out.angular_to_target_deg = angular.item();

    if (lambda_tv > 0.0) {
        // TV is taken in normalized intensity (x/255): the published lambda
        // range assumes unit-range inputs, and raw [0,255] units would swamp
        // the angular term at any lambda >= 1.
        Tensor tv;
        for (const auto& img : attacked_images) {
            Tensor term = tv_loss(mul_scalar(img, 1.0 / 255.0));
            tv = tv.defined() ? add(tv, term) : term;
        }
        out.tv_term = tv.defined() ? tv.item() : 0.0;
        out.total = tv.defined() ? add(angular, mul_scalar(tv, lambda_tv)) : angular;
    } else {
        out.tv_term = 0.0;
        out.total = angular;
    }
    return out;
}

LossBreakdown patch_objective(const std::vector<Tensor>& heads, const std::array<double, 3>& t,
                              const Tensor& patch, const Tensor& mask, double lambda_tv) {
    if (patch.shape() != mask.shape())
        throw shape_error("patch_objective: patch " + shape_str(patch.shape()) +
                          " vs mask " + shape_str(mask.shape()));
    for (double v : mask.data())
        if (v != 0.0 && v != 1.0) throw contract_error("patch_objective: mask must be binary");

    LossBreakdown out;
    Tensor angular;
    for (const auto& head : heads) {
        Tensor e = angular_error_deg(head, t);
        out.per_head.push_back(e.item());
        angular = angular.defined() ? add(angular, e) : e;
    }
    out.angular_to_target_deg = angular.item();

    if (lambda_tv > 0.0) {
        // Same normalized-intensity convention as attack_objective.
        Tensor tv = tv_loss(mul_scalar(mul(patch, mask), 1.0 / 255.0));
        out.tv_term = tv.item();
        out.total = add(angular, mul_scalar(tv, lambda_tv));
    } else {
        out.tv_term = tv_loss(mul_scalar(mul(patch.detach(), mask), 1.0 / 255.0)).item();
        out.total = angular;
    }
    return out;
}

Tensor supervised_loss(const std::vector<Tensor>& heads, const GazeLabel& y, LossKind kind) {
    Tensor total;
    for (const auto& head : heads) {
        Tensor term;
        if (kind == LossKind::mse_pitchyaw) {
            Tensor py = pitchyaw_of(head);
            Tensor target = Tensor::from_data({2}, {y.pitch, y.yaw});
            term = mean(square(sub(py, target)));
        } else {
            term = mul_scalar(angular_error_deg(head, y.vec), 1.0 / kDegPerRad);
        }
        total = total.defined() ? add(total, term) : term;
    }
    return total;
}

Tensor stability_loss(const std::vector<Tensor>& clean_heads,
                      const std::vector<Tensor>& adv_heads, LossKind kind) {
    if (clean_heads.size() != adv_heads.size())
        throw contract_error("stability_loss: head count mismatch");
    Tensor total;
    for (std::size_t i = 0; i < clean_heads.size(); ++i) {
        Tensor term;
        if (kind == LossKind::mse_pitchyaw) {
            term = mean(square(sub(pitchyaw_of(clean_heads[i]), pitchyaw_of(adv_heads[i]))));
        } else {
            term = mul_scalar(angular_error_deg(clean_heads[i], adv_heads[i]), 1.0 / kDegPerRad);
        }
        total = total.defined() ? add(total, term) : term;
    }
    return total;
}

Tensor defense_objective(const Estimator& model, const std::vector<Tensor>& x,
                         const std::vector<Tensor>& x_adv, const GazeLabel& y,
                         double lambda_adv, LossKind kind) {
    if (lambda_adv < 0.0) throw contract_error("defense_objective: lambda_adv < 0");
    std::vector<Tensor> clean = model.forward(x);
    Tensor loss = supervised_loss(clean, y, kind);
    if (lambda_adv > 0.0) {
        std::vector<Tensor> adv = model.forward(x_adv);
        loss = add(loss, mul_scalar(stability_loss(clean, adv, kind), lambda_adv));
    }
    return loss;
}

}  // namespace gazelab
