#pragma once

#include <vector>

#include "gazelab/gaze.hpp"
#include "gazelab/model.hpp"
#include "gazelab/tensor.hpp"

namespace gazelab {

// Attack objective value split into its terms. `total` stays on the graph;
// the doubles are detached copies for reporting.
struct LossBreakdown {
    Tensor total;
    double angular_to_target_deg = 0.0;  // sum over heads
    double tv_term = 0.0;
    std::vector<double> per_head;
};

// Angular error in degrees between two direction 3-vectors, differentiable.
// Throws contract_error if either vector is exactly zero.
Tensor angular_error_deg(const Tensor& g, const Tensor& t);
Tensor angular_error_deg(const Tensor& g, const std::array<double, 3>& t);

double ground_truth_error_deg(const std::array<double, 3>& g, const GazeLabel& y);

// Mean squared neighbor difference (normalized by (h-1)(w-1)).
Tensor tv_loss(const Tensor& img);

LossBreakdown attack_objective(const std::vector<Tensor>& heads, const std::array<double, 3>& t,
                               const std::vector<Tensor>& attacked_images, double lambda_tv);

// Same but with the TV term on the composite p * m.
LossBreakdown patch_objective(const std::vector<Tensor>& heads, const std::array<double, 3>& t,
                              const Tensor& patch, const Tensor& mask, double lambda_tv);

// Supervised training loss (sum over heads). mse_pitchyaw is MSE on the
// (pitch, yaw) decomposition; angular is the angular error in radians.
Tensor supervised_loss(const std::vector<Tensor>& heads, const GazeLabel& y, LossKind kind);

// Stability term between clean and adversarial predictions, same loss family.
Tensor stability_loss(const std::vector<Tensor>& clean_heads,
                      const std::vector<Tensor>& adv_heads, LossKind kind);

// L_model(G(x), y) + lambda_adv * L_model(G(x), G(x_adv)).
Tensor defense_objective(const Estimator& model, const std::vector<Tensor>& x,
                         const std::vector<Tensor>& x_adv, const GazeLabel& y,
                         double lambda_adv, LossKind kind);

}  // namespace gazelab
