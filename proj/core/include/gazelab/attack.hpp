#pragma once

#include <optional>
#include <vector>

#include "gazelab/data.hpp"
#include "gazelab/gaze.hpp"
#include "gazelab/losses.hpp"
#include "gazelab/model.hpp"

namespace gazelab {

struct AttackConfig {
    double epsilon = 8.0;  // pixel units, (0, 255]
    double alpha = 1.0;    // per-step stride, <= epsilon
    int n_iters = 0;       // 0 derives round(max(eps/alpha + 4, 2*eps/alpha))
    GazeLabel target;
    std::optional<std::vector<double>> region_mask;  // face input only, binary
    double lambda_tv = 0.0;
};

struct AttackResult {
    std::vector<Tensor> x_adv;  // best iterate, aligned with the model's input spec
    int best_iter = 0;
    std::vector<double> loss_trace;  // total loss at iterates 0..N
    double final_target_error_deg = 0.0;  // mean over heads at the best iterate
    double final_gt_error_deg = 0.0;
};

// Iteration count round(max(eps/alpha + 4, 2*eps/alpha)), half rounding up.
int derive_iterations(double epsilon, double alpha);

// Elementwise clamp of candidate to [orig - eps, orig + eps], then to [0,255].
Tensor clip_step(const Tensor& x_orig, const Tensor& candidate, double epsilon);

// Targeted iterative sign-descent toward cfg.target. Iterate 0 (the clean
// input) participates in best-iterate selection, so the result is never
// worse than no attack.
AttackResult attack(const Estimator& model, const std::vector<Tensor>& inputs,
                    const GazeLabel& label, const AttackConfig& cfg);

struct TargetRow {
    int quadrant = 0;
    double target_mean = 0.0, target_std = 0.0;
    double gt_mean = 0.0, gt_std = 0.0;
    std::size_t count = 0;
};

struct BatchAttackReport {
    std::vector<AttackResult> results;  // sample-major, target-minor
    double target_mean = 0.0, target_std = 0.0;
    double gt_mean = 0.0, gt_std = 0.0;
    std::vector<TargetRow> per_target;
};

// Attacks every (sample, quadrant target) pair in the fold with cfg's
// epsilon/alpha/lambda settings. Population standard deviations.
BatchAttackReport batch_attack(const Estimator& model, const Dataset& fold,
                               const std::vector<int>& quadrants, const AttackConfig& cfg,
                               bool keep_results = true);

}  // namespace gazelab
