#pragma once

#include <cstdint>
#include <vector>

#include "gazelab/attack.hpp"
#include "gazelab/data.hpp"
#include "gazelab/model.hpp"

namespace gazelab {

// Default circular patch placement on the 48x48 face: low on the cheek/chin
// area. With landmark clearance on, mask pixels inside the landmark boxes
// are dropped so the patch never covers eyes, nose or mouth.
inline constexpr double kPatchCx = 29.0;
inline constexpr double kPatchCy = 38.0;
inline constexpr double kPatchRadius = 5.0;

struct PatchSpec {
    Tensor content;  // [1,48,48], values in [0,255]
    Tensor mask;     // [1,48,48], binary
};

struct PatchTrainConfig {
    double alpha = 1.0;          // sign-step stride on patch pixels
    int num_epochs = 5;          // passes over the attack set
    int steps_per_image = 20;    // inner sign-steps per image visit
    double sample_fraction = 0.1;
    double lambda_tv = 0.0;
    GazeLabel target;
    std::uint64_t seed = 0;
};

struct PatchTrainResult {
    PatchSpec patch;
    std::vector<double> loss_trace;  // best loss after each image visit
    std::vector<std::size_t> attack_set;  // fold indices used for training
};

struct PatchEvalRow {
    int quadrant = 0;
    double target_mean = 0.0, target_std = 0.0;
    double gt_mean = 0.0, gt_std = 0.0;
};

// x * (1 - m) + p * m, differentiable in p.
Tensor composite(const Tensor& x, const Tensor& patch, const Tensor& mask);

// Circle mask on the face grid; clearance removes landmark-box pixels.
// Throws contract_error if the resulting mask is empty.
Tensor make_circle_mask(const Sample& geometry, double cx, double cy, double r,
                        bool landmark_clearance);

// Seeded uniform subset of the fold (without replacement), at least one index.
std::vector<std::size_t> sample_attack_set(const Dataset& fold, double fraction,
                                           std::uint64_t seed);

// Universal patch: one patch optimized across the attack set, carried from
// image to image (the best patch for an image seeds the next). Content is
// initialized uniform in [0,255] from cfg.seed unless init is non-null.
PatchTrainResult train_patch(const Estimator& model, const Dataset& fold, const Tensor& mask,
                             const PatchTrainConfig& cfg, const PatchSpec* init = nullptr);

// Applies the patch to every sample and measures errors against each
// requested quadrant target. Population standard deviations.
std::vector<PatchEvalRow> evaluate_patch(const Estimator& model, const Dataset& fold,
                                         const PatchSpec& patch,
                                         const std::vector<int>& quadrants);

}  // namespace gazelab
