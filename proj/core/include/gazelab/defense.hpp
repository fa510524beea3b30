#pragma once

#include <vector>

#include "gazelab/attack.hpp"
#include "gazelab/data.hpp"
#include "gazelab/model.hpp"

namespace gazelab {

// "Free" adversarial training: each minibatch is replayed replay_m times,
// sharing one backward pass between the model update and the sign-ascent on a
// persistent per-slot perturbation buffer. base.epochs counts gradient
// epochs; the outer loop runs base.epochs / replay_m passes over the data, so
// the total number of parameter updates matches plain training.
struct DefenseConfig {
    TrainConfig base;
    int replay_m = 8;
    double epsilon = 32.0;   // L-inf budget on the perturbation buffer
    double alpha = 4.0;      // ascent stride
    double lambda_adv = 2.0; // weight of the clean-vs-adversarial stability term
};

// With replay_m = 1, epsilon = 0 and lambda_adv = 0 this reduces bitwise to
// train(): both run the same code path. Throws contract_error unless
// base.epochs is divisible by replay_m.
TrainResult free_adv_train(GazeModel& model, const Dataset& dataset, const DefenseConfig& cfg);

struct DefenseCell {
    double epsilon = 0.0;
    int quadrant = 0;
    double target_mean = 0.0, target_std = 0.0;
    double gt_mean = 0.0, gt_std = 0.0;
};

struct DefenseReport {
    double clean_plain_deg = 0.0;     // clean-fold error of the undefended model
    double clean_hardened_deg = 0.0;  // clean-fold error of the defended model
    std::vector<DefenseCell> plain_cells;     // epsilon-major, quadrant-minor
    std::vector<DefenseCell> hardened_cells;
};

// Attacks both models on the fold across the epsilon grid and quadrant
// targets and reports side-by-side error tables plus clean accuracy.
DefenseReport evaluate_defense(const GazeModel& plain, const GazeModel& hardened,
                               const Dataset& fold, const std::vector<double>& epsilons,
                               const std::vector<int>& quadrants, double alpha);

}  // namespace gazelab
