#include "gazelab/defense.hpp"

#include "gazelab/common.hpp"

namespace gazelab {

TrainResult free_adv_train(GazeModel& model, const Dataset& dataset, const DefenseConfig& cfg) {
    if (cfg.replay_m < 1) throw contract_error("free_adv_train: replay_m must be >= 1");
    if (cfg.base.epochs % cfg.replay_m != 0)
        throw contract_error("free_adv_train: epochs (" + std::to_string(cfg.base.epochs) +
                             ") not divisible by replay_m (" + std::to_string(cfg.replay_m) + ")");
    if (cfg.epsilon < 0.0) throw contract_error("free_adv_train: epsilon < 0");
    if (cfg.epsilon > 0.0 && !(cfg.alpha > 0.0))
        throw contract_error("free_adv_train: alpha must be positive when epsilon > 0");
    if (cfg.lambda_adv < 0.0) throw contract_error("free_adv_train: lambda_adv < 0");

    detail::FreeAdvOptions adv;
    adv.replay_m = cfg.replay_m;
    adv.epsilon = cfg.epsilon;
    adv.alpha = cfg.alpha;
    adv.lambda_adv = cfg.lambda_adv;
    return detail::train_impl(model, dataset, cfg.base, &adv);
}

DefenseReport evaluate_defense(const GazeModel& plain, const GazeModel& hardened,
                               const Dataset& fold, const std::vector<double>& epsilons,
                               const std::vector<int>& quadrants, double alpha) {
    if (epsilons.empty()) throw contract_error("evaluate_defense: no epsilons");

    DefenseReport rep;
    rep.clean_plain_deg = mean_angular_error_deg(plain, fold);
    rep.clean_hardened_deg = mean_angular_error_deg(hardened, fold);

    for (double eps : epsilons) {
        AttackConfig cfg;
        cfg.epsilon = eps;
        cfg.alpha = alpha;
        for (const GazeModel* m : {&plain, &hardened}) {
            BatchAttackReport r = batch_attack(*m, fold, quadrants, cfg, /*keep_results=*/false);
            auto& cells = (m == &plain) ? rep.plain_cells : rep.hardened_cells;
            for (const auto& row : r.per_target)
                cells.push_back({eps, row.quadrant, row.target_mean, row.target_std,
                                 row.gt_mean, row.gt_std});
        }
    }
    return rep;
}

}  // namespace gazelab
