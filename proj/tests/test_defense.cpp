#include <gtest/gtest.h>

#include "gazelab/defense.hpp"

using namespace gazelab;

namespace {

DefenseConfig base_config(int epochs, int replay_m) {
    DefenseConfig cfg;
    cfg.base.epochs = epochs;
    cfg.base.batch_size = 4;
    cfg.base.learning_rate = 0.05;
    cfg.base.seed = 2;
    cfg.replay_m = replay_m;
    cfg.epsilon = 16.0;
    cfg.alpha = 4.0;
    cfg.lambda_adv = 1.0;
    return cfg;
}

}  // namespace

TEST(Defense, Validation) {
    Dataset ds = generate(5, 2, 4);
    GazeModel m = GazeModel::create(ModelKind::single_input_cnn, 2);

    // epochs not divisible by replay_m is rejected before any work
    DefenseConfig cfg = base_config(10, 3);
    EXPECT_THROW(free_adv_train(m, ds, cfg), contract_error);

    cfg = base_config(4, 2);
    cfg.epsilon = -1.0;
    EXPECT_THROW(free_adv_train(m, ds, cfg), contract_error);
    cfg = base_config(4, 2);
    cfg.alpha = 0.0;  // invalid while epsilon > 0
    EXPECT_THROW(free_adv_train(m, ds, cfg), contract_error);
    cfg = base_config(4, 2);
    cfg.lambda_adv = -0.5;
    EXPECT_THROW(free_adv_train(m, ds, cfg), contract_error);
    cfg = base_config(4, 0);
    EXPECT_THROW(free_adv_train(m, ds, cfg), contract_error);
}

TEST(Defense, ReplayAccounting) {
    Dataset ds = generate(5, 2, 4);  // 8 samples, batch 4 -> 2 batches/epoch
    GazeModel m = GazeModel::create(ModelKind::single_input_cnn, 2);
    DefenseConfig cfg = base_config(10, 5);
    TrainResult r = free_adv_train(m, ds, cfg);
    // 10 gradient epochs total: 2 outer data passes (one loss entry each),
    // each of the 2 batches replayed 5x per pass
    EXPECT_EQ(r.loss_curve.size(), 2u);
    EXPECT_EQ(r.parameter_updates, 10u * 2u);
}

TEST(Defense, ReductionToPlainTrainingBitwise) {
    Dataset ds = generate(5, 3, 4);
    TrainConfig tc;
    tc.epochs = 6;
    tc.batch_size = 4;
    tc.learning_rate = 0.05;
    tc.seed = 7;

    GazeModel plain = GazeModel::create(ModelKind::single_input_cnn, 7);
    TrainResult rp = train(plain, ds, tc);

    GazeModel defended = GazeModel::create(ModelKind::single_input_cnn, 7);
    DefenseConfig dc;
    dc.base = tc;
    dc.replay_m = 1;
    dc.epsilon = 0.0;  // freezes the perturbation buffer
    dc.alpha = 1.0;
    dc.lambda_adv = 0.0;
    TrainResult rd = free_adv_train(defended, ds, dc);

    EXPECT_EQ(rp.loss_curve, rd.loss_curve);
    EXPECT_EQ(rp.parameter_updates, rd.parameter_updates);
    ASSERT_EQ(plain.params().size(), defended.params().size());
    for (std::size_t i = 0; i < plain.params().size(); ++i) {
        auto a = plain.params()[i].second.data();
        auto b = defended.params()[i].second.data();
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t j = 0; j < a.size(); ++j)
            ASSERT_EQ(a[j], b[j]) << "param " << plain.params()[i].first << "[" << j << "]";
    }
}

TEST(Defense, AdversarialBranchChangesTraining) {
    Dataset ds = generate(5, 2, 4);
    TrainConfig tc;
    tc.epochs = 4;
    tc.batch_size = 4;
    tc.learning_rate = 0.05;
    tc.seed = 3;

    GazeModel plain = GazeModel::create(ModelKind::single_input_cnn, 3);
    train(plain, ds, tc);

    GazeModel defended = GazeModel::create(ModelKind::single_input_cnn, 3);
    DefenseConfig dc;
    dc.base = tc;
    dc.replay_m = 2;
    dc.epsilon = 16.0;
    dc.alpha = 4.0;
    dc.lambda_adv = 1.0;
    free_adv_train(defended, ds, dc);

    bool differs = false;
    for (std::size_t i = 0; i < plain.params().size() && !differs; ++i) {
        auto a = plain.params()[i].second.data();
        auto b = defended.params()[i].second.data();
        for (std::size_t j = 0; j < a.size(); ++j)
            if (a[j] != b[j]) {
                differs = true;
                break;
            }
    }
    EXPECT_TRUE(differs) << "perturbation replay had no effect on the parameters";
}

TEST(Defense, EvaluateDefenseShape) {
    Dataset ds = generate(5, 2, 3);
    auto [train_set, fold] = split_leave_one_person_out(ds, 1);
    GazeModel plain = GazeModel::create(ModelKind::single_input_cnn, 1);
    GazeModel hardened = GazeModel::create(ModelKind::single_input_cnn, 2);

    DefenseReport rep = evaluate_defense(plain, hardened, fold, {4, 8}, {1, 2}, 1.0);
    EXPECT_GT(rep.clean_plain_deg, 0.0);
    EXPECT_GT(rep.clean_hardened_deg, 0.0);
    ASSERT_EQ(rep.plain_cells.size(), 4u);  // epsilon-major, quadrant-minor
    ASSERT_EQ(rep.hardened_cells.size(), 4u);
    EXPECT_EQ(rep.plain_cells[0].epsilon, 4.0);
    EXPECT_EQ(rep.plain_cells[0].quadrant, 1);
    EXPECT_EQ(rep.plain_cells[1].epsilon, 4.0);
    EXPECT_EQ(rep.plain_cells[1].quadrant, 2);
    EXPECT_EQ(rep.plain_cells[2].epsilon, 8.0);
    EXPECT_EQ(rep.hardened_cells[3].epsilon, 8.0);
    EXPECT_EQ(rep.hardened_cells[3].quadrant, 2);

    EXPECT_THROW(evaluate_defense(plain, hardened, fold, {}, {1}, 1.0), contract_error);
    EXPECT_THROW(evaluate_defense(plain, hardened, fold, {4}, {}, 1.0), contract_error);
}
