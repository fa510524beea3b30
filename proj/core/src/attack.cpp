#include "gazelab/attack.hpp"

#include <algorithm>
#include <cmath>

#include "gazelab/detail/node.hpp"

namespace gazelab {

namespace {

// Kahan-compensated accumulator; summation order is fixed by the callers so
// aggregates reproduce bit-for-bit.
struct KahanSum {
    double sum = 0.0, c = 0.0;
    void add(double v) {
        double y = v - c;
        double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
};

struct MeanStd {
    double mean = 0.0, stddev = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
    MeanStd out;
    if (v.empty()) return out;
    KahanSum s;
    for (double x : v) s.add(x);
    out.mean = s.sum / static_cast<double>(v.size());
    KahanSum s2;
    for (double x : v) s2.add((x - out.mean) * (x - out.mean));
    out.stddev = std::sqrt(s2.sum / static_cast<double>(v.size()));
    return out;
}

void validate(const AttackConfig& cfg) {
    if (!(cfg.epsilon > 0.0) || cfg.epsilon > 255.0)
        throw contract_error("attack: epsilon must be in (0, 255], got " +
                             std::to_string(cfg.epsilon));
    // alpha may exceed epsilon: the per-step clip to the epsilon ball bounds
    // the move, so a large stride just jumps straight to the boundary.
    if (!(cfg.alpha > 0.0))
        throw contract_error("attack: alpha must be positive, got " +
                             std::to_string(cfg.alpha));
    if (cfg.n_iters < 0) throw contract_error("attack: n_iters < 0");
}

}  // namespace

int derive_iterations(double epsilon, double alpha) {
    if (!(epsilon > 0.0) || !(alpha > 0.0))
        throw contract_error("derive_iterations: epsilon and alpha must be positive");
    double n = std::max(epsilon / alpha + 4.0, 2.0 * epsilon / alpha);
    int iters = static_cast<int>(std::floor(n + 0.5));  // half rounds up
    return std::max(iters, 1);
}

Tensor clip_step(const Tensor& x_orig, const Tensor& candidate, double epsilon) {
    if (x_orig.shape() != candidate.shape())
        throw shape_error("clip_step: shapes " + shape_str(x_orig.shape()) + " vs " +
                          shape_str(candidate.shape()));
    if (!(epsilon >= 0.0)) throw contract_error("clip_step: epsilon < 0");
    auto o = x_orig.data();
    auto c = candidate.data();
    std::vector<double> out(c.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = std::clamp(c[i], o[i] - epsilon, o[i] + epsilon);
        out[i] = std::clamp(v, 0.0, 255.0);
    }
    return Tensor::from_data(x_orig.shape(), std::move(out));
}

AttackResult attack(const Estimator& model, const std::vector<Tensor>& inputs,
                    const GazeLabel& label, const AttackConfig& cfg) {
    validate(cfg);
    const auto spec = model.input_spec();
    if (inputs.size() != spec.size())
        throw contract_error("attack: expected " + std::to_string(spec.size()) +
                             " inputs, got " + std::to_string(inputs.size()));
    for (std::size_t i = 0; i < inputs.size(); ++i)
        if (inputs[i].shape() != spec[i].shape)
            throw shape_error("attack: input '" + spec[i].name + "' has shape " +
                              shape_str(inputs[i].shape()) + ", expected " +
                              shape_str(spec[i].shape));
    if (cfg.region_mask) {
        if (cfg.region_mask->size() != inputs[0].size())
            throw shape_error("attack: region mask size " +
                              std::to_string(cfg.region_mask->size()) +
                              " does not match first input " + std::to_string(inputs[0].size()));
        for (double v : *cfg.region_mask)
            if (v != 0.0 && v != 1.0) throw contract_error("attack: region mask must be binary");
    }

    const int n_iters =
        cfg.n_iters > 0 ? cfg.n_iters : derive_iterations(cfg.epsilon, cfg.alpha);

    std::vector<std::vector<double>> orig;
    std::vector<Tensor> cur;
    for (const auto& in : inputs) {
        orig.emplace_back(in.data().begin(), in.data().end());
        cur.push_back(in.detach(true));
    }

    AttackResult res;
    res.loss_trace.reserve(static_cast<std::size_t>(n_iters) + 1);
    double best_loss = 0.0;
    std::vector<std::vector<double>> best_data;
    std::vector<std::array<double, 3>> best_heads;

    for (int k = 0; k <= n_iters; ++k) {
        std::vector<Tensor> heads = model.forward(cur);
        LossBreakdown lb = attack_objective(heads, cfg.target.vec, cur, cfg.lambda_tv);
        double loss = lb.total.item();
        if (!std::isfinite(loss))
            throw numeric_error("attack: non-finite loss at iteration " + std::to_string(k));
        res.loss_trace.push_back(loss);

        if (k == 0 || loss < best_loss) {
            best_loss = loss;
            res.best_iter = k;
            best_data.clear();
            for (const auto& t : cur) best_data.emplace_back(t.data().begin(), t.data().end());
            best_heads.clear();
            for (const auto& h : heads) {
                auto d = h.data();
                best_heads.push_back({d[0], d[1], d[2]});
            }
        }
        if (k == n_iters) break;

        lb.total.backward();
        for (std::size_t i = 0; i < cur.size(); ++i) {
            auto g = cur[i].grad();
            auto step = sign(g);
            auto d = cur[i].data();
            std::vector<double> next(d.size());
            for (std::size_t j = 0; j < next.size(); ++j) {
                double m = (i == 0 && cfg.region_mask) ? (*cfg.region_mask)[j] : 1.0;
                double v = d[j] - cfg.alpha * step[j] * m;
                v = std::clamp(v, orig[i][j] - cfg.epsilon, orig[i][j] + cfg.epsilon);
                next[j] = std::clamp(v, 0.0, 255.0);
            }
            cur[i] = Tensor::from_data(cur[i].shape(), std::move(next), true);
        }
    }

    for (std::size_t i = 0; i < inputs.size(); ++i)
        res.x_adv.push_back(Tensor::from_data(inputs[i].shape(), best_data[i]));
    KahanSum te, ge;
    for (const auto& h : best_heads) {
        te.add(angle_between_deg(h, cfg.target.vec));
        ge.add(angle_between_deg(h, label.vec));
    }
    res.final_target_error_deg = te.sum / static_cast<double>(best_heads.size());
    res.final_gt_error_deg = ge.sum / static_cast<double>(best_heads.size());
    return res;
}

BatchAttackReport batch_attack(const Estimator& model, const Dataset& fold,
                               const std::vector<int>& quadrants, const AttackConfig& cfg,
                               bool keep_results) {
    if (fold.samples.empty()) throw contract_error("batch_attack: empty fold");
    if (quadrants.empty()) throw contract_error("batch_attack: no targets");

    const auto* gm = dynamic_cast<const GazeModel*>(&model);
    if (!gm) throw contract_error("batch_attack: model must expose sample inputs");

    BatchAttackReport rep;
    std::vector<std::vector<double>> target_errs(quadrants.size());
    std::vector<std::vector<double>> gt_errs(quadrants.size());
    std::vector<double> all_target, all_gt;

    for (const auto& s : fold.samples) {
        std::vector<Tensor> inputs = gm->inputs_from_sample(s);
        for (std::size_t qi = 0; qi < quadrants.size(); ++qi) {
            AttackConfig c = cfg;
            c.target = quadrant_target(quadrants[qi]);
            AttackResult r = attack(model, inputs, s.label, c);
            target_errs[qi].push_back(r.final_target_error_deg);
            gt_errs[qi].push_back(r.final_gt_error_deg);
            all_target.push_back(r.final_target_error_deg);
            all_gt.push_back(r.final_gt_error_deg);
            if (keep_results) rep.results.push_back(std::move(r));
        }
    }

    for (std::size_t qi = 0; qi < quadrants.size(); ++qi) {
        TargetRow row;
        row.quadrant = quadrants[qi];
        row.count = target_errs[qi].size();
        auto t = mean_std(target_errs[qi]);
        auto g = mean_std(gt_errs[qi]);
        row.target_mean = t.mean;
        row.target_std = t.stddev;
        row.gt_mean = g.mean;
        row.gt_std = g.stddev;
        rep.per_target.push_back(row);
    }
    auto t = mean_std(all_target);
    auto g = mean_std(all_gt);
    rep.target_mean = t.mean;
    rep.target_std = t.stddev;
    rep.gt_mean = g.mean;
    rep.gt_std = g.stddev;
    return rep;
}

}  // namespace gazelab
