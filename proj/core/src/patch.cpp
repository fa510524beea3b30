#include "gazelab/patch.hpp"

#include <algorithm>
#include <cmath>

#include "gazelab/losses.hpp"
#include "gazelab/rng.hpp"

namespace gazelab {

namespace {

struct Stats {
    double mean = 0.0, stddev = 0.0;
};

Stats stats_of(const std::vector<double>& v) {
    Stats out;
    if (v.empty()) return out;
    double s = 0.0;
    for (double x : v) s += x;
    out.mean = s / static_cast<double>(v.size());
    double s2 = 0.0;
    for (double x : v) s2 += (x - out.mean) * (x - out.mean);
    out.stddev = std::sqrt(s2 / static_cast<double>(v.size()));
    return out;
}

const GazeModel& as_gaze_model(const Estimator& model, const char* who) {
    const auto* gm = dynamic_cast<const GazeModel*>(&model);
    if (!gm) throw contract_error(std::string(who) + ": model must expose sample inputs");
    return *gm;
}

// Face input with the patch composited in; remaining inputs untouched.
std::vector<Tensor> patched_inputs(const GazeModel& gm, const Sample& s, const Tensor& patch,
                                   const Tensor& mask) {
    std::vector<Tensor> inputs = gm.inputs_from_sample(s);
    inputs[0] = composite(inputs[0], patch, mask);
    return inputs;
}

}  // namespace

Tensor composite(const Tensor& x, const Tensor& patch, const Tensor& mask) {
    if (x.shape() != patch.shape() || x.shape() != mask.shape())
        throw shape_error("composite: shapes " + shape_str(x.shape()) + ", " +
                          shape_str(patch.shape()) + ", " + shape_str(mask.shape()));
    for (double v : mask.data())
        if (v != 0.0 && v != 1.0) throw contract_error("composite: mask must be binary");
    return masked_assign(x, mask, patch);
}

Tensor make_circle_mask(const Sample& geometry, double cx, double cy, double r,
                        bool landmark_clearance) {
    if (!(r > 0.0)) throw contract_error("make_circle_mask: radius must be positive");
    std::vector<double> m(static_cast<std::size_t>(kFaceSize) * kFaceSize, 0.0);
    for (int y = 0; y < kFaceSize; ++y)
        for (int x = 0; x < kFaceSize; ++x) {
            double dx = x - cx, dy = y - cy;
            if (dx * dx + dy * dy > r * r) continue;
            if (landmark_clearance) {
                bool blocked = false;
                for (const auto& [name, box] : geometry.landmark_boxes)
                    if (box.contains(x, y)) {
                        blocked = true;
                        break;
                    }
                if (blocked) continue;
            }
            m[static_cast<std::size_t>(y) * kFaceSize + x] = 1.0;
        }
    if (std::all_of(m.begin(), m.end(), [](double v) { return v == 0.0; }))
        throw contract_error("make_circle_mask: mask is empty");
    return Tensor::from_data({1, kFaceSize, kFaceSize}, std::move(m));
}

std::vector<std::size_t> sample_attack_set(const Dataset& fold, double fraction,
                                           std::uint64_t seed) {
    if (fold.samples.empty()) throw contract_error("sample_attack_set: empty fold");
    if (!(fraction > 0.0) || fraction > 1.0)
        throw contract_error("sample_attack_set: fraction must be in (0, 1]");
    const std::size_t n = fold.samples.size();
    std::size_t k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
    k = std::clamp<std::size_t>(k, 1, n);

    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng = Rng::stream(seed, 0x5e7);
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

PatchTrainResult train_patch(const Estimator& model, const Dataset& fold, const Tensor& mask,
                             const PatchTrainConfig& cfg, const PatchSpec* init) {
    if (!(cfg.alpha > 0.0)) throw contract_error("train_patch: alpha must be positive");
    if (cfg.num_epochs < 1 || cfg.steps_per_image < 1)
        throw contract_error("train_patch: num_epochs and steps_per_image must be >= 1");
    const GazeModel& gm = as_gaze_model(model, "train_patch");

    PatchTrainResult res;
    res.attack_set = sample_attack_set(fold, cfg.sample_fraction, cfg.seed);

    std::vector<double> p(mask.size());
    if (init) {
        if (init->content.shape() != mask.shape())
            throw shape_error("train_patch: init content shape " +
                              shape_str(init->content.shape()));
        auto d = init->content.data();
        p.assign(d.begin(), d.end());
    } else {
        Rng rng = Rng::stream(cfg.seed, 0x9a7c);
        for (auto& v : p) v = rng.uniform(0.0, 255.0);
    }

    for (int epoch = 0; epoch < cfg.num_epochs; ++epoch) {
        for (std::size_t si : res.attack_set) {
            const Sample& s = fold.samples[si];
            double best_loss = 0.0;
            std::vector<double> best_p = p;
            // Inner sign descent on this image; the best patch carries over.
            for (int step = 0; step <= cfg.steps_per_image; ++step) {
                Tensor p_leaf = Tensor::from_data(mask.shape(), p, true);
                std::vector<Tensor> heads = gm.forward(patched_inputs(gm, s, p_leaf, mask));
                LossBreakdown lb =
                    patch_objective(heads, cfg.target.vec, p_leaf, mask, cfg.lambda_tv);
                double loss = lb.total.item();
                if (!std::isfinite(loss))
                    throw numeric_error("train_patch: non-finite loss at epoch " +
                                        std::to_string(epoch));
                if (step == 0 || loss < best_loss) {
                    best_loss = loss;
                    best_p = p;
                }
                if (step == cfg.steps_per_image) break;

                lb.total.backward();
                auto g = sign(p_leaf.grad());
                auto md = mask.data();
                for (std::size_t j = 0; j < p.size(); ++j) {
                    if (md[j] == 0.0) continue;
                    p[j] = std::clamp(p[j] - cfg.alpha * g[j], 0.0, 255.0);
                }
            }
            p = best_p;
            res.loss_trace.push_back(best_loss);
        }
    }

    res.patch.content = Tensor::from_data(mask.shape(), std::move(p));
    res.patch.mask = mask;
    return res;
}

std::vector<PatchEvalRow> evaluate_patch(const Estimator& model, const Dataset& fold,
                                         const PatchSpec& patch,
                                         const std::vector<int>& quadrants) {
    if (fold.samples.empty()) throw contract_error("evaluate_patch: empty fold");
    if (quadrants.empty()) throw contract_error("evaluate_patch: no targets");
    const GazeModel& gm = as_gaze_model(model, "evaluate_patch");

    std::vector<std::array<double, 3>> preds;  // mean head direction per sample
    preds.reserve(fold.samples.size());
    for (const auto& s : fold.samples) {
        std::vector<Tensor> heads = gm.forward(patched_inputs(gm, s, patch.content, patch.mask));
        std::array<double, 3> v{0.0, 0.0, 0.0};
        for (const auto& h : heads) {
            auto d = h.data();
            for (int i = 0; i < 3; ++i) v[i] += d[i] / static_cast<double>(heads.size());
        }
        preds.push_back(v);
    }

    std::vector<PatchEvalRow> rows;
    for (int q : quadrants) {
        GazeLabel target = quadrant_target(q);
        std::vector<double> te, ge;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            te.push_back(angle_between_deg(preds[i], target.vec));
            ge.push_back(angle_between_deg(preds[i], fold.samples[i].label.vec));
        }
        auto ts = stats_of(te);
        auto gs = stats_of(ge);
        rows.push_back({q, ts.mean, ts.stddev, gs.mean, gs.stddev});
    }
    return rows;
}

}  // namespace gazelab
