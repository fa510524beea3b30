#include "gazelab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "gazelab/detail/node.hpp"
#include "gazelab/losses.hpp"
#include "gazelab/rng.hpp"

namespace gazelab {

namespace {

Tensor init_weight(Shape shape, std::size_t fan_in, Rng& rng) {
    std::vector<double> w(numel(shape));
    double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : w) v = rng.normal() * scale;
    return Tensor::from_data(std::move(shape), std::move(w), true);
}

Tensor linear(const Tensor& w, const Tensor& b, const Tensor& x) {
    const std::size_t out = w.shape()[0], in = w.shape()[1];
    return add(flatten(matmul(w, reshape(x, {in, 1}))), b);
}

Tensor unit_head(const Tensor& v) {
    Tensor n = l2_norm(v);
    return div(v, concat({n, n, n}));
}

const Tensor& find_param(const std::vector<std::pair<std::string, Tensor>>& params,
                         const std::string& name) {
    for (const auto& [n, t] : params)
        if (n == name) return t;
    throw contract_error("unknown parameter " + name);
}

}  // namespace

const Tensor& GazeModel::param(const std::string& name) const {
    return find_param(params_, name);
}

GazeModel GazeModel::create(ModelKind kind, std::uint64_t seed) {
    GazeModel m;
    m.kind_ = kind;
    Rng rng = Rng::stream(seed, 0x3d);

    auto head_bias = [] {
        return Tensor::from_data({3}, {0.0, 0.0, -1.0}, true);
    };
    auto add_trunk = [&](const std::string& p, std::size_t flat) {
        m.params_.emplace_back(p + "conv1_w", init_weight({8, 1, 3, 3}, 9, rng));
        m.params_.emplace_back(p + "conv1_b", Tensor::zeros({8}, true));
        m.params_.emplace_back(p + "conv2_w", init_weight({16, 8, 3, 3}, 72, rng));
        m.params_.emplace_back(p + "conv2_b", Tensor::zeros({16}, true));
        m.params_.emplace_back(p + "fc_w", init_weight({32, flat}, flat, rng));
        m.params_.emplace_back(p + "fc_b", Tensor::zeros({32}, true));
    };

    if (kind == ModelKind::single_input_cnn) {
        add_trunk("face.", 144);
        m.params_.emplace_back("head_w", init_weight({3, 32}, 32, rng));
        m.params_.emplace_back("head_b", head_bias());
    } else {
        add_trunk("face.", 144);
        m.params_.emplace_back("eye.conv1_w", init_weight({8, 1, 3, 3}, 9, rng));
        m.params_.emplace_back("eye.conv1_b", Tensor::zeros({8}, true));
        m.params_.emplace_back("eye.conv2_w", init_weight({16, 8, 3, 3}, 72, rng));
        m.params_.emplace_back("eye.conv2_b", Tensor::zeros({16}, true));
        m.params_.emplace_back("eye.fc_w", init_weight({16, 144}, 144, rng));
        m.params_.emplace_back("eye.fc_b", Tensor::zeros({16}, true));
        m.params_.emplace_back("coarse_w", init_weight({3, 32}, 32, rng));
        m.params_.emplace_back("coarse_b", head_bias());
        m.params_.emplace_back("fine1_w", init_weight({32, 64}, 64, rng));
        m.params_.emplace_back("fine1_b", Tensor::zeros({32}, true));
        m.params_.emplace_back("fine2_w", init_weight({3, 32}, 32, rng));
        m.params_.emplace_back("fine2_b", head_bias());
    }
    return m;
}

std::vector<InputSpec> GazeModel::input_spec() const {
    const std::size_t F = kFaceSize, E = kEyeSize;
    if (kind_ == ModelKind::single_input_cnn) return {{"face", {1, F, F}}};
    return {{"face", {1, F, F}}, {"left_eye", {1, E, E}}, {"right_eye", {1, E, E}}};
}

std::size_t GazeModel::num_heads() const {
    return kind_ == ModelKind::single_input_cnn ? 1 : 2;
}

std::size_t GazeModel::param_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.size();
    return n;
}

namespace {

Tensor face_trunk(const std::vector<std::pair<std::string, Tensor>>& P,
                  const std::string& prefix, const Tensor& img, std::size_t pool3) {
    Tensor h = mul_scalar(img, 1.0 / 255.0);
    h = avg_pool2d(h, 2);
    h = relu(conv2d(h, find_param(P, prefix + "conv1_w"), find_param(P, prefix + "conv1_b")));
    h = avg_pool2d(h, 2);
    h = relu(conv2d(h, find_param(P, prefix + "conv2_w"), find_param(P, prefix + "conv2_b")));
    h = avg_pool2d(h, pool3);
    return relu(linear(find_param(P, prefix + "fc_w"), find_param(P, prefix + "fc_b"),
                       flatten(h)));
}

}  // namespace

std::vector<Tensor> GazeModel::forward(const std::vector<Tensor>& inputs) const {
    auto spec = input_spec();
    if (inputs.size() != spec.size())
        throw shape_error("forward: expected " + std::to_string(spec.size()) + " inputs, got " +
                          std::to_string(inputs.size()));
    for (std::size_t i = 0; i < spec.size(); ++i)
        if (inputs[i].shape() != spec[i].shape)
            throw shape_error("forward: input '" + spec[i].name + "' has shape " +
                              shape_str(inputs[i].shape()) + ", expected " +
                              shape_str(spec[i].shape));

    if (kind_ == ModelKind::single_input_cnn) {
        // 48 -> pool2 -> conv -> 22 -> pool2 -> 11 -> conv -> 9 -> pool3 -> 3
        Tensor f = face_trunk(params_, "face.", inputs[0], 3);
        return {unit_head(linear(param("head_w"), param("head_b"), f))};
    }

    Tensor f = face_trunk(params_, "face.", inputs[0], 3);
    Tensor coarse = unit_head(linear(param("coarse_w"), param("coarse_b"), f));

    // Eye branch: 24 -> pool2 -> conv -> 10 -> pool2 -> 5 -> conv -> 3
    auto eye_features = [&](const Tensor& img) {
        Tensor h = mul_scalar(img, 1.0 / 255.0);
        h = avg_pool2d(h, 2);
        h = relu(conv2d(h, param("eye.conv1_w"), param("eye.conv1_b")));
        h = avg_pool2d(h, 2);
        h = relu(conv2d(h, param("eye.conv2_w"), param("eye.conv2_b")));
        return relu(linear(param("eye.fc_w"), param("eye.fc_b"), flatten(h)));
    };
    Tensor le = eye_features(inputs[1]);
    Tensor re = eye_features(inputs[2]);
    Tensor joint = relu(linear(param("fine1_w"), param("fine1_b"), concat({f, le, re})));
    Tensor fine = unit_head(linear(param("fine2_w"), param("fine2_b"), joint));
    return {coarse, fine};
}

std::vector<Tensor> GazeModel::inputs_from_sample(const Sample& s, bool requires_grad) const {
    const std::size_t F = kFaceSize, E = kEyeSize;
    std::vector<Tensor> out;
    out.push_back(Tensor::from_data({1, F, F}, s.face, requires_grad));
    if (kind_ == ModelKind::multi_input_multi_head) {
        out.push_back(Tensor::from_data({1, E, E}, s.left_eye, requires_grad));
        out.push_back(Tensor::from_data({1, E, E}, s.right_eye, requires_grad));
    }
    return out;
}

double mean_angular_error_deg(const GazeModel& model, const Dataset& dataset) {
    if (dataset.samples.empty()) throw contract_error("mean_angular_error_deg: empty dataset");
    double acc = 0.0;
    for (const auto& s : dataset.samples) {
        auto heads = model.forward(model.inputs_from_sample(s));
        double e = 0.0;
        for (const auto& h : heads)
            e += angle_between_deg({h.data()[0], h.data()[1], h.data()[2]}, s.label.vec);
        acc += e / static_cast<double>(heads.size());
    }
    return acc / static_cast<double>(dataset.samples.size());
}

// ---- training ----

namespace detail {

TrainResult train_impl(GazeModel& model, const Dataset& dataset, const TrainConfig& cfg,
                       const FreeAdvOptions* adv) {
    if (cfg.epochs < 1) throw contract_error("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw contract_error("train: batch_size must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw contract_error("train: learning_rate must be > 0");
    if (dataset.samples.empty()) throw contract_error("train: empty dataset");

    const int replay_m = adv ? adv->replay_m : 1;
    if (replay_m < 1) throw contract_error("train: replay_m must be >= 1");
    if (cfg.epochs % replay_m != 0)
        throw contract_error("train: epochs (" + std::to_string(cfg.epochs) +
                             ") not divisible by replay_m (" + std::to_string(replay_m) + ")");
    const int outer_epochs = cfg.epochs / replay_m;
    const bool use_delta = adv && adv->epsilon > 0.0;
    const double lambda_adv = adv ? adv->lambda_adv : 0.0;

    const std::size_t n = dataset.samples.size();
    const std::size_t B = static_cast<std::size_t>(cfg.batch_size);
    auto spec = model.input_spec();

    // Persistent per-batch-slot perturbation buffers (free adversarial
    // training replays them across minibatches and epochs).
    std::vector<std::vector<std::vector<double>>> delta;  // [input][slot][pixel]
    if (use_delta) {
        delta.resize(spec.size());
        for (std::size_t i = 0; i < spec.size(); ++i)
            delta[i].assign(B, std::vector<double>(numel(spec[i].shape), 0.0));
    }

    Rng rng = Rng::stream(cfg.seed, 0x7e);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    for (int epoch = 0; epoch < outer_epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(i)]);

        double epoch_loss = 0.0;
        std::size_t epoch_updates = 0;
        for (std::size_t start = 0; start < n; start += B) {
            const std::size_t bsz = std::min(B, n - start);
            for (int replay = 0; replay < replay_m; ++replay) {
                for (auto& [name, p] : model.params()) p.zero_grad();

                std::vector<std::vector<Tensor>> adv_inputs(bsz);
                Tensor batch_loss;
                Tensor ascent;  // drives delta: angular error of adversarial predictions
                for (std::size_t j = 0; j < bsz; ++j) {
                    const Sample& s = dataset.samples[order[start + j]];
                    auto x = model.inputs_from_sample(s);
                    std::vector<Tensor> clean = model.forward(x);
                    Tensor loss = supervised_loss(clean, s.label, cfg.loss_kind);
                    if (use_delta) {
                        std::vector<Tensor> x_adv;
                        for (std::size_t k = 0; k < spec.size(); ++k) {
                            std::vector<double> v(x[k].data().begin(), x[k].data().end());
                            for (std::size_t t = 0; t < v.size(); ++t) {
                                v[t] = std::min(255.0, std::max(0.0, v[t] + delta[k][j][t]));
                            }
                            x_adv.push_back(Tensor::from_data(spec[k].shape, std::move(v), true));
                        }
                        adv_inputs[j] = x_adv;
                        std::vector<Tensor> adv = model.forward(x_adv);
                        if (lambda_adv > 0.0)
                            loss = add(loss, mul_scalar(
                                                 stability_loss(clean, adv, cfg.loss_kind),
                                                 lambda_adv));
                        // The stability term's input gradient vanishes exactly
                        // at delta = 0, so delta ascends the angular error of
                        // the perturbed prediction instead.
                        Tensor asc = supervised_loss(adv, s.label, LossKind::angular);
                        ascent = ascent.defined() ? add(ascent, asc) : asc;
                    }
                    batch_loss = batch_loss.defined() ? add(batch_loss, loss) : loss;
                }
                batch_loss = mul_scalar(batch_loss, 1.0 / static_cast<double>(bsz));
                if (!std::isfinite(batch_loss.item()))
                    throw divergence_error("train: NaN loss at epoch " + std::to_string(epoch));
                batch_loss.backward();

                for (auto& [name, p] : model.params()) {
                    auto& node = detail::node_of(p);
                    for (std::size_t t = 0; t < node.data.size(); ++t)
                        node.data[t] -= cfg.learning_rate * node.grad[t];
                }
                ++result.parameter_updates;
                ++epoch_updates;
                epoch_loss += batch_loss.item();

                if (use_delta) {
                    for (std::size_t j = 0; j < bsz; ++j)
                        for (auto& leaf : adv_inputs[j]) leaf.zero_grad();
                    mul_scalar(ascent, 1.0 / static_cast<double>(bsz)).backward();
                    for (std::size_t j = 0; j < bsz; ++j)
                        for (std::size_t k = 0; k < spec.size(); ++k) {
                            auto g = sign(adv_inputs[j][k].grad());
                            auto& d = delta[k][j];
                            for (std::size_t t = 0; t < d.size(); ++t) {
                                d[t] += adv->alpha * g[t];
                                d[t] = std::min(adv->epsilon, std::max(-adv->epsilon, d[t]));
                            }
                        }
                }
            }
        }
        result.loss_curve.push_back(epoch_loss / static_cast<double>(epoch_updates));
    }
    result.final_train_angular_deg = mean_angular_error_deg(model, dataset);
    return result;
}

}  // namespace detail

TrainResult train(GazeModel& model, const Dataset& dataset, const TrainConfig& cfg) {
    return detail::train_impl(model, dataset, cfg, nullptr);
}

// ---- serialization ----
// magic "GZML", u32 version, u32 kind, u32 n_params, per param:
// u32 name length, name bytes, u32 rank, u64 dims, f64 data.

namespace {
constexpr char kModelMagic[4] = {'G', 'Z', 'M', 'L'};
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

void GazeModel::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw format_error("cannot write " + path);
    os.write(kModelMagic, 4);
    auto w32 = [&](std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
    w32(kModelVersion);
    w32(static_cast<std::uint32_t>(kind_));
    w32(static_cast<std::uint32_t>(params_.size()));
    for (const auto& [name, t] : params_) {
        w32(static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        w32(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) {
            std::uint64_t v = d;
            os.write(reinterpret_cast<const char*>(&v), 8);
        }
        os.write(reinterpret_cast<const char*>(t.data().data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
}

GazeModel GazeModel::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kModelMagic, 4) != 0)
        throw format_error("bad model magic in " + path);
    auto r32 = [&]() {
        std::uint32_t v = 0;
        is.read(reinterpret_cast<char*>(&v), 4);
        if (!is) throw format_error("model file truncated: " + path);
        return v;
    };
    if (r32() != kModelVersion) throw format_error("unsupported model version in " + path);
    GazeModel m;
    std::uint32_t kind = r32();
    if (kind > 1) throw format_error("unknown model kind in " + path);
    m.kind_ = static_cast<ModelKind>(kind);
    std::uint32_t n = r32();
    for (std::uint32_t i = 0; i < n; ++i) {
        std::uint32_t len = r32();
        std::string name(len, '\0');
        is.read(name.data(), len);
        std::uint32_t rank = r32();
        Shape shape;
        for (std::uint32_t d = 0; d < rank; ++d) {
            std::uint64_t v = 0;
            is.read(reinterpret_cast<char*>(&v), 8);
            shape.push_back(static_cast<std::size_t>(v));
        }
        if (!is) throw format_error("model file truncated: " + path);
        std::vector<double> data(numel(shape));
        is.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!is) throw format_error("model file truncated: " + path);
        m.params_.emplace_back(std::move(name),
                               Tensor::from_data(std::move(shape), std::move(data), true));
    }
    return m;
}

}  // namespace gazelab
