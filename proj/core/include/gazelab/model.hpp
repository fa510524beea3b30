#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gazelab/data.hpp"
#include "gazelab/gaze.hpp"
#include "gazelab/tensor.hpp"

namespace gazelab {

struct InputSpec {
    std::string name;
    Shape shape;
};

// Anything the attacks can target: maps image inputs to one or more unit
// gaze 3-vectors, differentiably.
class Estimator {
public:
    virtual ~Estimator() = default;
    virtual std::vector<Tensor> forward(const std::vector<Tensor>& inputs) const = 0;
    virtual std::vector<InputSpec> input_spec() const = 0;
    virtual std::size_t num_heads() const = 0;
};

enum class ModelKind : std::uint32_t {
    single_input_cnn = 0,
    multi_input_multi_head = 1,
};

enum class LossKind : std::uint32_t {
    mse_pitchyaw = 0,
    angular = 1,
};

struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 0.05;
    LossKind loss_kind = LossKind::mse_pitchyaw;
    std::uint64_t seed = 0;
};

struct TrainResult {
    std::vector<double> loss_curve;  // mean batch loss per epoch
    double final_train_angular_deg = 0.0;
    std::size_t parameter_updates = 0;
};

class GazeModel : public Estimator {
public:
    static GazeModel create(ModelKind kind, std::uint64_t seed);

    std::vector<Tensor> forward(const std::vector<Tensor>& inputs) const override;
    std::vector<InputSpec> input_spec() const override;
    std::size_t num_heads() const override;

    ModelKind kind() const { return kind_; }
    std::size_t param_count() const;
    std::vector<std::pair<std::string, Tensor>>& params() { return params_; }
    const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }

    // Model inputs for a dataset sample (pixel range [0,255]; the forward pass
    // scales by 1/255 internally).
    std::vector<Tensor> inputs_from_sample(const Sample& s, bool requires_grad = false) const;

    void save(const std::string& path) const;
    static GazeModel load(const std::string& path);

private:
    ModelKind kind_ = ModelKind::single_input_cnn;
    std::vector<std::pair<std::string, Tensor>> params_;
    const Tensor& param(const std::string& name) const;
};

TrainResult train(GazeModel& model, const Dataset& dataset, const TrainConfig& cfg);

// Mean angular error (degrees) between model predictions (averaged over
// heads) and ground truth over a dataset.
double mean_angular_error_deg(const GazeModel& model, const Dataset& dataset);

namespace detail {

// Free adversarial training knobs; train_impl with nullptr is plain SGD.
struct FreeAdvOptions {
    int replay_m = 1;
    double epsilon = 0.0;  // 0 freezes the perturbation buffer at zero
    double alpha = 0.0;
    double lambda_adv = 0.0;
};

TrainResult train_impl(GazeModel& model, const Dataset& dataset, const TrainConfig& cfg,
                       const FreeAdvOptions* adv);

}  // namespace detail

}  // namespace gazelab
