#include <cstdio>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "harness.hpp"

namespace {

using gazelab::harness::Options;

// CLI flags are parsed into a scratch Options; after parsing, only the flags
// the user actually passed are copied onto the base config, so a --config
// file provides defaults and explicit flags override it.
struct Binder {
    Options scratch;
    std::string config_path;
    std::vector<std::pair<CLI::Option*, std::function<void(Options&, const Options&)>>> bound;

    template <typename T>
    void add(CLI::App* cmd, const std::string& name, T Options::*member,
             const std::string& desc) {
        CLI::Option* opt = cmd->add_option(name, scratch.*member, desc);
        if constexpr (std::is_same_v<T, std::vector<int>> ||
                      std::is_same_v<T, std::vector<double>>)
            opt->delimiter(',');
        bound.emplace_back(opt, [member](Options& dst, const Options& src) {
            dst.*member = src.*member;
        });
    }

    Options resolve() const {
        Options out;
        if (!config_path.empty()) out = gazelab::harness::load_config(config_path);
        for (const auto& [opt, apply] : bound)
            if (opt->count() > 0) apply(out, scratch);
        return out;
    }
};

void add_common(CLI::App* cmd, Binder& b) {
    cmd->add_option("--config", b.config_path, "config file; flags override its values");
    b.add(cmd, "--out", &Options::out_dir, "output root (default $GAZELAB_OUT or ./out)");
    b.add(cmd, "--dataset", &Options::dataset_path, "dataset file path");
    b.add(cmd, "--model-path", &Options::model_path, "model file path");
    b.add(cmd, "--fold", &Options::fold, "held-out person id");
    b.add(cmd, "--max-samples", &Options::max_samples, "truncate the eval fold (0 = all)");
    b.add(cmd, "--quadrants", &Options::quadrants, "target quadrants (subset of 1..4)");
}

void add_attack_knobs(CLI::App* cmd, Binder& b) {
    b.add(cmd, "--eps", &Options::epsilon, "L-inf budget in pixel units");
    b.add(cmd, "--alpha", &Options::alpha, "per-step stride");
    b.add(cmd, "--lambda-tv", &Options::lambda_tv, "smoothness penalty weight");
    b.add(cmd, "--iters", &Options::n_iters, "iteration count (0 = derive)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gaze attack laboratory: synthetic data, attacks, defenses"};
    app.require_subcommand(1);

    std::vector<std::unique_ptr<Binder>> binders;
    auto make = [&](const std::string& name, const std::string& desc,
                    void (*runner)(const Options&)) {
        CLI::App* cmd = app.add_subcommand(name, desc);
        binders.push_back(std::make_unique<Binder>());
        Binder* b = binders.back().get();
        add_common(cmd, *b);
        cmd->callback([b, runner]() { runner(b->resolve()); });
        return std::pair{cmd, b};
    };

    {
        auto [cmd, b] = make("gen-data", "generate a synthetic gaze dataset",
                             gazelab::harness::run_gen_data);
        b->add(cmd, "--seed", &Options::dataset_seed, "dataset seed");
        b->add(cmd, "--persons", &Options::n_persons, "number of persons (>= 2)");
        b->add(cmd, "--per-person", &Options::samples_per_person, "samples per person");
    }
    {
        auto [cmd, b] =
            make("train", "train a gaze model, leave-one-person-out", gazelab::harness::run_train);
        b->add(cmd, "--model", &Options::model_kind, "single | multi");
        b->add(cmd, "--epochs", &Options::epochs, "gradient epochs");
        b->add(cmd, "--batch", &Options::batch_size, "minibatch size");
        b->add(cmd, "--lr", &Options::learning_rate, "SGD learning rate");
        b->add(cmd, "--loss", &Options::loss, "mse | angular");
        b->add(cmd, "--seed", &Options::train_seed, "init/shuffle seed");
    }
    {
        auto [cmd, b] =
            make("attack", "targeted attack on one sample", gazelab::harness::run_attack);
        add_attack_knobs(cmd, *b);
        b->add(cmd, "--sample", &Options::sample_index, "fold sample index");
        b->add(cmd, "--quadrant", &Options::quadrant, "target quadrant (1..4)");
        b->add(cmd, "--regions", &Options::regions, "restrict to regions, e.g. eyes+nose");
    }
    {
        auto [cmd, b] =
            make("sweep", "epsilon x alpha error grid + heatmap", gazelab::harness::run_sweep);
        b->add(cmd, "--eps-list", &Options::eps_list, "epsilon grid");
        b->add(cmd, "--alpha-list", &Options::alpha_list, "alpha grid");
        b->add(cmd, "--lambda-tv", &Options::lambda_tv, "smoothness penalty weight");
        b->add(cmd, "--jobs", &Options::jobs, "worker pool size");
    }
    {
        auto [cmd, b] =
            make("regions", "attack restricted to face regions", gazelab::harness::run_regions);
        b->add(cmd, "--eps", &Options::region_epsilon, "L-inf budget");
        b->add(cmd, "--alpha", &Options::region_alpha, "per-step stride");
    }
    {
        auto [cmd, b] = make("smooth", "smoothness-penalty sweep over lambda",
                             gazelab::harness::run_smooth);
        b->add(cmd, "--eps", &Options::epsilon, "L-inf budget");
        b->add(cmd, "--alpha", &Options::alpha, "per-step stride");
        b->add(cmd, "--lambda-list", &Options::lambda_list, "lambda values");
    }
    {
        auto [cmd, b] = make("patch", "universal patch study", gazelab::harness::run_patch);
        b->add(cmd, "--lambda-list", &Options::lambda_list, "lambda values");
        b->add(cmd, "--patch-alpha", &Options::patch_alpha, "sign-step stride");
        b->add(cmd, "--patch-epochs", &Options::patch_epochs, "passes over attack set");
        b->add(cmd, "--patch-steps", &Options::patch_steps, "sign-steps per image visit");
        b->add(cmd, "--fraction", &Options::sample_fraction, "attack-set fraction of fold");
        b->add(cmd, "--patch-seed", &Options::patch_seed, "patch init/sampling seed");
        b->add(cmd, "--cx", &Options::patch_cx, "circle center x");
        b->add(cmd, "--cy", &Options::patch_cy, "circle center y");
        b->add(cmd, "--radius", &Options::patch_radius, "circle radius");
    }
    {
        auto [cmd, b] =
            make("defend", "adversarially train a hardened model", gazelab::harness::run_defend);
        b->add(cmd, "--model", &Options::model_kind, "single | multi");
        b->add(cmd, "--epochs", &Options::epochs, "gradient epochs (divisible by replay-m)");
        b->add(cmd, "--batch", &Options::batch_size, "minibatch size");
        b->add(cmd, "--lr", &Options::learning_rate, "SGD learning rate");
        b->add(cmd, "--loss", &Options::loss, "mse | angular");
        b->add(cmd, "--seed", &Options::train_seed, "init/shuffle seed");
        b->add(cmd, "--replay-m", &Options::replay_m, "minibatch replays");
        b->add(cmd, "--def-eps", &Options::defense_epsilon, "perturbation budget");
        b->add(cmd, "--def-alpha", &Options::defense_alpha, "perturbation ascent stride");
        b->add(cmd, "--lambda-adv", &Options::lambda_adv, "stability term weight");
        b->add(cmd, "--hardened-path", &Options::hardened_model_path, "output model path");
    }
    {
        auto [cmd, b] = make("defense-eval", "plain vs hardened under attack",
                             gazelab::harness::run_defense_eval);
        b->add(cmd, "--eps-list", &Options::defense_eps_list, "attack epsilon grid");
        b->add(cmd, "--alpha", &Options::defense_eval_alpha, "attack stride");
        b->add(cmd, "--hardened-path", &Options::hardened_model_path, "hardened model path");
    }
    {
        auto [cmd, b] = make("saliency", "input-gradient magnitude maps",
                             gazelab::harness::run_saliency);
        b->add(cmd, "--sample", &Options::sample_index, "fold sample index");
        b->add(cmd, "--quadrant", &Options::quadrant, "target quadrant (1..4)");
        b->add(cmd, "--eps", &Options::epsilon, "L-inf budget");
        b->add(cmd, "--alpha", &Options::alpha, "per-step stride");
        b->add(cmd, "--loss", &Options::loss, "mse | angular");
    }

    std::string verify_path;
    CLI::App* verify = app.add_subcommand("verify", "check artifact checksums in a run dir");
    verify->add_option("dir", verify_path, "run directory containing manifest.json")
        ->required();
    verify->callback([&verify_path]() {
        auto bad = gazelab::harness::verify_dir(verify_path);
        if (bad.empty()) {
            std::printf("verify: ok (%s)\n", verify_path.c_str());
            return;
        }
        for (const auto& rel : bad) std::printf("verify: MISMATCH %s\n", rel.c_str());
        throw CLI::RuntimeError(1);
    });

    try {
        CLI11_PARSE(app, argc, argv);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
