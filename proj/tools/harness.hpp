#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gazelab::harness {

// Fully resolved experiment configuration. Every run_* command serializes the
// options it actually used to <out_dir>/<command>/config.ini, and
// load_config() of that file reproduces the run bit-for-bit.
struct Options {
    std::string out_dir = "out";

    // dataset
    std::uint64_t dataset_seed = 7;
    int n_persons = 8;
    int samples_per_person = 30;
    std::string dataset_path;  // default <out_dir>/dataset.gzds

    // model / training
    std::string model_kind = "single";  // "single" | "multi"
    std::string model_path;             // default <out_dir>/model.gzml
    int fold = 0;                       // held-out person id
    int epochs = 240;
    int batch_size = 8;
    double learning_rate = 0.05;
    std::string loss = "mse";  // "mse" | "angular"
    std::uint64_t train_seed = 1;

    // attack
    double epsilon = 8.0;
    double alpha = 1.0;
    double lambda_tv = 0.0;
    int n_iters = 0;  // 0 derives from (epsilon, alpha)
    std::vector<double> eps_list = {1, 2, 4, 8, 16, 32, 64};
    std::vector<double> alpha_list = {4, 2, 1, 0.5, 0.25, 0.125};
    std::vector<double> lambda_list = {0, 1000, 5000};
    std::vector<int> quadrants = {1, 2, 3, 4};
    std::string regions;  // '+'-joined region names for `attack`; empty = no mask
    double region_epsilon = 32.0;  // region-study defaults
    double region_alpha = 0.25;
    int max_samples = 0;           // truncate the eval fold; 0 keeps all
    int sample_index = 0;          // for `attack` / `saliency`
    int quadrant = 1;              // for `attack` / `saliency`
    int jobs = 1;                  // sweep worker pool size

    // patch
    double patch_alpha = 1.0;
    int patch_epochs = 5;
    int patch_steps = 20;
    double sample_fraction = 0.1;
    std::uint64_t patch_seed = 0;
    double patch_cx = 29.0, patch_cy = 38.0, patch_radius = 5.0;

    // defense
    int replay_m = 8;
    double defense_epsilon = 32.0;
    double defense_alpha = 4.0;
    double lambda_adv = 2.0;
    std::vector<double> defense_eps_list = {16, 32, 64};
    double defense_eval_alpha = 0.125;
    std::string hardened_model_path;  // default <out_dir>/hardened.gzml
};

// Sectioned key=value config. Grammar: `[section]` headers, `key = value`
// lines, `#` comments; lists are comma-separated. Unknown keys are an error.
void save_config(const Options& opt, const std::string& path);
Options load_config(const std::string& path);

// Hash of the serialized options, used to stamp run-record filenames.
std::string config_hash(const Options& opt);

// Each command writes its artifacts under <out_dir>/<command>/ along with
// config.ini and manifest.json (checksums of every written file).
void run_gen_data(const Options& opt);
void run_train(const Options& opt);
void run_attack(const Options& opt);
void run_sweep(const Options& opt);
void run_regions(const Options& opt);
void run_smooth(const Options& opt);
void run_patch(const Options& opt);
void run_defend(const Options& opt);
void run_defense_eval(const Options& opt);
void run_saliency(const Options& opt);

// Recomputes every checksum in <dir>/manifest.json; returns the mismatched
// paths (empty means verified).
std::vector<std::string> verify_dir(const std::string& dir);

}  // namespace gazelab::harness
