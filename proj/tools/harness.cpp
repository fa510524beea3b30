#include "harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gazelab/attack.hpp"
#include "gazelab/data.hpp"
#include "gazelab/defense.hpp"
#include "gazelab/image_io.hpp"
#include "gazelab/losses.hpp"
#include "gazelab/model.hpp"
#include "gazelab/patch.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gazelab::harness {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
    return out;
}

std::string join(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) parts.push_back(cur);
    return parts;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string serialize_config(const Options& o) {
    std::ostringstream s;
    s << "# gazelab experiment config; lists are comma-separated\n";
    s << "[output]\n";
    s << "out_dir = " << o.out_dir << "\n";
    s << "jobs = " << o.jobs << "\n";
    s << "[dataset]\n";
    s << "dataset_seed = " << o.dataset_seed << "\n";
    s << "n_persons = " << o.n_persons << "\n";
    s << "samples_per_person = " << o.samples_per_person << "\n";
    s << "dataset_path = " << o.dataset_path << "\n";
    s << "[model]\n";
    s << "model_kind = " << o.model_kind << "\n";
    s << "model_path = " << o.model_path << "\n";
    s << "fold = " << o.fold << "\n";
    s << "epochs = " << o.epochs << "\n";
    s << "batch_size = " << o.batch_size << "\n";
    s << "learning_rate = " << fmt(o.learning_rate) << "\n";
    s << "loss = " << o.loss << "\n";
    s << "train_seed = " << o.train_seed << "\n";
    s << "[attack]\n";
    s << "epsilon = " << fmt(o.epsilon) << "\n";
    s << "alpha = " << fmt(o.alpha) << "\n";
    s << "lambda_tv = " << fmt(o.lambda_tv) << "\n";
    s << "n_iters = " << o.n_iters << "\n";
    s << "eps_list = " << join(o.eps_list) << "\n";
    s << "alpha_list = " << join(o.alpha_list) << "\n";
    s << "lambda_list = " << join(o.lambda_list) << "\n";
    s << "quadrants = " << join(o.quadrants) << "\n";
    s << "regions = " << o.regions << "\n";
    s << "region_epsilon = " << fmt(o.region_epsilon) << "\n";
    s << "region_alpha = " << fmt(o.region_alpha) << "\n";
    s << "max_samples = " << o.max_samples << "\n";
    s << "sample_index = " << o.sample_index << "\n";
    s << "quadrant = " << o.quadrant << "\n";
    s << "[patch]\n";
    s << "patch_alpha = " << fmt(o.patch_alpha) << "\n";
    s << "patch_epochs = " << o.patch_epochs << "\n";
    s << "patch_steps = " << o.patch_steps << "\n";
    s << "sample_fraction = " << fmt(o.sample_fraction) << "\n";
    s << "patch_seed = " << o.patch_seed << "\n";
    s << "patch_cx = " << fmt(o.patch_cx) << "\n";
    s << "patch_cy = " << fmt(o.patch_cy) << "\n";
    s << "patch_radius = " << fmt(o.patch_radius) << "\n";
    s << "[defense]\n";
    s << "replay_m = " << o.replay_m << "\n";
    s << "defense_epsilon = " << fmt(o.defense_epsilon) << "\n";
    s << "defense_alpha = " << fmt(o.defense_alpha) << "\n";
    s << "lambda_adv = " << fmt(o.lambda_adv) << "\n";
    s << "defense_eps_list = " << join(o.defense_eps_list) << "\n";
    s << "defense_eval_alpha = " << fmt(o.defense_eval_alpha) << "\n";
    s << "hardened_model_path = " << o.hardened_model_path << "\n";
    return s.str();
}

std::vector<double> parse_doubles(const std::string& v) {
    std::vector<double> out;
    for (const auto& p : split(v, ',')) out.push_back(std::stod(trim(p)));
    return out;
}

std::vector<int> parse_ints(const std::string& v) {
    std::vector<int> out;
    for (const auto& p : split(v, ',')) out.push_back(std::stoi(trim(p)));
    return out;
}

void apply_kv(Options& o, const std::string& section, const std::string& key,
              const std::string& v) {
    const std::string k = section + "." + key;
    if (k == "output.out_dir") o.out_dir = v;
    else if (k == "output.jobs") o.jobs = std::stoi(v);
    else if (k == "dataset.dataset_seed") o.dataset_seed = std::stoull(v);
    else if (k == "dataset.n_persons") o.n_persons = std::stoi(v);
    else if (k == "dataset.samples_per_person") o.samples_per_person = std::stoi(v);
    else if (k == "dataset.dataset_path") o.dataset_path = v;
    else if (k == "model.model_kind") o.model_kind = v;
    else if (k == "model.model_path") o.model_path = v;
    else if (k == "model.fold") o.fold = std::stoi(v);
    else if (k == "model.epochs") o.epochs = std::stoi(v);
    else if (k == "model.batch_size") o.batch_size = std::stoi(v);
    else if (k == "model.learning_rate") o.learning_rate = std::stod(v);
    else if (k == "model.loss") o.loss = v;
    else if (k == "model.train_seed") o.train_seed = std::stoull(v);
    else if (k == "attack.epsilon") o.epsilon = std::stod(v);
    else if (k == "attack.alpha") o.alpha = std::stod(v);
    else if (k == "attack.lambda_tv") o.lambda_tv = std::stod(v);
    else if (k == "attack.n_iters") o.n_iters = std::stoi(v);
    else if (k == "attack.eps_list") o.eps_list = parse_doubles(v);
    else if (k == "attack.alpha_list") o.alpha_list = parse_doubles(v);
    else if (k == "attack.lambda_list") o.lambda_list = parse_doubles(v);
    else if (k == "attack.quadrants") o.quadrants = parse_ints(v);
    else if (k == "attack.regions") o.regions = v;
    else if (k == "attack.region_epsilon") o.region_epsilon = std::stod(v);
    else if (k == "attack.region_alpha") o.region_alpha = std::stod(v);
    else if (k == "attack.max_samples") o.max_samples = std::stoi(v);
    else if (k == "attack.sample_index") o.sample_index = std::stoi(v);
    else if (k == "attack.quadrant") o.quadrant = std::stoi(v);
    else if (k == "patch.patch_alpha") o.patch_alpha = std::stod(v);
    else if (k == "patch.patch_epochs") o.patch_epochs = std::stoi(v);
    else if (k == "patch.patch_steps") o.patch_steps = std::stoi(v);
    else if (k == "patch.sample_fraction") o.sample_fraction = std::stod(v);
    else if (k == "patch.patch_seed") o.patch_seed = std::stoull(v);
    else if (k == "patch.patch_cx") o.patch_cx = std::stod(v);
    else if (k == "patch.patch_cy") o.patch_cy = std::stod(v);
    else if (k == "patch.patch_radius") o.patch_radius = std::stod(v);
    else if (k == "defense.replay_m") o.replay_m = std::stoi(v);
    else if (k == "defense.defense_epsilon") o.defense_epsilon = std::stod(v);
    else if (k == "defense.defense_alpha") o.defense_alpha = std::stod(v);
    else if (k == "defense.lambda_adv") o.lambda_adv = std::stod(v);
    else if (k == "defense.defense_eps_list") o.defense_eps_list = parse_doubles(v);
    else if (k == "defense.defense_eval_alpha") o.defense_eval_alpha = std::stod(v);
    else if (k == "defense.hardened_model_path") o.hardened_model_path = v;
    else throw contract_error("config: unknown key '" + k + "'");
}

// Fills derived defaults so the stored config is self-contained.
Options resolved(const Options& in) {
    Options o = in;
    if (o.out_dir.empty()) {
        const char* env = std::getenv("GAZELAB_OUT");
        o.out_dir = env ? env : "out";
    }
    if (o.dataset_path.empty()) o.dataset_path = o.out_dir + "/dataset.gzds";
    if (o.model_path.empty()) o.model_path = o.out_dir + "/model.gzml";
    if (o.hardened_model_path.empty()) o.hardened_model_path = o.out_dir + "/hardened.gzml";
    return o;
}

// Collects every artifact a command writes and seals the directory with
// checksums. Paths in the manifest are relative to the command directory.
class RunDir {
public:
    RunDir(const Options& opt, const std::string& command)
        : opt_(opt), dir_(fs::path(opt.out_dir) / command) {
        fs::create_directories(dir_);
        save_config(opt_, (dir_ / "config.ini").string());
        track("config.ini");
    }

    const fs::path& dir() const { return dir_; }

    std::string path(const std::string& rel) {
        fs::path p = dir_ / rel;
        fs::create_directories(p.parent_path());
        track(rel);
        return p.string();
    }

    void write_text(const std::string& rel, const std::string& content) {
        std::ofstream out(path(rel), std::ios::binary);
        if (!out) throw format_error("cannot open " + rel + " for writing");
        out << content;
    }

    void write_json(const std::string& rel, const json& j) { write_text(rel, j.dump(2) + "\n"); }

    void finish() {
        json files = json::object();
        for (const auto& rel : tracked_) {
            std::ifstream in(dir_ / rel, std::ios::binary);
            if (!in) throw format_error("manifest: missing artifact " + rel);
            std::string bytes((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
            char buf[20];
            std::snprintf(buf, sizeof(buf), "%016llx",
                          static_cast<unsigned long long>(fnv1a64(bytes)));
            files[rel] = buf;
        }
        std::ofstream out(dir_ / "manifest.json", std::ios::binary);
        out << json{{"files", files}}.dump(2) << "\n";
    }

private:
    void track(const std::string& rel) { tracked_.push_back(rel); }
    Options opt_;
    fs::path dir_;
    std::vector<std::string> tracked_;
};

Dataset load_required_dataset(const Options& o) {
    if (!fs::exists(o.dataset_path))
        throw format_error("dataset not found: " + o.dataset_path + " (run gen-data first)");
    return load_dataset(o.dataset_path);
}

GazeModel load_required_model(const std::string& path) {
    if (!fs::exists(path)) throw format_error("model not found: " + path + " (run train first)");
    return GazeModel::load(path);
}

Dataset eval_fold(const Dataset& ds, const Options& o) {
    auto [train_set, test_set] = split_leave_one_person_out(ds, o.fold);
    if (o.max_samples > 0 &&
        test_set.samples.size() > static_cast<std::size_t>(o.max_samples))
        test_set.samples.resize(static_cast<std::size_t>(o.max_samples));
    return test_set;
}

LossKind loss_kind_of(const Options& o) {
    if (o.loss == "mse") return LossKind::mse_pitchyaw;
    if (o.loss == "angular") return LossKind::angular;
    throw contract_error("unknown loss '" + o.loss + "' (expected mse or angular)");
}

ModelKind model_kind_of(const Options& o) {
    if (o.model_kind == "single") return ModelKind::single_input_cnn;
    if (o.model_kind == "multi") return ModelKind::multi_input_multi_head;
    throw contract_error("unknown model kind '" + o.model_kind + "' (expected single or multi)");
}

TrainConfig train_config_of(const Options& o) {
    TrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch_size;
    cfg.learning_rate = o.learning_rate;
    cfg.loss_kind = loss_kind_of(o);
    cfg.seed = o.train_seed;
    return cfg;
}

std::set<std::string> parse_regions(const std::string& spec) {
    std::set<std::string> out;
    for (const auto& r : split(spec, '+')) {
        std::string name = trim(r);
        if (name == "all") {
            out.insert({"eyes", "nose", "mouth", "others"});
        } else if (!name.empty()) {
            out.insert(name);
        }
    }
    return out;
}

json attack_record(const AttackResult& r, std::size_t sample, int person, int quadrant) {
    return json{{"sample", sample},
                {"person", person},
                {"quadrant", quadrant},
                {"best_iter", r.best_iter},
                {"n_iters", r.loss_trace.size() - 1},
                {"loss_clean", r.loss_trace.front()},
                {"loss_best", r.loss_trace[static_cast<std::size_t>(r.best_iter)]},
                {"target_error_deg", r.final_target_error_deg},
                {"gt_error_deg", r.final_gt_error_deg}};
}

GrayImage face_image(const Tensor& face) {
    std::vector<double> v(face.data().begin(), face.data().end());
    return to_gray(v, kFaceSize, kFaceSize);
}

std::array<double, 3> mean_prediction(const GazeModel& m, const std::vector<Tensor>& inputs) {
    std::vector<Tensor> heads = m.forward(inputs);
    std::array<double, 3> v{0, 0, 0};
    for (const auto& h : heads) {
        auto d = h.data();
        for (int i = 0; i < 3; ++i) v[i] += d[i] / static_cast<double>(heads.size());
    }
    return v;
}

// |dL/d(face)| for the supervised loss at the given inputs.
std::vector<double> face_saliency(const GazeModel& m, std::vector<Tensor> inputs,
                                  const GazeLabel& y, LossKind kind) {
    inputs[0] = inputs[0].detach(true);
    Tensor loss = supervised_loss(m.forward(inputs), y, kind);
    loss.backward();
    auto g = inputs[0].grad();
    std::vector<double> mag(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) mag[i] = std::abs(g[i]);
    return mag;
}

}  // namespace

void save_config(const Options& opt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw format_error("cannot write config " + path);
    out << serialize_config(opt);
}

Options load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot read config " + path);
    Options o;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = t.substr(1, t.size() - 2);
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw format_error("config " + path + ": bad line " + std::to_string(lineno));
        apply_kv(o, section, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return o;
}

std::string config_hash(const Options& opt) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(serialize_config(opt))));
    return buf;
}

void run_gen_data(const Options& in) {
    Options o = resolved(in);
    RunDir run(o, "gen-data");
    Dataset ds = generate(o.dataset_seed, o.n_persons, o.samples_per_person);
    fs::create_directories(fs::path(o.dataset_path).parent_path());
    save_dataset(ds, o.dataset_path);

    std::ifstream f(o.dataset_path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    char sum[20];
    std::snprintf(sum, sizeof(sum), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    run.write_json("gen_data.json",
                   json{{"dataset_path", o.dataset_path},
                        {"dataset_seed", o.dataset_seed},
                        {"n_persons", o.n_persons},
                        {"samples_per_person", o.samples_per_person},
                        {"n_samples", ds.samples.size()},
                        {"checksum", sum}});
    run.finish();
}

void run_train(const Options& in) {
    Options o = resolved(in);
    RunDir run(o, "train");
    Dataset ds = load_required_dataset(o);
    auto [train_set, test_set] = split_leave_one_person_out(ds, o.fold);

    GazeModel model = GazeModel::create(model_kind_of(o), o.train_seed);
    TrainResult tr = train(model, train_set, train_config_of(o));
    fs::create_directories(fs::path(o.model_path).parent_path());
    model.save(o.model_path);

    run.write_json("train.json",
                   json{{"model_path", o.model_path},
                        {"model_kind", o.model_kind},
                        {"held_out_person", o.fold},
                        {"train_samples", train_set.samples.size()},
                        {"loss_curve", tr.loss_curve},
                        {"parameter_updates", tr.parameter_updates},
                        {"final_train_angular_deg", tr.final_train_angular_deg},
                        {"heldout_angular_deg", mean_angular_error_deg(model, test_set)}});
    run.finish();
}

void run_attack(const Options& in) {
    Options o = resolved(in);
    RunDir run(o, "attack");
    Dataset fold = eval_fold(load_required_dataset(o), o);
    GazeModel model = load_required_model(o.model_path);
    if (o.sample_index < 0 ||
        static_cast<std::size_t>(o.sample_index) >= fold.samples.size())
        throw contract_error("attack: sample_index out of range");
    const Sample& s = fold.samples[static_cast<std::size_t>(o.sample_index)];

    AttackConfig cfg;
    cfg.epsilon = o.epsilon;
    cfg.alpha = o.alpha;
    cfg.n_iters = o.n_iters;
    cfg.lambda_tv = o.lambda_tv;
    cfg.target = quadrant_target(o.quadrant);
    if (!o.regions.empty()) cfg.region_mask = region_mask(s, parse_regions(o.regions));

    std::vector<Tensor> inputs = model.inputs_from_sample(s);
    AttackResult r = attack(model, inputs, s.label, cfg);

    write_pgm(run.path("face_before.pgm"), face_image(inputs[0]));
    write_pgm(run.path("face_after.pgm"), face_image(r.x_adv[0]));
    json rec = attack_record(r, static_cast<std::size_t>(o.sample_index), s.person_id,
                             o.quadrant);
    rec["loss_trace"] = r.loss_trace;
    rec["epsilon"] = o.epsilon;
    rec["alpha"] = o.alpha;
    rec["lambda_tv"] = o.lambda_tv;
    rec["regions"] = o.regions;
    run.write_json("records/" + config_hash(o) + "_s" + std::to_string(o.sample_index) + "_q" +
                       std::to_string(o.quadrant) + ".json",
                   rec);
    run.finish();
}

void run_sweep(const Options& in) {
    Options o = resolved(in);
    RunDir run(o, "sweep");
    Dataset fold = eval_fold(load_required_dataset(o), o);
    load_required_model(o.model_path);  // fail fast before spawning workers
    if (o.eps_list.empty() || o.alpha_list.empty())
        throw contract_error("sweep: empty epsilon or alpha list");

    struct Cell {
        double eps = 0, alpha = 0, mean = 0;
        std::vector<json> records;
    };
    const std::size_t n_cells = o.eps_list.size() * o.alpha_list.size();
    std::vector<Cell> cells(n_cells);

    // Worker pool; cell order in the report is fixed by index, not by
    // completion order, and each attack is fully deterministic. Workers use
    // private model instances: backward() writes into parameter gradient
    // buffers, so a shared instance would race.
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        GazeModel local = GazeModel::load(o.model_path);
        for (std::size_t c = next.fetch_add(1); c < n_cells; c = next.fetch_add(1)) {
            const std::size_t ai = c / o.eps_list.size();
            const std::size_t ei = c % o.eps_list.size();
            AttackConfig cfg;
            cfg.epsilon = o.eps_list[ei];
            cfg.alpha = o.alpha_list[ai];
            cfg.lambda_tv = o.lambda_tv;
            BatchAttackReport rep = batch_attack(local, fold, o.quadrants, cfg);
            Cell& cell = cells[c];
            cell.eps = cfg.epsilon;
            cell.alpha = cfg.alpha;
            cell.mean = rep.target_mean;
            std::size_t k = 0;
            for (std::size_t si = 0; si < fold.samples.size(); ++si)
                for (int q : o.quadrants) {
                    json rec = attack_record(rep.results[k++], si,
                                             fold.samples[si].person_id, q);
                    rec["epsilon"] = cfg.epsilon;
                    rec["alpha"] = cfg.alpha;
                    cell.records.push_back(std::move(rec));
                }
        }
    };
    const int jobs = std::max(1, o.jobs);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    auto guarded = [&](std::size_t slot) {
        try {
            worker();
        } catch (...) {
            errors[slot] = std::current_exception();
        }
    };
    for (int t = 1; t < jobs; ++t) pool.emplace_back(guarded, static_cast<std::size_t>(t));
    guarded(0);
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::ostringstream csv;
    csv << "alpha\\eps";
    for (double e : o.eps_list) csv << "," << fmt(e);
    csv << "\n";
    std::vector<double> grid;
    for (std::size_t ai = 0; ai < o.alpha_list.size(); ++ai) {
        csv << fmt(o.alpha_list[ai]);
        for (std::size_t ei = 0; ei < o.eps_list.size(); ++ei) {
            double v = cells[ai * o.eps_list.size() + ei].mean;
            csv << "," << fmt(v);
            grid.push_back(v);
        }
        csv << "\n";
    }
    run.write_text("sweep.csv", csv.str());

    const std::string hash = config_hash(o);
    for (const auto& cell : cells) {
        json cell_rec = json{{"epsilon", cell.eps},
                             {"alpha", cell.alpha},
                             {"mean_target_error_deg", cell.mean},
                             {"attacks", cell.records}};
        run.write_json("records/" + hash + "_eps" + fmt(cell.eps) + "_alpha" + fmt(cell.alpha) +
                           ".json",
                       cell_rec);
    }

    GrayImage heat = normalize_to_gray(grid, o.eps_list.size(), o.alpha_list.size());
    write_pgm(run.path("heatmap.pgm"), upscale(heat, 32));
    run.finish();
}

void run_regions(const Options& in) {
    Options o = resolved(in);
    RunDir run(o, "regions");
    Dataset fold = eval_fold(load_required_dataset(o), o);
    GazeModel model = load_required_model(o.model_path);

    const std::vector<std::string> row_specs = {
        "eyes",       "nose",      "mouth",      "others",         "nose+mouth",
        "eyes+nose",  "eyes+mouth", "eyes+nose+mouth", "all"};

    std::ostringstream csv;
    csv << "regions,target_mean_deg,target_std_deg,gt_mean_deg,gt_std_deg\n";
    const std::string hash = config_hash(o);
    for (const auto& spec : row_specs) {
        // Landmark boxes are identical across a person's samples; masks are
        // still built per sample to honor per-sample geometry.
        std::vector<double> te, ge;
        for (std::size_t si = 0; si < fold.samples.size(); ++si) {
            const Sample& s = fold.samples[si];
            AttackConfig cfg;
            cfg.epsilon = o.region_epsilon;
            cfg.alpha = o.region_alpha;
            cfg.region_mask = region_mask(s, parse_regions(spec));
            std::vector<Tensor> inputs = model.inputs_from_sample(s);
            for (int q : o.quadrants) {
                cfg.target = quadrant_target(q);
                AttackResult r = attack(model, inputs, s.label, cfg);
                te.push_back(r.final_target_error_deg);
                ge.push_back(r.final_gt_error_deg);
            }
        }
        double tm = 0, gm = 0;
        for (double v : te) tm += v;
        for (double v : ge) gm += v;
        tm /= static_cast<double>(te.size());
        gm /= static_cast<double>(ge.size());
        double ts = 0, gs = 0;
        for (double v : te) ts += (v - tm) * (v - tm);
        for (double v : ge) gs += (v - gm) * (v - gm);
        ts = std::sqrt(ts / static_cast<double>(te.size()));
        gs = std::sqrt(gs / static_cast<double>(ge.size()));
        csv << spec << "," << fmt(tm) << "," << fmt(ts) << "," << fmt(gm) << "," << fmt(gs)
            << "\n";
        run.write_json("records/" + hash + "_" + spec + ".json",
                       json{{"regions", spec},
                            {"epsilon", o.region_epsilon},
                            {"alpha", o.region_alpha},
                            {"target_errors_deg", te},
                            {"gt_errors_deg", ge}});
    }
    run.write_text("regions.csv", csv.str());
    run.finish();
}

void run_smooth(const Options& in) {
    Options o = resolved(in);
    RunDir run(o, "smooth");
    Dataset fold = eval_fold(load_required_dataset(o), o);
    GazeModel model = load_required_model(o.model_path);
    if (o.lambda_list.empty()) throw contract_error("smooth: empty lambda list");

    std::ostringstream csv;
    csv << "lambda_tv,target_mean_deg,perturbation_tv_mean,image_tv_mean\n";
    const std::string hash = config_hash(o);
    json directions = json::array();
    for (double lambda : o.lambda_list) {
        AttackConfig cfg;
        cfg.epsilon = o.epsilon;
        cfg.alpha = o.alpha;
        cfg.lambda_tv = lambda;
        std::vector<double> te, tv, itv;
        for (std::size_t si = 0; si < fold.samples.size(); ++si) {
            const Sample& s = fold.samples[si];
            std::vector<Tensor> inputs = model.inputs_from_sample(s);
            for (int q : o.quadrants) {
                cfg.target = quadrant_target(q);
                AttackResult r = attack(model, inputs, s.label, cfg);
                te.push_back(r.final_target_error_deg);

                auto a = r.x_adv[0].data();
                auto b = inputs[0].data();
                std::vector<double> delta(a.size());
                for (std::size_t i = 0; i < a.size(); ++i) delta[i] = (a[i] - b[i]) / 255.0;
                tv.push_back(
                    tv_loss(Tensor::from_data({kFaceSize, kFaceSize}, delta)).item());
                itv.push_back(
                    tv_loss(mul_scalar(r.x_adv[0], 1.0 / 255.0)).item());

                if (si == 0 && q == o.quadrants.front()) {
                    std::string tag = "lambda" + fmt(lambda);
                    write_pgm(run.path("face_before_" + tag + ".pgm"),
                              face_image(inputs[0]));
                    write_pgm(run.path("face_after_" + tag + ".pgm"),
                              face_image(r.x_adv[0]));
                    auto before = mean_prediction(model, inputs);
                    auto after = mean_prediction(model, r.x_adv);
                    directions.push_back(json{{"lambda_tv", lambda},
                                              {"ground_truth", s.label.vec},
                                              {"target", cfg.target.vec},
                                              {"predicted_before", before},
                                              {"predicted_after", after}});
                }
            }
        }
        double tm = 0, tvm = 0, itvm = 0;
        for (double v : te) tm += v;
        for (double v : tv) tvm += v;
        for (double v : itv) itvm += v;
        tm /= static_cast<double>(te.size());
        tvm /= static_cast<double>(tv.size());
        itvm /= static_cast<double>(itv.size());
        csv << fmt(lambda) << "," << fmt(tm) << "," << fmt(tvm) << "," << fmt(itvm) << "\n";
        run.write_json("records/" + hash + "_lambda" + fmt(lambda) + ".json",
                       json{{"lambda_tv", lambda},
                            {"target_errors_deg", te},
                            {"perturbation_tv", tv},
                            {"image_tv", itv}});
    }
    run.write_text("smooth.csv", csv.str());
    run.write_json("directions.json", directions);
    run.finish();
}

void run_patch(const Options& in) {
    Options o = resolved(in);
    RunDir run(o, "patch");
    Dataset fold = eval_fold(load_required_dataset(o), o);
    GazeModel model = load_required_model(o.model_path);
    if (o.lambda_list.empty()) throw contract_error("patch: empty lambda list");

    Tensor mask = make_circle_mask(fold.samples.front(), o.patch_cx, o.patch_cy,
                                   o.patch_radius, /*landmark_clearance=*/true);

    // Unpatched baseline per quadrant, for the effectiveness comparison.
    std::map<int, double> baseline;
    {
        PatchSpec identity;
        identity.mask = Tensor::zeros(mask.shape());
        identity.content = Tensor::zeros(mask.shape());
        for (const auto& row : evaluate_patch(model, fold, identity, o.quadrants))
            baseline[row.quadrant] = row.target_mean;
    }

    std::ostringstream csv;
    csv << "lambda_tv,quadrant,baseline_target_mean_deg,target_mean_deg,target_std_deg,"
           "gt_mean_deg,gt_std_deg,patch_tv\n";
    const std::string hash = config_hash(o);
    for (double lambda : o.lambda_list) {
        for (int q : o.quadrants) {
            PatchTrainConfig cfg;
            cfg.alpha = o.patch_alpha;
            cfg.num_epochs = o.patch_epochs;
            cfg.steps_per_image = o.patch_steps;
            cfg.sample_fraction = o.sample_fraction;
            cfg.lambda_tv = lambda;
            cfg.target = quadrant_target(q);
            cfg.seed = o.patch_seed;
            PatchTrainResult tr = train_patch(model, fold, mask, cfg);

            auto rows = evaluate_patch(model, fold, tr.patch, {q});
            const PatchEvalRow& row = rows.front();
            double patch_tv =
                tv_loss(mul_scalar(mul(tr.patch.content, mask), 1.0 / 255.0)).item();
            std::string tag = "lambda" + fmt(lambda) + "_q" + std::to_string(q);
            csv << fmt(lambda) << "," << q << "," << fmt(baseline.at(q)) << ","
                << fmt(row.target_mean) << "," << fmt(row.target_std) << ","
                << fmt(row.gt_mean) << "," << fmt(row.gt_std) << "," << fmt(patch_tv) << "\n";

            write_pgm(run.path("patch_" + tag + ".pgm"), face_image(tr.patch.content));
            run.write_json("records/" + hash + "_" + tag + ".json",
                           json{{"lambda_tv", lambda},
                                {"quadrant", q},
                                {"attack_set", tr.attack_set},
                                {"loss_trace", tr.loss_trace},
                                {"baseline_target_mean_deg", baseline.at(q)},
                                {"target_mean_deg", row.target_mean},
                                {"target_std_deg", row.target_std},
                                {"gt_mean_deg", row.gt_mean},
                                {"gt_std_deg", row.gt_std},
                                {"patch_tv", patch_tv}});
        }
    }
    write_pgm(run.path("mask.pgm"),
              to_gray([&] {
                  std::vector<double> v(mask.data().begin(), mask.data().end());
                  for (auto& x : v) x *= 255.0;
                  return v;
              }(), kFaceSize, kFaceSize));
    run.write_text("patch.csv", csv.str());
    run.finish();
}

void run_defend(const Options& in) {
    Options o = resolved(in);
    RunDir run(o, "defend");
    Dataset ds = load_required_dataset(o);
    auto [train_set, test_set] = split_leave_one_person_out(ds, o.fold);

    DefenseConfig cfg;
    cfg.base = train_config_of(o);
    cfg.replay_m = o.replay_m;
    cfg.epsilon = o.defense_epsilon;
    cfg.alpha = o.defense_alpha;
    cfg.lambda_adv = o.lambda_adv;
    if (cfg.base.epochs % cfg.replay_m != 0)
        throw contract_error("defend: epochs (" + std::to_string(cfg.base.epochs) +
                             ") not divisible by replay_m (" + std::to_string(cfg.replay_m) +
                             ")");

    GazeModel model = GazeModel::create(model_kind_of(o), o.train_seed);
    TrainResult tr = free_adv_train(model, train_set, cfg);
    fs::create_directories(fs::path(o.hardened_model_path).parent_path());
    model.save(o.hardened_model_path);

    run.write_json("defend.json",
                   json{{"hardened_model_path", o.hardened_model_path},
                        {"replay_m", o.replay_m},
                        {"epsilon", o.defense_epsilon},
                        {"alpha", o.defense_alpha},
                        {"lambda_adv", o.lambda_adv},
                        {"loss_curve", tr.loss_curve},
                        {"parameter_updates", tr.parameter_updates},
                        {"heldout_angular_deg", mean_angular_error_deg(model, test_set)}});
    run.finish();
}

void run_defense_eval(const Options& in) {
    Options o = resolved(in);
    RunDir run(o, "defense-eval");
    Dataset fold = eval_fold(load_required_dataset(o), o);
    GazeModel plain = load_required_model(o.model_path);
    GazeModel hardened = load_required_model(o.hardened_model_path);

    DefenseReport rep = evaluate_defense(plain, hardened, fold, o.defense_eps_list,
                                         o.quadrants, o.defense_eval_alpha);

    std::ostringstream csv;
    csv << "model,epsilon,quadrant,target_mean_deg,target_std_deg,gt_mean_deg,gt_std_deg\n";
    csv << "plain,clean,," << fmt(rep.clean_plain_deg) << ",,,\n";
    csv << "hardened,clean,," << fmt(rep.clean_hardened_deg) << ",,,\n";
    auto emit = [&](const char* name, const std::vector<DefenseCell>& cells) {
        for (const auto& c : cells)
            csv << name << "," << fmt(c.epsilon) << "," << c.quadrant << ","
                << fmt(c.target_mean) << "," << fmt(c.target_std) << "," << fmt(c.gt_mean)
                << "," << fmt(c.gt_std) << "\n";
    };
    emit("plain", rep.plain_cells);
    emit("hardened", rep.hardened_cells);
    run.write_text("defense_eval.csv", csv.str());

    json cells = json::array();
    auto record = [&](const char* name, const std::vector<DefenseCell>& v) {
        for (const auto& c : v)
            cells.push_back(json{{"model", name},
                                 {"epsilon", c.epsilon},
                                 {"quadrant", c.quadrant},
                                 {"target_mean_deg", c.target_mean},
                                 {"target_std_deg", c.target_std},
                                 {"gt_mean_deg", c.gt_mean},
                                 {"gt_std_deg", c.gt_std}});
    };
    record("plain", rep.plain_cells);
    record("hardened", rep.hardened_cells);
    run.write_json("records/" + config_hash(o) + "_cells.json",
                   json{{"clean_plain_deg", rep.clean_plain_deg},
                        {"clean_hardened_deg", rep.clean_hardened_deg},
                        {"cells", cells}});
    run.finish();
}

void run_saliency(const Options& in) {
    Options o = resolved(in);
    RunDir run(o, "saliency");
    Dataset fold = eval_fold(load_required_dataset(o), o);
    GazeModel model = load_required_model(o.model_path);
    if (o.sample_index < 0 ||
        static_cast<std::size_t>(o.sample_index) >= fold.samples.size())
        throw contract_error("saliency: sample_index out of range");
    const Sample& s = fold.samples[static_cast<std::size_t>(o.sample_index)];

    std::vector<Tensor> inputs = model.inputs_from_sample(s);
    LossKind kind = loss_kind_of(o);
    std::vector<double> clean_mag = face_saliency(model, inputs, s.label, kind);

    AttackConfig cfg;
    cfg.epsilon = o.epsilon;
    cfg.alpha = o.alpha;
    cfg.target = quadrant_target(o.quadrant);
    AttackResult r = attack(model, inputs, s.label, cfg);
    std::vector<double> adv_mag = face_saliency(model, r.x_adv, s.label, kind);

    write_pgm(run.path("face_clean.pgm"), face_image(inputs[0]));
    write_pgm(run.path("face_adv.pgm"), face_image(r.x_adv[0]));
    write_pgm(run.path("saliency_clean.pgm"),
              normalize_to_gray(clean_mag, kFaceSize, kFaceSize));
    write_pgm(run.path("saliency_adv.pgm"), normalize_to_gray(adv_mag, kFaceSize, kFaceSize));
    run.write_json("saliency.json", json{{"sample", o.sample_index},
                                         {"quadrant", o.quadrant},
                                         {"epsilon", o.epsilon},
                                         {"alpha", o.alpha},
                                         {"best_iter", r.best_iter}});
    run.finish();
}

std::vector<std::string> verify_dir(const std::string& dir) {
    fs::path manifest = fs::path(dir) / "manifest.json";
    std::ifstream in(manifest, std::ios::binary);
    if (!in) throw format_error("verify: no manifest at " + manifest.string());
    json j = json::parse(in);
    std::vector<std::string> bad;
    for (const auto& [rel, expected] : j.at("files").items()) {
        std::ifstream f(fs::path(dir) / rel, std::ios::binary);
        if (!f) {
            bad.push_back(rel);
            continue;
        }
        std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fnv1a64(bytes)));
        if (expected.get<std::string>() != buf) bad.push_back(rel);
    }
    return bad;
}

}  // namespace gazelab::harness
