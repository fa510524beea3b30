#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "gazelab/common.hpp"
#include "harness.hpp"

namespace fs = std::filesystem;
using gazelab::harness::Options;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const char* tag) {
        path = fs::temp_directory_path() / (std::string("gazelab_test_") + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    EXPECT_TRUE(in.good()) << p;
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Options tiny_options(const std::string& out) {
    Options o;
    o.out_dir = out;
    o.n_persons = 2;
    o.samples_per_person = 3;
    o.epochs = 4;
    o.batch_size = 2;
    o.fold = 1;
    return o;
}

}  // namespace

TEST(Harness, ConfigRoundTrip) {
    TempDir tmp("config");
    Options o;
    o.out_dir = "/some/where";
    o.dataset_seed = 99;
    o.n_persons = 5;
    o.model_kind = "multi";
    o.learning_rate = 0.125;
    o.loss = "angular";
    o.eps_list = {2, 3, 5};
    o.alpha_list = {0.5};
    o.lambda_list = {0, 7};
    o.quadrants = {2, 4};
    o.regions = "eyes+nose";
    o.patch_cx = 11.5;
    o.defense_eps_list = {8};
    o.lambda_adv = 3.25;
    o.hardened_model_path = "/tmp/h.gzml";

    std::string path = (tmp.path / "cfg.ini").string();
    gazelab::harness::save_config(o, path);
    Options back = gazelab::harness::load_config(path);

    EXPECT_EQ(back.out_dir, o.out_dir);
    EXPECT_EQ(back.dataset_seed, o.dataset_seed);
    EXPECT_EQ(back.n_persons, o.n_persons);
    EXPECT_EQ(back.model_kind, o.model_kind);
    EXPECT_EQ(back.learning_rate, o.learning_rate);
    EXPECT_EQ(back.loss, o.loss);
    EXPECT_EQ(back.eps_list, o.eps_list);
    EXPECT_EQ(back.alpha_list, o.alpha_list);
    EXPECT_EQ(back.lambda_list, o.lambda_list);
    EXPECT_EQ(back.quadrants, o.quadrants);
    EXPECT_EQ(back.regions, o.regions);
    EXPECT_EQ(back.patch_cx, o.patch_cx);
    EXPECT_EQ(back.defense_eps_list, o.defense_eps_list);
    EXPECT_EQ(back.lambda_adv, o.lambda_adv);
    EXPECT_EQ(back.hardened_model_path, o.hardened_model_path);

    // serialization is stable: hash(load(save(o))) == hash(o)
    EXPECT_EQ(gazelab::harness::config_hash(back), gazelab::harness::config_hash(o));
    Options other = o;
    other.epsilon += 1.0;
    EXPECT_NE(gazelab::harness::config_hash(other), gazelab::harness::config_hash(o));
}

TEST(Harness, ConfigRejectsBadInput) {
    TempDir tmp("badcfg");
    auto write = [&](const char* name, const std::string& body) {
        std::ofstream(tmp.path / name) << body;
        return (tmp.path / name).string();
    };
    EXPECT_THROW(gazelab::harness::load_config(write("unknown.ini", "[attack]\nwibble = 3\n")),
                 gazelab::contract_error);
    EXPECT_THROW(gazelab::harness::load_config(write("noeq.ini", "[attack]\nepsilon 3\n")),
                 gazelab::format_error);
    EXPECT_THROW(gazelab::harness::load_config((tmp.path / "missing.ini").string()),
                 gazelab::format_error);
    // comments and blank lines are fine
    Options ok = gazelab::harness::load_config(
        write("ok.ini", "# comment\n\n[attack]\nepsilon = 3\n"));
    EXPECT_EQ(ok.epsilon, 3.0);
}

TEST(Harness, GenDataIdempotentAndVerified) {
    TempDir tmp("gendata");
    Options o = tiny_options(tmp.str());
    gazelab::harness::run_gen_data(o);

    fs::path cmd = tmp.path / "gen-data";
    ASSERT_TRUE(fs::exists(cmd / "config.ini"));
    ASSERT_TRUE(fs::exists(cmd / "manifest.json"));
    ASSERT_TRUE(fs::exists(tmp.path / "dataset.gzds"));
    EXPECT_TRUE(gazelab::harness::verify_dir(cmd.string()).empty());

    // regenerating produces bit-identical artifacts
    std::string record = slurp(cmd / "gen_data.json");
    std::string data = slurp(tmp.path / "dataset.gzds");
    gazelab::harness::run_gen_data(o);
    EXPECT_EQ(slurp(cmd / "gen_data.json"), record);
    EXPECT_EQ(slurp(tmp.path / "dataset.gzds"), data);

    // tampering is caught
    std::ofstream(cmd / "gen_data.json", std::ios::app) << " ";
    auto bad = gazelab::harness::verify_dir(cmd.string());
    ASSERT_EQ(bad.size(), 1u);
    EXPECT_EQ(bad[0], "gen_data.json");
    EXPECT_THROW(gazelab::harness::verify_dir(tmp.str()), gazelab::format_error);  // no manifest
}

TEST(Harness, TrainRequiresDataset) {
    TempDir tmp("nodata");
    Options o = tiny_options(tmp.str());
    EXPECT_THROW(gazelab::harness::run_train(o), gazelab::format_error);
    gazelab::harness::run_gen_data(o);
    o.model_kind = "banana";
    EXPECT_THROW(gazelab::harness::run_train(o), gazelab::contract_error);
}

TEST(Harness, SweepCsvByteReproducible) {
    TempDir a("sweep_a"), b("sweep_b");

    for (const TempDir* t : {&a, &b}) {
        Options o = tiny_options(t->str());
        gazelab::harness::run_gen_data(o);
        gazelab::harness::run_train(o);
        o.eps_list = {2, 4};
        o.alpha_list = {1};
        o.max_samples = 2;
        o.quadrants = {1, 3};
        gazelab::harness::run_sweep(o);
        EXPECT_TRUE(gazelab::harness::verify_dir((t->path / "sweep").string()).empty());
    }

    std::string csv_a = slurp(a.path / "sweep" / "sweep.csv");
    EXPECT_EQ(csv_a, slurp(b.path / "sweep" / "sweep.csv"));
    EXPECT_NE(csv_a.find("alpha"), std::string::npos);
    EXPECT_EQ(slurp(a.path / "sweep" / "heatmap.pgm"), slurp(b.path / "sweep" / "heatmap.pgm"));

    // one run record per grid cell
    std::size_t records = 0;
    for (const auto& e : fs::directory_iterator(a.path / "sweep" / "records")) {
        (void)e;
        ++records;
    }
    EXPECT_EQ(records, 2u);  // 2 eps x 1 alpha
}

TEST(Harness, SweepWorkerCountInvariant) {
    TempDir a("jobs1"), b("jobs2");
    for (auto [t, jobs] : {std::pair{&a, 1}, std::pair{&b, 3}}) {
        Options o = tiny_options(t->str());
        gazelab::harness::run_gen_data(o);
        gazelab::harness::run_train(o);
        o.eps_list = {2, 4};
        o.alpha_list = {1, 2};
        o.max_samples = 1;
        o.quadrants = {1};
        o.jobs = jobs;
        gazelab::harness::run_sweep(o);
    }
    // identical bytes regardless of worker scheduling (out_dir does not appear
    // in the CSV)
    EXPECT_EQ(slurp(a.path / "sweep" / "sweep.csv"), slurp(b.path / "sweep" / "sweep.csv"));
}
