#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "gazelab/data.hpp"
#include "gazelab/image_io.hpp"

using namespace gazelab;

namespace {

std::filesystem::path temp_path(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST(Data, GenerateCounts) {
    Dataset ds = generate(7, 3, 10);
    EXPECT_EQ(ds.samples.size(), 30u);
    EXPECT_EQ(ds.persons.size(), 3u);
    EXPECT_EQ(ds.dataset_seed, 7u);
    for (const auto& s : ds.samples) {
        EXPECT_EQ(s.face.size(), static_cast<std::size_t>(kFaceSize * kFaceSize));
        EXPECT_EQ(s.left_eye.size(), static_cast<std::size_t>(kEyeSize * kEyeSize));
        EXPECT_EQ(s.right_eye.size(), static_cast<std::size_t>(kEyeSize * kEyeSize));
        for (double v : s.face) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 255.0);
        }
        EXPECT_LE(std::abs(s.label.pitch), kLabelRange);
        EXPECT_LE(std::abs(s.label.yaw), kLabelRange);
        EXPECT_EQ(s.landmark_boxes.count("eyes"), 1u);
        EXPECT_EQ(s.landmark_boxes.count("nose"), 1u);
        EXPECT_EQ(s.landmark_boxes.count("mouth"), 1u);
    }
    EXPECT_THROW(generate(7, 1, 10), contract_error);
    EXPECT_THROW(generate(7, 3, 0), contract_error);
}

TEST(Data, GenerateDeterministic) {
    Dataset a = generate(12, 2, 4);
    Dataset b = generate(12, 2, 4);
    ASSERT_EQ(a.samples.size(), b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        EXPECT_EQ(a.samples[i].face, b.samples[i].face);
        EXPECT_EQ(a.samples[i].label.pitch, b.samples[i].label.pitch);
    }
    Dataset c = generate(13, 2, 4);
    EXPECT_NE(a.samples[0].face, c.samples[0].face);
}

TEST(Data, LeaveOnePersonOutSplit) {
    Dataset ds = generate(7, 3, 10);
    auto [train, fold] = split_leave_one_person_out(ds, 1);
    EXPECT_EQ(train.samples.size(), 20u);
    EXPECT_EQ(fold.samples.size(), 10u);
    for (const auto& s : fold.samples) EXPECT_EQ(s.person_id, 1);
    for (const auto& s : train.samples) EXPECT_NE(s.person_id, 1);
    EXPECT_THROW(split_leave_one_person_out(ds, 3), contract_error);
}

TEST(Data, IrisMovesWithLabel) {
    // Same style and noise, opposite yaw: the eye crops must differ while the
    // gaze signal lives in the iris placement.
    PersonStyle st = derive_style(7, 0);
    Sample l = render_sample(st, GazeLabel::from_pitchyaw(0.0, 0.9), 5);
    Sample r = render_sample(st, GazeLabel::from_pitchyaw(0.0, -0.9), 5);
    EXPECT_NE(l.left_eye, r.left_eye);
    EXPECT_NE(l.face, r.face);

    // The difference is confined to the eyes landmark region on the face.
    const Rect eyes = l.landmark_boxes.at("eyes");
    for (int y = 0; y < kFaceSize; ++y)
        for (int x = 0; x < kFaceSize; ++x)
            if (!eyes.contains(x, y))
                EXPECT_EQ(l.face[y * kFaceSize + x], r.face[y * kFaceSize + x])
                    << "pixel (" << x << "," << y << ") outside eyes changed with yaw";
}

TEST(Data, StylesVaryAcrossPersons) {
    PersonStyle a = derive_style(7, 0);
    PersonStyle b = derive_style(7, 1);
    EXPECT_TRUE(a.skin_level != b.skin_level || a.iris_level != b.iris_level ||
                a.contrast != b.contrast);
    // deterministic per (seed, id)
    PersonStyle a2 = derive_style(7, 0);
    EXPECT_EQ(a.skin_level, a2.skin_level);
    EXPECT_EQ(a.jitter_dx, a2.jitter_dx);
}

TEST(Data, RegionMasksBinaryAndCovering) {
    Dataset ds = generate(7, 2, 2);
    const Sample& s = ds.samples[0];

    std::vector<std::vector<double>> masks;
    for (const char* name : {"eyes", "nose", "mouth", "others"})
        masks.push_back(region_mask(s, {name}));

    std::size_t n = kFaceSize * kFaceSize;
    for (const auto& m : masks) {
        ASSERT_EQ(m.size(), n);
        for (double v : m) EXPECT_TRUE(v == 0.0 || v == 1.0);
    }

    // the four regions partition the face ellipse
    std::vector<double> all = region_mask(s, {"eyes", "nose", "mouth", "others"});
    for (std::size_t i = 0; i < n; ++i) {
        double sum4 = masks[0][i] + masks[1][i] + masks[2][i] + masks[3][i];
        EXPECT_EQ(sum4, all[i]);
        EXPECT_LE(sum4, 1.0);  // disjoint
        int x = static_cast<int>(i) % kFaceSize, y = static_cast<int>(i) / kFaceSize;
        EXPECT_EQ(all[i], s.face_area.contains(x, y) ? 1.0 : 0.0);
    }

    EXPECT_THROW(region_mask(s, {"forehead"}), contract_error);
    EXPECT_THROW(region_mask(s, {}), contract_error);
}

TEST(Data, SaveLoadRoundTrip) {
    Dataset ds = generate(9, 2, 3);
    auto path = temp_path("gazelab_roundtrip.gzds");
    save_dataset(ds, path.string());
    Dataset back = load_dataset(path.string());
    ASSERT_EQ(back.samples.size(), ds.samples.size());
    EXPECT_EQ(back.dataset_seed, ds.dataset_seed);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        EXPECT_EQ(back.samples[i].face, ds.samples[i].face);
        EXPECT_EQ(back.samples[i].left_eye, ds.samples[i].left_eye);
        EXPECT_EQ(back.samples[i].label.pitch, ds.samples[i].label.pitch);
        EXPECT_EQ(back.samples[i].label.yaw, ds.samples[i].label.yaw);
        EXPECT_EQ(back.samples[i].person_id, ds.samples[i].person_id);
        EXPECT_EQ(back.samples[i].landmark_boxes.at("nose").x,
                  ds.samples[i].landmark_boxes.at("nose").x);
    }
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".index.txt");
}

TEST(Data, LoadRejectsGarbage) {
    auto path = temp_path("gazelab_garbage.gzds");
    {
        std::FILE* f = std::fopen(path.string().c_str(), "wb");
        ASSERT_NE(f, nullptr);
        std::fputs("not a dataset", f);
        std::fclose(f);
    }
    EXPECT_THROW(load_dataset(path.string()), format_error);
    std::filesystem::remove(path);
}

TEST(Data, PgmRoundTrip) {
    GrayImage img;
    img.width = 5;
    img.height = 3;
    img.pixels = {0, 12, 255, 7, 9, 100, 101, 102, 103, 104, 200, 201, 202, 203, 204};
    auto path = temp_path("gazelab_img.pgm");
    write_pgm(path.string(), img);
    GrayImage back = read_pgm(path.string());
    EXPECT_EQ(back.width, img.width);
    EXPECT_EQ(back.height, img.height);
    EXPECT_EQ(back.pixels, img.pixels);
    std::filesystem::remove(path);
}

TEST(Data, GrayConversions) {
    // to_gray clamps and rounds half up
    GrayImage g = to_gray({-3.0, 0.49, 0.5, 254.5, 300.0}, 5, 1);
    EXPECT_EQ(g.pixels[0], 0);
    EXPECT_EQ(g.pixels[1], 0);
    EXPECT_EQ(g.pixels[2], 1);
    EXPECT_EQ(g.pixels[3], 255);
    EXPECT_EQ(g.pixels[4], 255);

    // normalize_to_gray is min-max; constant input maps to zero
    GrayImage n = normalize_to_gray({2.0, 2.0, 2.0}, 3, 1);
    for (auto p : n.pixels) EXPECT_EQ(p, 0);
    GrayImage n2 = normalize_to_gray({1.0, 3.0, 2.0}, 3, 1);
    EXPECT_EQ(n2.pixels[0], 0);
    EXPECT_EQ(n2.pixels[1], 255);

    GrayImage up = upscale(n2, 2);
    EXPECT_EQ(up.width, 6u);
    EXPECT_EQ(up.height, 2u);
    EXPECT_EQ(up.pixels[0], n2.pixels[0]);
    EXPECT_EQ(up.pixels[1], n2.pixels[0]);
    EXPECT_EQ(up.pixels[2], n2.pixels[1]);
}
