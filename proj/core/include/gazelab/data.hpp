#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gazelab/gaze.hpp"

namespace gazelab {

inline constexpr int kFaceSize = 48;
inline constexpr int kEyeSize = 24;

// Labels sampled uniformly from [-kLabelRange, kLabelRange] for both angles.
inline constexpr double kLabelRange = kPi / 3.0;

struct Rect {
    int x = 0, y = 0, w = 0, h = 0;
    bool contains(int px, int py) const {
        return px >= x && px < x + w && py >= y && py < y + h;
    }
    bool intersects(const Rect& o) const {
        return x < o.x + o.w && o.x < x + w && y < o.y + o.h && o.y < y + h;
    }
};

struct Ellipse {
    int cx = 0, cy = 0, rx = 1, ry = 1;
    bool contains(int px, int py) const {
        double dx = (px - cx) / static_cast<double>(rx);
        double dy = (py - cy) / static_cast<double>(ry);
        return dx * dx + dy * dy <= 1.0;
    }
};

// Per-person appearance parameters, derived deterministically from
// (dataset_seed, person_id).
struct PersonStyle {
    int person_id = 0;
    double skin_level = 0.5;
    double iris_level = 0.5;
    double contrast = 0.5;
    double jitter_dx = 0.0;  // landmark position jitter, pixels
    double jitter_dy = 0.0;
};

struct Sample {
    std::vector<double> face;       // kFaceSize^2, row-major, values in [0,255]
    std::vector<double> left_eye;   // kEyeSize^2
    std::vector<double> right_eye;  // kEyeSize^2
    GazeLabel label;
    int person_id = 0;
    std::map<std::string, Rect> landmark_boxes;  // "eyes", "nose", "mouth"
    Ellipse face_area;
};

struct Dataset {
    std::vector<Sample> samples;
    std::uint64_t dataset_seed = 0;
    std::vector<PersonStyle> persons;
};

PersonStyle derive_style(std::uint64_t dataset_seed, int person_id);

// Renderers are exposed so tests can probe the iris encoding directly.
Sample render_sample(const PersonStyle& style, const GazeLabel& label,
                     std::uint64_t noise_seed);

Dataset generate(std::uint64_t dataset_seed, int n_persons, int samples_per_person);

std::pair<Dataset, Dataset> split_leave_one_person_out(const Dataset& ds, int held_out);

// Binary face mask (kFaceSize^2) for a union of regions out of
// {"eyes","nose","mouth","others"}. "others" is the face ellipse minus the
// three landmark rectangles; all four together cover the whole face area.
std::vector<double> region_mask(const Sample& sample, const std::set<std::string>& regions);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace gazelab
