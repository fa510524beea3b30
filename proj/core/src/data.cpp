#include "gazelab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "gazelab/rng.hpp"

namespace gazelab {

namespace {

// Face geometry (48x48). The three landmark rectangles are pairwise disjoint
// and lie inside the face ellipse for every jitter in [-1,1].
const Ellipse kFaceEllipse{24, 25, 19, 20};
const Rect kEyesRect{9, 14, 30, 10};
const Rect kNoseRect{21, 25, 6, 7};
const Rect kMouthRect{15, 34, 18, 6};

// Linear iris-offset encoding of (pitch, yaw), pixels at full label range.
constexpr double kFaceIrisDx = 3.0;
constexpr double kFaceIrisDy = 1.5;
constexpr double kEyeIrisDx = 5.0;
constexpr double kEyeIrisDy = 3.5;

struct Img {
    int w, h;
    std::vector<double> px;
    Img(int w_, int h_, double fill) : w(w_), h(h_), px(w_ * h_, fill) {}
    double& at(int x, int y) { return px[y * w + x]; }
};

void fill_ellipse(Img& img, double cx, double cy, double rx, double ry, double value) {
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double dx = (x - cx) / rx, dy = (y - cy) / ry;
            if (dx * dx + dy * dy <= 1.0) img.at(x, y) = value;
        }
}

// Disk with a linear soft edge: full coverage at d <= r - soft, none at d >= r.
void fill_disk_soft(Img& img, double cx, double cy, double r, double soft, double value) {
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double d = std::hypot(x - cx, y - cy);
            double f = std::min(1.0, std::max(0.0, (r - d) / soft));
            if (f > 0.0) img.at(x, y) = img.at(x, y) * (1.0 - f) + value * f;
        }
}

std::vector<double> quantize(const Img& img, Rng& noise, double amp) {
    std::vector<double> out(img.px.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = img.px[i] + noise.uniform(-amp, amp);
        out[i] = std::min(255.0, std::max(0.0, std::round(v)));
    }
    return out;
}

std::vector<double> render_eye_crop(const PersonStyle& st, const GazeLabel& label, Rng& noise) {
    const double skin = 120.0 + 60.0 * st.skin_level;
    const double sclera = 200.0 + 40.0 * st.contrast;
    const double iris = 20.0 + 50.0 * st.iris_level;
    Img img(kEyeSize, kEyeSize, skin);
    fill_ellipse(img, 12.0, 12.0, 9.0, 6.0, sclera);
    double dx = kEyeIrisDx * label.yaw / kLabelRange;
    double dy = kEyeIrisDy * label.pitch / kLabelRange;
    fill_disk_soft(img, 12.0 + dx, 12.0 + dy, 4.0, 1.5, iris);
    return quantize(img, noise, 4.0);
}

}  // namespace

PersonStyle derive_style(std::uint64_t dataset_seed, int person_id) {
    Rng rng = Rng::stream(dataset_seed, 0x50ULL + static_cast<std::uint64_t>(person_id));
    PersonStyle st;
    st.person_id = person_id;
    st.skin_level = rng.uniform();
    st.iris_level = rng.uniform();
    st.contrast = rng.uniform();
    st.jitter_dx = rng.uniform(-1.0, 1.0);
    st.jitter_dy = rng.uniform(-1.0, 1.0);
    return st;
}

Sample render_sample(const PersonStyle& st, const GazeLabel& label, std::uint64_t noise_seed) {
    Rng noise(noise_seed);

    const double skin = 120.0 + 60.0 * st.skin_level;
    const double sclera = 200.0 + 40.0 * st.contrast;
    const double iris = 20.0 + 50.0 * st.iris_level;

    Img face(kFaceSize, kFaceSize, 30.0);
    fill_ellipse(face, kFaceEllipse.cx, kFaceEllipse.cy, kFaceEllipse.rx, kFaceEllipse.ry, skin);

    const double jx = st.jitter_dx, jy = st.jitter_dy;
    const double eye_y = 19.0 + jy;
    const double iris_dx = kFaceIrisDx * label.yaw / kLabelRange;
    const double iris_dy = kFaceIrisDy * label.pitch / kLabelRange;
    for (double ex : {17.0 + jx, 31.0 + jx}) {
        fill_ellipse(face, ex, eye_y, 5.5, 3.5, sclera);
        fill_disk_soft(face, ex + iris_dx, eye_y + iris_dy, 2.4, 1.2, iris);
    }

    fill_ellipse(face, 24.0 + 0.5 * jx, 28.0, 2.0, 3.0, skin - 40.0);          // nose
    fill_ellipse(face, 24.0 + 0.5 * jx, 36.5 + 0.5 * jy, 7.0, 1.8, 60.0);      // mouth

    Sample s;
    s.label = label;
    s.person_id = st.person_id;
    s.face = quantize(face, noise, 4.0);
    s.left_eye = render_eye_crop(st, label, noise);
    s.right_eye = render_eye_crop(st, label, noise);
    s.landmark_boxes = {{"eyes", kEyesRect}, {"nose", kNoseRect}, {"mouth", kMouthRect}};
    s.face_area = kFaceEllipse;
    return s;
}

Dataset generate(std::uint64_t dataset_seed, int n_persons, int samples_per_person) {
    if (n_persons < 2)
        throw contract_error("generate: need at least 2 persons for leave-one-out");
    if (samples_per_person < 1) throw contract_error("generate: samples_per_person < 1");

    Dataset ds;
    ds.dataset_seed = dataset_seed;
    for (int p = 0; p < n_persons; ++p) ds.persons.push_back(derive_style(dataset_seed, p));

    for (int p = 0; p < n_persons; ++p) {
        const PersonStyle& st = ds.persons[p];
        for (int i = 0; i < samples_per_person; ++i) {
            std::uint64_t sid = static_cast<std::uint64_t>(p) * 1000003ULL +
                                static_cast<std::uint64_t>(i);
            Rng lrng = Rng::stream(dataset_seed, 0xA000000ULL + sid);
            double pitch = lrng.uniform(-kLabelRange, kLabelRange);
            double yaw = lrng.uniform(-kLabelRange, kLabelRange);
            std::uint64_t noise_seed = Rng::stream(dataset_seed, 0xB000000ULL + sid).next_u64();
            ds.samples.push_back(
                render_sample(st, GazeLabel::from_pitchyaw(pitch, yaw), noise_seed));
        }
    }
    return ds;
}

std::pair<Dataset, Dataset> split_leave_one_person_out(const Dataset& ds, int held_out) {
    bool known = std::any_of(ds.persons.begin(), ds.persons.end(),
                             [&](const PersonStyle& p) { return p.person_id == held_out; });
    if (!known)
        throw contract_error("split_leave_one_person_out: unknown person " +
                             std::to_string(held_out));
    Dataset train, test;
    train.dataset_seed = test.dataset_seed = ds.dataset_seed;
    for (const auto& p : ds.persons)
        (p.person_id == held_out ? test : train).persons.push_back(p);
    for (const auto& s : ds.samples)
        (s.person_id == held_out ? test : train).samples.push_back(s);
    return {std::move(train), std::move(test)};
}

std::vector<double> region_mask(const Sample& sample, const std::set<std::string>& regions) {
    if (regions.empty()) throw contract_error("region_mask: empty region set");
    for (const auto& r : regions)
        if (r != "eyes" && r != "nose" && r != "mouth" && r != "others")
            throw contract_error("region_mask: unknown region '" + r + "'");

    std::vector<double> mask(kFaceSize * kFaceSize, 0.0);
    bool others = regions.count("others") > 0;
    for (int y = 0; y < kFaceSize; ++y)
        for (int x = 0; x < kFaceSize; ++x) {
            bool in = false;
            for (const auto& name : {"eyes", "nose", "mouth"}) {
                const Rect& r = sample.landmark_boxes.at(name);
                if (r.contains(x, y)) {
                    in = regions.count(name) > 0;
                    goto decided;
                }
            }
            in = others && sample.face_area.contains(x, y);
        decided:
            mask[y * kFaceSize + x] = in ? 1.0 : 0.0;
        }
    return mask;
}

// ---- on-disk format ----
// magic "GZDS", u32 version, u64 seed, u32 n_persons, u32 n_samples,
// persons (id, 5 doubles), samples (id, pitch, yaw, face/left/right bytes,
// 3 rects, face ellipse).

namespace {

constexpr char kMagic[4] = {'G', 'Z', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw format_error("dataset file truncated");
    return v;
}

void write_pixels(std::ostream& os, const std::vector<double>& px) {
    for (double v : px) {
        unsigned char b = static_cast<unsigned char>(v);
        os.write(reinterpret_cast<const char*>(&b), 1);
    }
}

void read_pixels(std::istream& is, std::vector<double>& px, std::size_t n) {
    std::vector<unsigned char> buf(n);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (!is) throw format_error("dataset file truncated");
    px.resize(n);
    for (std::size_t i = 0; i < n; ++i) px[i] = buf[i];
}

void write_rect(std::ostream& os, const Rect& r) {
    write_pod<std::int32_t>(os, r.x);
    write_pod<std::int32_t>(os, r.y);
    write_pod<std::int32_t>(os, r.w);
    write_pod<std::int32_t>(os, r.h);
}

Rect read_rect(std::istream& is) {
    Rect r;
    r.x = read_pod<std::int32_t>(is);
    r.y = read_pod<std::int32_t>(is);
    r.w = read_pod<std::int32_t>(is);
    r.h = read_pod<std::int32_t>(is);
    return r;
}

std::uint64_t file_checksum(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
    return fnv1a64(buf);
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
    {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw format_error("cannot write " + path);
        os.write(kMagic, 4);
        write_pod(os, kVersion);
        write_pod(os, ds.dataset_seed);
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ds.persons.size()));
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ds.samples.size()));
        for (const auto& p : ds.persons) {
            write_pod<std::int32_t>(os, p.person_id);
            write_pod(os, p.skin_level);
            write_pod(os, p.iris_level);
            write_pod(os, p.contrast);
            write_pod(os, p.jitter_dx);
            write_pod(os, p.jitter_dy);
        }
        for (const auto& s : ds.samples) {
            write_pod<std::int32_t>(os, s.person_id);
            write_pod(os, s.label.pitch);
            write_pod(os, s.label.yaw);
            write_pixels(os, s.face);
            write_pixels(os, s.left_eye);
            write_pixels(os, s.right_eye);
            write_rect(os, s.landmark_boxes.at("eyes"));
            write_rect(os, s.landmark_boxes.at("nose"));
            write_rect(os, s.landmark_boxes.at("mouth"));
            write_pod<std::int32_t>(os, s.face_area.cx);
            write_pod<std::int32_t>(os, s.face_area.cy);
            write_pod<std::int32_t>(os, s.face_area.rx);
            write_pod<std::int32_t>(os, s.face_area.ry);
        }
    }
    // Human-readable index with a checksum of the binary file.
    std::ofstream idx(path + ".index.txt");
    idx << "gazelab dataset index\n";
    idx << "file: " << path << "\n";
    idx << "dataset_seed: " << ds.dataset_seed << "\n";
    idx << "persons: " << ds.persons.size() << "\n";
    idx << "samples: " << ds.samples.size() << "\n";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(file_checksum(path)));
    idx << "fnv1a64: " << buf << "\n";
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw format_error("bad dataset magic in " + path);
    if (read_pod<std::uint32_t>(is) != kVersion)
        throw format_error("unsupported dataset version in " + path);

    Dataset ds;
    ds.dataset_seed = read_pod<std::uint64_t>(is);
    std::uint32_t n_persons = read_pod<std::uint32_t>(is);
    std::uint32_t n_samples = read_pod<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < n_persons; ++i) {
        PersonStyle p;
        p.person_id = read_pod<std::int32_t>(is);
        p.skin_level = read_pod<double>(is);
        p.iris_level = read_pod<double>(is);
        p.contrast = read_pod<double>(is);
        p.jitter_dx = read_pod<double>(is);
        p.jitter_dy = read_pod<double>(is);
        ds.persons.push_back(p);
    }
    for (std::uint32_t i = 0; i < n_samples; ++i) {
        Sample s;
        s.person_id = read_pod<std::int32_t>(is);
        double pitch = read_pod<double>(is);
        double yaw = read_pod<double>(is);
        s.label = GazeLabel::from_pitchyaw(pitch, yaw);
        read_pixels(is, s.face, kFaceSize * kFaceSize);
        read_pixels(is, s.left_eye, kEyeSize * kEyeSize);
        read_pixels(is, s.right_eye, kEyeSize * kEyeSize);
        s.landmark_boxes["eyes"] = read_rect(is);
        s.landmark_boxes["nose"] = read_rect(is);
        s.landmark_boxes["mouth"] = read_rect(is);
        s.face_area.cx = read_pod<std::int32_t>(is);
        s.face_area.cy = read_pod<std::int32_t>(is);
        s.face_area.rx = read_pod<std::int32_t>(is);
        s.face_area.ry = read_pod<std::int32_t>(is);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace gazelab
