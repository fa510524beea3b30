#include "gazelab/gaze.hpp"

#include <cmath>

namespace gazelab {

std::array<double, 3> pitchyaw_to_vec(double pitch, double yaw) {
    return {-std::cos(pitch) * std::sin(yaw), -std::sin(pitch),
            -std::cos(pitch) * std::cos(yaw)};
}

std::pair<double, double> vec_to_pitchyaw(const std::array<double, 3>& v) {
    double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n == 0.0) throw contract_error("vec_to_pitchyaw: zero vector");
    double x = v[0] / n, y = v[1] / n, z = v[2] / n;
    double pitch = std::asin(std::min(1.0, std::max(-1.0, -y)));
    double yaw = (x == 0.0 && z == 0.0) ? 0.0 : std::atan2(-x, -z);
    return {pitch, yaw};
}

GazeLabel GazeLabel::from_pitchyaw(double pitch, double yaw) {
    GazeLabel g;
    g.pitch = pitch;
    g.yaw = yaw;
    g.vec = pitchyaw_to_vec(pitch, yaw);
    return g;
}

GazeLabel GazeLabel::from_vec(const std::array<double, 3>& v) {
    auto [p, y] = vec_to_pitchyaw(v);
    return from_pitchyaw(p, y);
}

double angle_between_deg(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
    if (na == 0.0 || nb == 0.0) throw contract_error("angle_between_deg: zero vector");
    double c = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (na * nb);
    c = std::min(1.0, std::max(-1.0, c));
    return std::acos(c) * kDegPerRad;
}

GazeLabel quadrant_target(int q) {
    const double a = kPi / 4.0;
    switch (q) {
        case 1: return GazeLabel::from_pitchyaw(a, a);
        case 2: return GazeLabel::from_pitchyaw(-a, a);
        case 3: return GazeLabel::from_pitchyaw(-a, -a);
        case 4: return GazeLabel::from_pitchyaw(a, -a);
        default: throw contract_error("quadrant_target: q must be in [1,4]");
    }
}

}  // namespace gazelab
