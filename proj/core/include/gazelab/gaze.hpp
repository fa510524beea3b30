#pragma once

#include <array>

#include "gazelab/common.hpp"

namespace gazelab {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegPerRad = 180.0 / kPi;

// Gaze direction as (pitch, yaw) radians with the derived unit 3-vector.
// Convention: v = (-cos p * sin y, -sin p, -cos p * cos y), so (0,0) looks
// down the -z camera axis.
struct GazeLabel {
    double pitch = 0.0;
    double yaw = 0.0;
    std::array<double, 3> vec{0.0, 0.0, -1.0};

    static GazeLabel from_pitchyaw(double pitch, double yaw);
    static GazeLabel from_vec(const std::array<double, 3>& v);
};

std::array<double, 3> pitchyaw_to_vec(double pitch, double yaw);

// Inverse of the above; normalizes first, throws contract_error on zero
// input. At the poles (|pitch| = pi/2) yaw is defined as 0.
std::pair<double, double> vec_to_pitchyaw(const std::array<double, 3>& v);

// Angular distance between two direction vectors, in degrees.
double angle_between_deg(const std::array<double, 3>& a, const std::array<double, 3>& b);

// Four extreme target directions (pitch, yaw) = (±pi/4, ±pi/4), one per
// quadrant of the (pitch, yaw) plane.
GazeLabel quadrant_target(int q);  // q in [1,4]

}  // namespace gazelab
