#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace riskmap {

using Vec2 = Eigen::Vector2d;

// Default horizon layout: 10 Hz data, 1.5 s of history, 3 s of future.
inline constexpr int kHistorySteps = 15;
inline constexpr int kHorizonSteps = 30;
inline constexpr double kDefaultDt = 0.1;

// Ego footprint used whenever the scenario does not carry explicit dimensions.
inline constexpr double kEgoLength = 4.8;
inline constexpr double kEgoWidth = 1.8;

// Planner speed and lateral sampling ranges.
inline constexpr double kMaxSpeed = 15.0;
inline constexpr double kLateralRange = 3.0;

// Distance value reported for channels with nothing to measure (no obstacle,
// no red light). Large enough that exp(lambda * d) with lambda < 0 is ~0.
inline constexpr double kSentinelDistance = 1e4;

// Exponent cap inside risk mapping; keeps exp() finite in the planner loop.
inline constexpr double kRiskExpCap = 50.0;

// L2 norm bound applied to stage-2 batch gradients before the optimizer step.
inline constexpr double kGradClipNorm = 100.0;

// Floor applied to per-point log densities and log class probabilities.
inline constexpr double kLogFloor = -50.0;

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Vec2 position() const { return {x, y}; }
  Vec2 direction() const { return {std::cos(heading), std::sin(heading)}; }
};

inline double wrap_angle(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

inline double sq(double x) { return x * x; }

// Grid of per-sample, per-timestep channel values, row-major over (sample, t).
template <int Channels>
class PointGrid {
 public:
  PointGrid() = default;
  PointGrid(int samples, int horizon)
      : samples_(samples), horizon_(horizon),
        data_(static_cast<size_t>(samples) * horizon * Channels, 0.0) {}

  double& at(int i, int t, int c) { return data_[index(i, t, c)]; }
  double at(int i, int t, int c) const { return data_[index(i, t, c)]; }

  int samples() const { return samples_; }
  int horizon() const { return horizon_; }
  static constexpr int channels() { return Channels; }

  const std::vector<double>& raw() const { return data_; }

 private:
  size_t index(int i, int t, int c) const {
    return (static_cast<size_t>(i) * horizon_ + t) * Channels + c;
  }

  int samples_ = 0;
  int horizon_ = 0;
  std::vector<double> data_;
};

}  // namespace riskmap
