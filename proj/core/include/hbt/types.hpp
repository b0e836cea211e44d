#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace hbt {

using complex = std::complex<double>;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](int axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
  constexpr double& operator[](int axis) { return axis == 0 ? x : axis == 1 ? y : z; }

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return s * a; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  double min() const { return std::fmin(x, std::fmin(y, z)); }
  double max() const { return std::fmax(x, std::fmax(y, z)); }
  double product() const { return x * y * z; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

constexpr Vec3 uniform(double v) { return {v, v, v}; }

// Harmonic-oscillator quantum numbers (j_x, j_y, j_z).
struct mode_index {
  int x = 0;
  int y = 0;
  int z = 0;

  constexpr int operator[](int axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
};

// Base of everything the library throws on purpose.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments, out-of-domain parameters, unmet preconditions.
class domain_error : public error {
 public:
  using error::error;
};

class divergence_error : public domain_error {
 public:
  using domain_error::domain_error;
};

// Density below the representable range where a ratio is requested.
class underflow_error : public domain_error {
 public:
  using domain_error::domain_error;
};

// g2 - 1 too small to define a decay length.
class flat_profile_error : public domain_error {
 public:
  using domain_error::domain_error;
};

// An iteration, bracket or quadrature did not reach its tolerance.
class convergence_error : public error {
 public:
  convergence_error(const std::string& what, double estimate = 0.0)
      : error(what), estimate_(estimate) {}
  double estimate() const { return estimate_; }

 private:
  double estimate_;
};

}  // namespace hbt
