#pragma once
// Closed registries of scalar functions: observation functions h and the test
// functions used by filters / generator checks (values + derivatives).
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace msf {

enum class HKind { ScaledTanh, ClippedLinear, Zero, Constant };

struct HFun {
  HKind kind = HKind::ScaledTanh;
  double scale = 0.5;  // ScaledTanh: scale*tanh(x); Constant: the value
  double clip = 5.0;   // ClippedLinear: clamp(x, -clip, clip)

  double operator()(double x) const {
    switch (kind) {
      case HKind::ScaledTanh: return scale * std::tanh(x);
      case HKind::ClippedLinear: return std::clamp(x, -clip, clip);
      case HKind::Zero: return 0.0;
      case HKind::Constant: return scale;
    }
    return 0.0;
  }

  double bound() const {  // ||h||_inf
    switch (kind) {
      case HKind::ScaledTanh: return std::abs(scale);
      case HKind::ClippedLinear: return clip;
      case HKind::Zero: return 0.0;
      case HKind::Constant: return std::abs(scale);
    }
    return 0.0;
  }

  static HFun parse(const std::string& name, double scale, double clip);
};

// test-function registry: 0 tanh(x), 1 clip(x,[-R,R]) with R=3, 2 exp(-x^2), 3 one
inline constexpr int kNumTestFunctions = 4;
inline constexpr double kClipR = 3.0;

struct TestFn {
  double v = 0.0, d1 = 0.0, d2 = 0.0;
};

inline TestFn test_function(int id, double x) {
  TestFn f;
  switch (id) {
    case 0: {
      const double t = std::tanh(x);
      f.v = t;
      f.d1 = 1.0 - t * t;
      f.d2 = -2.0 * t * f.d1;
      return f;
    }
    case 1: {
      f.v = std::clamp(x, -kClipR, kClipR);
      f.d1 = (x > -kClipR && x < kClipR) ? 1.0 : 0.0;
      f.d2 = 0.0;
      return f;
    }
    case 2: {
      const double e = std::exp(-x * x);
      f.v = e;
      f.d1 = -2.0 * x * e;
      f.d2 = (4.0 * x * x - 2.0) * e;
      return f;
    }
    case 3: {
      f.v = 1.0;
      return f;
    }
    default: throw std::invalid_argument("test_function: unknown id " + std::to_string(id));
  }
}

int parse_test_function(const std::string& name);
std::string test_function_name(int id);

}  // namespace msf
