#pragma once

#include <numbers>

namespace magictrap::constants {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// k_B / h. Converts temperatures to frequencies (and trap depths back to uK).
inline constexpr double kBoltzmannOverPlanckHzPerK = 2.0837e10;

inline constexpr double kMicroKelvin = 1.0e-6;

}  // namespace magictrap::constants
