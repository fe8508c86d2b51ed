#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace magictrap {

/// Coefficients of the clock-transition differential light shift
///
///   shift = beta1 * U + A * beta2 * B * U + A^2 * beta4 * U^2
///
/// with U the local intensity in Hz, B the bias field in Gauss and A the
/// degree of circular polarization. beta1 is taken to be independent of A.
struct SpeciesParams {
  std::string label;
  double beta1 = 0.0;  // third-order hyperfine-mediated term, Hz per Hz
  double beta2 = 0.0;  // cross term, 1/G
  double beta4 = 0.0;  // ground-state hyperpolarizability, 1/Hz
  std::string source;
  bool verified = false;
};

/// Operating point. Intensities of a red-detuned trap are negative.
struct TrapPoint {
  double b_field = 0.0;       // G
  double intensity = 0.0;     // Hz
  double polarization = 0.0;  // A in [0, 1]
};

/// Throws std::invalid_argument unless beta4 > 0 and all coefficients are
/// finite.
void validate(const SpeciesParams& params);

/// Throws std::invalid_argument unless b_field >= 0 and polarization in [0, 1].
void validate(const TrapPoint& point);

double dls_shift(const SpeciesParams& params, const TrapPoint& point);

/// Minimum of the shift over intensity, -(beta1 + A beta2 B)^2 / (4 A^2 beta4).
double dls_vertex_value(const SpeciesParams& params, double b_field, double polarization);

/// Trap depth |U| h / k_B in microkelvin.
double intensity_to_temperature(double intensity_hz);

/// k_B T / h in Hz for a temperature in microkelvin.
double temperature_to_frequency(double temperature_uk);

// Built-in parameter sets; identical to params/species.ini.
SpeciesParams rb85_measured();
SpeciesParams rb85_theory();
// Only b_max(A=1) = 3.50 G and U_M(3.180 G, A=1) = -2.2 MHz are anchored to
// observations; the overall scale of beta1 is a placeholder.
SpeciesParams rb87_placeholder();

/// Reads species blocks from an INI-style file. Each section is one parameter
/// set; the section name must equal its `label`. Required keys are exactly
/// label, beta1, beta2, beta4, source, verified.
std::vector<SpeciesParams> load_species_file(const std::filesystem::path& path);

const SpeciesParams& find_species(const std::vector<SpeciesParams>& table, std::string_view label);

}  // namespace magictrap
