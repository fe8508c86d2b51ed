#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "magictrap/dephasing.hpp"

namespace magictrap {

/// Everything a CLI run needs. Loaded from a sectioned key-value file:
///
///   [species]  file, label
///   [trap]     b_field_gauss, polarization, intensity_hz
///   [noise]    sigma_pol, tau_b_s, raman_coeff_per_s_hz, temperature_uk,
///              trap_depth_for_thermal_hz ("auto" = operating intensity)
///   [mc]       trials, seed, threads, batches, t_start_s, t_stop_s, t_count,
///              t_spacing (linear|log)
///   [dls]      intensity_start_hz, intensity_stop_hz, intensity_count
///   [bline]    polarizations, b_start_gauss, b_stop_gauss ("max" = b_max of
///              each line), b_count
///   [match]    reference_label, reference_polarization, target_magic_intensity_hz
///   [scan]     depths_hz, solve_polarization
///   [fringes]  detuning_hz
///   [output]   prefix
///
/// Missing keys keep their defaults; unknown sections or keys are rejected.
struct RunConfig {
  std::filesystem::path species_file;
  std::string species = "Rb85_measured";

  double b_field = 3.180;
  double polarization = 0.2257;
  double intensity = -1.0e6;

  NoiseModel noise = NoiseModel::defaults();

  MonteCarloSettings mc;
  double t_start = 0.0;
  double t_stop = 3.0;
  std::size_t t_count = 61;
  TimeSpacing t_spacing = TimeSpacing::kLinear;

  double dls_start = -3.0e6;
  double dls_stop = 0.0;
  std::size_t dls_count = 61;

  std::vector<double> bline_polarizations{0.500, 0.306, 0.239, 0.225};
  double bline_b_start = 0.0;
  double bline_b_stop = -1.0;  // negative = each line's b_max
  std::size_t bline_b_count = 11;

  std::string reference_species = "Rb87_placeholder";
  double reference_polarization = 1.0;
  double target_magic_intensity = -1.0e6;

  std::vector<double> scan_depths{-1.0e6, -1.4e6, -1.8e6, -2.2e6};
  bool scan_solve_polarization = false;

  double fringe_detuning = 5.0;

  std::string output_prefix;

  std::vector<double> time_grid() const;
};

/// Default config with the shipped species file.
RunConfig default_config();

/// Throws ConfigError naming the offending key; IoError if the file is
/// unreadable.
RunConfig load_config(const std::filesystem::path& path);

/// Applies invariants of the populated types; throws ConfigError.
void validate(const RunConfig& config);

/// Complete config text; load_config of it reproduces `config`.
std::string dump_config(const RunConfig& config);

/// Location of the shipped params/species.ini.
std::filesystem::path default_species_file();

}  // namespace magictrap
