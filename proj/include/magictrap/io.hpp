#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include "magictrap/dephasing.hpp"
#include "magictrap/estimation.hpp"
#include "magictrap/magic_solver.hpp"

namespace magictrap::io {

/// Shortest decimal string that reads back to the same double; "inf",
/// "-inf" and "nan" for non-finite values.
std::string format_double(double value);

/// Strict double parse of the whole string. Accepts "inf"/"-inf".
double parse_double(std::string_view text);

// Readers throw IoError naming the file and line number on malformed input.

/// `intensity_hz,shift_hz,shift_err_hz` with a `# b_field_gauss=<value>` line.
DlsCurve read_dls_curve(const std::filesystem::path& path);

/// `t_s,population,population_err`.
RamseyTrace read_ramsey_trace(const std::filesystem::path& path);

void write_dls_curve(std::ostream& out, const DlsCurve& curve, double polarization);
void write_ramsey_trace(std::ostream& out, const RamseyTrace& trace);

/// `t_s,contrast,stderr`.
void write_contrast_curve(std::ostream& out, const ContrastCurve& curve);

/// `depth_hz,tau_s,tau_err_s,stretch`; failed depths get tau_s=nan and are
/// listed in trailing comment lines.
void write_scan(std::ostream& out, std::span<const ScanPoint> scan);

/// `polarization,b_gauss,magic_intensity_hz`, one block per line.
void write_bline(std::ostream& out, std::span<const BUmLine> lines);

/// Metadata as `# key=value` lines followed by `param,value,sigma` rows.
void write_fit_result(std::ostream& out, const FitResult& fit, std::string_view kind);

void write_coherence(std::ostream& out, const CoherenceResult& result);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace magictrap::io
