#include "magictrap/cli.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "magictrap/config.hpp"
#include "magictrap/dephasing.hpp"
#include "magictrap/errors.hpp"
#include "magictrap/estimation.hpp"
#include "magictrap/io.hpp"
#include "magictrap/magic_solver.hpp"
#include "magictrap/species.hpp"

namespace magictrap::cli {

namespace {

using io::format_double;

struct CommonOptions {
  std::string config_positional;
  std::string config;
  std::string params;
  std::string species;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> trials;
  std::optional<unsigned> threads;
  std::optional<std::string> output;
  bool dump_config = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool positional_config) {
  if (positional_config) cmd->add_option("config_file", o.config_positional, "Run configuration file");
  cmd->add_option("--config", o.config, "Run configuration file");
  cmd->add_option("--params", o.params, "Species parameter file");
  cmd->add_option("--species", o.species, "Species label");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--trials", o.trials, "Monte Carlo trials");
  cmd->add_option("--threads", o.threads, "Worker threads (results do not depend on it)");
  cmd->add_option("--output", o.output, "Output path prefix");
  cmd->add_flag("--dump-config", o.dump_config, "Print the effective configuration and exit");
}

RunConfig resolve_config(const CommonOptions& o) {
  if (!o.config.empty() && !o.config_positional.empty()) {
    throw ConfigError("give the config file either positionally or with --config, not both");
  }
  const std::string path = o.config.empty() ? o.config_positional : o.config;
  RunConfig c = path.empty() ? default_config() : load_config(path);
  if (!o.params.empty()) c.species_file = o.params;
  if (!o.species.empty()) c.species = o.species;
  if (o.seed) c.mc.seed = *o.seed;
  if (o.trials) c.mc.trials = *o.trials;
  if (o.threads) c.mc.threads = *o.threads;
  if (o.output) c.output_prefix = *o.output;
  validate(c);
  return c;
}

SpeciesParams lookup(const RunConfig& c, const std::string& label) {
  return find_species(load_species_file(c.species_file), label);
}

std::vector<double> linspace(double start, double stop, std::size_t count) {
  std::vector<double> v(count, start);
  for (std::size_t i = 1; i < count; ++i) {
    v[i] = start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  if (count > 1) v.back() = stop;
  return v;
}

// Writes to <prefix><suffix> when a prefix is configured, otherwise to `fallback`.
void emit(const RunConfig& c, const std::string& suffix, const std::string& text, std::ostream& fallback) {
  if (c.output_prefix.empty()) {
    fallback << text;
  } else {
    io::write_text_file(c.output_prefix + suffix, text);
  }
}

void cmd_dls(const RunConfig& c, std::ostream& out) {
  const auto params = lookup(c, c.species);
  auto grid = linspace(c.dls_start, c.dls_stop, c.dls_count);
  if (c.polarization > 0.0) {
    const double um = magic_intensity(params, c.b_field, c.polarization);
    if (um >= c.dls_start && um <= c.dls_stop && std::find(grid.begin(), grid.end(), um) == grid.end()) {
      grid.insert(std::lower_bound(grid.begin(), grid.end(), um), um);
    }
  }
  std::ostringstream text;
  io::write_dls_curve(text, synthesize_dls_curve(params, c.b_field, c.polarization, grid), c.polarization);
  emit(c, "_dls.csv", text.str(), out);
}

void cmd_magic(const RunConfig& c, std::ostream& out) {
  const auto params = lookup(c, c.species);
  const double um = magic_intensity(params, c.b_field, c.polarization);
  const double bmax = b_max(params, c.polarization);
  const TrapPoint at_magic{c.b_field, um, c.polarization};
  std::ostringstream text;
  text << "species=" << params.label << '\n'
       << "verified=" << (params.verified ? "true" : "false") << '\n'
       << "b_field_gauss=" << format_double(c.b_field) << '\n'
       << "polarization=" << format_double(c.polarization) << '\n'
       << "magic_intensity_hz=" << format_double(um) << '\n'
       << "trappable=" << (um <= 0.0 ? "true" : "false") << '\n'
       << "b_max_gauss=" << format_double(bmax) << '\n'
       << "margin_gauss=" << format_double(bmax - c.b_field) << '\n'
       << "vertex_shift_hz=" << format_double(dls_vertex_value(params, c.b_field, c.polarization)) << '\n'
       << "sensitivity_hz_per_pol=" << format_double(polarization_sensitivity(params, at_magic)) << '\n'
       << "depth_uk=" << format_double(intensity_to_temperature(um)) << '\n';
  emit(c, "_magic.txt", text.str(), out);
}

void cmd_match(const RunConfig& c, std::ostream& out) {
  const auto table = load_species_file(c.species_file);
  const auto& reference = find_species(table, c.reference_species);
  const auto& other = find_species(table, c.species);
  const auto m = match_working_field(reference, c.reference_polarization, other, c.b_field, c.target_magic_intensity);
  std::ostringstream text;
  text << "reference_species=" << reference.label << '\n'
       << "reference_verified=" << (reference.verified ? "true" : "false") << '\n'
       << "reference_polarization=" << format_double(m.reference_polarization) << '\n'
       << "reference_magic_intensity_hz=" << format_double(m.reference_magic_intensity) << '\n'
       << "reference_b_max_gauss=" << format_double(m.reference_b_max) << '\n'
       << "working_b_gauss=" << format_double(m.other.working_b) << '\n'
       << "margin_gauss=" << format_double(m.margin) << '\n'
       << "species=" << other.label << '\n'
       << "polarization=" << format_double(m.other.polarization) << '\n'
       << "magic_intensity_hz=" << format_double(m.other.magic_intensity) << '\n'
       << "depth_uk=" << format_double(intensity_to_temperature(m.other.magic_intensity)) << '\n'
       << "residual_slope=" << format_double(m.other.residual) << '\n'
       << "branch=" << to_string(m.other.branch) << '\n';
  emit(c, "_match.txt", text.str(), out);
}

void cmd_bline(const RunConfig& c, std::ostream& out) {
  const auto params = lookup(c, c.species);
  std::vector<BUmLine> lines;
  for (double a : c.bline_polarizations) {
    const double bmax = b_max(params, a);
    const double stop = c.bline_b_stop < 0.0 ? bmax : c.bline_b_stop;
    if (stop < c.bline_b_start) throw ConfigError("bline.b_start_gauss exceeds b_max at A=" + format_double(a));
    const auto grid = linspace(c.bline_b_start, stop, c.bline_b_count);
    lines.push_back(b_um_line(params, a, grid));
  }
  std::ostringstream text;
  io::write_bline(text, lines);
  emit(c, "_bline.csv", text.str(), out);
}

ContrastCurve simulate(const RunConfig& c) {
  const auto params = lookup(c, c.species);
  return simulate_ramsey_mc(params, {c.b_field, c.intensity, c.polarization}, c.noise, c.time_grid(), c.mc);
}

void cmd_simulate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto curve = simulate(c);
  std::ostringstream csv;
  io::write_contrast_curve(csv, curve);
  std::ostringstream report;
  report << "trials=" << curve.trials << '\n' << "seed=" << curve.seed << '\n';
  try {
    io::write_coherence(report, coherence_time(curve));
  } catch (const NumericalError& e) {
    report << "tau_s=inf\n" << "error=" << e.what() << '\n';
  }
  if (c.output_prefix.empty()) {
    out << csv.str();
    err << report.str();
  } else {
    io::write_text_file(c.output_prefix + "_contrast.csv", csv.str());
    io::write_text_file(c.output_prefix + "_coherence.txt", report.str());
  }
}

void cmd_scan(const RunConfig& c, std::ostream& out) {
  const auto params = lookup(c, c.species);
  const auto scan = scan_tau_vs_depth(params, c.b_field, c.polarization, c.scan_depths, c.noise, c.time_grid(),
                                      c.mc, {c.scan_solve_polarization});
  std::ostringstream text;
  io::write_scan(text, scan);
  emit(c, "_scan.csv", text.str(), out);
}

void cmd_fringes(const RunConfig& c, std::ostream& out) {
  std::ostringstream text;
  io::write_ramsey_trace(text, synthesize_fringes(simulate(c), c.fringe_detuning));
  emit(c, "_fringes.csv", text.str(), out);
}

struct FitOptions {
  std::vector<std::string> files;
  std::optional<double> polarization;
  std::optional<double> detuning_guess;
};

void cmd_fit(const std::string& kind, const RunConfig& c, const FitOptions& f, std::ostream& out) {
  if (f.files.empty()) throw ConfigError("fit " + kind + ": no input files");
  FitResult fit;
  if (kind == "betas") {
    std::vector<DlsCurve> curves;
    for (const auto& file : f.files) curves.push_back(io::read_dls_curve(file));
    fit = fit_betas(curves, f.polarization.value_or(c.polarization));
  } else {
    if (f.files.size() != 1) throw ConfigError("fit " + kind + ": expects exactly one input file");
    if (kind == "magic") {
      fit = fit_magic_point(io::read_dls_curve(f.files.front()));
    } else if (kind == "polarization") {
      fit = calibrate_polarization(io::read_dls_curve(f.files.front()), lookup(c, c.species));
    } else {
      fit = fit_ramsey_fringe(io::read_ramsey_trace(f.files.front()),
                              f.detuning_guess.value_or(c.fringe_detuning));
    }
  }
  std::ostringstream text;
  io::write_fit_result(text, fit, kind);
  emit(c, "_fit_" + kind + ".txt", text.str(), out);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Magic-intensity trap modelling: light shifts, magic conditions, Ramsey dephasing and fits"};
  app.name("magictrap");
  app.require_subcommand(1);

  CommonOptions common;
  FitOptions fit_options;
  std::string fit_kind;

  struct Entry {
    std::string name;
    std::string help;
  };
  const std::vector<Entry> simple{
      {"dls", "Tabulate the differential light shift over an intensity grid"},
      {"magic", "Magic intensity, b_max, vertex shift and sensitivity at one point"},
      {"match", "Polarization that puts a second species at the reference working field"},
      {"bline", "B-U_M lines for a list of polarizations"},
      {"simulate", "Monte Carlo Ramsey contrast curve and coherence time"},
      {"scan", "Coherence time against trap depth"},
      {"fringes", "Synthetic two-pulse population fringes from a simulated contrast curve"},
  };
  for (const auto& e : simple) add_common(app.add_subcommand(e.name, e.help), common, true);

  auto* fit = app.add_subcommand("fit", "Fit measurement-style data");
  fit->require_subcommand(1);
  for (const std::string kind : {"betas", "magic", "polarization", "ramsey"}) {
    auto* sub = fit->add_subcommand(kind);
    add_common(sub, common, false);
    sub->add_option("files", fit_options.files, "Input CSV files")->required();
    if (kind == "betas") sub->add_option("--polarization", fit_options.polarization, "Known polarization");
    if (kind == "ramsey") sub->add_option("--detuning-guess", fit_options.detuning_guess, "Initial detuning, Hz");
    sub->callback([&fit_kind, kind] { fit_kind = kind; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kSuccess : kConfigError;
  }

  try {
    const RunConfig config = resolve_config(common);
    if (common.dump_config) {
      out << dump_config(config);
      return kSuccess;
    }
    if (fit->parsed()) {
      cmd_fit(fit_kind, config, fit_options, out);
      return kSuccess;
    }
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "dls") cmd_dls(config, out);
    else if (name == "magic") cmd_magic(config, out);
    else if (name == "match") cmd_match(config, out);
    else if (name == "bline") cmd_bline(config, out);
    else if (name == "simulate") cmd_simulate(config, out, err);
    else if (name == "scan") cmd_scan(config, out);
    else if (name == "fringes") cmd_fringes(config, out);
    return kSuccess;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace magictrap::cli
