#include "magictrap/config.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "magictrap/errors.hpp"
#include "magictrap/io.hpp"

#ifndef MAGICTRAP_PARAMS_DIR
#define MAGICTRAP_PARAMS_DIR "params"
#endif

namespace magictrap {

std::filesystem::path default_species_file() {
  return std::filesystem::path(MAGICTRAP_PARAMS_DIR) / "species.ini";
}

RunConfig default_config() {
  RunConfig config;
  config.species_file = default_species_file();
  return config;
}

std::vector<double> RunConfig::time_grid() const {
  return make_time_grid(t_start, t_stop, t_count, t_spacing);
}

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> kSchema{
      {"species", {"file", "label"}},
      {"trap", {"b_field_gauss", "polarization", "intensity_hz"}},
      {"noise", {"sigma_pol", "tau_b_s", "raman_coeff_per_s_hz", "temperature_uk", "trap_depth_for_thermal_hz"}},
      {"mc", {"trials", "seed", "threads", "batches", "t_start_s", "t_stop_s", "t_count", "t_spacing"}},
      {"dls", {"intensity_start_hz", "intensity_stop_hz", "intensity_count"}},
      {"bline", {"polarizations", "b_start_gauss", "b_stop_gauss", "b_count"}},
      {"match", {"reference_label", "reference_polarization", "target_magic_intensity_hz"}},
      {"scan", {"depths_hz", "solve_polarization"}},
      {"fringes", {"detuning_hz"}},
      {"output", {"prefix"}},
  };
  return kSchema;
}

class Reader {
 public:
  explicit Reader(const boost::property_tree::ptree& tree) : tree_(tree) {}

  const std::string* raw(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return nullptr;
    const auto node = sec->get_child_optional(key);
    if (!node) return nullptr;
    return &node->data();
  }

  void number(const std::string& section, const std::string& key, double& target) const {
    if (const auto* text = raw(section, key)) target = parse(section, key, *text);
  }

  template <typename Int>
  void count(const std::string& section, const std::string& key, Int& target) const {
    if (const auto* text = raw(section, key)) target = static_cast<Int>(to_count(section, key, *text));
  }

  void text(const std::string& section, const std::string& key, std::string& target) const {
    if (const auto* t = raw(section, key)) target = *t;
  }

  void flag(const std::string& section, const std::string& key, bool& target) const {
    if (const auto* t = raw(section, key)) {
      if (*t == "true") target = true;
      else if (*t == "false") target = false;
      else throw ConfigError(section + "." + key + ": expected true or false, got '" + *t + "'");
    }
  }

  void list(const std::string& section, const std::string& key, std::vector<double>& target) const {
    if (const auto* t = raw(section, key)) {
      std::vector<double> values;
      std::stringstream ss(*t);
      std::string item;
      while (std::getline(ss, item, ',')) values.push_back(parse(section, key, item));
      if (values.empty()) throw ConfigError(section + "." + key + ": empty list");
      target = std::move(values);
    }
  }

  static double parse(const std::string& section, const std::string& key, const std::string& text) {
    try {
      return io::parse_double(text);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(section + "." + key + ": " + e.what());
    }
  }

  static std::uint64_t to_count(const std::string& section, const std::string& key, const std::string& text) {
    std::size_t used = 0;
    unsigned long long value = 0;
    try {
      value = std::stoull(text, &used);
    } catch (const std::exception&) {
      throw ConfigError(section + "." + key + ": expected a non-negative integer, got '" + text + "'");
    }
    if (used != text.size() || text.front() == '-') {
      throw ConfigError(section + "." + key + ": expected a non-negative integer, got '" + text + "'");
    }
    return value;
  }

 private:
  const boost::property_tree::ptree& tree_;
};

std::string join(const std::vector<double>& values) {
  std::string out;
  for (double v : values) out += (out.empty() ? "" : ", ") + io::format_double(v);
  return out;
}

}  // namespace

RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("config file not found: " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(path.string() + ":" + std::to_string(e.line()) + ": " + e.message());
  }

  for (const auto& [section, block] : tree) {
    const auto it = schema().find(section);
    if (it == schema().end()) {
      throw ConfigError(block.empty() ? "key '" + section + "' outside any section"
                                      : "unknown section [" + section + "]");
    }
    for (const auto& [key, node] : block) {
      if (!it->second.contains(key)) throw ConfigError("unknown key " + section + "." + key);
    }
  }

  RunConfig c = default_config();
  const Reader r(tree);
  std::string file;
  r.text("species", "file", file);
  if (!file.empty()) {
    std::filesystem::path p(file);
    c.species_file = p.is_relative() ? path.parent_path() / p : p;
  }
  r.text("species", "label", c.species);

  r.number("trap", "b_field_gauss", c.b_field);
  r.number("trap", "polarization", c.polarization);
  r.number("trap", "intensity_hz", c.intensity);

  r.number("noise", "sigma_pol", c.noise.sigma_pol);
  r.number("noise", "tau_b_s", c.noise.tau_b);
  r.number("noise", "raman_coeff_per_s_hz", c.noise.raman_coeff);
  r.number("noise", "temperature_uk", c.noise.temperature);
  if (const auto* t = r.raw("noise", "trap_depth_for_thermal_hz"); t && *t != "auto") {
    c.noise.trap_depth_for_thermal = Reader::parse("noise", "trap_depth_for_thermal_hz", *t);
  }

  r.count("mc", "trials", c.mc.trials);
  r.count("mc", "seed", c.mc.seed);
  std::uint64_t threads = c.mc.threads;
  std::uint64_t batches = c.mc.batches;
  r.count("mc", "threads", threads);
  r.count("mc", "batches", batches);
  c.mc.threads = static_cast<unsigned>(threads);
  c.mc.batches = static_cast<unsigned>(batches);
  r.number("mc", "t_start_s", c.t_start);
  r.number("mc", "t_stop_s", c.t_stop);
  r.count("mc", "t_count", c.t_count);
  if (const auto* t = r.raw("mc", "t_spacing")) {
    if (*t == "linear") c.t_spacing = TimeSpacing::kLinear;
    else if (*t == "log") c.t_spacing = TimeSpacing::kLog;
    else throw ConfigError("mc.t_spacing: expected linear or log, got '" + *t + "'");
  }

  r.number("dls", "intensity_start_hz", c.dls_start);
  r.number("dls", "intensity_stop_hz", c.dls_stop);
  r.count("dls", "intensity_count", c.dls_count);

  r.list("bline", "polarizations", c.bline_polarizations);
  r.number("bline", "b_start_gauss", c.bline_b_start);
  if (const auto* t = r.raw("bline", "b_stop_gauss")) {
    c.bline_b_stop = *t == "max" ? -1.0 : Reader::parse("bline", "b_stop_gauss", *t);
  }
  r.count("bline", "b_count", c.bline_b_count);

  r.text("match", "reference_label", c.reference_species);
  r.number("match", "reference_polarization", c.reference_polarization);
  r.number("match", "target_magic_intensity_hz", c.target_magic_intensity);

  r.list("scan", "depths_hz", c.scan_depths);
  r.flag("scan", "solve_polarization", c.scan_solve_polarization);

  r.number("fringes", "detuning_hz", c.fringe_detuning);
  r.text("output", "prefix", c.output_prefix);

  validate(c);
  return c;
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(key + ": " + what);
  };
  require(std::filesystem::exists(c.species_file), "species.file", "not found: " + c.species_file.string());
  require(std::isfinite(c.b_field) && c.b_field >= 0.0, "trap.b_field_gauss", "must be finite and >= 0");
  require(c.polarization >= 0.0 && c.polarization <= 1.0, "trap.polarization", "must lie in [0, 1]");
  require(std::isfinite(c.intensity), "trap.intensity_hz", "must be finite");
  require(c.noise.sigma_pol >= 0.0 && std::isfinite(c.noise.sigma_pol), "noise.sigma_pol", "must be >= 0");
  require(c.noise.tau_b > 0.0, "noise.tau_b_s", "must be > 0 or inf");
  require(c.noise.raman_coeff >= 0.0 && std::isfinite(c.noise.raman_coeff), "noise.raman_coeff_per_s_hz",
          "must be >= 0");
  require(c.noise.temperature >= 0.0 && std::isfinite(c.noise.temperature), "noise.temperature_uk",
          "must be >= 0");
  require(c.mc.trials >= 1, "mc.trials", "must be >= 1");
  require(c.mc.threads >= 1, "mc.threads", "must be >= 1");
  require(c.mc.batches >= 1, "mc.batches", "must be >= 1");
  require(c.t_count >= 1, "mc.t_count", "must be >= 1");
  require(c.t_start >= 0.0 && c.t_stop >= c.t_start, "mc.t_stop_s", "require 0 <= t_start_s <= t_stop_s");
  require(c.t_spacing == TimeSpacing::kLinear || c.t_start > 0.0, "mc.t_start_s", "log spacing needs t_start_s > 0");
  require(c.dls_count >= 1, "dls.intensity_count", "must be >= 1");
  require(c.dls_stop >= c.dls_start, "dls.intensity_stop_hz", "must be >= intensity_start_hz");
  for (double a : c.bline_polarizations) {
    require(a > 0.0 && a <= 1.0, "bline.polarizations", "each value must lie in (0, 1]");
  }
  require(c.bline_b_count >= 1, "bline.b_count", "must be >= 1");
  require(c.bline_b_start >= 0.0, "bline.b_start_gauss", "must be >= 0");
  require(c.reference_polarization > 0.0 && c.reference_polarization <= 1.0, "match.reference_polarization",
          "must lie in (0, 1]");
  require(c.fringe_detuning > 0.0, "fringes.detuning_hz", "must be > 0");
}

std::string dump_config(const RunConfig& c) {
  using io::format_double;
  std::ostringstream out;
  out << "[species]\nfile = " << std::filesystem::absolute(c.species_file).string() << "\nlabel = " << c.species
      << "\n\n";
  out << "[trap]\nb_field_gauss = " << format_double(c.b_field) << "\npolarization = "
      << format_double(c.polarization) << "\nintensity_hz = " << format_double(c.intensity) << "\n\n";
  out << "[noise]\nsigma_pol = " << format_double(c.noise.sigma_pol) << "\ntau_b_s = " << format_double(c.noise.tau_b)
      << "\nraman_coeff_per_s_hz = " << format_double(c.noise.raman_coeff)
      << "\ntemperature_uk = " << format_double(c.noise.temperature) << "\ntrap_depth_for_thermal_hz = "
      << (c.noise.trap_depth_for_thermal ? format_double(*c.noise.trap_depth_for_thermal) : "auto") << "\n\n";
  out << "[mc]\ntrials = " << c.mc.trials << "\nseed = " << c.mc.seed << "\nthreads = " << c.mc.threads
      << "\nbatches = " << c.mc.batches << "\nt_start_s = " << format_double(c.t_start)
      << "\nt_stop_s = " << format_double(c.t_stop) << "\nt_count = " << c.t_count
      << "\nt_spacing = " << (c.t_spacing == TimeSpacing::kLog ? "log" : "linear") << "\n\n";
  out << "[dls]\nintensity_start_hz = " << format_double(c.dls_start) << "\nintensity_stop_hz = "
      << format_double(c.dls_stop) << "\nintensity_count = " << c.dls_count << "\n\n";
  out << "[bline]\npolarizations = " << join(c.bline_polarizations) << "\nb_start_gauss = "
      << format_double(c.bline_b_start) << "\nb_stop_gauss = "
      << (c.bline_b_stop < 0.0 ? std::string("max") : format_double(c.bline_b_stop))
      << "\nb_count = " << c.bline_b_count << "\n\n";
  out << "[match]\nreference_label = " << c.reference_species << "\nreference_polarization = "
      << format_double(c.reference_polarization) << "\ntarget_magic_intensity_hz = "
      << format_double(c.target_magic_intensity) << "\n\n";
  out << "[scan]\ndepths_hz = " << join(c.scan_depths) << "\nsolve_polarization = "
      << (c.scan_solve_polarization ? "true" : "false") << "\n\n";
  out << "[fringes]\ndetuning_hz = " << format_double(c.fringe_detuning) << "\n\n";
  out << "[output]\nprefix = " << c.output_prefix << "\n";
  return out.str();
}

}  // namespace magictrap
