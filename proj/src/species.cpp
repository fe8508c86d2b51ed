#include "magictrap/species.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "magictrap/constants.hpp"
#include "magictrap/errors.hpp"

namespace magictrap {

void validate(const SpeciesParams& params) {
  if (!std::isfinite(params.beta1) || !std::isfinite(params.beta2) || !std::isfinite(params.beta4)) {
    throw std::invalid_argument("species '" + params.label + "': coefficients must be finite");
  }
  if (!(params.beta4 > 0.0)) {
    throw std::invalid_argument("species '" + params.label + "': beta4 must be positive");
  }
}

void validate(const TrapPoint& point) {
  if (!(point.b_field >= 0.0) || !std::isfinite(point.b_field)) {
    throw std::invalid_argument("trap point: b_field must be finite and >= 0");
  }
  if (!(point.polarization >= 0.0 && point.polarization <= 1.0)) {
    throw std::invalid_argument("trap point: polarization must lie in [0, 1]");
  }
  if (!std::isfinite(point.intensity)) {
    throw std::invalid_argument("trap point: intensity must be finite");
  }
}

double dls_shift(const SpeciesParams& params, const TrapPoint& point) {
  const double u = point.intensity;
  const double a = point.polarization;
  return params.beta1 * u + a * params.beta2 * point.b_field * u + a * a * params.beta4 * u * u;
}

double dls_vertex_value(const SpeciesParams& params, double b_field, double polarization) {
  if (!(polarization > 0.0)) {
    throw std::invalid_argument("dls_vertex_value: polarization must be > 0");
  }
  const double linear = params.beta1 + polarization * params.beta2 * b_field;
  return -(linear * linear) / (4.0 * polarization * polarization * params.beta4);
}

double intensity_to_temperature(double intensity_hz) {
  return std::abs(intensity_hz) / constants::kBoltzmannOverPlanckHzPerK / constants::kMicroKelvin;
}

double temperature_to_frequency(double temperature_uk) {
  return temperature_uk * constants::kMicroKelvin * constants::kBoltzmannOverPlanckHzPerK;
}

SpeciesParams rb85_measured() {
  return {"Rb85_measured", 1.59e-4, -2.20e-4, 1.09e-11,
          "85Rb, measured at A=1.00: {1.59(4)e-4, -2.20(8)e-4 /G, 1.09(1)e-11 /Hz}", true};
}

SpeciesParams rb85_theory() {
  return {"Rb85_theory", 1.61e-4, -2.45e-4, 1.15e-11,
          "85Rb, theoretical: {1.61(4)e-4, -2.45(8)e-4 /G, 1.15(1)e-11 /Hz}", true};
}

SpeciesParams rb87_placeholder() {
  // beta1 scaled from the 85Rb value by the hyperfine-splitting ratio
  // 6.834/3.035; beta2 then fixed by b_max(A=1) = 3.50 G and beta4 by a magic
  // intensity of -2.2 MHz at 3.180 G.
  constexpr double beta1 = 1.59e-4 * 6.834 / 3.035;
  constexpr double beta2 = -beta1 / 3.50;
  constexpr double beta4 = (beta1 + beta2 * 3.180) / (2.0 * 2.2e6);
  return {"Rb87_placeholder", beta1, beta2, beta4,
          "87Rb placeholder: only b_max(A=1)=3.50 G and U_M(3.180 G)=-2.2 MHz are anchored", false};
}

namespace {

double parse_double(const std::string& text, const std::string& where) {
  std::size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &consumed);
  } catch (const std::exception&) {
    throw ConfigError(where + ": not a number: '" + text + "'");
  }
  if (consumed != text.size()) {
    throw ConfigError(where + ": trailing characters in '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& text, const std::string& where) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(where + ": expected true/false, got '" + text + "'");
}

}  // namespace

std::vector<SpeciesParams> load_species_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("species file not found: " + path.string());
  }
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("species file " + path.string() + ": " + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }

  static const std::set<std::string> kRequired{"label", "beta1", "beta2", "beta4", "source", "verified"};
  std::vector<SpeciesParams> table;
  for (const auto& [section, block] : tree) {
    const std::string where = path.filename().string() + " [" + section + "]";
    if (block.empty()) {
      throw ConfigError(where + ": top-level key outside a species block");
    }
    std::set<std::string> seen;
    for (const auto& [key, node] : block) {
      if (!kRequired.contains(key)) {
        throw ConfigError(where + ": unknown key '" + key + "'");
      }
      seen.insert(key);
    }
    for (const auto& key : kRequired) {
      if (!seen.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
    }

    SpeciesParams params;
    params.label = block.get<std::string>("label");
    if (params.label != section) {
      throw ConfigError(where + ": label '" + params.label + "' does not match section name");
    }
    params.beta1 = parse_double(block.get<std::string>("beta1"), where + ".beta1");
    params.beta2 = parse_double(block.get<std::string>("beta2"), where + ".beta2");
    params.beta4 = parse_double(block.get<std::string>("beta4"), where + ".beta4");
    params.source = block.get<std::string>("source");
    params.verified = parse_bool(block.get<std::string>("verified"), where + ".verified");
    try {
      validate(params);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + ": " + e.what());
    }
    table.push_back(std::move(params));
  }
  if (table.empty()) throw ConfigError("species file " + path.string() + " has no species blocks");
  return table;
}

const SpeciesParams& find_species(const std::vector<SpeciesParams>& table, std::string_view label) {
  for (const auto& params : table) {
    if (params.label == label) return params;
  }
  throw ConfigError("unknown species '" + std::string(label) + "'");
}

}  // namespace magictrap
