#include "magictrap/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

#include "magictrap/errors.hpp"

namespace magictrap::io {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size() || std::isnan(value)) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return value;
}

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> split_commas(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    fields.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

struct Table {
  std::vector<std::pair<std::string, std::string>> comments;  // "# key=value"
  std::vector<std::vector<double>> rows;
};

Table read_table(const std::filesystem::path& path, const std::vector<std::string>& columns) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Table table;
  std::string line;
  bool header_seen = false;
  int line_no = 0;
  const std::string where = path.string();
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      const std::string body = trim(std::string_view(text).substr(1));
      const auto eq = body.find('=');
      if (eq != std::string::npos) table.comments.emplace_back(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
      continue;
    }
    auto fields = split_commas(text);
    if (!header_seen) {
      if (fields != columns) {
        std::string expected;
        for (const auto& c : columns) expected += (expected.empty() ? "" : ",") + c;
        throw IoError(where + ":" + std::to_string(line_no) + ": expected header '" + expected + "'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != columns.size()) {
      throw IoError(where + ":" + std::to_string(line_no) + ": expected " + std::to_string(columns.size()) +
                    " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> row;
    for (const auto& f : fields) {
      try {
        row.push_back(parse_double(f));
      } catch (const std::invalid_argument& e) {
        throw IoError(where + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (!header_seen) throw IoError(where + ": missing header row");
  return table;
}

}  // namespace

DlsCurve read_dls_curve(const std::filesystem::path& path) {
  const auto table = read_table(path, {"intensity_hz", "shift_hz", "shift_err_hz"});
  DlsCurve curve;
  bool have_b = false;
  for (const auto& [key, value] : table.comments) {
    if (key == "b_field_gauss") {
      try {
        curve.b_field = parse_double(value);
      } catch (const std::invalid_argument& e) {
        throw IoError(path.string() + ": b_field_gauss: " + e.what());
      }
      have_b = true;
    }
  }
  if (!have_b) throw IoError(path.string() + ": missing '# b_field_gauss=<value>' line");
  for (const auto& row : table.rows) curve.points.push_back({row[0], row[1], row[2]});
  return curve;
}

RamseyTrace read_ramsey_trace(const std::filesystem::path& path) {
  const auto table = read_table(path, {"t_s", "population", "population_err"});
  RamseyTrace trace;
  for (const auto& row : table.rows) {
    trace.times.push_back(row[0]);
    trace.population.push_back(row[1]);
    trace.population_err.push_back(row[2]);
  }
  return trace;
}

void write_dls_curve(std::ostream& out, const DlsCurve& curve, double polarization) {
  out << "# b_field_gauss=" << format_double(curve.b_field) << '\n';
  out << "# polarization=" << format_double(polarization) << '\n';
  out << "intensity_hz,shift_hz,shift_err_hz\n";
  for (const auto& p : curve.points) {
    out << format_double(p.intensity) << ',' << format_double(p.shift) << ',' << format_double(p.shift_err)
        << '\n';
  }
}

void write_ramsey_trace(std::ostream& out, const RamseyTrace& trace) {
  out << "t_s,population,population_err\n";
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    out << format_double(trace.times[i]) << ',' << format_double(trace.population[i]) << ','
        << format_double(trace.population_err[i]) << '\n';
  }
}

void write_contrast_curve(std::ostream& out, const ContrastCurve& curve) {
  out << "t_s,contrast,stderr\n";
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    out << format_double(curve.times[i]) << ',' << format_double(curve.contrast[i]) << ','
        << format_double(curve.std_error[i]) << '\n';
  }
}

void write_scan(std::ostream& out, std::span<const ScanPoint> scan) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out << "depth_hz,tau_s,tau_err_s,stretch\n";
  for (const auto& sp : scan) {
    out << format_double(sp.depth) << ',' << format_double(sp.result ? sp.result->tau : nan) << ','
        << format_double(sp.result ? sp.result->tau_err : nan) << ','
        << format_double(sp.result ? sp.result->stretch : nan) << '\n';
  }
  for (const auto& sp : scan) {
    out << "# depth_hz=" << format_double(sp.depth) << " polarization=" << format_double(sp.polarization);
    if (sp.result) {
      out << (sp.result->extrapolated ? " extrapolated=true" : "");
    } else {
      out << " error=" << sp.error;
    }
    out << '\n';
  }
}

void write_bline(std::ostream& out, std::span<const BUmLine> lines) {
  out << "polarization,b_gauss,magic_intensity_hz\n";
  for (const auto& line : lines) {
    out << "# polarization=" << format_double(line.polarization)
        << " b_max_gauss=" << format_double(line.b_max) << '\n';
    for (const auto& s : line.samples) {
      out << format_double(line.polarization) << ',' << format_double(s.b_field) << ','
          << format_double(s.magic_intensity) << '\n';
    }
  }
}

void write_fit_result(std::ostream& out, const FitResult& fit, std::string_view kind) {
  out << "# fit=" << kind << '\n';
  out << "# converged=" << (fit.converged ? "true" : "false") << '\n';
  out << "# iterations=" << fit.iterations << '\n';
  out << "# chi2=" << format_double(fit.chi2) << '\n';
  out << "# dof=" << fit.dof << '\n';
  out << "# reduced_chi2=" << format_double(fit.reduced_chi2()) << '\n';
  out << "# residual_norm=" << format_double(fit.residual_norm) << '\n';
  for (const auto& w : fit.warnings) out << "# warning=" << w << '\n';
  out << "param,value,sigma\n";
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    out << fit.names[i] << ',' << format_double(fit.values[i]) << ',' << format_double(fit.sigmas[i]) << '\n';
  }
}

void write_coherence(std::ostream& out, const CoherenceResult& result) {
  out << "tau_s=" << format_double(result.tau) << '\n';
  out << "tau_err_s=" << format_double(result.tau_err) << '\n';
  out << "stretch=" << format_double(result.stretch) << '\n';
  out << "method=" << result.method << '\n';
  out << "extrapolated=" << (result.extrapolated ? "true" : "false") << '\n';
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace magictrap::io
