#include "rgflow/report.hpp"

#include "rgflow/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rgflow {

std::string to_string(Status status) {
  switch (status) {
    case Status::Pass:
      return "pass";
    case Status::Fail:
      return "fail";
    case Status::Unconverged:
      return "unconverged";
  }
  return "fail";
}

int RunReport::exit_code() const {
  bool unconverged = false;
  for (const auto& row : checks) {
    if (row.status == Status::Fail) return 1;
    if (row.status == Status::Unconverged) unconverged = true;
  }
  return unconverged ? 3 : 0;
}

namespace {

std::string num(double v) { return std::isnan(v) ? std::string() : format_double(v); }

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// JSON number with 17 significant digits; null when not applicable. The
// library's own float printer uses shortest round-trip form, so numbers
// are spliced in as raw text instead.
std::string jnum(double v) {
  if (std::isnan(v) || std::isinf(v)) return "null";
  return format_double(v);
}

std::string jstr(const std::string& s) { return nlohmann::json(s).dump(); }

std::size_t max_mu(const RunReport& r) {
  std::size_t n = 0;
  for (const auto& row : r.spectrum) n = std::max(n, row.mu.size());
  return n;
}

}  // namespace

std::string checks_csv(const RunReport& r) {
  std::ostringstream out;
  out << "check,item,s,t,k,value,bound,margin,tolerance,status,note\n";
  for (const auto& c : r.checks) {
    out << quote(c.check) << ',' << quote(c.item) << ',' << num(c.s) << ',' << num(c.t) << ','
        << (c.k >= 0 ? std::to_string(c.k) : std::string()) << ',' << num(c.value) << ','
        << num(c.bound) << ',' << num(c.margin) << ',' << num(c.tolerance) << ','
        << to_string(c.status) << ',' << quote(c.note) << '\n';
  }
  return out.str();
}

std::string checks_jsonl(const RunReport& r) {
  std::ostringstream out;
  for (const auto& c : r.checks) {
    out << "{\"check\":" << jstr(c.check) << ",\"item\":" << jstr(c.item) << ",\"s\":" << jnum(c.s)
        << ",\"t\":" << jnum(c.t) << ",\"k\":" << (c.k >= 0 ? std::to_string(c.k) : "null")
        << ",\"value\":" << jnum(c.value) << ",\"bound\":" << jnum(c.bound)
        << ",\"margin\":" << jnum(c.margin) << ",\"tolerance\":" << jnum(c.tolerance)
        << ",\"status\":" << jstr(to_string(c.status)) << ",\"note\":" << jstr(c.note) << "}\n";
  }
  return out.str();
}

std::string schedule_csv(const RunReport& r) {
  std::ostringstream out;
  out << "t,lambda_prime,alpha_prime,lambda_int,alpha_int,samples_used";
  if (r.phi4_columns) out << ",chi,chi_stderr,sigma_min";
  out << '\n';
  for (const auto& s : r.schedule) {
    out << num(s.t) << ',' << num(s.lambda_prime) << ',' << num(s.alpha_prime) << ','
        << num(s.lambda_int) << ',' << num(s.alpha_int) << ',' << s.samples_used;
    if (r.phi4_columns) out << ',' << num(s.chi) << ',' << num(s.chi_stderr) << ',' << num(s.sigma_min);
    out << '\n';
  }
  return out.str();
}

std::string schedule_jsonl(const RunReport& r) {
  std::ostringstream out;
  for (const auto& s : r.schedule) {
    out << "{\"t\":" << jnum(s.t) << ",\"lambda_prime\":" << jnum(s.lambda_prime)
        << ",\"alpha_prime\":" << jnum(s.alpha_prime) << ",\"lambda_int\":" << jnum(s.lambda_int)
        << ",\"alpha_int\":" << jnum(s.alpha_int) << ",\"samples_used\":" << s.samples_used;
    if (r.phi4_columns) {
      out << ",\"chi\":" << jnum(s.chi) << ",\"chi_stderr\":" << jnum(s.chi_stderr)
          << ",\"sigma_min\":" << jnum(s.sigma_min);
    }
    out << "}\n";
  }
  return out.str();
}

std::string spectrum_csv(const RunReport& r) {
  const std::size_t n = max_mu(r);
  std::ostringstream out;
  out << "metric,t";
  for (std::size_t k = 0; k < n; ++k) out << ",mu_" << k;
  out << ",converged\n";
  for (const auto& s : r.spectrum) {
    out << s.metric << ',' << num(s.t);
    for (std::size_t k = 0; k < n; ++k) out << ',' << (k < s.mu.size() ? num(s.mu[k]) : std::string());
    out << ',' << (s.converged ? "true" : "false") << '\n';
  }
  return out.str();
}

std::string spectrum_jsonl(const RunReport& r) {
  std::ostringstream out;
  for (const auto& s : r.spectrum) {
    out << "{\"metric\":" << jstr(s.metric) << ",\"t\":" << jnum(s.t) << ",\"mu\":[";
    for (std::size_t k = 0; k < s.mu.size(); ++k) out << (k ? "," : "") << jnum(s.mu[k]);
    out << "],\"converged\":" << (s.converged ? "true" : "false") << "}\n";
  }
  return out.str();
}

void emit_report(const RunReport& report, const std::string& directory,
                 const std::vector<ReportFormat>& formats) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + directory + "': " + ec.message());
  auto write = [&](const std::string& name, const std::string& text) {
    const fs::path path = fs::path(directory) / name;
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  };
  for (const auto f : formats) {
    if (f == ReportFormat::Csv) {
      write("checks.csv", checks_csv(report));
      write("schedule.csv", schedule_csv(report));
      write("spectrum.csv", spectrum_csv(report));
    } else {
      write("checks.jsonl", checks_jsonl(report));
      write("schedule.jsonl", schedule_jsonl(report));
      write("spectrum.jsonl", spectrum_jsonl(report));
    }
  }
  write("config.echo", "# " + report.version + "\n" + report.config_echo);
}

}  // namespace rgflow
