#include "sddekit/report.hpp"

#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace sddekit {

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t";
  for (int j = 0; j < traj.dim; ++j) os << ",y" << j;
  os << '\n';
  for (std::size_t k = 0; k < traj.state_count(); ++k) {
    os << format_number(static_cast<double>(k) * traj.step);
    const auto y = traj.state(k);
    for (int j = 0; j < traj.dim; ++j) os << ',' << format_number(y[j]);
    os << '\n';
  }
  os << "# status=" << to_string(traj.status) << '\n';
}

void write_report_csv(std::ostream& os, const ExperimentReport& report) {
  os << "problem,scheme,h,eps,std_error,blowups,failures,samples,order\n";
  for (const ErrorRow& row : report.rows) {
    os << report.problem << ',' << to_string(row.scheme) << ',' << format_number(row.h) << ','
       << format_number(row.eps) << ',' << format_number(row.std_error) << ',' << row.blowups << ','
       << row.failures << ',' << report.samples << ',';
    const auto it = report.fitted_order.find(row.scheme);
    if (it != report.fitted_order.end() && it->second) os << format_number(*it->second);
    os << '\n';
  }
}

void write_table1_csv(std::ostream& os, const Table1& table) {
  os << "h";
  for (const std::string& c : table.columns) os << ',' << c;
  os << '\n';
  for (std::size_t k = 0; k < table.stepsizes.size(); ++k) {
    os << format_number(table.stepsizes[k]);
    for (double v : table.values[k]) os << ',' << format_number(v);
    os << '\n';
  }
}

void write_trace_csv(std::ostream& os, const std::vector<StabilityTrace>& traces) {
  os << "scheme,h,t,mean_sq,divergent\n";
  for (const StabilityTrace& trace : traces) {
    for (const TracePoint& p : trace.points) {
      os << to_string(trace.scheme) << ',' << format_number(trace.h) << ',' << format_number(p.t)
         << ',' << format_number(p.mean_sq) << ',' << p.divergent << '\n';
    }
  }
}

namespace {

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const StabilityProfile& p) {
  return {
      {"gammas", {p.gammas.gamma1, p.gammas.gamma2, p.gammas.gamma3, p.gammas.gamma4}},
      {"tau", p.tau_bound},
      {"h", p.h},
      {"kappa", p.decomposition.kappa},
      {"delta", p.decomposition.delta},
      {"beta", p.beta},
      {"beta1", p.beta1},
      {"beta2", p.beta2},
      {"beta_h", optional_number(p.beta_h)},
      {"nu_plus", optional_number(p.nu_plus)},
      {"nu_h_plus", optional_number(p.nu_h_plus)},
      {"solvability_bound", optional_number(p.solvability_bound)},
  };
}

nlohmann::json to_json(const ExperimentReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const ErrorRow& r : report.rows) {
    rows.push_back({{"scheme", to_string(r.scheme)},
                    {"h", r.h},
                    {"eps", r.eps},
                    {"std_error", r.std_error},
                    {"blowups", r.blowups},
                    {"failures", r.failures},
                    {"wall_seconds", r.wall_seconds}});
  }
  nlohmann::json orders = nlohmann::json::object();
  for (const auto& [scheme, order] : report.fitted_order) {
    orders[std::string(to_string(scheme))] = optional_number(order);
  }
  return {{"problem", report.problem},
          {"reference_h", report.reference_h},
          {"reference_scheme", "ssbe"},
          {"t_end", report.t_end},
          {"samples", report.samples},
          {"master_seed", report.master_seed},
          {"reference_failures", report.reference_failures},
          {"fitted_order", orders},
          {"rows", rows},
          {"wall_seconds", report.wall_seconds}};
}

std::string format_profile(const StabilityProfile& p) {
  std::ostringstream os;
  auto line = [&os](const std::string& label, const std::string& value) {
    os << std::left << std::setw(20) << label << value << '\n';
  };
  auto opt = [](const std::optional<double>& v, const char* absent) {
    return v ? format_number(*v) : std::string(absent);
  };
  line("gamma1..gamma4", format_number(p.gammas.gamma1) + ", " + format_number(p.gammas.gamma2) +
                             ", " + format_number(p.gammas.gamma3) + ", " +
                             format_number(p.gammas.gamma4));
  line("tau", format_number(p.tau_bound));
  line("h", format_number(p.h));
  line("kappa, delta", std::to_string(p.decomposition.kappa) + ", " +
                           format_number(p.decomposition.delta));
  line("beta", format_number(p.beta));
  line("beta1, beta2", format_number(p.beta1) + ", " + format_number(p.beta2));
  line("beta_h", opt(p.beta_h, "undefined (1 - 2h gamma1 - h gamma2 <= 0)"));
  line("nu_plus", opt(p.nu_plus, "n/a (beta >= 0)"));
  line("nu_h_plus", opt(p.nu_h_plus, "n/a"));
  line("solvability h_max", opt(p.solvability_bound, "unbounded"));
  return os.str();
}

}  // namespace sddekit
