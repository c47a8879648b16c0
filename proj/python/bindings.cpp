#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sddekit/experiments.hpp"
#include "sddekit/paths.hpp"
#include "sddekit/report.hpp"
#include "sddekit/stability.hpp"
#include "sddekit/stepper.hpp"

#include <string>

namespace py = pybind11;
using namespace sddekit;

namespace {

py::array_t<double> to_array(const std::vector<double>& values, std::size_t cols) {
  const std::size_t rows = cols == 0 ? 0 : values.size() / cols;
  py::array_t<double> out({rows, cols});
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

std::vector<double> flatten(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  return {a.data(), a.data() + a.size()};
}

std::vector<Scheme> schemes_from(const std::vector<std::string>& names) {
  std::vector<Scheme> out;
  for (const std::string& n : names) out.push_back(parse_scheme(n));
  return out;
}

py::dict profile_dict(const StabilityProfile& p) {
  py::dict d;
  auto opt = [](const std::optional<double>& v) { return v ? py::cast(*v) : py::none(); };
  d["beta"] = p.beta;
  d["beta1"] = p.beta1;
  d["beta2"] = p.beta2;
  d["kappa"] = p.decomposition.kappa;
  d["delta"] = p.decomposition.delta;
  d["beta_h"] = opt(p.beta_h);
  d["nu_plus"] = opt(p.nu_plus);
  d["nu_h_plus"] = opt(p.nu_h_plus);
  d["solvability_bound"] = opt(p.solvability_bound);
  return d;
}

py::dict report_dict(const ExperimentReport& r) {
  py::list rows;
  for (const ErrorRow& row : r.rows) {
    py::dict d;
    d["scheme"] = std::string(to_string(row.scheme));
    d["h"] = row.h;
    d["eps"] = row.eps;
    d["std_error"] = row.std_error;
    d["blowups"] = row.blowups;
    d["failures"] = row.failures;
    rows.append(d);
  }
  py::dict orders;
  for (const auto& [scheme, order] : r.fitted_order) {
    orders[py::str(std::string(to_string(scheme)))] = order ? py::cast(*order) : py::none();
  }
  py::dict d;
  d["problem"] = r.problem;
  d["rows"] = rows;
  d["fitted_order"] = orders;
  d["reference_h"] = r.reference_h;
  d["t_end"] = r.t_end;
  d["samples"] = r.samples;
  d["master_seed"] = r.master_seed;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Split-step backward Euler integrators for stochastic delay equations";
  m.attr("__version__") = kVersion;

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<HistoryUnderflow>(m, "HistoryUnderflow", error.ptr());
  py::register_exception<NotApplicable>(m, "NotApplicable", error.ptr());
  auto solve = py::register_exception<StageSolveFailure>(m, "StageSolveFailure", error.ptr());
  py::register_exception<SolverDivergence>(m, "SolverDivergence", solve.ptr());

  py::class_<OneSidedLipschitzData>(m, "Gammas")
      .def(py::init<double, double, double, double>(), py::arg("gamma1"), py::arg("gamma2"), py::arg("gamma3"),
           py::arg("gamma4"))
      .def_readwrite("gamma1", &OneSidedLipschitzData::gamma1)
      .def_readwrite("gamma2", &OneSidedLipschitzData::gamma2)
      .def_readwrite("gamma3", &OneSidedLipschitzData::gamma3)
      .def_readwrite("gamma4", &OneSidedLipschitzData::gamma4)
      .def("__eq__", [](const OneSidedLipschitzData& a, const OneSidedLipschitzData& b) { return a == b; })
      .def("__repr__", [](const OneSidedLipschitzData& g) {
        return "Gammas(" + format_number(g.gamma1) + ", " + format_number(g.gamma2) + ", " +
               format_number(g.gamma3) + ", " + format_number(g.gamma4) + ")";
      });

  py::class_<SddeProblem>(m, "Problem")
      .def_readonly("name", &SddeProblem::name)
      .def_readonly("horizon", &SddeProblem::horizon)
      .def_readonly("dim_state", &SddeProblem::dim_state)
      .def_readonly("dim_noise", &SddeProblem::dim_noise)
      .def_readonly("delay_upper_bound", &SddeProblem::delay_upper_bound)
      .def_readonly("gammas", &SddeProblem::gammas)
      .def("with_horizon", &SddeProblem::with_horizon)
      .def("__repr__", [](const SddeProblem& p) { return "Problem('" + p.name + "', horizon=" + format_number(p.horizon) + ")"; });

  m.def("preset_names", &preset_names);
  m.def("make_preset", [](const std::string& name, std::optional<double> horizon) { return make_preset(name, horizon); },
        py::arg("name"), py::arg("horizon") = py::none());
  m.def(
      "make_linear",
      [](double a, double b, double c, double d, double lag, double psi, double horizon) {
        SddeProblem p = make_linear({a, b, c, d, lag}, psi, horizon);
        p.name = "linear";
        return p;
      },
      py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"), py::arg("lag") = 1.0, py::arg("psi") = 0.5,
      py::arg("horizon") = 1.0);
  m.def(
      "gamma_map_linear", [](double a, double b, double c, double d) { return gamma_map_linear({a, b, c, d, 1.0}); },
      py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"));

  m.def("beta", &beta);
  m.def("beta_h", &beta_h, py::arg("gammas"), py::arg("h"));
  m.def("nu_plus", &nu_plus, py::arg("gammas"), py::arg("tau"), py::arg("tol") = 1e-12);
  m.def("nu_h_plus", &nu_h_plus, py::arg("gammas"), py::arg("tau"), py::arg("h"));
  m.def("decay_polynomial", &decay_polynomial, py::arg("gammas"), py::arg("tau"), py::arg("nu"));
  m.def("solvability_bound", &solvability_bound);
  m.def(
      "linear_ms_stable",
      [](double a, double b, double c, double d) { return linear_ms_stable({a, b, c, d, 1.0}); }, py::arg("a"),
      py::arg("b"), py::arg("c"), py::arg("d"));
  m.def(
      "stability_profile",
      [](const OneSidedLipschitzData& g, double tau, double h) { return profile_dict(stability_profile(g, tau, h)); },
      py::arg("gammas"), py::arg("tau"), py::arg("h"));

  m.def("derive_path_seed", &derive_path_seed, py::arg("master_seed"), py::arg("index"));
  m.def(
      "generate",
      [](std::uint64_t seed, double horizon, double step, int dim_noise) {
        const BrownianLattice lat = generate(seed, horizon, step, dim_noise);
        return to_array(lat.increments, static_cast<std::size_t>(dim_noise));
      },
      py::arg("seed"), py::arg("horizon"), py::arg("step"), py::arg("dim_noise") = 1);
  m.def(
      "coarsen",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& increments, std::size_t factor) {
        const int dim = increments.ndim() == 2 ? static_cast<int>(increments.shape(1)) : 1;
        return to_array(coarsen(flatten(increments), dim, factor), static_cast<std::size_t>(dim));
      },
      py::arg("increments"), py::arg("factor"));

  m.def(
      "run_trajectory",
      [](const SddeProblem& problem, const std::string& scheme, double h,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& increments, const std::string& interp,
         double threshold) {
        const std::vector<double> dw = flatten(increments);
        Trajectory t;
        {
          py::gil_scoped_release release;
          t = run_trajectory(problem, parse_scheme(scheme), h, dw, parse_interpolation(interp), SolverConfig{},
                             threshold);
        }
        py::dict d;
        d["status"] = std::string(to_string(t.status));
        d["states"] = to_array(t.states, static_cast<std::size_t>(t.dim));
        d["stages"] = to_array(t.stages, static_cast<std::size_t>(t.dim));
        d["steps_completed"] = t.steps_completed;
        d["zero_delay_clamps"] = t.zero_delay_clamps;
        d["solvability_warning"] = t.solvability_warning;
        d["message"] = t.message;
        return d;
      },
      py::arg("problem"), py::arg("scheme"), py::arg("h"), py::arg("increments"), py::arg("interp") = "linear",
      py::arg("blowup_threshold") = kDefaultBlowupThreshold);

  m.def(
      "strong_error",
      [](const SddeProblem& problem, const std::vector<std::string>& schemes, const std::vector<double>& stepsizes,
         double reference_h, std::size_t samples, double t_end, std::uint64_t seed, unsigned workers) {
        ConvergenceConfig cfg;
        cfg.problem = problem;
        cfg.schemes = schemes_from(schemes);
        cfg.stepsizes = stepsizes;
        cfg.reference_h = reference_h;
        cfg.samples = samples;
        cfg.t_end = t_end;
        cfg.master_seed = seed;
        cfg.workers = workers;
        ExperimentReport r;
        {
          py::gil_scoped_release release;
          r = strong_error(cfg);
        }
        return report_dict(r);
      },
      py::arg("problem"), py::arg("schemes"), py::arg("stepsizes"), py::arg("reference_h"), py::arg("samples"),
      py::arg("t_end"), py::arg("seed") = 0, py::arg("workers") = 0);

  m.def(
      "ms_trace",
      [](const SddeProblem& problem, const std::string& scheme, double h, double horizon, std::size_t samples,
         std::uint64_t seed, unsigned workers) {
        StabilityTraceConfig cfg;
        cfg.problem = problem;
        cfg.scheme = parse_scheme(scheme);
        cfg.h = h;
        cfg.horizon = horizon;
        cfg.samples = samples;
        cfg.master_seed = seed;
        cfg.workers = workers;
        StabilityTrace t;
        {
          py::gil_scoped_release release;
          t = ms_trace(cfg);
        }
        std::vector<double> ts, ms;
        std::vector<std::size_t> div;
        for (const TracePoint& p : t.points) {
          ts.push_back(p.t);
          ms.push_back(p.mean_sq);
          div.push_back(p.divergent);
        }
        py::dict d;
        d["t"] = py::array_t<double>(ts.size(), ts.data());
        d["mean_sq"] = py::array_t<double>(ms.size(), ms.data());
        d["divergent"] = div;
        d["blowups"] = t.blowups;
        d["failures"] = t.failures;
        try {
          d["empirical_rate"] = empirical_rate(t.points);
        } catch (const NotApplicable&) {
          d["empirical_rate"] = py::none();
        }
        return d;
      },
      py::arg("problem"), py::arg("scheme"), py::arg("h"), py::arg("horizon"), py::arg("samples"),
      py::arg("seed") = 0, py::arg("workers") = 0);

  m.def("fit_order", &fit_order, py::arg("rows"));

  m.def(
      "table1",
      [](std::size_t samples, std::uint64_t seed, double reference_h, double t_end, const std::vector<double>& stepsizes,
         unsigned workers) {
        Table1Config cfg;
        cfg.samples = samples;
        cfg.master_seed = seed;
        cfg.reference_h = reference_h;
        cfg.t_end = t_end;
        cfg.stepsizes = stepsizes;
        cfg.workers = workers;
        Table1 t;
        {
          py::gil_scoped_release release;
          t = table1(cfg);
        }
        py::dict d;
        d["stepsizes"] = t.stepsizes;
        d["columns"] = t.columns;
        d["values"] = t.values;
        return d;
      },
      py::arg("samples") = 1000, py::arg("seed") = 0, py::arg("reference_h") = 1.0 / 4096, py::arg("t_end") = 8.0,
      py::arg("stepsizes") = std::vector<double>{1.0 / 128, 1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8},
      py::arg("workers") = 0);
}
