#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "ksblow/cli.hpp"
#include "ksblow/linop.hpp"
#include "ksblow/philambda.hpp"
#include "ksblow/profiles.hpp"
#include "ksblow/rate.hpp"
#include "ksblow/sim.hpp"
#include "ksblow/specialfn.hpp"

namespace py = pybind11;
using namespace ksb;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vec(const Array& a) { return {a.data(), a.data() + a.size()}; }

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

RadialField field(const Array& r, const Array& values) {
  if (r.size() != values.size()) throw DomainError("r and values differ in length");
  auto g = std::make_shared<const RadialGrid>(to_vec(r));
  return RadialField(std::move(g), to_vec(values));
}

py::dict sim_dict(const SimRun& run) {
  std::vector<double> t, M, m2, dm2, up, le, q;
  for (const auto& s : run.samples) {
    t.push_back(s.t);
    M.push_back(s.M);
    m2.push_back(s.m2);
    dm2.push_back(s.dm2dt_fit);
    up.push_back(s.u_peak);
    le.push_back(s.lambda_eff);
    q.push_back(s.q_indicator);
  }
  py::dict d;
  d["t"] = to_array(t);
  d["M"] = to_array(M);
  d["m2"] = to_array(m2);
  d["dm2dt_fit"] = to_array(dm2);
  d["u_peak"] = to_array(up);
  d["lambda_eff"] = to_array(le);
  d["q_indicator"] = to_array(q);
  d["blowup"] = run.status == SimStatus::blowup;
  d["reason"] = run.reason;
  d["max_mass_drift"] = run.max_mass_drift;
  d["steps"] = run.steps;
  const auto rep = verify_m2_identity(run.samples);
  d["m2_slope"] = rep.slope;
  d["m2_expected"] = rep.expected;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ksblow, m) {
  m.doc() = "Keller-Segel blow-up verification library";

  auto base = py::register_exception<Error>(m, "KsblowError", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<QuadratureError>(m, "QuadratureError", base.ptr());
  py::register_exception<SolveError>(m, "SolveError", base.ptr());
  static py::exception<ConfigError> config_exc(m, "ConfigError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::list v;
      for (const auto& x : e.violations) v.append(py::make_tuple(x.key, x.value, x.constraint));
      py::object exc = py::reinterpret_borrow<py::object>(config_exc)(e.what());
      exc.attr("violations") = v;
      PyErr_SetObject(config_exc.ptr(), exc.ptr());
    }
  });

  m.attr("EULER_GAMMA") = kEulerGamma;

  m.def("bubble_U", py::vectorize(bubble_U), py::arg("rho"));
  m.def("Z0", py::vectorize(Z0), py::arg("rho"));
  m.def("expint_Ei", py::vectorize(expint_Ei), py::arg("x"));
  m.def("heat6_factor", py::vectorize(heat6_factor), py::arg("w"));
  m.def("cubic_moment_Z0", &cubic_moment_Z0, py::arg("z1"));
  m.def("gaussian_Z0_integral", [](double a) { return gaussian_Z0_integral(a); }, py::arg("a"));
  m.def("gaussian_Z0_closed", &gaussian_Z0_closed, py::arg("a"));
  m.def("mass_at_T_formula", &mass_at_T_formula, py::arg("eps_t"));

  m.def("apply_L", [](const Array& r, const Array& phi) { return to_array(apply_L(field(r, phi)).values); },
        py::arg("r"), py::arg("phi"));
  m.def("solve_L",
        [](const Array& r, const Array& h, bool enforce_moments) {
          return to_array(solve_L(field(r, h), enforce_moments).values);
        },
        py::arg("r"), py::arg("h"), py::arg("enforce_moments") = true);
  m.def("total_mass", [](const Array& r, const Array& phi) { return total_mass(field(r, phi)); }, py::arg("r"),
        py::arg("phi"));

  m.def("run_sim",
        [](double mass_multiplier, std::size_t cells, double max_t, double first_cell) {
          SimConfig c;
          c.mass_multiplier = mass_multiplier;
          c.cells = cells;
          c.max_t = max_t;
          c.first_cell = first_cell;
          return sim_dict(run(c));
        },
        py::arg("mass_multiplier") = 1.05, py::arg("cells") = 1024, py::arg("max_t") = 10.0,
        py::arg("first_cell") = 1e-4);

  m.def("solve_rate",
        [](double T, double eps_t, double sigma, std::size_t nodes, bool second_correction) {
          RateSolveOptions o;
          o.window = {T, eps_t, 0.1};
          o.window.validate();
          o.sigma = sigma;
          o.nodes = nodes;
          o.second_correction = second_correction;
          const auto r = solve_rate(o);
          std::vector<double> tau, a, b, c;
          for (const auto& s : r.residual_profile) {
            tau.push_back(s.tau);
            a.push_back(s.R_pstar);
            b.push_back(s.R_p1);
            c.push_back(s.R_p2);
          }
          py::dict d;
          d["T_minus_t"] = to_array(tau);
          d["R_pstar"] = to_array(a);
          d["R_p1"] = to_array(b);
          d["R_p2"] = to_array(c);
          d["converged"] = r.converged;
          d["iterations"] = r.iterations;
          d["distances"] = r.distances;
          d["norm_constants"] = r.fitted_norm_constants;
          return d;
        },
        py::arg("T") = 1e-4, py::arg("eps_t") = 0.1, py::arg("sigma") = 0.45, py::arg("nodes") = 400,
        py::arg("second_correction") = true);

  m.def("parse_config",
        [](const std::string& text, const std::string& command) { return parse_config(text, command).resolved(); },
        py::arg("text"), py::arg("command"));
  m.def("run_command",
        [](const std::string& command, const std::string& config_text, const std::string& out) {
          std::ostringstream log;
          int code;
          try {
            code = run_experiment(parse_config(config_text, command), out, false, log);
          } catch (const Error& e) {
            code = report_error(command, e, out, log);
          }
          return py::make_tuple(code, log.str());
        },
        py::arg("command"), py::arg("config_text") = "", py::arg("out") = ".");
  m.def("selftest", [] {
    py::list rows;
    for (const auto& r : selftest_checks(12345)) rows.append(py::make_tuple(r.name, r.value, r.reference, r.pass()));
    return rows;
  });
}
