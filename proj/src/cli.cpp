#include "ksblow/cli.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ksblow/profiles.hpp"
#include "ksblow/specialfn.hpp"

namespace ksb {

namespace {

using json = nlohmann::ordered_json;

// shortest round-trip form
std::string num(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + num(v[i]);
  return s;
}

// Typed binding of one key to a field; `set` returns an error text or "".
struct Param {
  std::string key;
  std::function<std::string(const std::string&)> set;
  std::function<std::string()> get;
};

std::string parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc() || p != e) return "must be a number";
  if (!std::isfinite(out)) return "must be finite";
  return "";
}

Param real(const std::string& key, double& field) {
  return {key, [&field](const std::string& s) { return parse_double(s, field); }, [&field] { return num(field); }};
}

Param count(const std::string& key, std::size_t& field) {
  return {key,
          [&field](const std::string& s) -> std::string {
            unsigned long long v = 0;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || p != s.data() + s.size()) return "must be a non-negative integer";
            field = static_cast<std::size_t>(v);
            return "";
          },
          [&field] { return std::to_string(field); }};
}

Param integer(const std::string& key, int& field) {
  return {key,
          [&field](const std::string& s) -> std::string {
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), field);
            if (ec != std::errc() || p != s.data() + s.size()) return "must be an integer";
            return "";
          },
          [&field] { return std::to_string(field); }};
}

Param seed_param(const std::string& key, std::uint64_t& field) {
  return {key,
          [&field](const std::string& s) -> std::string {
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), field);
            if (ec != std::errc() || p != s.data() + s.size()) return "must be a non-negative integer";
            return "";
          },
          [&field] { return std::to_string(field); }};
}

Param flag(const std::string& key, bool& field) {
  return {key,
          [&field](const std::string& s) -> std::string {
            if (s == "true" || s == "1") field = true;
            else if (s == "false" || s == "0") field = false;
            else return "must be true or false";
            return "";
          },
          [&field] { return std::string(field ? "true" : "false"); }};
}

Param list(const std::string& key, std::vector<double>& field) {
  return {key,
          [&field](const std::string& s) -> std::string {
            std::vector<double> v;
            std::stringstream ss(s);
            std::string item;
            while (std::getline(ss, item, ',')) {
              double x = 0.0;
              const auto err = parse_double(trim(item), x);
              if (!err.empty()) return "must be a comma-separated list of numbers";
              v.push_back(x);
            }
            if (v.empty()) return "must not be empty";
            field = std::move(v);
            return "";
          },
          [&field] { return join(field); }};
}

std::map<std::string, std::vector<Param>> bindings(ExperimentConfig& c) {
  std::map<std::string, std::vector<Param>> m;
  m["general"] = {seed_param("seed", c.seed)};
  auto& s = c.sim;
  m["sim"] = {real("m_multiplier", s.mass_multiplier), real("lambda0", s.lambda0), real("radius", s.radius),
              count("cells", s.cells), real("first_cell", s.first_cell), real("cfl", s.cfl),
              real("dt_max", s.dt_max), real("dt_min", s.dt_min), real("max_t", s.max_t),
              real("peak_factor", s.peak_factor), real("resolution_cells", s.resolution_cells),
              real("sample_dt", s.sample_dt), real("sample_growth", s.sample_growth), flag("muscl", s.muscl),
              flag("drift", s.drift)};
  auto& r = c.rate;
  m["rate"] = {real("T", r.window.T), real("epsT", r.window.epsT), real("delta", r.window.delta),
               real("sigma", r.sigma), integer("max_iters", r.max_iters), real("tol", r.tol),
               count("nodes", r.nodes), real("tau_min_factor", r.tau_min_factor), real("profile_lo", r.profile_lo),
               real("profile_hi", r.profile_hi), count("profile_points", r.profile_points),
               flag("second_correction", r.second_correction)};
  auto& p = c.mass_phi;
  m["mass-phi"] = {real("T", p.window.T), real("epsT", p.window.epsT), real("delta", p.window.delta),
                   list("checkpoints", p.checkpoints), flag("stepper", p.stepper), count("nodes", p.nodes)};
  auto& f = c.specialfn;
  m["specialfn-check"] = {list("a_values", f.a_values), list("ei_x", f.ei_x), real("cubic_z1", f.cubic_z1)};
  m["selftest"] = {};
  return m;
}

void window_violations(const std::string& sec, const TimeWindow& w, std::vector<ConfigViolation>& out) {
  for (const auto& msg : w.violations())
    out.push_back({sec + ".T,epsT,delta", num(w.T) + "," + num(w.epsT) + "," + num(w.delta), msg});
}

void validate(const ExperimentConfig& c, const std::set<std::string>& sections, std::vector<ConfigViolation>& out) {
  auto need = [&](bool ok, const std::string& key, const std::string& value, const std::string& rule) {
    if (!ok) out.push_back({key, value, rule});
  };
  if (sections.count("sim") || c.command == "sim") {
    for (const auto& msg : c.sim.violations()) {
      // "key = value: rule"
      const auto eq = msg.find(" = "), colon = msg.find(": ", eq);
      out.push_back({"sim." + msg.substr(0, eq), msg.substr(eq + 3, colon - eq - 3), msg.substr(colon + 2)});
    }
  }
  if (sections.count("rate") || c.command == "rate") {
    const auto& r = c.rate;
    window_violations("rate", r.window, out);
    need(r.sigma > 0.0 && r.sigma < 0.5, "rate.sigma", num(r.sigma), "must be in (0, 1/2)");
    need(r.max_iters >= 1, "rate.max_iters", std::to_string(r.max_iters), "must be >= 1");
    need(r.tol > 0.0, "rate.tol", num(r.tol), "must be > 0");
    need(r.nodes >= 16, "rate.nodes", std::to_string(r.nodes), "must be >= 16");
    need(r.tau_min_factor > 0.0 && r.tau_min_factor < 1.0, "rate.tau_min_factor", num(r.tau_min_factor),
         "must be in (0, 1)");
    need(r.profile_lo > 0.0 && r.profile_lo < r.profile_hi && r.profile_hi < 1.0, "rate.profile_lo,profile_hi",
         num(r.profile_lo) + "," + num(r.profile_hi), "must satisfy 0 < profile_lo < profile_hi < 1");
    need(r.profile_points >= 2, "rate.profile_points", std::to_string(r.profile_points), "must be >= 2");
  }
  if (sections.count("mass-phi") || c.command == "mass-phi") {
    const auto& p = c.mass_phi;
    window_violations("mass-phi", p.window, out);
    bool ok = true;
    for (std::size_t i = 0; i < p.checkpoints.size(); ++i)
      ok = ok && p.checkpoints[i] > 0.0 && p.checkpoints[i] < p.window.T &&
           (i == 0 || p.checkpoints[i] < p.checkpoints[i - 1]);
    need(ok, "mass-phi.checkpoints", join(p.checkpoints), "must be strictly decreasing values of T - t in (0, T)");
    need(p.nodes >= 64, "mass-phi.nodes", std::to_string(p.nodes), "must be >= 64");
  }
  if (sections.count("specialfn-check") || c.command == "specialfn-check") {
    const auto& f = c.specialfn;
    bool ok = true;
    for (double a : f.a_values) ok = ok && a > 1.0;
    need(ok, "specialfn-check.a_values", join(f.a_values), "every value must be > 1");
    ok = true;
    for (double x : f.ei_x) ok = ok && x > 0.0 && x < 1.0;
    need(ok, "specialfn-check.ei_x", join(f.ei_x), "every value must be in (0, 1)");
    need(f.cubic_z1 > 0.0, "specialfn-check.cubic_z1", num(f.cubic_z1), "must be > 0");
  }
}

// ---- output ----

void check_finite(const std::string& where, double v) {
  if (!std::isfinite(v)) throw NonFiniteError("non-finite value in " + where);
}

class Csv {
 public:
  Csv(const std::string& header_comment, std::vector<std::string> cols) : cols_(std::move(cols)) {
    os_ << "# " << header_comment << "\n";
    for (std::size_t i = 0; i < cols_.size(); ++i) os_ << (i ? "," : "") << cols_[i];
    os_ << "\n";
  }
  void row(const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      check_finite(cols_[i], v[i]);
      os_ << (i ? "," : "") << num(v[i]);
    }
    os_ << "\n";
  }
  std::string str() const { return os_.str(); }

 private:
  std::vector<std::string> cols_;
  std::ostringstream os_;
};

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  f << text;
}

void check_json(const json& j, const std::string& where) {
  if (j.is_number_float()) check_finite(where, j.get<double>());
  else if (j.is_structured())
    for (auto it = j.begin(); it != j.end(); ++it) check_json(*it, where);
}

json violations_json(const std::vector<ConfigViolation>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back({{"key", x.key}, {"value", x.value}, {"constraint", x.constraint}});
  return a;
}

struct Artifacts {
  std::vector<std::pair<std::string, std::string>> files;
  int code = kExitOk;
};

Artifacts run_sim(const ExperimentConfig& c, std::ostream& log, bool verbose) {
  const SimRun r = run(c.sim);
  Csv csv(c.resolved(), {"t", "M", "m2", "dm2dt_fit", "u_peak", "lambda_eff", "q_indicator"});
  for (const auto& s : r.samples) csv.row({s.t, s.M, s.m2, s.dm2dt_fit, s.u_peak, s.lambda_eff, s.q_indicator});
  json j;
  j["status"] = r.status == SimStatus::blowup ? "blowup" : "completed";
  j["reason"] = r.reason;
  j["t_final"] = r.final_state.t;
  j["steps"] = r.steps;
  j["rejected_steps"] = r.rejected;
  j["max_mass_drift"] = r.max_mass_drift;
  j["min_density"] = r.min_u;
  try {
    const auto m = verify_m2_identity(r.samples);
    j["m2_identity"] = {{"slope", m.slope}, {"expected", m.expected}, {"rel_discrepancy", m.rel_discrepancy},
                        {"samples", m.samples}};
  } catch (const DomainError& e) {
    j["m2_identity"] = {{"error", e.what()}};
  }
  if (r.status == SimStatus::blowup) {
    try {
      const auto f = extract_rate(r.samples);
      j["rate_fit"] = {{"T_est", f.T_est}, {"amplitude", f.amplitude}, {"exponent", f.exponent},
                       {"q_decreasing_fraction", f.decreasing_fraction},
                       {"q_monotone_final_decade", f.monotone_final_decade}};
    } catch (const DomainError& e) {
      j["rate_fit"] = {{"error", e.what()}};
    }
  }
  if (verbose) log << "sim: " << j["status"].get<std::string>() << " (" << r.reason << ") at t = " << r.final_state.t
                   << " after " << r.steps << " steps\n";
  Artifacts a;
  a.files = {{"sim.csv", csv.str()}, {"sim_summary.json", j.dump(2) + "\n"}};
  check_json(j, "sim_summary.json");
  a.code = r.status == SimStatus::blowup ? kExitPhysics : kExitOk;
  return a;
}

Artifacts run_rate(const ExperimentConfig& c, std::ostream& log, bool verbose) {
  RateSolveOptions o = c.rate;
  const auto rep = solve_rate(o);
  Csv csv(c.resolved(), {"t", "T_minus_t", "R_pstar", "R_p1", "R_p2", "weighted_R"});
  for (const auto& s : rep.residual_profile) csv.row({s.t, s.tau, s.R_pstar, s.R_p1, s.R_p2, s.weighted});
  json j;
  j["converged"] = rep.converged;
  j["iterations"] = rep.iterations;
  j["distances"] = rep.distances;
  j["fitted_norm_constants"] = json::object();
  for (const auto& [k, v] : rep.fitted_norm_constants) j["fitted_norm_constants"][k] = v;
  Csv fn(c.resolved(), {"T_minus_t", "p_star", "p1", "p2"});
  const auto& taus = rep.p1.taus();
  for (std::size_t i = 0; i < taus.size(); ++i)
    fn.row({taus[i], rep.p_star.values()[i], rep.p1.values()[i], rep.p2 ? rep.p2->values()[i] : 0.0});
  if (verbose) log << "rate: " << rep.iterations << " iterations, converged = " << rep.converged << "\n";
  check_json(j, "rate_summary.json");
  Artifacts a;
  a.files = {{"residual_profile.csv", csv.str()}, {"rate_functions.csv", fn.str()}, {"rate_summary.json", j.dump(2) + "\n"}};
  a.code = rep.converged ? kExitOk : kExitPhysics;
  return a;
}

Artifacts run_mass_phi(const ExperimentConfig& c, std::ostream& log, bool verbose) {
  const auto& o = c.mass_phi;
  const auto r = RateFunction::star(o.window);
  std::vector<double> stepper(o.checkpoints.size(), 0.0);
  if (o.stepper) {
    PhiRunOptions po;
    po.nodes = o.nodes;
    po.parts = SourceParts::kernel_only;
    const auto cps = run_phi_lambda(r, o.checkpoints, po);
    for (std::size_t i = 0; i < cps.size(); ++i) stepper[i] = cps[i].mass;
  }
  Csv csv(c.resolved(), {"t", "T_minus_t", "mass_duhamel", "expansion_rhs", "expansion_terms", "mass_stepper",
                         "diff_duhamel", "diff_expansion"});
  double d0 = 0.0, e0 = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < o.checkpoints.size(); ++i) {
    const double tau = o.checkpoints[i], t = o.window.T - tau;
    const double d = mass_phi1_duhamel(r, t), e = phi1_expansion_terms(r, t);
    if (i == 0) {
      d0 = d;
      e0 = e;
    }
    scale = std::max(scale, std::abs(4.0 * kPi * RateConstants::standard().kappa * r.at_tau(tau)));
    csv.row({t, tau, d, expansion_rhs(r, t), e, stepper[i], d0 - d, e0 - e});
    if (verbose) log << "mass-phi: T - t = " << num(tau) << " done\n";
  }
  json j;
  j["kappa_p_scale"] = scale;
  j["mass_at_T_formula"] = mass_at_T_formula(o.window.epsT);
  check_json(j, "mass_phi_summary.json");
  Artifacts a;
  a.files = {{"mass_phi.csv", csv.str()}, {"mass_phi_summary.json", j.dump(2) + "\n"}};
  return a;
}

Artifacts run_checks(const ExperimentConfig& c, const std::vector<CheckRow>& rows, const std::string& file,
                     std::ostream& log, bool verbose) {
  Csv csv(c.resolved(), {"index", "argument", "value", "reference", "abs_error", "bound", "pass"});
  std::string names = "# checks:";
  bool all = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    csv.row({static_cast<double>(i), r.argument, r.value, r.reference, std::abs(r.value - r.reference), r.bound,
             r.pass() ? 1.0 : 0.0});
    names += " " + std::to_string(i) + "=" + r.name;
    all = all && r.pass();
    if (verbose || !r.pass())
      log << (r.pass() ? "PASS " : "FAIL ") << r.name << " (" << num(r.argument) << "): " << num(r.value)
          << " vs " << num(r.reference) << ", bound " << num(r.bound) << "\n";
  }
  Artifacts a;
  a.files = {{file, csv.str() + names + "\n"}};
  a.code = all ? kExitOk : kExitError;
  return a;
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigViolation> v)
    : Error([&] {
        std::string s = "invalid config:";
        for (const auto& x : v) s += " " + x.key + " = " + x.value + " (" + x.constraint + ");";
        return s;
      }()),
      violations(std::move(v)) {}

std::string ExperimentConfig::resolved() const {
  auto self = *this;
  auto b = bindings(self);
  std::string s = "command=" + command + " seed=" + std::to_string(seed);
  if (command == "selftest") return s;
  s += " [" + command + "]";
  for (const auto& p : b.at(command)) s += " " + p.key + "=" + p.get();
  return s;
}

ExperimentConfig parse_config(const std::string& text, const std::string& command) {
  std::vector<ConfigViolation> bad;
  ExperimentConfig c;
  c.command = command;
  bool known = false;
  for (const auto& k : commands()) known = known || k == command;
  if (!known) throw ConfigError({{"command", command, "must be one of sim, rate, mass-phi, specialfn-check, selftest"}});

  auto b = bindings(c);
  std::set<std::string> sections, seen;
  std::string section = "general";
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        bad.push_back({"line " + std::to_string(lineno), line, "section header must be [name]"});
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      if (!b.count(section)) bad.push_back({"[" + section + "]", "", "unknown section"});
      sections.insert(section);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      bad.push_back({"line " + std::to_string(lineno), line, "expected key = value"});
      continue;
    }
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    const std::string full = section + "." + key;
    if (!b.count(section)) continue;
    const Param* p = nullptr;
    for (const auto& q : b[section])
      if (q.key == key) p = &q;
    if (!p) {
      bad.push_back({full, value, "unknown key"});
      continue;
    }
    if (!seen.insert(full).second) {
      bad.push_back({full, value, "duplicate key"});
      continue;
    }
    const auto err = p->set(value);
    if (!err.empty()) bad.push_back({full, value, err});
  }
  validate(c, sections, bad);
  if (!bad.empty()) throw ConfigError(std::move(bad));
  return c;
}

std::string csv_text(const std::string& comment, const std::vector<std::string>& cols,
                     const std::vector<std::vector<double>>& rows) {
  Csv c(comment, cols);
  for (const auto& r : rows) c.row(r);
  return c.str();
}

bool CheckRow::pass() const {
  return std::isfinite(value) && std::isfinite(reference) && std::abs(value - reference) <= bound;
}

std::vector<CheckRow> specialfn_checks(const SpecialfnOptions& opt) {
  std::vector<CheckRow> rows;
  // one constant K for the Gaussian-weighted integral against its closed form
  constexpr double K = 3.0;
  for (double a : opt.a_values)
    rows.push_back({"gaussian_Z0_integral - closed form", a, gaussian_Z0_integral(a), gaussian_Z0_closed(a),
                    K * std::log(a) / std::pow(a, 6)});
  const double z1 = opt.cubic_z1;
  const double direct = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [](double z) { return z * z * z * Z0(z); }, 0.0, z1, 15, 1e-15);
  rows.push_back({"cubic_moment_Z0 vs quadrature", z1, cubic_moment_Z0(z1), direct, 1e-10});
  if (z1 == 1.0) rows.push_back({"cubic_moment_Z0(1) vs 6 - 8 ln 2", 1.0, cubic_moment_Z0(1.0), 6.0 - 8.0 * std::log(2.0), 1e-12});
  rows.push_back({"heat6_factor(0+)", 1e-8, heat6_factor(1e-8), 1.0 / 32.0, 1e-12});
  rows.push_back({"heat6_factor(0)", 0.0, heat6_factor(0.0), 1.0 / 32.0, 1e-12});
  const double g = RateConstants::standard().euler_gamma;
  for (double x : opt.ei_x) rows.push_back({"Ei(-x) - gamma - ln x", x, expint_Ei(-x), g + std::log(x), 1.1 * x});
  return rows;
}

std::vector<CheckRow> selftest_checks(std::uint64_t seed) {
  std::vector<CheckRow> rows;
  auto add = [&](const std::string& n, double arg, double v, double ref, double bound) {
    rows.push_back({n, arg, v, ref, bound});
  };
  const auto rc = RateConstants::standard();
  add("bubble U(0)", 0.0, bubble_U(0.0), 8.0, 0.0);
  add("kappa = gamma + 1 - ln 4", 0.0, rc.kappa, 0.19092130378164224, 1e-15);
  add("c_star identity defect", 0.0, rc.identity_defect(), 0.0, 1e-14);
  add("heat6_factor(0)", 0.0, heat6_factor(0.0), 1.0 / 32.0, 1e-15);
  add("cubic_moment_Z0(1)", 1.0, cubic_moment_Z0(1.0), 6.0 - 8.0 * std::log(2.0), 1e-12);
  add("mass_at_T_formula(1e-6)", 1e-6, mass_at_T_formula(1e-6), 1.851e-2, 1e-5);

  // config rejections
  auto rejected = [](const std::string& text, const std::string& cmd) {
    try {
      parse_config(text, cmd);
      return 0.0;
    } catch (const ConfigError&) {
      return 1.0;
    }
  };
  add("config rejects T >= epsT", 0.0, rejected("[rate]\nT = 1e-2\nepsT = 1e-4\n", "rate"), 1.0, 0.0);
  add("config rejects sigma = 0.6", 0.6, rejected("[rate]\nsigma = 0.6\n", "rate"), 1.0, 0.0);
  add("config rejects unknown key", 0.0, rejected("[sim]\nfoo = 1\n", "sim"), 1.0, 0.0);
  add("config accepts m_multiplier = 1.05", 1.05, rejected("[sim]\nm_multiplier = 1.05\n", "sim"), 0.0, 0.0);

  // simulator invariants on a coarse grid
  SimConfig sc;
  sc.cells = 256;
  sc.first_cell = 1e-2;
  sc.mass_multiplier = 1.5;
  const auto s0 = init_bubble(sc);
  add("initial mass", 1.5, s0.M, 1.5 * 8.0 * kPi, 1e-12 * s0.M);
  const auto vr0 = chemical_gradient(*s0.grid, std::vector<double>(s0.u.size(), 0.0));
  double vmax = 0.0;
  for (double x : vr0) vmax = std::max(vmax, std::abs(x));
  add("chemical gradient of zero", 0.0, vmax, 0.0, 0.0);
  auto s = s0;
  double umin = 0.0;
  for (int k = 0; k < 50; ++k) {
    s = step(s, drift_dt_limit(s));
    for (double x : s.u.values) umin = std::min(umin, x);
  }
  add("mass after 50 steps", 50.0, s.M, s0.M, 1e-12 * s0.M);
  add("positivity after 50 steps", 50.0, umin, 0.0, 0.0);
  const double M = s0.M;
  const auto s1 = step(s0, 1e-4);
  add("one-step m2 rate", 1e-4, (s1.m2 - s0.m2) / 1e-4, 4.0 * M - M * M / (2.0 * kPi),
      0.02 * std::abs(4.0 * M - M * M / (2.0 * kPi)));

  // rate extraction on a self-similar series: q constant
  std::vector<SimSample> ss;
  for (int i = 0; i <= 60; ++i) {
    SimSample x;
    const double tau = 0.1 * std::pow(10.0, -4.0 * i / 60.0);
    x.t = 1.0 - tau;
    x.u_peak = 2.0 / tau;
    x.lambda_eff = std::sqrt(8.0 / x.u_peak);
    ss.push_back(x);
  }
  const auto fit = extract_rate(ss);
  add("self-similar q spread", 0.0, *std::max_element(fit.q.begin(), fit.q.end()) -
                                        *std::min_element(fit.q.begin(), fit.q.end()), 0.0, 1e-5);

  // resolvent on a random battery
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const TimeWindow w{};
  const auto nodes = RateFunction::default_nodes(w, 200);
  for (int i = 0; i < 3; ++i) {
    const double g = i == 2 ? 1.5 : 1.0, c1 = 1.0 + 0.5 * u(rng), c2 = 0.3 * u(rng);
    const auto f = RateFunction::sample(
        w, nodes,
        [=](double tau) {
          const double L = std::abs(std::log(tau));
          return std::exp(-g * std::sqrt(2.0 * L)) * (c1 + c2 * std::sin(std::log(L)));
        },
        TailShape{g, 0.0});
    const auto p = resolvent_T0(f, LogNorm{g, 0.0});
    const double tau = 1e-7, v = std::sqrt(2.0 * std::abs(std::log(tau)));
    add("resolvent equation residual", g, (p.int_p_over_tau(tau) - v * p.at_tau(tau) - f.at_tau(tau)) / f.at_tau(tau),
        0.0, 1e-6);
  }
  return rows;
}

int report_error(const std::string& command, const Error& e, const std::filesystem::path& out, std::ostream& log) {
  log << "error: " << e.what() << "\n";
  json j;
  j["command"] = command;
  j["kind"] = e.kind();
  j["message"] = e.what();
  if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) j["violations"] = violations_json(ce->violations);
  try {
    std::filesystem::create_directories(out);
    write_file(out / "error.json", j.dump(2) + "\n");
  } catch (const std::exception& w) {
    log << "error: could not write error.json: " << w.what() << "\n";
  }
  return kExitError;
}

int run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out, bool verbose, std::ostream& log) {
  try {
    Artifacts a;
    if (cfg.command == "sim") a = run_sim(cfg, log, verbose);
    else if (cfg.command == "rate") a = run_rate(cfg, log, verbose);
    else if (cfg.command == "mass-phi") a = run_mass_phi(cfg, log, verbose);
    else if (cfg.command == "specialfn-check") a = run_checks(cfg, specialfn_checks(cfg.specialfn), "specialfn.csv", log, verbose);
    else if (cfg.command == "selftest") a = run_checks(cfg, selftest_checks(cfg.seed), "selftest.csv", log, verbose);
    else throw ConfigError({{"command", cfg.command, "unknown command"}});
    std::filesystem::create_directories(out);
    for (const auto& [name, text] : a.files) write_file(out / name, text);
    if (verbose)
      for (const auto& [name, text] : a.files) log << "wrote " << (out / name).string() << "\n";
    return a.code;
  } catch (const Error& e) {
    return report_error(cfg.command, e, out, log);
  } catch (const std::exception& e) {
    return report_error(cfg.command, Error(e.what()), out, log);
  }
}

}  // namespace ksb
