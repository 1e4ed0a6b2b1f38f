// Command line front end: theory, simulate, compare, and validate runs over
// the layered Gaussian product model, configured by JSON files and flags
// (flags win). Exit codes: 0 success, 2 configuration error, 3 numerical
// failure; errors are emitted as JSON objects on stderr.

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "djs/activation.hpp"
#include "djs/errors.hpp"
#include "djs/experiment.hpp"
#include "djs/measure.hpp"
#include "djs/network.hpp"
#include "djs/simulate.hpp"
#include "djs/solver.hpp"

namespace {

namespace fs = std::filesystem;

struct Flags {
  std::string config_path;
  std::string mode;
  std::string phi;
  std::size_t layers = 1;
  std::size_t n = 256;
  std::vector<std::size_t> widths;
  double sigma_b2 = 0.0;
  std::string q1;
  std::uint64_t seed = 1;
  std::size_t reps = 8;
  std::vector<double> eps_ladder;
  double tol = 1e-11;
  int grid_points = 2000;
  double aspect_c = 1.0;
  std::string output;
  std::string q_recurrence;
  bool unsafe_unbounded = false;
  std::string input_mode;
  std::vector<std::string> formats;
};

// The same flag set is registered on the root app and on every subcommand,
// bound to one shared Flags instance, so both calling styles work:
//   djs theory --phi tanh ...      and      djs --mode theory --phi tanh ...
void attach_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_path,
                  "JSON experiment file; flags override its fields");
  cmd->add_option("--phi", f.phi,
                  "activation: tanh, hard-tanh, erf, scaled-shifted-tanh, "
                  "relu, custom");
  cmd->add_option("--L", f.layers, "number of layers (>= 1)");
  cmd->add_option("--n", f.n, "uniform width for all layers");
  cmd->add_option("--widths", f.widths,
                  "comma-separated width profile n_0,...,n_L")
      ->delimiter(',');
  cmd->add_option("--sigma-b2", f.sigma_b2, "bias variance");
  cmd->add_option("--q1", f.q1,
                  "first-layer variance: a number or 'fixed-point'");
  cmd->add_option("--seed", f.seed, "base RNG seed");
  cmd->add_option("--reps", f.reps, "number of replicas");
  cmd->add_option("--eps-ladder", f.eps_ladder,
                  "comma-separated decreasing imaginary offsets")
      ->delimiter(',');
  cmd->add_option("--tol", f.tol, "solver tolerance");
  cmd->add_option("--grid-points", f.grid_points, "density grid size");
  cmd->add_option("--c", f.aspect_c, "aspect ratio m/n of the weight factors");
  cmd->add_option("--output", f.output, "output directory");
  cmd->add_option("--q-recurrence", f.q_recurrence,
                  "variance recurrence: with-bias or without-bias");
  cmd->add_flag("--unsafe-unbounded", f.unsafe_unbounded,
                "allow unbounded activations");
  cmd->add_option("--input-mode", f.input_mode,
                  "input vector convention: iid-unit, q1-target, explicit");
  cmd->add_option("--formats", f.formats, "output formats subset of csv,json")
      ->delimiter(',');
}

bool flag_given(const CLI::App& root, const CLI::App* sub,
                const std::string& name) {
  if (sub != nullptr && sub->count(name) > 0) return true;
  return root.count(name) > 0;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw djs::ConfigError("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw djs::ConfigError("cannot write file: " + path.string());
  out << content;
  if (!out) throw djs::ConfigError("write failed: " + path.string());
  std::cout << "wrote " << path.string() << "\n";
}

djs::ExperimentSpec assemble(const CLI::App& root, const CLI::App* sub,
                             const Flags& f) {
  djs::ExperimentSpec spec;
  if (flag_given(root, sub, "--config"))
    spec = djs::experiment_from_json(read_file(f.config_path));

  if (sub != nullptr) {
    spec.mode = djs::run_mode_from_name(sub->get_name());
  } else if (root.count("--mode") > 0) {
    spec.mode = djs::run_mode_from_name(f.mode);
  }

  auto& net = spec.network;
  if (flag_given(root, sub, "--L")) net.layers = f.layers;
  if (flag_given(root, sub, "--widths")) {
    net.widths = f.widths;
  } else if (flag_given(root, sub, "--n") || net.widths.empty()) {
    net.widths.assign(net.layers + 1, f.n);
  }
  if (flag_given(root, sub, "--phi")) net.activation = f.phi;
  if (flag_given(root, sub, "--sigma-b2")) net.sigma_b2 = f.sigma_b2;
  if (flag_given(root, sub, "--q1")) {
    if (f.q1 == "fixed-point") {
      net.q1_fixed_point = true;
    } else {
      try {
        std::size_t used = 0;
        net.q1 = std::stod(f.q1, &used);
        if (used != f.q1.size()) throw std::invalid_argument(f.q1);
      } catch (const std::exception&) {
        throw djs::ConfigError("--q1 expects a number or 'fixed-point', got '" +
                               f.q1 + "'");
      }
      net.q1_fixed_point = false;
    }
    // A requested variance only takes effect under the q1-target convention.
    if (!flag_given(root, sub, "--input-mode"))
      net.input_mode = djs::InputMode::q1_target;
  }
  if (flag_given(root, sub, "--seed")) net.seed = f.seed;
  if (flag_given(root, sub, "--q-recurrence")) {
    if (f.q_recurrence == "with-bias") {
      net.q_recurrence = djs::QRecurrence::with_bias;
    } else if (f.q_recurrence == "without-bias") {
      net.q_recurrence = djs::QRecurrence::without_bias;
    } else {
      throw djs::ConfigError(
          "--q-recurrence expects with-bias or without-bias, got '" +
          f.q_recurrence + "'");
    }
  }
  if (f.unsafe_unbounded) net.unsafe_unbounded = true;
  if (flag_given(root, sub, "--input-mode"))
    net.input_mode = djs::input_mode_from_name(f.input_mode);

  auto& solver = spec.solver;
  if (flag_given(root, sub, "--eps-ladder")) solver.eps_ladder = f.eps_ladder;
  if (flag_given(root, sub, "--tol")) solver.tol = f.tol;
  if (flag_given(root, sub, "--grid-points")) solver.grid_points = f.grid_points;
  if (flag_given(root, sub, "--c")) solver.aspect_c = f.aspect_c;

  if (flag_given(root, sub, "--reps")) spec.reps = f.reps;
  if (flag_given(root, sub, "--output")) spec.output_dir = f.output;
  if (flag_given(root, sub, "--formats")) spec.formats = f.formats;

  spec.validate();
  return spec;
}

// Density grid of the final composed law: the state is folded through all
// but the last layer, the last layer is resolved on its grid, and the grid
// is mapped through the closing width-ratio dilation. The densities are then
// normalized so the continuous part integrates to one; the mixture weights
// (origin atom vs bulk) live in the measure JSON instead.
djs::DensityGrid final_density(const djs::NetworkConfig& net,
                               const djs::SolverConfig& base,
                               const djs::QSchedule& schedule) {
  const djs::Activation act = djs::resolve_activation(net);
  djs::SpectralMeasure state = djs::SpectralMeasure::point_mass(1.0);
  for (std::size_t l = 1; l < net.layers; ++l) {
    const auto diag = djs::dphi_squared_law(act, schedule.q[l - 1]);
    const double c_l = static_cast<double>(net.widths[l]) /
                       static_cast<double>(net.widths[l - 1]);
    djs::SolverConfig local = base;
    local.aspect_c = c_l;
    local.lambda_max = 0.0;
    state = djs::diamond(state, diag, local);
    if (c_l != 1.0) state = state.scaled(c_l);
  }
  const auto diag = djs::dphi_squared_law(act, schedule.q[net.layers - 1]);
  const double c_last = static_cast<double>(net.widths[net.layers]) /
                        static_cast<double>(net.widths[net.layers - 1]);
  djs::SolverConfig local = base;
  local.aspect_c = c_last;
  local.lambda_max = 0.0;
  djs::DensityGrid grid = djs::resolve_density(diag, state, local);
  if (c_last != 1.0) {
    for (double& l : grid.lambdas) l *= c_last;
    for (double& d : grid.densities) d /= c_last;
  }
  double mass = 0.0;
  for (std::size_t i = 0; i + 1 < grid.lambdas.size(); ++i)
    mass += 0.5 * (grid.densities[i] + grid.densities[i + 1]) *
            (grid.lambdas[i + 1] - grid.lambdas[i]);
  if (mass > 0.0)
    for (double& d : grid.densities) d /= mass;
  grid.mass_estimate = mass > 0.0 ? 1.0 : 0.0;
  return grid;
}

int run_theory(const djs::ExperimentSpec& spec) {
  const auto out = djs::theory_spectrum(spec.network, spec.solver);
  const fs::path dir(spec.output_dir);
  if (spec.wants_format("json")) {
    write_file(dir / "measure.json", djs::to_json_string(out.spectrum));
    write_file(dir / "qschedule.json", djs::to_json_string(out.schedule));
  }
  if (spec.wants_format("csv")) {
    const auto grid = final_density(spec.network, spec.solver, out.schedule);
    write_file(dir / "density.csv", djs::to_csv(grid));
  }
  std::cout << "theory: " << out.spectrum.size() << " atoms, origin mass "
            << djs::format_double(out.spectrum.origin_mass()) << "\n";
  return 0;
}

int run_simulate(const djs::ExperimentSpec& spec) {
  const fs::path dir(spec.output_dir);
  for (std::size_t r = 0; r < spec.reps; ++r) {
    const auto record = djs::run_simulation(spec.network, r);
    const std::string suffix = spec.reps > 1 ? "_r" + std::to_string(r) : "";
    if (spec.wants_format("csv"))
      write_file(dir / ("eigenvalues" + suffix + ".csv"),
                 djs::to_csv(record.spectrum));
    if (spec.wants_format("json"))
      write_file(dir / ("run_record" + suffix + ".json"),
                 djs::to_json_string(record));
  }
  return 0;
}

int run_compare(const djs::ExperimentSpec& spec) {
  const auto report = djs::compare(spec.network, spec.solver, spec.reps);
  const fs::path dir(spec.output_dir);
  if (spec.wants_format("json"))
    write_file(dir / "report.json", djs::to_json_string(report));
  if (spec.wants_format("csv")) {
    std::string csv = "metric,value\n";
    csv += "ks," + djs::format_double(report.ks) + "\n";
    for (std::size_t k = 0; k < report.moment_gaps.size(); ++k)
      csv += "moment_gap_" + std::to_string(k + 1) + "," +
             djs::format_double(report.moment_gaps[k]) + "\n";
    for (std::size_t l = 0; l < report.q_gaps.size(); ++l)
      csv += "q_gap_" + std::to_string(l + 1) + "," +
             djs::format_double(report.q_gaps[l]) + "\n";
    write_file(dir / "report.csv", csv);
  }
  std::cout << "compare: ks = " << djs::format_double(report.ks) << "\n";
  return 0;
}

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Built-in oracle suite: closed-form density agreement, the golden-ratio
// point value, first-moment multiplicativity, commutativity of the layer
// convolution, and the half-plane mapping properties of the point solver.
std::vector<CheckResult> run_checks() {
  std::vector<CheckResult> results;
  const auto delta = djs::SpectralMeasure::point_mass(1.0);

  {
    CheckResult r;
    r.name = "reference-density";
    const auto grid = djs::resolve_density(delta, delta);
    double max_err = 0.0;
    for (std::size_t i = 0; i < grid.lambdas.size(); ++i) {
      const double l = grid.lambdas[i];
      if (l < 0.15 || l > 3.85) continue;
      max_err = std::max(max_err,
                         std::abs(grid.densities[i] - djs::mp_density(1.0, l)));
    }
    r.pass = max_err < 1e-3;
    r.detail = "max density residual " + djs::format_double(max_err);
    results.push_back(r);
  }
  {
    CheckResult r;
    r.name = "golden-ratio-point";
    const auto sol = djs::solve_hk(delta, delta, {-1.0, 0.0});
    const double err =
        std::abs(sol.f.real() - (std::sqrt(5.0) - 1.0) / 2.0) +
        std::abs(sol.f.imag());
    r.pass = sol.valid && err < 1e-6;
    r.detail = "value error " + djs::format_double(err);
    results.push_back(r);
  }
  const auto nu_a =
      djs::SpectralMeasure::from_atoms({{0.5, 0.5}, {1.4, 0.5}});
  const auto nu_b = djs::SpectralMeasure::from_atoms(
      {{0.3, 0.3}, {0.9, 0.4}, {1.8, 0.3}});
  const auto ab = djs::diamond(nu_a, nu_b);
  const auto ba = djs::diamond(nu_b, nu_a);
  {
    CheckResult r;
    r.name = "moment-multiplicativity";
    const double want = djs::moment(nu_a, 1) * djs::moment(nu_b, 1);
    const double rel = std::abs(djs::moment(ab, 1) - want) / want;
    r.pass = rel < 1e-3;
    r.detail = "relative first-moment error " + djs::format_double(rel);
    results.push_back(r);
  }
  {
    CheckResult r;
    r.name = "commutativity";
    const double ks = djs::ks_distance(ab, ba);
    r.pass = ks < 1e-3;
    r.detail = "ks distance " + djs::format_double(ks);
    results.push_back(r);
  }
  {
    CheckResult r;
    r.name = "half-plane-mapping";
    bool ok = true;
    double worst = 0.0;
    const std::complex<double> points[] = {
        {0.9, 0.7}, {-0.4, 0.3}, {2.2, -0.5}, {0.1, 1.5}};
    for (const auto& z : points) {
      const auto sol = djs::solve_hk(nu_b, nu_a, z);
      ok = ok && sol.valid && sol.f.imag() * z.imag() > 0.0 &&
           sol.h.imag() * z.imag() > 0.0 && sol.k.imag() * z.imag() < 0.0;
      worst = std::max(worst, sol.residual);
    }
    r.pass = ok;
    r.detail = "worst residual " + djs::format_double(worst);
    results.push_back(r);
  }
  return results;
}

int run_validate() {
  const auto results = run_checks();
  bool all = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail
              << "\n";
    all = all && r.pass;
  }
  std::cout << (all ? "all checks passed" : "some checks failed") << "\n";
  return all ? 0 : 3;
}

int run(const djs::ExperimentSpec& spec) {
  if (spec.mode != djs::RunMode::validate) {
    std::error_code ec;
    fs::create_directories(spec.output_dir, ec);
    if (ec)
      throw djs::ConfigError("cannot create output directory: " +
                             spec.output_dir + " (" + ec.message() + ")");
  }
  switch (spec.mode) {
    case djs::RunMode::theory:
      return run_theory(spec);
    case djs::RunMode::simulate:
      return run_simulate(spec);
    case djs::RunMode::compare:
      return run_compare(spec);
    case djs::RunMode::validate:
      return run_validate();
  }
  throw djs::ConfigError("unknown run mode");
}

int emit_error(const std::string& type, const std::string& message,
               const std::string& operation, int code) {
  nlohmann::json err{{"error", message}, {"type", type}};
  if (!operation.empty()) err["operation"] = operation;
  std::cerr << err.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Spectral theory and simulation of layered Gaussian network jacobians"};
  app.name("djs");
  Flags flags;
  app.add_option("--mode", flags.mode,
                 "run mode: theory, simulate, compare, validate");
  attach_flags(&app, flags);
  CLI::App* subs[4] = {
      app.add_subcommand("theory", "solve the limiting spectrum"),
      app.add_subcommand("simulate", "sample finite-size spectra"),
      app.add_subcommand("compare", "theory vs pooled simulation report"),
      app.add_subcommand("validate", "run the built-in oracle suite"),
  };
  for (CLI::App* sub : subs) attach_flags(sub, flags);
  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return emit_error("config", e.what(), "", 2);
  }

  const CLI::App* sub = nullptr;
  for (const CLI::App* s : subs)
    if (s->parsed()) sub = s;

  try {
    const auto spec = assemble(app, sub, flags);
    return run(spec);
  } catch (const djs::ConfigError& e) {
    return emit_error("config", e.what(), "", 2);
  } catch (const djs::NumericalError& e) {
    return emit_error("numerical", e.what(), e.operation(), 3);
  } catch (const std::exception& e) {
    return emit_error("internal", e.what(), "", 3);
  }
}
