// Command-line driver: fit, cv, test, simulate, calibrate.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "vcplm/errors.hpp"
#include "vcplm/inference.hpp"
#include "vcplm/io.hpp"
#include "vcplm/profile.hpp"
#include "vcplm/simulation.hpp"

namespace fs = std::filesystem;
using namespace vcplm;

namespace {

enum Exit { kOk = 0, kInput = 2, kNumerical = 3, kInstability = 4 };

struct Options {
  std::string input;
  std::string out = ".";
  std::string mode = "proposed";
  std::optional<double> h;
  std::optional<double> b;
  std::string cv_grid;
  std::string kernel = "gaussian";
  int order = 1;
  std::string a_rows;
  std::string target;
  std::string test = "ratio";
  std::string constant = "1";
  std::optional<int> bootstrap;
  double level = 0.05;
  std::optional<std::uint64_t> seed;
  std::string preset;
  std::string config;
  std::optional<Index> replicates;
  int threads = 1;
};

std::vector<double> parse_numbers(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) {
    const auto first = token.find_first_not_of(" \t");
    const auto last = token.find_last_not_of(" \t");
    if (first == std::string::npos) throw ValidationError("empty entry in " + what);
    token = token.substr(first, last - first + 1);
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), x);
    if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(x))
      throw ValidationError("cannot parse '" + token + "' in " + what);
    out.push_back(x);
  }
  if (out.empty()) throw ValidationError(what + " is empty");
  return out;
}

LinearHypothesis parse_hypothesis(const Options& o, Index p) {
  if (o.a_rows.empty()) throw ValidationError("--A is required for the ratio and Wald tests");
  std::vector<std::vector<double>> rows;
  std::istringstream in(o.a_rows);
  std::string row;
  while (std::getline(in, row, ';')) rows.push_back(parse_numbers(row, "--A"));
  const Index l = static_cast<Index>(rows.size());
  const Index width = static_cast<Index>(rows.front().size());
  for (const auto& r : rows)
    if (static_cast<Index>(r.size()) != width)
      throw InvalidHypothesis("rows of --A have different lengths");
  LinearHypothesis hyp;
  hyp.a.resize(l, width);
  for (Index i = 0; i < l; ++i)
    for (Index j = 0; j < width; ++j) hyp.a(i, j) = rows[static_cast<std::size_t>(i)][j];
  if (o.target.empty()) {
    hyp.target = Vector::Zero(l);
  } else {
    std::string t = o.target;
    std::replace(t.begin(), t.end(), ';', ',');
    const auto values = parse_numbers(t, "--target");
    hyp.target = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
  }
  if (hyp.target.size() != l)
    throw InvalidHypothesis("--target has " + std::to_string(hyp.target.size()) +
                            " entries but --A has " + std::to_string(l) + " rows");
  hyp.validate(p);
  return hyp;
}

FitConfig fit_config(const Options& o, const Dataset& data) {
  FitConfig cfg;
  cfg.mode = parse_fit_mode(o.mode);
  cfg.kernel.family = parse_kernel_family(o.kernel);
  cfg.calibration.kernel = cfg.kernel;
  cfg.calibration.order = o.order;
  cfg.calibration.bandwidth = o.b;
  cfg.h = o.h;
  if (!o.cv_grid.empty()) cfg.cv_grid = parse_numbers(o.cv_grid, "--cv-grid");
  if (cfg.mode == FitMode::benchmark && !data.xi)
    throw ValidationError("benchmark mode needs xi_1..xi_p1 columns in the input");
  return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << content;
}

fs::path prepare_out(const Options& o) {
  fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory '" + o.out + "'");
  return dir;
}

Json provenance(const std::string& command, const Options& o) {
  Json j;
  j["command"] = command;
  j["version"] = std::string(version());
  if (!o.input.empty()) j["input"] = o.input;
  j["mode"] = o.mode;
  return j;
}

std::uint64_t resolve_seed(const Options& o, Json& prov) {
  const std::uint64_t seed = o.seed ? *o.seed : entropy_seed();
  prov["seed"] = seed;
  prov["seed_source"] = o.seed ? "flag" : "entropy";
  return seed;
}

int cmd_fit(const Options& o) {
  const Dataset data = read_dataset_csv(o.input);
  const FitConfig cfg = fit_config(o, data);
  const ProfileFit fit = fit_pipeline(data, cfg);
  const fs::path dir = prepare_out(o);
  write_file(dir / "fit.json", dump_json(fit_to_json(fit)));
  std::ostringstream curve;
  write_alpha_curve(curve, fit);
  write_file(dir / "alpha_curve.csv", curve.str());
  Json prov = provenance("fit", o);
  prov["bandwidths"] = {{"h", fit.h}, {"b", fit.b ? Json(*fit.b) : Json(nullptr)}};
  write_file(dir / "provenance.json", dump_json(prov));
  std::cout << std::setprecision(6) << "h = " << fit.h << "\ntheta_hat =";
  for (Index k = 0; k < fit.p(); ++k) std::cout << ' ' << fit.theta(k);
  std::cout << "\nse_theta  =";
  for (Index k = 0; k < fit.p(); ++k) std::cout << ' ' << fit.se_theta(k);
  std::cout << '\n';
  return kOk;
}

int cmd_cv(const Options& o) {
  const Dataset data = read_dataset_csv(o.input);
  FitConfig cfg = fit_config(o, data);
  const std::vector<double> grid =
      cfg.cv_grid.empty() ? default_cv_grid(data.u) : cfg.cv_grid;
  const Matrix z_hat = assemble_z(data, cfg);
  const BandwidthSelection sel = cv_profile(grid, data.x, data.u, data.y, z_hat, cfg.kernel);
  const fs::path dir = prepare_out(o);
  std::ostringstream csv;
  csv << "h,cv\n" << std::setprecision(12);
  for (std::size_t k = 0; k < sel.grid.size(); ++k) {
    csv << sel.grid[k] << ',';
    if (std::isnan(sel.scores[k])) csv << "nan";
    else csv << sel.scores[k];
    csv << '\n';
  }
  write_file(dir / "cv.csv", csv.str());
  Json prov = provenance("cv", o);
  prov["h_selected"] = sel.h;
  write_file(dir / "provenance.json", dump_json(prov));
  std::cout << std::setprecision(6) << "h = " << sel.h << '\n';
  return kOk;
}

int cmd_test(const Options& o) {
  const Dataset data = read_dataset_csv(o.input);
  const FitConfig cfg = fit_config(o, data);
  const TestKind kind = parse_test_kind(o.test);
  NullSpec null;
  if (kind == TestKind::glr) {
    GlrNull g;
    for (double c : parse_numbers(o.constant, "--constant")) {
      if (c < 1 || c > static_cast<double>(data.q()) || c != std::floor(c))
        throw ValidationError("--constant entries must be integers in 1.." +
                              std::to_string(data.q()));
      g.constant.push_back(static_cast<Index>(c) - 1);
    }
    null = g;
  } else {
    null = parse_hypothesis(o, data.p());
  }
  Json prov = provenance("test", o);
  std::optional<BootstrapConfig> boot;
  if (o.bootstrap) {
    if (*o.bootstrap < 1) throw ValidationError("--bootstrap must be positive");
    boot = BootstrapConfig{*o.bootstrap, o.level, resolve_seed(o, prov), o.threads};
  }
  const ProfileFit fit = fit_pipeline(data, cfg);
  const TestResult r = run_test(kind, fit, data, cfg, null, boot);
  const fs::path dir = prepare_out(o);
  write_file(dir / "test.json", dump_json(test_to_json(r)));
  prov["test"] = r.test;
  prov["level"] = o.level;
  write_file(dir / "provenance.json", dump_json(prov));
  std::cout << std::setprecision(6) << r.test << " statistic = " << r.statistic;
  if (kind == TestKind::ratio) std::cout << " (2 rho_n T_n = " << r.scaled_statistic << ')';
  std::cout << '\n';
  if (r.p_asymptotic) std::cout << "p (asymptotic) = " << *r.p_asymptotic << '\n';
  if (r.p_bootstrap) std::cout << "p (bootstrap)  = " << *r.p_bootstrap << '\n';
  return kOk;
}

int cmd_simulate(const Options& o) {
  ScenarioSpec spec;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw ValidationError("cannot open config '" + o.config + "'");
    Json j;
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    spec = scenario_from_json(j);
  } else if (!o.preset.empty()) {
    spec = scenario_preset(o.preset);
  } else {
    throw ValidationError("simulate needs --preset or --config");
  }
  if (o.replicates) spec.replicates = *o.replicates;
  spec.threads = o.threads;
  Json prov = provenance("simulate", o);
  prov.erase("mode");
  spec.seed = resolve_seed(o, prov);
  spec.validate();

  const auto power = preset_power_kind(spec.name);
  MonteCarloReport report;
  if (power) {
    BootstrapConfig boot;
    boot.replicates = o.bootstrap.value_or(spec.replicates);
    boot.level = o.level;
    boot.seed = spec.seed;
    prov["bootstrap"] = boot.replicates;
    prov["level"] = boot.level;
    report = run_power_study(spec, *power, boot);
  } else {
    report = run_estimation_study(spec);
  }
  const fs::path dir = prepare_out(o);
  std::ostringstream csv;
  report.write_csv(csv);
  write_file(dir / "report.csv", csv.str());
  prov["spec"] = scenario_to_json(spec);
  Json failures = Json::array();
  for (const auto& [sweep, count] : report.failures)
    failures.push_back({{"sweep", sweep}, {"failed_replicates", count}});
  prov["failures"] = std::move(failures);
  write_file(dir / "provenance.json", dump_json(prov));
  std::cout << csv.str();
  return kOk;
}

int cmd_calibrate(const Options& o) {
  const Dataset data = read_dataset_csv(o.input);
  CalibrationConfig cfg;
  cfg.order = o.order;
  cfg.bandwidth = o.b;
  cfg.kernel.family = parse_kernel_family(o.kernel);
  const CalibratedCovariates cal = calibrate_all(data.eta, data.v, cfg);
  const fs::path dir = prepare_out(o);
  std::ostringstream csv;
  csv << "V";
  for (Index k = 0; k < data.p1(); ++k) csv << ",xi_hat_" << k + 1;
  for (Index k = 0; k < data.p1(); ++k) csv << ",e_hat_" << k + 1;
  csv << '\n' << std::setprecision(12);
  for (Index i = 0; i < data.n(); ++i) {
    csv << data.v(i);
    for (Index k = 0; k < data.p1(); ++k) csv << ',' << cal.xi_hat(i, k);
    for (Index k = 0; k < data.p1(); ++k) csv << ',' << cal.residuals(i, k);
    csv << '\n';
  }
  write_file(dir / "calibration.csv", csv.str());
  Json prov = provenance("calibrate", o);
  prov.erase("mode");
  prov["order"] = cal.order;
  prov["b"] = cal.bandwidth;
  write_file(dir / "provenance.json", dump_json(prov));
  std::cout << std::setprecision(6) << "b = " << cal.bandwidth << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Varying-coefficient partially linear models with error-prone covariates"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1, 1);
  Options o;

  auto data_flags = [&](CLI::App* sub) {
    sub->add_option("--input", o.input, "CSV with Y, eta_*, V, W_*, X_*, U [, xi_*]")->required();
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--mode", o.mode, "proposed | naive | benchmark")
        ->check(CLI::IsMember({"proposed", "naive", "benchmark"}));
    sub->add_option("--b", o.b, "Calibration bandwidth (default: sd(V) n^-1/3)");
    sub->add_option("--order", o.order, "Calibration polynomial degree");
    sub->add_option("--kernel", o.kernel, "gaussian | epanechnikov | uniform");
  };
  auto fit_flags = [&](CLI::App* sub) {
    data_flags(sub);
    sub->add_option("--h", o.h, "Coefficient bandwidth (default: cross-validation)");
    sub->add_option("--cv-grid", o.cv_grid, "Comma-separated candidate bandwidths");
  };

  auto* fit = app.add_subcommand("fit", "Fit the model; writes fit.json and alpha_curve.csv");
  fit_flags(fit);

  auto* cv = app.add_subcommand("cv", "Cross-validation profile; writes cv.csv");
  data_flags(cv);
  cv->add_option("--cv-grid", o.cv_grid, "Comma-separated candidate bandwidths");

  auto* test = app.add_subcommand("test", "Hypothesis test; writes test.json");
  fit_flags(test);
  test->add_option("--test", o.test, "ratio | wald | glr")
      ->check(CLI::IsMember({"ratio", "wald", "glr"}));
  test->add_option("--A", o.a_rows, "Hypothesis rows, e.g. \"1,1,1\" or \"1,0,0;0,1,0\"");
  test->add_option("--target", o.target, "Right-hand side (default zeros)");
  test->add_option("--constant", o.constant, "GLR: 1-based X columns held constant");
  test->add_option("--bootstrap", o.bootstrap, "Wild bootstrap replicates B");
  test->add_option("--level", o.level, "Nominal level");
  test->add_option("--seed", o.seed, "Random seed (default: system entropy)");
  test->add_option("--threads", o.threads, "Worker cap")->check(CLI::PositiveNumber);

  auto* sim = app.add_subcommand("simulate", "Monte Carlo study; writes report.csv");
  sim->add_option("--preset", o.preset, "Named preset");
  sim->add_option("--config", o.config, "ScenarioSpec JSON file");
  sim->add_option("--out", o.out, "Output directory");
  sim->add_option("--replicates", o.replicates, "Override the replicate count");
  sim->add_option("--bootstrap", o.bootstrap, "Bootstrap replicates for power presets");
  sim->add_option("--level", o.level, "Nominal level");
  sim->add_option("--seed", o.seed, "Random seed (default: system entropy)");
  sim->add_option("--threads", o.threads, "Worker cap")->check(CLI::PositiveNumber);

  auto* cal = app.add_subcommand("calibrate", "Calibrate eta on V; writes calibration.csv");
  data_flags(cal);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*fit) return cmd_fit(o);
    if (*cv) return cmd_cv(o);
    if (*test) return cmd_test(o);
    if (*sim) return cmd_simulate(o);
    if (*cal) return cmd_calibrate(o);
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::invalid_input:
        std::cerr << "input error: " << e.what() << '\n';
        return kInput;
      case ErrorKind::numerical:
        std::cerr << "numerical failure";
        if (!e.stage().empty()) std::cerr << " in stage " << e.stage();
        std::cerr << ": " << e.what() << '\n';
        return kNumerical;
      case ErrorKind::simulation_instability:
        std::cerr << "simulation unstable: " << e.what() << '\n';
        return kInstability;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kOk;
}
