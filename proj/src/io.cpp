#include "vcplm/io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "vcplm/errors.hpp"

namespace vcplm {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// Column role and 0-based index within its block.
struct ColumnRole {
  char block;  // y, e(ta), v, w, x, u, s (xi)
  Index index;
};

std::optional<ColumnRole> classify(const std::string& name) {
  if (name == "Y") return ColumnRole{'y', 0};
  if (name == "V") return ColumnRole{'v', 0};
  if (name == "U") return ColumnRole{'u', 0};
  static const std::pair<const char*, char> prefixes[] = {
      {"eta_", 'e'}, {"W_", 'w'}, {"X_", 'x'}, {"xi_", 's'}};
  for (const auto& [prefix, block] : prefixes) {
    const std::string_view p(prefix);
    if (name.size() > p.size() && name.compare(0, p.size(), p) == 0) {
      int k = 0;
      const char* begin = name.data() + p.size();
      const char* end = name.data() + name.size();
      const auto [ptr, ec] = std::from_chars(begin, end, k);
      if (ec != std::errc() || ptr != end || k < 1) return std::nullopt;
      return ColumnRole{block, k - 1};
    }
  }
  return std::nullopt;
}

const char* block_name(char block) {
  switch (block) {
    case 'e':
      return "eta";
    case 'w':
      return "W";
    case 'x':
      return "X";
    case 's':
      return "xi";
    default:
      return "?";
  }
}

}  // namespace

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line).empty())
    throw ValidationError("CSV input is empty; a header row is required");
  const auto header = split_row(line);

  std::vector<ColumnRole> roles;
  std::map<char, std::vector<int>> blocks;  // block -> column positions by index
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto role = classify(header[c]);
    if (!role)
      throw ValidationError("header column " + std::to_string(c + 1) + " ('" + header[c] +
                            "') is not a recognised name");
    auto& slots = blocks[role->block];
    if (static_cast<Index>(slots.size()) <= role->index)
      slots.resize(static_cast<std::size_t>(role->index + 1), -1);
    if (slots[static_cast<std::size_t>(role->index)] >= 0)
      throw ValidationError("header column '" + header[c] + "' appears twice");
    slots[static_cast<std::size_t>(role->index)] = static_cast<int>(c);
    roles.push_back(*role);
  }
  for (const char* required : {"Y", "V", "U"}) {
    if (!blocks.count(required[0] == 'Y' ? 'y' : required[0] == 'V' ? 'v' : 'u'))
      throw ValidationError(std::string("required column '") + required + "' is missing");
  }
  for (char block : {'e', 'w', 'x', 's'}) {
    auto it = blocks.find(block);
    if (it == blocks.end()) {
      if (block == 'e' || block == 'x')
        throw ValidationError(std::string("required column '") + block_name(block) +
                              "_1' is missing");
      continue;
    }
    for (std::size_t k = 0; k < it->second.size(); ++k)
      if (it->second[k] < 0)
        throw ValidationError(std::string("column '") + block_name(block) + "_" +
                              std::to_string(k + 1) + "' is missing");
  }
  const Index p1 = static_cast<Index>(blocks['e'].size());
  const Index p2 = blocks.count('w') ? static_cast<Index>(blocks['w'].size()) : 0;
  const Index q = static_cast<Index>(blocks['x'].size());
  const bool has_xi = blocks.count('s') > 0;
  if (has_xi && static_cast<Index>(blocks['s'].size()) != p1)
    throw ValidationError("xi columns must match the eta columns one to one");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_row(line);
    if (fields.size() != header.size())
      throw ValidationError("row " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, found " +
                            std::to_string(fields.size()));
    std::vector<double> values(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string& f = fields[c];
      double x = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(x))
        throw ValidationError("row " + std::to_string(line_no) + ", column " +
                              std::to_string(c + 1) + " ('" + header[c] +
                              "'): cannot parse '" + f + "' as a finite number");
      values[c] = x;
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ValidationError("CSV input has a header but no data rows");

  const Index n = static_cast<Index>(rows.size());
  Dataset d;
  d.y.resize(n);
  d.v.resize(n);
  d.u.resize(n);
  d.eta.resize(n, p1);
  d.w.resize(n, p2);
  d.x.resize(n, q);
  Matrix xi(n, has_xi ? p1 : 0);
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    d.y(i) = r[static_cast<std::size_t>(blocks['y'][0])];
    d.v(i) = r[static_cast<std::size_t>(blocks['v'][0])];
    d.u(i) = r[static_cast<std::size_t>(blocks['u'][0])];
    for (Index k = 0; k < p1; ++k) d.eta(i, k) = r[static_cast<std::size_t>(blocks['e'][k])];
    for (Index k = 0; k < p2; ++k) d.w(i, k) = r[static_cast<std::size_t>(blocks['w'][k])];
    for (Index k = 0; k < q; ++k) d.x(i, k) = r[static_cast<std::size_t>(blocks['x'][k])];
    if (has_xi)
      for (Index k = 0; k < p1; ++k) xi(i, k) = r[static_cast<std::size_t>(blocks['s'][k])];
  }
  if (has_xi) d.xi = std::move(xi);
  d.validate();
  return d;
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file '" + path + "'");
  return read_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const Dataset& d) {
  out << "Y";
  for (Index k = 0; k < d.p1(); ++k) out << ",eta_" << k + 1;
  out << ",V";
  for (Index k = 0; k < d.p2(); ++k) out << ",W_" << k + 1;
  for (Index k = 0; k < d.q(); ++k) out << ",X_" << k + 1;
  out << ",U";
  if (d.xi)
    for (Index k = 0; k < d.p1(); ++k) out << ",xi_" << k + 1;
  out << '\n' << std::setprecision(17);
  for (Index i = 0; i < d.n(); ++i) {
    out << d.y(i);
    for (Index k = 0; k < d.p1(); ++k) out << ',' << d.eta(i, k);
    out << ',' << d.v(i);
    for (Index k = 0; k < d.p2(); ++k) out << ',' << d.w(i, k);
    for (Index k = 0; k < d.q(); ++k) out << ',' << d.x(i, k);
    out << ',' << d.u(i);
    if (d.xi)
      for (Index k = 0; k < d.p1(); ++k) out << ',' << (*d.xi)(i, k);
    out << '\n';
  }
}

namespace {

Json to_array(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json column_arrays(const Matrix& m) {
  Json a = Json::array();
  for (Index j = 0; j < m.cols(); ++j) a.push_back(to_array(m.col(j)));
  return a;
}

Json optional_number(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

}  // namespace

Json fit_to_json(const ProfileFit& fit) {
  Json j;
  j["theta_hat"] = to_array(fit.theta);
  j["se_theta"] = to_array(fit.se_theta);
  j["sigma2_hat"] = fit.sigma2;
  j["alpha_grid"] = {{"u", to_array(fit.alpha_u)},
                     {"alpha", column_arrays(fit.alpha)},
                     {"dalpha", column_arrays(fit.dalpha)}};
  j["trace_S"] = fit.trace_s;
  j["mode"] = std::string(to_string(fit.mode));
  j["bandwidths"] = {{"h", fit.h}, {"b", optional_number(fit.b)}};
  Json cov = Json::array();
  for (Index r = 0; r < fit.cov_theta.rows(); ++r) cov.push_back(to_array(fit.cov_theta.row(r)));
  j["cov_theta"] = std::move(cov);
  j["n"] = fit.n();
  return j;
}

Json test_to_json(const TestResult& r) {
  Json j;
  j["test"] = r.test;
  j["statistic"] = r.statistic;
  j["scaled_statistic"] = r.scaled_statistic;
  j["rho_n"] = r.rho_n;
  j["df"] = r.df;
  j["p_asymptotic"] = optional_number(r.p_asymptotic);
  j["p_bootstrap"] = optional_number(r.p_bootstrap);
  j["B"] = r.bootstrap ? Json(r.bootstrap->replicates) : Json(nullptr);
  j["seed"] = r.bootstrap ? Json(r.bootstrap->seed) : Json(nullptr);
  j["critical_value"] = r.bootstrap ? Json(r.bootstrap->critical_value) : Json(nullptr);
  j["omega_hat"] = to_array(r.omega);
  j["rss0"] = r.rss0;
  j["rss1"] = r.rss1;
  if (r.bootstrap) j["bootstrap_failures"] = r.bootstrap->failures;
  return j;
}

namespace {

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::i:
      return "i";
    case Scenario::ii:
      return "ii";
    case Scenario::iii:
      return "iii";
    case Scenario::iv:
      return "iv";
    case Scenario::custom:
      return "custom";
  }
  return "custom";
}

const char* sweep_name(SweepKind k) {
  switch (k) {
    case SweepKind::none:
      return "none";
    case SweepKind::c:
      return "c";
    case SweepKind::rho:
      return "rho";
    case SweepKind::snr:
      return "snr";
  }
  return "none";
}

template <class E, std::size_t N>
E lookup(const std::string& key, const std::string& value,
         const std::pair<const char*, E> (&table)[N]) {
  for (const auto& [name, e] : table)
    if (value == name) return e;
  throw ValidationError("unknown value '" + value + "' for '" + key + "'");
}

}  // namespace

Json scenario_to_json(const ScenarioSpec& s) {
  Json j;
  j["name"] = s.name;
  j["scenario"] = scenario_name(s.scenario);
  j["n"] = s.n;
  j["replicates"] = s.replicates;
  j["beta"] = to_array(s.beta);
  j["alpha1"] = s.alpha1 == Alpha1Kind::base ? "base" : "homotopy";
  j["rho"] = s.rho;
  j["sweep"] = sweep_name(s.sweep);
  j["sweep_values"] = s.sweep_values;
  j["sigma_eps2"] = s.sigma_eps2;
  j["sigma_e2"] = s.sigma_e2;
  j["v_upper"] = s.v_upper;
  j["u_upper"] = s.u_upper;
  j["seed"] = s.seed;
  j["cv_points"] = s.cv_points;
  j["h"] = optional_number(s.h);
  if (!s.notes.empty()) j["notes"] = s.notes;
  return j;
}

ScenarioSpec scenario_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("scenario config must be a JSON object");
  try {
    ScenarioSpec s = j.contains("preset") ? scenario_preset(j.at("preset").get<std::string>())
                                          : ScenarioSpec{};
    static const std::pair<const char*, Scenario> scenarios[] = {
        {"i", Scenario::i},     {"ii", Scenario::ii},         {"iii", Scenario::iii},
        {"iv", Scenario::iv},   {"custom", Scenario::custom}};
    static const std::pair<const char*, Alpha1Kind> alphas[] = {{"base", Alpha1Kind::base},
                                                                {"homotopy", Alpha1Kind::homotopy}};
    static const std::pair<const char*, SweepKind> sweeps[] = {{"none", SweepKind::none},
                                                               {"c", SweepKind::c},
                                                               {"rho", SweepKind::rho},
                                                               {"snr", SweepKind::snr}};
    for (const auto& [key, value] : j.items()) {
      if (key == "preset") continue;
      if (key == "name") s.name = value.get<std::string>();
      else if (key == "scenario") s.scenario = lookup(key, value.get<std::string>(), scenarios);
      else if (key == "n") s.n = value.get<Index>();
      else if (key == "replicates") s.replicates = value.get<Index>();
      else if (key == "beta") {
        const auto b = value.get<std::vector<double>>();
        s.beta = Eigen::Map<const Vector>(b.data(), static_cast<Index>(b.size()));
      } else if (key == "alpha1") s.alpha1 = lookup(key, value.get<std::string>(), alphas);
      else if (key == "rho") s.rho = value.get<double>();
      else if (key == "sweep") s.sweep = lookup(key, value.get<std::string>(), sweeps);
      else if (key == "sweep_values") s.sweep_values = value.get<std::vector<double>>();
      else if (key == "sigma_eps2") s.sigma_eps2 = value.get<double>();
      else if (key == "sigma_e2") s.sigma_e2 = value.get<double>();
      else if (key == "v_upper") s.v_upper = value.get<double>();
      else if (key == "u_upper") s.u_upper = value.get<double>();
      else if (key == "seed") s.seed = value.get<std::uint64_t>();
      else if (key == "cv_points") s.cv_points = value.get<int>();
      else if (key == "h") {
        if (value.is_null()) s.h.reset();
        else s.h = value.get<double>();
      } else if (key == "notes") s.notes = value.get<std::string>();
      else throw ValidationError("unknown scenario key '" + key + "'");
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed scenario config: ") + e.what());
  }
}

void write_alpha_curve(std::ostream& out, const ProfileFit& fit) {
  out << "u";
  for (Index k = 0; k < fit.alpha.cols(); ++k) out << ",alpha_" << k + 1;
  out << '\n' << std::setprecision(12);
  for (Index g = 0; g < fit.alpha_u.size(); ++g) {
    out << fit.alpha_u(g);
    for (Index k = 0; k < fit.alpha.cols(); ++k) out << ',' << fit.alpha(g, k);
    out << '\n';
  }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

std::string_view version() noexcept { return VCPLM_VERSION; }

}  // namespace vcplm
