// lnamc: LNA-based model checking of chemical reaction networks.
//
//   lnamc check    MODEL PROPS            verdicts (exit 0 all true, 1 some false, 2 error)
//   lnamc trace    MODEL --t-max T        mean / sd / probability time series
//   lnamc compare  MODEL PROPS --oracle {ssa,unif}
//   lnamc simulate MODEL --t-max T        SSA trajectories

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lnamc/lnamc.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace lnamc;

namespace {

struct CommonOptions {
  double rel_tol = 1e-6;
  double abs_tol = 1e-9;
  double max_step = 0.0;
  double density = 1000.0;
  std::string format;
  std::string out_dir;
  bool timings = false;
};

struct OracleOptions {
  std::size_t trials = 100000;
  std::uint64_t seed = 1;
  double epsilon = 1e-7;
  std::string bounds;
  double max_boundary_mass = 1e-3;
};

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Model load_model(const std::string& path) {
  try {
    return parse_model(read_file(path));
  } catch (const ParseError& e) {
    throw Error(path + ":" + e.what());
  }
}

PropertySet load_properties(const std::string& path, const Crn& crn) {
  try {
    auto set = parse_property(read_file(path), crn);
    for (const auto& w : set.warnings)
      std::cerr << path << ":" << w.where.line << ":" << w.where.column << ": warning: " << w.message << "\n";
    return set;
  } catch (const ParseError& e) {
    throw Error(path + ":" + e.what());
  }
}

IntegratorConfig integrator(const CommonOptions& o) {
  IntegratorConfig cfg;
  cfg.rel_tol = o.rel_tol;
  cfg.abs_tol = o.abs_tol;
  cfg.max_step = o.max_step;
  return cfg;
}

json manifest(const std::string& command, const std::string& model, const std::string& props, const CommonOptions& o,
              const json& oracle, const json& timings) {
  json m;
  m["tool"] = "lnamc";
  m["version"] = kVersion;
  m["command"] = command;
  m["model"] = model;
  m["properties"] = props.empty() ? json(nullptr) : json(props);
  m["integrator"] = {{"method", "dormand-prince-5(4)"},
                     {"rel_tol", o.rel_tol},
                     {"abs_tol", o.abs_tol},
                     {"max_step", o.max_step},
                     {"density", o.density}};
  m["oracle"] = oracle;
  if (o.timings) m["timings"] = timings;
  return m;
}

// Writes `content` to DIR/name through a temporary file and rename, or to
// stdout when no directory is given.
void emit(const CommonOptions& o, const std::string& name, const std::string& content) {
  if (o.out_dir.empty()) {
    std::cout << content;
    return;
  }
  fs::create_directories(o.out_dir);
  const fs::path target = fs::path(o.out_dir) / name;
  const fs::path tmp = fs::path(o.out_dir) / (name + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.flush()) throw Error("cannot write '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

std::string human(double x) { return format_real(x, 4); }

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

void print_verdict(std::ostream& os, const Verdict& v, int depth) {
  std::string truth = v.truth ? (*v.truth ? "true" : "false") : "-";
  os << std::string(2 * static_cast<std::size_t>(depth), ' ') << pad(truth, 6) << " value=" << (v.value ? human(*v.value) : "-")
     << " threshold=" << (v.threshold ? human(*v.threshold) : "-") << " margin=" << (v.margin ? human(*v.margin) : "-")
     << "  " << v.name << (v.near_threshold() ? "  [near threshold]" : "") << "\n";
  for (const auto& c : v.children) print_verdict(os, c, depth + 1);
}

void add_common(CLI::App* app, CommonOptions& o, const std::string& default_format) {
  o.format = default_format;
  app->add_option("--rel-tol", o.rel_tol, "Integrator relative tolerance")->capture_default_str();
  app->add_option("--abs-tol", o.abs_tol, "Integrator absolute tolerance")->capture_default_str();
  app->add_option("--max-step", o.max_step, "Largest integrator step (0: none)")->capture_default_str();
  app->add_option("--density", o.density, "Minimum grid intervals over the horizon (0: off)")->capture_default_str();
  app->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  app->add_option("--out", o.out_dir, "Write outputs into this directory");
  app->add_flag("--timings", o.timings, "Embed wall-clock timings in the manifest");
}

void add_oracle(CLI::App* app, OracleOptions& o) {
  app->add_option("--trials", o.trials, "SSA trials")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--seed", o.seed, "SSA seed")->capture_default_str();
  app->add_option("--epsilon", o.epsilon, "Uniformisation truncation error")->capture_default_str();
  app->add_option("--bounds", o.bounds, "Per-species count bounds for uniformisation, e.g. 100,50,50");
  app->add_option("--max-boundary-mass", o.max_boundary_mass, "Largest tolerated truncation loss")->capture_default_str();
}

json oracle_json(const std::string& kind, const OracleOptions& o) {
  json j;
  j["kind"] = kind;
  if (kind == "ssa") {
    j["trials"] = o.trials;
    j["seed"] = o.seed;
    j["rng"] = kRngName;
  } else if (kind == "unif") {
    j["epsilon"] = o.epsilon;
    j["bounds"] = o.bounds.empty() ? json("lna+12sd") : json(o.bounds);
  }
  return j;
}

Counts parse_bounds(const std::string& text, std::size_t n) {
  Counts out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    const long long v = std::stoll(item, &used);
    if (v < 0) throw Error("bounds must be non-negative");
    out.push_back(v);
  }
  if (out.size() != n) throw Error("--bounds needs one value per species");
  return out;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  if (n < 2 || a == b) return {a};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  out.back() = b;
  return out;
}

// A standalone combination, optionally with "in I", checked against the model.
TraceColumn parse_column(const std::string& expr, const Crn& crn) {
  const bool has_target = expr.find(" in ") != std::string::npos;
  const std::string text = has_target ? "P=? [ " + expr + " ] over [0,0]" : "supE=? [ " + expr + " ] over [0,0]";
  const auto set = parse_property(text, crn);
  TraceColumn col;
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ProbNode>) {
          col.b = n.target.b;
          col.intervals = n.target.intervals;
        } else if constexpr (std::is_same_v<T, StatNode>) {
          col.b = n.b;
        }
      },
      set.formulas.at(0).formula->node());
  for (char c : format_combination(col.b, species_names(crn)))
    if (c != ' ') col.label += c == ',' ? ';' : c;
  return col;
}

// ---------------------------------------------------------------------------

int run_check(const std::string& model_path, const std::string& prop_path, const CommonOptions& o) {
  Stopwatch sw;
  const auto model = load_model(model_path);
  const auto props = load_properties(prop_path, model.crn);
  const double t_parse = sw.lap();
  if (props.formulas.empty()) throw Error(prop_path + ": no properties");
  const auto sol = solve_for(model.crn, model.setup, props.formulas, integrator(o), o.density);
  const double t_solve = sw.lap();

  const auto names = species_names(model.crn);
  std::vector<Verdict> verdicts;
  bool all_true = true;
  for (const auto& nf : props.formulas) {
    verdicts.push_back(check(*nf.formula, sol, names, nf.name));
    if (verdicts.back().truth && !*verdicts.back().truth) all_true = false;
  }
  const double t_check = sw.lap();

  std::ostream& table = o.out_dir.empty() ? std::cerr : std::cout;
  for (const auto& v : verdicts) print_verdict(table, v, 0);
  table << "grid points: " << sol.size() << ", max |C[Z]|: " << human(sol.max_cov_norm()) << "\n";

  json timings = {{"parse", t_parse}, {"solve", t_solve}, {"check", t_check}};
  json doc;
  doc["manifest"] = manifest("check", model_path, prop_path, o, nullptr, timings);
  doc["grid_points"] = sol.size();
  doc["max_cov_norm"] = sol.max_cov_norm();
  doc["verdicts"] = json::array();
  for (const auto& v : verdicts) doc["verdicts"].push_back(to_json(v));

  if (o.format == "csv") {
    std::ostringstream csv;
    csv << "name,truth,value,threshold,margin\n";
    for (const auto& v : verdicts)
      csv << v.name << ',' << (v.truth ? (*v.truth ? "true" : "false") : "") << ','
          << (v.value ? format_real(*v.value) : "") << ',' << (v.threshold ? format_real(*v.threshold) : "") << ','
          << (v.margin ? format_real(*v.margin) : "") << '\n';
    emit(o, "verdicts.csv", csv.str());
    if (!o.out_dir.empty()) emit(o, "manifest.json", doc["manifest"].dump(2) + "\n");
  } else {
    emit(o, "verdicts.json", doc.dump(2) + "\n");
  }
  return all_true ? 0 : 1;
}

int run_trace(const std::string& model_path, double t_max, const std::vector<std::string>& combos,
              const CommonOptions& o) {
  Stopwatch sw;
  const auto model = load_model(model_path);
  std::vector<TraceColumn> cols;
  if (combos.empty()) cols = species_columns(model.crn);
  for (const auto& c : combos) {
    try {
      cols.push_back(parse_column(c, model.crn));
    } catch (const ParseError& e) {
      throw Error("--combo '" + c + "': " + e.what());
    }
  }
  auto cfg = integrator(o);
  if (o.density > 0.0) cfg.max_step = cfg.max_step > 0.0 ? std::min(cfg.max_step, t_max / o.density) : t_max / o.density;
  const auto sol = solve_lna(model.crn, model.setup, t_max, cfg);
  const double t_solve = sw.lap();

  if (o.format == "json") {
    json doc;
    doc["manifest"] = manifest("trace", model_path, "", o, nullptr, {{"solve", t_solve}});
    doc["columns"] = json::array();
    for (const auto& c : cols) doc["columns"].push_back({{"label", c.label}, {"b", c.b}, {"probability", c.intervals.has_value()}});
    doc["rows"] = json::array();
    for (std::size_t k = 0; k < sol.size(); ++k) {
      json row = json::array({sol.grid()[k]});
      for (const auto& c : cols) {
        const auto s = combo_stats(sol, c.b, k);
        row.push_back(s.mean);
        row.push_back(std::sqrt(s.variance));
        if (c.intervals) row.push_back(omega(s, *c.intervals));
      }
      doc["rows"].push_back(std::move(row));
    }
    emit(o, "trace.json", doc.dump(2) + "\n");
  } else {
    std::ostringstream csv;
    write_trace_csv(csv, sol, cols);
    emit(o, "trace.csv", csv.str());
    if (!o.out_dir.empty())
      emit(o, "manifest.json", manifest("trace", model_path, "", o, nullptr, {{"solve", t_solve}}).dump(2) + "\n");
  }
  return 0;
}

int run_compare(const std::string& model_path, const std::string& prop_path, const std::string& oracle,
                const std::string& property, std::size_t points, double max_err, const CommonOptions& o,
                const OracleOptions& oo) {
  Stopwatch sw;
  const auto model = load_model(model_path);
  const auto props = load_properties(prop_path, model.crn);
  const NamedFormula* chosen = nullptr;
  for (const auto& nf : props.formulas)
    if (property.empty() || nf.name == property) {
      chosen = &nf;
      break;
    }
  if (!chosen) throw Error("property '" + property + "' not found");
  if (std::holds_alternative<JunctionNode>(chosen->formula->node()))
    throw Error("compare needs a single P or supE/infE/supV/infV operator");

  // Evaluate the operator's quantity pointwise at times spread over its window.
  TimeWindow window;
  std::visit([&](const auto& n) {
    if constexpr (!std::is_same_v<std::decay_t<decltype(n)>, JunctionNode>) window = n.window;
  }, chosen->formula->node());
  const auto times = linspace(window.begin, window.end, points);
  const auto* prob = std::get_if<ProbNode>(&chosen->formula->node());
  const auto* stat = std::get_if<StatNode>(&chosen->formula->node());
  const Combination& b = prob ? prob->target.b : stat->b;
  const bool use_mean = stat && (stat->kind == StatKind::kSupE || stat->kind == StatKind::kInfE);

  auto cfg = integrator(o);
  const double horizon = std::max(window.end, 1e-12);
  if (o.density > 0.0) cfg.max_step = cfg.max_step > 0.0 ? std::min(cfg.max_step, horizon / o.density) : horizon / o.density;
  const auto sol = solve_lna(model.crn, model.setup, horizon, cfg, times);
  std::vector<double> lna_values;
  for (double t : times) {
    const auto k = static_cast<std::size_t>(sol.index_of(t));
    const auto s = combo_stats(sol, b, k);
    lna_values.push_back(prob ? omega(s, prob->target.intervals) : use_mean ? s.mean : s.variance);
  }
  const double t_lna = sw.lap();

  std::vector<double> oracle_values;
  std::vector<double> half_widths;
  if (oracle == "ssa") {
    SsaConfig sc;
    sc.trials = oo.trials;
    sc.seed = oo.seed;
    sc.t_max = times.back();
    sc.record_times = times;
    const auto trajs = ssa_simulate(model.crn, model.setup, sc);
    if (prob) {
      for (double t : times) {
        const auto e = ssa_estimate_prob(trajs, prob->target, {t, t});
        oracle_values.push_back(e.point);
        half_widths.push_back(e.half_width_95);
      }
    } else {
      const auto m = ssa_moments(trajs, b);
      oracle_values = use_mean ? m.mean : m.variance;
    }
  } else {
    Counts bounds;
    if (oo.bounds.empty()) bounds = lna_bounds(sol);
    else bounds = parse_bounds(oo.bounds, model.crn.num_species());
    const TruncatedStateSpace space(model.crn, model.setup, bounds);
    const auto results = uniformisation_transient(space, times, oo.epsilon, oo.max_boundary_mass);
    for (const auto& r : results) {
      if (prob) oracle_values.push_back(transient_probability(space, r, prob->target));
      else {
        const auto m = transient_moments(space, r, b);
        oracle_values.push_back(use_mean ? m.mean : m.variance);
      }
    }
  }
  const double t_oracle = sw.lap();

  double max_e = 0.0, sum_e = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double e = std::abs(lna_values[i] - oracle_values[i]);
    max_e = std::max(max_e, e);
    sum_e += e;
  }
  const double avg_e = sum_e / static_cast<double>(times.size());

  std::ostream& table = o.out_dir.empty() ? std::cerr : std::cout;
  table << pad("Time (LNA)", 14) << pad("Time (" + oracle + ")", 14) << pad("MaxErr", 12) << "AvgErr\n"
        << pad(human(t_lna) + " s", 14) << pad(human(t_oracle) + " s", 14) << pad(human(max_e), 12) << human(avg_e)
        << "\n";

  json timings = {{"lna", t_lna}, {"oracle", t_oracle}};
  json doc;
  doc["manifest"] = manifest("compare", model_path, prop_path, o, oracle_json(oracle, oo), timings);
  doc["property"] = chosen->name;
  doc["max_err"] = max_e;
  doc["avg_err"] = avg_e;
  doc["bound"] = max_err;
  doc["within_bound"] = max_e <= max_err;
  doc["points"] = json::array();
  for (std::size_t i = 0; i < times.size(); ++i) {
    json p = {{"time", times[i]}, {"lna", lna_values[i]}, {"oracle", oracle_values[i]}};
    if (!half_widths.empty())
      p["estimate"] = {{"point", oracle_values[i]}, {"half_width_95", half_widths[i]}, {"trials", oo.trials}, {"seed", oo.seed}};
    doc["points"].push_back(std::move(p));
  }
  if (o.format == "csv") {
    std::ostringstream csv;
    csv << "time,lna,oracle,abs_err\n";
    for (std::size_t i = 0; i < times.size(); ++i)
      csv << format_real(times[i]) << ',' << format_real(lna_values[i]) << ',' << format_real(oracle_values[i]) << ','
          << format_real(std::abs(lna_values[i] - oracle_values[i])) << '\n';
    emit(o, "compare.csv", csv.str());
    if (!o.out_dir.empty()) emit(o, "manifest.json", doc["manifest"].dump(2) + "\n");
  } else {
    emit(o, "compare.json", doc.dump(2) + "\n");
  }
  return max_e <= max_err ? 0 : 1;
}

int run_simulate(const std::string& model_path, double t_max, std::size_t points, const std::string& estimate_path,
                 const CommonOptions& o, const OracleOptions& oo) {
  Stopwatch sw;
  const auto model = load_model(model_path);
  SsaConfig sc;
  sc.trials = oo.trials;
  sc.seed = oo.seed;
  sc.t_max = t_max;
  sc.record_times = linspace(0.0, t_max, points);
  const json oracle = oracle_json("ssa", oo);

  if (!estimate_path.empty()) {
    const auto props = load_properties(estimate_path, model.crn);
    std::vector<double> extra = sc.record_times;
    for (const auto& nf : props.formulas) nf.formula->collect_times(extra);
    std::sort(extra.begin(), extra.end());
    extra.erase(std::unique(extra.begin(), extra.end()), extra.end());
    sc.t_max = std::max(t_max, extra.back());
    sc.record_times = extra;
    const auto trajs = ssa_simulate(model.crn, model.setup, sc);
    json doc;
    doc["manifest"] = manifest("simulate", model_path, estimate_path, o, oracle, {{"simulate", sw.lap()}});
    doc["estimates"] = json::array();
    for (const auto& nf : props.formulas) {
      const auto* prob = std::get_if<ProbNode>(&nf.formula->node());
      if (!prob) throw Error("--estimate supports P operators only ('" + nf.name + "')");
      const auto e = ssa_estimate_prob(trajs, prob->target, prob->window);
      doc["estimates"].push_back(
          {{"name", nf.name}, {"point", e.point}, {"half_width_95", e.half_width_95}, {"trials", e.trials}, {"seed", oo.seed}});
    }
    emit(o, "estimates.json", doc.dump(2) + "\n");
    return 0;
  }

  const auto trajs = ssa_simulate(model.crn, model.setup, sc);
  const double t_sim = sw.lap();
  if (o.format == "json") {
    json doc;
    doc["manifest"] = manifest("simulate", model_path, "", o, oracle, {{"simulate", t_sim}});
    doc["species"] = species_names(model.crn);
    doc["times"] = trajs.record_times;
    doc["trials"] = json::array();
    for (const auto& tr : trajs.trials) {
      json rows = json::array();
      for (std::size_t k = 0; k < trajs.record_times.size(); ++k) {
        const auto* x = tr.at(k, trajs.num_species);
        rows.push_back(std::vector<std::int64_t>(x, x + trajs.num_species));
      }
      doc["trials"].push_back(std::move(rows));
    }
    emit(o, "trajectories.json", doc.dump(2) + "\n");
  } else {
    std::ostringstream csv;
    write_trajectories_csv(csv, model.crn, trajs);
    emit(o, "trajectories.csv", csv.str());
    if (!o.out_dir.empty())
      emit(o, "manifest.json", manifest("simulate", model_path, "", o, oracle, {{"simulate", t_sim}}).dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LNA-based model checking of chemical reaction networks"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonOptions check_opts, trace_opts, compare_opts, sim_opts;
  OracleOptions compare_oracle, sim_oracle;
  sim_oracle.trials = 10;
  std::string model_path, prop_path, oracle = "ssa", property, estimate_path;
  double t_max = 1.0, max_err = 0.08;
  std::size_t points = 101;
  std::vector<std::string> combos;

  auto* check_cmd = app.add_subcommand("check", "Check SEL properties against a model");
  check_cmd->add_option("model", model_path, "Model file")->required();
  check_cmd->add_option("properties", prop_path, "Property file")->required();
  add_common(check_cmd, check_opts, "json");

  auto* trace_cmd = app.add_subcommand("trace", "Emit LNA mean / standard deviation series");
  trace_cmd->add_option("model", model_path, "Model file")->required();
  trace_cmd->add_option("--t-max", t_max, "Horizon")->required()->check(CLI::PositiveNumber);
  trace_cmd->add_option("--combo", combos, "Linear combination, optionally 'EXPR in I' (repeatable)");
  add_common(trace_cmd, trace_opts, "csv");

  auto* compare_cmd = app.add_subcommand("compare", "Compare LNA answers with an exact or statistical oracle");
  compare_cmd->add_option("model", model_path, "Model file")->required();
  compare_cmd->add_option("properties", prop_path, "Property file")->required();
  compare_cmd->add_option("--oracle", oracle, "Oracle")->check(CLI::IsMember({"ssa", "unif"}))->capture_default_str();
  compare_cmd->add_option("--property", property, "Property name (default: the first)");
  compare_cmd->add_option("--points", points, "Evaluation times across the window")->capture_default_str();
  compare_cmd->add_option("--max-err", max_err, "Bound on MaxErr (exit 1 when exceeded)")->capture_default_str();
  add_common(compare_cmd, compare_opts, "json");
  add_oracle(compare_cmd, compare_oracle);

  auto* sim_cmd = app.add_subcommand("simulate", "Gillespie simulation");
  sim_cmd->add_option("model", model_path, "Model file")->required();
  sim_cmd->add_option("--t-max", t_max, "Horizon")->required()->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--points", points, "Record times across [0, t-max]")->capture_default_str();
  sim_cmd->add_option("--estimate", estimate_path, "Estimate the P operators of this property file");
  add_common(sim_cmd, sim_opts, "csv");
  add_oracle(sim_cmd, sim_oracle);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*check_cmd) return run_check(model_path, prop_path, check_opts);
    if (*trace_cmd) return run_trace(model_path, t_max, combos, trace_opts);
    if (*compare_cmd) return run_compare(model_path, prop_path, oracle, property, points, max_err, compare_opts, compare_oracle);
    if (*sim_cmd) return run_simulate(model_path, t_max, points, estimate_path, sim_opts, sim_oracle);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
