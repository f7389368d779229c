// manyineq: command-line front end.
//
// Exit status: 0 success, 1 internal error, 2 input error, 3 statistical
// precondition violation, 64 usage error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "manyineq/bootstrap.hpp"
#include "manyineq/dependent.hpp"
#include "manyineq/inference.hpp"
#include "manyineq/io.hpp"
#include "manyineq/simulate.hpp"
#include "manyineq/threestep.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace manyineq;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitPrecondition = 3;
constexpr int kExitUsage = 64;

json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return round12(v);
}

json indices(const IndexSet& set) {
  json out = json::array();
  for (std::size_t j : set) out.push_back(j + 1);
  return out;
}

json diagnostics_json(const std::optional<RegularityDiagnostics>& d) {
  if (!d) return nullptr;
  return json{{"m3", number(d->m3)}, {"m4", number(d->m4)}, {"bn", number(d->bn)}};
}

json decision_json(const TestDecision& d) {
  json out;
  out["statistic"] = number(d.statistic);
  out["critical_value"] = number(d.critical_value);
  out["reject"] = d.reject;
  out["method"] = std::string(method_name(d.method.method));
  out["alpha"] = number(d.method.alpha);
  out["beta"] = number(d.method.beta);
  out["reps"] = d.method.replications;
  out["seed"] = d.method.seed;
  out["selected"] = indices(d.selected);
  out["degenerate"] = indices(d.degenerate);
  out["diagnostics"] = diagnostics_json(d.diagnostics);
  return out;
}

std::optional<RegularityDiagnostics> try_diagnostics(const SampleMatrix& x) {
  try {
    return regularity_diagnostics(x);
  } catch (const precondition_error&) {
    return std::nullopt;
  }
}

void emit(const json& j, const std::string& out_path) {
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw input_error("cannot write " + out_path);
  out << text;
}

Method method_or_throw(const std::string& name) {
  const auto m = parse_method(name);
  if (!m) throw std::invalid_argument("unknown method '" + name + "'");
  return *m;
}

Scheme scheme_or_throw(const std::string& name) {
  if (name == "mb") return Scheme::MB;
  if (name == "eb") return Scheme::EB;
  throw std::invalid_argument("unknown scheme '" + name + "' (expected mb or eb)");
}

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---------------------------------------------------------------------------

struct TestOptions {
  std::string input;
  std::string method = "sn1";
  double alpha = 0.05;
  double beta = 0.001;
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  bool header = false;
  unsigned threads = 1;
  std::string out;
};

void run_test_cmd(const TestOptions& o) {
  const CriticalValueSpec spec{method_or_throw(o.method), o.alpha, o.beta, o.reps, o.seed};
  detail::validate_spec(spec);
  const auto x = read_sample(o.input, o.header);
  auto d = run_test(x, spec, o.threads);
  d.diagnostics = try_diagnostics(x);
  emit(decision_json(d), o.out);
}

struct McOptions {
  int design = 1;
  std::size_t n = 400;
  std::size_t p = 200;
  double rho = 0.0;
  std::string dist = "t4";
  double gamma = 0.1;
  std::size_t sims = 1000;
  std::size_t reps = 1000;
  double alpha = 0.05;
  double beta = 0.001;
  std::vector<std::string> methods{"sn1", "sn2", "mb1", "mb2", "eb1", "eb2"};
  std::uint64_t seed = 0;
  unsigned threads = default_threads();
  std::string out;
};

void run_mc_cmd(const McOptions& o) {
  const auto dist = parse_dist(o.dist);
  if (!dist) throw std::invalid_argument("unknown distribution '" + o.dist + "'");
  const DesignSpec spec{o.design, o.n, o.p, o.rho, *dist, o.gamma};
  spec.validate();
  McConfig mc;
  mc.sims = o.sims;
  mc.bootstrap_reps = o.reps;
  mc.alpha = o.alpha;
  mc.beta = o.beta;
  mc.methods.clear();
  for (const auto& m : o.methods) mc.methods.push_back(method_or_throw(m));
  mc.seed = o.seed;
  mc.threads = o.threads;
  mc.validate();

  const auto res = run_mc(spec, mc);

  std::ofstream csv(o.out, std::ios::binary);
  if (!csv) throw input_error("cannot write " + o.out);
  write_mc_csv(csv, res);

  json side;
  side["design"] = spec.design;
  side["structure"] = std::string(structure_name(spec.structure()));
  side["n"] = spec.n;
  side["p"] = spec.p;
  side["rho"] = number(spec.rho);
  side["dist"] = std::string(dist_name(spec.dist));
  side["gamma"] = number(spec.gamma);
  side["sims"] = mc.sims;
  side["reps"] = mc.bootstrap_reps;
  side["alpha"] = number(mc.alpha);
  side["beta"] = number(mc.beta);
  side["seed"] = mc.seed;
  json methods = json::array();
  for (Method m : mc.methods) methods.push_back(std::string(method_name(m)));
  side["methods"] = methods;
  json rows = json::array();
  for (const auto& r : mc_rows(res))
    rows.push_back({{"method", r.method},
                    {"rejection_rate", number(r.rejection_rate)},
                    {"se", number(r.se)},
                    {"sims", r.sims},
                    {"rejections", r.rejections}});
  side["results"] = rows;
  emit(side, fs::path(o.out).replace_extension(".json").string());
  std::cerr << "mc: " << mc.sims << " replications in " << format_number(res.wall_seconds) << " s\n";
}

struct InvertOptions {
  std::string grid;
  std::string method = "sn1";
  double alpha = 0.05;
  double beta = 0.001;
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  bool header = false;
  unsigned threads = 1;
  std::string out;
};

std::vector<GridPoint> read_grid(const std::string& dir, bool header) {
  const auto grid_path = (fs::path(dir) / "grid.csv").string();
  const auto lines = detail::split_lines(detail::read_file(grid_path));
  std::vector<GridPoint> grid;
  std::set<std::string> seen;
  bool first = true;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::blank(lines[ln])) continue;
    const auto fields = detail::split_fields(lines[ln]);
    const bool is_header = first && fields[0] == "label";
    first = false;
    if (is_header) continue;
    const std::string where = grid_path + ": line " + std::to_string(ln + 1);
    const std::string label(fields[0]);
    if (label.empty() || label.find_first_of("/\\") != std::string::npos)
      throw input_error(where + ": invalid label '" + label + "'");
    if (!seen.insert(label).second) throw input_error(where + ": duplicate label '" + label + "'");
    std::vector<double> theta;
    for (std::size_t c = 1; c < fields.size(); ++c)
      theta.push_back(detail::parse_double(fields[c], where + ", column " + std::to_string(c + 1)));
    const auto point_path = (fs::path(dir) / ("point_" + label + ".csv")).string();
    grid.push_back({label, std::move(theta), read_sample(point_path, header)});
  }
  return grid;
}

void run_invert_cmd(const InvertOptions& o) {
  const CriticalValueSpec spec{method_or_throw(o.method), o.alpha, o.beta, o.reps, o.seed};
  detail::validate_spec(spec);
  const auto region = invert_region(read_grid(o.grid, o.header), spec, o.threads);
  json out;
  out["method"] = std::string(method_name(spec.method));
  out["alpha"] = number(spec.alpha);
  out["beta"] = number(spec.beta);
  out["reps"] = spec.replications;
  out["seed"] = spec.seed;
  out["accepted"] = region.accepted;
  json points = json::array();
  for (const auto& p : region.points) {
    json q;
    q["label"] = p.label;
    json theta = json::array();
    for (double t : p.theta) theta.push_back(number(t));
    q["theta"] = theta;
    q["accepted"] = p.accepted;
    q["statistic"] = p.decision ? number(p.decision->statistic) : json(nullptr);
    q["critical_value"] = p.decision ? number(p.decision->critical_value) : json(nullptr);
    q["error"] = p.error ? json(*p.error) : json(nullptr);
    points.push_back(q);
  }
  out["points"] = points;
  emit(out, o.out);
}

struct ThreeStepOptions {
  std::string g;
  std::string v;
  std::size_t r = 1;
  double alpha = 0.05;
  double beta = 0.001;
  std::optional<double> phi;
  std::string scheme = "mb";
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  bool header = false;
  unsigned threads = 1;
  std::string out;
};

void run_threestep_cmd(const ThreeStepOptions& o) {
  ThreeStepConfig cfg;
  cfg.alpha = o.alpha;
  cfg.beta = o.beta;
  cfg.phi = o.phi;
  cfg.scheme = scheme_or_throw(o.scheme);
  cfg.replications = o.reps;
  cfg.stream = scheme_stream(SeededStream(o.seed), cfg.scheme);
  cfg.threads = o.threads;
  if (o.r == 0) throw std::invalid_argument("r must be positive");
  ParametricMomentData data(read_csv_matrix(o.g, o.header), read_csv_matrix(o.v, o.header), o.r);
  const auto res = three_step_test(data, cfg);
  json out = decision_json(res.decision);
  out["phi"] = number(res.phi);
  out["j_b"] = indices(res.sets.j_b);
  out["j_prime"] = indices(res.sets.j_prime);
  out["j_double_prime"] = indices(res.sets.j_double_prime);
  out["c_beta"] = number(res.sets.c_beta);
  out["c_grad_plus"] = number(res.sets.c_grad_plus);
  out["c_grad_minus"] = number(res.sets.c_grad_minus);
  emit(out, o.out);
}

struct BmbOptions {
  std::string input;
  std::optional<std::size_t> q;
  std::optional<std::size_t> r;
  double alpha = 0.05;
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  bool header = false;
  unsigned threads = 1;
  std::string out;
};

void run_bmb_cmd(const BmbOptions& o) {
  if (!(o.alpha > 0.0 && o.alpha < 0.5)) throw std::invalid_argument("alpha must lie in (0, 0.5)");
  if (o.reps == 0) throw std::invalid_argument("reps must be positive");
  const auto x = read_sample(o.input, o.header);
  const auto def = default_block_plan(x.n());
  const auto plan = make_blocks(x.n(), o.q.value_or(def.q), o.r.value_or(def.r));
  const auto d = bmb_test(x, plan, o.alpha, o.reps, SeededStream(o.seed), o.threads);
  json out;
  out["statistic"] = number(d.statistic);
  out["critical_value"] = number(d.critical_value);
  out["reject"] = d.reject;
  out["method"] = "bmb";
  out["alpha"] = number(o.alpha);
  out["reps"] = o.reps;
  out["seed"] = o.seed;
  out["q"] = plan.q;
  out["r"] = plan.r;
  out["m"] = plan.m;
  emit(out, o.out);
}

struct DiagnoseOptions {
  std::string input;
  bool header = false;
  std::string out;
};

void run_diagnose_cmd(const DiagnoseOptions& o) {
  const auto x = read_sample(o.input, o.header);
  const auto s = summarize(x);
  json out;
  out["n"] = x.n();
  out["p"] = x.p();
  out["degenerate"] = indices(s.degenerate_columns());
  const auto d = regularity_diagnostics(x);
  out["m3"] = number(d.m3);
  out["m4"] = number(d.m4);
  out["bn"] = number(d.bn);
  emit(out, o.out);
}

template <class T>
void common_test_flags(CLI::App* cmd, T& o) {
  cmd->add_option("--alpha", o.alpha, "Nominal level")->capture_default_str();
  cmd->add_option("--reps", o.reps, "Bootstrap replications")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tests of many moment inequalities"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "manyineq 1.0.0");

  TestOptions test_o;
  auto* test = app.add_subcommand("test", "Test H0: E[X_j] <= 0 for all j on an n x p CSV sample");
  test->add_option("input,--input", test_o.input, "CSV file")->required();
  test->add_option("--method", test_o.method, "sn1|sn2|mb1|mb2|eb1|eb2|hyb-mb|hyb-eb")->capture_default_str();
  test->add_option("--beta", test_o.beta, "Selection level")->capture_default_str();
  test->add_flag("--header", test_o.header, "First CSV row is a header");
  test->add_option("--out", test_o.out, "Write JSON here instead of standard output");
  common_test_flags(test, test_o);
  test->callback([&] { run_test_cmd(test_o); });

  McOptions mc_o;
  auto* mc = app.add_subcommand("mc", "Monte Carlo rejection rates for designs 1-8");
  mc->add_option("--design", mc_o.design, "Design 1..8")->capture_default_str();
  mc->add_option("--n", mc_o.n, "Sample size")->capture_default_str();
  mc->add_option("--p", mc_o.p, "Number of inequalities")->capture_default_str();
  mc->add_option("--rho", mc_o.rho, "Correlation parameter")->capture_default_str();
  mc->add_option("--dist", mc_o.dist, "t4|uniform|gaussian")->capture_default_str();
  mc->add_option("--gamma", mc_o.gamma, "Fraction of nonslack inequalities")->capture_default_str();
  mc->add_option("--sims", mc_o.sims, "Monte Carlo replications")->capture_default_str();
  mc->add_option("--reps", mc_o.reps, "Bootstrap replications")->capture_default_str();
  mc->add_option("--alpha", mc_o.alpha, "Nominal level")->capture_default_str();
  mc->add_option("--beta", mc_o.beta, "Selection level")->capture_default_str();
  mc->add_option("--methods", mc_o.methods, "Comma-separated methods")->delimiter(',')->capture_default_str();
  mc->add_option("--seed", mc_o.seed, "Random seed")->capture_default_str();
  mc->add_option("--threads", mc_o.threads, "Worker threads")->check(CLI::PositiveNumber);
  mc->add_option("--out", mc_o.out, "CSV output; the JSON sidecar goes next to it")->required();
  mc->callback([&] { run_mc_cmd(mc_o); });

  InvertOptions inv_o;
  auto* inv = app.add_subcommand("invert", "Confidence region by test inversion over a grid directory");
  inv->add_option("--grid", inv_o.grid, "Directory with grid.csv and point_<label>.csv")->required();
  inv->add_option("--method", inv_o.method, "Test method")->capture_default_str();
  inv->add_option("--beta", inv_o.beta, "Selection level")->capture_default_str();
  inv->add_flag("--header", inv_o.header, "Point files have a header row");
  inv->add_option("--out", inv_o.out, "Write JSON here instead of standard output");
  common_test_flags(inv, inv_o);
  inv->callback([&] { run_invert_cmd(inv_o); });

  ThreeStepOptions ts_o;
  auto* ts = app.add_subcommand("threestep", "Three-step test for moment inequalities with a gradient array");
  ts->add_option("--g", ts_o.g, "n x p CSV of moment functions")->required();
  ts->add_option("--v", ts_o.v, "n x (p*r) CSV of gradients, column j*r+l")->required();
  ts->add_option("--r", ts_o.r, "Parameter dimension")->required();
  ts->add_option("--beta", ts_o.beta, "Selection level")->capture_default_str();
  ts->add_option("--phi", ts_o.phi, "Gradient margin, default min(beta/2, 1/log n)");
  ts->add_option("--scheme", ts_o.scheme, "mb|eb")->capture_default_str();
  ts->add_flag("--header", ts_o.header, "CSV files have a header row");
  ts->add_option("--out", ts_o.out, "Write JSON here instead of standard output");
  common_test_flags(ts, ts_o);
  ts->callback([&] { run_threestep_cmd(ts_o); });

  BmbOptions bmb_o;
  auto* bmb = app.add_subcommand("bmb", "Block multiplier bootstrap test for dependent data");
  bmb->add_option("input,--input", bmb_o.input, "CSV file, rows in time order")->required();
  bmb->add_option("--q", bmb_o.q, "Large block length, default floor(n^(1/3))");
  bmb->add_option("--r", bmb_o.r, "Small block length, default max(1, floor(n^(1/6)))");
  bmb->add_flag("--header", bmb_o.header, "First CSV row is a header");
  bmb->add_option("--out", bmb_o.out, "Write JSON here instead of standard output");
  common_test_flags(bmb, bmb_o);
  bmb->callback([&] { run_bmb_cmd(bmb_o); });

  DiagnoseOptions diag_o;
  auto* diag = app.add_subcommand("diagnose", "Regularity diagnostics M3, M4 and B_n");
  diag->add_option("input,--input", diag_o.input, "CSV file")->required();
  diag->add_flag("--header", diag_o.header, "First CSV row is a header");
  diag->add_option("--out", diag_o.out, "Write JSON here instead of standard output");
  diag->callback([&] { run_diagnose_cmd(diag_o); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const input_error& e) {
    std::cerr << "manyineq: input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const precondition_error& e) {
    std::cerr << "manyineq: precondition violated: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const std::invalid_argument& e) {
    std::cerr << "manyineq: usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "manyineq: usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "manyineq: input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "manyineq: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return 0;
}
