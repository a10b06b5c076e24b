#include "commands.hpp"

#include <tailkde/tailkde.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>

namespace tailkde::cli {
namespace {

// ---------------------------------------------------------------------------
// Shared plumbing

struct Context
{
  std::ostream& out;
  std::ostream& err;
  std::string output;
  std::size_t threads = 0;
};

void
emit(const Context& ctx, const std::string& text)
{
  if (ctx.output.empty() || ctx.output == "-") {
    ctx.out << text;
    return;
  }
  std::ofstream f(ctx.output);
  if (!f)
    throw DataError(detail::concat("cannot write '", ctx.output, "'"));
  f << text;
}

void
write_file(const std::string& path, const std::string& text)
{
  std::ofstream f(path);
  if (!f)
    throw DataError(detail::concat("cannot write '", path, "'"));
  f << text;
}

Json
document(const std::string& command, Json config)
{
  return Json{{"schema_version", kSchemaVersion}, {"command", command}, {"config", std::move(config)}};
}

//! Reads an echoed configuration: either a previous output document (its
//! `config` member) or a bare configuration object.
Json
load_config(const std::string& path, const std::string& command)
{
  std::ifstream in(path);
  if (!in)
    throw DataError(detail::concat("cannot open '", path, "'"));
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(detail::concat("'", path, "' is not valid JSON: ", e.what()));
  }
  if (j.contains("command") && j.at("command") != command)
    throw ConfigError(detail::concat("'", path, "' holds a '", j.at("command").get<std::string>(),
                                     "' configuration, not '", command, "'"));
  return j.contains("config") ? j.at("config") : j;
}

template<typename T>
T
get_or(const Json& j, const char* key, T fallback)
{
  try {
    return j.contains(key) && !j.at(key).is_null() ? j.at(key).get<T>() : fallback;
  } catch (const Json::exception& e) {
    throw ConfigError(detail::concat("configuration field '", key, "': ", e.what()));
  }
}

Selector
parse_selector(const std::string& s)
{
  if (s == "ns" || s == "NS")
    return Selector::NS;
  if (s == "pi" || s == "PI")
    return Selector::PI;
  if (s == "ucv" || s == "UCV")
    return Selector::UCV;
  if (s == "scv" || s == "SCV")
    return Selector::SCV;
  throw ConfigError(detail::concat("unknown selector '", s, "'"));
}

// ---------------------------------------------------------------------------
// Data and threshold options

struct DataArgs
{
  std::string input;
  std::vector<std::string> cols;
  std::optional<double> threshold_quantile;
  std::vector<double> threshold;
  std::size_t grid = 0;
  double outside_mass = 1e-5;

  void add(CLI::App* app)
  {
    app->add_option("--input,-i", input, "CSV file, one observation per row");
    app->add_option("--cols", cols, "columns to use (1-based indices or header names)")->delimiter(',');
    auto* q = app->add_option("--threshold-quantile", threshold_quantile, "threshold at this per-margin sample quantile");
    auto* t = app->add_option("--threshold", threshold, "absolute threshold, one value per margin")->delimiter(',');
    q->excludes(t);
    app->add_option("--grid", grid, "grid points per axis (0 = default for the dimension)");
    app->add_option("--outside-mass", outside_mass, "bound on tail mass outside the grid box");
  }

  //! Checks the input and fills in the default threshold rule.
  void resolve(const char* input_flag = "--input")
  {
    if (input.empty())
      throw ConfigError(detail::concat(input_flag, " is required"));
    if (threshold_quantile && !threshold.empty())
      throw ConfigError("give --threshold-quantile or --threshold, not both");
    if (!threshold_quantile && threshold.empty())
      threshold_quantile = 0.95;
  }

  Json to_json() const
  {
    return Json{{"input", input},
                {"cols", cols},
                {"threshold_quantile", threshold_quantile ? Json(*threshold_quantile) : Json(nullptr)},
                {"threshold", threshold},
                {"grid", grid},
                {"outside_mass", outside_mass}};
  }

  void from_json(const Json& j)
  {
    input = get_or<std::string>(j, "input", input);
    cols = get_or<std::vector<std::string>>(j, "cols", {});
    threshold_quantile =
      j.contains("threshold_quantile") && !j.at("threshold_quantile").is_null()
        ? std::optional<double>(get_or<double>(j, "threshold_quantile", 0.95))
        : std::nullopt;
    threshold = get_or<std::vector<double>>(j, "threshold", {});
    grid = get_or<std::size_t>(j, "grid", 0);
    outside_mass = get_or<double>(j, "outside_mass", 1e-5);
  }

  DataMatrix load() const { return to_data_matrix(read_csv_file(input), cols); }

  std::vector<double> threshold_for(const DataMatrix& x) const
  {
    if (threshold_quantile) {
      if (!(*threshold_quantile > 0.0 && *threshold_quantile < 1.0))
        throw ConfigError("threshold quantile must lie in (0,1)");
      return quantile_threshold(x, *threshold_quantile);
    }
    if (threshold.size() != x.d())
      throw ConfigError(detail::concat("--threshold has ", threshold.size(), " values, data has ", x.d(), " columns"));
    return threshold;
  }

  FitOptions fit_options() const
  {
    FitOptions o;
    o.points = grid;
    o.outside_mass = outside_mass;
    return o;
  }
};

Json
tail_json(const TailDensityModel& t)
{
  return Json{{"estimator", t.id()},
              {"threshold", t.region().u},
              {"upper", t.upper()},
              {"normaliser", t.normaliser()},
              {"grid", to_json(t.grid())}};
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs
{
  DataArgs data;
  std::string estimator = "kpi";

  Json to_json() const
  {
    auto j = data.to_json();
    j["estimator"] = estimator;
    return j;
  }
  void from_json(const Json& j)
  {
    data.from_json(j);
    estimator = get_or<std::string>(j, "estimator", estimator);
  }
};

int
run_fit(const FitArgs& a, const Context& ctx)
{
  const auto x = a.data.load();
  const auto fit = fit_tail(x, a.data.threshold_for(x), a.estimator, a.data.fit_options());
  auto doc = document("fit", a.to_json());
  doc["report"] = to_json(fit.report);
  doc["tail"] = tail_json(fit.tail);
  emit(ctx, dump_json(doc));
  for (const auto& w : fit.report.warnings)
    ctx.err << "warning: " << w << "\n";
  return fit.report.converged ? kSuccess : kConvergence;
}

// ---------------------------------------------------------------------------
// tail

struct TailArgs
{
  FitArgs fit;
  std::vector<std::string> at;
  std::vector<double> probs;
  std::vector<double> reuse_threshold;

  Json to_json() const
  {
    auto j = fit.to_json();
    j["at"] = at;
    j["probs"] = probs;
    j["reuse_threshold"] = reuse_threshold;
    return j;
  }
  void from_json(const Json& j)
  {
    fit.from_json(j);
    at = get_or<std::vector<std::string>>(j, "at", {});
    probs = get_or<std::vector<double>>(j, "probs", {});
    reuse_threshold = get_or<std::vector<double>>(j, "reuse_threshold", {});
  }
};

std::vector<double>
parse_point(const std::string& s, std::size_t d)
{
  std::vector<double> p;
  for (auto c : detail::split_commas(s)) {
    double v = 0.0;
    if (!detail::parse_number(c, v) || !std::isfinite(v))
      throw ConfigError(detail::concat("bad coordinate in point '", s, "'"));
    p.push_back(v);
  }
  if (p.size() != d)
    throw ConfigError(detail::concat("point '", s, "' has ", p.size(), " coordinates, data has ", d));
  return p;
}

int
run_tail(const TailArgs& a, const Context& ctx)
{
  const auto x = a.fit.data.load();
  const auto fit = fit_tail(x, a.fit.data.threshold_for(x), a.fit.estimator, a.fit.data.fit_options());
  TailOptions topt;
  topt.points = a.fit.data.grid;
  topt.outside_mass = a.fit.data.outside_mass;
  if (!a.reuse_threshold.empty() && a.reuse_threshold.size() != x.d())
    throw ConfigError("--reuse-threshold needs one value per margin");
  const auto tail = a.reuse_threshold.empty() ? fit.tail : fit.at(a.reuse_threshold, topt);
  auto doc = document("tail", a.to_json());
  doc["report"] = to_json(fit.report);
  doc["tail"] = {{"estimator", tail.id()},
                 {"threshold", tail.region().u},
                 {"upper", tail.upper()},
                 {"normaliser", tail.normaliser()}};
  Json pts = Json::array();
  for (const auto& s : a.at) {
    const auto p = parse_point(s, x.d());
    pts.push_back({{"x", p}, {"density", tail(p)}});
  }
  doc["points"] = pts;
  Json qs = Json::array();
  if (!a.probs.empty() && x.d() != 1)
    throw ConfigError("tail quantiles are only defined for one column");
  for (double p : a.probs)
    qs.push_back({{"p", p}, {"quantile", tail_quantile(tail, p)}});
  doc["quantiles"] = qs;
  emit(ctx, dump_json(doc));
  return fit.report.converged ? kSuccess : kConvergence;
}

// ---------------------------------------------------------------------------
// select

struct SelectArgs
{
  DataArgs data;
  std::vector<std::string> candidates;
  std::string reference = "kpi";
  std::string index = "l2";
  bool deviance_guard = true;

  Json to_json() const
  {
    auto j = data.to_json();
    j["candidates"] = candidates;
    j["reference"] = reference;
    j["index"] = index;
    j["deviance_guard"] = deviance_guard;
    return j;
  }
  void from_json(const Json& j)
  {
    data.from_json(j);
    candidates = get_or<std::vector<std::string>>(j, "candidates", {});
    reference = get_or<std::string>(j, "reference", reference);
    index = get_or<std::string>(j, "index", index);
    deviance_guard = get_or<bool>(j, "deviance_guard", deviance_guard);
  }
};

int
run_select(SelectArgs a, const Context& ctx)
{
  const auto x = a.data.load();
  if (a.candidates.empty())
    a.candidates = x.d() == 1 ? std::vector<std::string>{"fre", "gum", "gpd"} : std::vector<std::string>{"bil", "anl", "hr"};
  const auto loss = parse_loss(a.index);
  for (const auto& c : a.candidates) {
    const auto k = parse_estimator(c).kind;
    if (k != EstimatorKind::univariate && k != EstimatorKind::bivariate)
      throw ConfigError(detail::concat("candidate '", c, "' is not a parametric family"));
  }
  const auto u = a.data.threshold_for(x);
  const auto fo = a.data.fit_options();
  const auto ref = fit_tail(x, u, a.reference, fo);
  bool converged = ref.report.converged;

  std::vector<std::string> names = a.candidates;
  Json excluded = Json::array();
  if (x.d() == 1 && a.deviance_guard && std::find(names.begin(), names.end(), "fre") != names.end()) {
    const auto dev = deviance_gumbel_vs_frechet(x);
    if (!dev.use_frechet) {
      names.erase(std::find(names.begin(), names.end(), "fre"));
      excluded.push_back({{"candidate", "fre"},
                          {"reason", "deviance test does not reject the Gumbel"},
                          {"statistic", dev.statistic},
                          {"pvalue", dev.pvalue}});
    }
  }

  std::vector<TailCandidate> cands;
  Json reports = Json::object();
  Json failed = Json::array();
  for (const auto& c : names) {
    try {
      auto f = fit_tail(x, u, c, fo);
      converged = converged && f.report.converged;
      reports[c] = to_json(f.report);
      cands.push_back(make_candidate(f.tail, c));
    } catch (const Error& e) {
      failed.push_back({{"candidate", c}, {"error", e.what()}});
    }
  }
  const auto sel = select_model(cands, ref.tail, loss);
  std::vector<const TailIndexReport*> ranked;
  for (const auto& o : sel.outcomes) {
    if (o.report)
      ranked.push_back(&*o.report);
    else
      failed.push_back({{"candidate", o.id}, {"error", o.error}});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](auto p, auto q) { return p->value < q->value; });
  Json ranking = Json::array();
  for (const auto* r : ranked)
    ranking.push_back({{"candidate", r->candidate}, {"index_kind", r->kind}, {"value", r->value}});

  auto doc = document("select", a.to_json());
  doc["ranking"] = ranking;
  doc["winner"] = sel.winner_id;
  doc["tie_broken"] = sel.tie_broken;
  doc["failed"] = failed;
  doc["excluded"] = excluded;
  const auto& g = ref.tail.grid();
  std::vector<double> lo, hi;
  for (const auto& ax : g.axes) {
    lo.push_back(ax.front());
    hi.push_back(ax.back());
  }
  doc["grid"] = {{"lower", lo}, {"upper", hi}, {"shape", g.shape()}};
  doc["reference"] = to_json(ref.report);
  doc["candidates"] = reports;
  emit(ctx, dump_json(doc));
  return converged ? kSuccess : kConvergence;
}

// ---------------------------------------------------------------------------
// compare

struct CompareArgs
{
  DataArgs data;
  std::vector<std::string> models;
  std::string estimator = "kpi";
  std::vector<std::string> index{"l2"};

  Json to_json() const
  {
    auto j = data.to_json();
    j["models"] = models;
    j["estimator"] = estimator;
    j["index"] = index;
    return j;
  }
  void from_json(const Json& j)
  {
    data.from_json(j);
    models = get_or<std::vector<std::string>>(j, "models", {});
    estimator = get_or<std::string>(j, "estimator", estimator);
    index = get_or<std::vector<std::string>>(j, "index", {"l2"});
  }
};

int
run_compare(const CompareArgs& a, const Context& ctx)
{
  if (a.models.empty())
    throw ConfigError("compare needs at least one --models file");
  if (a.index.empty())
    throw ConfigError("compare needs at least one --index");
  std::vector<Loss> losses;
  for (const auto& s : a.index)
    losses.push_back(parse_loss(s));
  parse_estimator(a.estimator);
  const auto obs = a.data.load();
  DataVsDataOptions base;
  base.estimator = a.estimator;
  base.fit = a.data.fit_options();
  if (a.data.threshold_quantile) {
    base.quantile = *a.data.threshold_quantile;
  } else {
    base.quantile.reset();
    base.threshold = a.data.threshold_for(obs);
  }
  const auto u = observed_threshold(obs, base);

  Json rows = Json::array();
  std::vector<std::pair<std::string, std::vector<double>>> ok;
  for (const auto& path : a.models) {
    Json row{{"model", path}};
    try {
      const auto mod = to_data_matrix(read_csv_file(path), a.data.cols);
      Json values = Json::object();
      std::vector<double> v;
      for (auto loss : losses) {
        auto o = base;
        o.loss = loss;
        const auto r = data_vs_data_index(obs, mod, o);
        values[r.report.kind] = r.report.value;
        v.push_back(r.report.value);
      }
      row["status"] = "ok";
      row["values"] = values;
      ok.emplace_back(path, v);
    } catch (const Error& e) {
      row["status"] = "failed";
      row["error"] = e.what();
      ctx.err << "warning: " << path << ": " << e.what() << "\n";
    }
    rows.push_back(row);
  }
  Json winners = Json::object();
  for (std::size_t k = 0; k < losses.size() && !ok.empty(); ++k) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < ok.size(); ++m)
      if (ok[m].second[k] < ok[best].second[k])
        best = m;
    winners[index_kind(a.estimator, losses[k])] = ok[best].first;
  }
  auto doc = document("compare", a.to_json());
  doc["threshold"] = u;
  doc["rows"] = rows;
  doc["winners"] = winners;
  emit(ctx, dump_json(doc));
  return ok.empty() ? kDataError : kSuccess;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs
{
  std::string target = "gum";
  std::size_t n = 2000;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  std::string convention = "evd";
  std::string meta;

  Json to_json() const
  {
    return Json{{"target", target}, {"n", n}, {"seed", seed}, {"stream", stream}, {"convention", convention}};
  }
  void from_json(const Json& j)
  {
    target = get_or<std::string>(j, "target", target);
    n = get_or<std::size_t>(j, "n", n);
    seed = get_or<std::uint64_t>(j, "seed", seed);
    stream = get_or<std::uint64_t>(j, "stream", stream);
    convention = get_or<std::string>(j, "convention", convention);
  }
};

int
run_simulate(const SimulateArgs& a, const Context& ctx)
{
  if (a.n < 1)
    throw ConfigError("n must be at least 1");
  const bool uni = a.target == "fre" || a.target == "gum" || a.target == "gpd";
  const auto t = study_target(a.target, uni ? StudyKind::univariate : StudyKind::bivariate, parse_convention(a.convention));
  RngStream rng(a.seed, a.stream);
  const auto x = sample(t, a.n, rng);
  std::ostringstream os;
  write_csv(os, x);
  emit(ctx, os.str());
  if (!a.meta.empty())
    write_file(a.meta, dump_json(document("simulate", a.to_json())));
  return kSuccess;
}

// ---------------------------------------------------------------------------
// study

struct StudyArgs
{
  std::string experiment = "univariate";
  std::optional<std::size_t> n, replicates, grid;
  std::optional<std::uint64_t> seed;
  std::optional<double> quantile, max_failure_rate;
  std::vector<std::string> targets, estimators, references, candidates;
  std::optional<std::string> index, convention;
  std::optional<bool> deviance_guard;
  std::string text;
  std::string plot_dir;
  bool grids = false;

  StudyConfig resolve() const
  {
    const auto kind = parse_study_kind(experiment);
    auto c = kind == StudyKind::univariate ? univariate_study_config() : bivariate_study_config();
    if (n)
      c.n = *n;
    if (replicates)
      c.replicates = *replicates;
    if (seed)
      c.seed = *seed;
    if (quantile) {
      c.quantile = *quantile;
      std::erase_if(c.qq_levels, [&](double p) { return p < c.quantile; });
    }
    if (max_failure_rate)
      c.max_failure_rate = *max_failure_rate;
    if (grid)
      c.fit.points = *grid;
    if (!targets.empty())
      c.targets = targets;
    if (!estimators.empty())
      c.estimators = estimators;
    if (!references.empty())
      c.references = references;
    if (!candidates.empty())
      c.candidates = candidates;
    if (index)
      c.loss = parse_loss(*index);
    if (convention)
      c.convention = parse_convention(*convention);
    if (deviance_guard)
      c.deviance_guard = *deviance_guard;
    return c;
  }
};

std::string
file_token(std::string s)
{
  std::string out;
  for (char c : s)
    out += c == '*' ? std::string("_std") : c == '+' ? std::string("_plus") : std::string(1, c);
  return out;
}

void
write_plot_data(const StudyReport& r, const std::string& dir)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw DataError(detail::concat("cannot create '", dir, "': ", ec.message()));
  const auto path = [&](const std::string& name) { return (std::filesystem::path(dir) / name).string(); };
  if (!r.qq.empty()) {
    std::ostringstream os;
    os << "target,estimator,level,target_quantile,estimate\n";
    for (const auto& q : r.qq)
      os << q.target << "," << q.estimator << "," << format_g17(q.level) << "," << format_g17(q.target_quantile) << ","
         << format_g17(q.estimate) << "\n";
    write_file(path("qq.csv"), os.str());
  }
  if (!r.levels.empty()) {
    std::ostringstream os;
    os << "target,estimator,prob,level\n";
    for (const auto& l : r.levels)
      for (std::size_t k = 0; k < l.probs.size(); ++k)
        os << l.target << "," << l.estimator << "," << format_g17(l.probs[k]) << "," << format_g17(l.levels[k]) << "\n";
    write_file(path("level_sets.csv"), os.str());
  }
  for (const auto& g : r.grids) {
    std::ostringstream os;
    for (std::size_t j = 0; j < g.grid.d(); ++j)
      os << "x" << j + 1 << ",";
    os << "density\n";
    for (std::size_t k = 0; k < g.grid.size(); ++k) {
      for (double v : g.grid.point(k))
        os << format_g17(v) << ",";
      os << format_g17(g.grid.values[k]) << "\n";
    }
    write_file(path("density_" + g.target + "_" + file_token(g.estimator) + ".csv"), os.str());
  }
  {
    std::ostringstream os;
    os << "target,estimator,replicate,l2\n";
    for (const auto& e : r.errors)
      for (std::size_t k = 0; k < e.l2.size(); ++k)
        os << e.target << "," << e.estimator << "," << k << "," << format_g17(e.l2[k]) << "\n";
    write_file(path("l2_errors.csv"), os.str());
  }
}

int
run_study_command(const StudyConfig& cfg, const StudyArgs& a, const Context& ctx)
{
  const auto report = run_study(cfg);
  Json config{{"study", to_json(cfg)}, {"text", a.text}, {"plot_dir", a.plot_dir}, {"grids", a.grids}};
  auto doc = document("study", config);
  doc["report"] = to_json(report, a.grids);
  emit(ctx, dump_json(doc));
  const auto tables = format_study_tables(report);
  if (!a.text.empty())
    write_file(a.text, tables);
  if (!a.plot_dir.empty())
    write_plot_data(report, a.plot_dir);
  return report.passed() ? kSuccess : kConvergence;
}

// ---------------------------------------------------------------------------
// verify-theory

struct VerifyArgs
{
  TheoryOptions opt;
  std::string selector = "pi";
  bool no_rate = false;

  Json to_json() const
  {
    return Json{{"n", opt.n},
                {"replicates", opt.replicates},
                {"h", opt.h},
                {"x", opt.x},
                {"seed", opt.seed},
                {"rate", !no_rate},
                {"rate_n", opt.rate_n},
                {"rate_replicates", opt.rate_replicates},
                {"rate_selector", selector}};
  }
  void from_json(const Json& j)
  {
    opt.n = get_or<std::size_t>(j, "n", opt.n);
    opt.replicates = get_or<std::size_t>(j, "replicates", opt.replicates);
    opt.h = get_or<double>(j, "h", opt.h);
    opt.x = get_or<double>(j, "x", opt.x);
    opt.seed = get_or<std::uint64_t>(j, "seed", opt.seed);
    no_rate = !get_or<bool>(j, "rate", true);
    opt.rate_n = get_or<std::vector<std::size_t>>(j, "rate_n", opt.rate_n);
    opt.rate_replicates = get_or<std::size_t>(j, "rate_replicates", opt.rate_replicates);
    selector = get_or<std::string>(j, "rate_selector", selector);
  }
};

int
run_verify(VerifyArgs a, const Context& ctx)
{
  a.opt.rate = !a.no_rate;
  a.opt.rate_selector = parse_selector(a.selector);
  const auto checks = verify_theory(a.opt);
  auto doc = document("verify-theory", a.to_json());
  Json arr = Json::array();
  bool all = true;
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name},
                   {"prediction", c.prediction},
                   {"estimate", c.estimate},
                   {"se", c.se},
                   {"criterion", c.criterion},
                   {"pass", c.pass}});
    all = all && c.pass;
  }
  doc["checks"] = arr;
  doc["all_passed"] = all;
  emit(ctx, dump_json(doc));
  return all ? kSuccess : kConvergence;
}

} // namespace

int
run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Transformation kernel estimation of tail densities"};
  app.name("tailkde");
  app.require_subcommand(1, 1);
  app.fallthrough();
  Context ctx{out, err};
  std::string config_path;
  app.add_option("--threads", ctx.threads, "worker threads (0 = available cores; results do not depend on it)");

  auto common = [&](CLI::App* sub, bool with_output = true) {
    if (with_output)
      sub->add_option("--output,-o", ctx.output, "output path (default: standard output)");
    sub->add_option("--config", config_path, "rerun from an echoed configuration (replaces the other options)");
  };

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "fit an estimator and write its report and tail density grid");
  fit.data.add(c_fit);
  c_fit->add_option("--estimator,-e", fit.estimator, "estimator token");
  common(c_fit);

  TailArgs tail;
  auto* c_tail = app.add_subcommand("tail", "evaluate a fitted tail density at points and quantile levels");
  tail.fit.data.add(c_tail);
  c_tail->add_option("--estimator,-e", tail.fit.estimator, "estimator token");
  c_tail->add_option("--at", tail.at, "evaluation point, comma-separated coordinates (repeatable)");
  c_tail->add_option("--probs", tail.probs, "tail quantile levels (one column only)")->delimiter(',');
  c_tail->add_option("--reuse-threshold", tail.reuse_threshold, "evaluate the same fit above this threshold")
    ->delimiter(',');
  common(c_tail);

  SelectArgs sel;
  auto* c_sel = app.add_subcommand("select", "rank parametric candidates by their tail index");
  sel.data.add(c_sel);
  c_sel->add_option("--candidates", sel.candidates, "parametric candidate tokens")->delimiter(',');
  c_sel->add_option("--reference", sel.reference, "nonparametric reference estimator token");
  c_sel->add_option("--index", sel.index, "l1 or l2");
  c_sel->add_option("--deviance-guard", sel.deviance_guard, "drop the Frechet unless it beats the Gumbel");
  common(c_sel);

  CompareArgs cmp;
  auto* c_cmp = app.add_subcommand("compare", "score model data sets against observed data");
  cmp.data.add(c_cmp);
  c_cmp->get_option("--input")->description("observed CSV");
  c_cmp->add_option("--observed", cmp.data.input, "observed CSV");
  c_cmp->add_option("--models", cmp.models, "model CSV files")->expected(1, -1);
  c_cmp->add_option("--estimator,-e", cmp.estimator, "estimator token fitted to every data set");
  c_cmp->add_option("--index", cmp.index, "l1 and/or l2")->delimiter(',');
  common(c_cmp);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "draw a sample from a study target as CSV");
  c_sim->add_option("--target", sim.target, "fre, gum, gpd, bil, anl or hr");
  c_sim->add_option("--n", sim.n, "sample size");
  c_sim->add_option("--seed", sim.seed, "random seed");
  c_sim->add_option("--stream", sim.stream, "random stream");
  c_sim->add_option("--convention", sim.convention, "dependence parameter convention: evd or literal");
  c_sim->add_option("--meta", sim.meta, "also write the resolved configuration as JSON here");
  common(c_sim);

  StudyArgs st;
  auto* c_st = app.add_subcommand("study", "run a simulation study");
  c_st->add_option("--experiment", st.experiment, "univariate (fig1, fig2, table1) or bivariate (fig3, fig4, table2, table3)");
  c_st->add_option("--n", st.n, "sample size");
  c_st->add_option("--replicates", st.replicates, "replicates per target");
  c_st->add_option("--seed", st.seed, "random seed");
  c_st->add_option("--quantile", st.quantile, "threshold quantile");
  c_st->add_option("--targets", st.targets, "target ids")->delimiter(',');
  c_st->add_option("--estimators", st.estimators, "estimators scored against the truth")->delimiter(',');
  c_st->add_option("--references", st.references, "nonparametric references for the tail index")->delimiter(',');
  c_st->add_option("--candidates", st.candidates, "parametric candidates")->delimiter(',');
  c_st->add_option("--index", st.index, "l1 or l2");
  c_st->add_option("--grid", st.grid, "grid points per axis");
  c_st->add_option("--convention", st.convention, "evd or literal");
  c_st->add_option("--deviance-guard", st.deviance_guard, "drop the Frechet unless it beats the Gumbel");
  c_st->add_option("--max-failure-rate", st.max_failure_rate, "largest tolerated share of failed replicates");
  c_st->add_option("--text", st.text, "write aligned-text tables here");
  c_st->add_option("--plot-dir", st.plot_dir, "write plot data CSV files here");
  c_st->add_flag("--grids", st.grids, "include replicate 0 density grids in the JSON");
  common(c_st);

  VerifyArgs ver;
  auto* c_ver = app.add_subcommand("verify-theory", "check the pointwise bias, variance and rates numerically");
  c_ver->add_option("--n", ver.opt.n, "sample size for the pointwise checks");
  c_ver->add_option("--replicates", ver.opt.replicates, "Monte Carlo replicates");
  c_ver->add_option("--bandwidth", ver.opt.h, "bandwidth on the log scale");
  c_ver->add_option("--x", ver.opt.x, "evaluation point");
  c_ver->add_option("--seed", ver.opt.seed, "random seed");
  c_ver->add_flag("--no-rate", ver.no_rate, "skip the ISE rate regressions");
  c_ver->add_option("--rate-n", ver.opt.rate_n, "sample sizes for the rate regressions")->delimiter(',');
  c_ver->add_option("--rate-replicates", ver.opt.rate_replicates, "replicates per sample size");
  c_ver->add_option("--rate-selector", ver.selector, "ns, pi, ucv or scv");
  common(c_ver);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kConfigError;
  }

  try {
    set_thread_count(ctx.threads == 0 ? default_thread_count() : ctx.threads);
    auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    const bool from_file = !config_path.empty();
    Json cfg = from_file ? load_config(config_path, name) : Json();
    if (name == "fit") {
      if (from_file)
        fit.from_json(cfg);
      fit.data.resolve();
      return run_fit(fit, ctx);
    }
    if (name == "tail") {
      if (from_file)
        tail.from_json(cfg);
      tail.fit.data.resolve();
      return run_tail(tail, ctx);
    }
    if (name == "select") {
      if (from_file)
        sel.from_json(cfg);
      sel.data.resolve();
      return run_select(sel, ctx);
    }
    if (name == "compare") {
      if (from_file)
        cmp.from_json(cfg);
      cmp.data.resolve("--observed");
      return run_compare(cmp, ctx);
    }
    if (name == "simulate") {
      if (from_file)
        sim.from_json(cfg);
      return run_simulate(sim, ctx);
    }
    if (name == "study") {
      if (from_file) {
        st.text = get_or<std::string>(cfg, "text", st.text);
        st.plot_dir = get_or<std::string>(cfg, "plot_dir", st.plot_dir);
        st.grids = get_or<bool>(cfg, "grids", st.grids);
        return run_study_command(study_config_from_json(cfg.contains("study") ? cfg.at("study") : cfg), st, ctx);
      }
      return run_study_command(st.resolve(), st, ctx);
    }
    if (from_file)
      ver.from_json(cfg);
    return run_verify(ver, ctx);
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConvergence;
  }
}

} // namespace tailkde::cli
