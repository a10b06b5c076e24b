#pragma once

#include "csv.hpp"
#include "harness.hpp"
#include "theory.hpp"

#include <json.hpp>

namespace tailkde {

using Json = nlohmann::ordered_json;

//! Version of every JSON document the CLI writes.
inline constexpr int kSchemaVersion = 1;

namespace detail {

inline void
write_json(std::ostream& os, const Json& j, int indent, int depth)
{
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(indent * depth), ' ');
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{" << nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        os << (first ? "" : ",") << (first ? "" : nl) << pad << Json(it.key()).dump() << (indent ? ": " : ":");
        write_json(os, it.value(), indent, depth + 1);
        first = false;
      }
      os << nl << close << "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
      os << "[" << (flat ? "" : nl);
      bool first = true;
      for (const auto& e : j) {
        os << (first ? "" : ",") << (first || flat ? "" : nl) << (flat ? (first ? "" : " ") : pad);
        write_json(os, e, indent, depth + 1);
        first = false;
      }
      os << (flat ? "" : nl) << (flat ? "" : close) << "]";
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      os << (std::isfinite(v) ? format_g17(v) : "null");
      return;
    }
    default:
      os << j.dump();
  }
}

} // namespace detail

//! Serialises with every floating-point number at 17 significant digits
//! (non-finite numbers become null).
inline std::string
dump_json(const Json& j, int indent = 2)
{
  std::ostringstream os;
  detail::write_json(os, j, indent, 0);
  os << "\n";
  return os.str();
}

inline Json
to_json(const BandwidthMatrix& h)
{
  Json rows = Json::array();
  for (std::size_t a = 0; a < h.d(); ++a) {
    Json r = Json::array();
    for (std::size_t b = 0; b < h.d(); ++b)
      r.push_back(h(a, b));
    rows.push_back(r);
  }
  return rows;
}

inline Json
to_json(const DensityGrid& g)
{
  return Json{{"shape", g.shape()}, {"axes", g.axes}, {"values", g.values}};
}

inline Json
to_json(const FitReport& r)
{
  Json j{{"estimator", r.estimator}, {"n", r.n},           {"n_tail", r.n_tail},
         {"threshold", r.threshold}, {"offset", r.offset}, {"normaliser", r.normaliser}};
  if (r.bandwidth) {
    j["bandwidth"] = to_json(*r.bandwidth);
    j["selector"] = *r.selector;
    j["selector_objective"] = *r.selector_objective;
    j["iterations"] = r.iterations;
  }
  if (r.binwidths)
    j["binwidths"] = *r.binwidths;
  if (!r.parameters.empty()) {
    Json p = Json::object();
    for (const auto& [k, v] : r.parameters)
      p[k] = v;
    j["parameters"] = p;
  }
  if (r.loglik)
    j["loglik"] = *r.loglik;
  j["converged"] = r.converged;
  j["warnings"] = r.warnings;
  return j;
}

inline Json
to_json(const TailIndexReport& r)
{
  return Json{{"candidate", r.candidate}, {"reference", r.reference}, {"index_kind", r.kind},
              {"loss", to_string(r.loss)}, {"value", r.value},         {"grid", {{"lower", r.lower}, {"upper", r.upper}, {"shape", r.shape}}}};
}

inline Json
to_json(const FitOptions& o)
{
  return Json{{"points", o.points},
              {"outside_mass", o.outside_mass},
              {"diagonal_only", o.selector.diagonal_only},
              {"selector_min_n", o.selector.min_n},
              {"bivariate_polish_iterations", o.bivariate.polish_iterations}};
}

inline FitOptions
fit_options_from_json(const Json& j)
{
  FitOptions o;
  o.points = j.value("points", o.points);
  o.outside_mass = j.value("outside_mass", o.outside_mass);
  o.selector.diagonal_only = j.value("diagonal_only", o.selector.diagonal_only);
  o.selector.min_n = j.value("selector_min_n", o.selector.min_n);
  o.bivariate.polish_iterations = j.value("bivariate_polish_iterations", o.bivariate.polish_iterations);
  return o;
}

inline Json
to_json(const StudyConfig& c)
{
  return Json{{"experiment", to_string(c.kind)},
              {"n", c.n},
              {"replicates", c.replicates},
              {"seed", c.seed},
              {"quantile", c.quantile},
              {"targets", c.targets},
              {"estimators", c.estimators},
              {"references", c.references},
              {"candidates", c.candidates},
              {"index", to_string(c.loss)},
              {"deviance_guard", c.deviance_guard},
              {"qq_levels", c.qq_levels},
              {"level_probs", c.level_probs},
              {"convention", c.convention == Convention::evd ? "evd" : "literal"},
              {"fit", to_json(c.fit)},
              {"max_failure_rate", c.max_failure_rate},
              {"plot_data", c.plot_data}};
}

inline StudyKind
parse_study_kind(const std::string& s)
{
  if (s == "univariate" || s == "fig1" || s == "fig2" || s == "table1")
    return StudyKind::univariate;
  if (s == "bivariate" || s == "fig3" || s == "fig4" || s == "table2" || s == "table3")
    return StudyKind::bivariate;
  throw ConfigError(detail::concat("unknown experiment '", s, "'"));
}

inline Convention
parse_convention(const std::string& s)
{
  if (s == "evd")
    return Convention::evd;
  if (s == "literal")
    return Convention::literal;
  throw ConfigError(detail::concat("unknown convention '", s, "'"));
}

inline StudyConfig
study_config_from_json(const Json& j)
{
  try {
    const auto kind = parse_study_kind(j.at("experiment").get<std::string>());
    auto c = kind == StudyKind::univariate ? univariate_study_config() : bivariate_study_config();
    c.n = j.value("n", c.n);
    c.replicates = j.value("replicates", c.replicates);
    c.seed = j.value("seed", c.seed);
    c.quantile = j.value("quantile", c.quantile);
    c.targets = j.value("targets", c.targets);
    c.estimators = j.value("estimators", c.estimators);
    c.references = j.value("references", c.references);
    c.candidates = j.value("candidates", c.candidates);
    c.loss = parse_loss(j.value("index", to_string(c.loss)));
    c.deviance_guard = j.value("deviance_guard", c.deviance_guard);
    c.qq_levels = j.value("qq_levels", c.qq_levels);
    c.level_probs = j.value("level_probs", c.level_probs);
    c.convention = parse_convention(j.value("convention", std::string("evd")));
    if (j.contains("fit"))
      c.fit = fit_options_from_json(j.at("fit"));
    c.max_failure_rate = j.value("max_failure_rate", c.max_failure_rate);
    c.plot_data = j.value("plot_data", c.plot_data);
    return c;
  } catch (const Json::exception& e) {
    throw ConfigError(detail::concat("invalid study configuration: ", e.what()));
  }
}

inline Json
to_json(const StudyReport& r, bool include_grids = false)
{
  Json j;
  j["passed"] = r.passed();
  Json targets = Json::array();
  for (const auto& t : r.targets)
    targets.push_back({{"target", t.target},
                       {"replicates", t.replicates},
                       {"failed", t.failed},
                       {"failure_rate", t.failure_rate()},
                       {"failure_messages", t.failure_messages}});
  j["targets"] = targets;
  Json sel = Json::array();
  for (const auto& s : r.selection) {
    Json p = Json::object();
    for (const auto& [k, v] : s.proportions)
      p[k] = v;
    sel.push_back({{"target", s.target},
                   {"reference", s.reference},
                   {"index_kind", s.kind},
                   {"correct", s.correct},
                   {"proportions", p},
                   {"counted", s.counted},
                   {"ties", s.ties},
                   {"frechet_dropped", s.frechet_dropped}});
  }
  j["selection"] = sel;
  Json cells = Json::array();
  for (const auto& c : r.mean_index)
    cells.push_back({{"target", c.target},
                     {"fitted", c.fitted},
                     {"reference", c.reference},
                     {"index_kind", c.kind},
                     {"mean", c.mean},
                     {"sd", c.sd},
                     {"count", c.count}});
  j["mean_index"] = cells;
  Json errs = Json::array();
  for (const auto& e : r.errors)
    errs.push_back({{"target", e.target}, {"estimator", e.estimator}, {"mean_log_l2", e.mean_log()}, {"l2", e.l2}});
  j["errors"] = errs;
  Json qq = Json::array();
  for (const auto& q : r.qq)
    qq.push_back({{"target", q.target},
                  {"estimator", q.estimator},
                  {"level", q.level},
                  {"target_quantile", q.target_quantile},
                  {"estimate", q.estimate}});
  j["qq"] = qq;
  Json lv = Json::array();
  for (const auto& l : r.levels)
    lv.push_back({{"target", l.target}, {"estimator", l.estimator}, {"probs", l.probs}, {"levels", l.levels}});
  j["level_sets"] = lv;
  if (include_grids) {
    Json g = Json::array();
    for (const auto& p : r.grids)
      g.push_back({{"target", p.target}, {"estimator", p.estimator}, {"grid", to_json(p.grid)}});
    j["grids"] = g;
  }
  return j;
}

inline Json
to_json(const MonteCarloResult& m)
{
  return Json{{"truth", m.truth},     {"mean", m.mean},       {"bias", m.bias_hat},
              {"variance", m.var_hat}, {"se_bias", m.se_bias}, {"se_variance", m.se_var},
              {"replicates", m.replicates}, {"sampling", m.sampling == McSampling::iid ? "iid" : "stratified"}};
}

inline Json
to_json(const RateCheck& r)
{
  return Json{{"n", r.n},         {"mean_ise", r.mean_ise},   {"se_ise", r.se_ise},
              {"slope", r.slope}, {"intercept", r.intercept}, {"r2", r.r2}};
}

} // namespace tailkde
