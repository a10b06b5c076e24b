#pragma once

#include "estimators.hpp"
#include "sampling.hpp"
#include "tailindex.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

namespace tailkde {

//! Density levels c_p with mass{f >= c_p} = p on a normalised grid, by
//! sorting grid cells on density. p = 1 gives 0 (the whole support).
inline std::vector<double>
highest_density_levels(const DensityGrid& g, const std::vector<double>& probs)
{
  if (g.values.size() != g.weights.size() || g.values.empty())
    throw ConfigError("grid has no values");
  const double total = g.integral();
  if (!(std::abs(total - 1.0) <= 1e-2))
    throw DataError(detail::concat("grid is not normalised (integral ", total, ")"));
  std::vector<std::size_t> order(g.values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return g.values[a] > g.values[b]; });
  std::vector<double> out;
  for (double p : probs) {
    if (!(p > 0.0 && p <= 1.0))
      throw ConfigError("level-set probabilities must lie in (0, 1]");
    if (p == 1.0) {
      out.push_back(0.0);
      continue;
    }
    double cum = 0.0, level = g.values[order.back()];
    for (auto k : order) {
      cum += g.values[k] * g.weights[k];
      if (cum >= p * total) {
        level = g.values[k];
        break;
      }
    }
    out.push_back(level);
  }
  return out;
}

enum class StudyKind
{
  univariate,
  bivariate
};

inline std::string
to_string(StudyKind k)
{
  return k == StudyKind::univariate ? "univariate" : "bivariate";
}

//! A simulation study: targets, design, the estimator roster scored against
//! the truth, the nonparametric references used as tail indices and the
//! parametric candidates they select among.
struct StudyConfig
{
  StudyKind kind = StudyKind::univariate;
  std::size_t n = 2000;
  std::size_t replicates = 100;
  std::uint64_t seed = 1;
  double quantile = 0.95;
  std::vector<std::string> targets;
  std::vector<std::string> estimators;
  std::vector<std::string> references;
  std::vector<std::string> candidates;
  Loss loss = Loss::L2;
  //! Drop the Frechet candidate when the deviance test keeps the Gumbel.
  bool deviance_guard = true;
  std::vector<double> qq_levels;
  std::vector<double> level_probs;
  Convention convention = Convention::evd;
  FitOptions fit;
  double max_failure_rate = 0.05;
  //! Keep replicate 0's grids, quantiles and level sets.
  bool plot_data = true;

  std::size_t d() const { return kind == StudyKind::univariate ? 1 : 2; }
  void validate() const;
};

inline StudyConfig
univariate_study_config()
{
  StudyConfig c;
  c.kind = StudyKind::univariate;
  c.n = 2000;
  c.replicates = 100;
  c.quantile = 0.95;
  c.targets = {"fre", "gum", "gpd"};
  c.estimators = {"fre", "gum", "gpd", "gpd+", "hist", "kns", "kpi", "kuc", "ksc", "kns*", "kpi*", "kuc*", "ksc*"};
  c.references = {"hist", "kpi", "kpi*", "gpd+"};
  c.candidates = {"fre", "gum", "gpd"};
  c.qq_levels = {0.95, 0.96, 0.97, 0.98, 0.99, 0.995, 0.999};
  return c;
}

inline StudyConfig
bivariate_study_config()
{
  StudyConfig c;
  c.kind = StudyKind::bivariate;
  c.n = 4000;
  c.replicates = 50;
  c.quantile = 0.9;
  c.targets = {"bil", "anl", "hr"};
  c.estimators = {"bil", "anl", "hr", "hist", "kpi", "kpi*"};
  c.references = {"hist", "kpi", "kpi*"};
  c.candidates = {"bil", "anl", "hr"};
  c.deviance_guard = false;
  c.level_probs = {0.25, 0.5, 0.75, 0.99};
  return c;
}

//! Target by id: fre, gum, gpd (univariate) or bil, anl, hr (bivariate).
inline TargetSpec
study_target(const std::string& id, StudyKind kind, Convention c = Convention::evd)
{
  if (kind == StudyKind::univariate) {
    for (auto& t : univariate_study_targets())
      if (t.id == id)
        return t;
  } else {
    for (auto f : {BivFamily::bilogistic, BivFamily::anl, BivFamily::husler_reiss})
      if (to_string(f) == id)
        return bivariate_target(f, c);
  }
  throw ConfigError(detail::concat("unknown ", to_string(kind), " target '", id, "'"));
}

inline void
StudyConfig::validate() const
{
  if (replicates < 1)
    throw ConfigError("replicates must be at least 1");
  if (n < 10)
    throw ConfigError("n must be at least 10");
  if (!(quantile > 0.0 && quantile < 1.0))
    throw ConfigError("threshold quantile must lie in (0,1)");
  if (targets.empty())
    throw ConfigError("study needs at least one target");
  for (const auto& t : targets)
    study_target(t, kind, convention);
  for (const auto* list : {&estimators, &references, &candidates})
    for (const auto& tok : *list)
      if (!parse_estimator(tok).supports(d()))
        throw ConfigError(detail::concat("estimator '", tok, "' does not support d = ", d()));
  for (const auto& c : candidates) {
    const auto k = parse_estimator(c).kind;
    if (k != EstimatorKind::univariate && k != EstimatorKind::bivariate)
      throw ConfigError(detail::concat("candidate '", c, "' is not a parametric family"));
  }
  if (!references.empty() && candidates.size() < 2)
    throw ConfigError("model selection needs at least two candidates");
  for (double p : qq_levels)
    if (!(p >= quantile && p < 1.0))
      throw ConfigError("qq levels must lie in [quantile, 1)");
  for (double p : level_probs)
    if (!(p > 0.0 && p <= 1.0))
      throw ConfigError("level-set probabilities must lie in (0, 1]");
  if (!(max_failure_rate >= 0.0 && max_failure_rate <= 1.0))
    throw ConfigError("max failure rate must lie in [0, 1]");
}

struct QqPoint
{
  std::string target;
  std::string estimator;
  double level = 0.0;
  double target_quantile = 0.0;
  double estimate = 0.0;
};

struct PlotGrid
{
  std::string target;
  std::string estimator;
  DensityGrid grid;
};

struct LevelSet
{
  std::string target;
  std::string estimator;
  std::vector<double> probs;
  std::vector<double> levels;
};

struct TargetSummary
{
  std::string target;
  std::size_t replicates = 0;
  std::size_t failed = 0;
  std::vector<std::string> failure_messages;

  double failure_rate() const { return replicates ? static_cast<double>(failed) / static_cast<double>(replicates) : 0.0; }
};

//! Per-replicate L2 errors against the true tail density. Entries are aligned
//! across estimators of one target (successful replicates only).
struct EstimatorErrors
{
  std::string target;
  std::string estimator;
  std::vector<double> l2;

  double mean_log() const
  {
    std::vector<double> v;
    for (double e : l2)
      v.push_back(std::log(e));
    return v.empty() ? std::nan("") : pairwise_sum(v) / static_cast<double>(v.size());
  }
};

//! One row of a selection table: how often each candidate had the smallest
//! index under one reference.
struct SelectionRow
{
  std::string target;
  std::string reference;
  std::string kind;
  std::vector<std::pair<std::string, double>> proportions;
  double correct = 0.0;
  std::size_t counted = 0;
  std::size_t ties = 0;
  //! Replicates where the deviance test removed the Frechet candidate.
  std::size_t frechet_dropped = 0;
};

//! Mean index of one fitted candidate under one reference.
struct IndexCell
{
  std::string target;
  std::string fitted;
  std::string reference;
  std::string kind;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t count = 0;
};

struct StudyReport
{
  StudyConfig config;
  std::vector<TargetSummary> targets;
  std::vector<EstimatorErrors> errors;
  std::vector<SelectionRow> selection;
  std::vector<IndexCell> mean_index;
  std::vector<QqPoint> qq;
  std::vector<PlotGrid> grids;
  std::vector<LevelSet> levels;

  bool passed() const
  {
    return std::all_of(targets.begin(), targets.end(),
                       [&](const auto& t) { return t.failure_rate() <= config.max_failure_rate; });
  }

  const SelectionRow& selection_row(const std::string& target, const std::string& reference) const
  {
    for (const auto& r : selection)
      if (r.target == target && r.reference == reference)
        return r;
    throw ConfigError(detail::concat("no selection row for ", target, " / ", reference));
  }

  const IndexCell& index_cell(const std::string& target, const std::string& fitted, const std::string& reference) const
  {
    for (const auto& c : mean_index)
      if (c.target == target && c.fitted == fitted && c.reference == reference)
        return c;
    throw ConfigError(detail::concat("no index cell for ", target, " / ", fitted, " / ", reference));
  }

  const EstimatorErrors& error_of(const std::string& target, const std::string& estimator) const
  {
    for (const auto& e : errors)
      if (e.target == target && e.estimator == estimator)
        return e;
    throw ConfigError(detail::concat("no errors for ", target, " / ", estimator));
  }

  //! Share of replicates where estimator a has a smaller L2 error than b.
  double proportion_better(const std::string& target, const std::string& a, const std::string& b) const
  {
    const auto& ea = error_of(target, a).l2;
    const auto& eb = error_of(target, b).l2;
    if (ea.empty())
      return std::nan("");
    std::size_t w = 0;
    for (std::size_t k = 0; k < ea.size(); ++k)
      w += ea[k] < eb[k];
    return static_cast<double>(w) / static_cast<double>(ea.size());
  }
};

namespace detail {

struct ReplicateOutcome
{
  bool ok = false;
  std::string error;
  std::vector<double> l2;
  std::vector<std::string> winner;
  std::vector<std::vector<double>> index;
  std::vector<bool> tie_broken;
  bool frechet_dropped = false;
  std::vector<QqPoint> qq;
  std::vector<PlotGrid> grids;
  std::vector<LevelSet> levels;
};

inline std::vector<std::string>
fit_tokens(const StudyConfig& c)
{
  std::vector<std::string> t;
  for (const auto* list : {&c.estimators, &c.references, &c.candidates})
    for (const auto& s : *list)
      if (std::find(t.begin(), t.end(), s) == t.end())
        t.push_back(s);
  return t;
}

inline ReplicateOutcome
run_replicate(const StudyConfig& c, const TargetSpec& target, RngStream rng, bool keep_plots)
{
  ReplicateOutcome out;
  const auto x = sample(target, c.n, rng);
  const auto u = quantile_threshold(x, c.quantile);
  std::map<std::string, TailFit> fits;
  for (const auto& tok : fit_tokens(c)) {
    auto f = fit_tail(x, u, tok, c.fit);
    if (!parse_estimator(tok).nonparametric() && !f.report.converged)
      throw NumericalError(detail::concat("maximum likelihood fit '", tok, "' did not converge"));
    fits.emplace(tok, std::move(f));
  }
  TailOptions topt;
  topt.points = c.fit.points;
  topt.outside_mass = c.fit.outside_mass;
  const auto truth = target_tail_density(target, region_for(x, u), topt);

  for (const auto& e : c.estimators)
    out.l2.push_back(tail_index(fits.at(e).tail, truth, Loss::L2).value);

  std::vector<std::string> cands = c.candidates;
  if (c.kind == StudyKind::univariate && c.deviance_guard &&
      std::find(cands.begin(), cands.end(), "fre") != cands.end() && !deviance_gumbel_vs_frechet(x).use_frechet) {
    cands.erase(std::find(cands.begin(), cands.end(), "fre"));
    out.frechet_dropped = true;
  }
  for (const auto& ref : c.references) {
    std::vector<TailCandidate> tc;
    for (const auto& k : cands)
      tc.push_back(make_candidate(fits.at(k).tail, k));
    const auto sel = select_model(tc, fits.at(ref).tail, c.loss);
    out.winner.push_back(sel.winner_id);
    out.tie_broken.push_back(sel.tie_broken);
    std::vector<double> values(c.candidates.size(), std::nan(""));
    for (const auto& o : sel.outcomes) {
      const auto pos = std::find(c.candidates.begin(), c.candidates.end(), o.id) - c.candidates.begin();
      if (o.report)
        values[static_cast<std::size_t>(pos)] = o.report->value;
    }
    out.index.push_back(std::move(values));
  }

  if (keep_plots) {
    out.grids.push_back({target.id, "truth", truth.grid()});
    for (const auto& e : c.estimators)
      out.grids.push_back({target.id, e, fits.at(e).tail.grid()});
    if (const auto* m = std::get_if<UnivariateEvtFit>(&target.model)) {
      for (const auto& e : c.estimators)
        for (double p : c.qq_levels) {
          // The tail level uses the nominal threshold level q, not each
          // estimator's own mass above u.
          const double tau = (p - c.quantile) / (1.0 - c.quantile);
          const double est = tau <= 0.0 ? u[0] : tail_quantile(fits.at(e).tail, tau);
          out.qq.push_back({target.id, e, p, m->quantile(p), est});
        }
    }
    if (!c.level_probs.empty())
      for (const auto& g : out.grids)
        out.levels.push_back({g.target, g.estimator, c.level_probs, highest_density_levels(g.grid, c.level_probs)});
  }
  out.ok = true;
  return out;
}

} // namespace detail

//! Runs every target of the study. Replicates are independent streams
//! (seed, target index, replicate) and run in parallel; a replicate that
//! throws or has a non-converged likelihood fit is excluded and counted.
inline StudyReport
run_study(const StudyConfig& cfg)
{
  cfg.validate();
  StudyReport rep;
  rep.config = cfg;
  for (std::size_t ti = 0; ti < cfg.targets.size(); ++ti) {
    const auto target = study_target(cfg.targets[ti], cfg.kind, cfg.convention);
    const RngStream base(cfg.seed, ti);
    std::vector<detail::ReplicateOutcome> outs(cfg.replicates);
    parallel_for(cfg.replicates, thread_count(), [&](std::size_t r) {
      try {
        outs[r] = detail::run_replicate(cfg, target, base.split(r), cfg.plot_data && r == 0);
      } catch (const Error& e) {
        outs[r].ok = false;
        outs[r].error = e.what();
      }
    });

    TargetSummary ts;
    ts.target = target.id;
    ts.replicates = cfg.replicates;
    for (const auto& o : outs)
      if (!o.ok) {
        ++ts.failed;
        if (ts.failure_messages.size() < 5 &&
            std::find(ts.failure_messages.begin(), ts.failure_messages.end(), o.error) == ts.failure_messages.end())
          ts.failure_messages.push_back(o.error);
      }
    rep.targets.push_back(ts);

    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
      EstimatorErrors ee{target.id, cfg.estimators[e], {}};
      for (const auto& o : outs)
        if (o.ok)
          ee.l2.push_back(o.l2[e]);
      rep.errors.push_back(std::move(ee));
    }

    for (std::size_t k = 0; k < cfg.references.size(); ++k) {
      SelectionRow row;
      row.target = target.id;
      row.reference = cfg.references[k];
      row.kind = index_kind(cfg.references[k], cfg.loss);
      std::vector<std::size_t> wins(cfg.candidates.size(), 0);
      for (const auto& o : outs) {
        if (!o.ok)
          continue;
        ++row.counted;
        row.ties += o.tie_broken[k];
        row.frechet_dropped += o.frechet_dropped;
        const auto pos = std::find(cfg.candidates.begin(), cfg.candidates.end(), o.winner[k]) - cfg.candidates.begin();
        ++wins[static_cast<std::size_t>(pos)];
      }
      const double m = row.counted ? static_cast<double>(row.counted) : std::nan("");
      for (std::size_t j = 0; j < cfg.candidates.size(); ++j) {
        row.proportions.emplace_back(cfg.candidates[j], static_cast<double>(wins[j]) / m);
        if (cfg.candidates[j] == target.id)
          row.correct = static_cast<double>(wins[j]) / m;
      }
      rep.selection.push_back(std::move(row));

      for (std::size_t j = 0; j < cfg.candidates.size(); ++j) {
        std::vector<double> v;
        for (const auto& o : outs)
          if (o.ok && std::isfinite(o.index[k][j]))
            v.push_back(o.index[k][j]);
        IndexCell cell{target.id, cfg.candidates[j], cfg.references[k], index_kind(cfg.references[k], cfg.loss)};
        cell.count = v.size();
        if (!v.empty()) {
          cell.mean = pairwise_sum(v) / static_cast<double>(v.size());
          double s = 0.0;
          for (double a : v)
            s += (a - cell.mean) * (a - cell.mean);
          cell.sd = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
        } else {
          cell.mean = cell.sd = std::nan("");
        }
        rep.mean_index.push_back(cell);
      }
    }

    if (cfg.plot_data && outs[0].ok) {
      auto& o = outs[0];
      std::move(o.qq.begin(), o.qq.end(), std::back_inserter(rep.qq));
      std::move(o.grids.begin(), o.grids.end(), std::back_inserter(rep.grids));
      std::move(o.levels.begin(), o.levels.end(), std::back_inserter(rep.levels));
    }
  }
  return rep;
}

//! Aligned-text tables: correct-selection proportions (targets by index
//! kind), mean indices per (true, fitted) pair, and mean log L2 errors.
inline std::string
format_study_tables(const StudyReport& r)
{
  std::ostringstream os;
  os << std::fixed;
  const auto& c = r.config;
  auto kind_of = [&](const std::string& ref) { return index_kind(ref, c.loss); };

  os << "Correct-selection proportions (" << c.replicates << " replicates, n = " << c.n << ")\n";
  os << std::left << std::setw(8) << "Target";
  for (const auto& ref : c.references)
    os << std::right << std::setw(16) << kind_of(ref);
  os << "\n";
  for (const auto& t : c.targets) {
    os << std::left << std::setw(8) << t;
    for (const auto& ref : c.references)
      os << std::right << std::setw(16) << std::setprecision(2) << r.selection_row(t, ref).correct;
    os << "\n";
  }

  os << "\nMean index by true and fitted model\n";
  os << std::left << std::setw(8) << "True" << std::setw(8) << "Fitted";
  for (const auto& ref : c.references)
    os << std::right << std::setw(16) << kind_of(ref);
  os << "\n";
  for (const auto& t : c.targets)
    for (const auto& f : c.candidates) {
      os << std::left << std::setw(8) << t << std::setw(8) << f;
      for (const auto& ref : c.references)
        os << std::right << std::setw(16) << std::setprecision(5) << r.index_cell(t, f, ref).mean;
      os << "\n";
    }

  os << "\nMean log L2 error against the true tail density\n";
  os << std::left << std::setw(8) << "Target";
  for (const auto& e : c.estimators)
    os << std::right << std::setw(9) << e;
  os << "\n";
  for (const auto& t : c.targets) {
    os << std::left << std::setw(8) << t;
    for (const auto& e : c.estimators)
      os << std::right << std::setw(9) << std::setprecision(3) << r.error_of(t, e).mean_log();
    os << "\n";
  }

  os << "\nFailed replicates\n";
  for (const auto& t : r.targets) {
    os << std::left << std::setw(8) << t.target << t.failed << "/" << t.replicates;
    if (!t.failure_messages.empty())
      os << "  (" << t.failure_messages.front() << ")";
    os << "\n";
  }
  os << (r.passed() ? "study passed the failure-rate gate\n" : "study FAILED the failure-rate gate\n");
  return os.str();
}

} // namespace tailkde
