#pragma once

#include "core.hpp"
#include "estimators.hpp"
#include "kde.hpp"

namespace tailkde {

enum class Loss
{
  L1,
  L2
};

inline std::string
to_string(Loss l)
{
  return l == Loss::L1 ? "l1" : "l2";
}

inline Loss
parse_loss(const std::string& s)
{
  if (s == "l1" || s == "L1")
    return Loss::L1;
  if (s == "l2" || s == "L2")
    return Loss::L2;
  throw ConfigError(detail::concat("unknown loss '", s, "' (expected l1 or l2)"));
}

//! A candidate tail density g_j. `evaluate` fills a grid with normalised
//! values, zero below the threshold.
struct TailCandidate
{
  std::string id;
  std::function<void(DensityGrid&)> evaluate;
};

inline TailCandidate
make_candidate(const TailDensityModel& m, std::string id = {})
{
  if (id.empty())
    id = m.id();
  return {std::move(id), [m](DensityGrid& g) { g = m.evaluate_on(g); }};
}

//! Candidate from a pointwise tail density; it is evaluated as given.
inline TailCandidate
make_candidate(std::string id, std::function<double(std::span<const double>)> pdf)
{
  return {std::move(id), [pdf = std::move(pdf)](DensityGrid& g) { g.fill(pdf); }};
}

//! Index label from the reference estimator and the loss: T2_hist, T2_kernel,
//! T2_std_kernel, T2_gpd, T1_hist, and so on.
inline std::string
index_kind(const std::string& reference_id, Loss loss)
{
  std::string cls = "param";
  if (reference_id == "hist")
    cls = "hist";
  else if (reference_id == "gpd+")
    cls = "gpd";
  else if (!reference_id.empty() && reference_id[0] == 'k')
    cls = reference_id.back() == '*' ? "std_kernel" : "kernel";
  return detail::concat(loss == Loss::L1 ? "T1_" : "T2_", cls);
}

struct TailIndexReport
{
  std::string candidate;
  std::string reference;
  std::string kind;
  Loss loss = Loss::L2;
  double value = 0.0;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::size_t> shape;
};

namespace detail {

inline double
grid_discrepancy(const DensityGrid& g, const std::vector<double>& ref, Loss loss)
{
  std::vector<double> terms(g.size());
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const double e = std::abs(g.values[k] - ref[k]);
    terms[k] = g.weights[k] * (loss == Loss::L1 ? e : e * e);
  }
  return pairwise_sum(terms);
}

inline DensityGrid
reference_values(const TailDensityModel& reference, const std::optional<DensityGrid>& layout)
{
  if (!layout)
    return reference.grid();
  if (layout->d() != reference.d())
    throw ConfigError("index grid dimension does not match the reference");
  return reference.evaluate_on(*layout);
}

inline TailIndexReport
index_on(const TailCandidate& c, const TailDensityModel& reference, const DensityGrid& ref, Loss loss)
{
  DensityGrid g = ref.with_values(std::vector<double>(ref.size(), 0.0));
  c.evaluate(g);
  if (g.values.size() != ref.size())
    throw NumericalError(concat("candidate '", c.id, "' returned a grid of the wrong size"));
  for (double v : g.values)
    if (!std::isfinite(v))
      throw NumericalError(concat("candidate '", c.id, "' is not finite on the index grid"));
  TailIndexReport r;
  r.candidate = c.id;
  r.reference = reference.id();
  r.kind = index_kind(reference.id(), loss);
  r.loss = loss;
  r.value = grid_discrepancy(g, ref.values, loss);
  for (const auto& a : ref.axes) {
    r.lower.push_back(a.front());
    r.upper.push_back(a.back());
    r.shape.push_back(a.size());
  }
  return r;
}

} // namespace detail

//! Integrated |g - f|^p over the reference grid (or `layout` when given),
//! where f is the reference tail estimate and p = 1 or 2.
inline TailIndexReport
tail_index(const TailCandidate& candidate, const TailDensityModel& reference, Loss loss = Loss::L2,
           const std::optional<DensityGrid>& layout = std::nullopt)
{
  const auto ref = detail::reference_values(reference, layout);
  return detail::index_on(candidate, reference, ref, loss);
}

inline TailIndexReport
tail_index(const TailDensityModel& candidate, const TailDensityModel& reference, Loss loss = Loss::L2,
           const std::optional<DensityGrid>& layout = std::nullopt)
{
  return tail_index(make_candidate(candidate), reference, loss, layout);
}

struct CandidateOutcome
{
  std::string id;
  std::optional<TailIndexReport> report;
  std::string error;
};

struct ModelSelection
{
  std::size_t winner = 0;
  std::string winner_id;
  //! One entry per candidate, in candidate order.
  std::vector<CandidateOutcome> outcomes;
  //! Candidates sharing the minimum value; the first of them wins.
  std::vector<std::size_t> tied;
  bool tie_broken = false;
};

//! Argmin of the tail index over the candidates. A candidate that fails to
//! evaluate is recorded and skipped; at least two must survive.
inline ModelSelection
select_model(const std::vector<TailCandidate>& candidates, const TailDensityModel& reference,
             Loss loss = Loss::L2, const std::optional<DensityGrid>& layout = std::nullopt)
{
  if (candidates.size() < 2)
    throw ConfigError("model selection needs at least two candidates");
  const auto ref = detail::reference_values(reference, layout);
  ModelSelection s;
  s.outcomes.resize(candidates.size());
  // Candidates write to their own slots, so the outcome is thread-count invariant.
  parallel_for(candidates.size(), std::min<std::size_t>(thread_count(), candidates.size()), [&](std::size_t k) {
    auto& o = s.outcomes[k];
    o.id = candidates[k].id;
    try {
      o.report = detail::index_on(candidates[k], reference, ref, loss);
    } catch (const Error& e) {
      o.error = e.what();
    }
  });
  std::optional<std::size_t> best;
  std::size_t alive = 0;
  for (std::size_t k = 0; k < s.outcomes.size(); ++k) {
    if (!s.outcomes[k].report)
      continue;
    ++alive;
    if (!best || s.outcomes[k].report->value < s.outcomes[*best].report->value)
      best = k;
  }
  if (alive < 2)
    throw NumericalError(detail::concat("model selection needs two evaluable candidates, ", alive, " remain"));
  s.winner = *best;
  s.winner_id = s.outcomes[*best].id;
  for (std::size_t k = 0; k < s.outcomes.size(); ++k)
    if (s.outcomes[k].report && s.outcomes[k].report->value == s.outcomes[*best].report->value)
      s.tied.push_back(k);
  s.tie_broken = s.tied.size() > 1;
  return s;
}

inline ModelSelection
select_model(const std::vector<TailDensityModel>& candidates, const TailDensityModel& reference,
             Loss loss = Loss::L2, const std::optional<DensityGrid>& layout = std::nullopt)
{
  std::vector<TailCandidate> c;
  for (const auto& m : candidates)
    c.push_back(make_candidate(m));
  return select_model(c, reference, loss, layout);
}

struct DataVsDataOptions
{
  //! Threshold as a quantile level of the observed data, or absolute values.
  std::optional<double> quantile = 0.95;
  std::vector<double> threshold;
  std::string estimator = "kpi";
  Loss loss = Loss::L2;
  FitOptions fit;
};

struct DataVsDataResult
{
  TailIndexReport report;
  FitReport observed;
  FitReport modeled;
};

//! Resolves the comparison threshold; it always comes from the observed data.
inline std::vector<double>
observed_threshold(const DataMatrix& observed, const DataVsDataOptions& opt)
{
  if (!opt.threshold.empty()) {
    if (opt.threshold.size() != observed.d())
      throw ConfigError("threshold dimension does not match the data");
    return opt.threshold;
  }
  if (!opt.quantile)
    throw ConfigError("either a threshold quantile or threshold values are required");
  return quantile_threshold(observed, *opt.quantile);
}

//! Compares two data sets through their tail estimates: each is fitted on
//! its own (own offset, own bandwidth) at the observed threshold, and the
//! modeled estimate is scored against the observed one on the observed grid.
inline DataVsDataResult
data_vs_data_index(const DataMatrix& observed, const DataMatrix& modeled, const DataVsDataOptions& opt = {})
{
  if (observed.d() != modeled.d())
    throw DataError("observed and modeled data have different dimensions");
  const auto u = observed_threshold(observed, opt);
  const auto spec = parse_estimator(opt.estimator);
  auto obs = fit_tail(observed, u, spec, opt.fit);
  if (detail::count_tail(modeled, u) == 0)
    throw DataError("modeled data has no observations above the threshold");
  auto mod = fit_tail(modeled, u, spec, opt.fit);
  DataVsDataResult r{tail_index(mod.tail, obs.tail, opt.loss), std::move(obs.report), std::move(mod.report)};
  return r;
}

} // namespace tailkde
