#include "shmm/theorem_lab.hpp"

#include "shmm/errors.hpp"
#include "shmm/quadrature.hpp"
#include "shmm/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace shmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kQuadTol = 1e-9;
// below this log-density p is treated as zero when q underflows
constexpr double kLogMassThreshold = -700.0;

struct Enumerator
{
  std::span<double const> obs;
  TransitionMatrix const &pi;
  std::vector<EnumeratedPath> &out;
  std::vector<int> path;

  void descend(std::size_t tau, int prev, double log_joint, std::vector<RegimeSummary> const &summaries)
  {
    if (tau == obs.size()) {
      out.push_back({path, log_joint, 0.0, summaries});
      return;
    }
    Eigen::RowVectorXd const row = prev < 0 ? pi.first_step() : Eigen::RowVectorXd(pi.rows.row(prev));
    double const t_obs = static_cast<double>(tau + 1);
    for (int k = 0; k < pi.k(); ++k) {
      path.push_back(k);
      std::vector<RegimeSummary> next = summaries;
      double lj = kNegInf;
      if (row(k) > 0.0 && log_joint > kNegInf)
        lj = log_joint + std::log(row(k)) + predictive_logpdf(summaries[k], t_obs, obs[tau]);
      next[k] = update(summaries[k], t_obs, obs[tau]);
      descend(tau + 1, k, lj, next);
      path.pop_back();
    }
  }
};

std::size_t checked_power(std::size_t base, std::size_t exp, std::size_t cap)
{
  std::size_t n = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (n > cap / base)
      return cap + 1;
    n *= base;
  }
  return n;
}

std::size_t binomial_capped(std::size_t n, std::size_t k, std::size_t cap)
{
  if (k > n)
    return 0;
  k = std::min(k, n - k);
  double acc = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    acc = acc * static_cast<double>(n - k + i) / static_cast<double>(i);
    if (acc > static_cast<double>(cap))
      return cap + 1;
  }
  return static_cast<std::size_t>(std::llround(acc));
}

double log_sum_exp_col(Eigen::Ref<Eigen::ArrayXd const> v) { return log_sum_exp(v); }

} // namespace

std::vector<std::size_t> PathPosterior::ranked() const
{
  std::vector<std::size_t> idx(paths.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return paths[a].log_weight > paths[b].log_weight; });
  return idx;
}

PathPosterior exact_path_posterior(std::span<double const> observations, TransitionMatrix const &pi,
                                   std::vector<RegimeSummary> const &priors, std::size_t cap)
{
  pi.validate();
  if (static_cast<int>(priors.size()) != pi.k())
    throw InvalidArgument("regime prior count must equal K");
  for (double y : observations)
    if (!std::isfinite(y))
      throw RejectedInput("non-finite observation");
  std::size_t const n = checked_power(static_cast<std::size_t>(pi.k()), observations.size(), cap);
  if (n > cap)
    throw InstanceTooLarge("K^t exceeds enumeration cap of " + std::to_string(cap) + " paths");

  PathPosterior post;
  post.t = observations.size();
  post.paths.reserve(n);
  Enumerator e{observations, pi, post.paths, {}};
  e.descend(0, -1, 0.0, priors);

  Eigen::ArrayXd lw(static_cast<Eigen::Index>(post.paths.size()));
  for (std::size_t i = 0; i < post.paths.size(); ++i)
    lw(static_cast<Eigen::Index>(i)) = post.paths[i].log_weight;
  double const lse = log_sum_exp(lw);
  if (!std::isfinite(lse))
    throw DegenerateLikelihood(post.t, "every path has zero likelihood");
  for (auto &p : post.paths) {
    p.log_weight -= lse;
    p.weight = std::exp(p.log_weight);
  }
  return post;
}

PredictiveMixture path_conditional_predictive(EnumeratedPath const &path, TransitionMatrix const &pi,
                                              std::size_t t)
{
  Eigen::RowVectorXd const row =
    path.path.empty() ? pi.first_step() : Eigen::RowVectorXd(pi.rows.row(path.path.back()));
  int const k = pi.k();
  Eigen::VectorXd w(k), mu(k), var(k);
  for (int j = 0; j < k; ++j) {
    auto const g = predictive(path.summaries[j], static_cast<double>(t + 1));
    w(j) = row(j);
    mu(j) = g.mean;
    var(j) = g.variance;
  }
  return {w, mu, var};
}

PredictiveMixture posterior_predictive(PathPosterior const &post, TransitionMatrix const &pi,
                                       std::span<std::size_t const> members)
{
  std::vector<std::size_t> all;
  if (members.empty()) {
    all.resize(post.paths.size());
    std::iota(all.begin(), all.end(), 0);
    members = all;
  }
  std::vector<PredictiveMixture> parts;
  std::vector<double> outer;
  parts.reserve(members.size());
  for (auto i : members) {
    parts.push_back(path_conditional_predictive(post.paths[i], pi, post.t));
    outer.push_back(post.paths[i].weight);
  }
  return combine(parts, outer);
}

DivergenceResult kl_mixture(PredictiveMixture const &p, PredictiveMixture const &q)
{
  auto const [a, b] = mixture_range(p, q);
  bool infinite = false;
  auto f = [&](Eigen::ArrayXd const &x) {
    Eigen::ArrayXd const lp = log_density(p, x);
    Eigen::ArrayXd const lq = log_density(q, x);
    Eigen::ArrayXd out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (lp(i) == kNegInf) {
        out(i) = 0.0;
      } else if (lq(i) == kNegInf) {
        if (lp(i) > kLogMassThreshold)
          infinite = true;
        out(i) = 0.0;
      } else {
        out(i) = std::exp(lp(i)) * (lp(i) - lq(i));
      }
    }
    return out;
  };
  auto const r = integrate(f, a, b, kQuadTol);
  if (infinite)
    return {std::numeric_limits<double>::infinity(), 0.0, true, r.converged};
  return {r.value, r.error_estimate, false, r.converged};
}

DivergenceResult chi2_mixture(PredictiveMixture const &num, PredictiveMixture const &den)
{
  Eigen::Index kn = 0, kd = 0;
  double const var_n = num.variances.maxCoeff(&kn);
  double const var_d = den.variances.maxCoeff(&kd);
  if (2.0 * var_d <= var_n)
    return {std::numeric_limits<double>::infinity(), 0.0, true, true};

  // num^2/den <= sum_i (w_i / w_kd) N_i^2 / N_kd; cover every such Gaussian bump
  auto [a, b] = mixture_range(num, den);
  double const mu_d = den.means(kd);
  for (Eigen::Index i = 0; i < num.size(); ++i) {
    double const prec = 1.0 / num.variances(i) - 0.5 / var_d;
    double const center = (num.means(i) / num.variances(i) - 0.5 * mu_d / var_d) / prec;
    double const sd = std::sqrt(0.5 / prec);
    a = std::min(a, center - 10.0 * sd);
    b = std::max(b, center + 10.0 * sd);
  }
  auto f = [&](Eigen::ArrayXd const &x) {
    Eigen::ArrayXd const ln = log_density(num, x);
    Eigen::ArrayXd const ld = log_density(den, x);
    return Eigen::ArrayXd((2.0 * ln - ld).exp());
  };
  auto const r = integrate(f, a, b, kQuadTol, 256, 20);
  return {r.value - 1.0, r.error_estimate, false, r.converged};
}

double discarded_mass(PathPosterior const &post, std::span<std::size_t const> support)
{
  std::vector<char> in(post.paths.size(), 0);
  for (auto i : support)
    in.at(i) = 1;
  std::vector<double> rest;
  for (std::size_t i = 0; i < post.paths.size(); ++i)
    if (!in[i])
      rest.push_back(post.paths[i].weight);
  std::sort(rest.begin(), rest.end());
  return std::accumulate(rest.begin(), rest.end(), 0.0);
}

TruncationReport truncation_report(PathPosterior const &post, TransitionMatrix const &pi,
                                   std::span<std::size_t const> support)
{
  if (support.empty())
    throw InvalidArgument("support must be nonempty");
  TruncationReport rep;
  std::vector<char> in(post.paths.size(), 0);
  std::vector<double> kept;
  for (auto i : support) {
    in.at(i) = 1;
    rep.support.push_back(post.paths[i].path);
    kept.push_back(post.paths[i].weight);
  }
  std::sort(kept.begin(), kept.end());
  rep.w_a = std::accumulate(kept.begin(), kept.end(), 0.0);
  rep.delta = discarded_mass(post, support);
  if (!(rep.w_a > 0.0))
    throw InvalidArgument("support carries no posterior mass");

  auto const p = posterior_predictive(post, pi);
  auto const qa = posterior_predictive(post, pi, support);
  auto const kl = kl_mixture(p, qa);
  rep.kl_exact = kl.value;
  rep.quadrature_error_estimate = kl.error_estimate;

  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < post.paths.size(); ++i)
    if (!in[i] && post.paths[i].weight > 0.0)
      rest.push_back(i);
  if (rep.delta == 0.0 || rest.empty()) {
    rep.chi2_c = 0.0;
  } else {
    auto const pac = posterior_predictive(post, pi, rest);
    auto const chi = chi2_mixture(pac, qa);
    rep.chi2_c = chi.value;
    rep.assumption_violated = chi.infinite;
    rep.quadrature_error_estimate = std::max(rep.quadrature_error_estimate, chi.error_estimate);
  }
  if (rep.assumption_violated) {
    rep.bound = rep.strengthened_bound = std::numeric_limits<double>::infinity();
    return rep;
  }
  double const c = std::max(rep.chi2_c, 0.0);
  rep.bound = kl_bound(rep.delta, c);
  rep.strengthened_bound = kl_bound(rep.delta * rep.delta, c);
  rep.bound_holds = rep.kl_exact <= rep.bound + kBoundSlack;
  rep.strengthened_holds = rep.kl_exact <= rep.strengthened_bound + kBoundSlack;
  return rep;
}

TruncationReport verify_theorem(std::span<double const> observations, TransitionMatrix const &pi,
                                std::vector<RegimeSummary> const &priors, int s_budget)
{
  if (s_budget < 1)
    throw InvalidBudget("hypothesis budget must be >= 1");
  auto const post = exact_path_posterior(observations, pi, priors);
  auto ranked = post.ranked();
  ranked.resize(std::min(ranked.size(), static_cast<std::size_t>(s_budget)));
  return truncation_report(post, pi, ranked);
}

SupportSweep support_sweep(PathPosterior const &post, TransitionMatrix const &pi, int s_budget,
                           std::size_t cap)
{
  if (s_budget < 1)
    throw InvalidBudget("hypothesis budget must be >= 1");
  std::size_t const n = post.paths.size();
  std::size_t const s = std::min(static_cast<std::size_t>(s_budget), n);
  if (binomial_capped(n, s, cap) > cap)
    throw InstanceTooLarge("number of size-S supports exceeds cap of " + std::to_string(cap));

  auto ranked = post.ranked();
  ranked.resize(s);
  std::vector<std::size_t> top = ranked;
  std::sort(top.begin(), top.end());

  SupportSweep sweep;
  auto const p = posterior_predictive(post, pi);
  std::vector<std::size_t> comb(s);
  std::iota(comb.begin(), comb.end(), 0);
  for (;;) {
    SupportSweepRow row;
    row.support = comb;
    row.is_top = comb == top;
    row.delta = discarded_mass(post, comb);
    double w_a = 0.0;
    for (auto i : comb)
      w_a += post.paths[i].weight;
    if (w_a > 0.0) {
      auto const qa = posterior_predictive(post, pi, comb);
      row.kl_exact = kl_mixture(p, qa).value;
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < n; ++i)
        if (!std::binary_search(comb.begin(), comb.end(), i) && post.paths[i].weight > 0.0)
          rest.push_back(i);
      if (row.delta > 0.0 && !rest.empty()) {
        auto const chi = chi2_mixture(posterior_predictive(post, pi, rest), qa);
        row.chi2_c = chi.value;
        row.chi2_infinite = chi.infinite;
      }
      row.bound = row.chi2_infinite ? std::numeric_limits<double>::infinity()
                                    : kl_bound(row.delta, std::max(row.chi2_c, 0.0));
    } else {
      row.kl_exact = std::numeric_limits<double>::infinity();
      row.bound = std::numeric_limits<double>::infinity();
    }
    sweep.rows.push_back(std::move(row));

    // next combination in lexicographic order
    std::size_t i = s;
    while (i > 0 && comb[i - 1] == n - s + i - 1)
      --i;
    if (i == 0)
      break;
    ++comb[i - 1];
    for (std::size_t j = i; j < s; ++j)
      comb[j] = comb[j - 1] + 1;
  }

  sweep.min_delta = std::numeric_limits<double>::infinity();
  sweep.min_kl = std::numeric_limits<double>::infinity();
  for (auto const &r : sweep.rows) {
    sweep.min_delta = std::min(sweep.min_delta, r.delta);
    sweep.min_kl = std::min(sweep.min_kl, r.kl_exact);
    if (r.is_top) {
      sweep.top_delta = r.delta;
      sweep.top_kl = r.kl_exact;
    }
  }
  sweep.top_attains_min_delta = sweep.top_delta == sweep.min_delta;
  sweep.top_minimizes_kl = sweep.top_kl <= sweep.min_kl;
  return sweep;
}

SupportSweep support_sweep(std::span<double const> observations, TransitionMatrix const &pi,
                           std::vector<RegimeSummary> const &priors, int s_budget, std::size_t cap)
{
  return support_sweep(exact_path_posterior(observations, pi, priors), pi, s_budget, cap);
}

WeightProbeReport weight_optimality_probe(PathPosterior const &post, TransitionMatrix const &pi,
                                          std::span<std::size_t const> support, int trials,
                                          std::uint64_t seed)
{
  if (support.empty())
    throw InvalidArgument("support must be nonempty");
  WeightProbeReport rep;
  rep.trials = trials;

  auto const p = posterior_predictive(post, pi);
  auto const qa = posterior_predictive(post, pi, support);
  auto const [a, b] = mixture_range(p, qa);
  // adaptive pass fixes the grid; all alphas are then scored on it
  auto const grid = integrate(
    [&](Eigen::ArrayXd const &x) {
      Eigen::ArrayXd const lp = log_density(p, x);
      Eigen::ArrayXd const lq = log_density(qa, x);
      return Eigen::ArrayXd(lp.exp() * (lp - lq));
    },
    a, b, kQuadTol);
  rep.quadrature_error_estimate = grid.error_estimate;

  Eigen::ArrayXd const lp = log_density(p, grid.nodes);
  Eigen::ArrayXd const mass = grid.weights * lp.exp();
  auto const m = static_cast<Eigen::Index>(support.size());
  Eigen::ArrayXXd logf(m, grid.nodes.size());
  Eigen::ArrayXd base_alpha(m);
  double w_a = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    auto const &path = post.paths[support[static_cast<std::size_t>(j)]];
    logf.row(j) = log_density(path_conditional_predictive(path, pi, post.t), grid.nodes).transpose();
    base_alpha(j) = path.weight;
    w_a += path.weight;
  }
  base_alpha /= w_a;

  auto kl_for = [&](Eigen::ArrayXd const &alpha) {
    Eigen::ArrayXd const la = alpha.log();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < grid.nodes.size(); ++i) {
      double const lq = log_sum_exp_col(la + logf.col(i));
      if (mass(i) > 0.0)
        acc += mass(i) * (lp(i) - lq);
    }
    return acc;
  };

  rep.kl_renormalised = kl_for(base_alpha);
  rep.min_gap = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < trials; ++trial) {
    Eigen::ArrayXd alpha(m);
    for (Eigen::Index j = 0; j < m; ++j)
      alpha(j) = -std::log(counter_uniform(seed, static_cast<std::uint64_t>(trial),
                                           static_cast<std::uint64_t>(j)));
    alpha /= alpha.sum();
    double const gap = kl_for(alpha) - rep.kl_renormalised;
    rep.gaps.push_back(gap);
    if (gap < -rep.tolerance)
      ++rep.negative_findings;
    if (gap < rep.min_gap) {
      rep.min_gap = gap;
      rep.argmin_alpha.assign(alpha.data(), alpha.data() + m);
    }
  }
  if (trials == 0)
    rep.min_gap = 0.0;
  return rep;
}

} // namespace shmm
