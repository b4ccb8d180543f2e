#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"

#include "shmm/beam.hpp"
#include "shmm/errors.hpp"
#include "shmm/theorem_lab.hpp"

#include <map>
#include <random>

using namespace shmm;

namespace {

struct Instance
{
  TransitionMatrix pi;
  std::vector<oracle::Conjugate> conj;
  std::vector<RegimeSummary> priors;
  std::vector<double> obs;
};

Instance random_instance(int k, std::size_t t, std::uint64_t seed)
{
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.3, 3.0);
  Instance in{oracle::random_transition(k, gen), {}, {}, {}};
  for (int j = 0; j < k; ++j) {
    oracle::Conjugate c{1.5 * n(gen), u(gen), u(gen)};
    in.conj.push_back(c);
    in.priors.emplace_back(GaussianConjugateState::prior(c.mean, c.var, c.obs_var));
  }
  for (std::size_t i = 0; i < t; ++i)
    in.obs.push_back(2.0 * n(gen));
  return in;
}

Beam run(Instance const &in, int s)
{
  Beam b = initial_beam(in.priors);
  for (double y : in.obs)
    b = step(b, y, in.pi, s);
  return b;
}

std::size_t power(int k, std::size_t t)
{
  std::size_t r = 1;
  for (std::size_t i = 0; i < t; ++i)
    r *= static_cast<std::size_t>(k);
  return r;
}

PathHypothesis bare(std::vector<int> const &path, double lw)
{
  PathHypothesis h;
  for (int z : path)
    h.history = extend(h.history, z);
  h.log_weight = lw;
  return h;
}

} // namespace

TEST_CASE("identical predictives give equal candidate weights")
{
  auto const pi = TransitionMatrix::uniform(2);
  auto const p = GaussianConjugateState::prior(0.0, 1.0, 1.0);
  auto const c = branch(initial_beam({p, p}), 0.4, pi);
  REQUIRE(c.candidates.size() == 2);
  CHECK(c.candidates[0].log_weight == c.candidates[1].log_weight);

  auto const b = step(initial_beam({p, p}), 0.4, pi, 2);
  CHECK(b.weights(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(b.weights(1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("zero transition mass gives -inf candidates, dropped at truncation")
{
  auto const pi = TransitionMatrix::identity(2, 0);
  auto const p = GaussianConjugateState::prior(0.0, 1.0, 1.0);
  Beam b = step(initial_beam({p, p}), 0.1, pi, 4);
  REQUIRE(b.size() == 1);
  CHECK(b.hypotheses[0].last_state() == 0);
  auto const c = branch(b, 0.2, pi);
  CHECK(c.candidates[1].log_weight == -INFINITY);
  CHECK(std::isfinite(c.candidates[0].log_weight));
  auto const kept = truncate_top_s(c, 2);
  CHECK(kept.size() == 1);
  CHECK(kept.weights(0) == 1.0);
}

TEST_CASE("candidate weights match the linear-space oracle")
{
  auto const in = random_instance(3, 4, 21);
  Beam b = initial_beam(in.priors);
  b = step(b, in.obs[0], in.pi, 2);
  b = step(b, in.obs[1], in.pi, 2);
  REQUIRE(b.size() == 2);
  auto const c = branch(b, in.obs[2], in.pi);
  REQUIRE(c.candidates.size() == 6);
  for (std::size_t i = 0; i < c.candidates.size(); ++i) {
    auto const &parent = b.hypotheses[c.parent[i]];
    int const k = c.regime[i];
    auto const &g = std::get<GaussianConjugateState>(*parent.summaries[static_cast<std::size_t>(k)]);
    double const direct = b.weights(static_cast<Eigen::Index>(c.parent[i])) *
                          in.pi.rows(parent.last_state(), k) *
                          oracle::normal_pdf(in.obs[2], g.post_mean, g.post_var + g.obs_var);
    CHECK(std::exp(c.candidates[i].log_weight) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("truncation renormalises the retained weights")
{
  CandidateSet c;
  c.t = 1;
  c.candidates = {bare({0}, std::log(0.5)), bare({1}, std::log(0.3)), bare({2}, std::log(0.2))};
  c.parent = {0, 0, 0};
  c.regime = {0, 1, 2};
  auto const b = truncate_top_s(c, 2);
  REQUIRE(b.size() == 2);
  CHECK(b.weights(0) == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(b.weights(1) == doctest::Approx(0.375).epsilon(1e-15));
  auto const all = truncate_top_s(c, 10);
  CHECK(all.size() == 3);
  CHECK(all.weights(2) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK_THROWS_AS(truncate_top_s(c, 0), InvalidBudget);
}

TEST_CASE("ties at the cut keep the lexicographically smaller history")
{
  CandidateSet c;
  c.t = 2;
  c.candidates = {bare({1, 0}, std::log(0.25)), bare({0, 1}, std::log(0.25)), bare({0, 0}, std::log(0.5))};
  c.parent = {1, 0, 0};
  c.regime = {0, 1, 0};
  for (int rep = 0; rep < 3; ++rep) {
    auto const b = truncate_top_s(c, 2);
    CHECK(b.hypotheses[0].path() == std::vector<int>{0, 0});
    CHECK(b.hypotheses[1].path() == std::vector<int>{0, 1});
  }
}

TEST_CASE("full budget reproduces exhaustive enumeration")
{
  for (int k : {2, 3}) {
    std::size_t const max_t = k == 2 ? 8 : 6;
    for (std::size_t t = 1; t <= max_t; ++t) {
      auto const in = random_instance(k, t, 100 * static_cast<std::uint64_t>(k) + t);
      auto const s = static_cast<int>(power(k, t));
      auto const b = run(in, s);
      auto const e = oracle::enumerate(in.obs, in.pi, in.conj);
      REQUIRE(b.size() == e.paths.size());
      std::map<std::vector<int>, double> w;
      for (std::size_t i = 0; i < e.paths.size(); ++i)
        w[e.paths[i]] = e.weights[i];
      double worst = 0.0;
      for (std::size_t i = 0; i < b.size(); ++i)
        worst = std::max(worst, std::abs(b.weights(static_cast<Eigen::Index>(i)) - w.at(b.hypotheses[i].path())));
      CHECK(worst < 1e-10);
      auto const pred = one_step_predictive(b, in.pi);
      for (double yq : {-2.0, 0.0, 1.3})
        CHECK(std::abs(log_density(pred, yq) - std::log(oracle::predictive_density(e, in.pi, yq))) < 1e-10);
    }
  }
}

TEST_CASE("full budget agrees with the theorem-lab enumerator")
{
  auto const in = random_instance(2, 5, 77);
  auto const b = run(in, 32);
  auto const post = exact_path_posterior(in.obs, in.pi, in.priors);
  std::map<std::vector<int>, double> w;
  for (auto const &p : post.paths)
    w[p.path] = p.weight;
  for (std::size_t i = 0; i < b.size(); ++i)
    CHECK(std::abs(b.weights(static_cast<Eigen::Index>(i)) - w.at(b.hypotheses[i].path())) < 1e-10);
}

TEST_CASE("repeated observations favour the all-one-regime path")
{
  auto const pi = TransitionMatrix::sticky(2, 0.9);
  std::vector<RegimeSummary> priors{GaussianConjugateState::prior(-2.0, 1.0, 1.0),
                                    GaussianConjugateState::prior(2.0, 1.0, 1.0)};
  Beam b = initial_beam(priors);
  for (int i = 0; i < 6; ++i)
    b = step(b, 2.1, pi, 64);
  CHECK(b.hypotheses[0].path() == std::vector<int>(6, 1));
  for (Eigen::Index i = 1; i < b.weights.size(); ++i)
    CHECK(b.weights(0) >= b.weights(i));
}

TEST_CASE("relabelling regimes permutes histories only")
{
  auto const in = random_instance(3, 6, 5);
  std::vector<int> const perm{2, 0, 1};  // old label j -> new label perm[j]
  Eigen::MatrixXd rows(3, 3);
  Eigen::VectorXd init(3);
  for (int i = 0; i < 3; ++i) {
    init(perm[i]) = in.pi.initial(i);
    for (int j = 0; j < 3; ++j)
      rows(perm[i], perm[j]) = in.pi.rows(i, j);
  }
  Instance p = in;
  p.pi = TransitionMatrix(rows, init);
  for (int j = 0; j < 3; ++j)
    p.priors[static_cast<std::size_t>(perm[j])] = in.priors[static_cast<std::size_t>(j)];

  for (int s : {2, 5, 729}) {
    auto const a = run(in, s);
    auto const b = run(p, s);
    REQUIRE(a.size() == b.size());
    std::map<std::vector<int>, double> wb;
    for (std::size_t i = 0; i < b.size(); ++i)
      wb[b.hypotheses[i].path()] = b.weights(static_cast<Eigen::Index>(i));
    for (std::size_t i = 0; i < a.size(); ++i) {
      auto path = a.hypotheses[i].path();
      for (int &z : path)
        z = perm[static_cast<std::size_t>(z)];
      REQUIRE(wb.contains(path));
      CHECK(std::abs(wb[path] - a.weights(static_cast<Eigen::Index>(i))) < 1e-12);
    }
    auto const fa = one_step_predictive(a, in.pi);
    auto const fb = one_step_predictive(b, p.pi);
    for (double y : {-3.0, 0.0, 0.5, 4.0})
      CHECK(std::abs(std::exp(log_density(fa, y)) - std::exp(log_density(fb, y))) < 1e-12);
  }
}

TEST_CASE("identical inputs give bit-identical beams")
{
  auto const in = random_instance(3, 40, 8);
  auto const a = run(in, 4);
  auto const b = run(in, 4);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.hypotheses[i].path() == b.hypotheses[i].path());
    CHECK(a.hypotheses[i].log_weight == b.hypotheses[i].log_weight);
    CHECK(a.weights(static_cast<Eigen::Index>(i)) == b.weights(static_cast<Eigen::Index>(i)));
  }
}

TEST_CASE("weights stay normalised and sized min(S, K^t)")
{
  auto const in = random_instance(3, 200, 3);
  Beam b = initial_beam(in.priors);
  for (std::size_t i = 0; i < in.obs.size(); ++i) {
    b = step(b, in.obs[i], in.pi, 7);
    CHECK(std::abs(b.weights.sum() - 1.0) < 1e-10);
    CHECK(b.size() == std::min<std::size_t>(7, power(3, std::min<std::size_t>(i + 1, 5))));
    for (std::size_t s = 1; s < b.size(); ++s)
      CHECK(b.weights(static_cast<Eigen::Index>(s - 1)) >= b.weights(static_cast<Eigen::Index>(s)));
    CHECK(std::abs(one_step_predictive(b, in.pi).weights.sum() - 1.0) < 1e-10);
    CHECK_NOTHROW(b.validate());
  }
}

TEST_CASE("exactly one summary changes per branch step")
{
  auto const in = random_instance(3, 10, 12);
  Beam b = initial_beam(in.priors);
  for (double y : in.obs) {
    auto const c = branch(b, y, in.pi);
    for (std::size_t i = 0; i < c.candidates.size(); ++i) {
      auto const &parent = b.hypotheses[c.parent[i]];
      auto const &cand = c.candidates[i];
      for (int j = 0; j < 3; ++j) {
        auto const &ps = std::get<GaussianConjugateState>(*parent.summaries[static_cast<std::size_t>(j)]);
        auto const &cs = std::get<GaussianConjugateState>(*cand.summaries[static_cast<std::size_t>(j)]);
        if (j == c.regime[i])
          CHECK_FALSE(ps == cs);
        else
          CHECK(ps == cs);
      }
      CHECK(cand.length() == b.t + 1);
      CHECK(cand.history->parent == parent.history);
    }
    b = truncate_top_s(c, 3);
  }
}

namespace {

double beam_exact_mass(Instance const &in, PathPosterior const &post, int s)
{
  std::map<std::vector<int>, double> w;
  for (auto const &p : post.paths)
    w[p.path] = p.weight;
  double mass = 0.0;
  for (auto const &h : run(in, s).hypotheses)
    mass += w.at(h.path());
  return mass;
}

} // namespace

TEST_CASE("top-S retained mass grows with the budget")
{
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    auto const in = random_instance(2, 8, 400 + seed);
    auto const post = exact_path_posterior(in.obs, in.pi, in.priors);
    auto const ranked = post.ranked();
    double prev = 0.0;
    for (std::size_t s = 1; s <= ranked.size(); ++s) {
      std::span<std::size_t const> const top(ranked.data(), s);
      double const w_a = 1.0 - discarded_mass(post, top);
      CHECK(w_a >= prev - 1e-15);
      prev = w_a;
      if (s <= 8) {
        // the beam can never hold more exact mass than the top-S support
        CHECK(beam_exact_mass(in, post, static_cast<int>(s)) <= w_a + 1e-12);
      }
    }
    CHECK(beam_exact_mass(in, post, 256) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("beam retained mass can shrink when S grows")
{
  // Greedy pruning: a larger beam may keep a prefix that later loses.
  auto const in = random_instance(2, 8, 407);
  auto const post = exact_path_posterior(in.obs, in.pi, in.priors);
  CHECK(beam_exact_mass(in, post, 2) < beam_exact_mass(in, post, 1));
}

TEST_CASE("one-step predictive special cases")
{
  auto const one = initial_beam({GaussianConjugateState::prior(1.0, 2.0, 0.5)});
  auto const pi1 = TransitionMatrix::uniform(1);
  auto const m = one_step_predictive(one, pi1);
  REQUIRE(m.size() == 1);
  CHECK(m.weights(0) == 1.0);
  CHECK(m.variances(0) == 2.5);

  std::vector<RegimeSummary> sym{GaussianConjugateState::prior(-1.0, 1e-12, 1.0),
                                 GaussianConjugateState::prior(1.0, 1e-12, 1.0)};
  auto const pi2 = TransitionMatrix::uniform(2);
  auto b = step(initial_beam(sym), 0.0, pi2, 1);
  CHECK(std::abs(mixture_moments(one_step_predictive(b, pi2)).mean) < 1e-12);
}

TEST_CASE("multi-step forecasts")
{
  auto const in = random_instance(3, 12, 30);
  auto const b = run(in, 4);
  auto const f = multi_step_forecast(b, in.pi, 5);
  REQUIRE(f.size() == 5);
  auto const one = one_step_predictive(b, in.pi);
  CHECK(f[0].weights == one.weights);
  CHECK(f[0].means == one.means);
  CHECK(f[0].variances == one.variances);
  for (std::size_t h = 0; h < 5; ++h) {
    CHECK(f[h].means == one.means);  // summaries frozen
    for (std::size_t s = 0; s < b.size(); ++s) {
      auto const row = in.pi.propagate(b.hypotheses[s].last_state(), static_cast<int>(h + 1));
      for (int j = 0; j < 3; ++j)
        CHECK(f[h].weights(static_cast<Eigen::Index>(s) * 3 + j) ==
              doctest::Approx(b.weights(static_cast<Eigen::Index>(s)) * row(j)).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(multi_step_forecast(b, in.pi, 0), InvalidHorizon);

  Instance u = in;
  u.pi = TransitionMatrix::uniform(3);
  auto const bu = run(u, 3);
  for (auto const &m : multi_step_forecast(bu, u.pi, 4))
    for (std::size_t s = 0; s < bu.size(); ++s)
      for (int j = 0; j < 3; ++j)
        CHECK(m.weights(static_cast<Eigen::Index>(s) * 3 + j) ==
              doctest::Approx(bu.weights(static_cast<Eigen::Index>(s)) / 3.0).epsilon(1e-12));

  Instance id = in;
  id.pi = TransitionMatrix::identity(3, 1);
  auto const bi = run(id, 3);
  for (auto const &m : multi_step_forecast(bi, id.pi, 4))
    for (std::size_t s = 0; s < bi.size(); ++s)
      for (int j = 0; j < 3; ++j)
        CHECK((m.weights(static_cast<Eigen::Index>(s) * 3 + j) > 0.0) == (j == bi.hypotheses[s].last_state()));
}

TEST_CASE("observation and likelihood failures")
{
  auto const in = random_instance(2, 3, 1);
  auto const b = initial_beam(in.priors);
  CHECK_THROWS_AS(step(b, NAN, in.pi, 2), RejectedInput);
  CHECK_THROWS_AS(step(b, 0.0, in.pi, 0), InvalidBudget);
  std::vector<RegimeSummary> tight{GaussianConjugateState::prior(0.0, 1e-300, 1e-300),
                                   GaussianConjugateState::prior(0.0, 1e-300, 1e-300)};
  try {
    step(initial_beam(tight), 1e6, in.pi, 2);
    FAIL("expected a degenerate-likelihood error");
  } catch (DegenerateLikelihood const &e) {
    CHECK(e.time_index == 1);
  }
}
