#include "shmm/io.hpp"

#include "shmm/errors.hpp"

#include <charconv>
#include <fstream>
#include <map>

namespace shmm::io {

namespace {

std::vector<double> to_vec(Eigen::VectorXd const &v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(std::vector<double> const &v)
{
  return Eigen::Map<Eigen::VectorXd const>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace

std::string format_double(double v)
{
  char buf[64];
  auto const res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

json to_json(TransitionMatrix const &pi)
{
  json rows = json::array();
  for (Eigen::Index i = 0; i < pi.rows.rows(); ++i)
    rows.push_back(to_vec(pi.rows.row(i).transpose()));
  return {{"rows", rows}, {"initial", to_vec(pi.initial)}};
}

TransitionMatrix transition_from_json(json const &j)
{
  auto const rows = j.at("rows").get<std::vector<std::vector<double>>>();
  auto const init = j.at("initial").get<std::vector<double>>();
  auto const k = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd m(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != k)
      throw InvalidArgument("transition matrix must be square");
    for (Eigen::Index c = 0; c < k; ++c)
      m(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
  }
  return {m, from_vec(init)};
}

json to_json(KernelHyper const &h)
{
  return {{"rbf_variance", h.rbf_variance},
          {"rbf_lengthscale", h.rbf_lengthscale},
          {"per_variance", h.per_variance},
          {"per_lengthscale", h.per_lengthscale},
          {"per_period", h.per_period}};
}

KernelHyper kernel_from_json(json const &j, KernelHyper h)
{
  h.rbf_variance = j.value("rbf_variance", h.rbf_variance);
  h.rbf_lengthscale = j.value("rbf_lengthscale", h.rbf_lengthscale);
  h.per_variance = j.value("per_variance", h.per_variance);
  h.per_lengthscale = j.value("per_lengthscale", h.per_lengthscale);
  h.per_period = j.value("per_period", h.per_period);
  h.validate();
  return h;
}

json to_json(RegimeSummary const &s)
{
  if (auto const *g = std::get_if<GaussianConjugateState>(&s))
    return {{"type", "gaussian"},
            {"post_mean", g->post_mean},
            {"post_var", g->post_var},
            {"obs_var", g->obs_var},
            {"count", g->count}};
  auto const &gp = std::get<GPState>(s);
  return {{"type", "gp"},         {"inputs", gp.inputs},         {"targets", gp.targets},
          {"hyper", to_json(gp.hyper)}, {"noise_var", gp.noise_var}, {"window_cap", gp.window_cap},
          {"jitter", gp.jitter}};
}

RegimeSummary summary_from_json(json const &j)
{
  auto const type = j.at("type").get<std::string>();
  if (type == "gaussian") {
    GaussianConjugateState g;
    g.post_mean = j.at("post_mean").get<double>();
    g.post_var = j.at("post_var").get<double>();
    g.obs_var = j.at("obs_var").get<double>();
    g.count = j.at("count").get<long>();
    return g;
  }
  if (type != "gp")
    throw InvalidArgument("unknown regime summary type: " + type);
  GPState s = GPState::empty(kernel_from_json(j.at("hyper")), j.at("noise_var").get<double>(),
                             j.at("window_cap").get<std::size_t>());
  auto const inputs = j.at("inputs").get<std::vector<double>>();
  auto const targets = j.at("targets").get<std::vector<double>>();
  if (inputs.size() != targets.size())
    throw InvalidArgument("GP snapshot inputs and targets differ in length");
  s.inputs = inputs;
  s.targets = targets;
  s.jitter = j.value("jitter", 0.0);
  Eigen::LLT<Eigen::MatrixXd> llt(s.gram());
  if (llt.info() != Eigen::Success)
    throw NumericalError("GP snapshot Gram matrix is not positive definite");
  s.chol = llt.matrixL();
  Eigen::VectorXd const y = from_vec(targets);
  s.whitened = s.chol.triangularView<Eigen::Lower>().solve(y);
  return s;
}

json to_json(PredictiveMixture const &m)
{
  json comps = json::array();
  for (Eigen::Index i = 0; i < m.size(); ++i)
    comps.push_back({{"weight", m.weights(i)}, {"mean", m.means(i)}, {"variance", m.variances(i)}});
  return comps;
}

json beam_to_json(Beam const &beam)
{
  json hyps = json::array();
  for (std::size_t i = 0; i < beam.size(); ++i) {
    auto const &h = beam.hypotheses[i];
    json sums = json::array();
    for (auto const &s : h.summaries)
      sums.push_back(to_json(*s));
    hyps.push_back({{"history", h.path()},
                    {"log_weight", h.log_weight},
                    {"weight", beam.weights(static_cast<Eigen::Index>(i))},
                    {"summaries", sums}});
  }
  return {{"schema_version", kSchemaVersion}, {"kind", "beam_snapshot"}, {"t", beam.t}, {"hypotheses", hyps}};
}

Beam beam_from_json(json const &j)
{
  if (j.at("schema_version").get<int>() != kSchemaVersion || j.at("kind") != "beam_snapshot")
    throw InvalidArgument("unsupported beam snapshot");
  Beam b;
  b.t = j.at("t").get<std::size_t>();
  // rebuild shared prefixes so restored histories form a tree again
  std::map<std::vector<int>, PathPtr> nodes;
  auto node_for = [&](std::vector<int> const &hist) {
    PathPtr p;
    std::vector<int> prefix;
    for (int r : hist) {
      prefix.push_back(r);
      auto it = nodes.find(prefix);
      if (it == nodes.end())
        it = nodes.emplace(prefix, extend(p, r)).first;
      p = it->second;
    }
    return p;
  };
  auto const &hyps = j.at("hypotheses");
  b.weights.resize(static_cast<Eigen::Index>(hyps.size()));
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    auto const &h = hyps[i];
    PathHypothesis ph;
    ph.history = node_for(h.at("history").get<std::vector<int>>());
    ph.log_weight = h.at("log_weight").get<double>();
    for (auto const &s : h.at("summaries"))
      ph.summaries.push_back(std::make_shared<RegimeSummary const>(summary_from_json(s)));
    b.weights(static_cast<Eigen::Index>(i)) = h.at("weight").get<double>();
    b.hypotheses.push_back(std::move(ph));
  }
  b.validate();
  return b;
}

json to_json(StepRecord const &r)
{
  return {{"t", r.t},
          {"observation", r.observation},
          {"predictive_mean", r.predictive_mean},
          {"predictive_variance", r.predictive_variance},
          {"log_score", r.log_score},
          {"top_path_state", r.top_path_state},
          {"regime_means", r.regime_means}};
}

namespace {
// JSON has no infinity; encode as null with a flag alongside
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
} // namespace

json to_json(TruncationReport const &r)
{
  return {{"support", r.support},
          {"w_a", r.w_a},
          {"delta", r.delta},
          {"chi2_c", number_or_null(r.chi2_c)},
          {"kl_exact", number_or_null(r.kl_exact)},
          {"bound", number_or_null(r.bound)},
          {"strengthened_bound", number_or_null(r.strengthened_bound)},
          {"quadrature_error_estimate", r.quadrature_error_estimate},
          {"assumption_violated", r.assumption_violated},
          {"bound_holds", r.bound_holds},
          {"strengthened_holds", r.strengthened_holds}};
}

json to_json(SupportSweep const &s)
{
  json rows = json::array();
  for (auto const &r : s.rows)
    rows.push_back({{"support", r.support},
                    {"delta", r.delta},
                    {"chi2_c", number_or_null(r.chi2_c)},
                    {"chi2_infinite", r.chi2_infinite},
                    {"bound", number_or_null(r.bound)},
                    {"kl_exact", number_or_null(r.kl_exact)},
                    {"is_top", r.is_top}});
  return {{"rows", rows},
          {"top_delta", s.top_delta},
          {"min_delta", s.min_delta},
          {"top_attains_min_delta", s.top_attains_min_delta},
          {"top_kl", number_or_null(s.top_kl)},
          {"min_kl", number_or_null(s.min_kl)},
          {"top_minimizes_kl", s.top_minimizes_kl}};
}

json to_json(WeightProbeReport const &r)
{
  return {{"trials", r.trials},
          {"kl_renormalised", r.kl_renormalised},
          {"min_gap", r.min_gap},
          {"argmin_alpha", r.argmin_alpha},
          {"negative_findings", r.negative_findings},
          {"tolerance", r.tolerance},
          {"quadrature_error_estimate", r.quadrature_error_estimate},
          {"gaps", r.gaps}};
}

void write_dataset(std::filesystem::path const &path, json const &header, Series const &series)
{
  std::ofstream out(path);
  if (!out)
    throw Error("cannot open dataset for writing: " + path.string());
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < series.size(); ++i) {
    json rec = {{"t", i + 1},
                {"y", series.y[i]},
                {"true_regime", series.regimes[i]},
                {"t_local", series.t_local[i]}};
    out << rec.dump() << '\n';
  }
}

Dataset read_dataset(std::filesystem::path const &path)
{
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open dataset: " + path.string());
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty())
      continue;
    json j;
    try {
      j = json::parse(line);
    } catch (json::parse_error const &e) {
      throw InvalidArgument("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
    if (lineno == 1) {
      if (j.value("schema_version", 0) != kSchemaVersion)
        throw InvalidArgument("dataset schema_version mismatch");
      ds.header = std::move(j);
      continue;
    }
    ds.series.y.push_back(j.at("y").get<double>());
    ds.series.regimes.push_back(j.at("true_regime").get<int>());
    ds.series.t_local.push_back(j.at("t_local").get<double>());
  }
  if (ds.header.is_null())
    throw InvalidArgument("dataset has no header line");
  return ds;
}

} // namespace shmm::io
