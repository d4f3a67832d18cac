#include "imap/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "imap/errors.hpp"
#include "imap/rng.hpp"

namespace imap {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string("config: ") + what + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

json transform_to_json(const JumpTransform& t) {
  switch (t.kind) {
    case JumpTransform::Kind::identity:
      return {{"type", "identity"}};
    case JumpTransform::Kind::linear:
      return {{"type", "linear"}, {"beta", t.beta}};
    case JumpTransform::Kind::affine_odd:
      return {{"type", "affine_odd"}, {"beta", t.beta}, {"kappa", t.kappa}};
  }
  return {};
}

JumpTransform transform_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "identity") return JumpTransform::identity();
  if (type == "linear") return JumpTransform::linear(j.at("beta").get<double>());
  if (type == "affine_odd")
    return JumpTransform::affine_odd(j.at("beta").get<double>(), j.at("kappa").get<double>());
  throw ValidationError("config: unknown jump transform '" + type + "'");
}

// A single object applies to every state; an array gives one entry per state.
template <class T, class F>
std::vector<T> per_state(const json& j, int n, F parse, const char* what) {
  std::vector<T> out;
  if (j.is_array()) {
    if (static_cast<int>(j.size()) != n)
      throw ValidationError(std::string("config: ") + what + " needs one entry per state");
    for (const auto& e : j) out.push_back(parse(e));
  } else {
    out.assign(static_cast<std::size_t>(n), parse(j));
  }
  return out;
}

}  // namespace

json distribution_to_json(const JumpDistribution& d) {
  return std::visit(
      overloaded{
          [](const PointMass& p) -> json { return {{"type", "point_mass"}, {"value", p.value}}; },
          [](const TwoPoint& p) -> json {
            return {{"type", "two_point"}, {"first", p.first}, {"second", p.second}, {"p_first", p.p_first}};
          },
          [](const Gaussian& p) -> json {
            return {{"type", "gaussian"}, {"mean", p.mean}, {"stddev", p.stddev}};
          },
          [](const Uniform& p) -> json {
            return {{"type", "uniform"}, {"lower", p.lower}, {"upper", p.upper}};
          },
          [](const DoubleExponential& p) -> json {
            return {{"type", "double_exponential"}, {"p_up", p.p_up}, {"eta_up", p.eta_up},
                    {"eta_down", p.eta_down}};
          },
      },
      d.law());
}

JumpDistribution distribution_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "point_mass") return JumpDistribution::Law(PointMass{j.at("value").get<double>()});
  if (type == "two_point")
    return JumpDistribution::Law(TwoPoint{j.at("first").get<double>(), j.at("second").get<double>(),
                    j.value("p_first", 0.5)});
  if (type == "gaussian") return JumpDistribution::Law(Gaussian{j.value("mean", 0.0), j.value("stddev", 1.0)});
  if (type == "uniform") return JumpDistribution::Law(Uniform{j.at("lower").get<double>(), j.at("upper").get<double>()});
  if (type == "double_exponential")
    return JumpDistribution::Law(DoubleExponential{j.at("p_up").get<double>(), j.at("eta_up").get<double>(),
                             j.at("eta_down").get<double>()});
  throw ValidationError("config: unknown distribution '" + type + "'");
}

int ScenarioConfig::report_stride() const {
  const TimeGrid g = grid();
  if (report_steps < 1 || g.steps % report_steps != 0)
    throw ValidationError("config: report_steps must divide the number of grid steps");
  return g.steps / report_steps;
}

void ScenarioConfig::validate() const {
  chain.validate();
  const int n = n_states();
  levy.validate(n);
  impulse.validate(n);
  if (!(horizon > 0.0)) throw ValidationError("config: horizon must be > 0");
  (void)report_stride();
  if (max_power_order < 1) throw ValidationError("config: K must be >= 1");
  if (max_impulse_order < 0) throw ValidationError("config: L must be >= 0");
  if (max_impulse_order > impulse.max_moment_order)
    throw ValidationError("config: L exceeds the impulse moment order");
  if (2 * max_impulse_order > impulse.max_moment_order)
    throw ValidationError("config: impulse Gram needs moments up to 2L; raise max_moment_order");
  if (estimation_paths < 1000 || evaluation_paths < 1000)
    throw ValidationError("config: path counts must be >= 1000");
  if (!(pivot_tol > 0.0)) throw ValidationError("config: pivot_tol must be > 0");
  if (const auto r = moment_condition_for_small_lambda(levy, &impulse.laws); !r.passed)
    throw ValidationError("config: moment condition fails: " + r.summary());
}

json ScenarioConfig::to_json() const {
  json j;
  json q = json::array();
  for (Eigen::Index i = 0; i < chain.intensities.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < chain.intensities.cols(); ++k) row.push_back(chain.intensities(i, k));
    q.push_back(row);
  }
  j["chain"] = {{"intensities", q}, {"initial_dist", vector_to_json(chain.initial_dist)}};
  json gamma = json::array();
  for (const auto& g : levy.gamma) gamma.push_back(transform_to_json(g));
  j["levy"] = {{"mu0", vector_to_json(levy.mu0)},
               {"sigma0", vector_to_json(levy.sigma0)},
               {"gamma", gamma},
               {"jump_rate", levy.jump_rate},
               {"jump_law", distribution_to_json(levy.jump_law)}};
  json laws = json::array();
  for (const auto& l : impulse.laws) laws.push_back(distribution_to_json(l));
  j["impulse"] = {{"laws", laws}, {"max_moment_order", impulse.max_moment_order}};
  j["horizon"] = horizon;
  j["grid_step"] = grid_step;
  j["report_steps"] = report_steps;
  j["truncation"] = {{"K", max_power_order}, {"L", max_impulse_order}};
  j["paths"] = {{"estimation", estimation_paths}, {"evaluation", evaluation_paths}};
  j["seed"] = seed;
  j["pivot_tol"] = pivot_tol;
  j["output"] = {{"directory", output.directory}, {"max_persisted_paths", output.max_persisted_paths}};
  return j;
}

ScenarioConfig ScenarioConfig::from_json(const json& j) {
  try {
    ScenarioConfig c;
    const auto& jc = j.at("chain");
    const auto& q = jc.at("intensities");
    const auto n = static_cast<Eigen::Index>(q.size());
    c.chain.intensities.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (static_cast<Eigen::Index>(q[static_cast<std::size_t>(i)].size()) != n)
        throw ValidationError("config: intensity matrix must be square");
      for (Eigen::Index k = 0; k < n; ++k)
        c.chain.intensities(i, k) = q[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
    }
    if (jc.contains("initial_dist"))
      c.chain.initial_dist = vector_from_json(jc.at("initial_dist"), "initial_dist");
    else
      c.chain.initial_dist = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));

    const int ns = static_cast<int>(n);
    const auto& jl = j.at("levy");
    c.levy.mu0 = vector_from_json(jl.at("mu0"), "mu0");
    c.levy.sigma0 = vector_from_json(jl.at("sigma0"), "sigma0");
    c.levy.gamma = per_state<JumpTransform>(jl.value("gamma", json{{"type", "identity"}}), ns,
                                            transform_from_json, "gamma");
    c.levy.jump_rate = jl.value("jump_rate", 0.0);
    c.levy.jump_law = jl.contains("jump_law") ? distribution_from_json(jl.at("jump_law"))
                                              : JumpDistribution(JumpDistribution::Law(PointMass{0.0}));

    const auto& ji = j.at("impulse");
    c.impulse.laws = per_state<JumpDistribution>(ji.at("laws"), ns, distribution_from_json, "impulse laws");
    c.impulse.max_moment_order = ji.value("max_moment_order", 8);

    c.horizon = j.value("horizon", 1.0);
    c.grid_step = j.value("grid_step", 1.0 / 1024.0);
    c.report_steps = j.value("report_steps", 8);
    if (j.contains("truncation")) {
      c.max_power_order = j["truncation"].value("K", 3);
      c.max_impulse_order = j["truncation"].value("L", 3);
    }
    if (j.contains("paths")) {
      c.estimation_paths = j["paths"].value("estimation", 100000);
      c.evaluation_paths = j["paths"].value("evaluation", 100000);
    }
    c.seed = j.value("seed", std::uint64_t{20240601});
    c.pivot_tol = j.value("pivot_tol", 1e-10);
    if (j.contains("output")) {
      c.output.directory = j["output"].value("directory", std::string("out"));
      c.output.max_persisted_paths = j["output"].value("max_persisted_paths", 1000);
    }
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config: " + path + ": " + e.what());
  }
  return from_json(j);
}

std::string ScenarioConfig::hash() const {
  json j = to_json();
  j.erase("output");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a, then mixed
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(mix64(h)));
  return buf;
}

ScenarioConfig ScenarioConfig::canonical() {
  ScenarioConfig c;
  c.chain.intensities.resize(2, 2);
  c.chain.intensities << -1.0, 1.0, 1.0, -1.0;
  c.chain.initial_dist = Eigen::Vector2d(0.5, 0.5);
  c.levy.mu0 = Eigen::Vector2d(0.0, 0.0);
  c.levy.sigma0 = Eigen::Vector2d(1.0, 1.0);
  c.levy.gamma = {JumpTransform::identity(), JumpTransform::identity()};
  c.levy.jump_rate = 1.0;
  c.levy.jump_law = JumpDistribution::Law(TwoPoint{-1.0, 1.0, 0.5});
  c.impulse.laws.assign(2, JumpDistribution::Law(TwoPoint{-1.0, 1.0, 0.5}));
  c.impulse.max_moment_order = 8;
  return c;
}

}  // namespace imap
