#include "imap/levy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "imap/errors.hpp"
#include "imap/rng.hpp"

namespace imap {

namespace {

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

double JumpTransform::moment(int k, const JumpDistribution& law) const {
  if (k == 0) return 1.0;
  if (kappa == 0.0) return std::pow(beta, k) * law.moment(k);
  // (beta x + kappa x^3)^k = sum_r C(k,r) beta^(k-r) kappa^r x^(k+2r)
  double sum = 0.0;
  for (int r = 0; r <= k; ++r)
    sum += binomial(k, r) * std::pow(beta, k - r) * std::pow(kappa, r) * law.moment(k + 2 * r);
  return sum;
}

void RegimeLevyParams::validate(int n_states) const {
  if (mu0.size() != n_states || sigma0.size() != n_states ||
      static_cast<int>(gamma.size()) != n_states)
    throw ValidationError("levy: mu0, sigma0 and gamma need one entry per chain state");
  for (int i = 0; i < n_states; ++i) {
    if (!std::isfinite(mu0(i))) throw ValidationError("levy: non-finite drift");
    if (!(sigma0(i) >= 0.0)) throw ValidationError("levy: volatilities must be >= 0");
  }
  if (!(jump_rate >= 0.0) || !std::isfinite(jump_rate))
    throw ValidationError("levy: jump_rate must be >= 0");
}

bool RegimeLevyParams::state_independent() const {
  for (int i = 1; i < n_states(); ++i) {
    if (mu0(i) != mu0(0) || sigma0(i) != sigma0(0)) return false;
    if (!(gamma[static_cast<std::size_t>(i)] == gamma[0])) return false;
  }
  return true;
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> t(static_cast<std::size_t>(steps) + 1);
  for (int g = 0; g <= steps; ++g) t[static_cast<std::size_t>(g)] = time(g);
  return t;
}

TimeGrid make_grid(double horizon, double step) {
  if (!(step > 0.0)) throw ValidationError("grid step must be > 0");
  if (!(horizon > 0.0)) throw ValidationError("horizon must be > 0");
  const double ratio = horizon / step;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    throw ValidationError("grid step must divide the horizon");
  return TimeGrid{horizon, static_cast<int>(rounded)};
}

std::vector<double> brownian_on_grid(const TimeGrid& grid, std::uint64_t seed) {
  Engine eng = make_engine(seed);
  const auto n = static_cast<std::size_t>(grid.steps);
  std::vector<double> w(n + 1, 0.0);
  if (is_power_of_two(grid.steps)) {
    w[n] = std::sqrt(grid.horizon) * standard_normal(eng);
    for (std::size_t width = n; width > 1; width /= 2) {
      const double half_dt = grid.horizon * static_cast<double>(width / 2) / static_cast<double>(n);
      const double sd = std::sqrt(half_dt / 2.0);
      for (std::size_t left = 0; left < n; left += width) {
        const std::size_t mid = left + width / 2;
        w[mid] = 0.5 * (w[left] + w[left + width]) + sd * standard_normal(eng);
      }
    }
  } else {
    const double sd = std::sqrt(grid.step());
    for (std::size_t g = 1; g <= n; ++g) w[g] = w[g - 1] + sd * standard_normal(eng);
  }
  return w;
}

Eigen::MatrixXd occupation_on_grid(const ChainPath& chain, int n_states, const TimeGrid& grid) {
  Eigen::MatrixXd occ = Eigen::MatrixXd::Zero(n_states, grid.steps + 1);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n_states);
  std::size_t e = 0;
  double last = 0.0;
  int state = chain.states.front();
  for (int g = 1; g <= grid.steps; ++g) {
    const double t = grid.time(g);
    while (e < chain.epochs.size() && chain.epochs[e] <= t) {
      acc(state) += chain.epochs[e] - last;
      last = chain.epochs[e];
      state = chain.states[e + 1];
      ++e;
    }
    occ.col(g) = acc;
    occ(state, g) += t - last;
  }
  return occ;
}

LevyPath simulate_levy(const RegimeLevyParams& params, const ChainPath& chain,
                       double grid_step, std::uint64_t seed) {
  const int n_states = params.n_states();
  params.validate(n_states);
  if (!(grid_step > 0.0)) throw ValidationError("levy: grid step must be > 0");
  if (const auto report = moment_condition_for_small_lambda(params); !report.passed)
    throw ValidationError("levy: moment condition fails: " + report.summary());

  LevyPath path;
  path.grid = make_grid(chain.horizon, grid_step);
  path.chain_id = fingerprint(chain);
  const TimeGrid& grid = path.grid;
  const double horizon = grid.horizon;
  const auto n_grid = static_cast<std::size_t>(grid.steps) + 1;

  const std::vector<double> w_grid = brownian_on_grid(grid, stream_seed(seed, Stream::brownian));

  // compound Poisson epochs and marks
  if (params.has_jumps()) {
    Engine eng = make_engine(stream_seed(seed, Stream::levy_jumps));
    double t = 0.0;
    for (;;) {
      t += exponential(eng, params.jump_rate);
      if (t > horizon) break;
      const double mark = params.jump_law.sample(eng);
      const int state = chain.state_before(t);
      path.jumps.push_back({t, mark, params.gamma[static_cast<std::size_t>(state)](mark), state});
    }
  }

  // event epochs: chain transitions and Levy jumps, never simultaneous
  {
    std::vector<double>& ev = path.event_times;
    for (double e : chain.epochs)
      if (e <= horizon) ev.push_back(e);
    for (const auto& j : path.jumps) ev.push_back(j.time);
    std::sort(ev.begin(), ev.end());
    if (std::adjacent_find(ev.begin(), ev.end()) != ev.end())
      throw std::logic_error("levy: a Levy jump coincides with a chain epoch");
  }

  // Brownian values at event epochs by sequential bridging inside grid cells
  std::vector<double> w_event(path.event_times.size());
  {
    Engine eng = make_engine(stream_seed(seed, Stream::bridge));
    double left_t = 0.0, left_w = 0.0;
    int cell = -1;
    for (std::size_t e = 0; e < path.event_times.size(); ++e) {
      const double tau = path.event_times[e];
      int g = std::min(static_cast<int>(tau / grid.step()), grid.steps - 1);
      while (g + 1 < grid.steps && grid.time(g + 1) < tau) ++g;
      while (g > 0 && grid.time(g) > tau) --g;
      if (g != cell) {
        cell = g;
        left_t = grid.time(g);
        left_w = w_grid[static_cast<std::size_t>(g)];
      }
      const double right_t = grid.time(g + 1);
      const double right_w = w_grid[static_cast<std::size_t>(g) + 1];
      const double span = right_t - left_t;
      const double frac = span > 0.0 ? (tau - left_t) / span : 0.0;
      const double var = span > 0.0 ? (tau - left_t) * (right_t - tau) / span : 0.0;
      const double z = standard_normal(eng);
      const double w = left_w + frac * (right_w - left_w) + std::sqrt(std::max(var, 0.0)) * z;
      w_event[e] = w;
      left_t = tau;
      left_w = w;
    }
  }

  // continuous part: regime frozen on every knot interval
  path.continuous.assign(n_grid, 0.0);
  path.event_continuous.assign(path.event_times.size(), 0.0);
  path.continuous_by_state = Eigen::MatrixXd::Zero(n_states, static_cast<Eigen::Index>(n_grid));
  Eigen::VectorXd by_state = Eigen::VectorXd::Zero(n_states);
  {
    double t = 0.0, w = 0.0, c = 0.0;
    int state = chain.states.front();
    std::size_t e = 0, epoch = 0;
    auto advance = [&](double t_next, double w_next) {
      const double dc = params.mu0(state) * (t_next - t) + params.sigma0(state) * (w_next - w);
      c += dc;
      by_state(state) += dc;
      t = t_next;
      w = w_next;
      while (epoch < chain.epochs.size() && chain.epochs[epoch] <= t) {
        state = chain.states[epoch + 1];
        ++epoch;
      }
    };
    for (int g = 1; g <= grid.steps; ++g) {
      const double tg = grid.time(g);
      while (e < path.event_times.size() && path.event_times[e] <= tg) {
        advance(path.event_times[e], w_event[e]);
        path.event_continuous[e] = c;
        ++e;
      }
      advance(tg, w_grid[static_cast<std::size_t>(g)]);
      path.continuous[static_cast<std::size_t>(g)] = c;
      path.continuous_by_state.col(g) = by_state;
    }
  }

  path.gamma_jump_integral.assign(n_grid, 0.0);
  path.values.assign(n_grid, 0.0);
  {
    double gamma_sum = 0.0;
    std::size_t j = 0;
    for (std::size_t g = 0; g < n_grid; ++g) {
      const double tg = grid.time(static_cast<int>(g));
      while (j < path.jumps.size() && path.jumps[j].time <= tg) gamma_sum += path.jumps[j++].applied;
      path.gamma_jump_integral[g] = gamma_sum;
      path.values[g] = path.continuous[g] + gamma_sum;
    }
  }
  return path;
}

double power_compensator_rate(const RegimeLevyParams& params, int i, int k) {
  const double jumps = params.jump_moment_density(i, k);
  return k == 1 ? params.mu0(i) + jumps : jumps;
}

PowerJumpFamily power_jump_family(const LevyPath& path, const RegimeLevyParams& params,
                                  const ChainPath& chain, int max_order) {
  if (max_order < 1) throw ValidationError("levy: max order K must be >= 1");
  const int n_states = params.n_states();
  const TimeGrid& grid = path.grid;
  const auto n_grid = static_cast<std::size_t>(grid.steps) + 1;
  const Eigen::MatrixXd occ = occupation_on_grid(chain, n_states, grid);

  PowerJumpFamily fam;
  fam.max_order = max_order;
  fam.raw.assign(static_cast<std::size_t>(max_order), std::vector<double>(n_grid, 0.0));
  fam.compensator = fam.raw;
  fam.martingale = fam.raw;

  for (int k = 1; k <= max_order; ++k) {
    const auto ki = static_cast<std::size_t>(k - 1);
    Eigen::VectorXd rate(n_states);
    for (int i = 0; i < n_states; ++i) rate(i) = power_compensator_rate(params, i, k);
    double sum = 0.0;
    std::size_t j = 0;
    for (std::size_t g = 0; g < n_grid; ++g) {
      const double tg = grid.time(static_cast<int>(g));
      if (k == 1) {
        fam.raw[ki][g] = path.values[g];
      } else {
        while (j < path.jumps.size() && path.jumps[j].time <= tg)
          sum += std::pow(path.jumps[j++].applied, k);
        fam.raw[ki][g] = sum;
      }
      fam.compensator[ki][g] = occ.col(static_cast<Eigen::Index>(g)).dot(rate);
      fam.martingale[ki][g] = fam.raw[ki][g] - fam.compensator[ki][g];
    }
  }
  return fam;
}

std::string MomentReport::summary() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& e : entries) {
    if (e.ok) continue;
    if (!first) os << "; ";
    os << e.subject << " state " << e.state + 1 << ": " << e.detail;
    first = false;
  }
  if (first) os << "all exponential moments finite";
  return os.str();
}

MomentReport check_moment_condition(const RegimeLevyParams& params, double lambda_probe,
                                    double eps_probe,
                                    const std::vector<JumpDistribution>* impulse_laws) {
  MomentReport report;
  for (int i = 0; i < params.n_states(); ++i) {
    const auto& gamma = params.gamma[static_cast<std::size_t>(i)];
    MomentCheckEntry entry{"levy", i, true, "ok"};
    if (params.has_jumps() && params.jump_law.support_radius() >= eps_probe) {
      // |beta x + kappa x^3| grows like |kappa| |x|^3 or |beta| |x|
      const int degree = gamma.degree();
      const double coef = degree == 3 ? std::abs(gamma.kappa) : std::abs(gamma.beta);
      entry.ok = params.jump_law.exponential_moment_finite(lambda_probe * coef, degree);
      if (!entry.ok) {
        std::ostringstream os;
        os << "exp(" << lambda_probe << "|gamma(x)|) not integrable under "
           << params.jump_law.name() << " (gamma degree " << degree << ")";
        entry.detail = os.str();
      }
    }
    report.passed = report.passed && entry.ok;
    report.entries.push_back(entry);
  }
  if (impulse_laws != nullptr) {
    for (std::size_t i = 0; i < impulse_laws->size(); ++i) {
      const auto& law = (*impulse_laws)[i];
      MomentCheckEntry entry{"impulse", static_cast<int>(i), true, "ok"};
      if (law.support_radius() >= eps_probe) {
        entry.ok = law.exponential_moment_finite(lambda_probe, 1);
        if (!entry.ok)
          entry.detail = "E exp(lambda |U|) infinite for " + law.name();
      }
      report.passed = report.passed && entry.ok;
      report.entries.push_back(entry);
    }
  }
  return report;
}

MomentReport moment_condition_for_small_lambda(const RegimeLevyParams& params,
                                               const std::vector<JumpDistribution>* impulse_laws) {
  return check_moment_condition(params, 1e-6, 1e-12, impulse_laws);
}

}  // namespace imap
