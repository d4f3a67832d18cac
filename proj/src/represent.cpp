#include "imap/represent.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

#include "imap/chain.hpp"
#include "imap/errors.hpp"
#include "imap/impulse.hpp"
#include "imap/levy.hpp"
#include "imap/rng.hpp"

namespace imap {

namespace {

double ipow(double x, int n) {
  double r = 1.0;
  for (int k = 0; k < n; ++k) r *= x;
  return r;
}

double binom(int n, int k) {
  static constexpr std::array<std::array<double, 5>, 5> table{{
      {1, 0, 0, 0, 0},
      {1, 1, 0, 0, 0},
      {1, 2, 1, 0, 0},
      {1, 3, 3, 1, 0},
      {1, 4, 6, 4, 1},
  }};
  return table[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)];
}

std::string state_name(int i) { return std::to_string(i + 1); }

struct LeastSquares {
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;  // heteroskedasticity-robust, zero rows for dropped columns
  std::vector<int> dropped;
  double condition = 1.0;
};

// Normal equations on unit-scaled columns, factored in column order. A
// column whose residual squared norm falls to drop_tol is dropped and gets a
// zero coefficient, so earlier columns always win.
LeastSquares least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, double drop_tol,
                           bool want_cov = false) {
  const Eigen::Index r = a.cols();
  Eigen::MatrixXd gram = a.transpose() * a;
  Eigen::VectorXd rhs = a.transpose() * y;
  Eigen::VectorXd scale(r);
  for (Eigen::Index k = 0; k < r; ++k) scale(k) = std::sqrt(gram(k, k));

  LeastSquares out;
  out.beta = Eigen::VectorXd::Zero(r);
  std::vector<Eigen::Index> kept;
  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(r, r);  // rows/cols indexed by position in kept
  for (Eigen::Index k = 0; k < r; ++k) {
    if (!(scale(k) > 0.0)) {
      out.dropped.push_back(static_cast<int>(k));
      continue;
    }
    const auto m = static_cast<Eigen::Index>(kept.size());
    Eigen::VectorXd w(m);
    for (Eigen::Index q = 0; q < m; ++q) {
      double v = gram(kept[static_cast<std::size_t>(q)], k) / (scale(kept[static_cast<std::size_t>(q)]) * scale(k));
      for (Eigen::Index s = 0; s < q; ++s) v -= chol(q, s) * w(s);
      w(q) = v / chol(q, q);
    }
    const double resid = 1.0 - w.squaredNorm();
    if (resid <= drop_tol) {
      out.dropped.push_back(static_cast<int>(k));
      continue;
    }
    chol.row(m).head(m) = w.transpose();
    chol(m, m) = std::sqrt(resid);
    kept.push_back(k);
  }
  const auto m = static_cast<Eigen::Index>(kept.size());
  if (m == 0) return out;
  Eigen::VectorXd c(m);
  Eigen::MatrixXd normed(m, m);
  for (Eigen::Index q = 0; q < m; ++q) {
    const auto kq = kept[static_cast<std::size_t>(q)];
    c(q) = rhs(kq) / scale(kq);
    for (Eigen::Index s = 0; s < m; ++s) {
      const auto ks = kept[static_cast<std::size_t>(s)];
      normed(q, s) = gram(kq, ks) / (scale(kq) * scale(ks));
    }
  }
  const Eigen::MatrixXd l = chol.topLeftCorner(m, m);
  const Eigen::VectorXd z = l.triangularView<Eigen::Lower>().solve(c);
  const Eigen::VectorXd bt = l.transpose().triangularView<Eigen::Upper>().solve(z);
  for (Eigen::Index q = 0; q < m; ++q) out.beta(kept[static_cast<std::size_t>(q)]) = bt(q) / scale(kept[static_cast<std::size_t>(q)]);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(normed, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  out.condition = lo > 0.0 ? std::sqrt(hi / lo) : HUGE_VAL;

  if (want_cov) {
    Eigen::MatrixXd ak(a.rows(), m);
    for (Eigen::Index q = 0; q < m; ++q) ak.col(q) = a.col(kept[static_cast<std::size_t>(q)]) / scale(kept[static_cast<std::size_t>(q)]);
    const Eigen::VectorXd resid = y - a * out.beta;
    const Eigen::MatrixXd weighted = ak.array().colwise() * resid.array();
    const Eigen::MatrixXd meat = weighted.transpose() * weighted;
    const Eigen::MatrixXd linv = l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(m, m));
    const Eigen::MatrixXd bread = linv.transpose() * linv;
    const Eigen::MatrixXd cov = bread * meat * bread;
    out.cov = Eigen::MatrixXd::Zero(a.cols(), a.cols());
    for (Eigen::Index q = 0; q < m; ++q)
      for (Eigen::Index s = 0; s < m; ++s) {
        const auto kq = kept[static_cast<std::size_t>(q)], ks = kept[static_cast<std::size_t>(s)];
        out.cov(kq, ks) = cov(q, s) / (scale(kq) * scale(ks));
      }
  }
  return out;
}

// Feature set of the time-t state.
struct Features {
  std::vector<std::string> names;
  std::function<void(int, int, double*)> fill;
};

Features make_features(const PathBundle& b) {
  Features f;
  const int n = b.n_states();
  const bool chain = b.has_chain();
  f.names.push_back("1");
  if (chain)
    for (int i = 1; i < n; ++i) f.names.push_back("J=" + state_name(i));
  f.names.insert(f.names.end(), {"Xbar", "Xbar^2", "Xbar^3"});
  if (chain) {
    for (int j = 0; j < n; ++j) f.names.push_back("Phibar_" + state_name(j));
    for (int i = 0; i < n; ++i) f.names.push_back("Psibar_" + state_name(i) + "^1");
  }
  const PathBundle* pb = &b;
  f.fill = [pb, n, chain](int p, int t, double* out) {
    std::size_t k = 0;
    out[k++] = 1.0;
    if (chain) {
      const int s = pb->state(p, t);
      for (int i = 1; i < n; ++i) out[k++] = s == i ? 1.0 : 0.0;
    }
    const double x = pb->xbar(p, t);
    out[k++] = x;
    out[k++] = x * x;
    out[k++] = x * x * x;
    if (chain) {
      for (int j = 0; j < n; ++j) out[k++] = pb->phi_bar(p, t, j);
      for (int i = 0; i < n; ++i) out[k++] = pb->psi_bar(p, t, i, 1);
    }
  };
  return f;
}

std::vector<ProcessView> make_integrators(const PathBundle& b, int K, int L, RepresentationEstimate::Form form) {
  std::vector<ProcessView> out;
  const PathBundle* pb = &b;
  const int n = b.n_states();
  const bool x_form = form == RepresentationEstimate::Form::x && b.has_chain();
  if (x_form)
    out.push_back({"X", [pb, n](int p, int t) {
                     double v = pb->teugels(p, t, 1);
                     for (int i = 0; i < n; ++i) v += pb->psi_bar(p, t, i, 1);
                     return v;
                   }});
  else
    out.push_back({"Xbar^1", [pb](int p, int t) { return pb->teugels(p, t, 1); }});
  for (int k = 2; k <= std::min(K, b.power_orders()); ++k)
    out.push_back({"Xbar^" + std::to_string(k), [pb, k](int p, int t) { return pb->teugels(p, t, k); }});
  if (b.has_chain()) {
    for (int j = 0; j < n; ++j)
      out.push_back({"Phibar_" + state_name(j), [pb, j](int p, int t) { return pb->phi_bar(p, t, j); }});
    for (int i = 0; i < n; ++i)
      for (int l = 1; l <= L; ++l)
        out.push_back({"Psibar_" + state_name(i) + "^" + std::to_string(l),
                       [pb, i, l](int p, int t) { return pb->psi_bar(p, t, i, l); }});
  }
  return out;
}

}  // namespace

PayoffSpec PayoffSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  int state = 0;
  if (colon != std::string::npos) {
    try {
      state = std::stoi(text.substr(colon + 1)) - 1;
    } catch (const std::exception&) {
      throw ValidationError("represent: bad payoff state in '" + text + "'");
    }
  }
  if (head == "linear") return linear();
  if (head == "square") return square();
  if (head == "count") return count(state);
  if (head == "impulse") return impulse(state);
  if (head == "indicator") return indicator(state);
  if (head == "zero") return polynomial({});
  throw ValidationError("represent: unknown payoff '" + text + "'");
}

void PayoffSpec::validate(const PathBundle& b) const {
  const int n = b.n_states();
  auto need_state = [&](int s) {
    if (s < 0 || s >= n) throw ValidationError("represent: payoff state out of range");
  };
  switch (kind) {
    case Kind::terminal_linear:
    case Kind::terminal_square:
      return;
    case Kind::terminal_count:
    case Kind::indicator:
      need_state(state);
      return;
    case Kind::terminal_impulse:
      need_state(state);
      if (b.impulse_orders() < 1) throw ValidationError("represent: payoff needs impulse columns");
      return;
    case Kind::polynomial:
      for (const auto& m : terms) {
        if (m.g < 0 || m.p < 0 || m.b < 0 || m.g + m.p + m.b > 4)
          throw ValidationError("represent: polynomial payoff terms must have degree <= 4");
        need_state(m.i);
        need_state(m.j);
        if (m.b > 0 && b.impulse_orders() < 1) throw ValidationError("represent: payoff needs impulse columns");
      }
      return;
  }
}

double PayoffSpec::evaluate(const PathBundle& b, int p) const {
  const int t = b.n_times() - 1;
  switch (kind) {
    case Kind::terminal_linear:
      return b.x_full(p, t);
    case Kind::terminal_square: {
      const double x = b.xbar(p, t);
      return x * x;
    }
    case Kind::terminal_count:
      return b.phi_bar(p, t, state);
    case Kind::terminal_impulse:
      return b.psi_bar(p, t, state, 1);
    case Kind::indicator:
      return b.state(p, t) == state ? 1.0 : 0.0;
    case Kind::polynomial: {
      double s = 0.0;
      for (const auto& m : terms)
        s += m.coeff * ipow(b.xbar(p, t), m.g) * ipow(b.phi_bar(p, t, m.j), m.p) * ipow(b.psi_bar(p, t, m.i, 1), m.b);
      return s;
    }
  }
  return 0.0;
}

std::string PayoffSpec::name() const {
  switch (kind) {
    case Kind::terminal_linear:
      return "X(T)";
    case Kind::terminal_square:
      return "Xbar(T)^2";
    case Kind::terminal_count:
      return "Phibar_" + state_name(state) + "(T)";
    case Kind::terminal_impulse:
      return "Psibar_" + state_name(state) + "^1(T)";
    case Kind::indicator:
      return "1{J(T)=" + state_name(state) + "}";
    case Kind::polynomial: {
      if (terms.empty()) return "0";
      std::ostringstream os;
      for (std::size_t k = 0; k < terms.size(); ++k) {
        const auto& m = terms[k];
        os << (k ? " + " : "") << m.coeff;
        if (m.g) os << "*Xbar^" << m.g;
        if (m.p) os << "*Phibar_" << m.j + 1 << "^" << m.p;
        if (m.b) os << "*Psibar_" << m.i + 1 << "^" << m.b;
      }
      return os.str();
    }
  }
  return "?";
}

std::pair<double, double> relative_l2_error(const std::vector<double>& f, const std::vector<double>& g) {
  const auto n = static_cast<double>(f.size());
  if (f.size() != g.size() || f.empty()) throw ValidationError("represent: error vectors differ in length");
  double a = 0.0, c = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) {
    const double d = f[p] - g[p];
    a += d * d;
    c += f[p] * f[p];
  }
  a /= n;
  c /= n;
  if (c == 0.0) {
    if (a == 0.0) return {0.0, 0.0};
    double vu = 0.0;
    for (std::size_t p = 0; p < f.size(); ++p) {
      const double d = f[p] - g[p];
      vu += (d * d - a) * (d * d - a);
    }
    vu /= (n - 1.0);
    return {std::sqrt(a), std::sqrt(vu / n) / (2.0 * std::sqrt(a))};
  }
  const double r = a / c;
  double vu = 0.0, vv = 0.0, cuv = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) {
    const double d = f[p] - g[p];
    const double u = d * d - a, v = f[p] * f[p] - c;
    vu += u * u;
    vv += v * v;
    cuv += u * v;
  }
  const double var_r = std::max((vu - 2.0 * r * cuv + r * r * vv) / (n - 1.0), 0.0) / (n * c * c);
  const double e = std::sqrt(r);
  return {e, e > 0.0 ? std::sqrt(var_r) / (2.0 * e) : 0.0};
}

namespace {

std::vector<int> resolve_edges(const PathBundle& b, const std::vector<int>& edges) {
  const int last = b.n_times() - 1;
  if (edges.empty()) {
    std::vector<int> all(static_cast<std::size_t>(last) + 1);
    for (int t = 0; t <= last; ++t) all[static_cast<std::size_t>(t)] = t;
    return all;
  }
  if (edges.size() < 2 || edges.front() != 0 || edges.back() != last)
    throw ValidationError("represent: bucket edges must start at 0 and end at the horizon");
  for (std::size_t k = 1; k < edges.size(); ++k)
    if (edges[k] <= edges[k - 1]) throw ValidationError("represent: bucket edges must increase");
  return edges;
}

void summarize(RepresentationEstimate& e) {
  const auto buckets = e.integrand_coefficients.size();
  e.integrand_mean.assign(buckets, {});
  e.integrand_stderr.assign(buckets, {});
  for (std::size_t b = 0; b < buckets; ++b) {
    const auto& beta = e.integrand_coefficients[b];
    const auto ni = beta.cols();
    for (Eigen::Index m = 0; m < ni; ++m) {
      e.integrand_mean[b].push_back(beta.col(m).dot(e.feature_mean[b]));
      Eigen::VectorXd c = Eigen::VectorXd::Zero(beta.size());
      for (Eigen::Index q = 0; q < beta.rows(); ++q) c(q * ni + m) = e.feature_mean[b](q);
      e.integrand_stderr[b].push_back(std::sqrt(std::max(c.dot(e.coefficient_cov[b] * c), 0.0)));
    }
  }
}

}  // namespace

std::string RepresentationEstimate::table() const {
  std::ostringstream os;
  os << "bucket,basis_element,integrand_estimate,stderr\n";
  char buf[96];
  for (std::size_t b = 0; b < integrand_mean.size(); ++b)
    for (std::size_t m = 0; m < integrators.size(); ++m) {
      std::snprintf(buf, sizeof buf, ",%.10g,%.4g\n", integrand_mean[b][m], integrand_stderr[b][m]);
      os << b << ',' << integrators[m] << buf;
    }
  return os.str();
}

namespace {

Eigen::MatrixXd feature_matrix(const PathBundle& b, const Features& f, int t) {
  const auto nf = static_cast<Eigen::Index>(f.names.size());
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(b.n_paths(), nf);
  for (int p = 0; p < b.n_paths(); ++p) f.fill(p, t, m.row(p).data());
  return m;
}

Eigen::MatrixXd integrator_matrix(const PathBundle& b, const std::vector<ProcessView>& ints, int t) {
  Eigen::MatrixXd m(b.n_paths(), static_cast<Eigen::Index>(ints.size()));
  for (std::size_t k = 0; k < ints.size(); ++k)
    for (int p = 0; p < b.n_paths(); ++p) m(p, static_cast<Eigen::Index>(k)) = ints[k].value(p, t);
  return m;
}

// Row p of the result is sum_m (features(p) beta)_m dz(p, m).
Eigen::VectorXd integral_increment(const Eigen::MatrixXd& feats, const Eigen::MatrixXd& beta,
                                   const Eigen::MatrixXd& dz) {
  const Eigen::MatrixXd h = feats * beta;
  return h.cwiseProduct(dz).rowwise().sum();
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

RepresentationEstimate estimate_predictable_representation(const PathBundle& bundle, const PayoffSpec& payoff,
                                                           int K, int L, const RepresentOptions& opt) {
  payoff.validate(bundle);
  const ScenarioConfig& cfg = bundle.config();
  if (K < 1 || K > cfg.max_power_order) throw ValidationError("represent: K must lie in [1, configured K]");
  if (L < 0 || (bundle.has_chain() && L > bundle.impulse_orders()))
    throw ValidationError("represent: L must lie in [0, configured L]");
  if (opt.feature_shift < 0) throw ValidationError("represent: feature shift must be >= 0");

  RepresentationEstimate e;
  e.payoff = payoff.name();
  e.config_hash = cfg.hash();
  e.paths = {bundle.path_set().seed, bundle.path_set().first_path, bundle.n_paths()};
  e.K = K;
  e.L = bundle.has_chain() ? L : 0;
  e.feature_shift = opt.feature_shift;
  e.edges = resolve_edges(bundle, opt.edges);

  const Features feats = make_features(bundle);
  const auto ints = make_integrators(bundle, K, e.L, RepresentationEstimate::Form::xbar);
  e.features = feats.names;
  for (const auto& v : ints) e.integrators.push_back(v.name);
  const auto nf = static_cast<Eigen::Index>(feats.names.size());
  const auto ni = static_cast<Eigen::Index>(ints.size());
  const int n = bundle.n_paths();
  if (n < 10 * nf * ni)
    throw ValidationError("represent: " + std::to_string(n) + " paths for " + std::to_string(nf * ni) +
                          " regressors per bucket; need at least ten per regressor");

  Eigen::VectorXd f(n);
  for (int p = 0; p < n; ++p) f(p) = payoff.evaluate(bundle, p);

  const int buckets = static_cast<int>(e.edges.size()) - 1;
  auto fit_m = [&](const Eigen::MatrixXd& x) {
    const LeastSquares ls = least_squares(x, f, opt.drop_tol);
    e.m_coefficients.push_back(ls.beta);
    return Eigen::VectorXd(x * ls.beta);
  };

  Eigen::MatrixXd x_cur = feature_matrix(bundle, feats, e.edges[0]);
  Eigen::VectorXd m_cur = fit_m(x_cur);
  Eigen::VectorXd f_hat = m_cur;
  Eigen::MatrixXd z_cur = integrator_matrix(bundle, ints, e.edges[0]);
  for (int b = 0; b < buckets; ++b) {
    const int t_next = e.edges[static_cast<std::size_t>(b) + 1];
    Eigen::MatrixXd x_next;
    Eigen::VectorXd m_next;
    if (b + 1 < buckets) {
      x_next = feature_matrix(bundle, feats, t_next);
      m_next = fit_m(x_next);
    } else {
      m_next = f;
    }
    const Eigen::MatrixXd z_next = integrator_matrix(bundle, ints, t_next);
    const Eigen::MatrixXd dz = z_next - z_cur;
    const int t_feat = e.edges[static_cast<std::size_t>(std::min(b + opt.feature_shift, buckets))];
    const Eigen::MatrixXd x_feat = opt.feature_shift == 0 ? x_cur : feature_matrix(bundle, feats, t_feat);

    Eigen::MatrixXd reg(n, nf * ni);
    for (Eigen::Index q = 0; q < nf; ++q)
      for (Eigen::Index m = 0; m < ni; ++m) reg.col(q * ni + m) = x_feat.col(q).cwiseProduct(dz.col(m));
    const LeastSquares ls = least_squares(reg, m_next - m_cur, opt.drop_tol, true);
    Eigen::MatrixXd beta(nf, ni);
    for (Eigen::Index q = 0; q < nf; ++q)
      for (Eigen::Index m = 0; m < ni; ++m) beta(q, m) = ls.beta(q * ni + m);
    std::vector<std::string> dropped;
    for (int d : ls.dropped)
      dropped.push_back(feats.names[static_cast<std::size_t>(d / ni)] + "*d" + e.integrators[static_cast<std::size_t>(d % ni)]);
    e.dropped.push_back(std::move(dropped));
    e.condition_numbers.push_back(ls.condition);
    e.integrand_coefficients.push_back(beta);

    e.coefficient_cov.push_back(ls.cov);
    e.feature_mean.push_back(x_feat.colwise().mean().transpose());

    f_hat += integral_increment(x_feat, beta, dz);
    x_cur = std::move(x_next);
    m_cur = std::move(m_next);
    z_cur = z_next;
  }
  const auto [res, se] = relative_l2_error(to_std(f), to_std(f_hat));
  e.residual = res;
  e.residual_stderr = se;
  summarize(e);
  return e;
}

std::vector<double> integrand_path_values(const RepresentationEstimate& e, const PathBundle& bundle, int bucket,
                                          int slot) {
  if (bucket < 0 || bucket >= static_cast<int>(e.integrand_coefficients.size()) || slot < 0 ||
      slot >= static_cast<int>(e.integrators.size()))
    throw ValidationError("represent: bucket or integrator index out of range");
  const Features feats = make_features(bundle);
  if (feats.names != e.features) throw ValidationError("represent: bundle layout does not match the estimate");
  const Eigen::MatrixXd x = feature_matrix(bundle, feats, e.edges[static_cast<std::size_t>(bucket)]);
  return to_std(x * e.integrand_coefficients[static_cast<std::size_t>(bucket)].col(slot));
}

namespace {

RepresentationEstimate convert_form(const RepresentationEstimate& e, RepresentationEstimate::Form to) {
  if (e.form == to) return e;
  RepresentationEstimate out = e;
  out.form = to;
  const bool has_chain = std::any_of(e.integrators.begin(), e.integrators.end(),
                                     [](const std::string& s) { return s.rfind("Phibar_", 0) == 0; });
  if (!has_chain) return out;  // X = Xbar with a single state
  std::vector<Eigen::Index> psi1;
  for (std::size_t m = 0; m < e.integrators.size(); ++m) {
    const auto& s = e.integrators[m];
    if (s.rfind("Psibar_", 0) == 0 && s.size() > 2 && s.substr(s.size() - 2) == "^1")
      psi1.push_back(static_cast<Eigen::Index>(m));
  }
  if (psi1.empty()) throw UnsupportedError("represent: the X form needs the Psibar^(1) integrators (L >= 1)");
  const double sign = to == RepresentationEstimate::Form::x ? -1.0 : 1.0;
  for (std::size_t b = 0; b < out.integrand_coefficients.size(); ++b) {
    auto& beta = out.integrand_coefficients[b];
    const auto ni = beta.cols();
    Eigen::MatrixXd map = Eigen::MatrixXd::Identity(beta.size(), beta.size());
    for (Eigen::Index q = 0; q < beta.rows(); ++q)
      for (Eigen::Index m : psi1) map(q * ni + m, q * ni) = sign;
    for (Eigen::Index m : psi1) beta.col(m) += sign * beta.col(0);
    out.coefficient_cov[b] = map * e.coefficient_cov[b] * map.transpose();
  }
  out.integrators[0] = to == RepresentationEstimate::Form::x ? "X" : "Xbar^1";
  summarize(out);
  return out;
}

}  // namespace

RepresentationEstimate to_x_form(const RepresentationEstimate& e) {
  return convert_form(e, RepresentationEstimate::Form::x);
}

RepresentationEstimate to_xbar_form(const RepresentationEstimate& e) {
  return convert_form(e, RepresentationEstimate::Form::xbar);
}

ReplicationReport replicate(const RepresentationEstimate& e, const PathBundle& bundle, const PayoffSpec& payoff) {
  const PathSet used{bundle.path_set().seed, bundle.path_set().first_path, bundle.n_paths()};
  if (e.paths.overlaps(used))
    throw ValidationError("represent: replication paths overlap the estimation paths");
  if (e.config_hash != bundle.config().hash())
    throw ValidationError("represent: estimate was produced under a different config");
  if (e.payoff != payoff.name()) throw ValidationError("represent: estimate was produced for another payoff");
  payoff.validate(bundle);

  const Features feats = make_features(bundle);
  const auto ints = make_integrators(bundle, e.K, e.L, e.form);
  if (feats.names != e.features || ints.size() != e.integrators.size())
    throw ValidationError("represent: bundle layout does not match the estimate");
  for (std::size_t m = 0; m < ints.size(); ++m)
    if (ints[m].name != e.integrators[m]) throw ValidationError("represent: bundle layout does not match the estimate");
  if (e.edges.back() != bundle.n_times() - 1) throw ValidationError("represent: bucket edges do not fit the bundle");

  const int n = bundle.n_paths();
  Eigen::MatrixXd x = feature_matrix(bundle, feats, e.edges[0]);
  Eigen::VectorXd f_hat = x * e.m_coefficients[0];
  Eigen::MatrixXd z = integrator_matrix(bundle, ints, e.edges[0]);
  for (std::size_t b = 0; b + 1 < e.edges.size(); ++b) {
    const Eigen::MatrixXd z_next = integrator_matrix(bundle, ints, e.edges[b + 1]);
    f_hat += integral_increment(x, e.integrand_coefficients[b], z_next - z);
    z = z_next;
    if (b + 2 < e.edges.size()) x = feature_matrix(bundle, feats, e.edges[b + 1]);
  }
  std::vector<double> f(static_cast<std::size_t>(n));
  double ss = 0.0;
  for (int p = 0; p < n; ++p) {
    f[static_cast<std::size_t>(p)] = payoff.evaluate(bundle, p);
    ss += f[static_cast<std::size_t>(p)] * f[static_cast<std::size_t>(p)];
  }
  ReplicationReport rep;
  rep.payoff = e.payoff;
  rep.config_hash = e.config_hash;
  rep.n_paths = n;
  rep.replicated = to_std(f_hat);
  std::tie(rep.relative_error, rep.stderr_) = relative_l2_error(f, rep.replicated);
  rep.payoff_rms = std::sqrt(ss / n);
  return rep;
}

std::vector<PolyTarget> all_poly_targets(int n_states) {
  std::vector<PolyTarget> out;
  for (int total = 1; total <= 3; ++total)
    for (int g = total; g >= 0; --g)
      for (int p = total - g; p >= 0; --p) {
        const int b = total - g - p;
        const int ni = b > 0 ? n_states : 1;
        const int nj = p > 0 ? n_states : 1;
        for (int i = 0; i < ni; ++i)
          for (int j = 0; j < nj; ++j) out.push_back({g, p, b, i, j});
      }
  return out;
}

bool PolyOracleReport::nonincreasing(double floor) const {
  for (std::size_t l = 1; l < levels.size(); ++l)
    if (levels[l].rms_error > levels[l - 1].rms_error + floor) return false;
  return true;
}

std::string PolyOracleReport::table() const {
  std::ostringstream os;
  char buf[160];
  for (const auto& lv : levels) {
    std::snprintf(buf, sizeof buf, "%.10g,%d,%d,%d,%d,%d,%.6e,%.6e,%.6e\n", lv.dt, target.g, target.p, target.b,
                  target.i + 1, target.j + 1, lv.max_error, lv.rms_error, lv.lhs_rms);
    os << buf;
  }
  return os.str();
}

namespace {

struct OracleConstants {
  int n = 0;
  Eigen::MatrixXd rate;         // [state][k], k = 0..3 (k = 1 includes the drift)
  Eigen::VectorXd sigma2;
  Eigen::MatrixXd lam;          // lam(s, j) = lambda_sj for s != j, else 0
  Eigen::MatrixXd moment;       // moment(i, r) = m_i(r), r = 0..3
};

struct TargetLayout {
  int n_terms = 0;
  int phi_term = -1;
  int psi_term = -1;  // first Psibar^(r) term
  int ds_term = 0;
};

TargetLayout layout_of(const PolyTarget& t) {
  TargetLayout l;
  int k = t.g;
  if (t.p > 0) l.phi_term = k++;
  if (t.b > 0) {
    l.psi_term = k;
    k += t.b;
  }
  l.ds_term = k++;
  l.n_terms = k;
  return l;
}

std::vector<std::string> term_names(const PolyTarget& t) {
  std::vector<std::string> out;
  for (int k = 1; k <= t.g; ++k) out.push_back("int dXbar^(" + std::to_string(k) + ")");
  if (t.p > 0) out.push_back("int dPhibar_" + state_name(t.j));
  for (int r = 1; r <= t.b; ++r) out.push_back("int dPsibar_" + state_name(t.i) + "^(" + std::to_string(r) + ")");
  out.push_back("int ds");
  return out;
}

// Coefficients of the expansion at the point (x, y, z) for one target.
struct Coeffs {
  double a[4] = {0, 0, 0, 0};  // against Xbar^(k), k = 1..3
  double c_phi = 0.0;
  double c_psi[4] = {0, 0, 0, 0};  // against Psibar^(r), r = 1..3
  double f_xx = 0.0, f_y = 0.0, f_z = 0.0;
};

Coeffs coeffs_at(const PolyTarget& t, double x, double y, double z) {
  double xp[4], yp[4], y1p[4], zp[4];
  xp[0] = yp[0] = y1p[0] = zp[0] = 1.0;
  for (int k = 1; k < 4; ++k) {
    xp[k] = xp[k - 1] * x;
    yp[k] = yp[k - 1] * y;
    y1p[k] = y1p[k - 1] * (y + 1.0);
    zp[k] = zp[k - 1] * z;
  }
  Coeffs c;
  const double yz = yp[t.p] * zp[t.b];
  for (int k = 1; k <= t.g; ++k) c.a[k] = binom(t.g, k) * xp[t.g - k] * yz;
  if (t.g >= 2) c.f_xx = t.g * (t.g - 1) * xp[t.g - 2] * yz;
  if (t.p >= 1) {
    c.f_y = t.p * xp[t.g] * yp[t.p - 1] * zp[t.b];
    c.c_phi = xp[t.g] * (y1p[t.p] - yp[t.p]) * zp[t.b];
  }
  if (t.b >= 1) {
    c.f_z = t.b * xp[t.g] * yp[t.p] * zp[t.b - 1];
    // a transition into i moves Phibar_j too when i = j
    const double ypart = t.i == t.j ? y1p[t.p] : yp[t.p];
    for (int r = 1; r <= t.b; ++r) c.c_psi[r] = binom(t.b, r) * xp[t.g] * ypart * zp[t.b - r];
  }
  return c;
}

struct PathResult {
  // [target][level]
  std::vector<std::vector<double>> lhs, rhs;
  std::vector<std::vector<std::vector<double>>> terms;  // [target][level][term]
};

PathResult oracle_path(const ScenarioConfig& cfg, const OracleConstants& k, const std::vector<PolyTarget>& targets,
                       const std::vector<TargetLayout>& layouts, const std::vector<double>& dts, std::uint64_t seed) {
  const int n = k.n;
  const double horizon = cfg.horizon;
  const ChainPath chain = simulate_chain(cfg.chain, horizon, stream_seed(seed, Stream::chain));
  const CountingSet counts(chain, cfg.chain);
  const ImpulsePath imp = simulate_impulse(chain, counts, cfg.impulse, 0, TimeGrid{horizon, 1},
                                           stream_seed(seed, Stream::impulse));
  std::vector<double> u_of_epoch(chain.n_epochs());
  {
    std::vector<std::size_t> next(static_cast<std::size_t>(n), 0);
    for (std::size_t e = 0; e < chain.n_epochs(); ++e) {
      const auto d = static_cast<std::size_t>(chain.states[e + 1]);
      u_of_epoch[e] = imp.jumps[d][next[d]++].value;
    }
  }
  std::vector<double> y_end(static_cast<std::size_t>(n)), z_end(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double u_sum = 0.0;
    for (const auto& jmp : imp.jumps[static_cast<std::size_t>(i)]) u_sum += jmp.value;
    y_end[static_cast<std::size_t>(i)] = counts.compensated(i, horizon);
    z_end[static_cast<std::size_t>(i)] = u_sum - k.moment(i, 1) * counts.compensator(i, horizon);
  }

  PathResult res;
  res.lhs.assign(targets.size(), std::vector<double>(dts.size(), 0.0));
  res.rhs = res.lhs;
  res.terms.resize(targets.size());
  for (std::size_t q = 0; q < targets.size(); ++q)
    res.terms[q].assign(dts.size(), std::vector<double>(static_cast<std::size_t>(layouts[q].n_terms), 0.0));

  for (std::size_t lv = 0; lv < dts.size(); ++lv) {
    const LevyPath levy = simulate_levy(cfg.levy, chain, dts[lv], seed);
    const TimeGrid& grid = levy.grid;
    double x = 0.0;
    std::vector<double> y(static_cast<std::size_t>(n), 0.0), z(static_cast<std::size_t>(n), 0.0);
    int s = chain.states.front();
    std::size_t ge = 1, ev = 0, ce = 0, lj = 0;
    double t_prev = 0.0, c_prev = 0.0;

    while (ge <= static_cast<std::size_t>(grid.steps)) {
      const double tg = grid.time(static_cast<int>(ge));
      double t_node, c_node;
      if (ev < levy.event_times.size() && levy.event_times[ev] <= tg) {
        t_node = levy.event_times[ev];
        c_node = levy.event_continuous[ev];
        ++ev;
        if (t_node == tg) ++ge;
      } else {
        t_node = tg;
        c_node = levy.continuous[ge];
        ++ge;
      }
      const double h = t_node - t_prev, dc = c_node - c_prev;
      // left-point integrands on (t_prev, t_node]
      for (std::size_t q = 0; q < targets.size(); ++q) {
        const auto& t = targets[q];
        const auto& lay = layouts[q];
        auto& acc = res.terms[q][lv];
        const Coeffs c = coeffs_at(t, x, y[static_cast<std::size_t>(t.j)], z[static_cast<std::size_t>(t.i)]);
        const double lam_j = k.lam(s, t.j), lam_i = k.lam(s, t.i);
        double ds = 0.5 * c.f_xx * k.sigma2(s);
        for (int kk = 1; kk <= t.g; ++kk) {
          const double comp = k.rate(s, kk) * h;
          acc[static_cast<std::size_t>(kk - 1)] += c.a[kk] * ((kk == 1 ? dc : 0.0) - comp);
          ds += c.a[kk] * k.rate(s, kk);
        }
        if (lay.phi_term >= 0) {
          acc[static_cast<std::size_t>(lay.phi_term)] -= c.c_phi * lam_j * h;
          ds += (c.c_phi - c.f_y) * lam_j;
        }
        if (lay.psi_term >= 0) {
          for (int r = 1; r <= t.b; ++r) {
            acc[static_cast<std::size_t>(lay.psi_term + r - 1)] -= c.c_psi[r] * k.moment(t.i, r) * lam_i * h;
            ds += c.c_psi[r] * k.moment(t.i, r) * lam_i;
          }
          ds -= c.f_z * k.moment(t.i, 1) * lam_i;
        }
        acc[static_cast<std::size_t>(lay.ds_term)] += ds * h;
      }
      x += dc;
      for (int j = 0; j < n; ++j) {
        y[static_cast<std::size_t>(j)] -= k.lam(s, j) * h;
        z[static_cast<std::size_t>(j)] -= k.moment(j, 1) * k.lam(s, j) * h;
      }
      t_prev = t_node;
      c_prev = c_node;

      // jumps at t_node, integrands at the left limit
      for (; lj < levy.jumps.size() && levy.jumps[lj].time == t_node; ++lj) {
        const double d = levy.jumps[lj].applied;
        for (std::size_t q = 0; q < targets.size(); ++q) {
          const auto& t = targets[q];
          const Coeffs c = coeffs_at(t, x, y[static_cast<std::size_t>(t.j)], z[static_cast<std::size_t>(t.i)]);
          double dk = 1.0;
          for (int kk = 1; kk <= t.g; ++kk) {
            dk *= d;
            res.terms[q][lv][static_cast<std::size_t>(kk - 1)] += c.a[kk] * dk;
          }
        }
        x += d;
      }
      for (; ce < chain.n_epochs() && chain.epochs[ce] == t_node; ++ce) {
        const int dest = chain.states[ce + 1];
        const double u = u_of_epoch[ce];
        for (std::size_t q = 0; q < targets.size(); ++q) {
          const auto& t = targets[q];
          const auto& lay = layouts[q];
          const Coeffs c = coeffs_at(t, x, y[static_cast<std::size_t>(t.j)], z[static_cast<std::size_t>(t.i)]);
          if (lay.phi_term >= 0 && dest == t.j) res.terms[q][lv][static_cast<std::size_t>(lay.phi_term)] += c.c_phi;
          if (lay.psi_term >= 0 && dest == t.i) {
            double ur = 1.0;
            for (int r = 1; r <= t.b; ++r) {
              ur *= u;
              res.terms[q][lv][static_cast<std::size_t>(lay.psi_term + r - 1)] += c.c_psi[r] * ur;
            }
          }
        }
        y[static_cast<std::size_t>(dest)] += 1.0;
        z[static_cast<std::size_t>(dest)] += u;
        s = dest;
      }
    }

    const double x_end = levy.values.back();
    for (std::size_t q = 0; q < targets.size(); ++q) {
      const auto& t = targets[q];
      res.lhs[q][lv] = ipow(x_end, t.g) * ipow(y_end[static_cast<std::size_t>(t.j)], t.p) *
                       ipow(z_end[static_cast<std::size_t>(t.i)], t.b);
      double sum = 0.0;
      for (double v : res.terms[q][lv]) sum += v;
      res.rhs[q][lv] = sum;
    }
  }
  return res;
}

}  // namespace

std::vector<PolyOracleReport> poly_representation_oracle(const ScenarioConfig& config, const PathSet& set,
                                                         const std::vector<PolyTarget>& targets,
                                                         const std::vector<double>& dts, int workers) {
  config.validate();
  const int n = config.n_states();
  for (const auto& t : targets) {
    const int total = t.g + t.p + t.b;
    if (total > 3) throw UnsupportedError("represent: the oracle supports g + p + b <= 3");
    if (total < 1 || t.g < 0 || t.p < 0 || t.b < 0) throw ValidationError("represent: need 1 <= g + p + b");
    if (t.i < 0 || t.i >= n || t.j < 0 || t.j >= n) throw ValidationError("represent: oracle state out of range");
  }
  if (dts.empty()) throw ValidationError("represent: no step sizes given");
  for (double dt : dts) (void)make_grid(config.horizon, dt);
  if (set.n_paths < 1) throw ValidationError("represent: oracle needs at least one path");
  if (workers < 1) throw ValidationError("represent: workers must be >= 1");

  OracleConstants k;
  k.n = n;
  k.rate = Eigen::MatrixXd::Zero(n, 4);
  k.sigma2.resize(n);
  k.lam = Eigen::MatrixXd::Zero(n, n);
  k.moment = Eigen::MatrixXd::Zero(n, 4);
  for (int s = 0; s < n; ++s) {
    for (int kk = 1; kk <= 3; ++kk) k.rate(s, kk) = power_compensator_rate(config.levy, s, kk);
    k.sigma2(s) = config.levy.sigma0(s) * config.levy.sigma0(s);
    for (int j = 0; j < n; ++j)
      if (j != s) k.lam(s, j) = config.chain.intensities(s, j);
    for (int r = 0; r <= 3; ++r) k.moment(s, r) = config.impulse.moment(s, r);
  }
  std::vector<TargetLayout> layouts;
  for (const auto& t : targets) layouts.push_back(layout_of(t));

  std::vector<PathResult> results(static_cast<std::size_t>(set.n_paths));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  auto work = [&](int w) {
    try {
      for (int p = w; p < set.n_paths; p += workers)
        results[static_cast<std::size_t>(p)] =
            oracle_path(config, k, targets, layouts, dts, path_seed(set.seed, set.first_path + static_cast<std::uint64_t>(p)));
    } catch (...) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<PolyOracleReport> out;
  const double m = set.n_paths;
  for (std::size_t q = 0; q < targets.size(); ++q) {
    PolyOracleReport rep;
    rep.target = targets[q];
    const auto names = term_names(targets[q]);
    for (std::size_t lv = 0; lv < dts.size(); ++lv) {
      PolyOracleLevel level;
      level.dt = dts[lv];
      double se = 0.0, sl = 0.0;
      std::vector<double> st(names.size(), 0.0);
      for (const auto& r : results) {
        const double err = r.lhs[q][lv] - r.rhs[q][lv];
        level.max_error = std::max(level.max_error, std::abs(err));
        se += err * err;
        sl += r.lhs[q][lv] * r.lhs[q][lv];
        for (std::size_t term = 0; term < st.size(); ++term) st[term] += r.terms[q][lv][term] * r.terms[q][lv][term];
      }
      level.rms_error = std::sqrt(se / m);
      level.lhs_rms = std::sqrt(sl / m);
      for (std::size_t term = 0; term < st.size(); ++term) level.term_rms.emplace_back(names[term], std::sqrt(st[term] / m));
      rep.levels.push_back(std::move(level));
    }
    out.push_back(std::move(rep));
  }
  return out;
}

ChaosReport chaos_projection(const PathBundle& bundle, const std::function<double(int)>& payoff) {
  const auto views = basis_processes(bundle);
  const int n = bundle.n_paths();
  const int last = bundle.n_times() - 1;
  const auto d = static_cast<Eigen::Index>(views.size());
  const Eigen::Index cols = 1 + d + d * d;
  if (n < 10 * cols) throw ValidationError("represent: too few paths for the chaos projection");

  ChaosReport rep;
  rep.regressors.push_back("1");
  for (const auto& v : views) rep.regressors.push_back(v.name + "(T)");
  for (const auto& a : views)
    for (const auto& c : views) rep.regressors.push_back("int " + a.name + " d" + c.name);

  Eigen::MatrixXd path(n, d * (last + 1));  // [p][element * (last + 1) + t]
  for (Eigen::Index a = 0; a < d; ++a)
    for (int p = 0; p < n; ++p)
      for (int t = 0; t <= last; ++t) path(p, a * (last + 1) + t) = views[static_cast<std::size_t>(a)].value(p, t);

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, cols);
  Eigen::VectorXd f(n);
  for (int p = 0; p < n; ++p) {
    f(p) = payoff(p);
    x(p, 0) = 1.0;
    for (Eigen::Index a = 0; a < d; ++a) x(p, 1 + a) = path(p, a * (last + 1) + last);
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index c = 0; c < d; ++c) {
        double s = 0.0;
        for (int t = 0; t < last; ++t)
          s += path(p, a * (last + 1) + t) * (path(p, c * (last + 1) + t + 1) - path(p, c * (last + 1) + t));
        x(p, 1 + d + a * d + c) = s;
      }
  }
  const LeastSquares ls = least_squares(x, f, 1e-10);
  rep.coefficients = ls.beta;
  const Eigen::VectorXd resid = f - x * ls.beta;
  const double mean = f.mean();
  const double tot = (f.array() - mean).square().sum();
  rep.r_squared = tot > 0.0 ? 1.0 - resid.squaredNorm() / tot : 1.0;
  return rep;
}

}  // namespace imap
