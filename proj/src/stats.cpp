#include "imap/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "imap/errors.hpp"

namespace imap {

namespace {

struct Moments {
  double mean = 0.0;
  double stderr_ = 0.0;
  int n = 0;
};

Moments sample_moments(const std::vector<double>& v) {
  Moments m;
  m.n = static_cast<int>(v.size());
  if (m.n == 0) return m;
  double s = 0.0;
  for (double x : v) s += x;
  m.mean = s / m.n;
  if (m.n < 2) return m;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.stderr_ = std::sqrt(ss / (m.n - 1) / m.n);
  return m;
}

double z_score(const Moments& m) {
  if (m.stderr_ > 0.0) return m.mean / m.stderr_;
  return m.mean == 0.0 ? 0.0 : std::copysign(HUGE_VAL, m.mean);
}

std::string state_suffix(int i) { return "_" + std::to_string(i + 1); }

}  // namespace

std::vector<ProcessView> compensated_processes(const PathBundle& b, int max_power_order, int max_impulse_order) {
  std::vector<ProcessView> out;
  const PathBundle* pb = &b;
  if (b.has_chain()) {
    for (int j = 0; j < b.n_states(); ++j)
      out.push_back({"Phibar" + state_suffix(j), [pb, j](int p, int t) { return pb->phi_bar(p, t, j); }});
    for (int i = 0; i < b.n_states(); ++i)
      for (int l = 1; l <= std::min(max_impulse_order, b.impulse_orders()); ++l)
        out.push_back({"Psibar" + state_suffix(i) + "^" + std::to_string(l),
                       [pb, i, l](int p, int t) { return pb->psi_bar(p, t, i, l); }});
  }
  for (int k = 1; k <= max_power_order; ++k)
    out.push_back({"Xbar^" + std::to_string(k), [pb, k](int p, int t) { return pb->teugels(p, t, k); }});
  return out;
}

std::vector<ProcessView> basis_processes(const PathBundle& b) {
  std::vector<ProcessView> out;
  const PathBundle* pb = &b;
  for (int e = 0; e < b.n_h(); ++e)
    out.push_back({"H^" + std::to_string(b.basis().h_indices()[static_cast<std::size_t>(e)] + 1),
                   [pb, e](int p, int t) { return pb->h(p, t, e); }});
  for (int i = 0; i < b.n_states(); ++i)
    for (int e = 0; e < b.n_g(i); ++e) {
      const int r = b.basis().impulse[static_cast<std::size_t>(i)]->kept_indices[static_cast<std::size_t>(e)];
      out.push_back({"G" + state_suffix(i) + "^" + std::to_string(r + 1),
                     [pb, i, e](int p, int t) { return pb->g(p, t, i, e); }});
    }
  return out;
}

std::vector<int> default_probe_times(const PathBundle& b) {
  std::vector<int> t(static_cast<std::size_t>(b.n_times() - 1));
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = static_cast<int>(k) + 1;
  return t;
}

int MartingaleReport::flags() const {
  return static_cast<int>(std::count_if(tests.begin(), tests.end(), [](const MeanTest& m) { return m.flagged; }));
}

std::string MartingaleReport::table() const {
  std::ostringstream os;
  os << "process,kind,time,mean,stderr,z,flag\n";
  char buf[160];
  for (const auto& m : tests) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6e,%.6e,%.4f,%d\n", m.time, m.mean, m.stderr_, m.z, m.flagged ? 1 : 0);
    os << m.process << ',' << m.kind << ',' << buf;
  }
  return os.str();
}

MartingaleReport martingale_test(const PathBundle& b, const std::vector<ProcessView>& views,
                                 const std::vector<int>& probe_times, double threshold, int min_paths) {
  if (b.n_paths() < min_paths)
    throw ValidationError("harness: martingale test needs at least " + std::to_string(min_paths) + " paths, got " +
                          std::to_string(b.n_paths()));
  MartingaleReport rep;
  rep.threshold = threshold;
  rep.n_paths = b.n_paths();
  const int m = b.n_paths();
  std::vector<double> vals(static_cast<std::size_t>(m)), prev(static_cast<std::size_t>(m));
  std::vector<double> up, down;
  for (const auto& view : views) {
    for (std::size_t q = 0; q < probe_times.size(); ++q) {
      const int t = probe_times[q];
      for (int p = 0; p < m; ++p) vals[static_cast<std::size_t>(p)] = view.value(p, t);
      const Moments mo = sample_moments(vals);
      MeanTest mt{view.name, "mean", b.times()[static_cast<std::size_t>(t)], mo.mean, mo.stderr_, z_score(mo), false};
      mt.flagged = std::abs(mt.z) > threshold;
      rep.tests.push_back(mt);

      if (q > 0) {
        up.clear();
        down.clear();
        for (int p = 0; p < m; ++p) {
          const double before = prev[static_cast<std::size_t>(p)];
          const double inc = vals[static_cast<std::size_t>(p)] - before;
          if (before > 0.0) up.push_back(inc);
          if (before < 0.0) down.push_back(inc);
        }
        for (auto* group : {&up, &down}) {
          if (group->size() < 2) continue;
          const Moments gm = sample_moments(*group);
          MeanTest it{view.name, group == &up ? "increment|M>0" : "increment|M<0",
                      b.times()[static_cast<std::size_t>(t)], gm.mean, gm.stderr_, z_score(gm), false};
          it.flagged = std::abs(it.z) > threshold;
          rep.tests.push_back(it);
        }
      }
      std::swap(prev, vals);
      vals.resize(static_cast<std::size_t>(m));
    }
  }
  return rep;
}

int OrthogonalityReport::flags() const {
  return static_cast<int>(
      std::count_if(entries.begin(), entries.end(), [](const MomentEntry& e) { return e.flagged; }));
}

std::string OrthogonalityReport::table() const {
  std::ostringstream os;
  os << "a,b,second_moment,stderr,target,flag\n";
  char buf[128];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%.6e,%.6e,%.6g,%d\n", e.value, e.stderr_, e.target, e.flagged ? 1 : 0);
    os << e.a << ',' << e.b << ',' << buf;
  }
  return os.str();
}

OrthogonalityReport orthogonality_test(const PathBundle& b, double threshold, double diag_tol) {
  OrthogonalityReport rep;
  const auto views = basis_processes(b);
  const int m = b.n_paths();
  rep.n_paths = m;
  int t_probe = b.n_times() - 1;
  for (int t = 0; t < b.n_times(); ++t)
    if (std::abs(b.times()[static_cast<std::size_t>(t)] - 1.0) < 1e-12) t_probe = t;
  rep.time = b.times()[static_cast<std::size_t>(t_probe)];

  const std::size_t d = views.size();
  std::vector<std::vector<double>> v(d, std::vector<double>(static_cast<std::size_t>(m)));
  for (std::size_t a = 0; a < d; ++a) {
    rep.names.push_back(views[a].name);
    for (int p = 0; p < m; ++p) v[a][static_cast<std::size_t>(p)] = views[a].value(p, t_probe);
  }
  rep.second_moments.assign(d, std::vector<double>(d, 0.0));
  rep.stderrs = rep.second_moments;
  std::vector<double> prod(static_cast<std::size_t>(m));
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t c = a; c < d; ++c) {
      for (std::size_t p = 0; p < prod.size(); ++p) prod[p] = v[a][p] * v[c][p];
      const Moments mo = sample_moments(prod);
      rep.second_moments[a][c] = rep.second_moments[c][a] = mo.mean;
      rep.stderrs[a][c] = rep.stderrs[c][a] = mo.stderr_;
      MomentEntry e{views[a].name, views[c].name, mo.mean, mo.stderr_, 0.0, false};
      if (a == c) {
        e.target = views[a].name[0] == 'H' ? rep.time : 1.0;
        e.flagged = std::abs(e.value - e.target) > diag_tol;
      } else {
        e.flagged = std::abs(e.value) > threshold * mo.stderr_;
      }
      rep.entries.push_back(e);
    }
  return rep;
}

}  // namespace imap
