#include "imap/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "imap/chain.hpp"
#include "imap/errors.hpp"
#include "imap/impulse.hpp"
#include "imap/levy.hpp"
#include "imap/rng.hpp"

#ifndef IMAP_VERSION
#define IMAP_VERSION "0.0.0"
#endif

namespace imap {

using nlohmann::json;
using Kind = PrimitiveColumn::Kind;

std::string library_version() { return IMAP_VERSION; }

bool PathSet::overlaps(const PathSet& other) const {
  if (seed != other.seed || n_paths == 0 || other.n_paths == 0) return false;
  const auto end = first_path + static_cast<std::uint64_t>(n_paths);
  const auto other_end = other.first_path + static_cast<std::uint64_t>(other.n_paths);
  return first_path < other_end && other.first_path < end;
}

PathSet estimation_set(const ScenarioConfig& c) { return {c.seed, 0, c.estimation_paths}; }

PathSet evaluation_set(const ScenarioConfig& c) {
  return {c.seed, static_cast<std::uint64_t>(c.estimation_paths), c.evaluation_paths};
}

PathBundle::PathBundle(ScenarioConfig config, PathSet set, int n_stored)
    : config_(std::move(config)), set_(set), n_stored_(n_stored) {
  const int n = config_.n_states();
  basis_ = build_basis(config_.levy, config_.impulse, config_.chain, config_.max_power_order,
                       config_.max_impulse_order, config_.pivot_tol);
  h_indices_ = basis_.h_indices();
  times_ = config_.report_grid().times();
  impulse_orders_ = n > 1 ? std::max(config_.max_impulse_order, 1) : 0;
  power_orders_ = config_.levy.has_jumps() ? config_.max_power_order : 1;

  auto add = [&](Kind kind, int state, int order) {
    columns_.push_back({kind, state, order});
    return static_cast<int>(columns_.size()) - 1;
  };
  state_col_.assign(1, -1);
  occ_col_.assign(static_cast<std::size_t>(n), -1);
  count_col_.assign(static_cast<std::size_t>(n), -1);
  impulse_col_.assign(static_cast<std::size_t>(n), {});
  power_col_.assign(static_cast<std::size_t>(n), {});
  if (n > 1) {
    state_col_[0] = add(Kind::state, 0, 0);
    for (int i = 0; i < n; ++i) occ_col_[static_cast<std::size_t>(i)] = add(Kind::occupation, i, 0);
    for (int j = 0; j < n; ++j) count_col_[static_cast<std::size_t>(j)] = add(Kind::count, j, 0);
    for (int i = 0; i < n; ++i)
      for (int l = 1; l <= impulse_orders_; ++l)
        impulse_col_[static_cast<std::size_t>(i)].push_back(add(Kind::impulse_power, i, l));
  }
  for (int i = 0; i < n; ++i)
    for (int k = 1; k <= power_orders_; ++k)
      power_col_[static_cast<std::size_t>(i)].push_back(add(Kind::regime_power, i, k));

  power_rate_.resize(n, power_orders_);
  for (int i = 0; i < n; ++i)
    for (int k = 1; k <= power_orders_; ++k) power_rate_(i, k - 1) = power_compensator_rate(config_.levy, i, k);
  impulse_moment_.resize(n, impulse_orders_);
  for (int i = 0; i < n; ++i)
    for (int l = 1; l <= impulse_orders_; ++l) impulse_moment_(i, l - 1) = config_.impulse.moment(i, l);

  data_.assign(columns_.size() * static_cast<std::size_t>(n_stored_) * times_.size(), 0.0);
  jump_offsets_.assign(static_cast<std::size_t>(n_stored_) + 1, 0);
}

int PathBundle::find(Kind kind, int state, int order) const {
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    const auto& col = columns_[c];
    if (col.kind == kind && (kind == Kind::state || col.state == state) && col.order == order)
      return static_cast<int>(c);
  }
  return -1;
}

int PathBundle::state(int p, int t) const {
  if (!has_chain()) return 0;
  return static_cast<int>(primitive(state_col_[0], p, t));
}

double PathBundle::occupation(int p, int t, int i) const {
  if (!has_chain()) return times_[static_cast<std::size_t>(t)];
  return primitive(occ_col_[static_cast<std::size_t>(i)], p, t);
}

double PathBundle::count(int p, int t, int j) const {
  if (!has_chain()) return 0.0;
  return primitive(count_col_[static_cast<std::size_t>(j)], p, t);
}

double PathBundle::compensator(int p, int t, int j) const {
  double s = 0.0;
  for (int i = 0; i < n_states(); ++i)
    if (i != j) s += occupation(p, t, i) * config_.chain.intensities(i, j);
  return s;
}

double PathBundle::psi(int p, int t, int i, int l) const {
  if (l < 1 || l > impulse_orders_) return 0.0;
  return primitive(impulse_col_[static_cast<std::size_t>(i)][static_cast<std::size_t>(l - 1)], p, t);
}

double PathBundle::psi_bar(int p, int t, int i, int l) const {
  if (l < 1 || l > impulse_orders_) return 0.0;
  return psi(p, t, i, l) - impulse_moment_(i, l - 1) * compensator(p, t, i);
}

double PathBundle::xbar(int p, int t) const { return power_jump(p, t, 1); }

double PathBundle::x_full(int p, int t) const {
  double x = xbar(p, t);
  for (int i = 0; i < n_states(); ++i) x += psi(p, t, i, 1);
  return x;
}

double PathBundle::power_jump(int p, int t, int k) const {
  if (k < 1 || k > power_orders_) return 0.0;
  double s = 0.0;
  for (int i = 0; i < n_states(); ++i)
    s += primitive(power_col_[static_cast<std::size_t>(i)][static_cast<std::size_t>(k - 1)], p, t);
  return s;
}

double PathBundle::regime_teugels(int p, int t, int i, int k) const {
  if (k < 1 || k > power_orders_) return 0.0;
  const double raw = primitive(power_col_[static_cast<std::size_t>(i)][static_cast<std::size_t>(k - 1)], p, t);
  return raw - occupation(p, t, i) * power_rate_(i, k - 1);
}

double PathBundle::teugels(int p, int t, int k) const {
  double s = 0.0;
  for (int i = 0; i < n_states(); ++i) s += regime_teugels(p, t, i, k);
  return s;
}

double PathBundle::h(int p, int t, int e) const {
  const int r = h_indices_[static_cast<std::size_t>(e)];
  double s = 0.0;
  for (int i = 0; i < n_states(); ++i) {
    const auto row = basis_.teugels[static_cast<std::size_t>(i)].row_for(r);
    if (!row) continue;
    for (int k = 0; k <= r; ++k)
      if ((*row)(k) != 0.0) s += (*row)(k) * regime_teugels(p, t, i, k + 1);
  }
  return s;
}

int PathBundle::n_g(int i) const {
  const auto& b = basis_.impulse[static_cast<std::size_t>(i)];
  return b ? b->size() : 0;
}

double PathBundle::g(int p, int t, int i, int e) const {
  const auto& b = *basis_.impulse[static_cast<std::size_t>(i)];
  const int r = b.kept_indices[static_cast<std::size_t>(e)];
  double s = 0.0;
  for (int l = 0; l <= r; ++l) {
    const double c = b.coefficients(e, l);
    if (c == 0.0) continue;
    s += c * (l == 0 ? phi_bar(p, t, i) : psi_bar(p, t, i, l));
  }
  return s;
}

std::vector<JumpRecord> PathBundle::jumps(int p) const {
  return {jumps_.begin() + static_cast<std::ptrdiff_t>(jump_offsets_[static_cast<std::size_t>(p)]),
          jumps_.begin() + static_cast<std::ptrdiff_t>(jump_offsets_[static_cast<std::size_t>(p) + 1])};
}

void PathBundle::set_jumps(std::vector<std::vector<JumpRecord>> per_path) {
  if (static_cast<int>(per_path.size()) != n_stored_)
    throw ValidationError("harness: jump records do not match the number of paths");
  jumps_.clear();
  jump_offsets_.assign(1, 0);
  for (auto& v : per_path) {
    jumps_.insert(jumps_.end(), v.begin(), v.end());
    jump_offsets_.push_back(jumps_.size());
  }
}

bool PathBundle::identical(const PathBundle& o) const {
  if (n_stored_ != o.n_stored_ || !(set_ == o.set_) || times_ != o.times_ || data_.size() != o.data_.size() ||
      jumps_.size() != o.jumps_.size() || jump_offsets_ != o.jump_offsets_)
    return false;
  if (std::memcmp(data_.data(), o.data_.data(), data_.size() * sizeof(double)) != 0) return false;
  for (std::size_t n = 0; n < jumps_.size(); ++n) {
    const auto& a = jumps_[n];
    const auto& b = o.jumps_[n];
    if (a.kind != b.kind || a.state != b.state || std::memcmp(&a.time, &b.time, sizeof(double)) != 0 ||
        std::memcmp(&a.mark, &b.mark, sizeof(double)) != 0 || std::memcmp(&a.value, &b.value, sizeof(double)) != 0)
      return false;
  }
  return true;
}

namespace {

std::vector<JumpRecord> simulate_one(const ScenarioConfig& cfg, PathBundle& b, std::uint64_t seed, int p) {
  const int n = cfg.n_states();
  const TimeGrid report = cfg.report_grid();
  const int stride = cfg.report_stride();
  const ChainPath chain = simulate_chain(cfg.chain, cfg.horizon, stream_seed(seed, Stream::chain));
  const LevyPath levy = simulate_levy(cfg.levy, chain, cfg.grid_step, seed);

  std::vector<JumpRecord> records;
  if (b.has_chain()) {
    const CountingSet counts(chain, cfg.chain);
    const ImpulsePath imp = simulate_impulse(chain, counts, cfg.impulse, b.impulse_orders(), report,
                                             stream_seed(seed, Stream::impulse));
    const Eigen::MatrixXd occ = occupation_on_grid(chain, n, report);
    const int c_state = b.find(Kind::state);
    for (int t = 0; t < b.n_times(); ++t) {
      const double tt = b.times()[static_cast<std::size_t>(t)];
      b.primitive(c_state, p, t) = chain.state_at(tt);
      for (int i = 0; i < n; ++i) {
        b.primitive(b.find(Kind::occupation, i), p, t) = occ(i, t);
        b.primitive(b.find(Kind::count, i), p, t) = counts.count(i, tt);
        for (int l = 1; l <= b.impulse_orders(); ++l)
          b.primitive(b.find(Kind::impulse_power, i, l), p, t) = imp.psi(i, l)[static_cast<std::size_t>(t)];
      }
    }
    std::vector<std::size_t> next(static_cast<std::size_t>(n), 0);
    for (std::size_t e = 0; e < chain.n_epochs(); ++e) {
      const int dest = chain.states[e + 1];
      const auto& u = imp.jumps[static_cast<std::size_t>(dest)][next[static_cast<std::size_t>(dest)]++];
      records.push_back({JumpRecord::Kind::chain, chain.epochs[e], dest, 0.0, u.value});
    }
  }

  std::vector<std::vector<double>> sums(static_cast<std::size_t>(n),
                                        std::vector<double>(static_cast<std::size_t>(b.power_orders()), 0.0));
  std::size_t j = 0;
  for (int t = 0; t < b.n_times(); ++t) {
    const int g = t * stride;
    const double tg = levy.grid.time(g);
    for (; j < levy.jumps.size() && levy.jumps[j].time <= tg; ++j) {
      const auto& jump = levy.jumps[j];
      double pw = 1.0;
      for (int k = 1; k <= b.power_orders(); ++k) {
        pw *= jump.applied;
        sums[static_cast<std::size_t>(jump.state)][static_cast<std::size_t>(k - 1)] += pw;
      }
    }
    for (int i = 0; i < n; ++i)
      for (int k = 1; k <= b.power_orders(); ++k) {
        double v = sums[static_cast<std::size_t>(i)][static_cast<std::size_t>(k - 1)];
        if (k == 1) v += levy.continuous_by_state(i, g);
        b.primitive(b.find(Kind::regime_power, i, k), p, t) = v;
      }
  }
  for (const auto& jump : levy.jumps)
    records.push_back({JumpRecord::Kind::levy, jump.time, jump.state, jump.mark, jump.applied});
  std::stable_sort(records.begin(), records.end(),
                   [](const JumpRecord& a, const JumpRecord& c) { return a.time < c.time; });
  return records;
}

}  // namespace

PathBundle run_scenario(const ScenarioConfig& config, const PathSet& set, int workers) {
  config.validate();
  if (workers < 1) throw ValidationError("harness: workers must be >= 1");
  PathBundle bundle(config, set, set.n_paths);
  std::vector<std::vector<JumpRecord>> records(static_cast<std::size_t>(set.n_paths));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));

  auto work = [&](int w) {
    try {
      for (int p = w; p < set.n_paths; p += workers)
        records[static_cast<std::size_t>(p)] =
            simulate_one(config, bundle, path_seed(set.seed, set.first_path + static_cast<std::uint64_t>(p)), p);
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
  bundle.set_jumps(std::move(records));
  return bundle;
}

std::vector<PersistedColumn> persisted_columns(const PathBundle& b) {
  std::vector<PersistedColumn> out;
  const int n = b.n_states();
  auto prim = [&](const char* name, Kind kind, int state, int order) {
    out.push_back({name, kind == Kind::state ? 0 : state + 1, order, b.find(kind, state, order)});
  };
  if (b.has_chain()) {
    prim("J", Kind::state, 0, 0);
    for (int i = 0; i < n; ++i) prim("occupation", Kind::occupation, i, 0);
    for (int j = 0; j < n; ++j) prim("Phi", Kind::count, j, 0);
    for (int i = 0; i < n; ++i)
      for (int l = 1; l <= b.impulse_orders(); ++l) prim("Psi", Kind::impulse_power, i, l);
  }
  for (int i = 0; i < n; ++i)
    for (int k = 1; k <= b.power_orders(); ++k) prim("regime_power", Kind::regime_power, i, k);

  out.push_back({"Xbar", 0, 0, -1});
  if (b.has_chain()) out.push_back({"X", 0, 0, -1});
  for (int k = 2; k <= b.power_orders(); ++k) out.push_back({"Xpow", 0, k, -1});
  for (int k = 1; k <= b.power_orders(); ++k) out.push_back({"Xbar_k", 0, k, -1});
  if (b.has_chain()) {
    for (int j = 0; j < n; ++j) out.push_back({"phi", j + 1, 0, -1});
    for (int j = 0; j < n; ++j) out.push_back({"Phibar", j + 1, 0, -1});
    for (int i = 0; i < n; ++i)
      for (int l = 1; l <= b.impulse_orders(); ++l) out.push_back({"Psibar", i + 1, l, -1});
  }
  for (int e = 0; e < b.n_h(); ++e) out.push_back({"H", 0, b.basis().h_indices()[static_cast<std::size_t>(e)] + 1, -1});
  for (int i = 0; i < n; ++i)
    for (int e = 0; e < b.n_g(i); ++e)
      out.push_back({"G", i + 1, (*b.basis().impulse[static_cast<std::size_t>(i)]).kept_indices[static_cast<std::size_t>(e)] + 1, -1});
  return out;
}

double persisted_value(const PathBundle& b, const PersistedColumn& c, int p, int t) {
  if (c.primitive >= 0) return b.primitive(c.primitive, p, t);
  const int s = c.state - 1;
  if (c.process == "Xbar") return b.xbar(p, t);
  if (c.process == "X") return b.x_full(p, t);
  if (c.process == "Xpow") return b.power_jump(p, t, c.order);
  if (c.process == "Xbar_k") return b.teugels(p, t, c.order);
  if (c.process == "phi") return b.compensator(p, t, s);
  if (c.process == "Phibar") return b.phi_bar(p, t, s);
  if (c.process == "Psibar") return b.psi_bar(p, t, s, c.order);
  if (c.process == "H") {
    const auto& idx = b.basis().h_indices();
    const auto it = std::find(idx.begin(), idx.end(), c.order - 1);
    return b.h(p, t, static_cast<int>(it - idx.begin()));
  }
  if (c.process == "G") {
    const auto& idx = (*b.basis().impulse[static_cast<std::size_t>(s)]).kept_indices;
    const auto it = std::find(idx.begin(), idx.end(), c.order - 1);
    return b.g(p, t, s, static_cast<int>(it - idx.begin()));
  }
  throw ValidationError("harness: unknown column '" + c.process + "'");
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json schema_json(const PathBundle& b, int persisted) {
  json cols = json::array();
  for (const auto& c : persisted_columns(b))
    cols.push_back({{"process", c.process}, {"state", c.state}, {"order", c.order},
                    {"primitive", c.primitive >= 0}});
  json j;
  j["format_version"] = 1;
  j["columns"] = cols;
  j["times"] = b.times();
  j["path_set"] = {{"seed", b.path_set().seed},
                   {"first_path", b.path_set().first_path},
                   {"n_paths", b.path_set().n_paths},
                   {"persisted_paths", persisted}};
  j["config"] = b.config().to_json();
  j["config_hash"] = b.config().hash();
  j["csv"] = {{"paths", "path_id,time,process,state,order,value"},
              {"jumps", "path_id,kind,time,state,mark,value"}};
  return j;
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ValidationError("harness: cannot write " + file.string());
  out << text;
}

}  // namespace

void write_bundle(const PathBundle& b, const std::string& directory, int max_paths) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  const fs::path dir(directory);
  const int persisted = std::min(b.n_paths(), std::max(max_paths, 0));
  const auto cols = persisted_columns(b);

  {
    std::ofstream out(dir / "paths.csv", std::ios::binary);
    if (!out) throw ValidationError("harness: cannot write paths.csv");
    out << "path_id,time,process,state,order,value\n";
    std::string line;
    for (int p = 0; p < persisted; ++p)
      for (int t = 0; t < b.n_times(); ++t) {
        const std::string head = std::to_string(p) + ',' + fmt(b.times()[static_cast<std::size_t>(t)]) + ',';
        for (const auto& c : cols) {
          line = head;
          line += c.process;
          line += ',' + std::to_string(c.state) + ',' + std::to_string(c.order) + ',' +
                  fmt(persisted_value(b, c, p, t)) + '\n';
          out << line;
        }
      }
  }
  {
    std::ofstream out(dir / "jumps.csv", std::ios::binary);
    if (!out) throw ValidationError("harness: cannot write jumps.csv");
    out << "path_id,kind,time,state,mark,value\n";
    for (int p = 0; p < persisted; ++p)
      for (const auto& r : b.jumps(p))
        out << p << ',' << (r.kind == JumpRecord::Kind::chain ? "chain" : "levy") << ',' << fmt(r.time) << ','
            << r.state + 1 << ',' << fmt(r.mark) << ',' << fmt(r.value) << '\n';
  }
  write_text(dir / "paths.schema.json", schema_json(b, persisted).dump(2) + "\n");

  std::string coeffs;
  for (const auto& c : b.basis().teugels) coeffs += format_coefficients(c);
  for (const auto& c : b.basis().impulse)
    if (c) coeffs += format_coefficients(*c);
  write_text(dir / "coefficients.txt", coeffs);

  json m;
  m["config_hash"] = b.config().hash();
  m["seed"] = b.path_set().seed;
  m["version"] = library_version();
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  m["files"] = {"paths.csv", "jumps.csv", "paths.schema.json", "coefficients.txt"};
  m["persisted_paths"] = persisted;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ValidationError("harness: bad number '" + s + "'");
  return v;
}

}  // namespace

PathBundle read_bundle(const std::string& directory) {
  namespace fs = std::filesystem;
  const fs::path dir(directory);
  json schema;
  {
    std::ifstream in(dir / "paths.schema.json");
    if (!in) throw ValidationError("harness: missing paths.schema.json in " + directory);
    try {
      in >> schema;
    } catch (const json::exception& e) {
      throw ValidationError(std::string("harness: schema: ") + e.what());
    }
  }
  const ScenarioConfig cfg = ScenarioConfig::from_json(schema.at("config"));
  if (cfg.hash() != schema.at("config_hash").get<std::string>())
    throw ValidationError("harness: config hash mismatch in schema");
  const auto& ps = schema.at("path_set");
  PathSet set{ps.at("seed").get<std::uint64_t>(), ps.at("first_path").get<std::uint64_t>(),
              ps.at("n_paths").get<int>()};
  const int persisted = ps.at("persisted_paths").get<int>();
  PathBundle b(cfg, set, persisted);

  const auto cols = persisted_columns(b);
  const auto& jcols = schema.at("columns");
  if (jcols.size() != cols.size()) throw ValidationError("harness: schema columns do not match the config");
  for (std::size_t c = 0; c < cols.size(); ++c)
    if (jcols[c].at("process").get<std::string>() != cols[c].process || jcols[c].at("state").get<int>() != cols[c].state ||
        jcols[c].at("order").get<int>() != cols[c].order)
      throw ValidationError("harness: schema column " + std::to_string(c) + " does not match the config");
  if (schema.at("times").get<std::vector<double>>() != b.times())
    throw ValidationError("harness: schema times do not match the config");

  std::vector<double> derived;  // [p][t][c] for checked paths
  std::map<int, std::size_t> checked;
  {
    std::ifstream in(dir / "paths.csv");
    if (!in) throw ValidationError("harness: missing paths.csv");
    std::string line;
    std::getline(in, line);
    const std::size_t per_path = static_cast<std::size_t>(b.n_times()) * cols.size();
    for (std::size_t row = 0; row < static_cast<std::size_t>(persisted) * per_path; ++row) {
      if (!std::getline(in, line)) throw ValidationError("harness: paths.csv is truncated");
      const auto f = split(line);
      if (f.size() != 6) throw ValidationError("harness: malformed paths.csv row " + std::to_string(row + 2));
      const int p = static_cast<int>(row / per_path);
      const int t = static_cast<int>((row % per_path) / cols.size());
      const auto& c = cols[row % cols.size()];
      if (std::stoi(f[0]) != p || f[2] != c.process)
        throw ValidationError("harness: paths.csv row " + std::to_string(row + 2) + " out of order");
      const double v = parse_double(f[5]);
      if (c.primitive >= 0) {
        b.primitive(c.primitive, p, t) = v;
      } else if (p % 100 == 0) {
        auto [it, fresh] = checked.try_emplace(p, derived.size());
        if (fresh) derived.resize(derived.size() + per_path, 0.0);
        derived[it->second + row % per_path] = v;
      }
    }
  }
  for (const auto& [p, base] : checked)
    for (int t = 0; t < b.n_times(); ++t)
      for (std::size_t c = 0; c < cols.size(); ++c) {
        if (cols[c].primitive >= 0) continue;
        const double stored = derived[base + static_cast<std::size_t>(t) * cols.size() + c];
        const double fresh = persisted_value(b, cols[c], p, t);
        if (std::abs(stored - fresh) > 1e-12 * std::max(1.0, std::abs(fresh)))
          throw NumericError("harness: derived column " + cols[c].process + " of path " + std::to_string(p) +
                             " does not match its primitives");
      }

  std::vector<std::vector<JumpRecord>> records(static_cast<std::size_t>(persisted));
  {
    std::ifstream in(dir / "jumps.csv");
    if (!in) throw ValidationError("harness: missing jumps.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split(line);
      if (f.size() != 6) throw ValidationError("harness: malformed jumps.csv row");
      const int p = std::stoi(f[0]);
      if (p < 0 || p >= persisted) throw ValidationError("harness: jumps.csv path id out of range");
      JumpRecord r;
      r.kind = f[1] == "chain" ? JumpRecord::Kind::chain : JumpRecord::Kind::levy;
      r.time = parse_double(f[2]);
      r.state = std::stoi(f[3]) - 1;
      r.mark = parse_double(f[4]);
      r.value = parse_double(f[5]);
      records[static_cast<std::size_t>(p)].push_back(r);
    }
  }
  b.set_jumps(std::move(records));
  return b;
}

}  // namespace imap
