#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "acceptance.hpp"
#include "error.hpp"
#include "graphs.hpp"
#include "io.hpp"
#include "moments.hpp"
#include "rng.hpp"
#include "spinsys.hpp"
#include "sweep.hpp"
#include "swsim.hpp"
#include "treefix.hpp"

namespace pottslab::cli {

using nlohmann::json;

struct Globals {
  std::uint64_t seed = 1;
  int threads = default_threads();
  std::string config;
  std::string out;
  std::string csv;
  bool json = false;
};

// Everything a command handler needs after parsing.
struct Context {
  const Globals& g;
  std::string command;
  std::vector<std::pair<std::string, std::string>> config;
  std::ostream& out;
};

namespace detail {

// Options that only steer where output goes; they are left out of embedded configs.
inline bool is_plumbing(const std::string& name) {
  return name == "help" || name == "config" || name == "out" || name == "csv" || name == "json" ||
         name == "threads" || name == "seed";
}

inline std::string option_value(const CLI::Option* o) {
  if (o->get_type_size() == 0) return o->count() > 0 ? "true" : "false";
  if (o->count() == 0) return o->get_default_str();
  const auto& r = o->results();
  return r.empty() ? std::string() : r.back();
}

inline void collect_options(const CLI::App* app, std::vector<std::pair<std::string, std::string>>& cfg) {
  for (const CLI::Option* o : app->get_options()) {
    std::string name = o->get_single_name();
    while (!name.empty() && name.front() == '-') name.erase(name.begin());
    if (name.empty() || is_plumbing(name)) continue;
    cfg.emplace_back(name, option_value(o));
  }
}

inline std::string command_path(const CLI::App* leaf) {
  std::string path;
  for (const CLI::App* a = leaf; a != nullptr && a->get_parent() != nullptr; a = a->get_parent())
    path = path.empty() ? a->get_name() : a->get_name() + " " + path;
  return path;
}

inline std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double x = 0;
    auto r = std::from_chars(item.data(), item.data() + item.size(), x);
    require(r.ec == std::errc() && r.ptr == item.data() + item.size(), what + ": '" + item + "' is not a number");
    v.push_back(x);
  }
  require(!v.empty(), what + " is empty");
  return v;
}

// "name:K" with a 1-based K, or bare "name" meaning K = 1.
inline std::pair<std::string, int> parse_tagged(const std::string& s) {
  auto c = s.find(':');
  if (c == std::string::npos) return {s, 1};
  std::string num = s.substr(c + 1);
  int k = 0;
  auto r = std::from_chars(num.data(), num.data() + num.size(), k);
  require(r.ec == std::errc() && r.ptr == num.data() + num.size(), "'" + s + "' has a malformed index");
  return {s.substr(0, c), k};
}

inline json json_cell(const std::string& s) {
  if (s.empty()) return nullptr;
  if (s == "true") return true;
  if (s == "false") return false;
  long long i = 0;
  auto ri = std::from_chars(s.data(), s.data() + s.size(), i);
  if (ri.ec == std::errc() && ri.ptr == s.data() + s.size()) return i;
  double x = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec == std::errc() && r.ptr == s.data() + s.size()) return x;
  return s;
}

inline json meta_json(const Context& ctx) {
  json cfg = json::object();
  for (const auto& [k, v] : ctx.config) cfg[k] = json_cell(v);
  return {{"command", ctx.command}, {"seed", ctx.g.seed}, {"config", cfg}};
}

inline std::string destination(const Context& ctx) { return ctx.g.csv.empty() ? ctx.g.out : ctx.g.csv; }

inline void deliver(const Context& ctx, const std::string& content) {
  auto path = destination(ctx);
  if (path.empty()) {
    ctx.out << content;
  } else {
    write_atomic(path, content);
  }
}

inline void emit_json(const Context& ctx, json body) {
  json doc = meta_json(ctx);
  for (auto& [k, v] : body.items()) doc[k] = v;
  deliver(ctx, doc.dump(2) + "\n");
}

inline void emit_table(const Context& ctx, Table t) {
  if (ctx.g.json && ctx.g.csv.empty()) {
    json cols = json::array(), rows = json::array();
    for (const auto& c : t.columns) cols.push_back({{"name", c.name}, {"unit", c.unit}});
    for (const auto& r : t.rows) {
      json row = json::object();
      for (std::size_t i = 0; i < r.size(); ++i) row[t.columns[i].name] = json_cell(r[i]);
      rows.push_back(row);
    }
    json body = {{"columns", cols}, {"rows", rows}};
    for (const auto& [k, v] : t.meta) body[k] = json_cell(v);
    emit_json(ctx, body);
    return;
  }
  Table full;
  full.meta.emplace_back("command", ctx.command);
  full.meta.emplace_back("seed", fmt(ctx.g.seed));
  for (const auto& [k, v] : ctx.config) full.meta.emplace_back("config." + k, v);
  for (auto& m : t.meta) full.meta.push_back(std::move(m));
  full.columns = std::move(t.columns);
  full.rows = std::move(t.rows);
  std::ostringstream os;
  write_csv(os, full);
  deliver(ctx, os.str());
}

inline void emit_graph(const Context& ctx, const RegularGraph& g, const std::vector<std::string>& notes = {}) {
  std::ostringstream os;
  write_graph(os, g);
  os << "# command " << ctx.command << '\n';
  for (const auto& [k, v] : ctx.config) os << "# config " << k << '=' << v << '\n';
  for (const auto& n : notes) os << "# " << n << '\n';
  deliver(ctx, os.str());
}

inline RegularGraph load_graph(const std::string& path) {
  require(!path.empty(), "--graph is required");
  std::istringstream is(read_file(path));
  return read_graph(is);
}

inline std::vector<std::string> cells(const Vector& v) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(fmt(v[i]));
  return out;
}

inline void append(std::vector<std::string>& row, const std::vector<std::string>& more) {
  row.insert(row.end(), more.begin(), more.end());
}

inline void indexed_columns(std::vector<Column>& cols, const std::string& stem, int q, const std::string& unit) {
  for (int i = 1; i <= q; ++i) cols.push_back({stem + "_" + std::to_string(i), unit});
}

}  // namespace detail

// ---------------------------------------------------------------- model selection

struct ModelArgs {
  std::string model = "potts";
  int q = 0;
  double B = 0;

  void add(CLI::App* app) {
    app->add_option("--model", model, "model JSON file, or 'potts' with --q and --B");
    app->add_option("--q", q, "number of colors");
    app->add_option("--B", B, "Potts activity");
  }
  InteractionMatrix resolve() const {
    if (model == "potts") {
      require(q > 0, "--q is required for the Potts model");
      require(B > 0, "--B is required for the Potts model");
      return build_potts_matrix(q, B);
    }
    return load_model(model);
  }
};

// ---------------------------------------------------------------- commands

inline int cmd_thresholds(const Context& ctx, int q, int delta, std::optional<int> qMax, std::optional<int> deltaMax) {
  if (!qMax && !deltaMax) {
    auto th = potts_thresholds(q, delta);
    if (ctx.g.json) {
      detail::emit_json(ctx, {{"Bu", th.Bu}, {"Bo", th.Bo}, {"Brc", th.Brc}});
    } else {
      Table t;
      t.columns = {{"q", "count"}, {"delta", "count"}, {"Bu", "activity"}, {"Bo", "activity"}, {"Brc", "activity"}};
      t.add_row({fmt(q), fmt(delta), fmt(th.Bu), fmt(th.Bo), fmt(th.Brc)});
      detail::emit_table(ctx, std::move(t));
    }
    return 0;
  }
  const int q1 = qMax.value_or(q), d1 = deltaMax.value_or(delta);
  std::vector<std::pair<int, int>> grid;
  for (int a = q; a <= q1; ++a)
    for (int d = delta; d <= d1; ++d) grid.emplace_back(a, d);
  auto res = sweep<PottsThresholds>(grid.size(), ctx.g.threads,
                                    [&](std::size_t i) { return potts_thresholds(grid[i].first, grid[i].second); });
  Table t;
  t.columns = {{"q", "count"},     {"delta", "count"},   {"Bu", "activity"}, {"Bo", "activity"},
               {"Brc", "activity"}, {"ordering", "flag"}, {"error", "text"}};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& th = res.rows[i];
    if (!res.errors[i].empty()) {
      t.add_row({fmt(grid[i].first), fmt(grid[i].second), "", "", "", "", res.errors[i]});
      continue;
    }
    bool ok = th.Bu < th.Bo && th.Bo < th.Brc;
    t.add_row({fmt(grid[i].first), fmt(grid[i].second), fmt(th.Bu), fmt(th.Bo), fmt(th.Brc), ok ? "ok" : "violated",
               ""});
  }
  detail::emit_table(ctx, std::move(t));
  return res.failed() ? 1 : 0;
}

inline int cmd_fixpoints(const Context& ctx, const ModelArgs& m, int delta) {
  auto M = m.resolve();
  auto fps = model_fixpoints(M, delta, ctx.g.seed);
  const int q = M.q();
  if (ctx.g.json) {
    json arr = json::array();
    for (const auto& f : fps) {
      json o = {{"R", std::vector<double>(f.R.data(), f.R.data() + q)},
                {"alpha", std::vector<double>(f.alpha.data(), f.alpha.data() + q)},
                {"stability", to_string(f.stability)},
                {"hessianNegative", f.hessianNegative},
                {"jacobianEigen", f.jacobianEigen},
                {"hessianEigen", f.hessianEigen},
                {"psi1", psi1(M, delta, f.alpha)}};
      if (f.potts) {
        o["t"] = f.potts->t;
        o["x"] = f.potts->x;
      }
      arr.push_back(o);
    }
    detail::emit_json(ctx, {{"fixpoints", arr}});
    return 0;
  }
  Table t;
  t.columns = {{"index", "count"}, {"stability", "label"}, {"hessian_negative", "flag"}, {"t", "count"}, {"x", "ratio"}};
  detail::indexed_columns(t.columns, "R", q, "ratio");
  detail::indexed_columns(t.columns, "alpha", q, "probability");
  t.columns.push_back({"psi1", "nats"});
  for (std::size_t i = 0; i < fps.size(); ++i) {
    const auto& f = fps[i];
    std::vector<std::string> row = {fmt(static_cast<int>(i)), to_string(f.stability), fmt(f.hessianNegative),
                                    f.potts ? fmt(f.potts->t) : "", f.potts ? fmt(f.potts->x) : ""};
    detail::append(row, detail::cells(f.R));
    detail::append(row, detail::cells(f.alpha));
    row.push_back(fmt(psi1(M, delta, f.alpha)));
    t.add_row(std::move(row));
  }
  detail::emit_table(ctx, std::move(t));
  return 0;
}

inline int cmd_phase_diagram(const Context& ctx, int q, int delta, std::optional<double> B, std::optional<double> from,
                             std::optional<double> to, int steps) {
  require(steps >= 0, "--B-steps must be nonnegative");
  require(from.has_value() == to.has_value(), "--B-from and --B-to go together");
  auto th = potts_thresholds(q, delta);
  std::vector<double> grid;
  if (B) {
    grid.push_back(*B);
  } else if (from) {
    for (int k = 0; k < steps; ++k) grid.push_back(steps == 1 ? *from : *from + (*to - *from) * k / (steps - 1));
  } else {
    for (int k = 1; k <= steps; ++k) grid.push_back(th.Bu + (th.Brc - th.Bu) * k / (steps + 1));
  }
  auto res = sweep<PhaseDiagramPoint>(grid.size(), ctx.g.threads,
                                      [&](std::size_t i) { return potts_phase_diagram(q, delta, grid[i]); });
  Table t;
  t.add_meta("Bu", fmt(th.Bu));
  t.add_meta("Bo", fmt(th.Bo));
  t.add_meta("Brc", fmt(th.Brc));
  t.columns = {{"B", "activity"},         {"regime", "label"},      {"dif", "nats"},
               {"local_maxima", "count"}, {"dominant", "count"},    {"error", "text"}};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!res.errors[i].empty()) {
      t.add_row({fmt(grid[i]), "", "", "", "", res.errors[i]});
      continue;
    }
    const auto& p = res.rows[i];
    t.add_row({fmt(grid[i]), to_string(p.regime), p.dif ? fmt(*p.dif) : "",
               fmt(static_cast<int>(p.localMaxima.size())), fmt(static_cast<int>(p.dominantSet.size())), ""});
  }
  detail::emit_table(ctx, std::move(t));
  return res.failed() ? 1 : 0;
}

inline int cmd_moments(const Context& ctx, const ModelArgs& m, int delta, const std::string& alphaText,
                       std::optional<int> exactN) {
  auto M = m.resolve();
  const int q = M.q();
  require(!exactN || !alphaText.empty(), "--exact-n needs --alpha");
  MomentOptions opt;
  opt.seed = ctx.g.seed;
  opt.psi2.seed = ctx.g.seed;
  Table t;
  detail::indexed_columns(t.columns, "alpha", q, "probability");
  t.columns.insert(t.columns.end(), {{"psi1", "nats"}, {"psi2", "nats"}, {"norm", "ratio"}, {"dominant", "flag"}});
  if (exactN) t.columns.insert(t.columns.end(), {{"ln_first_moment", "nats"}, {"ln_second_moment", "nats"}});
  if (alphaText.empty()) {
    auto rep = moment_report(M, delta, opt);
    if (rep.gridExceeded) t.add_meta("warning", "simplex scan found a phase above every fixpoint phase");
    for (std::size_t i = 0; i < rep.phases.size(); ++i) {
      const auto& ph = rep.phases[i];
      auto row = detail::cells(ph.alpha);
      detail::append(row, {fmt(ph.psi1), fmt(rep.phasePsi2[i]), rep.normValue ? fmt(*rep.normValue) : "",
                           fmt(ph.dominant)});
      t.add_row(std::move(row));
    }
  } else {
    auto a = detail::parse_list(alphaText, "--alpha");
    require(static_cast<int>(a.size()) == q, "--alpha needs q entries");
    Vector alpha = Eigen::Map<Vector>(a.data(), q);
    require_simplex(alpha, q);
    opt.computePsi2 = false;
    auto rep = moment_report(M, delta, opt);
    double p1 = psi1(M, delta, alpha);
    auto row = detail::cells(alpha);
    detail::append(row, {fmt(p1), fmt(psi2(M, delta, alpha, opt.psi2)), rep.normValue ? fmt(*rep.normValue) : "",
                         fmt(p1 >= rep.psi1Max - 1e-9)});
    if (exactN)
      detail::append(row, {fmt(log_first_moment_exact(*exactN, delta, M, alpha)),
                           fmt(log_second_moment_exact(*exactN, delta, M, alpha))});
    t.add_row(std::move(row));
  }
  detail::emit_table(ctx, std::move(t));
  return 0;
}

inline int cmd_norm(const Context& ctx, const ModelArgs& m, std::optional<double> p, std::optional<int> delta) {
  auto M = m.resolve();
  require(p || delta, "--p or --delta is required");
  double pp = p ? *p : double(*delta) / (*delta - 1);
  require(pp > 1, "--p must exceed 1");
  auto r = matrix_norm_p2(cholesky_factor(M), pp, {}, 32, ctx.g.seed);
  Table t;
  t.add_meta("p", fmt(pp));
  t.columns = {{"norm", "ratio"}};
  detail::indexed_columns(t.columns, "argmax", M.q(), "ratio");
  std::vector<std::string> row = {fmt(r.value)};
  detail::append(row, detail::cells(r.argmax));
  t.add_row(std::move(row));
  detail::emit_table(ctx, std::move(t));
  return 0;
}

inline int cmd_graph_sample(const Context& ctx, int n, int delta) {
  detail::emit_graph(ctx, pairing_sample(n, delta, ctx.g.seed));
  return 0;
}

inline int cmd_graph_enumerate(const Context& ctx, int n, int delta, const ModelArgs& m, bool withModel) {
  std::optional<InteractionMatrix> M;
  if (withModel) M = m.resolve();
  double sumZ = 0;
  std::uint64_t loops = 0;
  auto count = enumerate_pairings(n, delta, [&](const RegularGraph& g) {
    for (auto [u, v] : g.edges) loops += u == v ? 1 : 0;
    if (M) sumZ += brute_gibbs(g, *M).Z;
  });
  Table t;
  t.columns = {{"pairings", "count"}, {"mean_self_loops", "count"}};
  std::vector<std::string> row = {fmt(count), fmt(double(loops) / count)};
  if (M) {
    t.columns.push_back({"mean_Z", "weight"});
    row.push_back(fmt(sumZ / count));
  }
  t.add_row(std::move(row));
  detail::emit_table(ctx, std::move(t));
  return 0;
}

inline int cmd_graph_cycles(const Context& ctx, const std::string& graphPath, int n, int delta, int samples,
                            int kmax) {
  Table t;
  if (!graphPath.empty()) {
    auto g = detail::load_graph(graphPath);
    auto c = count_cycles(g, kmax);
    t.columns = {{"k", "count"}, {"cycles", "count"}};
    for (int k = 1; k <= kmax; ++k) t.add_row({fmt(k), fmt(c[k - 1])});
    detail::emit_table(ctx, std::move(t));
    return 0;
  }
  require(samples >= 0, "--samples must be nonnegative");
  require_pairing_size(n, delta);
  auto res = sweep<std::vector<std::uint64_t>>(samples, ctx.g.threads, [&](std::size_t i) {
    return count_cycles(pairing_sample(n, delta, Rng::stream(ctx.g.seed, i).next()), kmax);
  });
  if (res.failed()) {
    for (const auto& e : res.errors)
      if (!e.empty()) throw ValidationError(e);
  }
  t.columns = {{"k", "count"}, {"mean", "count"}, {"poisson_mean", "count"}};
  for (int k = 1; k <= kmax; ++k) {
    double s = 0;
    for (const auto& r : res.rows) s += double(r[k - 1]);
    t.add_row({fmt(k), samples > 0 ? fmt(s / samples) : "", fmt(std::pow(delta - 1.0, k) / (2.0 * k))});
  }
  detail::emit_table(ctx, std::move(t));
  return 0;
}

struct GadgetArgs {
  int delta = 3;
  int trees = 2;
  int depth = 1;
  int core = 8;

  void add(CLI::App* app) {
    app->add_option("--delta", delta, "degree");
    app->add_option("--trees", trees, "trees per side");
    app->add_option("--depth", depth, "tree depth");
    app->add_option("--core", core, "core vertices per side");
  }
};

inline int cmd_gadget(const Context& ctx, const GadgetArgs& a) {
  detail::emit_graph(ctx, build_gadget(a.delta, a.trees, a.depth, a.core, ctx.g.seed));
  return 0;
}

inline int cmd_reduce(const Context& ctx, const std::string& graphPath, const GadgetArgs& a, const ModelArgs& m,
                      bool withModel) {
  auto H = detail::load_graph(graphPath);
  std::vector<RegularGraph> gadgets;
  for (int v = 0; v < H.n; ++v)
    gadgets.push_back(build_gadget(a.delta, a.trees, a.depth, a.core, Rng::stream(ctx.g.seed, v).next()));
  auto G = build_reduction(H, gadgets);
  G.seed = ctx.g.seed;
  std::vector<std::string> notes;
  if (withModel) {
    require(m.model == "potts", "reduction constants are defined for the Potts model");
    auto c = reduction_constants(m.q, a.delta, m.B);
    notes.push_back("constants p=" + fmt(c.p) + " A=" + fmt(c.A) + " D=" + fmt(c.D) + " Bstar=" + fmt(c.Bstar) +
                    " C_H=" + fmt(c.C_H(static_cast<int>(H.edges.size()))));
  }
  detail::emit_graph(ctx, G, notes);
  return 0;
}

inline ChainStart parse_start(const std::string& s, int q) {
  auto [kind, k] = detail::parse_tagged(s);
  ChainStart st;
  if (kind == "disordered") return st;
  require(kind == "ordered", "--start must be 'disordered' or 'ordered:K'");
  require(k >= 1 && k <= q, "ordered start color must be in 1..q");
  st.kind = ChainStart::ordered;
  st.color = k - 1;
  return st;
}

inline int cmd_sw_run(const Context& ctx, const std::string& graphPath, int q, double B, std::int64_t steps,
                      const std::string& start, std::optional<double> eps) {
  auto G = detail::load_graph(graphPath);
  auto tr = run_chain(G, q, B, steps, parse_start(start, q), ctx.g.seed, eps);
  Table t;
  t.add_meta("Eu", fmt(tr.reference.Eu));
  if (tr.reference.Em) t.add_meta("Em", fmt(*tr.reference.Em));
  if (tr.reference.a) t.add_meta("a", fmt(*tr.reference.a));
  t.add_meta("eps", fmt(tr.reference.eps));
  t.columns = {{"t", "count"},          {"phase", "label"},         {"umt", "label"},
               {"majority_color", "color"}, {"mono_density", "edges per vertex"}};
  detail::indexed_columns(t.columns, "freq", q, "probability");
  for (const auto& r : tr.records) {
    std::vector<std::string> row = {fmt(static_cast<long long>(r.t)), r.phaseLabel == 0 ? "ordered" : "disordered",
                                    to_string(r.umt), fmt(r.majorityColor + 1), fmt(r.monoDensity)};
    for (double f : r.colorFrequencies) row.push_back(fmt(f));
    t.add_row(std::move(row));
  }
  detail::emit_table(ctx, std::move(t));
  return 0;
}

inline int cmd_sw_exact(const Context& ctx, const std::string& graphPath, int q, double B, const std::string& cut) {
  auto G = detail::load_graph(graphPath);
  auto [kind, k] = detail::parse_tagged(cut);
  require(kind == "phase", "--cut must be 'phase:K'");
  require(k >= 1 && k <= q, "cut color must be in 1..q");
  auto K = exact_sw_kernel(G, q, B);
  auto M = build_potts_matrix(q, B);
  Vector mu = gibbs_vector(brute_gibbs(G, M));
  const Eigen::Index N = mu.size();
  double rowErr = 0, balance = 0, massS = 0;
  for (Eigen::Index i = 0; i < N; ++i) {
    rowErr = std::max(rowErr, std::abs(K.P.row(i).sum() - 1));
    for (Eigen::Index j = 0; j < N; ++j) balance = std::max(balance, std::abs(mu[i] * K.P(i, j) - mu[j] * K.P(j, i)));
  }
  double stat = (mu.transpose() * K.P - mu.transpose()).cwiseAbs().maxCoeff();
  auto S = phase_cut(G, q, k - 1);
  for (Eigen::Index i = 0; i < N; ++i) massS += S[i] ? mu[i] : 0;
  Table t;
  t.columns = {{"states", "count"},          {"row_sum_error", "probability"}, {"detailed_balance_gap", "probability"},
               {"stationarity_error", "probability"}, {"cut_mass", "probability"},  {"conductance", "ratio"}};
  t.add_row({fmt(static_cast<long long>(N)), fmt(rowErr), fmt(balance), fmt(stat), fmt(massS),
             fmt(conductance(K.P, mu, S))});
  detail::emit_table(ctx, std::move(t));
  return 0;
}

inline int cmd_verify(const Context& ctx, const std::string& suite) {
  require(suite == "primary", "unknown suite '" + suite + "' (available: primary)");
  return acceptance::run_all(ctx.out) ? 0 : 1;
}

// ---------------------------------------------------------------- entry point

namespace detail {

// Every key of a flat JSON object becomes a "--key value" pair placed after the command
// line, so config values win over flags given on the command line.
inline std::vector<std::string> config_arguments(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("config '" + path + "' is not valid JSON: " + e.what());
  }
  require(j.is_object(), "config '" + path + "' must be a JSON object");
  std::vector<std::string> out;
  for (const auto& [k, v] : j.items()) {
    require(k != "config", "config files cannot name another config");
    if (v.is_null()) continue;
    if (v.is_boolean()) {
      if (v.get<bool>()) out.push_back("--" + k);
      continue;
    }
    std::string text;
    if (v.is_string()) {
      text = v.get<std::string>();
    } else if (v.is_array()) {
      for (const auto& e : v) {
        require(e.is_number(), "config array '" + k + "' must hold numbers");
        text += (text.empty() ? "" : ",") + e.dump();
      }
    } else {
      require(v.is_number(), "config value '" + k + "' must be a string, number, boolean or array");
      text = v.dump();
    }
    out.push_back("--" + k);
    out.push_back(text);
  }
  return out;
}

inline std::optional<std::string> find_config(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  return path;
}

}  // namespace detail

inline int run_command(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  Globals g;
  CLI::App app{"Potts model phase diagrams, moment exponents and Swendsen-Wang dynamics on random regular graphs",
               "potts-lab"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  app.require_subcommand(1);
  app.add_option("--seed", g.seed, "random seed")->envname("POTTSLAB_SEED");
  app.add_option("--threads", g.threads, "worker threads for sweeps");
  app.add_option("--config", g.config, "JSON object of flag values that override the command line");
  app.add_option("--out", g.out, "write the artifact to this file");
  app.add_option("--csv", g.csv, "write a CSV artifact to this file");
  app.add_flag("--json", g.json, "emit JSON instead of CSV");

  std::vector<std::pair<CLI::App*, std::function<int(const Context&)>>> leaves;
  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& help) {
    auto* s = parent->add_subcommand(name, help);
    s->fallthrough();
    return s;
  };

  // thresholds
  auto* th = leaf(&app, "thresholds", "uniqueness, coexistence and random-cluster thresholds");
  auto thArgs = std::make_shared<std::tuple<int, int, std::optional<int>, std::optional<int>>>(0, 0, std::nullopt,
                                                                                              std::nullopt);
  th->add_option("--q", std::get<0>(*thArgs), "number of colors")->required();
  th->add_option("--delta", std::get<1>(*thArgs), "degree")->required();
  th->add_option("--q-max", std::get<2>(*thArgs), "tabulate q up to this value");
  th->add_option("--delta-max", std::get<3>(*thArgs), "tabulate delta up to this value");
  leaves.emplace_back(th, [thArgs](const Context& c) {
    auto& [q, d, qm, dm] = *thArgs;
    return cmd_thresholds(c, q, d, qm, dm);
  });

  // fixpoints
  auto* fx = leaf(&app, "fixpoints", "tree-recursion fixpoints with stability");
  auto fxModel = std::make_shared<ModelArgs>();
  auto fxDelta = std::make_shared<int>(0);
  fxModel->add(fx);
  fx->add_option("--delta", *fxDelta, "degree")->required();
  leaves.emplace_back(fx, [fxModel, fxDelta](const Context& c) { return cmd_fixpoints(c, *fxModel, *fxDelta); });

  // phase-diagram
  auto* pd = leaf(&app, "phase-diagram", "Potts regime and DIF over an activity grid");
  struct PdArgs {
    int q = 0, delta = 0, steps = 50;
    std::optional<double> B, from, to;
  };
  auto pdArgs = std::make_shared<PdArgs>();
  pd->add_option("--q", pdArgs->q, "number of colors")->required();
  pd->add_option("--delta", pdArgs->delta, "degree")->required();
  pd->add_option("--B", pdArgs->B, "single activity");
  pd->add_option("--B-from", pdArgs->from, "first grid activity");
  pd->add_option("--B-to", pdArgs->to, "last grid activity");
  pd->add_option("--B-steps", pdArgs->steps, "grid points");
  leaves.emplace_back(pd, [pdArgs](const Context& c) {
    return cmd_phase_diagram(c, pdArgs->q, pdArgs->delta, pdArgs->B, pdArgs->from, pdArgs->to, pdArgs->steps);
  });

  // moments
  auto* mo = leaf(&app, "moments", "first and second moment exponents");
  struct MoArgs {
    ModelArgs model;
    int delta = 0;
    std::string alpha;
    std::optional<int> exactN;
  };
  auto moArgs = std::make_shared<MoArgs>();
  moArgs->model.add(mo);
  mo->add_option("--delta", moArgs->delta, "degree")->required();
  mo->add_option("--alpha", moArgs->alpha, "phase as comma-separated frequencies");
  mo->add_option("--exact-n", moArgs->exactN, "also compute exact pairing-model moments at this n");
  leaves.emplace_back(mo, [moArgs](const Context& c) {
    return cmd_moments(c, moArgs->model, moArgs->delta, moArgs->alpha, moArgs->exactN);
  });

  // norm
  auto* nm = leaf(&app, "norm", "induced p->2 norm of the Cholesky factor");
  struct NmArgs {
    ModelArgs model;
    std::optional<double> p;
    std::optional<int> delta;
  };
  auto nmArgs = std::make_shared<NmArgs>();
  nmArgs->model.add(nm);
  nm->add_option("--p", nmArgs->p, "norm exponent");
  nm->add_option("--delta", nmArgs->delta, "degree; p = delta/(delta-1)");
  leaves.emplace_back(nm, [nmArgs](const Context& c) { return cmd_norm(c, nmArgs->model, nmArgs->p, nmArgs->delta); });

  // graph
  auto* gr = leaf(&app, "graph", "random regular graphs, gadgets and reductions");
  gr->require_subcommand(1);
  struct GrArgs {
    int n = 0, delta = 3, samples = 1000, kmax = 4;
    std::string graph;
    ModelArgs model;
    GadgetArgs gadget;
  };
  auto grArgs = std::make_shared<GrArgs>();
  auto* gs = leaf(gr, "sample", "sample a pairing-model graph");
  gs->add_option("--n", grArgs->n, "vertices")->required();
  gs->add_option("--delta", grArgs->delta, "degree");
  leaves.emplace_back(gs, [grArgs](const Context& c) { return cmd_graph_sample(c, grArgs->n, grArgs->delta); });
  auto* ge = leaf(gr, "enumerate", "enumerate every pairing on n vertices");
  ge->add_option("--n", grArgs->n, "vertices")->required();
  ge->add_option("--delta", grArgs->delta, "degree");
  grArgs->model.add(ge);
  leaves.emplace_back(ge, [grArgs, ge](const Context& c) {
    bool withModel = ge->get_option("--q")->count() > 0 || ge->get_option("--model")->count() > 0;
    return cmd_graph_enumerate(c, grArgs->n, grArgs->delta, grArgs->model, withModel);
  });
  auto* gc = leaf(gr, "cycles", "short cycle counts");
  gc->add_option("--graph", grArgs->graph, "count cycles of this graph file");
  gc->add_option("--n", grArgs->n, "vertices of sampled graphs");
  gc->add_option("--delta", grArgs->delta, "degree of sampled graphs");
  gc->add_option("--samples", grArgs->samples, "number of sampled graphs");
  gc->add_option("--kmax", grArgs->kmax, "longest cycle length");
  leaves.emplace_back(gc, [grArgs](const Context& c) {
    return cmd_graph_cycles(c, grArgs->graph, grArgs->n, grArgs->delta, grArgs->samples, grArgs->kmax);
  });

  auto addGadget = [&](CLI::App* parent) {
    auto* s = leaf(parent, "gadget", "bipartite gadget with attached trees");
    auto a = std::make_shared<GadgetArgs>();
    a->add(s);
    leaves.emplace_back(s, [a](const Context& c) { return cmd_gadget(c, *a); });
  };
  auto addReduce = [&](CLI::App* parent) {
    auto* s = leaf(parent, "reduce", "replace each vertex of a graph by a gadget");
    struct RdArgs {
      std::string graph;
      GadgetArgs gadget;
      ModelArgs model;
    };
    auto a = std::make_shared<RdArgs>();
    s->add_option("--graph", a->graph, "host graph file")->required();
    a->gadget.add(s);
    a->model.add(s);
    leaves.emplace_back(s, [a, s](const Context& c) {
      bool withModel = s->get_option("--q")->count() > 0;
      return cmd_reduce(c, a->graph, a->gadget, a->model, withModel);
    });
  };
  addGadget(gr);
  addReduce(gr);
  addGadget(&app);
  addReduce(&app);

  // sw
  auto* sw = leaf(&app, "sw", "Swendsen-Wang dynamics");
  sw->require_subcommand(1);
  struct SwArgs {
    std::string graph, start = "disordered", cut = "phase:1";
    int q = 0;
    double B = 0;
    std::int64_t steps = 1000;
    std::optional<double> eps;
  };
  auto swArgs = std::make_shared<SwArgs>();
  auto* sr = leaf(sw, "run", "simulate a chain and record its trace");
  sr->add_option("--graph", swArgs->graph, "graph file")->required();
  sr->add_option("--q", swArgs->q, "number of colors")->required();
  sr->add_option("--B", swArgs->B, "Potts activity")->required();
  sr->add_option("--steps", swArgs->steps, "updates");
  sr->add_option("--start", swArgs->start, "'disordered' or 'ordered:K' with K in 1..q");
  sr->add_option("--eps", swArgs->eps, "tolerance of the U/M/T classification");
  leaves.emplace_back(sr, [swArgs](const Context& c) {
    return cmd_sw_run(c, swArgs->graph, swArgs->q, swArgs->B, swArgs->steps, swArgs->start, swArgs->eps);
  });
  auto* se = leaf(sw, "exact", "exact kernel checks and cut conductance");
  se->add_option("--graph", swArgs->graph, "graph file")->required();
  se->add_option("--q", swArgs->q, "number of colors")->required();
  se->add_option("--B", swArgs->B, "Potts activity")->required();
  se->add_option("--cut", swArgs->cut, "'phase:K', states whose majority color is K");
  leaves.emplace_back(se, [swArgs](const Context& c) {
    return cmd_sw_exact(c, swArgs->graph, swArgs->q, swArgs->B, swArgs->cut);
  });

  // verify
  auto* vf = leaf(&app, "verify", "run the acceptance suite");
  auto suite = std::make_shared<std::string>("primary");
  vf->add_option("--suite", *suite, "suite name");
  leaves.emplace_back(vf, [suite](const Context& c) { return cmd_verify(c, *suite); });

  try {
    if (auto path = detail::find_config(args)) {
      auto extra = detail::config_arguments(*path);
      args.insert(args.end(), extra.begin(), extra.end());
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    if (code == 0) return 0;
    err << app.help();
    return 1;
  } catch (const GuardViolation& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  for (const auto& [sub, handler] : leaves) {
    if (!sub->parsed()) continue;
    Context ctx{g, detail::command_path(sub), {}, out};
    for (const CLI::App* a = sub; a != nullptr; a = a->get_parent()) {
      std::vector<std::pair<std::string, std::string>> part;
      detail::collect_options(a, part);
      ctx.config.insert(ctx.config.begin(), part.begin(), part.end());
    }
    try {
      return handler(ctx);
    } catch (const GuardViolation& e) {
      err << "error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return 1;
    }
  }
  err << app.help();
  return 1;
}

}  // namespace pottslab::cli
