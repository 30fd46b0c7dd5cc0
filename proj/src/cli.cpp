#include "maser/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <iostream>
#include <memory>
#include <sstream>
#include <utility>
#include <variant>

#include "maser/errors.hpp"
#include "maser/fisher.hpp"
#include "maser/inference.hpp"
#include "maser/parallel.hpp"
#include "maser/spectral.hpp"
#include "maser/trajectory.hpp"

namespace maser {

namespace {

using Cell = std::variant<double, std::int64_t, std::string>;
using Row = std::vector<Cell>;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& xs) {
  std::string s;
  for (const auto& x : xs) s += (s.empty() ? "" : ",") + x;
  return s;
}

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (double x : xs) s += (s.empty() ? "" : ",") + fmt17(x);
  return s;
}

std::vector<std::pair<std::string, std::string>> config_echo(const RunConfig& c) {
  return {
      {"subcommand", c.subcommand},
      {"alpha-min", fmt17(c.alpha_min)},
      {"alpha-max", fmt17(c.alpha_max)},
      {"steps", std::to_string(c.steps)},
      {"phi", c.phi ? fmt17(*c.phi) : ""},
      {"nex", fmt17(c.n_ex)},
      {"nu", fmt17(c.nu)},
      {"tail-tol", fmt17(c.tail_tol)},
      {"horizon", fmt17(c.horizon)},
      {"n-traj", std::to_string(c.n_traj)},
      {"seed", std::to_string(c.seed)},
      {"format", c.format},
      {"channels", join(c.channels)},
      {"u", join(c.u)},
      {"v", join(c.v)},
      {"s", join(c.s)},
      {"times", join(c.times)},
      {"method", join(c.methods)},
      {"in", c.input},
      {"initial-state", std::to_string(c.initial_state)},
  };
}

// Writes rows as they arrive (CSV) or as one document at the end (JSON).
class Emitter {
 public:
  Emitter(const RunConfig& cfg, std::ostream& out, std::vector<std::string> columns)
      : cfg_(cfg), out_(out), columns_(std::move(columns)) {
    if (cfg_.format == "csv") {
      for (const auto& [k, v] : config_echo(cfg_)) out_ << "# " << k << '=' << v << '\n';
      out_ << join(columns_) << '\n';
      out_.flush();
    }
  }

  void row(const Row& r) {
    if (cfg_.format == "csv") {
      std::string line;
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) line += ',';
        std::visit(
            [&](const auto& v) {
              using T = std::decay_t<decltype(v)>;
              if constexpr (std::is_same_v<T, double>) {
                line += fmt17(v);
              } else if constexpr (std::is_same_v<T, std::int64_t>) {
                line += std::to_string(v);
              } else {
                line += v;
              }
            },
            r[i]);
      }
      out_ << line << '\n';
    } else {
      nlohmann::json j = nlohmann::json::array();
      for (const Cell& c : r) std::visit([&](const auto& v) { j.push_back(v); }, c);
      rows_.push_back(std::move(j));
    }
  }

  void finish(const nlohmann::json& error = nullptr) {
    if (cfg_.format == "csv") {
      out_.flush();
      return;
    }
    nlohmann::json doc;
    nlohmann::json conf = nlohmann::json::object();
    for (const auto& [k, v] : config_echo(cfg_)) conf[k] = v;
    doc["config"] = conf;
    doc["columns"] = columns_;
    doc["rows"] = rows_;
    if (!error.is_null()) doc["error"] = error;
    out_ << doc.dump(1) << '\n';
    out_.flush();
  }

 private:
  const RunConfig& cfg_;
  std::ostream& out_;
  std::vector<std::string> columns_;
  nlohmann::json rows_ = nlohmann::json::array();
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Failure {
  std::string code;
  std::string message;
  int exit_code;
};

Failure classify(const std::exception& e) {
  if (const auto* me = dynamic_cast<const Error*>(&e)) {
    const bool config = me->code() == ErrorCode::invalid_argument || me->code() == ErrorCode::parse_error;
    return {to_string(me->code()), me->what(), config ? kExitConfig : kExitNumerical};
  }
  if (dynamic_cast<const ConfigError*>(&e)) return {"config-error", e.what(), kExitConfig};
  return {"internal-error", e.what(), kExitNumerical};
}

int report(const Failure& f, const RunConfig& cfg, std::ostream& err) {
  nlohmann::json line = {{"error", f.code}, {"subcommand", cfg.subcommand}, {"message", f.message}};
  err << line.dump() << '\n';
  return f.exit_code;
}

struct Point {
  double alpha;
  double phi;
};

std::vector<Point> grid(const RunConfig& cfg) {
  const double root = std::sqrt(cfg.n_ex);
  if (cfg.phi) return {{*cfg.phi * root, *cfg.phi}};
  std::vector<Point> pts;
  for (int i = 0; i < cfg.steps; ++i) {
    const double a = cfg.steps == 1 ? cfg.alpha_min
                                    : cfg.alpha_min + (cfg.alpha_max - cfg.alpha_min) * i / (cfg.steps - 1);
    pts.push_back({a, a / root});
  }
  return pts;
}

MaserParams params_at(const RunConfig& cfg, const Point& pt) {
  return MaserParams(pt.phi, cfg.n_ex, cfg.nu);
}

// Computes tasks on the worker pool and emits their rows in task order. Rows
// of tasks before the first failure are written; the failure is rethrown.
void run_tasks(const RunConfig& cfg, std::size_t n, const std::function<std::vector<Row>(std::size_t)>& task,
               Emitter& em) {
  std::vector<std::vector<Row>> rows(n);
  std::vector<std::exception_ptr> errors(n);
  parallel_for(n, cfg.workers ? cfg.workers : default_workers(), [&](std::size_t i) {
    try {
      rows[i] = task(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    for (const Row& r : rows[i]) em.row(r);
  }
}

void run_stationary(const RunConfig& cfg, Emitter& em) {
  const auto pts = grid(cfg);
  run_tasks(cfg, pts.size(), [&](std::size_t i) {
    const StationaryDistribution pi = stationary_distribution(params_at(cfg, pts[i]), cfg.tail_tol);
    std::vector<Row> rows;
    for (std::size_t n = 0; n < pi.probs.size(); ++n) {
      rows.push_back({pts[i].alpha, pts[i].phi, static_cast<std::int64_t>(n), pi.probs[n], pi.mean_photon});
    }
    return rows;
  }, em);
}

void run_fisher_sweep(const RunConfig& cfg, Emitter& em) {
  const auto pts = grid(cfg);
  run_tasks(cfg, pts.size(), [&](std::size_t i) {
    const FisherReport r = fisher_report(params_at(cfg, pts[i]), cfg.tail_tol);
    return std::vector<Row>{{pts[i].alpha, pts[i].phi, r.i_cav, r.i_up, r.i_exc, r.i_tot, r.qfi,
                             r.identity_residual, r.i_gr, r.i_ex_counts, r.i_joint, r.gap}};
  }, em);
}

std::vector<double> or_default(const std::vector<double>& xs, std::vector<double> dflt) {
  return xs.empty() ? dflt : xs;
}

void run_lan_check(const RunConfig& cfg, Emitter& em) {
  const auto pts = grid(cfg);
  const auto us = or_default(cfg.u, {0.25, 0.5, 1.0});
  const auto vs = or_default(cfg.v, {-0.25, -0.5, -1.0});
  if (us.size() != vs.size()) throw ConfigError("--u and --v must have the same length");
  const auto ts = or_default(cfg.times, {1e4});
  run_tasks(cfg, pts.size() * ts.size(), [&](std::size_t task) {
    const Point& pt = pts[task / ts.size()];
    const double t = ts[task % ts.size()];
    const MaserParams p = params_at(cfg, pt);
    const std::size_t n_max = stationary_distribution(p, cfg.tail_tol).n_max;
    std::vector<double> neglog(us.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t j = 0; j < us.size(); ++j) {
      neglog[j] = -lan_log_overlap(p, us[j], vs[j], t, n_max);
      const double x = (us[j] - vs[j]) * (us[j] - vs[j]);
      sxy += x * neglog[j];
      sxx += x * x;
    }
    const double c = sxx > 0.0 ? sxy / sxx : 0.0;
    std::vector<Row> rows;
    for (std::size_t j = 0; j < us.size(); ++j) {
      rows.push_back({pt.alpha, pt.phi, us[j], vs[j], t, std::exp(-neglog[j]), neglog[j], c});
    }
    return rows;
  }, em);
}

TiltVector direction_from(const std::vector<std::string>& channels) {
  if (channels.empty()) return TiltVector::along(Channel::ground);
  TiltVector d;
  for (const auto& name : channels) d = d + TiltVector::along(parse_channel(name));
  return d;
}

void run_clt_check(const RunConfig& cfg, Emitter& em) {
  const auto pts = grid(cfg);
  const auto ss = or_default(cfg.s, {-0.1, 0.1});
  const auto us = or_default(cfg.u, {0.0, 1.0});
  const auto ts = or_default(cfg.times, {1e3, 1e4});
  const TiltVector dir = direction_from(cfg.channels);
  const std::size_t per_point = ts.size() * ss.size() * us.size();
  run_tasks(cfg, pts.size() * per_point, [&](std::size_t task) {
    const Point& pt = pts[task / per_point];
    std::size_t r = task % per_point;
    const double t = ts[r / (ss.size() * us.size())];
    r %= ss.size() * us.size();
    const double s = ss[r / us.size()];
    const double u = us[r % us.size()];
    const MaserParams p = params_at(cfg, pt);
    const std::size_t n_max = stationary_distribution(p, cfg.tail_tol).n_max;
    const double finite = finite_time_log_mgf(p, s, u, t, dir, n_max);
    const double limit = davies_limit(p, s, u, dir, n_max);
    return std::vector<Row>{{pt.alpha, pt.phi, s, u, t, finite, limit, std::abs(finite - limit)}};
  }, em);
}

int run_simulate(const RunConfig& cfg, std::ostream& out) {
  if (cfg.format != "csv") throw ConfigError("simulate writes the trajectory CSV format only");
  const Point pt = grid(cfg).front();
  const MaserParams p = params_at(cfg, pt);
  std::int64_t k0 = cfg.initial_state;
  if (k0 < 0) k0 = draw_initial_state(stationary_distribution(p, cfg.tail_tol).probs, cfg.seed, 0);
  const Trajectory traj = simulate(p, k0, cfg.horizon, cfg.seed);
  write_trajectory_csv(out, traj);
  return kExitOk;
}

ObservedChannels observation_from(const std::vector<std::string>& channels) {
  if (channels.empty()) return ObservedChannels::without_excited();
  ObservedChannels o{false, false, false, false, false};
  for (const auto& name : channels) {
    if (name == "up") {
      o.merge_up = true;
      o.ground = o.absorb = true;
      continue;
    }
    switch (parse_channel(name)) {
      case Channel::ground: o.ground = true; break;
      case Channel::excited: o.excited = true; break;
      case Channel::emit: o.emit = true; break;
      case Channel::absorb: o.absorb = true; break;
    }
  }
  return o;
}

double predicted_information(const std::string& method, const FisherReport& r, const ObservedChannels& partial) {
  if (method == "mle-full") return r.i_tot;
  if (method == "moment-ground") return r.i_gr;
  if (method == "moment-excited") return r.i_ex_counts;
  double info = r.i_cav;
  if (!partial.merge_up) info += r.i_up;
  if (partial.excited) info += r.i_exc;
  return info;
}

void check_methods(const std::vector<std::string>& methods) {
  for (const auto& m : methods) {
    if (m != "mle-full" && m != "mle-partial" && m != "moment-ground" && m != "moment-excited") {
      throw ConfigError("unknown method '" + m + "'");
    }
  }
}

void run_ensemble_cmd(const RunConfig& cfg, Emitter& em) {
  const auto methods = cfg.methods.empty() ? std::vector<std::string>{"moment-ground", "mle-full"} : cfg.methods;
  check_methods(methods);
  const ObservedChannels partial = observation_from(cfg.channels);
  const auto ts = or_default(cfg.times, {cfg.horizon});
  for (const Point& pt : grid(cfg)) {
    const MaserParams p = params_at(cfg, pt);
    const FisherReport rep = fisher_report(p, cfg.tail_tol);
    std::vector<std::optional<MomentDesign>> designs(methods.size());
    for (std::size_t m = 0; m < methods.size(); ++m) {
      if (methods[m] == "moment-ground") designs[m] = moment_design(p, Channel::ground);
      if (methods[m] == "moment-excited") designs[m] = moment_design(p, Channel::excited);
    }
    for (double t : ts) {
      EnsembleSpec spec;
      spec.params = p;
      spec.horizon = t;
      spec.n_traj = cfg.n_traj;
      spec.seed = cfg.seed;
      spec.stationary_start = cfg.initial_state < 0;
      spec.initial_state = std::max<std::int64_t>(cfg.initial_state, 0);
      spec.workers = cfg.workers ? cfg.workers : default_workers();
      const auto estimates = run_ensemble(spec, [&](const PathSummary& path, std::size_t) {
        std::vector<double> est(methods.size());
        for (std::size_t m = 0; m < methods.size(); ++m) {
          if (designs[m]) {
            est[m] = moment_estimator(*designs[m], static_cast<double>(path.total(designs[m]->channel)), t).phi_hat;
          } else if (methods[m] == "mle-full") {
            est[m] = mle_phi(path, cfg.n_ex, cfg.nu, ObservedChannels::full());
          } else {
            est[m] = mle_phi(path, cfg.n_ex, cfg.nu, partial);
          }
        }
        return est;
      });
      for (std::size_t m = 0; m < methods.size(); ++m) {
        std::vector<double> xs(estimates.size());
        for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = estimates[i][m];
        const EnsembleStats st = ensemble_stats(xs);
        const double info = predicted_information(methods[m], rep, partial);
        const double var_rescaled = t * st.variance;
        em.row({methods[m], pt.phi, t, static_cast<std::int64_t>(cfg.n_traj), var_rescaled, 1.0 / info,
                var_rescaled * info, st.skewness, st.excess_kurtosis});
      }
    }
  }
}

void run_estimate(const RunConfig& cfg, Emitter& em) {
  if (cfg.input.empty()) throw ConfigError("estimate needs --in <trajectory.csv>");
  std::ifstream in(cfg.input);
  if (!in) throw ConfigError("cannot open " + cfg.input);
  const Trajectory traj = read_trajectory_csv(in);
  const auto methods = cfg.methods.empty() ? std::vector<std::string>{"mle-full"} : cfg.methods;
  check_methods(methods);
  for (const auto& m : methods) {
    EstimateRecord rec;
    if (m == "mle-full") {
      rec = mle(traj, ObservedChannels::full());
    } else if (m == "mle-partial") {
      rec = mle(traj, observation_from(cfg.channels));
    } else {
      const Channel c = m == "moment-ground" ? Channel::ground : Channel::excited;
      const MaserParams design = cfg.phi ? traj.params.with_phi(*cfg.phi) : traj.params;
      const Channel chans[] = {c};
      rec = moment_estimator(moment_design(design, c),
                             static_cast<double>(count(traj, chans, traj.start_time, traj.end_time())),
                             traj.horizon);
      rec.phi_true = traj.params.phi();
    }
    em.row({rec.method, rec.phi_true, rec.phi_hat, rec.t, std::to_string(traj.seed)});
  }
}

void validate(const RunConfig& c) {
  if (!(c.alpha_min <= c.alpha_max)) throw ConfigError("alpha-min must not exceed alpha-max");
  if (c.alpha_min < 0.0) throw ConfigError("alpha-min must be >= 0");
  if (c.steps < 1) throw ConfigError("steps must be >= 1");
  if (c.phi && !(*c.phi >= 0.0)) throw ConfigError("phi must be >= 0");
  if (!(c.n_ex > 0.0)) throw ConfigError("nex must be > 0");
  if (!(c.nu >= 0.0)) throw ConfigError("nu must be >= 0");
  if (!(c.tail_tol > 0.0 && c.tail_tol <= 1e-6)) throw ConfigError("tail-tol must lie in (0, 1e-6]");
  if (!(c.horizon > 0.0)) throw ConfigError("horizon must be > 0");
  if (c.format != "csv" && c.format != "json") throw ConfigError("format must be csv or json");
  for (double t : c.times) {
    if (!(t > 0.0)) throw ConfigError("times must be > 0");
  }
  if (c.subcommand == "ensemble" && c.n_traj < 2) throw ConfigError("n-traj must be >= 2");
}

const std::vector<std::string>& columns_for(const std::string& sub) {
  static const std::map<std::string, std::vector<std::string>> cols = {
      {"stationary", {"alpha", "phi", "n", "prob", "mean_photon"}},
      {"fisher-sweep", {"alpha", "phi", "i_cav", "i_up", "i_exc", "i_tot", "qfi", "identity_residual", "i_gr",
                        "i_ex_counts", "i_joint", "gap"}},
      {"lan-check", {"alpha", "phi", "u", "v", "t", "overlap", "neglog_overlap", "fitted_c"}},
      {"clt-check", {"alpha", "phi", "s", "u", "t", "finite_t_logmgf", "davies_limit", "abs_error"}},
      {"ensemble", {"method", "phi_true", "t", "n_traj", "var_rescaled", "inv_fisher_prediction", "ratio",
                    "skewness", "kurtosis"}},
      {"estimate", {"method", "phi_true", "phi_hat", "t", "seed"}},
  };
  return cols.at(sub);
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& default_out, std::ostream& err) {
  try {
    validate(cfg);
  } catch (const std::exception& e) {
    return report(classify(e), cfg, err);
  }
  std::ofstream file;
  std::ostream* out = &default_out;
  if (!cfg.out.empty()) {
    file.open(cfg.out);
    if (!file) return report({"config-error", "cannot write " + cfg.out, kExitConfig}, cfg, err);
    out = &file;
  }
  if (cfg.subcommand == "simulate") {
    try {
      return run_simulate(cfg, *out);
    } catch (const std::exception& e) {
      return report(classify(e), cfg, err);
    }
  }
  Emitter em(cfg, *out, columns_for(cfg.subcommand));
  try {
    if (cfg.subcommand == "stationary") run_stationary(cfg, em);
    else if (cfg.subcommand == "fisher-sweep") run_fisher_sweep(cfg, em);
    else if (cfg.subcommand == "lan-check") run_lan_check(cfg, em);
    else if (cfg.subcommand == "clt-check") run_clt_check(cfg, em);
    else if (cfg.subcommand == "ensemble") run_ensemble_cmd(cfg, em);
    else if (cfg.subcommand == "estimate") run_estimate(cfg, em);
    else throw ConfigError("unknown subcommand '" + cfg.subcommand + "'");
  } catch (const std::exception& e) {
    const Failure f = classify(e);
    em.finish({{"error", f.code}, {"message", f.message}});
    return report(f, cfg, err);
  }
  em.finish();
  return kExitOk;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Asymptotic inference for the atom maser"};
  app.set_config("--config", "", "key=value configuration file (flags take precedence)");
  app.allow_config_extras(false);
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::optional<double> phi;
  app.add_option("--alpha-min", cfg.alpha_min, "first alpha of the sweep");
  app.add_option("--alpha-max", cfg.alpha_max, "last alpha of the sweep");
  app.add_option("--steps", cfg.steps, "number of sweep points");
  app.add_option("--phi", phi, "single parameter point (overrides the alpha sweep)");
  app.add_option("--nex", cfg.n_ex, "atoms per cavity lifetime");
  app.add_option("--nu", cfg.nu, "thermal photon number");
  app.add_option("--tail-tol", cfg.tail_tol, "stationary truncation tolerance");
  app.add_option("--horizon", cfg.horizon, "simulated time");
  app.add_option("--n-traj", cfg.n_traj, "ensemble size");
  app.add_option("--seed", cfg.seed, "random seed");
  app.add_option("--out", cfg.out, "output file (default stdout)");
  app.add_option("--format", cfg.format, "csv or json");
  app.add_option("--channels", cfg.channels, "channel list")->delimiter(',');
  app.add_option("--u", cfg.u, "local parameters u")->delimiter(',');
  app.add_option("--v", cfg.v, "local parameters v")->delimiter(',');
  app.add_option("--s", cfg.s, "counting fields s")->delimiter(',');
  app.add_option("--times", cfg.times, "time horizons")->delimiter(',');
  app.add_option("--method", cfg.methods, "estimators: mle-full, mle-partial, moment-ground, moment-excited")
      ->delimiter(',');
  app.add_option("--in", cfg.input, "trajectory CSV for estimate");
  app.add_option("--initial-state", cfg.initial_state, "fixed initial photon number (default: stationary draw)");
  app.add_option("--workers", cfg.workers, "worker threads (default: all cores)");

  const std::pair<const char*, const char*> subcommands[] = {
      {"stationary", "stationary photon-number law along the sweep"},
      {"fisher-sweep", "path, quantum and counting informations along the sweep"},
      {"lan-check", "two-point overlaps and the fitted LAN constant"},
      {"clt-check", "finite-t log-MGF of centred counts against its limit"},
      {"simulate", "one Gillespie trajectory as CSV"},
      {"ensemble", "rescaled estimator variances over an ensemble"},
      {"estimate", "maximum likelihood from a trajectory CSV"},
  };
  for (const auto& [name, help] : subcommands) app.add_subcommand(name, help);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    cfg.subcommand = app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name();
    return report({"config-error", e.what(), kExitConfig}, cfg, err);
  }
  cfg.subcommand = app.get_subcommands().front()->get_name();
  cfg.phi = phi;
  return run(cfg, out, err);
}

}  // namespace maser
