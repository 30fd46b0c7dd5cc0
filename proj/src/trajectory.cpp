#include "maser/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "maser/errors.hpp"
#include "maser/rng.hpp"

namespace maser {

namespace {

struct EventSink {
  Trajectory* traj;
  void hold(std::int64_t, double) {}
  void event(double t, Channel c, std::int64_t, std::int64_t after) {
    traj->events.push_back({traj->start_time + t, c, after});
  }
};

struct SummarySink {
  PathSummary* s;
  void grow(std::int64_t k) {
    const auto need = static_cast<std::size_t>(k) + 1;
    if (s->occupation.size() < need) {
      s->occupation.resize(need, 0.0);
      s->counts.resize(need, {0, 0, 0, 0});
    }
  }
  void hold(std::int64_t k, double dt) {
    grow(k);
    s->occupation[static_cast<std::size_t>(k)] += dt;
  }
  void event(double, Channel c, std::int64_t before, std::int64_t) {
    grow(before);
    ++s->counts[static_cast<std::size_t>(before)][static_cast<int>(c)];
    ++s->totals[static_cast<int>(c)];
  }
};

// Per-level jump data: cumulative channel cuts in the order ground, excited,
// emit, absorb, and the total rate n_ex + (nu + 1) k + nu (k + 1).
struct Level {
  double total;
  double inv_total;
  double cut[3];
  double live_sum;
  Channel last_live;
};

Level make_level(std::int64_t k, const MaserParams& p) {
  const ChannelRates r = channel_rates(k, p);
  const double kd = static_cast<double>(k);
  Level l{};
  l.total = p.n_ex() + (p.nu() + 1.0) * kd + p.nu() * (kd + 1.0);
  l.inv_total = 1.0 / l.total;
  l.cut[0] = r.ground;
  l.cut[1] = l.cut[0] + r.excited;
  l.cut[2] = l.cut[1] + r.emit;
  l.live_sum = l.cut[2] + r.absorb;
  l.last_live = Channel::ground;
  for (Channel c : kAllChannels) {
    if (r[c] > 0.0) l.last_live = c;
  }
  return l;
}

template <class Sink>
std::int64_t gillespie(const MaserParams& p, std::int64_t k, double horizon, std::uint64_t seed,
                       const SimulationOptions& opts, Sink& sink) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
    throw Error(ErrorCode::invalid_argument, "horizon must be finite and >= 0");
  }
  if (k < 0) throw Error(ErrorCode::invalid_argument, "initial state must be >= 0");
  PhiloxStream rng(seed, opts.stream, StreamPurpose::dynamics);
  std::vector<Level> table;
  double t = 0.0;
  for (;;) {
    while (table.size() <= static_cast<std::size_t>(k)) {
      table.push_back(make_level(static_cast<std::int64_t>(table.size()), p));
    }
    const Level& lv = table[static_cast<std::size_t>(k)];
    const PhiloxCounter b = rng.next();
    const double dt = -std::log1p(-unit_double(b[0], b[1])) * lv.inv_total;
    if (t + dt > horizon) {
      sink.hold(k, horizon - t);
      return k;
    }
    sink.hold(k, dt);
    t += dt;

    const double x = unit_double(b[2], b[3]) * lv.total;
    // Zero-rate channels have empty intervals and cannot be hit; an overshoot
    // past the summed rates (rounding) goes to the last live channel.
    const auto chosen = x < lv.live_sum
                            ? static_cast<Channel>((x >= lv.cut[0]) + (x >= lv.cut[1]) + (x >= lv.cut[2]))
                            : lv.last_live;
    const std::int64_t before = k;
    k += channel_step(chosen);
    if (k > opts.state_ceiling) {
      std::ostringstream msg;
      msg << "photon number exceeded ceiling " << opts.state_ceiling << " at t=" << t;
      throw Error(ErrorCode::state_explosion, msg.str());
    }
    sink.event(t, chosen, before, k);
  }
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Trajectory simulate(const MaserParams& p, std::int64_t initial_state, double horizon,
                    std::uint64_t seed, const SimulationOptions& opts) {
  Trajectory traj;
  traj.params = p;
  traj.initial_state = initial_state;
  traj.horizon = horizon;
  traj.seed = seed;
  traj.stream = opts.stream;
  EventSink sink{&traj};
  gillespie(p, initial_state, horizon, seed, opts, sink);
  return traj;
}

PathSummary simulate_summary(const MaserParams& p, std::int64_t initial_state, double horizon,
                             std::uint64_t seed, const SimulationOptions& opts) {
  PathSummary s;
  s.initial_state = initial_state;
  s.horizon = horizon;
  SummarySink sink{&s};
  s.final_state = gillespie(p, initial_state, horizon, seed, opts, sink);
  return s;
}

PathSummary summarize(const Trajectory& traj) {
  PathSummary s;
  s.initial_state = traj.initial_state;
  s.horizon = traj.horizon;
  SummarySink sink{&s};
  std::int64_t k = traj.initial_state;
  double last = traj.start_time;
  for (const JumpEvent& e : traj.events) {
    sink.hold(k, e.time - last);
    sink.event(e.time, e.channel, k, e.state_after);
    last = e.time;
    k = e.state_after;
  }
  sink.hold(k, traj.end_time() - last);
  s.final_state = k;
  return s;
}

std::int64_t draw_initial_state(std::span<const double> probs, std::uint64_t seed,
                                std::uint64_t stream) {
  if (probs.empty()) throw Error(ErrorCode::invalid_argument, "empty distribution");
  const PhiloxCounter b = PhiloxStream(seed, stream, StreamPurpose::initial_state).block(0);
  double total = 0.0;
  for (double q : probs) total += q;
  const double target = unit_double(b[0], b[1]) * total;
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (target < acc) return static_cast<std::int64_t>(k);
  }
  return static_cast<std::int64_t>(probs.size() - 1);
}

std::uint64_t count(const Trajectory& traj, std::span<const Channel> channels, double t0,
                    double t1) {
  if (!(t0 <= t1)) throw Error(ErrorCode::invalid_argument, "count window must have t0 <= t1");
  std::uint64_t n = 0;
  auto first = std::lower_bound(traj.events.begin(), traj.events.end(), t0,
                                [](const JumpEvent& e, double t) { return e.time < t; });
  for (auto it = first; it != traj.events.end() && it->time <= t1; ++it) {
    if (std::find(channels.begin(), channels.end(), it->channel) != channels.end()) ++n;
  }
  return n;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "# phi=" << fmt17(traj.params.phi()) << '\n'
      << "# n_ex=" << fmt17(traj.params.n_ex()) << '\n'
      << "# nu=" << fmt17(traj.params.nu()) << '\n'
      << "# initial_state=" << traj.initial_state << '\n'
      << "# start_time=" << fmt17(traj.start_time) << '\n'
      << "# horizon=" << fmt17(traj.horizon) << '\n'
      << "# seed=" << traj.seed << '\n'
      << "# stream=" << traj.stream << '\n'
      << "time,channel,state_after\n";
  for (const JumpEvent& e : traj.events) {
    out << fmt17(e.time) << ',' << channel_name(e.channel) << ',' << e.state_after << '\n';
  }
}

namespace {

double parse_double(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw Error(ErrorCode::parse_error, "bad number for " + what + ": '" + s + "'");
  }
  return v;
}

long long parse_int(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw Error(ErrorCode::parse_error, "bad integer for " + what + ": '" + s + "'");
  }
  return v;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Trajectory read_trajectory_csv(std::istream& in) {
  std::map<std::string, std::string> header;
  std::vector<JumpEvent> events;
  std::string line;
  bool columns_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) header[trim(line.substr(1, eq - 1))] = trim(line.substr(eq + 1));
      continue;
    }
    if (!columns_seen) {
      if (line != "time,channel,state_after") {
        throw Error(ErrorCode::parse_error, "expected column header 'time,channel,state_after'");
      }
      columns_seen = true;
      continue;
    }
    std::stringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
      throw Error(ErrorCode::parse_error, "line " + std::to_string(line_no) + ": expected 3 fields");
    }
    events.push_back({parse_double(trim(a), "time"), parse_channel(trim(b)),
                      parse_int(trim(c), "state_after")});
  }
  for (const char* key : {"phi", "n_ex", "nu", "initial_state", "horizon"}) {
    if (!header.count(key)) throw Error(ErrorCode::parse_error, std::string("missing header ") + key);
  }
  Trajectory traj;
  traj.params = MaserParams(parse_double(header["phi"], "phi"), parse_double(header["n_ex"], "n_ex"),
                            parse_double(header["nu"], "nu"));
  traj.initial_state = parse_int(header["initial_state"], "initial_state");
  traj.horizon = parse_double(header["horizon"], "horizon");
  if (header.count("start_time")) traj.start_time = parse_double(header["start_time"], "start_time");
  if (header.count("seed")) traj.seed = static_cast<std::uint64_t>(std::stoull(header["seed"]));
  if (header.count("stream")) traj.stream = static_cast<std::uint64_t>(std::stoull(header["stream"]));

  std::int64_t k = traj.initial_state;
  double last = traj.start_time;
  for (const JumpEvent& e : events) {
    if (e.time < last || e.time > traj.end_time()) {
      throw Error(ErrorCode::parse_error, "event times must be ordered and inside the horizon");
    }
    if (e.state_after != k + channel_step(e.channel)) {
      throw Error(ErrorCode::parse_error, "state_after inconsistent with channel");
    }
    last = e.time;
    k = e.state_after;
  }
  traj.events = std::move(events);
  return traj;
}

}  // namespace maser
