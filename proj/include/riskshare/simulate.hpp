#pragma once

// Monte Carlo for the loss process under P_k or Q*, with pathwise Z*, X*, X^CL and Y.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "riskshare/controls.hpp"
#include "riskshare/measure.hpp"

namespace riskshare {

struct SimConfig {
  Measure measure = Measure::q_star();
  std::size_t n_paths = 1;
  std::uint64_t seed = 0;
  std::vector<double> record_grid;
  unsigned threads = 0;  // 0: hardware concurrency

  void validate(double horizon) const {
    if (n_paths < 1) throw ConfigError("n_paths must be >= 1");
    if (record_grid.size() < 2) throw ConfigError("record grid needs at least the points 0 and T");
    if (record_grid.front() != 0.0) throw ConfigError("record grid must start at 0");
    if (std::abs(record_grid.back() - horizon) > 1e-12 * std::max(1.0, horizon))
      throw ConfigError("record grid must end at T");
    for (std::size_t i = 1; i < record_grid.size(); ++i)
      if (!(record_grid[i] > record_grid[i - 1]))
        throw ConfigError("record grid must be strictly increasing");
  }
};

/// n + 1 evenly spaced points 0 = t_0 < ... < t_n = T.
inline std::vector<double> uniform_grid(double horizon, std::size_t steps) {
  if (steps < 1) throw ConfigError("grid needs at least one step");
  std::vector<double> g(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) g[i] = horizon * static_cast<double>(i) / steps;
  g.back() = horizon;
  return g;
}

struct PathBundle {
  std::size_t path_id = 0;
  std::vector<double> jump_times;
  std::vector<double> jump_marks;
  std::vector<double> grid;
  std::vector<std::vector<double>> logZ;  // [k][grid index]
  std::vector<double> X_star;             // closed form
  std::vector<double> X_cl;
  std::vector<double> Y;
  std::size_t negative_cessions = 0;  // jumps with alpha* < 0
};

namespace detail {

/// E(r, d) = int_0^d exp(r u) du
inline double exp_integral(double r, double d) {
  const double rd = r * d;
  if (std::abs(rd) < 1e-8) return d * (1.0 + 0.5 * rd);
  return std::expm1(rd) / r;
}

template <LossModel M>
void jump_log_ratios(const BasicRiskSharingProblem<M>& p, double xi, std::vector<double>& out) {
  const auto& ens = p.ensemble();
  const double l1e = std::log1p(p.eta());
  if constexpr (std::same_as<M, GammaCompensator>) {
    const double lx = std::log(xi);
    const double lc = ens.counterparty().log_density_unchecked(xi, lx);
    for (std::size_t k = 0; k < p.size(); ++k)
      out[k] = l1e + lc - ens.model(k).log_density_unchecked(xi, lx);
  } else {
    const double lc = ens.counterparty().log_density(xi);
    for (std::size_t k = 0; k < p.size(); ++k) out[k] = l1e + lc - ens.model(k).log_density(xi);
  }
}

/// Walks a path forward in time. Between events the state drifts deterministically;
/// at jump times on_jump sees the left limit of ln Z; grid points are recorded after
/// any jump at the same time (right-continuous paths).
template <LossModel M, class Drift, class Jump, class Record>
void walk(const BasicRiskSharingProblem<M>& p, const PathBundle& path, Drift&& on_drift,
          Jump&& on_jump, Record&& on_record) {
  const auto n = p.size();
  std::vector<double> log_z(n, 0.0);
  std::vector<double> ratios(n);
  double s = 0.0;
  auto advance = [&](double to) {
    const double d = to - s;
    if (d > 0.0) {
      on_drift(s, d, std::as_const(log_z));
      for (std::size_t k = 0; k < n; ++k) log_z[k] += p.log_z_drift(k) * d;
      s = to;
    }
  };
  std::size_t j = 0;
  for (std::size_t g = 0; g < path.grid.size(); ++g) {
    const double tg = path.grid[g];
    while (j < path.jump_times.size() && path.jump_times[j] <= tg) {
      advance(path.jump_times[j]);
      jump_log_ratios(p, path.jump_marks[j], ratios);
      on_jump(path.jump_times[j], path.jump_marks[j], std::as_const(log_z),
              std::as_const(ratios));
      for (std::size_t k = 0; k < n; ++k) log_z[k] += ratios[k];
      ++j;
    }
    advance(tg);
    on_record(g, std::as_const(log_z));
  }
}

}  // namespace detail

/// X*_t = x + [c - (1+eta) int xi nu_C] t - (1/theta) sum_k pi_k l_k(T) [exp(ln Z_k - t g_k) - 1].
template <LossModel M>
double x_star_closed_form(const BasicRiskSharingProblem<M>& p, double t,
                          std::span<const double> log_z) {
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double w = p.ensemble().weight(k);
    if (w == 0.0) continue;
    acc += w * std::exp(p.horizon() * p.growth_exponent(k)) *
           std::expm1(log_z[k] - t * p.growth_exponent(k));
  }
  return p.market().initial_wealth_insurer + p.net_premium_drift() * t - acc / p.theta();
}

/// Integrates the X* SDE along the path's jumps, independently of the closed form.
template <LossModel M>
std::vector<double> x_star_from_sde(const PathBundle& path, const BasicRiskSharingProblem<M>& p) {
  std::vector<double> out(path.grid.size());
  const double a = 1.0 + p.eta();
  const double big_t = p.horizon();
  double x = p.market().initial_wealth_insurer;
  detail::walk(
      p, path,
      [&](double s, double d, const std::vector<double>& log_z) {
        double acc = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
          const double w = p.ensemble().weight(k);
          if (w == 0.0) continue;
          const double g = p.growth_exponent(k);
          acc += w * p.kappa(k) * std::exp(log_z[k] + (big_t - s) * g) *
                 detail::exp_integral(p.log_z_drift(k) - g, d);
        }
        x += p.net_premium_drift() * d + a * acc / p.theta();
      },
      [&](double tau, double, const std::vector<double>& log_z, const std::vector<double>& r) {
        double acc = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
          const double w = p.ensemble().weight(k);
          if (w == 0.0) continue;
          acc += w * std::exp(log_z[k] + (big_t - tau) * p.growth_exponent(k)) * std::expm1(r[k]);
        }
        x -= acc / p.theta();
      },
      [&](std::size_t g, const std::vector<double>&) { out[g] = x; });
  return out;
}

/// Counterparty wealth Y along the path: premium (1+eta) int alpha* nu_C ds less ceded losses.
/// Optionally counts jumps at which alpha* < 0.
template <LossModel M>
std::vector<double> counterparty_path(const PathBundle& path, const BasicRiskSharingProblem<M>& p,
                                      std::size_t* negative_cessions = nullptr) {
  std::vector<double> out(path.grid.size());
  const double a = 1.0 + p.eta();
  const double big_t = p.horizon();
  const double lam_int = p.mean_loss_rate_c();
  double y = p.market().initial_wealth_counterparty;
  std::size_t negatives = 0;
  detail::walk(
      p, path,
      [&](double s, double d, const std::vector<double>& log_z) {
        double acc = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
          const double w = p.ensemble().weight(k);
          if (w == 0.0) continue;
          const double g = p.growth_exponent(k);
          acc += w * p.kappa(k) * std::exp(log_z[k] + (big_t - s) * g) *
                 detail::exp_integral(p.log_z_drift(k) - g, d);
        }
        y += a * (lam_int * d - acc / p.theta());
      },
      [&](double tau, double xi, const std::vector<double>& log_z, const std::vector<double>& r) {
        double acc = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
          const double w = p.ensemble().weight(k);
          if (w == 0.0) continue;
          acc += w * std::exp(log_z[k] + (big_t - tau) * p.growth_exponent(k)) * std::expm1(r[k]);
        }
        const double alpha = xi - acc / p.theta();
        if (alpha < 0.0) ++negatives;
        y -= alpha;
      },
      [&](std::size_t g, const std::vector<double>&) { out[g] = y; });
  if (negative_cessions) *negative_cessions = negatives;
  return out;
}

/// Deterministic per-path generator of the loss process.
template <LossModel M>
class BasicPathSimulator {
 public:
  BasicPathSimulator(const BasicRiskSharingProblem<M>& problem, SimConfig config)
      : problem_(&problem), config_(std::move(config)) {
    config_.validate(problem.horizon());
    const auto& ens = problem.ensemble();
    if (config_.measure.is_q_star()) {
      intensity_ = (1.0 + problem.eta()) * ens.counterparty().rate();
      marks_ = &ens.counterparty();
    } else {
      if (config_.measure.index() >= ens.size()) throw ConfigError("measure index out of range");
      intensity_ = ens.model(config_.measure.index()).rate();
      marks_ = &ens.model(config_.measure.index());
    }
    if (!(intensity_ > 0.0) || !std::isfinite(intensity_))
      throw ConfigError("jump intensity must be positive and finite");
  }

  const SimConfig& config() const noexcept { return config_; }
  const BasicRiskSharingProblem<M>& problem() const noexcept { return *problem_; }
  double intensity() const noexcept { return intensity_; }

  /// Generator for path i, seeded from (seed, i) only.
  std::mt19937_64 rng_for(std::size_t i) const {
    const std::uint64_t s = config_.seed;
    const std::uint64_t id = i;
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                      static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32)};
    return std::mt19937_64(seq);
  }

  /// Jump times and marks only.
  void jumps(std::size_t i, std::vector<double>& times, std::vector<double>& marks) const {
    times.clear();
    marks.clear();
    auto rng = rng_for(i);
    std::exponential_distribution<double> gap(intensity_);
    const double big_t = problem_->horizon();
    double t = 0.0;
    for (;;) {
      t += gap(rng);
      if (t > big_t) break;
      times.push_back(t);
      marks.push_back(marks_->sample_severity(rng));
    }
  }

  PathBundle path(std::size_t i) const {
    const auto& p = *problem_;
    PathBundle b;
    b.path_id = i;
    b.grid = config_.record_grid;
    jumps(i, b.jump_times, b.jump_marks);
    const auto ng = b.grid.size();
    b.logZ.assign(p.size(), std::vector<double>(ng));
    b.X_star.resize(ng);
    b.X_cl.resize(ng);
    double losses = 0.0;
    detail::walk(
        p, b, [](double, double, const std::vector<double>&) {},
        [&](double, double xi, const std::vector<double>&, const std::vector<double>&) {
          losses += xi;
        },
        [&](std::size_t g, const std::vector<double>& log_z) {
          for (std::size_t k = 0; k < p.size(); ++k) b.logZ[k][g] = log_z[k];
          b.X_star[g] = x_star_closed_form(p, b.grid[g], log_z);
          b.X_cl[g] = p.market().initial_wealth_insurer + p.market().premium_rate * b.grid[g] - losses;
        });
    b.Y = counterparty_path(b, p, &b.negative_cessions);
    return b;
  }

 private:
  const BasicRiskSharingProblem<M>* problem_;
  SimConfig config_;
  double intensity_ = 0.0;
  const M* marks_ = nullptr;
};

using PathSimulator = BasicPathSimulator<GammaCompensator>;

inline constexpr std::size_t kPathChunk = 256;

/// Folds every path into per-chunk accumulators and merges them in chunk order, so the
/// result does not depend on the number of worker threads.
template <class Sim, class Acc, class Make, class Fold, class Merge>
Acc map_reduce_paths(const Sim& sim, Make&& make, Fold&& fold, Merge&& merge) {
  const std::size_t n = sim.config().n_paths;
  const std::size_t chunks = (n + kPathChunk - 1) / kPathChunk;
  std::vector<Acc> parts;
  parts.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) parts.push_back(make());

  unsigned threads = sim.config().threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, chunks));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        const std::size_t hi = std::min(n, (c + 1) * kPathChunk);
        for (std::size_t i = c * kPathChunk; i < hi; ++i) fold(parts[c], sim.path(i));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(chunks);
        return;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  Acc total = make();
  for (auto& part : parts) merge(total, part);
  return total;
}

// ---------------------------------------------------------------------------
// Statistics

/// Welford accumulator with pairwise merge.
class RunningStats {
 public:
  void add(double v) {
    ++n_;
    const double d = v - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (v - mean_);
  }

  void merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(n_ + o.n_);
    const double d = o.mean_ - mean_;
    mean_ += d * static_cast<double>(o.n_) / n;
    m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
    n_ += o.n_;
  }

  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double std_error() const noexcept {
    return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct SeriesStats {
  std::vector<RunningStats> at;  // one per grid point

  void merge(const SeriesStats& o) {
    for (std::size_t g = 0; g < at.size(); ++g) at[g].merge(o.at[g]);
  }
};

struct TerminalSamples {
  std::vector<double> X_star;
  std::vector<double> X_cl;
  std::vector<double> Y;
  std::vector<std::vector<double>> Z;  // [k][path]
  std::vector<double> jump_counts;
};

struct SimulationSummary {
  std::string measure;
  std::vector<double> grid;
  std::size_t n_paths = 0;
  SeriesStats X_star;
  SeriesStats X_cl;
  SeriesStats Y;
  std::vector<SeriesStats> Z;  // Z*_k, not its log
  RunningStats jump_count;
  std::size_t negative_cessions = 0;
  TerminalSamples terminal;  // in path order, when collected
};

namespace detail {

struct SummaryAcc {
  SimulationSummary s;
  std::vector<std::size_t> ids;  // path ids in fold order
};

inline SeriesStats empty_series(std::size_t ng) { return SeriesStats{std::vector<RunningStats>(ng)}; }

}  // namespace detail

/// Runs all paths and collects per-grid statistics and (optionally) terminal samples.
template <LossModel M>
SimulationSummary simulate(const BasicRiskSharingProblem<M>& p, const SimConfig& config,
                           bool collect_terminal = true) {
  BasicPathSimulator<M> sim(p, config);
  const auto ng = config.record_grid.size();
  const auto nk = p.size();
  auto make = [&] {
    detail::SummaryAcc a;
    a.s.grid = config.record_grid;
    a.s.X_star = detail::empty_series(ng);
    a.s.X_cl = detail::empty_series(ng);
    a.s.Y = detail::empty_series(ng);
    a.s.Z.assign(nk, detail::empty_series(ng));
    a.s.terminal.Z.resize(nk);
    return a;
  };
  auto fold = [&](detail::SummaryAcc& a, const PathBundle& b) {
    auto& s = a.s;
    ++s.n_paths;
    for (std::size_t g = 0; g < ng; ++g) {
      s.X_star.at[g].add(b.X_star[g]);
      s.X_cl.at[g].add(b.X_cl[g]);
      s.Y.at[g].add(b.Y[g]);
      for (std::size_t k = 0; k < nk; ++k) s.Z[k].at[g].add(std::exp(b.logZ[k][g]));
    }
    s.jump_count.add(static_cast<double>(b.jump_times.size()));
    s.negative_cessions += b.negative_cessions;
    if (collect_terminal) {
      s.terminal.X_star.push_back(b.X_star.back());
      s.terminal.X_cl.push_back(b.X_cl.back());
      s.terminal.Y.push_back(b.Y.back());
      for (std::size_t k = 0; k < nk; ++k) s.terminal.Z[k].push_back(std::exp(b.logZ[k].back()));
      s.terminal.jump_counts.push_back(static_cast<double>(b.jump_times.size()));
    }
  };
  auto append = [](std::vector<double>& into, const std::vector<double>& from) {
    into.insert(into.end(), from.begin(), from.end());
  };
  auto merge = [&](detail::SummaryAcc& into, const detail::SummaryAcc& from) {
    auto& s = into.s;
    const auto& o = from.s;
    s.n_paths += o.n_paths;
    s.X_star.merge(o.X_star);
    s.X_cl.merge(o.X_cl);
    s.Y.merge(o.Y);
    for (std::size_t k = 0; k < nk; ++k) s.Z[k].merge(o.Z[k]);
    s.jump_count.merge(o.jump_count);
    s.negative_cessions += o.negative_cessions;
    append(s.terminal.X_star, o.terminal.X_star);
    append(s.terminal.X_cl, o.terminal.X_cl);
    append(s.terminal.Y, o.terminal.Y);
    for (std::size_t k = 0; k < nk; ++k) append(s.terminal.Z[k], o.terminal.Z[k]);
    append(s.terminal.jump_counts, o.terminal.jump_counts);
  };
  auto total = map_reduce_paths<BasicPathSimulator<M>, detail::SummaryAcc>(sim, make, fold, merge);
  total.s.measure = config.measure.is_q_star()
                        ? std::string("Q*")
                        : "P_" + p.ensemble().label(config.measure.index());
  return std::move(total.s);
}

// ---------------------------------------------------------------------------
// Path envelope: mean +/- the root mean squared deviation of the paths lying above
// (resp. below) the mean at each grid time. A display band, not a confidence band.

struct Envelope {
  std::vector<double> mean;
  std::vector<double> upper;
  std::vector<double> lower;
};

struct PathEnvelopes {
  Envelope X_star;
  Envelope X_cl;
  Envelope Y;
};

namespace detail {

struct SideAcc {
  std::vector<double> up_sq, up_n, down_sq, down_n;
  explicit SideAcc(std::size_t ng) : up_sq(ng), up_n(ng), down_sq(ng), down_n(ng) {}
  void add(std::size_t g, double v, double mean) {
    const double d = v - mean;
    if (d > 0.0) {
      up_sq[g] += d * d;
      up_n[g] += 1.0;
    } else if (d < 0.0) {
      down_sq[g] += d * d;
      down_n[g] += 1.0;
    }
  }
  void merge(const SideAcc& o) {
    for (std::size_t g = 0; g < up_sq.size(); ++g) {
      up_sq[g] += o.up_sq[g];
      up_n[g] += o.up_n[g];
      down_sq[g] += o.down_sq[g];
      down_n[g] += o.down_n[g];
    }
  }
  Envelope finish(const std::vector<double>& mean) const {
    Envelope e{mean, mean, mean};
    for (std::size_t g = 0; g < mean.size(); ++g) {
      if (up_n[g] > 0) e.upper[g] += std::sqrt(up_sq[g] / up_n[g]);
      if (down_n[g] > 0) e.lower[g] -= std::sqrt(down_sq[g] / down_n[g]);
    }
    return e;
  }
};

inline std::vector<double> means_of(const SeriesStats& s) {
  std::vector<double> m;
  for (const auto& r : s.at) m.push_back(r.mean());
  return m;
}

}  // namespace detail

/// Second pass over the same paths, given the first-pass summary.
template <LossModel M>
PathEnvelopes path_envelopes(const BasicRiskSharingProblem<M>& p, const SimConfig& config,
                             const SimulationSummary& summary) {
  BasicPathSimulator<M> sim(p, config);
  const auto ng = config.record_grid.size();
  const auto mx = detail::means_of(summary.X_star);
  const auto mc = detail::means_of(summary.X_cl);
  const auto my = detail::means_of(summary.Y);
  struct Acc {
    detail::SideAcc x, c, y;
  };
  auto make = [&] { return Acc{detail::SideAcc(ng), detail::SideAcc(ng), detail::SideAcc(ng)}; };
  auto fold = [&](Acc& a, const PathBundle& b) {
    for (std::size_t g = 0; g < ng; ++g) {
      a.x.add(g, b.X_star[g], mx[g]);
      a.c.add(g, b.X_cl[g], mc[g]);
      a.y.add(g, b.Y[g], my[g]);
    }
  };
  auto merge = [](Acc& into, const Acc& from) {
    into.x.merge(from.x);
    into.c.merge(from.c);
    into.y.merge(from.y);
  };
  const Acc total = map_reduce_paths<BasicPathSimulator<M>, Acc>(sim, make, fold, merge);
  return {total.x.finish(mx), total.c.finish(mc), total.y.finish(my)};
}

}  // namespace riskshare
