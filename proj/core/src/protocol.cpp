#include "optopulse/protocol.hpp"

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "optopulse/errors.hpp"
#include "optopulse/rng.hpp"

namespace optopulse::protocol {

using gaussian::GaussianState;
using hilbert::FockState;
using measurement::MeasurementRecord;
using measurement::MeasurementSpec;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kPi = std::numbers::pi;

double neff_of(const Eigen::Matrix2d& cov) {
  return 0.5 * (std::sqrt(std::max(4.0 * cov(0, 0) * cov(1, 1), 0.0)) - 1.0);
}

Snapshot snapshot_of(const GaussianState& g) {
  return {hilbert::Moments{g.mean(), g.cov()}, gaussian::effective_occupation(g), std::nullopt};
}

Snapshot snapshot_of(const FockState& s) {
  const hilbert::Moments m = hilbert::moments(s);
  return {m, neff_of(m.cov), s};
}

}  // namespace

GaussianState prepare_gaussian(const InitialState& init) {
  switch (init.kind) {
    case InitialState::Kind::Thermal:
      return gaussian::thermal_gaussian(init.nbar);
    case InitialState::Kind::Coherent:
      return {Eigen::Vector2d(std::sqrt(2.0) * init.alpha.real(), std::sqrt(2.0) * init.alpha.imag()),
              0.5 * Eigen::Matrix2d::Identity()};
    case InitialState::Kind::Cat:
      break;
  }
  throw DomainError("gaussian representation cannot hold a cat state");
}

FockState prepare_fock(const InitialState& init) {
  switch (init.kind) {
    case InitialState::Kind::Thermal:
      return hilbert::new_thermal(init.nbar, init.n_max > 0 ? init.n_max : hilbert::default_n_max(init.nbar));
    case InitialState::Kind::Coherent: {
      const double a2 = std::norm(init.alpha);
      return hilbert::new_coherent(init.alpha, init.n_max > 0 ? init.n_max : hilbert::default_n_max(0.0, a2));
    }
    case InitialState::Kind::Cat: {
      const double a2 = init.delta * init.delta / 2.0;
      return hilbert::new_cat(init.delta, init.axis, init.n_max > 0 ? init.n_max : hilbert::default_n_max(0.0, a2));
    }
  }
  throw DomainError("unknown initial state");
}

namespace {

// Outcome drawn by inverting N(mu, var) at u.
double gaussian_outcome(const GaussianState& g, const MeasurementSpec& spec, double u) {
  const gaussian::OutcomeStats st = gaussian::pulse_outcome_stats(g, spec.chi, spec.record_variance());
  return st.mean + std::sqrt(st.variance) * normal_quantile(u);
}

GaussianState gaussian_pulse(const GaussianState& g, const MeasurementSpec& spec, double p_l) {
  return gaussian::conditional_update(g, spec.chi, spec.omega_kick, p_l, spec.conditioning_variance());
}

double pulse_uniform(std::uint64_t master, std::size_t pulse_index) {
  Rng rng(derive_seed(master, pulse_index));
  return rng.uniform();
}

// Gaussian-only replay of the steps without snapshots; returns the state and
// the accumulated rotation.
GaussianState replay_gaussian(const SequenceConfig& cfg, std::uint64_t master, double& angle) {
  GaussianState g = prepare_gaussian(cfg.initial);
  std::size_t pulses = 0;
  angle = 0.0;
  for (const Step& step : cfg.steps) {
    std::visit(Overloaded{
                   [&](const PulseStep& s) {
                     const double u = pulse_uniform(master, pulses++);
                     const double p = s.forced_outcome ? *s.forced_outcome : gaussian_outcome(g, s.spec, u);
                     g = gaussian_pulse(g, s.spec, p);
                   },
                   [&](const EvolveStep& s) {
                     g = gaussian::rotate_gaussian(g, s.theta);
                     angle += s.theta;
                   },
                   [&](const ThermalizeStep& s) {
                     g = gaussian::thermalize(g, s.bath, s.duration, gaussian::Frame::Lab);
                     angle += s.bath.omega_m * s.duration;
                   },
               },
               step);
  }
  return g;
}

nlohmann::json moments_json(const hilbert::Moments& m) {
  return {{"mean", {m.mean(0), m.mean(1)}},
          {"cov", {{m.cov(0, 0), m.cov(0, 1)}, {m.cov(1, 0), m.cov(1, 1)}}}};
}

}  // namespace

void SequenceConfig::validate() const {
  if (representation == Representation::Gaussian && initial.kind == InitialState::Kind::Cat) {
    throw DomainError("gaussian representation cannot hold a cat state");
  }
  if (!(initial.nbar >= 0.0) || !std::isfinite(initial.nbar)) throw DomainError("initial nbar must be >= 0");
  if (!std::isfinite(initial.delta)) throw DomainError("cat separation must be finite");
  if (initial.n_max < 0) throw DomainError("n_max must be >= 0");
  for (const Step& step : steps) {
    std::visit(Overloaded{
                   [](const PulseStep& s) {
                     s.spec.validate();
                     if (s.forced_outcome && !std::isfinite(*s.forced_outcome)) {
                       throw DomainError("forced outcome must be finite");
                     }
                   },
                   [](const EvolveStep& s) {
                     if (!std::isfinite(s.theta)) throw DomainError("rotation angle must be finite");
                   },
                   [&](const ThermalizeStep& s) {
                     s.bath.validate();
                     if (!(s.duration >= 0.0)) throw DomainError("thermalization duration must be >= 0");
                     if (representation == Representation::Fock) {
                       throw DomainError("thermalization is only available in the gaussian representation");
                     }
                   },
               },
               step);
  }
}

Trajectory run_sequence(const SequenceConfig& cfg) {
  cfg.validate();
  Trajectory out;
  out.snapshots.reserve(cfg.steps.size() + 1);
  std::size_t pulses = 0;
  double angle = 0.0;

  if (cfg.representation == Representation::Gaussian) {
    GaussianState g = prepare_gaussian(cfg.initial);
    out.snapshots.push_back(snapshot_of(g));
    for (const Step& step : cfg.steps) {
      std::visit(Overloaded{
                     [&](const PulseStep& s) {
                       const double u = pulse_uniform(cfg.master_seed, pulses++);
                       const double p = s.forced_outcome ? *s.forced_outcome : gaussian_outcome(g, s.spec, u);
                       out.records.push_back({p, angle, s.spec, s.spec.chi * g.mean()(0)});
                       g = gaussian_pulse(g, s.spec, p);
                     },
                     [&](const EvolveStep& s) {
                       g = gaussian::rotate_gaussian(g, s.theta);
                       angle += s.theta;
                     },
                     [&](const ThermalizeStep& s) {
                       g = gaussian::thermalize(g, s.bath, s.duration, gaussian::Frame::Lab);
                       angle += s.bath.omega_m * s.duration;
                     },
                 },
                 step);
      out.snapshots.push_back(snapshot_of(g));
    }
    return out;
  }

  FockState state = prepare_fock(cfg.initial);
  out.snapshots.push_back(snapshot_of(state));
  for (const Step& step : cfg.steps) {
    std::visit(Overloaded{
                   [&](const PulseStep& s) {
                     const double u = pulse_uniform(cfg.master_seed, pulses++);
                     const double known = s.spec.chi * hilbert::moments(state).mean(0);
                     const double p = s.forced_outcome ? *s.forced_outcome
                                                       : measurement::OutcomeSampler(state, s.spec).quantile(u);
                     out.records.push_back({p, angle, s.spec, known});
                     state = measurement::apply_upsilon(state, s.spec, p);
                   },
                   [&](const EvolveStep& s) {
                     state = hilbert::rotate(state, s.theta);
                     angle += s.theta;
                   },
                   [](const ThermalizeStep&) {},
               },
               step);
    out.snapshots.push_back(snapshot_of(state));
  }
  return out;
}

nlohmann::json Trajectory::to_json() const {
  nlohmann::json snaps = nlohmann::json::array();
  for (const Snapshot& s : snapshots) {
    nlohmann::json j = moments_json(s.moments);
    j["n_eff"] = s.n_eff;
    if (s.state) j["dim"] = s.state->dim();
    snaps.push_back(std::move(j));
  }
  nlohmann::json recs = nlohmann::json::array();
  for (const MeasurementRecord& r : records) {
    nlohmann::json j{{"p_l", r.p_l}, {"theta", r.theta}, {"chi", r.spec.chi}, {"omega", r.spec.omega_kick}};
    if (r.known_mean) j["known_mean"] = *r.known_mean;
    recs.push_back(std::move(j));
  }
  return {{"format", "trajectory v1"}, {"snapshots", std::move(snaps)}, {"records", std::move(recs)}};
}

SequenceConfig purification_sequence(double nbar, double chi, const std::optional<gaussian::BathSpec>& bath,
                                     double omega) {
  if (!(chi > 0.0)) throw DomainError("no position information: chi = 0");
  if (!(nbar >= 0.0)) throw DomainError("nbar must be >= 0");
  const MeasurementSpec spec{chi, omega};
  SequenceConfig cfg;
  cfg.initial = InitialState::thermal(nbar);
  cfg.steps.push_back(PulseStep{spec, 0.0});
  if (bath) {
    bath->validate();
    cfg.steps.push_back(ThermalizeStep{0.5 * kPi / bath->omega_m, *bath});
  } else {
    cfg.steps.push_back(EvolveStep{0.5 * kPi});
  }
  cfg.steps.push_back(PulseStep{spec, 0.0});
  cfg.validate();
  return cfg;
}

PurificationResult purify_two_pulse(double nbar, double chi, const std::optional<gaussian::BathSpec>& bath,
                                    double omega) {
  SequenceConfig cfg = purification_sequence(nbar, chi, bath, omega);
  const Trajectory t = run_sequence(cfg);
  const auto rebuild = [](const Snapshot& s) { return GaussianState(s.moments.mean, s.moments.cov); };
  PurificationResult result{rebuild(t.snapshots[1]), rebuild(t.snapshots.back()), t.snapshots[1].n_eff,
                            t.snapshots.back().n_eff};

  // The Gaussian covariance update ignores the outcome values.
  std::get<PulseStep>(cfg.steps.front()).forced_outcome = 3.0 * chi * std::sqrt(nbar + 0.5);
  std::get<PulseStep>(cfg.steps.back()).forced_outcome = -2.0 * chi;
  const double other = run_sequence(cfg).snapshots.back().n_eff;
  if (std::abs(other - result.n_eff) > 1e-12 * std::max(1.0, result.n_eff)) {
    throw NumericError("purified occupation depends on the measurement outcomes");
  }
  return result;
}

std::vector<ReadoutPoint> readout_session(const SequenceConfig& prep, std::span<const double> theta_grid,
                                          std::size_t shots, const MeasurementSpec& readout) {
  prep.validate();
  readout.validate();
  if (prep.representation != Representation::Gaussian) {
    throw DomainError("readout sessions run in the gaussian representation");
  }
  if (shots < 2) throw DomainError("readout session needs at least two shots");
  std::size_t prep_pulses = 0;
  for (const Step& s : prep.steps) prep_pulses += std::holds_alternative<PulseStep>(s) ? 1 : 0;

  std::vector<ReadoutPoint> out;
  out.reserve(theta_grid.size());
  for (std::size_t k = 0; k < theta_grid.size(); ++k) {
    const double theta = theta_grid[k];
    const std::uint64_t angle_seed = derive_seed(prep.master_seed, k);
    // Welford accumulation of the compensated outcomes.
    double mean = 0.0, m2 = 0.0;
    for (std::size_t shot = 0; shot < shots; ++shot) {
      const std::uint64_t shot_seed = derive_seed(angle_seed, shot);
      double angle = 0.0;
      const GaussianState g = gaussian::rotate_gaussian(replay_gaussian(prep, shot_seed, angle), theta);
      const double p = gaussian_outcome(g, readout, pulse_uniform(shot_seed, prep_pulses));
      const double c = measurement::compensate({p, angle + theta, readout, readout.chi * g.mean()(0)});
      const double d = c - mean;
      mean += d / static_cast<double>(shot + 1);
      m2 += d * (c - mean);
    }
    out.push_back({theta, mean, m2 / static_cast<double>(shots - 1)});
  }
  return out;
}

double calibrate_omega(double chi_known, const MeasurementSpec& pulse, std::size_t shots, std::uint64_t seed,
                       double theta) {
  if (!(chi_known > 0.0)) throw DomainError("chi must be known and positive to calibrate Omega");
  pulse.validate();
  if (shots == 0) throw DomainError("calibration needs at least one shot");
  MeasurementSpec readout = pulse;
  readout.omega_kick = 0.0;
  double sum = 0.0;
  for (std::size_t shot = 0; shot < shots; ++shot) {
    const std::uint64_t s = derive_seed(seed, shot);
    const GaussianState ground;
    const double p1 = gaussian_outcome(ground, pulse, pulse_uniform(s, 0));
    const GaussianState kicked = gaussian::rotate_gaussian(gaussian_pulse(ground, pulse, p1), theta);
    // Same conditioning without the kick gives the known mean.
    MeasurementSpec silent = pulse;
    silent.omega_kick = 0.0;
    const GaussianState expected = gaussian::rotate_gaussian(gaussian_pulse(ground, silent, p1), theta);
    const double p2 = gaussian_outcome(kicked, readout, pulse_uniform(s, 1));
    sum += measurement::compensate({p2, theta, readout, chi_known * expected.mean()(0)});
  }
  return -(sum / static_cast<double>(shots)) / chi_known;
}

}  // namespace optopulse::protocol
