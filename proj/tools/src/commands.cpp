#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "optopulse/errors.hpp"
#include "optopulse/format.hpp"
#include "optopulse/rng.hpp"
#include "optopulse_cli/app.hpp"
#include "optopulse_cli/config.hpp"

#ifndef OPTOPULSE_VERSION
#define OPTOPULSE_VERSION "0.0.0"
#endif

namespace optopulse::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string csv(double v) { return format_double(v); }

json optional_number(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

// Runs body(i) for i in [0, n) on up to `threads` workers; results must be
// written by index so the schedule cannot leak into the output.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned count = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < count; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) now = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const fs::path& file, const json& j) { write_atomic(file, j.dump(2) + "\n"); }

void write_manifest(std::string_view command, const RunOptions& o, std::uint64_t seed) {
  write_json(o.out / "manifest.json", {{"format", "run-manifest v1"},
                                       {"command", command},
                                       {"config", o.config.string()},
                                       {"master_seed", seed},
                                       {"output_dir", o.out.string()},
                                       {"threads", o.threads},
                                       {"tool_version", OPTOPULSE_VERSION},
                                       {"timestamp", timestamp()}});
}

// ---------------------------------------------------------------- pulse

pulse::Envelope build_drive(const PulseConfig& c, double kappa) {
  if (c.drive == "file") {
    std::ifstream in(c.drive_file);
    if (!in) throw ConfigError("drive.path", "cannot open " + c.drive_file.string());
    return pulse::read_envelope(in);
  }
  const UniformGrid t = pulse::default_time_grid(kappa, c.grid_points, c.grid_span);
  if (c.drive == "gaussian") return pulse::gaussian_drive(c.drive_width / kappa, t);
  if (c.drive == "square") return pulse::square_drive(c.drive_width / kappa, t);
  if (c.drive == "exponential") return pulse::one_sided_exponential_drive(kappa / c.drive_width, t);
  return pulse::optimal_drive(kappa, t);
}

std::uint64_t cmd_pulse(const RunOptions& o, std::ostream& log) {
  const PulseConfig c = parse_pulse_config(load_json(o.config), o.config.parent_path());
  const std::uint64_t seed = o.seed.value_or(c.seed);
  const pulse::DerivedPhysical d = pulse::derive_physical(c.physical);
  const pulse::PulseSpec spec{d.kappa, d.g0, c.n_photons, c.eta, build_drive(c, d.kappa)};
  const pulse::CavityResponse r = pulse::compute_response(spec);

  json coeffs = nullptr;
  try {
    const pulse::FiniteEvolutionCoeffs fe = pulse::finite_evolution_coeffs(spec, c.physical.omega_m);
    const double eps = c.physical.omega_m / d.kappa;
    coeffs = {{"xi", fe.xi},
              {"norms", fe.norms},
              {"zeta", fe.zeta},
              {"omega_m_over_kappa", eps},
              {"corrected_conditional_variance", pulse::corrected_conditional_variance(r.chi, eps, fe.zeta)}};
  } catch (const DomainError&) {
    // Outside the first-order regime; reported as null.
  }

  fs::create_directories(o.out);
  std::ostringstream env;
  env << "# pulse envelopes v1\nt,alpha_in,alpha,alpha_lo\n";
  for (std::size_t i = 0; i < r.t.size(); ++i) {
    env << csv(r.t[i]) << ',' << csv(spec.drive.values[i]) << ',' << csv(r.alpha[i]) << ',' << csv(r.lo_envelope[i])
        << '\n';
  }
  write_atomic(o.out / "envelopes.csv", env.str());
  write_json(o.out / "summary.json", {{"format", "pulse-summary v1"},
                                      {"x0", d.x0},
                                      {"g0", d.g0},
                                      {"g0_over_2pi", d.g0 / kTwoPi},
                                      {"kappa", d.kappa},
                                      {"kappa_over_2pi", d.kappa / kTwoPi},
                                      {"omega_m", c.physical.omega_m},
                                      {"n_photons", c.n_photons},
                                      {"chi_ideal", r.chi_ideal},
                                      {"chi", r.chi},
                                      {"omega", r.omega_kick},
                                      {"omega_closed_form", optional_number(r.omega_closed_form)},
                                      {"alpha_energy", r.alpha_energy},
                                      {"finite_evolution", coeffs}});
  log << "pulse: chi=" << csv(r.chi) << " omega=" << csv(r.omega_kick) << '\n';
  return seed;
}

// ----------------------------------------------------------- tomography

hilbert::Marginal as_marginal(const measurement::OutcomeDensity& d, double chi, double theta) {
  hilbert::Marginal m{theta, UniformGrid(d.p.start() / chi, d.p.step() / chi, d.p.size()), d.values};
  for (double& v : m.values) v *= chi;
  return m;
}

json visibility_or_null(const hilbert::Marginal& m) {
  try {
    return tomography::fringe_visibility(m);
  } catch (const NumericError&) {
    return nullptr;
  }
}

// Symmetric outcome grid covering every angle to +-8 sigma.
UniformGrid outcome_grid(const hilbert::FockState& state, const measurement::MeasurementSpec& spec,
                         std::span<const double> angles) {
  double half = 0.0;
  for (double th : angles) {
    const hilbert::Moments m = hilbert::moments(hilbert::rotate(state, th));
    const double sigma = std::sqrt(spec.record_variance() + spec.chi * spec.chi * std::max(m.cov(0, 0), 0.0));
    half = std::max(half, std::abs(spec.chi * m.mean(0)) + 8.0 * sigma);
  }
  const double step = 0.025 * spec.chi;
  return UniformGrid::centered(half, 2 * static_cast<std::size_t>(std::ceil(half / step)) + 1);
}

std::uint64_t cmd_tomography(const RunOptions& o, std::ostream& log) {
  const TomographyConfig c = parse_tomography_config(load_json(o.config));
  const std::uint64_t seed = o.seed.value_or(c.seed);
  if (!(c.spec.chi > 0.0)) throw DomainError("no position information: chi = 0");
  c.spec.validate();
  const hilbert::FockState state = protocol::prepare_fock(c.state);
  const std::vector<double> angles = tomography::half_period_angles(c.angles);

  std::vector<measurement::OutcomeDensity> outcomes(angles.size());
  std::optional<tomography::Tomogram> tomogram;
  if (c.mode == TomographyConfig::Mode::Exact) {
    const UniformGrid pg = outcome_grid(state, c.spec, angles);
    parallel_for(angles.size(), o.threads,
                 [&](std::size_t j) { outcomes[j] = measurement::outcome_pdf(state, c.spec, pg, angles[j]); });
  } else {
    tomography::AcquireOptions opts;
    opts.bins = c.bins;
    opts.threads = o.threads;
    tomogram = tomography::acquire(state, c.spec, angles, c.shots, seed, opts);
    for (std::size_t j = 0; j < angles.size(); ++j) outcomes[j] = tomogram->histograms[j].density();
  }

  const double v = c.spec.record_variance();
  const tomography::Kernel kernel =
      c.kernel == TomographyConfig::KernelSource::Exact
          ? tomography::gaussian_kernel(v, UniformGrid::centered(8.0 * std::sqrt(v), 801), c.spec.chi)
          : tomography::calibrate_kernel(c.spec, c.kernel_shots, derive_seed(seed, angles.size()), 0.0, 201);

  std::vector<hilbert::Marginal> marginals(angles.size());
  parallel_for(angles.size(), o.threads, [&](std::size_t j) {
    marginals[j] = tomography::deconvolve(outcomes[j], kernel, c.regularization, angles[j]);
  });
  const hilbert::WignerGrid w = tomography::reconstruct_wigner(marginals, c.reconstruction);
  const hilbert::FockState rec = tomography::wigner_to_fock(w, state.n_max());
  const double fid = hilbert::fidelity(rec, state);
  const hilbert::Moments wm = tomography::wigner_moments(w);

  // Fringe contrast along theta = 0: bare, in the outcome record, after deconvolution.
  const UniformGrid xg = UniformGrid::centered(std::max(8.0, c.reconstruction.half_width), 321);
  const json v_bare = visibility_or_null(hilbert::marginal(state, 0.0, xg));
  const json v_record = visibility_or_null(as_marginal(outcomes[0], c.spec.chi, 0.0));
  const json v_deconv = visibility_or_null(marginals[0]);
  json suppression = nullptr;
  if (v_bare.is_number() && v_record.is_number()) suppression = v_record.get<double>() / v_bare.get<double>();

  fs::create_directories(o.out);
  std::ostringstream oc, mc;
  oc << "# outcomes v1\nangle,theta,p,density\n";
  mc << "# marginals v1\nangle,theta,x,density\n";
  for (std::size_t j = 0; j < angles.size(); ++j) {
    for (std::size_t i = 0; i < outcomes[j].values.size(); ++i) {
      oc << j << ',' << csv(angles[j]) << ',' << csv(outcomes[j].p[i]) << ',' << csv(outcomes[j].values[i]) << '\n';
    }
    for (std::size_t i = 0; i < marginals[j].values.size(); ++i) {
      mc << j << ',' << csv(angles[j]) << ',' << csv(marginals[j].x[i]) << ',' << csv(marginals[j].values[i]) << '\n';
    }
  }
  write_atomic(o.out / "outcomes.csv", oc.str());
  write_atomic(o.out / "marginals.csv", mc.str());
  std::ostringstream wc;
  tomography::write_wigner_csv(wc, w);
  write_atomic(o.out / "wigner.csv", wc.str());
  if (tomogram) write_json(o.out / "tomogram.json", tomogram->to_json());
  write_json(o.out / "report.json",
             {{"format", "tomography-report v1"},
              {"mode", c.mode == TomographyConfig::Mode::Exact ? "exact" : "sampled"},
              {"n_max", state.n_max()},
              {"angles", angles.size()},
              {"fidelity", fid},
              {"wigner_min", w.min()},
              {"wigner_integral", w.integral()},
              {"mean", {wm.mean(0), wm.mean(1)}},
              {"var_x", wm.cov(0, 0)},
              {"var_p", wm.cov(1, 1)},
              {"fringe_visibility", {{"bare", v_bare}, {"record", v_record}, {"deconvolved", v_deconv}}},
              {"fringe_suppression", suppression},
              {"kernel_variance", kernel.variance()}});
  log << "tomography: fidelity=" << csv(fid) << " wigner_min=" << csv(w.min()) << '\n';
  return seed;
}

// --------------------------------------------------------------- purify

std::string step_kind(const protocol::Step& s) {
  if (std::holds_alternative<protocol::PulseStep>(s)) return "pulse";
  if (std::holds_alternative<protocol::EvolveStep>(s)) return "evolve";
  return "thermalize";
}

std::uint64_t cmd_purify(const RunOptions& o, std::ostream& log) {
  ProtocolConfig c = parse_protocol_config(load_json(o.config));
  if (o.seed) c.sequence.master_seed = *o.seed;
  json summary{{"format", "protocol-summary v1"}};
  protocol::SequenceConfig seq;
  if (c.mode == ProtocolConfig::Mode::Purify) {
    const protocol::PurificationResult p = protocol::purify_two_pulse(c.nbar, c.chi, c.bath, c.omega);
    seq = protocol::purification_sequence(c.nbar, c.chi, c.bath, c.omega);
    seq.master_seed = c.sequence.master_seed;
    summary["mode"] = "purify";
    summary["n_eff_first"] = p.n_eff_first;
    summary["n_eff"] = p.n_eff;
    summary["n_eff_predicted"] = gaussian::predicted_neff2(c.chi);
    if (c.bath) {
      summary["bath_nbar"] = c.bath->nbar_bath;
      summary["quality_factor"] = c.bath->quality_factor();
      summary["n_eff_predicted_thermal"] =
          gaussian::predicted_neff2_thermal(c.chi, c.bath->quality_factor(), c.bath->nbar_bath);
    }
  } else {
    seq = c.sequence;
    summary["mode"] = "sequence";
  }
  const protocol::Trajectory t = protocol::run_sequence(seq);
  summary["final_n_eff"] = t.snapshots.back().n_eff;

  fs::create_directories(o.out);
  std::ostringstream table;
  table << "# protocol snapshots v1\nstep,kind,mean_x,mean_p,var_x,var_p,cov_xp,n_eff\n";
  for (std::size_t i = 0; i < t.snapshots.size(); ++i) {
    const protocol::Snapshot& s = t.snapshots[i];
    table << i << ',' << (i == 0 ? std::string("initial") : step_kind(seq.steps[i - 1])) << ','
          << csv(s.moments.mean(0)) << ',' << csv(s.moments.mean(1)) << ',' << csv(s.moments.cov(0, 0)) << ','
          << csv(s.moments.cov(1, 1)) << ',' << csv(s.moments.cov(0, 1)) << ',' << csv(s.n_eff) << '\n';
  }
  write_atomic(o.out / "neff.csv", table.str());
  write_json(o.out / "trajectory.json", t.to_json());
  write_json(o.out / "summary.json", summary);
  log << "purify: final n_eff=" << csv(t.snapshots.back().n_eff) << '\n';
  return seq.master_seed;
}

}  // namespace

void write_atomic(const fs::path& file, std::string_view content) {
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, file);
}

int run_command(std::string_view command, const RunOptions& options, std::ostream& log, std::ostream& err) {
  try {
    std::uint64_t seed = 0;
    if (command == "pulse") {
      seed = cmd_pulse(options, log);
    } else if (command == "tomography") {
      seed = cmd_tomography(options, log);
    } else if (command == "purify") {
      seed = cmd_purify(options, log);
    } else {
      err << "error: unknown command " << command << '\n';
      return kConfigError;
    }
    write_manifest(command, options, seed);
    return kSuccess;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const optopulse::Error& e) {
    err << "error: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace optopulse::cli
