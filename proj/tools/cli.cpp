#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "st1/fitting/assign.hpp"
#include "st1/fitting/g2fit.hpp"
#include "st1/fitting/hyperfine_fit.hpp"
#include "st1/fitting/multiexp.hpp"
#include "st1/hyperfine.hpp"
#include "st1/io/config.hpp"
#include "st1/io/csv.hpp"
#include "st1/io/emit.hpp"
#include "st1/onp.hpp"
#include "st1/ratemodel.hpp"
#include "st1/spinham.hpp"

namespace st1::cli {
namespace {

using io::DataError;
using io::ordered_json;
using io::Table;

struct Common {
  std::string config;
  bool dry_run = false;
  std::optional<std::uint64_t> seed;
  std::string out = "-";
  std::string format;
};

struct Context {
  Common common;
  io::Config config;
  std::ostream& out;
  std::ostream& err;

  std::uint64_t seed() const { return common.seed.value_or(config.seed()); }
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

void emit_table(const Context& ctx, const Table& t) {
  if (ctx.common.format == "json") {
    ordered_json j;
    j["columns"] = t.header;
    j["rows"] = t.rows;
    io::write_output(ctx.common.out, io::dump_json(j), ctx.out);
  } else {
    io::write_output(ctx.common.out, io::to_csv(t), ctx.out);
  }
}

int dry_run_ok(const Context& ctx, const std::string& what) {
  ctx.out << "dry-run ok: " << what << "\n";
  return ok;
}

// ---------------------------------------------------------------- parameters

rate::RateParams rates_or_default(const Context& ctx) {
  if (auto p = io::rate_params(ctx.config)) return *p;
  return rate::reference_recovery_params();
}

spin::TripletParams triplet_or_default(const Context& ctx) {
  if (auto t = io::triplet_params(ctx.config)) return *t;
  return hf::reference_hyperfine_params().triplet;
}

hf::HyperfineParams hyperfine_or_default(const Context& ctx) {
  if (auto h = io::hyperfine_params(ctx.config)) return *h;
  hf::HyperfineParams p = hf::reference_hyperfine_params();
  if (auto t = io::triplet_params(ctx.config)) p.triplet = *t;
  return p;
}

io::OnpConfig onp_or_default(const Context& ctx) {
  if (auto o = io::onp_config(ctx.config)) return *o;
  return {onp::reference_onp_rates(), onp::Mixing::lac_center(), {}};
}

double sim(const Context& ctx, const char* key, double fallback) { return ctx.config.get_double("simulation", key, fallback); }

long long sim_int(const Context& ctx, const char* key, long long fallback) {
  return ctx.config.get_int("simulation", key).value_or(fallback);
}

std::vector<double> grid(double lo, double hi, long long n, bool log_spacing) {
  if (n < 2) throw std::invalid_argument("a grid needs at least 2 points");
  if (!(hi > lo)) throw std::invalid_argument("grid upper bound must exceed the lower bound");
  if (log_spacing && !(lo > 0.0)) throw std::invalid_argument("log grid needs a positive lower bound");
  std::vector<double> g;
  for (long long i = 0; i < n; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(n - 1);
    g.push_back(log_spacing ? lo * std::pow(hi / lo, f) : lo + (hi - lo) * f);
  }
  return g;
}

std::vector<double> dark_grid(const Context& ctx) {
  const std::string spacing = ctx.config.get_string("simulation", "spacing").value_or("log");
  if (spacing != "log" && spacing != "linear")
    throw DataError(ctx.config.source, ctx.config.line_of("simulation", "spacing"), "spacing must be log or linear");
  return grid(sim(ctx, "dark_min_ns", 50.0), sim(ctx, "dark_max_ns", 12000.0), sim_int(ctx, "points", 60),
              spacing == "log");
}

rate::PiPulse pulse_of(const Context& ctx, const std::string& flag) {
  const std::string name = !flag.empty() ? flag : ctx.config.get_string("simulation", "pulse").value_or("none");
  return rate::pi_pulse_from_string(name);
}

// ---------------------------------------------------------------- simulate

int simulate_rate(const Context& ctx) {
  const auto p = rates_or_default(ctx);
  const auto dark = dark_grid(ctx);
  if (ctx.common.dry_run) return dry_run_ok(ctx, "analytic recovery curves on " + std::to_string(dark.size()) + " dark times");
  const std::vector<rate::PiPulse> pulses = {rate::PiPulse::none, rate::PiPulse::d_plus_e, rate::PiPulse::d_minus_e,
                                             rate::PiPulse::two_e};
  std::vector<rate::RecoverySolution> sols;
  for (auto pulse : pulses) sols.push_back(rate::recovery_solution(p, pulse));
  Table t;
  t.header = {"dark_ns"};
  for (auto pulse : pulses) t.header.push_back("nG_" + rate::to_string(pulse));
  for (double d : dark) {
    std::vector<double> row{d};
    for (const auto& s : sols) row.push_back(s.evaluate(d));
    t.rows.push_back(row);
  }
  emit_table(ctx, t);
  return ok;
}

int simulate_recovery(const Context& ctx, const std::string& pulse_flag, double counts) {
  const auto p = rates_or_default(ctx);
  const auto dark = dark_grid(ctx);
  rate::RecoveryOptions opt;
  opt.pulse = pulse_of(ctx, pulse_flag);
  opt.pulse_length = sim(ctx, "pulse_length_ns", opt.pulse_length);
  opt.readout_window = sim(ctx, "readout_window_ns", opt.readout_window);
  if (counts < 0.0) throw std::invalid_argument("--counts must be >= 0");
  if (ctx.common.dry_run) return dry_run_ok(ctx, "recovery simulation, pulse " + rate::to_string(opt.pulse));
  const auto curve = rate::simulate_recovery(p, dark, opt);
  for (const auto& w : curve.warnings) ctx.err << "warning: " << w << "\n";
  Table t;
  if (counts > 0.0) {
    std::mt19937_64 rng(ctx.seed());
    t.header = {"t_ns", "counts"};
    for (std::size_t i = 0; i < dark.size(); ++i) {
      std::poisson_distribution<long long> pd(counts * curve.signal[i]);
      t.rows.push_back({dark[i], static_cast<double>(pd(rng))});
    }
  } else {
    t.header = {"dark_ns", "signal", "photons"};
    for (std::size_t i = 0; i < dark.size(); ++i) t.rows.push_back({dark[i], curve.signal[i], curve.photons[i]});
  }
  emit_table(ctx, t);
  return ok;
}

int simulate_g2(const Context& ctx) {
  auto p = rates_or_default(ctx);
  const double tmax = sim(ctx, "tau_max_ns", 2000.0);
  const double step = sim(ctx, "tau_step_ns", 2.0);
  if (!(step > 0.0) || !(tmax > step)) throw std::invalid_argument("tau grid must have 0 < step < tau_max");
  std::vector<double> taus;
  const auto n = static_cast<long long>(std::floor(tmax / step + 1e-9));
  for (long long i = 0; i <= n; ++i) taus.push_back(static_cast<double>(i) * step);
  if (ctx.common.dry_run) return dry_run_ok(ctx, "g2 on " + std::to_string(taus.size()) + " delays");
  const auto curve = rate::g2_curve(p, taus);
  Table t{{"tau_ns", "g2"}, {}};
  for (const auto& c : curve) t.rows.push_back({c.x, c.y});
  emit_table(ctx, t);
  return ok;
}

int simulate_pulse_response(const Context& ctx) {
  const auto p = rates_or_default(ctx);
  rate::PulseResponseOptions opt;
  opt.pulse_length = sim(ctx, "pulse_length_ns", opt.pulse_length);
  opt.window = sim(ctx, "window_ns", opt.window);
  opt.step = sim(ctx, "step_ns", opt.step);
  if (ctx.common.dry_run) return dry_run_ok(ctx, "pulse-response profile");
  const auto curve = rate::pulse_response_profile(p, opt);
  Table t{{"offset_ns", "window_photons"}, {}};
  for (const auto& c : curve) t.rows.push_back({c.x, c.y});
  emit_table(ctx, t);
  return ok;
}

int simulate_field_scan(const Context& ctx, const std::string& axis_flag) {
  const auto base = triplet_or_default(ctx);
  const std::string axis_name = !axis_flag.empty() ? axis_flag : ctx.config.get_string("simulation", "axis").value_or("theta");
  if (axis_name != "theta" && axis_name != "phi") throw std::invalid_argument("axis must be theta or phi");
  const auto axis = axis_name == "theta" ? spin::ScanAxis::theta : spin::ScanAxis::phi;
  const double field = sim(ctx, "field_mt", 10.0);
  const auto n = sim_int(ctx, "angle_points", 181);
  const double span = axis == spin::ScanAxis::theta ? std::numbers::pi : 2.0 * std::numbers::pi;
  const auto angles = grid(0.0, span, n, false);
  if (ctx.common.dry_run) return dry_run_ok(ctx, axis_name + " scan at " + io::format_number(field) + " mT");
  const auto rows = spin::field_scan(base, field, axis, angles);
  Table t{{"angle_deg", "f1_MHz", "f2_MHz", "f3_MHz"}, {}};
  for (const auto& r : rows)
    t.rows.push_back({r.angle * 180.0 / std::numbers::pi, r.frequencies[0], r.frequencies[1], r.frequencies[2]});
  emit_table(ctx, t);
  return ok;
}

int simulate_lac_map(const Context& ctx) {
  const auto p = hyperfine_or_default(ctx);
  const auto fields = grid(sim(ctx, "b_min_mt", 0.0), sim(ctx, "b_max_mt", 80.0), sim_int(ctx, "b_points", 161), false);
  if (ctx.common.dry_run) return dry_run_ok(ctx, "level map on " + std::to_string(fields.size()) + " fields");
  const auto map = hf::lac_map(p, fields);
  Table t{{"Bz_mT", "E1_MHz", "E2_MHz", "E3_MHz", "E4_MHz", "E5_MHz", "E6_MHz", "min_overlap"}, {}};
  for (std::size_t i = 0; i < map.fields_mt.size(); ++i) {
    std::vector<double> row{map.fields_mt[i]};
    for (int k = 0; k < 6; ++k) row.push_back(map.branches[i](k));
    row.push_back(map.min_overlap[i]);
    t.rows.push_back(row);
  }
  emit_table(ctx, t);
  return ok;
}

int simulate_resonances(const Context& ctx) {
  const auto p = hyperfine_or_default(ctx);
  hf::FrequencyWindow w{sim(ctx, "f_min_mhz", 0.0), sim(ctx, "f_max_mhz", 1e300)};
  if (ctx.common.dry_run) return dry_run_ok(ctx, "resonances at the configured field");
  const auto res = hf::hyperfine_resonances(p, w);
  Table t{{"freq_MHz", "intensity", "lower", "upper"}, {}};
  for (const auto& r : res) t.rows.push_back({r.frequency, r.intensity, double(r.lower), double(r.upper)});
  emit_table(ctx, t);
  return ok;
}

int simulate_onp(const Context& ctx) {
  const auto cfg = onp_or_default(ctx);
  const onp::OnpModel model(cfg.rates, cfg.mixing);
  if (ctx.common.dry_run) return dry_run_ok(ctx, "ten-level polarization model");
  const auto r = onp::evaluate(model, cfg.options);
  if (ctx.common.format == "json") {
    ordered_json j;
    j["polarization"] = r.polarization;
    j["n_up"] = r.n_up;
    j["n_down"] = r.n_down;
    j["fluorescence_up"] = r.fluorescence_up;
    j["fluorescence_down"] = r.fluorescence_down;
    j["contrast"] = r.contrast;
    j["signal_contrast"] = r.signal_contrast;
    j["settling_ns"] = r.settling_time;
    j["readout_horizon_ns"] = cfg.options.readout_horizon;
    io::write_output(ctx.common.out, io::dump_json(j), ctx.out);
    return ok;
  }
  Table t{{"polarization", "n_up", "n_down", "fluorescence_up", "fluorescence_down", "contrast", "signal_contrast",
           "settling_ns"},
          {{r.polarization, r.n_up, r.n_down, r.fluorescence_up, r.fluorescence_down, r.contrast, r.signal_contrast,
            r.settling_time}}};
  emit_table(ctx, t);
  return ok;
}

// ---------------------------------------------------------------- fit

fit::MultiExpOptions multiexp_options(const Context& ctx, const std::string& form_flag, std::optional<bool> baseline) {
  fit::MultiExpOptions opt;
  const std::string form = !form_flag.empty() ? form_flag : ctx.config.get_string("fit", "form").value_or("rising");
  if (form != "rising" && form != "decaying") throw std::invalid_argument("form must be rising or decaying");
  opt.form = form == "rising" ? fit::ExpForm::rising : fit::ExpForm::decaying;
  opt.baseline = baseline.value_or(ctx.config.get_bool("fit", "baseline").value_or(true));
  if (auto it = ctx.config.get_int("fit", "max_iterations")) opt.lm.max_iterations = static_cast<int>(*it);
  return opt;
}

std::string report_text(const fit::FitReport& r) {
  std::ostringstream s;
  s << r.model << "  chi2=" << io::format_number(r.chi2) << "  nu=" << r.nu << "  Q=" << io::format_number(r.q)
    << "  status=" << fit::to_string(r.status) << "\n";
  for (const auto& p : r.params)
    s << "  " << p.name << " = " << io::format_number(p.value) << (p.fixed ? " (fixed)" : " +/- " + io::format_number(p.uncertainty))
      << "\n";
  for (const auto& f : r.flags) s << "  flag: " << f << "\n";
  return s.str();
}

int emit_report(const Context& ctx, const fit::FitReport& r) {
  if (ctx.common.format == "json") {
    io::write_output(ctx.common.out, io::dump_json(io::to_json(r)), ctx.out);
  } else if (ctx.common.format == "csv") {
    std::string body;
    for (const auto& p : r.params) body += p.name + "," + io::format_number(p.value) + "," + io::format_number(p.uncertainty) + "\n";
    io::write_output(ctx.common.out, "parameter,value,uncertainty\n" + body, ctx.out);
  } else {
    io::write_output(ctx.common.out, report_text(r), ctx.out);
  }
  return r.converged() ? ok : not_converged;
}

int fit_multiexp(const Context& ctx, const std::string& data, const std::string& components, const std::string& form,
                 std::optional<bool> baseline, int bootstrap) {
  const auto trace = io::load_trace(data, io::TraceSchema::time_series);
  const auto opt = multiexp_options(ctx, form, baseline);
  const std::string comp = !components.empty() ? components : ctx.config.get_string("fit", "components").value_or("auto");
  if (comp != "auto" && comp != "1" && comp != "2" && comp != "3") throw std::invalid_argument("components must be auto, 1, 2 or 3");
  const int boot = bootstrap >= 0 ? bootstrap : static_cast<int>(ctx.config.get_int("fit", "bootstrap").value_or(0));
  if (ctx.common.dry_run) return dry_run_ok(ctx, std::to_string(trace.size()) + " points, components " + comp);

  fit::ModelSelection sel;
  if (comp == "auto") {
    sel = fit::model_select(trace, opt);
  } else {
    sel.fits.push_back(fit::fit_multiexp(trace, std::stoi(comp), opt));
    sel.chosen = std::stoi(comp);
  }
  const auto& best = sel.best();
  std::optional<fit::BootstrapResult> bs;
  if (boot > 0) bs = fit::bootstrap_multiexp(trace, best, opt, boot, ctx.seed());

  if (ctx.common.format == "json") {
    ordered_json j;
    j["chosen"] = sel.chosen;
    ordered_json fits = ordered_json::array();
    for (const auto& f : sel.fits) fits.push_back(io::to_json(f.report));
    j["fits"] = fits;
    j["warnings"] = sel.warnings;
    if (bs) {
      ordered_json b;
      b["replicates"] = bs->samples.size();
      b["failures"] = bs->failures;
      for (std::size_t i = 0; i < bs->names.size(); ++i) b["sd"][bs->names[i]] = bs->sd[i];
      j["bootstrap"] = b;
    }
    io::write_output(ctx.common.out, io::dump_json(j), ctx.out);
  } else if (ctx.common.format == "csv") {
    const double nan = std::nan("");
    Table t{{"components", "chi2", "nu", "Q", "accepted", "chosen", "tau1", "tau2", "tau3", "A1", "A2", "A3", "c0"}, {}};
    for (const auto& f : sel.fits) {
      const auto k = f.tau.size();
      std::vector<double> row{double(k), f.report.chi2, double(f.report.nu), f.report.q,
                              f.report.q >= fit::kRejectQ ? 1.0 : 0.0, int(k) == sel.chosen ? 1.0 : 0.0};
      for (std::size_t i = 0; i < 3; ++i) row.push_back(i < k ? f.tau[i] : nan);
      for (std::size_t i = 0; i < 3; ++i) row.push_back(i < k ? f.amplitude[i] : nan);
      row.push_back(f.baseline);
      t.rows.push_back(row);
    }
    io::write_output(ctx.common.out, io::to_csv(t), ctx.out);
  } else {
    std::ostringstream s;
    s << "model selection (reject Q < 1e-10)\n";
    s << "  n        chi2     nu              Q  status          taus\n";
    for (const auto& f : sel.fits) {
      char line[160];
      std::snprintf(line, sizeof line, "  %d %12.6g %6d %14.6g  %-14s ", int(f.tau.size()), f.report.chi2, f.report.nu,
                    f.report.q, fit::to_string(f.report.status).c_str());
      s << line;
      for (double t : f.tau) s << " " << io::format_number(t);
      s << (int(f.tau.size()) == sel.chosen ? "  <- chosen" : "") << "\n";
    }
    for (const auto& w : sel.warnings) s << "warning: " << w << "\n";
    s << "\n" << report_text(best.report);
    if (bs)
      for (std::size_t i = 0; i < bs->names.size(); ++i)
        s << "  bootstrap sd " << bs->names[i] << " = " << io::format_number(bs->sd[i]) << "\n";
    io::write_output(ctx.common.out, s.str(), ctx.out);
  }
  return best.report.converged() ? ok : not_converged;
}

int fit_g2(const Context& ctx, const std::string& data, double pump_guess, double get_guess) {
  const auto trace = io::load_trace(data, io::TraceSchema::correlation);
  const auto fixed = rates_or_default(ctx);
  fit::G2FitOptions opt;
  opt.pump_guess = pump_guess;
  opt.gamma_et_guess = get_guess;
  if (ctx.common.dry_run) return dry_run_ok(ctx, std::to_string(trace.size()) + " g2 points");
  return emit_report(ctx, fit::fit_g2(trace, fixed, opt));
}

int fit_hyperfine(const Context& ctx, const std::string& data, const std::string& free) {
  const auto list = io::load_resonances(data);
  const auto guess = hyperfine_or_default(ctx);
  fit::HyperfineFitOptions opt;
  opt.free.fill(false);
  std::stringstream ss(free);
  std::string name;
  while (std::getline(ss, name, ',')) {
    const auto it = std::find(fit::kHyperfineParamNames.begin(), fit::kHyperfineParamNames.end(), name);
    if (it == fit::kHyperfineParamNames.end()) throw CLI::ValidationError("--free", "unknown parameter '" + name + "'");
    opt.free[static_cast<std::size_t>(it - fit::kHyperfineParamNames.begin())] = true;
  }
  if (ctx.common.dry_run) return dry_run_ok(ctx, std::to_string(list.size()) + " resonance points");
  return emit_report(ctx, fit::fit_hyperfine(list, guess, opt));
}

int fit_assign(const Context& ctx, const std::vector<std::string>& traces, bool separate) {
  std::vector<std::pair<rate::PiPulse, fit::Trace>> inputs;
  for (const auto& spec : traces) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--trace", "expected PULSE=PATH, got '" + spec + "'");
    rate::PiPulse pulse;
    try {
      pulse = rate::pi_pulse_from_string(spec.substr(0, eq));
    } catch (const std::invalid_argument& e) {
      throw CLI::ValidationError("--trace", e.what());
    }
    inputs.emplace_back(pulse, io::load_trace(spec.substr(eq + 1), io::TraceSchema::time_series));
  }
  if (inputs.size() < 2) throw CLI::ValidationError("--trace", "at least two traces are required");
  const auto opt = multiexp_options(ctx, "", std::nullopt);
  if (ctx.common.dry_run) return dry_run_ok(ctx, std::to_string(inputs.size()) + " recovery traces");

  std::vector<fit::LifetimeReport> reports;
  bool converged = true;
  if (separate) {
    for (const auto& [pulse, trace] : inputs) {
      const auto sel = fit::model_select(trace, opt);
      converged = converged && sel.best().report.converged();
      reports.push_back(fit::LifetimeReport::from_fit(pulse, sel.best()));
    }
  } else {
    std::vector<fit::Trace> traces;
    for (const auto& in : inputs) traces.push_back(in.second);
    const auto sel = fit::model_select_shared(traces, opt);
    const auto& best = sel.best();
    converged = best.report.converged();
    for (const auto& w : sel.warnings) ctx.err << "warning: " << w << "\n";
    for (std::size_t i = 0; i < inputs.size(); ++i) reports.push_back({inputs[i].first, best.tau, best.amplitude[i]});
  }
  const auto a = fit::assign_lifetimes(reports);
  if (ctx.common.format == "json") {
    ordered_json j;
    ordered_json levels = ordered_json::array();
    for (const auto& l : a.levels) levels.push_back({{"level", rate::to_string(l.level)}, {"tau", l.tau}, {"tau_sd", l.tau_sd}});
    j["levels"] = levels;
    j["ambiguous"] = a.ambiguous;
    j["best_score"] = a.best_score;
    j["runner_up_score"] = a.runner_up_score;
    j["warnings"] = a.warnings;
    io::write_output(ctx.common.out, io::dump_json(j), ctx.out);
  } else {
    std::string s = ctx.common.format == "csv" ? "level,tau_ns,tau_sd_ns\n" : "";
    for (const auto& l : a.levels) {
      if (ctx.common.format == "csv")
        s += rate::to_string(l.level) + "," + io::format_number(l.tau) + "," + io::format_number(l.tau_sd) + "\n";
      else
        s += "tau_" + rate::to_string(l.level) + " = " + fmt("%.0f", l.tau) + " +/- " + fmt("%.0f", l.tau_sd) + " ns\n";
    }
    if (ctx.common.format != "csv") {
      if (a.ambiguous) s += "assignment ambiguous\n";
      for (const auto& w : a.warnings) s += "warning: " + w + "\n";
    }
    io::write_output(ctx.common.out, s, ctx.out);
  }
  return converged ? ok : not_converged;
}

// ---------------------------------------------------------------- analyze

void emit_pairs(const Context& ctx, const std::vector<std::pair<std::string, double>>& kv, const char* text_pattern) {
  if (ctx.common.format == "json") {
    ordered_json j;
    for (const auto& [k, v] : kv) j[k] = v;
    io::write_output(ctx.common.out, io::dump_json(j), ctx.out);
  } else if (ctx.common.format == "csv") {
    Table t;
    t.rows.emplace_back();
    for (const auto& [k, v] : kv) {
      t.header.push_back(k);
      t.rows.back().push_back(v);
    }
    io::write_output(ctx.common.out, io::to_csv(t), ctx.out);
  } else {
    std::string s;
    for (std::size_t i = 0; i < kv.size(); ++i)
      s += (i ? ", " : "") + kv[i].first + " = " + fmt(text_pattern, kv[i].second);
    io::write_output(ctx.common.out, s + "\n", ctx.out);
  }
}

hf::HyperfineConvention convention_of(const std::string& c) {
  if (c == "axial") return hf::HyperfineConvention::axial;
  if (c == "printed") return hf::HyperfineConvention::printed;
  throw CLI::ValidationError("--convention", "must be axial or printed");
}

int analyze_fermi_dipolar(const Context& ctx, double azz, double aperp, const std::string& conv) {
  const auto c = convention_of(conv);
  if (!std::isfinite(azz) || !std::isfinite(aperp)) throw std::invalid_argument("A components must be finite");
  if (ctx.common.dry_run) return dry_run_ok(ctx, "Fermi/dipolar decomposition");
  const auto fd = hf::fermi_dipolar(azz, aperp, c);
  emit_pairs(ctx, {{"f_MHz", fd.f}, {"d_MHz", fd.d}}, "%.2f");
  return ok;
}

int analyze_spin_density(const Context& ctx, std::optional<double> f, std::optional<double> d, std::optional<double> azz,
                         std::optional<double> aperp, const std::string& conv) {
  const auto atomic = io::atomic_constants(ctx.config).value_or(hf::AtomicConstants{});
  double fv = 0.0, dv = 0.0;
  if (f && d) {
    fv = *f;
    dv = *d;
  } else if (azz && aperp) {
    const auto fd = hf::fermi_dipolar(*azz, *aperp, convention_of(conv));
    fv = fd.f;
    dv = fd.d;
  } else {
    throw CLI::ValidationError("spin-density", "give --f and --d, or --azz and --aperp");
  }
  if (ctx.common.dry_run) return dry_run_ok(ctx, "spin density with atomic constants " + atomic.name + "/" + atomic.version);
  const auto r = hf::spin_density(fv, dv, atomic);
  emit_pairs(ctx, {{"cs2", r.cs2}, {"cp2", r.cp2}, {"eta", r.eta}}, "%.3f");
  return ok;
}

int analyze_r12(const Context& ctx, std::optional<double> d) {
  const double dv = d ? *d : triplet_or_default(ctx).d;
  if (!(dv > 0.0)) throw std::invalid_argument("D must be > 0");
  if (ctx.common.dry_run) return dry_run_ok(ctx, "point-dipole separation");
  emit_pairs(ctx, {{"r12_angstrom", spin::r12_estimate(dv).r12_angstrom}}, "%.3f");
  return ok;
}

// ---------------------------------------------------------------- wiring

void add_common(CLI::App* app, Common& c, const std::string& default_format) {
  c.format = default_format;
  app->add_option("--config", c.config, "configuration file (also looked up in $ST1_CONFIG_DIR)");
  app->add_flag("--dry-run", c.dry_run, "validate inputs without computing");
  app->add_option("--seed", c.seed, "random seed (default from [fit] seed, else 12345)");
  app->add_option("--out", c.out, "output path, '-' for stdout");
  std::vector<std::string> formats = default_format == "csv" ? std::vector<std::string>{"csv", "json"}
                                                             : std::vector<std::string>{"text", "csv", "json"};
  app->add_option("--format", c.format, "output format")->check(CLI::IsMember(formats));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ST1 defect photophysics and spin toolkit", "st1"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::map<CLI::App*, Common> commons;
  std::map<CLI::App*, std::function<int(Context&)>> actions;
  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& desc, const std::string& fmt_default) {
    CLI::App* a = parent->add_subcommand(name, desc);
    add_common(a, commons[a], fmt_default);
    return a;
  };

  CLI::App* simulate = app.add_subcommand("simulate", "forward simulations");
  CLI::App* fitc = app.add_subcommand("fit", "parameter estimation");
  CLI::App* analyze = app.add_subcommand("analyze", "closed-form analyses");
  for (auto* g : {simulate, fitc, analyze}) g->require_subcommand(1);

  // simulate
  auto* s_rate = leaf(simulate, "rate", "analytic ground-state recovery for all pi-pulse variants", "csv");
  actions[s_rate] = simulate_rate;
  std::string pulse_flag;
  double counts = 0.0;
  auto* s_rec = leaf(simulate, "recovery", "numeric pulse-sequence recovery curve", "csv");
  s_rec->add_option("--pulse", pulse_flag, "none|D+E|D-E|2E");
  s_rec->add_option("--counts", counts, "emit Poisson counts with this full-recovery mean");
  actions[s_rec] = [&](Context& c) { return simulate_recovery(c, pulse_flag, counts); };
  actions[leaf(simulate, "g2", "photon autocorrelation", "csv")] = simulate_g2;
  actions[leaf(simulate, "pulse-response", "sliding-window pulse response", "csv")] = simulate_pulse_response;
  std::string axis_flag;
  auto* s_scan = leaf(simulate, "field-scan", "triplet transitions versus field direction", "csv");
  s_scan->add_option("--axis", axis_flag, "theta|phi");
  actions[s_scan] = [&](Context& c) { return simulate_field_scan(c, axis_flag); };
  actions[leaf(simulate, "lac-map", "electro-nuclear levels versus B_z", "csv")] = simulate_lac_map;
  actions[leaf(simulate, "resonances", "allowed electro-nuclear transitions", "csv")] = simulate_resonances;
  actions[leaf(simulate, "onp", "optical nuclear polarization model", "csv")] = simulate_onp;

  // fit
  std::string data, components, form, free = "D,E,A_zz,A_perp";
  std::optional<bool> baseline;
  int bootstrap = -1;
  bool no_baseline = false;
  double pump_guess = 0.05, get_guess = 0.02;
  std::vector<std::string> traces;
  auto* f_me = leaf(fitc, "multiexp", "multi-exponential fit with model selection", "text");
  f_me->add_option("--data", data, "CSV with t_ns,counts[,sigma]")->required();
  f_me->add_option("--components", components, "auto|1|2|3");
  f_me->add_option("--form", form, "rising|decaying");
  f_me->add_flag("--no-baseline", no_baseline, "fit without constant offset");
  f_me->add_option("--bootstrap", bootstrap, "parametric bootstrap replicates");
  actions[f_me] = [&](Context& c) {
    if (no_baseline) baseline = false;
    return fit_multiexp(c, data, components, form, baseline, bootstrap);
  };
  auto* f_g2 = leaf(fitc, "g2", "pump rate and total triplet population rate from g2", "text");
  f_g2->add_option("--data", data, "CSV with tau_ns,g2[,sigma]")->required();
  f_g2->add_option("--pump-guess", pump_guess, "initial pump rate, 1/ns");
  f_g2->add_option("--gamma-et-guess", get_guess, "initial gamma_ET, 1/ns");
  actions[f_g2] = [&](Context& c) { return fit_g2(c, data, pump_guess, get_guess); };
  auto* f_hf = leaf(fitc, "hyperfine", "spin-Hamiltonian fit to a resonance map", "text");
  f_hf->add_option("--data", data, "CSV with Bz_mT,freq_MHz[,sigma]")->required();
  f_hf->add_option("--free", free, "comma-separated free parameters among D,E,A_zz,A_perp,g");
  actions[f_hf] = [&](Context& c) { return fit_hyperfine(c, data, free); };
  auto* f_as = leaf(fitc, "assign-lifetimes", "assign time constants to sublevels", "text");
  f_as->add_option("--trace", traces, "PULSE=PATH, repeatable (PULSE in none|D+E|D-E|2E)")->required();
  bool separate = false;
  f_as->add_flag("--separate", separate, "fit each trace on its own instead of sharing time constants");
  actions[f_as] = [&](Context& c) { return fit_assign(c, traces, separate); };

  // analyze
  double azz = 0.0, aperp = 0.0;
  std::string conv = "axial";
  auto* a_fd = leaf(analyze, "fermi-dipolar", "isotropic and dipolar hyperfine parts", "text");
  a_fd->add_option("--azz", azz, "A_zz, MHz")->required();
  a_fd->add_option("--aperp", aperp, "A_perp, MHz")->required();
  a_fd->add_option("--convention", conv, "axial|printed");
  actions[a_fd] = [&](Context& c) { return analyze_fermi_dipolar(c, azz, aperp, conv); };
  std::optional<double> f_opt, d_opt, azz_opt, aperp_opt, dz_opt;
  auto* a_sd = leaf(analyze, "spin-density", "s/p character and spin density on the nucleus' atom", "text");
  a_sd->add_option("--f", f_opt, "Fermi contact term, MHz");
  a_sd->add_option("--d", d_opt, "dipolar term, MHz");
  a_sd->add_option("--azz", azz_opt, "A_zz, MHz");
  a_sd->add_option("--aperp", aperp_opt, "A_perp, MHz");
  a_sd->add_option("--convention", conv, "axial|printed");
  actions[a_sd] = [&](Context& c) { return analyze_spin_density(c, f_opt, d_opt, azz_opt, aperp_opt, conv); };
  auto* a_r = leaf(analyze, "r12", "point-dipole spin separation from D", "text");
  a_r->add_option("--D", dz_opt, "zero-field splitting D, MHz (default from [triplet])");
  actions[a_r] = [&](Context& c) { return analyze_r12(c, dz_opt); };

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return ok;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return ok;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return usage_error;
  }

  for (auto& [sub, action] : actions) {
    if (!sub->parsed()) continue;
    try {
      Context ctx{commons[sub], {}, out, err};
      if (!ctx.common.config.empty()) ctx.config = io::Config::load(ctx.common.config);
      return action(ctx);
    } catch (const CLI::ValidationError& e) {
      err << "usage error: " << e.what() << "\n";
      return usage_error;
    } catch (const DataError& e) {
      err << "data error: " << e.what() << "\n";
      return data_error;
    } catch (const std::invalid_argument& e) {
      err << "data error: " << e.what() << "\n";
      return data_error;
    } catch (const std::domain_error& e) {
      err << "data error: " << e.what() << "\n";
      return data_error;
    }
  }
  err << "no command given\n";
  return usage_error;
}

}  // namespace st1::cli
