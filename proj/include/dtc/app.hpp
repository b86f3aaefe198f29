#pragma once

// Run configuration and scenario orchestration behind the `simulate` tool.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dtc/checkpoint.hpp"
#include "dtc/environment.hpp"
#include "dtc/errors.hpp"
#include "dtc/evolve.hpp"
#include "dtc/model.hpp"
#include "dtc/observables.hpp"
#include "dtc/oracle.hpp"
#include "dtc/state.hpp"

namespace dtc {

enum class RunMode { Ipeps, OracleDilated, OracleEnumerated, Compare, SingleSpin };

inline const char* mode_name(RunMode m) {
    switch (m) {
        case RunMode::Ipeps: return "ipeps";
        case RunMode::OracleDilated: return "oracle-dilated";
        case RunMode::OracleEnumerated: return "oracle-enumerated";
        case RunMode::Compare: return "compare";
        case RunMode::SingleSpin: return "single-spin";
    }
    return "?";
}

struct RunConfig {
    RunMode mode = RunMode::Ipeps;
    ModelParams model;
    std::size_t D_max = 2;
    std::optional<std::size_t> chi;  ///< unset: D^2 for every bond dimension run
    double svd_cutoff = kDefaultSvdCutoff;
    double ctm_tol = 1e-8;
    std::size_t ctm_max_iter = 200;
    bool ctm_warm_start = true;
    std::size_t n_cycles = 40;
    InitialState initial_state = InitialState::Neel;
    Cadence measure_every = Cadence::Stroboscopic;
    std::size_t flip_slices = 1;
    double delta_threshold = kDefaultDeltaThreshold;
    std::string output_dir = "out";
    std::size_t checkpoint_interval = 0;  ///< cycles between checkpoints; 0 disables them
    LatticeSpec lattice{2, 2, LatticeBoundary::Open};

    std::size_t chi_for(std::size_t D) const { return chi ? *chi : D * D; }

    CtmOptions ctm_options() const {
        CtmOptions o;
        o.tol = ctm_tol;
        o.max_iter = ctm_max_iter;
        return o;
    }

    /// Throws ConfigError naming the offending field.
    void validate() const {
        auto need = [](bool ok, const char* field, const std::string& msg) {
            if (!ok) throw ConfigError(std::string(field) + ": " + msg, field);
        };
        need(std::isfinite(model.J), "J", "must be finite");
        need(std::isfinite(model.h), "h", "must be finite");
        need(std::isfinite(model.epsilon), "epsilon", "must be finite");
        need(model.d_a >= 1, "d_a", "must be >= 1");
        need(model.T > 0.0 && std::isfinite(model.T), "T", "must be positive");
        need(model.dt > 0.0 && std::isfinite(model.dt), "dt", "must be positive");
        try {
            model.validate();
        } catch (const ArgumentError& e) {
            throw ConfigError(std::string("dt: ") + e.what(), "dt");
        }
        need(D_max >= 1, "D_max", "must be >= 1");
        need(!chi || *chi >= 1, "chi", "must be >= 1");
        need(svd_cutoff >= 0.0, "svd_cutoff", "must be nonnegative");
        need(ctm_tol > 0.0, "ctm_tol", "must be positive");
        need(ctm_max_iter >= 1, "ctm_max_iter", "must be >= 1");
        need(flip_slices >= 1, "flip_slices", "must be >= 1");
        need(delta_threshold >= 0.0, "delta_threshold", "must be nonnegative");
        need(!output_dir.empty(), "output_dir", "must not be empty");
        need(lattice.Lx >= 1, "lattice_x", "must be >= 1");
        need(lattice.Ly >= 1, "lattice_y", "must be >= 1");
        if (lattice.boundary == LatticeBoundary::Periodic) {
            need(lattice.Lx == 1 || lattice.Lx % 2 == 0, "lattice_x", "periodic extent must be 1 or even");
            need(lattice.Ly == 1 || lattice.Ly % 2 == 0, "lattice_y", "periodic extent must be 1 or even");
        }
    }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty())
        throw ConfigError(key + ": expected a number, got '" + v + "'", key);
    return x;
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
    std::size_t x = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty())
        throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'", key);
    return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'", key);
}

template <typename E>
E parse_choice(const std::string& key, const std::string& v, std::initializer_list<std::pair<const char*, E>> opts) {
    std::string names;
    for (const auto& [name, value] : opts) {
        if (v == name) return value;
        names += names.empty() ? name : std::string(" | ") + name;
    }
    throw ConfigError(key + ": expected one of " + names + ", got '" + v + "'", key);
}

struct Key {
    const char* name;
    const char* doc;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline std::string fmt(double x) { return format_double(x); }

inline const std::vector<Key>& keys() {
    using C = RunConfig;
    static const std::vector<Key> table = {
        {"mode", "ipeps | oracle-dilated | oracle-enumerated | compare | single-spin",
         [](C& c, const std::string& v) {
             c.mode = parse_choice<RunMode>("mode", v,
                                            {{"ipeps", RunMode::Ipeps},
                                             {"oracle-dilated", RunMode::OracleDilated},
                                             {"oracle-enumerated", RunMode::OracleEnumerated},
                                             {"compare", RunMode::Compare},
                                             {"single-spin", RunMode::SingleSpin}});
         },
         [](const C& c) { return std::string(mode_name(c.mode)); }},
        {"J", "exchange coupling", [](C& c, const std::string& v) { c.model.J = parse_double("J", v); },
         [](const C& c) { return fmt(c.model.J); }},
        {"h", "disorder strength; fields h*s with s on an even grid of [-1/2, 1/2]",
         [](C& c, const std::string& v) { c.model.h = parse_double("h", v); },
         [](const C& c) { return fmt(c.model.h); }},
        {"d_a", "number of disorder levels (1 = clean)",
         [](C& c, const std::string& v) {
             const auto n = parse_count("d_a", v);
             if (n > 64) throw ConfigError("d_a: must be <= 64", "d_a");
             c.model.d_a = static_cast<int>(n);
         },
         [](const C& c) { return std::to_string(c.model.d_a); }},
        {"T", "Floquet period", [](C& c, const std::string& v) { c.model.T = parse_double("T", v); },
         [](const C& c) { return fmt(c.model.T); }},
        {"epsilon", "flip imperfection", [](C& c, const std::string& v) { c.model.epsilon = parse_double("epsilon", v); },
         [](const C& c) { return fmt(c.model.epsilon); }},
        {"dt", "Trotter step; must divide T/2", [](C& c, const std::string& v) { c.model.dt = parse_double("dt", v); },
         [](const C& c) { return fmt(c.model.dt); }},
        {"D_max", "iPEPS bond dimension (compare mode also runs D_max + 1)",
         [](C& c, const std::string& v) { c.D_max = parse_count("D_max", v); },
         [](const C& c) { return std::to_string(c.D_max); }},
        {"chi", "CTMRG boundary dimension; 'auto' = D^2",
         [](C& c, const std::string& v) {
             if (v == "auto") c.chi.reset();
             else c.chi = parse_count("chi", v);
         },
         [](const C& c) { return c.chi ? std::to_string(*c.chi) : std::string("auto"); }},
        {"svd_cutoff", "relative singular-value cutoff of the simple update",
         [](C& c, const std::string& v) { c.svd_cutoff = parse_double("svd_cutoff", v); },
         [](const C& c) { return fmt(c.svd_cutoff); }},
        {"ctm_tol", "CTMRG corner-spectrum convergence tolerance",
         [](C& c, const std::string& v) { c.ctm_tol = parse_double("ctm_tol", v); },
         [](const C& c) { return fmt(c.ctm_tol); }},
        {"ctm_max_iter", "CTMRG sweep limit",
         [](C& c, const std::string& v) { c.ctm_max_iter = parse_count("ctm_max_iter", v); },
         [](const C& c) { return std::to_string(c.ctm_max_iter); }},
        {"ctm_warm_start", "start each CTMRG from the previous environment",
         [](C& c, const std::string& v) { c.ctm_warm_start = parse_bool("ctm_warm_start", v); },
         [](const C& c) { return std::string(c.ctm_warm_start ? "true" : "false"); }},
        {"n_cycles", "Floquet periods to simulate",
         [](C& c, const std::string& v) { c.n_cycles = parse_count("n_cycles", v); },
         [](const C& c) { return std::to_string(c.n_cycles); }},
        {"initial_state", "neel | polarized",
         [](C& c, const std::string& v) {
             c.initial_state = parse_choice<InitialState>(
                 "initial_state", v, {{"neel", InitialState::Neel}, {"polarized", InitialState::Polarized}});
         },
         [](const C& c) { return std::string(initial_state_name(c.initial_state)); }},
        {"measure_every", "stroboscopic | per-trotter-step",
         [](C& c, const std::string& v) {
             c.measure_every = parse_choice<Cadence>(
                 "measure_every", v,
                 {{"stroboscopic", Cadence::Stroboscopic}, {"per-trotter-step", Cadence::PerTrotterStep}});
         },
         [](const C& c) {
             return std::string(c.measure_every == Cadence::Stroboscopic ? "stroboscopic" : "per-trotter-step");
         }},
        {"flip_slices", "equal pieces of the flip half period (measured with per-trotter-step)",
         [](C& c, const std::string& v) { c.flip_slices = parse_count("flip_slices", v); },
         [](const C& c) { return std::to_string(c.flip_slices); }},
        {"delta_threshold", "compare mode: deviation that marks the cutoff time",
         [](C& c, const std::string& v) { c.delta_threshold = parse_double("delta_threshold", v); },
         [](const C& c) { return fmt(c.delta_threshold); }},
        {"output_dir", "directory for CSV, report and checkpoint files",
         [](C& c, const std::string& v) { c.output_dir = v; }, [](const C& c) { return c.output_dir; }},
        {"checkpoint_interval", "cycles between checkpoints (0 = none)",
         [](C& c, const std::string& v) { c.checkpoint_interval = parse_count("checkpoint_interval", v); },
         [](const C& c) { return std::to_string(c.checkpoint_interval); }},
        {"lattice_x", "oracle lattice width", [](C& c, const std::string& v) { c.lattice.Lx = parse_count("lattice_x", v); },
         [](const C& c) { return std::to_string(c.lattice.Lx); }},
        {"lattice_y", "oracle lattice height",
         [](C& c, const std::string& v) { c.lattice.Ly = parse_count("lattice_y", v); },
         [](const C& c) { return std::to_string(c.lattice.Ly); }},
        {"boundary", "oracle lattice boundary: open | periodic",
         [](C& c, const std::string& v) {
             c.lattice.boundary = parse_choice<LatticeBoundary>(
                 "boundary", v, {{"open", LatticeBoundary::Open}, {"periodic", LatticeBoundary::Periodic}});
         },
         [](const C& c) { return std::string(c.lattice.boundary == LatticeBoundary::Open ? "open" : "periodic"); }},
    };
    return table;
}

inline const Key& find_key(const std::string& name) {
    for (const auto& k : keys())
        if (name == k.name) return k;
    throw ConfigError("unknown key '" + name + "'", name);
}

}  // namespace config_detail

/// Sets one key from its text value.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    config_detail::find_key(key).set(cfg, value);
}

/// Applies a "key=value" override.
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form key=value");
    apply_setting(cfg, config_detail::trim(assignment.substr(0, eq)), config_detail::trim(assignment.substr(eq + 1)));
}

/// Parses key = value lines; '#' starts a comment. Does not validate constraints.
inline RunConfig parse_config(std::istream& is, const std::string& what = "config") {
    RunConfig cfg;
    std::map<std::string, std::size_t> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string where = what + ":" + std::to_string(lineno) + ": ";
        const std::string body = config_detail::trim(std::string_view(line).substr(0, line.find('#')));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
        const std::string key = config_detail::trim(std::string_view(body).substr(0, eq));
        const std::string value = config_detail::trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) throw ConfigError(where + "missing key");
        if (auto it = seen.find(key); it != seen.end())
            throw ConfigError(where + "duplicate key '" + key + "' (first set on line " + std::to_string(it->second) +
                                  ")",
                              key);
        seen.emplace(key, lineno);
        try {
            apply_setting(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what(), e.field());
        }
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file " + path.string());
    RunConfig cfg = parse_config(f, path.string());
    cfg.validate();
    return cfg;
}

/// Every key with its current value, one per line, in a fixed order.
inline std::string format_config(const RunConfig& cfg) {
    std::ostringstream os;
    for (const auto& k : config_detail::keys()) os << k.name << " = " << k.get(cfg) << '\n';
    return os.str();
}

/// Key names with their descriptions, for --help.
inline std::string describe_keys() {
    std::ostringstream os;
    const RunConfig defaults;
    for (const auto& k : config_detail::keys())
        os << "  " << std::left << std::setw(20) << k.name << k.doc << " [" << k.get(defaults) << "]\n";
    return os.str();
}

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitResource = 4 };

/// Maps an exception escaping a run to the process exit status.
inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const IoError*>(&e)) return kExitConfig;
    if (dynamic_cast<const ResourceError*>(&e) || dynamic_cast<const std::bad_alloc*>(&e)) return kExitResource;
    if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
    if (dynamic_cast<const std::invalid_argument*>(&e)) return kExitConfig;
    return kExitNumerical;
}

using EnvironmentObserver = std::function<void(const MeasurePoint&, const UnitCell&, const Environment&)>;

struct RunControl {
    bool resume = false;
    std::ostream* log = &std::cerr;
    EnvironmentObserver observer;  ///< sees every converged environment of an iPEPS run

    RunControl(bool resume_run = false, std::ostream* log_stream = &std::cerr)
        : resume(resume_run), log(log_stream) {}
};

struct RunOutcome {
    std::vector<std::filesystem::path> written;
    std::vector<TimeSeries> series;  ///< one per run (two in compare mode)
    std::optional<ConvergenceReport> report;
};

namespace app_detail {

inline void log_line(const RunControl& ctl, const std::string& s) {
    if (ctl.log) *ctl.log << s << std::endl;
}

inline bool same_model(const ModelParams& a, const ModelParams& b) {
    return a.J == b.J && a.h == b.h && a.d_a == b.d_a && a.T == b.T && a.epsilon == b.epsilon && a.dt == b.dt;
}

/// One iPEPS evolution with measurements, checkpoints and resume.
inline TimeSeries run_ipeps(const RunConfig& cfg, std::size_t D_max, const std::filesystem::path& csv_path,
                            const std::filesystem::path& ckpt_path, const RunControl& ctl) {
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();
    const GateSchedule schedule = build_floquet_schedule(cfg.model, cfg.flip_slices);
    const std::size_t chi = cfg.chi_for(D_max);
    const CtmOptions ctm = cfg.ctm_options();
    const std::string tag = "D=" + std::to_string(D_max) + " chi=" + std::to_string(chi);

    UnitCell cell = init_product_state(cfg.initial_state, cfg.model.d_a, D_max);
    std::optional<Environment> warm;
    TimeSeries series;
    RunOptions ropt;
    ropt.cadence = cfg.measure_every;
    ropt.svd_cutoff = cfg.svd_cutoff;

    if (ctl.resume && std::filesystem::exists(ckpt_path)) {
        Checkpoint ck = load_checkpoint(ckpt_path);
        if (!same_model(ck.params, cfg.model) || ck.cell.D_max != D_max)
            throw ConfigError("checkpoint " + ckpt_path.string() + " was written for a different configuration",
                              "resume");
        const TimeSeries previous = read_csv(csv_path.string());
        for (const auto& r : previous)
            if (r.time <= ck.time + kGridTolerance) series.push_back(r);
        if (series.empty() || series.back().cycle != ck.cycle)
            throw IoError(csv_path.string() + " does not reach the checkpoint at cycle " + std::to_string(ck.cycle));
        cell = std::move(ck.cell);
        if (cfg.ctm_warm_start && ck.environment && ck.environment->chi == chi) warm = std::move(ck.environment);
        ropt.start_cycle = ck.cycle;
        ropt.report_initial = false;
        log_line(ctl, "[" + tag + "] resuming at cycle " + std::to_string(ck.cycle));
    }
    const std::size_t remaining = cfg.n_cycles > ropt.start_cycle ? cfg.n_cycles - ropt.start_cycle : 0;
    const std::size_t last_cycle = ropt.start_cycle + remaining;

    auto hook = [&](const MeasurePoint& mp, const UnitCell& c) {
        Environment env = ctmrg_converge(c, chi, ctm, warm ? &*warm : nullptr);
        MeasurementRecord rec = measure_ipeps(c, env, cfg.initial_state, mp.cycle, mp.time);
        rec.trunc_weight_max = mp.since_last.max_discarded();
        series.push_back(rec);
        if (ctl.observer) ctl.observer(mp, c, env);
        if (!env.converged)
            log_line(ctl, "[" + tag + "] warning: CTMRG not converged at t=" + format_double(mp.time) +
                              " (last change " + format_double(env.history.empty() ? 0.0 : env.history.back()) + ")");
        if (cfg.ctm_warm_start) warm = env;
        if (mp.kind != Boundary::PeriodEnd) return;
        std::ostringstream os;
        os << "[" << tag << "] cycle " << mp.cycle << " wall " << std::fixed << std::setprecision(2)
           << std::chrono::duration<double>(clock::now() - t_start).count() << " s trunc "
           << std::scientific << std::setprecision(3) << rec.trunc_weight_max << " czz " << std::fixed
           << std::setprecision(6) << rec.czz_mean() << " ctm " << env.iterations;
        log_line(ctl, os.str());
        const bool due = cfg.checkpoint_interval > 0 && mp.cycle > ropt.start_cycle &&
                         (mp.cycle % cfg.checkpoint_interval == 0 || mp.cycle == last_cycle);
        if (due) {
            write_csv(csv_path.string(), series);
            Checkpoint ck{cfg.model, mp.cycle, mp.time, c, std::nullopt};
            if (cfg.ctm_warm_start) ck.environment = env;
            save_checkpoint(ckpt_path, ck);
        }
    };
    try {
        run_floquet(cell, schedule, remaining, hook, ropt);
    } catch (...) {
        // keep whatever was measured; resume restarts from the last checkpoint
        try {
            write_csv(csv_path.string(), series);
        } catch (...) {
        }
        throw;
    }
    write_csv(csv_path.string(), series);
    return series;
}

}  // namespace app_detail

/// Runs the configured scenario; throws on failure.
inline RunOutcome execute(const RunConfig& cfg, const RunControl& ctl = {}) {
    cfg.validate();
    namespace fs = std::filesystem;
    const fs::path out = cfg.output_dir;
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
    {
        std::ofstream f(out / "config.txt", std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write " + (out / "config.txt").string());
        f << format_config(cfg);
    }
    RunOutcome res;
    res.written.push_back(out / "config.txt");

    OracleOptions oopt;
    oopt.cadence = cfg.measure_every;
    oopt.flip_slices = cfg.flip_slices;
    switch (cfg.mode) {
        case RunMode::Ipeps: {
            const fs::path csv = out / "series.csv";
            res.series.push_back(app_detail::run_ipeps(cfg, cfg.D_max, csv, out / "checkpoint.bin", ctl));
            res.written.push_back(csv);
            break;
        }
        case RunMode::Compare: {
            for (std::size_t D : {cfg.D_max, cfg.D_max + 1}) {
                const std::string suffix = "_D" + std::to_string(D);
                const fs::path csv = out / ("series" + suffix + ".csv");
                res.series.push_back(
                    app_detail::run_ipeps(cfg, D, csv, out / ("checkpoint" + suffix + ".bin"), ctl));
                res.written.push_back(csv);
            }
            res.report = convergence_delta(res.series[0], res.series[1], cfg.delta_threshold);
            const fs::path rep = out / "convergence.csv";
            write_convergence_report(rep.string(), *res.report);
            res.written.push_back(rep);
            app_detail::log_line(ctl, "cutoff time " + format_double(res.report->cutoff_time) +
                                          (res.report->exceeded ? "" : " (threshold never exceeded)"));
            break;
        }
        case RunMode::OracleDilated:
        case RunMode::OracleEnumerated:
        case RunMode::SingleSpin: {
            const LatticeSpec lat = cfg.mode == RunMode::SingleSpin ? LatticeSpec{1, 1, LatticeBoundary::Open}
                                                                     : cfg.lattice;
            TimeSeries s = cfg.mode == RunMode::OracleEnumerated
                               ? exact_evolve_enumerated(lat, cfg.model, cfg.initial_state, cfg.n_cycles, oopt)
                               : exact_evolve_dilated(lat, cfg.model, cfg.initial_state, cfg.n_cycles, oopt);
            const fs::path csv = out / "series.csv";
            write_csv(csv.string(), s);
            res.series.push_back(std::move(s));
            res.written.push_back(csv);
            break;
        }
    }
    return res;
}

/// Runs the configured scenario and maps failures to exit codes.
inline int run(const RunConfig& cfg, const RunControl& ctl = {}) {
    try {
        execute(cfg, ctl);
        return kExitOk;
    } catch (const std::exception& e) {
        if (ctl.log) *ctl.log << "error: " << e.what() << std::endl;
        return exit_code_for(e);
    }
}

}  // namespace dtc
