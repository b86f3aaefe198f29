#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "dtc/app.hpp"
#include "dtc/checkpoint.hpp"
#include "dtc/oracle.hpp"
#include "support.hpp"

using namespace dtc;
namespace fs = std::filesystem;

namespace {

ModelParams params(double J, double h, int d_a, double eps, double dt = 0.005) {
    ModelParams p;
    p.J = J;
    p.h = h;
    p.d_a = d_a;
    p.epsilon = eps;
    p.dt = dt;
    return p;
}

double max_record_diff(const TimeSeries& a, const TimeSeries& b) {
    EXPECT_EQ(a.size(), b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
        EXPECT_EQ(a[i].cycle, b[i].cycle);
        EXPECT_NEAR(a[i].time, b[i].time, 1e-12);
        for (int s = 0; s < 2; ++s) {
            m = std::max(m, std::abs(a[i].czz[s] - b[i].czz[s]));
            m = std::max(m, std::abs(a[i].sz[s] - b[i].sz[s]));
            m = std::max(m, std::abs(a[i].renyi_half[s] - b[i].renyi_half[s]));
            m = std::max(m, std::abs(a[i].renyi_one[s] - b[i].renyi_one[s]));
        }
    }
    return m;
}

std::vector<std::pair<std::size_t, std::size_t>> bond_pairs(const LatticeSpec& lat) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& b : lattice_bonds(lat)) out.emplace_back(b.a_site, b.b_site);
    return out;
}

// Stroboscopic per-sublattice <S^z> from exact propagation without Trotter splitting.
std::vector<std::array<double, 2>> dense_stroboscopic_sz(const LatticeSpec& lat, const ModelParams& p,
                                                         InitialState pattern, std::size_t cycles) {
    const std::size_t n = lat.sites();
    const Eigen::MatrixXcd h = dtc::testing::dense_hamiltonian(n, bond_pairs(lat), p.J, {});
    const Eigen::MatrixXcd u = dtc::testing::global_x_rotation(n, flip_angle(p)) *
                               dtc::testing::spectral_propagator(h, p.T / 2);
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(Eigen::Index{1} << n);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i)
        idx = 2 * idx + (initial_sz(pattern, lat.sublattice(i)) > 0 ? 0 : 1);
    psi[static_cast<Eigen::Index>(idx)] = 1.0;
    std::vector<std::array<double, 2>> out;
    for (std::size_t c = 0; c <= cycles; ++c) {
        std::array<double, 2> sz{};
        std::array<int, 2> count{};
        for (std::size_t i = 0; i < n; ++i) {
            const int s = lat.sublattice(i) == Sublattice::A ? 0 : 1;
            sz[s] += (psi.adjoint() * dtc::testing::site_operator(dtc::testing::pauli_half('z'), i, n) * psi)(0, 0).real();
            ++count[s];
        }
        for (int s = 0; s < 2; ++s) sz[s] /= count[s];
        out.push_back(sz);
        psi = u * psi;
    }
    return out;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("dtc_test_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

RunConfig small_ipeps_config(const fs::path& out) {
    RunConfig cfg;
    cfg.mode = RunMode::Ipeps;
    cfg.model = params(1.0, 20.0, 2, 0.5);
    cfg.D_max = 2;
    cfg.n_cycles = 4;
    cfg.output_dir = out.string();
    return cfg;
}

}  // namespace

// -------------------------------------------------------------------- lattice

TEST(Lattice, OpenBondsByClass) {
    const auto b12 = lattice_bonds({2, 1, LatticeBoundary::Open});
    ASSERT_EQ(b12.size(), 1u);
    EXPECT_EQ(b12[0].a_site, 0u);
    EXPECT_EQ(b12[0].b_site, 1u);
    EXPECT_EQ(b12[0].link, LinkClass::R);

    const LatticeSpec sq{2, 2, LatticeBoundary::Open};
    const auto b22 = lattice_bonds(sq);
    ASSERT_EQ(b22.size(), 4u);
    std::array<int, 4> per_class{};
    for (const auto& b : b22) {
        EXPECT_EQ(sq.sublattice(b.a_site), Sublattice::A);
        EXPECT_EQ(sq.sublattice(b.b_site), Sublattice::B);
        ++per_class[static_cast<std::size_t>(b.link)];
    }
    EXPECT_EQ(per_class, (std::array<int, 4>{1, 1, 1, 1}));
}

TEST(Lattice, PeriodicBondsAndChecks) {
    const LatticeSpec lat{4, 4, LatticeBoundary::Periodic};
    const auto bonds = lattice_bonds(lat);
    ASSERT_EQ(bonds.size(), 32u);
    std::array<int, 4> per_class{};
    for (const auto& b : bonds) {
        EXPECT_EQ(lat.sublattice(b.a_site), Sublattice::A);
        EXPECT_EQ(lat.sublattice(b.b_site), Sublattice::B);
        ++per_class[static_cast<std::size_t>(b.link)];
    }
    EXPECT_EQ(per_class, (std::array<int, 4>{8, 8, 8, 8}));
    // each site has exactly one bond of every class
    for (std::size_t i = 0; i < lat.sites(); ++i)
        for (auto l : kLinkOrder)
            EXPECT_EQ(std::count_if(bonds.begin(), bonds.end(),
                                    [&](const LatticeBond& b) { return b.link == l && (b.a_site == i || b.b_site == i); }),
                      1);
    EXPECT_THROW(lattice_bonds({3, 2, LatticeBoundary::Periodic}), ArgumentError);
    EXPECT_THROW(lattice_bonds({0, 2, LatticeBoundary::Open}), ArgumentError);
    EXPECT_NO_THROW(lattice_bonds({3, 1, LatticeBoundary::Open}));
}

// --------------------------------------------------------------------- oracle

TEST(Oracle, DilatedEqualsEnumeratedAverage) {
    OracleOptions opt;
    opt.cadence = Cadence::PerTrotterStep;
    for (auto pattern : {InitialState::Neel, InitialState::Polarized}) {
        const LatticeSpec lat{1, 2, LatticeBoundary::Open};
        const ModelParams p = params(1.0, 5.0, 2, 0.5);
        const TimeSeries dil = exact_evolve_dilated(lat, p, pattern, 2, opt);
        const TimeSeries en = exact_evolve_enumerated(lat, p, pattern, 2, opt);
        EXPECT_LT(max_record_diff(dil, en), 1e-10);
    }
    const LatticeSpec tri{3, 1, LatticeBoundary::Open};
    const ModelParams p = params(0.7, 40.0, 3, 1.0);
    EXPECT_LT(max_record_diff(exact_evolve_dilated(tri, p, InitialState::Neel, 1),
                              exact_evolve_enumerated(tri, p, InitialState::Neel, 1)),
              1e-10);
}

TEST(Oracle, SingleLevelEnumerationEqualsCleanRun) {
    const LatticeSpec lat{2, 2, LatticeBoundary::Open};
    const TimeSeries en = exact_evolve_enumerated(lat, params(1.0, 30.0, 1, 0.5), InitialState::Neel, 2);
    const TimeSeries clean = exact_evolve_dilated(lat, params(1.0, 0.0, 1, 0.5), InitialState::Neel, 2);
    EXPECT_LT(max_record_diff(en, clean), 1e-14);
}

TEST(Oracle, ConfigurationOrderDoesNotMatter) {
    const LatticeSpec lat{2, 2, LatticeBoundary::Open};
    const ModelParams p = params(1.0, 100.0, 3, 0.5);
    OracleOptions opt;
    const TimeSeries natural = exact_evolve_enumerated(lat, p, InitialState::Neel, 1, opt);
    opt.config_order.resize(81);
    std::iota(opt.config_order.begin(), opt.config_order.end(), std::size_t{0});
    std::mt19937_64 rng(31);
    std::shuffle(opt.config_order.begin(), opt.config_order.end(), rng);
    EXPECT_LT(max_record_diff(natural, exact_evolve_enumerated(lat, p, InitialState::Neel, 1, opt)), 1e-15);
    std::reverse(opt.config_order.begin(), opt.config_order.end());
    EXPECT_LT(max_record_diff(natural, exact_evolve_enumerated(lat, p, InitialState::Neel, 1, opt)), 1e-15);

    opt.config_order[0] = opt.config_order[1];
    EXPECT_THROW(exact_evolve_enumerated(lat, p, InitialState::Neel, 1, opt), ArgumentError);
    opt.config_order.pop_back();
    EXPECT_THROW(exact_evolve_enumerated(lat, p, InitialState::Neel, 1, opt), ArgumentError);
}

TEST(Oracle, NormConserved) {
    std::vector<cplx> psi;
    exact_evolve_dilated({2, 2, LatticeBoundary::Periodic}, params(1.0, 50.0, 2, 0.3), InitialState::Neel, 3, {},
                         &psi);
    double s = 0.0;
    for (const auto& x : psi) s += std::norm(x);
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-10);
}

TEST(Oracle, SingleSpinFormula) {
    for (double eps : {0.5, 1.0, -0.3}) {
        const ModelParams p = params(0.0, 0.0, 1, eps);
        const TimeSeries ts = exact_evolve_dilated({1, 1, LatticeBoundary::Open}, p, InitialState::Polarized, 40);
        ASSERT_EQ(ts.size(), 41u);
        for (const auto& r : ts) {
            const double expected = dtc::testing::single_spin_sz(r.cycle, eps, p.T);
            EXPECT_NEAR(r.sz[0], expected, 1e-12);
            EXPECT_NEAR(r.sz[1], expected, 1e-12);  // mirrored
            EXPECT_NEAR(r.czz_mean(), 0.5 * expected, 1e-12);
        }
    }
}

TEST(Oracle, CleanPairMatchesDensePropagation) {
    // the exchange gates on a single bond commute, so Trotterization is exact
    const LatticeSpec lat{2, 1, LatticeBoundary::Open};
    const ModelParams p = params(1.3, 0.0, 1, 0.4);
    const TimeSeries ts = exact_evolve_dilated(lat, p, InitialState::Neel, 5);
    const auto exact = dense_stroboscopic_sz(lat, p, InitialState::Neel, 5);
    for (std::size_t c = 0; c <= 5; ++c) {
        EXPECT_NEAR(ts[c].sz[0], exact[c][0], 1e-12);
        EXPECT_NEAR(ts[c].sz[1], exact[c][1], 1e-12);
    }
}

TEST(Oracle, PlaquetteStateTrotterErrorIsFirstOrder) {
    const LatticeSpec lat{2, 2, LatticeBoundary::Open};
    auto final_state = [&](double dt) {
        std::vector<cplx> psi;
        exact_evolve_dilated(lat, params(1.0, 5.0, 2, 0.5, dt), InitialState::Neel, 2, {}, &psi);
        return psi;
    };
    const std::vector<cplx> ref = final_state(0.005 / 256);
    std::vector<double> errors;
    for (int k = 0; k <= 2; ++k) {
        const std::vector<cplx> psi = final_state(0.005 / (1 << k));
        double s = 0.0;
        for (std::size_t i = 0; i < psi.size(); ++i) s += std::norm(psi[i] - ref[i]);
        errors.push_back(std::sqrt(s));
    }
    for (int k = 1; k <= 2; ++k) EXPECT_NEAR(errors[k - 1] / errors[k], 2.0, 0.2) << "k = " << k;
}

TEST(Oracle, PlaquetteMagnetizationTrotterErrorIsSecondOrderAndExtrapolates) {
    // the first-order term cancels in stroboscopic Sz of the Neel plaquette
    const LatticeSpec lat{2, 2, LatticeBoundary::Open};
    const std::size_t cycles = 2;
    const auto exact = dense_stroboscopic_sz(lat, params(1.0, 0.0, 1, 0.5), InitialState::Neel, cycles);
    auto at = [&](double dt) {
        const TimeSeries ts = exact_evolve_dilated(lat, params(1.0, 0.0, 1, 0.5, dt), InitialState::Neel, cycles);
        std::vector<double> v;
        for (const auto& r : ts) v.push_back(r.sz[0]);
        return v;
    };
    std::vector<std::vector<double>> runs;
    std::vector<double> errors;
    for (int k = 0; k <= 5; ++k) {
        runs.push_back(at(0.005 / (1 << k)));
        double e = 0.0;
        for (std::size_t c = 0; c <= cycles; ++c) e = std::max(e, std::abs(runs.back()[c] - exact[c][0]));
        errors.push_back(e);
    }
    EXPECT_LT(errors[0], 1e-6);
    for (int k = 1; k <= 5; ++k) EXPECT_NEAR(errors[k - 1] / errors[k], 4.0, 0.4) << "k = " << k;
    for (std::size_t c = 0; c <= cycles; ++c) {
        const double extrapolated = (4.0 * runs[5][c] - runs[4][c]) / 3.0;
        EXPECT_NEAR(extrapolated, exact[c][0], 1e-12) << "cycle " << c;
    }
}

TEST(Oracle, Deterministic) {
    const LatticeSpec lat{2, 2, LatticeBoundary::Open};
    OracleOptions opt;
    opt.cadence = Cadence::PerTrotterStep;
    std::ostringstream a, b;
    write_csv(a, exact_evolve_dilated(lat, params(1.0, 5.0, 2, 0.5), InitialState::Neel, 1, opt));
    write_csv(b, exact_evolve_dilated(lat, params(1.0, 5.0, 2, 0.5), InitialState::Neel, 1, opt));
    EXPECT_EQ(a.str(), b.str());
}

TEST(Oracle, BudgetsRaiseResourceErrors) {
    EXPECT_THROW(StateVector(40, 10), ResourceError);
    OracleOptions opt;
    opt.budget = 100;
    EXPECT_THROW(exact_evolve_dilated({2, 2, LatticeBoundary::Open}, params(1.0, 1.0, 2, 0.0), InitialState::Neel, 1, opt),
                 ResourceError);
    opt = {};
    opt.max_configs = 10;
    EXPECT_THROW(
        exact_evolve_enumerated({2, 2, LatticeBoundary::Open}, params(1.0, 1.0, 2, 0.0), InitialState::Neel, 1, opt),
        ResourceError);
}

TEST(Oracle, CompareShortTime) {
    const LatticeSpec lat{2, 1, LatticeBoundary::Open};
    OracleOptions opt;
    opt.cadence = Cadence::PerTrotterStep;
    const TimeSeries a = exact_evolve_dilated(lat, params(1.0, 0.0, 1, 0.0), InitialState::Neel, 2, opt);
    EXPECT_EQ(compare_short_time(a, a, 0.2).max_deviation, 0.0);
    TimeSeries b = a;
    b[15].czz = {b[15].czz[0] + 0.01, b[15].czz[1] + 0.01};
    b[21].czz = {b[21].czz[0] + 0.5, b[21].czz[1]};
    const Deviation d = compare_short_time(a, b, b[20].time);
    EXPECT_NEAR(d.max_deviation, 0.01, 1e-15);
    EXPECT_EQ(d.index, 15u);
    EXPECT_NEAR(compare_short_time(a, b, 1.0).max_deviation, 0.25, 1e-15);
    b.erase(b.begin() + 3);
    EXPECT_THROW(compare_short_time(a, b, 0.2), ArgumentError);
}

// --------------------------------------------------------------------- config

TEST(Config, DisorderedScenarioAccepted) {
    std::istringstream in(
        "# disorder-stabilized crystal\n"
        "J = 1\nh = 100\nd_a = 5\nT = 0.1\nepsilon = 0.5\ndt = 0.005\nD_max = 4\n");
    const RunConfig cfg = parse_config(in);
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(cfg.model.d_a, 5);
    EXPECT_EQ(cfg.model.h, 100.0);
    EXPECT_EQ(cfg.D_max, 4u);
    EXPECT_EQ(cfg.chi_for(4), 16u);
    EXPECT_EQ(cfg.chi_for(5), 25u);
}

TEST(Config, IndivisibleTrotterStepRejected) {
    std::istringstream in("T = 0.1\ndt = 0.003\n");
    const RunConfig cfg = parse_config(in);
    try {
        cfg.validate();
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "dt");
        EXPECT_NE(std::string(e.what()).find("dt must divide T/2"), std::string::npos);
    }
}

TEST(Config, ErrorsCarryLineNumbersAndFields) {
    std::istringstream unknown("J = 1\n\nfoo = 2\n");
    try {
        parse_config(unknown, "run.cfg");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("run.cfg:3:"), std::string::npos) << e.what();
        EXPECT_EQ(e.field(), "foo");
    }
    std::istringstream bad_number("h = lots\n");
    EXPECT_THROW(parse_config(bad_number), ConfigError);
    std::istringstream duplicate("h = 1\nh = 2\n");
    EXPECT_THROW(parse_config(duplicate), ConfigError);
    std::istringstream no_equals("D_max 4\n");
    EXPECT_THROW(parse_config(no_equals), ConfigError);
    std::istringstream bad_choice("mode = fancy\n");
    EXPECT_THROW(parse_config(bad_choice), ConfigError);

    RunConfig cfg;
    cfg.chi = 0;
    try {
        cfg.validate();
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "chi");
    }
    cfg = {};
    cfg.lattice = {3, 2, LatticeBoundary::Periodic};
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Config, MissingFileIsAnIoError) {
    EXPECT_THROW(load_config("/nonexistent/dir/run.cfg"), IoError);
    try {
        load_config("/nonexistent/dir/run.cfg");
    } catch (const std::exception& e) {
        EXPECT_EQ(exit_code_for(e), kExitConfig);
    }
}

TEST(Config, OverridesAndFormatRoundTrip) {
    RunConfig cfg;
    apply_override(cfg, "h = 50");
    apply_override(cfg, "chi=7");
    apply_override(cfg, "measure_every=per-trotter-step");
    apply_override(cfg, "ctm_warm_start=false");
    apply_override(cfg, "boundary=periodic");
    EXPECT_EQ(cfg.model.h, 50.0);
    EXPECT_EQ(cfg.chi_for(3), 7u);
    EXPECT_EQ(cfg.measure_every, Cadence::PerTrotterStep);
    EXPECT_FALSE(cfg.ctm_warm_start);
    EXPECT_THROW(apply_override(cfg, "h"), ConfigError);
    EXPECT_THROW(apply_override(cfg, "nope=1"), ConfigError);

    cfg.model.epsilon = 0.1 + 0.2;  // not exactly representable in short form
    const std::string text = format_config(cfg);
    std::istringstream in(text);
    const RunConfig back = parse_config(in);
    EXPECT_EQ(format_config(back), text);
    EXPECT_EQ(back.model.epsilon, cfg.model.epsilon);
    for (const char* key : {"mode", "J", "h", "d_a", "T", "epsilon", "dt", "D_max", "chi", "n_cycles",
                            "initial_state", "measure_every", "output_dir", "checkpoint_interval"})
        EXPECT_NE(describe_keys().find(key), std::string::npos) << key;
}

TEST(ExitCodes, Mapping) {
    EXPECT_EQ(exit_code_for(ConfigError("x")), 2);
    EXPECT_EQ(exit_code_for(IoError("x")), 2);
    EXPECT_EQ(exit_code_for(NumericalError("x")), 3);
    EXPECT_EQ(exit_code_for(ResourceError("x")), 4);
    EXPECT_EQ(exit_code_for(std::bad_alloc()), 4);

    TempDir dir("exit");
    std::ostringstream log;
    RunConfig cfg;
    cfg.mode = RunMode::OracleDilated;
    cfg.lattice = {6, 6, LatticeBoundary::Open};
    cfg.output_dir = dir.path.string();
    EXPECT_EQ(run(cfg, {false, &log}), kExitResource);
    cfg.model.dt = 0.003;
    EXPECT_EQ(run(cfg, {false, &log}), kExitConfig);
}

// ----------------------------------------------------------------- checkpoint

TEST(Checkpoint, RoundTrip) {
    UnitCell cell = init_product_state(InitialState::Neel, 2, 2);
    run_floquet(cell, build_floquet_schedule(params(1.0, 10.0, 2, 0.5)), 1, {});
    Checkpoint ck{params(1.0, 10.0, 2, 0.5), 1, 0.1, cell, ctmrg_converge(cell, 4)};
    std::stringstream ss;
    write_checkpoint(ss, ck);
    const Checkpoint back = read_checkpoint(ss);
    EXPECT_EQ(back.cycle, 1u);
    EXPECT_EQ(back.time, 0.1);
    EXPECT_EQ(back.params.h, 10.0);
    EXPECT_EQ(back.params.d_a, 2);
    EXPECT_EQ(back.cell.D_max, 2u);
    EXPECT_EQ(back.cell.A, cell.A);
    EXPECT_EQ(back.cell.B, cell.B);
    EXPECT_EQ(back.cell.weights.lambda, cell.weights.lambda);
    ASSERT_TRUE(back.environment.has_value());
    EXPECT_EQ(back.environment->chi, 4u);
    for (int s = 0; s < 2; ++s) {
        EXPECT_EQ(back.environment->sets[s].C1, ck.environment->sets[s].C1);
        EXPECT_EQ(back.environment->sets[s].T4, ck.environment->sets[s].T4);
    }
}

TEST(Checkpoint, RejectsDamagedFiles) {
    Checkpoint ck{ModelParams{}, 0, 0.0, init_product_state(InitialState::Neel, 1), std::nullopt};
    std::stringstream ss;
    write_checkpoint(ss, ck);
    const std::string good = ss.str();

    std::stringstream truncated(good.substr(0, good.size() - 5));
    EXPECT_THROW(read_checkpoint(truncated), IoError);
    std::string bad_magic = good;
    bad_magic[0] = 'X';
    std::stringstream m(bad_magic);
    EXPECT_THROW(read_checkpoint(m), IoError);
    std::string bad_version = good;
    bad_version[8] = 9;
    std::stringstream v(bad_version);
    EXPECT_THROW(read_checkpoint(v), IoError);
    EXPECT_THROW(load_checkpoint("/nonexistent/ck.bin"), IoError);
}

// ------------------------------------------------------------------ end to end

TEST(Run, SingleSpinModeWritesFormulaCsv) {
    TempDir dir("single");
    RunConfig cfg;
    cfg.mode = RunMode::SingleSpin;
    cfg.model = params(0.0, 0.0, 1, 0.5);
    cfg.initial_state = InitialState::Polarized;
    cfg.output_dir = dir.path.string();
    std::ostringstream log;
    ASSERT_EQ(run(cfg, {false, &log}), kExitOk) << log.str();
    const TimeSeries ts = read_csv((dir.path / "series.csv").string());
    ASSERT_EQ(ts.size(), 41u);
    for (const auto& r : ts) EXPECT_NEAR(r.czz_mean(), 0.5 * dtc::testing::single_spin_sz(r.cycle, 0.5, 0.1), 1e-8);
    EXPECT_TRUE(fs::exists(dir.path / "config.txt"));
}

TEST(Run, CompareModeReportsCutoff) {
    TempDir dir("compare");
    RunConfig cfg;
    cfg.mode = RunMode::Compare;
    cfg.model = params(1.0, 0.0, 1, 0.0);
    cfg.D_max = 2;
    cfg.n_cycles = 3;
    cfg.delta_threshold = 1e-6;
    cfg.output_dir = dir.path.string();
    std::ostringstream log;
    const RunOutcome res = execute(cfg, {false, &log});
    ASSERT_TRUE(res.report.has_value());
    EXPECT_EQ(res.series.size(), 2u);
    EXPECT_TRUE(fs::exists(dir.path / "series_D2.csv"));
    EXPECT_TRUE(fs::exists(dir.path / "series_D3.csv"));
    EXPECT_TRUE(fs::exists(dir.path / "convergence.csv"));
    EXPECT_TRUE(std::isfinite(res.report->cutoff_time));
    EXPECT_LE(res.report->cutoff_time, 0.3 + 1e-12);
    EXPECT_EQ(res.report->delta.size(), 4u);
    EXPECT_NE(log.str().find("cutoff time"), std::string::npos);
    EXPECT_NE(log.str().find("cycle 3 wall"), std::string::npos);
}

TEST(Run, RerunIsByteIdentical) {
    TempDir a("rerun_a"), b("rerun_b");
    std::ostringstream log;
    RunConfig cfg = small_ipeps_config(a.path);
    cfg.n_cycles = 2;
    ASSERT_EQ(run(cfg, {false, &log}), kExitOk);
    cfg.output_dir = b.path.string();
    ASSERT_EQ(run(cfg, {false, &log}), kExitOk);
    EXPECT_EQ(slurp(a.path / "series.csv"), slurp(b.path / "series.csv"));
}

TEST(Run, ResumeMatchesUninterruptedRun) {
    TempDir full("resume_full"), part("resume_part");
    std::ostringstream log;
    RunConfig cfg = small_ipeps_config(full.path);
    ASSERT_EQ(run(cfg, {false, &log}), kExitOk) << log.str();
    const TimeSeries reference = read_csv((full.path / "series.csv").string());

    cfg.output_dir = part.path.string();
    cfg.n_cycles = 2;
    cfg.checkpoint_interval = 1;
    ASSERT_EQ(run(cfg, {false, &log}), kExitOk) << log.str();
    ASSERT_TRUE(fs::exists(part.path / "checkpoint.bin"));
    cfg.n_cycles = 4;
    ASSERT_EQ(run(cfg, {true, &log}), kExitOk) << log.str();
    EXPECT_NE(log.str().find("resuming at cycle 2"), std::string::npos);
    const TimeSeries resumed = read_csv((part.path / "series.csv").string());
    EXPECT_LT(max_record_diff(reference, resumed), 1e-12);

    // a checkpoint from another model is refused
    cfg.model.h = 21.0;
    cfg.n_cycles = 5;
    EXPECT_EQ(run(cfg, {true, &log}), kExitConfig);
}
