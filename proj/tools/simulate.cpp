// simulate: driven-Heisenberg time-crystal runs on the checkerboard iPEPS and
// the exact small-lattice oracle.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "dtc/app.hpp"

int main(int argc, char** argv) {
    CLI::App cli{"Discrete time crystal simulator"};
    std::string config_path, out_dir;
    bool resume = false;
    std::vector<std::string> overrides;
    cli.add_option("--config", config_path, "run configuration (key = value per line)")->required();
    cli.add_option("--out", out_dir, "output directory (overrides output_dir)");
    cli.add_flag("--resume", resume, "continue from the checkpoint in the output directory");
    cli.add_option("--override", overrides, "key=value applied after the config file")->take_all();
    cli.footer("Config keys [default]:\n" + dtc::describe_keys() +
               "\nEnvironment: DTC_THREADS sets the number of threads for dense kernels (default 1).\n"
               "Exit codes: 0 ok, 2 configuration or I/O, 3 numerical failure, 4 resource limit.");
    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = cli.exit(e);
        return rc == 0 ? 0 : dtc::kExitConfig;
    }

    int threads = 1;
    if (const char* env = std::getenv("DTC_THREADS")) {
        try {
            threads = std::max(1, std::stoi(env));
        } catch (const std::exception&) {
            std::cerr << "error: DTC_THREADS must be a positive integer\n";
            return dtc::kExitConfig;
        }
    }
    Eigen::setNbThreads(threads);

    dtc::RunConfig cfg;
    try {
        std::ifstream f(config_path);
        if (!f) throw dtc::IoError("cannot open config file " + config_path);
        cfg = dtc::parse_config(f, config_path);
        for (const auto& o : overrides) dtc::apply_override(cfg, o);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        cfg.validate();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return dtc::exit_code_for(e);
    }
    std::cerr << "mode " << dtc::mode_name(cfg.mode) << ", output " << cfg.output_dir << '\n';
    return dtc::run(cfg, {resume, &std::cerr});
}
