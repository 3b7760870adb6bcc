#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <holomodel/cli.hpp>

int main(int argc, char** argv) {
    CLI::App app{"canonical forward/backward models for holomorphic iteration"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_given = false;

    std::vector<CLI::App*> subs;
    for (const char* name : {"classify", "forward", "backward", "valiron", "verify"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "job configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "report directory");
        sub->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
            seed_given = true;
        });
        subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        std::string command = app.get_subcommands().front()->get_name();
        holomodel::JobConfig cfg = holomodel::load_job_config(config_path, command);
        if (seed_given) {
            cfg.seed = seed;
            cfg.tol.apply_seed(seed);
        }
        holomodel::CommandResult res = holomodel::run_command(cfg, out_dir);
        for (const auto& f : res.files_written) std::cerr << "wrote " << f << "\n";
        if (res.exit_code != 0 && res.report.contains("error"))
            std::cerr << "error: " << res.report["error"].get<std::string>() << "\n";
        return res.exit_code;
    } catch (const holomodel::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const holomodel::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
