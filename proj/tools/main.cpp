#include <exception>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "app.hpp"
#include "sscert/certifier.hpp"

using namespace sscert::app;

int main(int argc, char** argv) {
    CLI::App cli{"Certified inner approximations of AC power-flow security regions"};
    cli.require_subcommand(1);
    cli.set_config("--config", "", "key = value config file; flags override it");

    RunConfig cfg;
    const std::map<std::string, LimitSwitch> switches{
        {"auto", LimitSwitch::automatic}, {"on", LimitSwitch::on}, {"off", LimitSwitch::off}};

    cli.add_option("--case", cfg.case_path, "MATPOWER case file")->required();
    cli.add_option("--objective", cfg.objective, "robustness | loadability | chance")->capture_default_str();
    cli.add_option("--preset", cfg.preset, "paper-sv | case-file")->capture_default_str();
    cli.add_option("--band", cfg.band, "relative voltage band around base")->capture_default_str();
    cli.add_option("--theta-cap", cfg.theta_cap, "edge angle cap [rad]")->capture_default_str();
    cli.add_option("--rel-tol", cfg.rel_tol, "relative tolerance of the level search")->capture_default_str();
    cli.add_flag("--lp-only", cfg.lp_only, "stop after the linear relaxation");
    cli.add_option("--reactive-limits", cfg.reactive, "auto | on | off")
        ->transform(CLI::CheckedTransformer(switches, CLI::ignore_case));
    cli.add_option("--thermal-limits", cfg.thermal, "auto | on | off")
        ->transform(CLI::CheckedTransformer(switches, CLI::ignore_case));
    cli.add_option("--load-model", cfg.load_model, "auto | constant-power | constant-admittance")
        ->capture_default_str();
    cli.add_option("--plane", cfg.plane, "two load bus numbers A,B")->delimiter(',')->expected(2);
    cli.add_option("--candidate-loads", cfg.candidate_loads, "heaviest loads tried for the plane")
        ->capture_default_str();
    cli.add_option("--rays", cfg.rays, "cross-section rays")->capture_default_str();
    cli.add_option("--samples", cfg.samples, "Monte Carlo samples")->capture_default_str();
    cli.add_option("--brouwer-samples", cfg.brouwer_samples, "fixed-point iteration samples")
        ->capture_default_str();
    cli.add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    cli.add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
    cli.add_option("--certificate", cfg.certificate_path, "certificate file (default OUT/certificate.json)");

    auto* certify = cli.add_subcommand("certify", "compute and write a certificate")->fallthrough();
    auto* validate = cli.add_subcommand("validate", "Monte Carlo and cross-section check of a certificate")
                         ->fallthrough();
    auto* section = cli.add_subcommand("section", "trace the true region on a two-load plane")->fallthrough();

    try {
        cli.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return cli.exit(e);
    } catch (const CLI::ParseError& e) {
        cli.exit(e);
        return error;
    }

    try {
        if (certify->parsed()) return cmd_certify(cfg);
        if (validate->parsed()) return cmd_validate(cfg);
        if (section->parsed()) return cmd_section(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return error;
    }
    return error;
}
