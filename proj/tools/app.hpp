#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sscert/certifier.hpp"
#include "sscert/model.hpp"
#include "sscert/network.hpp"
#include "sscert/powerflow.hpp"
#include "sscert/serialize.hpp"
#include "sscert/validator.hpp"

namespace sscert::app {

enum ExitCode : int { ok = 0, error = 1, zero_certificate = 2, validation_failure = 3 };

enum class LimitSwitch { automatic, on, off };

/// One run of the command-line tool. Defaults reproduce the paper-sv preset.
struct RunConfig {
    std::string case_path;
    std::string objective = "robustness";
    std::string preset = "paper-sv";  // or "case-file"
    double band = 0.01;
    double theta_cap = 0.5;
    double rel_tol = 1e-3;
    bool lp_only = false;
    // automatic: on below 300 buses, off from 300 up
    LimitSwitch reactive = LimitSwitch::automatic;
    LimitSwitch thermal = LimitSwitch::automatic;
    // "auto" tries constant-power first, then constant-admittance
    std::string load_model = "auto";
    // external bus numbers of the two varied loads; empty means automatic choice
    std::vector<int> plane;
    int candidate_loads = 8;
    int rays = 32;
    int samples = 500;
    int brouwer_samples = 64;
    std::uint64_t seed = 20190701;
    std::string out_dir = ".";
    std::string certificate_path;  // validate/section input; default out_dir/certificate.json

    void validate() const;
};

/// Network, base point and limits after the preset has been applied.
struct Setup {
    PowerNetwork network;
    OperatingPoint base;
    OperationalLimits limits;
    ConstraintOptions constraints;
    std::vector<Violation> relaxed;  // base-case violations whose limits were dropped
    FixedPointModel model;
};

Setup prepare(const RunConfig& config);

struct PlaneChoice {
    std::size_t bus_a = 0;
    std::size_t bus_b = 0;
};

struct Outcome {
    PlaneChoice plane;
    Objective objective;
    CertificationProblem problem;
    std::optional<Certificate> certificate;  // empty on a zero certificate
    std::string zero_reason;
    std::vector<std::string> attempts;  // one line per tried (plane, load model)
};

/// Objective and varied-input mask for a plane of two load buses.
std::pair<Objective, std::vector<bool>> plane_objective(const Setup& setup, const std::string& kind,
                                                        const PlaneChoice& plane);

/// Runs the certifier over candidate planes and load models as the config asks.
Outcome certify(const Setup& setup, const RunConfig& config);

CertificateContext context_for(const Setup& setup, const RunConfig& config, const ProblemOptions& options);

/// Rebuilds the certification problem a certificate file was made for.
CertificationProblem problem_for(const Setup& setup, const CertificateFile& file);

ValidationReport validate(const Setup& setup, const RunConfig& config, const CertificateFile& file,
                          std::optional<PlaneChoice> plane);

int cmd_certify(const RunConfig& config);
int cmd_validate(const RunConfig& config);
int cmd_section(const RunConfig& config);

}  // namespace sscert::app
