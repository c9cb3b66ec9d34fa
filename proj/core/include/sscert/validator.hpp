#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sscert/certifier.hpp"
#include "sscert/model.hpp"
#include "sscert/powerflow.hpp"

namespace sscert {

/// Injection schedule matching the load model of a certification problem:
/// coordinates with a floor (constant power) keep their base power, the rest
/// keep their base admittance.
InjectionSchedule truth_schedule(const PowerNetwork& network, const FixedPointModel& model,
                                 const CertificationProblem& problem);

struct SoundnessReport {
    int samples = 0;
    int failures = 0;
    int nonconverged = 0;
    int infeasible = 0;
    int outside = 0;                // solved point outside A(lx)
    double worst_violation = 0.0;   // largest operational margin or A(lx) excess
    std::vector<std::string> notes; // first few failure descriptions
};

/// Samples powers uniformly in the certificate's injection box (admittances
/// for held coordinates), solves each from the base point and checks
/// convergence, the operational limits and membership in A(lx).
SoundnessReport monte_carlo_soundness(const PowerNetwork& network, const FixedPointModel& model,
                                      const CertificationProblem& problem, const OperationalLimits& limits,
                                      const Certificate& certificate, int n, std::uint64_t seed);

/// Plane of the active injections of two load buses (bus indices).
struct Plane {
    std::size_t bus_a = 0;
    std::size_t bus_b = 0;
};

struct SectionRay {
    double angle = 0.0;
    double r_true = 0.0;
    double r_cert = 0.0;
};

struct CrossSection {
    Plane plane;
    Eigen::Vector2d base = Eigen::Vector2d::Zero();
    std::vector<Eigen::Vector2d> true_polygon;
    // certificate rectangle: p_a in [x_min, x_max], p_b in [y_min, y_max]
    std::array<double, 4> cert_rect{0.0, 0.0, 0.0, 0.0};
    std::vector<SectionRay> rays;
};

/// Traces the true region on `plane` along n_rays equally spaced directions.
CrossSection trace_cross_section(const PowerNetwork& network, const OperatingPoint& base,
                                 const InjectionSchedule& base_injection, const Plane& plane,
                                 const OperationalLimits& limits, int n_rays, const RayOptions& options = {});

/// Adds the certificate rectangle (other inputs at base) and per-ray radii.
void attach_certificate(CrossSection& section, const std::vector<InjectionRange>& box);

double polygon_area(const std::vector<Eigen::Vector2d>& polygon);
/// Clips a polygon by an axis-aligned rectangle {x_min, x_max, y_min, y_max}.
std::vector<Eigen::Vector2d> clip_to_rect(const std::vector<Eigen::Vector2d>& polygon,
                                          const std::array<double, 4>& rect);

/// area(cert rectangle intersected with the true polygon) / area(true polygon).
double covering_ratio(const CrossSection& section);
/// max over rays of r_cert / r_true.
double tightness(const CrossSection& section);

struct ValidationReport {
    // self-mapping and operational inequalities re-checked at the stored boxes
    bool reverified = false;
    std::string reverify_note;
    SoundnessReport soundness;
    BrouwerReport brouwer;
    double covering_ratio = 0.0;
    double tightness = 0.0;
    bool has_section = false;
    double seconds_soundness = 0.0;
    double seconds_section = 0.0;
};

}  // namespace sscert
