#pragma once

#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace sscert {

using Complex = std::complex<double>;

enum class BusKind { slack, generator, load };

std::string_view to_string(BusKind kind);

/// One bus of the per-unit network model. Injection limits are net
/// (aggregated generator limits minus demand); buses without in-service
/// generators carry infinite limits.
struct Bus {
    int id = 0;
    BusKind kind = BusKind::load;
    Complex shunt{0.0, 0.0};
    double v_min = 0.0;
    double v_max = std::numeric_limits<double>::infinity();
    double p_min = -std::numeric_limits<double>::infinity();
    double p_max = std::numeric_limits<double>::infinity();
    double q_min = -std::numeric_limits<double>::infinity();
    double q_max = std::numeric_limits<double>::infinity();
    // scheduled net injection
    double p_spec = 0.0;
    double q_spec = 0.0;
    // voltage setpoint for slack/generator buses, initial magnitude otherwise
    double v_set = 1.0;
    double v_init = 1.0;
    double theta_init = 0.0;
    bool has_generator = false;

    bool operator==(const Bus&) const = default;
};

/// A branch in MATPOWER pi-model form. Endpoints are internal bus indices.
struct Branch {
    std::size_t from = 0;
    std::size_t to = 0;
    Complex y_series{0.0, 0.0};
    double b_charging = 0.0;
    double tap = 1.0;
    double shift = 0.0;
    std::optional<double> s_max;  // unset when the case file gives no rating
    double angle_min = -2.0 * 3.14159265358979323846;
    double angle_max = 2.0 * 3.14159265358979323846;

    bool operator==(const Branch&) const = default;
};

class PowerNetwork {
public:
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;

    [[nodiscard]] std::size_t bus_count() const { return buses.size(); }
    [[nodiscard]] std::size_t branch_count() const { return branches.size(); }
    [[nodiscard]] std::size_t slack_index() const;
    /// Internal index of the bus with external number `id`; throws if absent.
    [[nodiscard]] std::size_t index_of(int id) const;
    [[nodiscard]] std::optional<std::size_t> find(int id) const;

    /// Throws NetworkError when an invariant (single slack, valid endpoints,
    /// finite admittances, positive taps, connectivity) does not hold.
    void validate() const;

    bool operator==(const PowerNetwork&) const = default;
};

class NetworkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(std::string message, std::size_t line, std::size_t column);
    [[nodiscard]] std::size_t line() const { return line_; }
    [[nodiscard]] std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Parses MATPOWER case text (version 2 `mpc.*` struct layout) into a
/// validated per-unit network. Out-of-service branches and generators are
/// dropped, isolated buses removed, and generators on a common bus merged.
PowerNetwork parse_matpower(std::string_view text);
PowerNetwork load_matpower(const std::string& path);

/// Standard pi-model terminal admittances of one branch:
/// i_from = yff v_from + yft v_to, i_to = ytf v_from + ytt v_to.
struct BranchAdmittance {
    Complex yff;
    Complex yft;
    Complex ytf;
    Complex ytt;
};

BranchAdmittance branch_admittance(const Branch& branch);

/// Edge-indexed admittance structure: i = diag(y_d) v + Yf v_to + Yt v_from.
/// Yf(from(e), e) holds the from-side transfer term, Yt(to(e), e) the to-side
/// one; all self terms (charging, taps, shunts) are folded into y_d.
struct EdgeAdmittanceStructure {
    Eigen::VectorXcd y_d;
    Eigen::SparseMatrix<Complex> Yf;
    Eigen::SparseMatrix<Complex> Yt;
    std::vector<BranchAdmittance> branch;
};

EdgeAdmittanceStructure build_edge_admittances(const PowerNetwork& network);

/// Conventional bus admittance matrix scattered from the edge structure.
Eigen::SparseMatrix<Complex> bus_admittance_matrix(const PowerNetwork& network,
                                                   const EdgeAdmittanceStructure& adm);

}  // namespace sscert
