#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sscert/certifier.hpp"
#include "sscert/network.hpp"
#include "sscert/validator.hpp"

namespace sscert {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Lossless JSON form of a network (infinite limits are written as null).
std::string network_to_json(const PowerNetwork& network);
PowerNetwork network_from_json(std::string_view text);

inline constexpr std::string_view certificate_schema = "sscert-certificate";
inline constexpr int certificate_schema_version = 1;

/// Everything besides the certificate itself that a reader needs to rebuild
/// the problem it was certified for.
struct CertificateContext {
    std::string case_name;
    std::size_t buses = 0;
    std::size_t branches = 0;
    std::vector<int> input_bus_ids;  // external bus number per input
    std::vector<InputKind> input_kinds;
    ProblemOptions options;
};

struct CertificateFile {
    CertificateContext context;
    Certificate certificate;
};

std::string certificate_to_json(const Certificate& certificate, const CertificateContext& context);
CertificateFile certificate_from_json(std::string_view text);

std::string cross_section_to_json(const CrossSection& section, const PowerNetwork& network);
/// One row per ray: angle, r_true, r_cert.
std::string cross_section_to_csv(const CrossSection& section);

std::string validation_report_to_json(const ValidationReport& report);

}  // namespace sscert
