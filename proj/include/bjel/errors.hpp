#pragma once

#include <stdexcept>
#include <string>

namespace bjel {

enum class errc {
    sample_too_small,
    invalid_input,
    non_convergence,
    singular_system,
    size_measure_too_large,
    rejection_budget_exceeded,
    non_positive_weight,
    singular_calibration,
    degenerate_variance,
    degenerate_posterior,
    rho_unattainable,
    simulation_quality,
    bad_request,
};

inline const char* to_string(errc c) {
    switch (c) {
        case errc::sample_too_small:          return "sample_too_small";
        case errc::invalid_input:             return "invalid_input";
        case errc::non_convergence:           return "non_convergence";
        case errc::singular_system:           return "singular_system";
        case errc::size_measure_too_large:    return "size_measure_too_large";
        case errc::rejection_budget_exceeded: return "rejection_budget_exceeded";
        case errc::non_positive_weight:       return "non_positive_weight";
        case errc::singular_calibration:      return "singular_calibration";
        case errc::degenerate_variance:       return "degenerate_variance";
        case errc::degenerate_posterior:      return "degenerate_posterior";
        case errc::rho_unattainable:          return "rho_unattainable";
        case errc::simulation_quality:        return "simulation_quality";
        case errc::bad_request:               return "bad_request";
    }
    return "unknown";
}

// All recoverable failures surface as bjel::error; callers dispatch on code().
class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc c, const std::string& msg) { throw error(c, msg); }

}  // namespace bjel
