#pragma once

#include <optional>
#include <vector>

#include "hem/error.hpp"

namespace hem {

/// Receiver coefficients b (length P), timing coefficients eta (length Q) and
/// the timing auxiliary parameter (absent for the exponential family).
struct ModelParams {
    std::vector<double> b;
    std::vector<double> eta;
    std::optional<double> aux;

    void validate(std::size_t P, std::size_t Q) const {
        if (b.size() != P) throw ConfigError("b has length " + std::to_string(b.size()) + ", expected " + std::to_string(P));
        if (eta.size() != Q)
            throw ConfigError("eta has length " + std::to_string(eta.size()) + ", expected " + std::to_string(Q));
        if (aux && !(*aux > 0.0)) throw ConfigError("aux must be positive");
    }

    bool operator==(const ModelParams&) const = default;
};

}  // namespace hem
