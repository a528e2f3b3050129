#pragma once

#include "rsaas/error.hpp"

namespace rsaas {

/// Cross-pCPU interference: each stress vCPU running on another pCPU slows
/// demand draining on this pCPU by a factor (1 + kappa).
struct ContentionModel {
    bool enabled = false;
    double kappa = 0.0;

    double effective_rate(int stress_running_elsewhere) const {
        if (!enabled || stress_running_elsewhere <= 0) return 1.0;
        return 1.0 / (1.0 + kappa * static_cast<double>(stress_running_elsewhere));
    }

    void validate() const {
        if (!(kappa >= 0.0)) throw Error(Errc::InvalidExperiment, "contention kappa must be >= 0");
    }
};

}  // namespace rsaas
