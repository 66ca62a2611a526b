#pragma once

#include "eclkit/dgrad.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace eclkit {

struct NamedDensity {
    std::string name;
    PointFunction H;
};

struct SelfCheckOptions {
    /// Densities checked in addition to the catalog ones.
    std::vector<NamedDensity> extra_densities;
    std::size_t samples = 1000;
    unsigned long long seed = 20240607;
};

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::size_t cases = 0;
    double worst = 0.0;  // worst ratio of error to its tolerance
    std::string detail;  // first failing case
};

/// Property suites: discrete gradient axiom and consistency, density
/// gradients, shifted product rule, summation by parts, centered-difference
/// skewness, skew forms, ECL residuals of short runs on small grids.
std::vector<SuiteResult> run_self_checks(const SelfCheckOptions& opts = {});

/// Prints one line per suite; exit 0 iff all pass, else 1.
int cmd_check(const SelfCheckOptions& opts, std::ostream& out);

/// A quartic density whose gradient is deliberately off by 10%.
NamedDensity faulty_density_fixture();

} // namespace eclkit
