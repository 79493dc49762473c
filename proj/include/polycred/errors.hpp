#pragma once

#include <stdexcept>
#include <string>

namespace polycred {

// Base of every error the library raises on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad ids, out-of-range parameters.
struct DomainError : Error { using Error::Error; };
// Invalid configuration or parameter combination (cli exit code 1).
struct ConfigError : Error { using Error::Error; };
// Malformed graphs, partitions, transcripts.
struct StructureError : Error { using Error::Error; };
// Contraction does not preserve ranks.
struct FaithfulnessError : Error { using Error::Error; };
// Non-integer integrator capacity: no token matroid exists.
struct Level2RegimeError : Error { using Error::Error; };
// Priors we do not handle (anything but bounded uniform).
struct UnsupportedPriorError : Error { using Error::Error; };
// Bid ordering leaves no room for a perturbation.
struct NoWindowError : Error { using Error::Error; };
// Modular instance: nothing to extract.
struct NoDeviationError : Error { using Error::Error; };
// Deferred-revelation auction asked to run on a non-matroid.
struct BoundaryError : Error { using Error::Error; };
// Internal invariant broken (e.g. non-monotone allocation curve).
struct ConsistencyError : Error { using Error::Error; };

// Ratio with a zero denominator; the absolute difference is still reported.
struct UndefinedRatioError : Error {
    double absolute;
    UndefinedRatioError(const std::string& what, double abs)
        : Error(what), absolute(abs) {}
};

}  // namespace polycred
