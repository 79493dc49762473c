#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polycred/mechanisms.hpp"

namespace polycred {

struct DeviationStrategy {
    enum Kind { identity, ghost_bid, payment_perturb, capacity_misreport, posted_price_inflate, discriminate };
    Kind kind = identity;

    // ghost_bid: the phantom bids ghost_level if set, else epsilon_scale times
    // the highest bid, and enters the network at ghost_target's leaf (default:
    // the highest bidder strictly below the phantom).
    double epsilon_scale = 1.1;
    std::optional<double> ghost_level;
    int ghost_target = -1;
    // Units the phantom may absorb through its own leaf; 0 means it shares
    // the target's leaf.
    double ghost_units = 0.0;

    // payment_perturb: agent i is charged as if j had bid b_j + delta.
    int i = -1, j = -1;
    double delta = 0.0;

    double shrink_factor = 1.0;  // capacity_misreport
    double markup = 0.0;         // posted_price_inflate
    std::vector<int> favored;    // discriminate

    static DeviationStrategy honest() { return {}; }
    static DeviationStrategy ghost(double epsilon_scale);
    static DeviationStrategy ghost_at(double level, int target = -1, double units = 0.0);
    static DeviationStrategy perturb(int i, int j, double delta);
    static DeviationStrategy misreport(double shrink_factor);
    static DeviationStrategy inflate(double markup);
    static DeviationStrategy discriminating(std::vector<int> favored);
};

std::string to_string(DeviationStrategy::Kind k);

// Local window min(b_i - b_j, b_j - max_{k != i,j} b_k); the second term is
// dropped when there are only two agents.
double walrasian_gap(const BidProfile& bids, int i, int j);

struct Perturbation {
    int i = -1, j = -1;
    double gap = 0.0;
    double gamma = 0.0;
    double delta = 0.0;
    double increment = 0.0;  // delta * gamma

    DeviationStrategy strategy() const { return DeviationStrategy::perturb(i, j, delta); }
};

// Top pair by priority, gamma from three rank calls, delta = min(gap/2,
// eps_target/gamma) unless `delta` is given (it must lie in (0, gap)).
Perturbation construct_perturbation(const BidProfile& bids, const RankOracle& f,
                                    const PriorityRule& rule = PriorityRule::bid(), double eps_target = kInf,
                                    std::optional<double> delta = std::nullopt);

struct AgentObservation {
    double bid = 0.0;
    double alloc = 0.0;
    double payment = 0.0;
};

// A counterfactual profile: the real agents' bids plus, optionally, one
// extra bidder entering where `added_at` does: on `added_at`'s own leaf, or
// on a new leaf of capacity `added_cap` wired the same way when positive.
struct Certificate {
    BidProfile bids;
    int added_at = -1;
    double added_bid = 0.0;
    double added_cap = 0.0;
};

nlohmann::ordered_json to_json(const Certificate& c);

struct SafetyVerdict {
    bool safe = false;
    bool budget_exhausted = false;  // inconclusive, not a proof of detection
    std::string reason;
    std::optional<Certificate> certificate;
    int evaluations = 0;
};

struct DeviationResult {
    MarketOutcome honest;
    MarketOutcome deviated;
    double operator_surplus = 0.0;
    // Profile that reproduces every real agent's deviated observation when
    // one exists by construction (ghost, perturbation); empty otherwise.
    std::optional<Certificate> hint;
    std::vector<SafetyVerdict> safety;  // filled by certify()
};

DeviationResult apply_deviation(const DeviationStrategy& s, const BidProfile& bids, const Mechanism& m,
                                const OraclePtr& f, const std::vector<double>& values = {});

// Agent i's outcome under honest execution of `m` on the certificate profile.
AgentObservation observe(int agent, const Certificate& c, const Mechanism& m, const OraclePtr& f);

// Searches for opponents' bids in [support.lo, support.hi] (dimension free:
// one extra co-located bidder allowed) that reproduce the observation.
// Order: IR screen, hints, the reference profile, then an analytic solve
// per opponent slot, then random search up to search_budget evaluations.
SafetyVerdict check_safe_deviation(int agent, const AgentObservation& obs, const Mechanism& m, const OraclePtr& f,
                                   const Prior& support, const BidProfile& reference, int search_budget = 200,
                                   const std::vector<Certificate>& hints = {}, std::uint64_t seed = 1);

// Runs check_safe_deviation for every real agent of a deviation result.
void certify(DeviationResult& r, const BidProfile& bids, const Mechanism& m, const OraclePtr& f,
             const Prior& support, int search_budget = 200);

nlohmann::ordered_json to_json(const DeviationResult& r);

}  // namespace polycred
