#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "polycred/adversary.hpp"
#include "polycred/mechanisms.hpp"

namespace polycred {

// ---- broadcast commitment -------------------------------------------------

// Perfect reliable broadcast: every sent message is delivered, in one order,
// to everyone.
class BroadcastChannel {
public:
    explicit BroadcastChannel(std::vector<int> participants) : participants_(std::move(participants)) {}
    void send(const ClinchEvent& e) { delivered_.push_back(e); }
    const std::vector<ClinchEvent>& delivered() const { return delivered_; }
    const std::vector<int>& participants() const { return participants_; }

private:
    std::vector<int> participants_;
    std::vector<ClinchEvent> delivered_;
};

struct Violation {
    enum Kind { clinch_mismatch, inauthentic_rank, missing_rank, forged_demand, wrong_root };
    Kind kind = clinch_mismatch;
    int step = 0;
    int agent = -1;
    double expected = 0.0;
    double announced = 0.0;
    Subset subset;
};

std::string to_string(Violation::Kind k);

struct Verdict {
    std::vector<Violation> violations;
    bool consistent() const { return violations.empty(); }
};

nlohmann::ordered_json to_json(const Verdict& v);

// Replays a clinching transcript: demand set from the agents' own demand
// messages, rank values only from announcements whose tag matches the root,
// and every cumulative clinch recomputed as min(d_i, f(D) - f(D - i)).
Verdict verify_transcript(const ClinchTranscript& t, const std::string& commitment_root);

// Clinching run carried over a broadcast channel; the delivered log is the
// transcript.
ClinchResult clinching_with_broadcast(const std::vector<double>& values, const RankOracle& f,
                                      double clock_step = 0.01);

// The operator runs the clock with a phantom bidder (value `ghost_value`,
// entering at `target`'s leaf) and publishes what that run produced. The
// outcome is truncated to the real agents.
// A positive `ghost_units` gives the phantom its own leaf of that capacity.
ClinchResult ghost_clinching(const std::vector<double>& values, const OraclePtr& f, double ghost_value, int target,
                             double clock_step = 0.01, double ghost_units = 0.0);

// Deliberate transcript mutations for detection tests. Tags are never
// recomputed, as an operator without the committed oracle could not.
struct Tamper {
    enum Kind { inflate_clinch, forge_rank, ghost_clinch };
    Kind kind = inflate_clinch;
    int event_index = -1;  // mutated event
    double original = 0.0;
    double replacement = 0.0;
};

std::string to_string(Tamper::Kind k);
nlohmann::ordered_json to_json(const Tamper& m);

// Mutates the first suitable event (or the one picked by `seed` among them).
Tamper apply_tamper(ClinchTranscript& t, Tamper::Kind kind, std::uint64_t seed = 0);

// ---- deferred-revelation auction with deposits ------------------------------

struct SlashEvent {
    std::vector<int> agents;  // agents whose outcome differs from the committed rule
    double amount = 0.0;
};

struct DraState {
    enum Phase { commit, execute, verify };
    Phase phase = commit;
    std::string commitment;
    std::map<std::string, double> deposits;  // "operator" or agent id
    std::vector<SlashEvent> slash_events;
};

nlohmann::ordered_json to_json(const DraState& s);

struct DraResult {
    MarketOutcome outcome;     // as executed
    MarketOutcome committed;   // what the committed rule prescribes
    DraState state;
    double operator_gain = 0.0;  // revenue above the committed rule
    double operator_net = 0.0;   // gain minus slashed deposit
};

// Myerson on a Level-1 matroid. Non-matroid feasibility raises BoundaryError.
// A non-positive deposit means the default n * max(hi).
DraResult run_dra(const BidProfile& bids, const Level1Matroid& matroid, const std::vector<Prior>& priors,
                  double operator_deposit = 0.0, const DeviationStrategy& strategy = DeviationStrategy::honest());

// Same, for feasibility given as a rank oracle; anything that is not a
// matroid rank (unit singletons, integer values) raises BoundaryError.
DraResult run_dra(const BidProfile& bids, const OraclePtr& f, const std::vector<Prior>& priors,
                  double operator_deposit = 0.0, const DeviationStrategy& strategy = DeviationStrategy::honest());

// ---- domain separation ----------------------------------------------------

struct FeeOperator {
    double fee_per_unit = 0.0;  // phi >= 0
    double stake = 0.0;         // lambda in [0, 1]
};

struct FeeSurplus {
    double surplus = 0.0;
    double fee_component = 0.0;    // phi * change in delivered units
    double stake_component = 0.0;  // lambda * change in agent payments
    bool capacity_binding = true;  // honest run serves f(E)
};

// Undelivered (phantom) allocation earns no fee.
FeeSurplus fee_operator_surplus(const FeeOperator& op, const DeviationResult& d, const RankOracle& f);

std::vector<std::pair<double, double>> knife_edge_sweep(const std::vector<double>& lambdas, const DeviationResult& d,
                                                        const RankOracle& f, double fee_per_unit = 0.0);

}  // namespace polycred
