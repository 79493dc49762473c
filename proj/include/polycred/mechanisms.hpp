#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polycred/polymatroid.hpp"

namespace polycred {

using BidProfile = std::vector<double>;

// Bounded-support prior. Only the uniform family is handled; anything else is
// rejected by the mechanisms that need virtual values.
struct Prior {
    double lo = 1.0;
    double hi = 11.0;
    std::string family = "uniform";

    double virtual_value(double b) const { return 2.0 * b - hi; }
    // Bid whose virtual value is phi.
    double bid_for(double phi) const { return 0.5 * (phi + hi); }
    double reserve() const { return lo > 0.5 * hi ? lo : 0.5 * hi; }
};

void require_uniform(const std::vector<Prior>& priors);

struct PriorityRule {
    enum Kind { by_bid, by_virtual_value };
    Kind kind = by_bid;
    std::vector<Prior> priors;  // by_virtual_value only
    std::vector<int> favored;   // always served before everyone else

    static PriorityRule bid() { return {}; }
    static PriorityRule virtual_value(std::vector<Prior> priors);

    double level(int i, double b) const;
    bool eligible(int i, double b) const;
    double floor(int i) const;  // lowest own bid that can be served
    bool is_favored(int i) const;
    // Does agent a (bidding ba) go before agent c (bidding bc)? Higher level
    // first; at equal level the lower id goes first.
    bool before(int a, double ba, int c, double bc) const;
    // Own bid of i at which i and k (bidding bk) have equal level; +inf if k
    // always precedes i, -inf if it never does.
    double crossover(int i, int k, double bk) const;
};

struct MarketOutcome {
    std::vector<double> alloc;
    std::vector<double> pay;
    double welfare = 0.0;
    double revenue = 0.0;
    double undelivered = 0.0;  // capacity held by phantom bidders

    double total_alloc() const;
};

nlohmann::ordered_json to_json(const MarketOutcome& o);

// Sets welfare (sum of value * alloc, values default to bids) and revenue.
void settle(MarketOutcome& o, const std::vector<double>& values);

// Marginal ranks f(S_k + k) - f(S_k) along a fixed service order.
std::vector<double> allocate_in_order(const std::vector<int>& order, const RankOracle& f);

std::vector<int> priority_order(const BidProfile& bids, const PriorityRule& rule);

std::vector<double> edmonds_greedy(const BidProfile& bids, const RankOracle& f, const PriorityRule& rule);

// p_i = b_i x_i(b_i) - integral of x_i(z) over [floor, b_i], exact over the
// breakpoints where i overtakes another agent.
double archer_tardos_payment(int i, const BidProfile& bids, const RankOracle& f, const PriorityRule& rule);

// Allocation i would get bidding z with everyone else fixed.
double counterfactual_allocation(int i, double z, const BidProfile& bids, const RankOracle& f,
                                 const PriorityRule& rule);

MarketOutcome vcg_outcome(const BidProfile& bids, const RankOracle& f, const std::vector<double>& values = {});
MarketOutcome myerson_outcome(const BidProfile& bids, const RankOracle& f, const std::vector<Prior>& priors,
                              const std::vector<double>& values = {});
MarketOutcome first_price_outcome(const BidProfile& bids, const RankOracle& f,
                                  const std::vector<double>& values = {});
MarketOutcome posted_price_outcome(const BidProfile& bids, const RankOracle& f, double post_price,
                                   std::uint64_t seed, const std::vector<double>& values = {});
// Acceptance order used by the posted-price mechanism.
std::vector<int> posted_price_order(const BidProfile& bids, double post_price, std::uint64_t seed);

enum class MechanismKind { vcg, myerson, first_price, posted_price };

std::string to_string(MechanismKind k);
MechanismKind mechanism_from_string(const std::string& s);

struct Mechanism {
    MechanismKind kind = MechanismKind::vcg;
    std::vector<Prior> priors;  // myerson
    double post_price = 0.0;    // posted_price
    std::uint64_t seed = 0;     // posted_price order

    PriorityRule rule() const;
    bool truthful_payment_rule() const { return kind == MechanismKind::vcg || kind == MechanismKind::myerson; }
};

MarketOutcome run_mechanism(const Mechanism& m, const BidProfile& bids, const RankOracle& f,
                            const std::vector<double>& values = {});

// ---- clinching ------------------------------------------------------------

struct ClinchEvent {
    enum Type { price_step, demand, rank_announce, clinch };
    Type type = price_step;
    int step = 0;
    double price = 0.0;
    int agent = -1;
    double quantity = 0.0;  // demand size or clinched amount
    Subset subset;
    std::string subset_digest;
    double value = 0.0;
    std::string auth_tag;
};

struct ClinchTranscript {
    std::vector<int> participants;
    std::string commitment_root;
    double clock_step = 0.01;
    std::vector<ClinchEvent> events;
};

nlohmann::ordered_json to_json(const ClinchTranscript& t);
ClinchTranscript transcript_from_json(const nlohmann::json& j);

struct ClinchResult {
    MarketOutcome outcome;
    ClinchTranscript transcript;
};

// Ascending clock with flat demands d_i = f({i}) while p < v_i. Each active
// agent's cumulative clinch is min(d_i, f(D) - f(D - i)); once aggregate
// demand fits in f(D) everyone active receives the rest of its demand.
ClinchResult clinching_auction(const std::vector<double>& values, const RankOracle& f, double clock_step = 0.01);

}  // namespace polycred
