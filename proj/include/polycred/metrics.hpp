#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polycred/adversary.hpp"
#include "polycred/scenario.hpp"

namespace polycred {

// ---- cost of non-credibility ----------------------------------------------

struct RoundMetrics {
    double revenue = 0.0;   // operator revenue
    double welfare = 0.0;   // realized value of delivered allocation
    double payments = 0.0;  // total charged to agents
};

RoundMetrics round_metrics(const MarketOutcome& o);

struct ConcReport {
    double conc_op = 0.0;
    double conc_w = 0.0;
    // Agents' loss (extra payments plus lost welfare) over baseline payments,
    // so conc_ag = conc_op + conc_w * W* / P* when revenue is payments.
    double conc_ag = 0.0;
    double concabs_op = 0.0;
    double base_revenue = 0.0;
    double base_welfare = 0.0;
    double base_payments = 0.0;
    int rounds = 0;
};

nlohmann::ordered_json to_json(const ConcReport& r);

// Matched rounds. A zero baseline raises UndefinedRatioError carrying
// concabs_op.
ConcReport conc(const std::vector<RoundMetrics>& honest, const std::vector<RoundMetrics>& deviated);

// (#{a > b} - #{a < b}) / (|A| |B|).
double cliffs_delta(const std::vector<double>& a, const std::vector<double>& b);

// ---- gamma distribution -----------------------------------------------------

struct GammaSummary {
    TopologyClass cls = TopologyClass::tree;
    std::vector<double> samples;
    double mean = 0.0;
    std::vector<double> bin_edges;  // histogram over [min, max]
    std::vector<int> bin_counts;
};

nlohmann::ordered_json to_json(const GammaSummary& g);

// Each sample draws a round and a random live agent pair (i, j) and records
//   max_S [f(S+i) + f(S+j) - f(S+i+j) - f(S)] * min(v_i, v_j),
// the pair's peak capacity contest in realized-value units, with S ranging
// over the prefixes of a few random orderings of the other live agents. tree / sp / general use the tier network; other classes use their
// generated witness with n_agents agents and unit leaves.
GammaSummary gamma_distribution(TopologyClass cls, const ScenarioConfig& config, int n_samples,
                                std::uint64_t seed, int bins = 20);

// ---- scaling sweeps -------------------------------------------------------

// One payment perturbation inside a joint deviation: `i` is charged as if `j`
// had bid b_j + delta.
struct Contest {
    int i = -1, j = -1;
    double delta = 0.0;
    double gamma = 0.0;
};

// Market that is priced on its own: the whole instance, or a single hop.
struct Stage {
    OraclePtr f;
    BidProfile bids;
    std::vector<Contest> contests;
};

struct StageResult {
    double base_revenue = 0.0;
    double surplus = 0.0;    // measured VCG payment increase
    double predicted = 0.0;  // sum of delta * gamma
};

// Charges every perturbed agent against one profile carrying all of its
// contests' shifts; others pay as before.
StageResult joint_perturbation(const Stage& s);

struct SweepPoint {
    int param = 0;
    std::uint64_t seed = 0;
    double concabs = 0.0;
    double predicted = 0.0;
    double rev_base = 0.0;
    double aggregate = 0.0;  // tree only: every internal node's contest
};

struct ScalingFit {
    TopologyClass cls = TopologyClass::series;
    std::vector<int> params;
    std::vector<double> concabs_means;
    double slope = 0.0;
    double slope_lo = 0.0;  // percentile interval over resampled seeds
    double slope_hi = 0.0;
    std::vector<SweepPoint> points;
    double aggregate_slope = 0.0;  // tree only
};

nlohmann::ordered_json to_json(const ScalingFit& f);
std::string sweep_csv(const ScalingFit& f);

// Least-squares slope of log y on log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct SweepOptions {
    int series_agents = 4;   // agents sharing the chain
    int parallel_paths = 8;  // k
    int tree_beta = 2;
    double ladder_step = 1.0;  // bid spacing on ladder witnesses
    int resamples = 400;
    int jobs = 1;
};

// series: d hops each priced as its own unit market; parallel: one market,
// one contest per saturated path; tree: per-hop markets along the top
// bidder's leaf-to-root path (param h); general: fully entangled witness,
// one market, a contest for every pair. Grids need >= 4 strictly increasing
// values.
ScalingFit scaling_sweep(TopologyClass cls, const std::vector<int>& grid, const std::vector<std::uint64_t>& seeds,
                         const SweepOptions& opt = {});

// Stages for one sweep point (exposed for tests).
std::vector<Stage> sweep_stages(TopologyClass cls, int param, std::uint64_t seed, const SweepOptions& opt = {});

// ---- competition ------------------------------------------------------------

double salop_markup(double t, int k);
double bertrand_price(double marginal_cost);

struct Decomposition {
    double cred_component = 0.0;
    double salop_component = 0.0;
    double total = 0.0;
};

Decomposition orthogonality_decompose(double lambda, double epsilon, double t, int k, double consumer_mass);

}  // namespace polycred
