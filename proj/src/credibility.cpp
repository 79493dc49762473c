#include "polycred/credibility.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "polycred/digest.hpp"
#include "polycred/errors.hpp"

namespace polycred {

// ---- broadcast commitment -------------------------------------------------

std::string to_string(Violation::Kind k) {
    switch (k) {
        case Violation::clinch_mismatch: return "clinch_mismatch";
        case Violation::inauthentic_rank: return "inauthentic_rank";
        case Violation::missing_rank: return "missing_rank";
        case Violation::forged_demand: return "forged_demand";
        case Violation::wrong_root: return "wrong_root";
    }
    return "?";
}

nlohmann::ordered_json to_json(const Verdict& v) {
    nlohmann::ordered_json j;
    j["consistent"] = v.consistent();
    auto list = nlohmann::ordered_json::array();
    for (const auto& x : v.violations) {
        nlohmann::ordered_json e;
        e["kind"] = to_string(x.kind);
        e["price_step"] = x.step;
        if (x.agent >= 0) e["agent"] = x.agent;
        if (x.kind == Violation::clinch_mismatch) {
            e["expected_clinch"] = x.expected;
            e["announced_clinch"] = x.announced;
        }
        if (x.kind == Violation::inauthentic_rank || x.kind == Violation::missing_rank) e["subset"] = x.subset;
        list.push_back(e);
    }
    j["violations"] = list;
    return j;
}

Verdict verify_transcript(const ClinchTranscript& t, const std::string& root) {
    Verdict v;
    if (t.commitment_root != root) v.violations.push_back({Violation::wrong_root, 0, -1, 0, 0, {}});

    const Subset& members = t.participants;
    auto is_member = [&](int a) { return std::find(members.begin(), members.end(), a) != members.end(); };
    std::map<int, double> demand, cumulative;
    std::map<Subset, double> ranks;
    std::map<int, double> announced;
    bool cleared = false;

    auto close_step = [&](int step) {
        Subset D;
        for (const auto& [a, d] : demand)
            if (d > 0) D.push_back(a);
        std::map<int, double> expected;
        bool complete = true;
        auto rank_of = [&](const Subset& s, double& out) {
            auto it = ranks.find(s);
            if (it == ranks.end()) {
                v.violations.push_back({Violation::missing_rank, step, -1, 0, 0, s});
                complete = false;
                return false;
            }
            out = it->second;
            return true;
        };
        if (!D.empty() && !cleared) {
            double supply = 0.0, total = 0.0;
            if (rank_of(D, supply)) {
                for (int a : D) total += demand[a];
                bool clears = total <= supply + kTol;
                for (std::size_t k = 0; k < D.size(); ++k) {
                    int a = D[k];
                    double target = demand[a];
                    if (!clears) {
                        Subset rest = D;
                        rest.erase(rest.begin() + static_cast<long>(k));
                        double without = 0.0;
                        if (!rank_of(rest, without)) continue;
                        target = std::min(demand[a], std::max(0.0, supply - without));
                    }
                    double q = target - cumulative[a];
                    if (q > kTol) expected[a] = q;
                }
                if (clears && complete) cleared = true;
            }
        }
        if (complete) {
            std::map<int, double> all = expected;
            for (const auto& [a, q] : announced) all.emplace(a, 0.0);
            for (const auto& [a, _] : all) {
                double e = expected.count(a) ? expected[a] : 0.0;
                double got = announced.count(a) ? announced[a] : 0.0;
                if (std::abs(e - got) > 1e-9 * std::max(1.0, e))
                    v.violations.push_back({Violation::clinch_mismatch, step, a, e, got, {}});
            }
        }
        for (const auto& [a, q] : announced) cumulative[a] += q;
        announced.clear();
    };

    int current = t.events.empty() ? 0 : t.events.front().step;
    for (const auto& e : t.events) {
        if (e.step != current) {
            close_step(current);
            current = e.step;
        }
        switch (e.type) {
            case ClinchEvent::price_step: break;
            case ClinchEvent::demand:
                if (!is_member(e.agent)) {
                    v.violations.push_back({Violation::forged_demand, e.step, e.agent, 0, e.quantity, {}});
                    break;
                }
                demand[e.agent] = e.quantity;
                break;
            case ClinchEvent::rank_announce: {
                bool ok = e.subset_digest == subset_digest(e.subset) && e.auth_tag == auth_tag(e.subset, e.value, root);
                if (!ok) {
                    v.violations.push_back({Violation::inauthentic_rank, e.step, -1, 0, e.value, e.subset});
                    break;
                }
                ranks[e.subset] = e.value;
                break;
            }
            case ClinchEvent::clinch: announced[e.agent] += e.quantity; break;
        }
    }
    if (!t.events.empty()) close_step(current);
    return v;
}

ClinchResult clinching_with_broadcast(const std::vector<double>& values, const RankOracle& f, double clock_step) {
    auto run = clinching_auction(values, f, clock_step);
    BroadcastChannel channel(run.transcript.participants);
    for (const auto& e : run.transcript.events) channel.send(e);
    run.transcript.events = channel.delivered();
    return run;
}

ClinchResult ghost_clinching(const std::vector<double>& values, const OraclePtr& f, double ghost_value, int target,
                             double clock_step, double ghost_units) {
    const int n = f->size();
    if (target < 0 || target >= n) throw DomainError("ghost target out of range");
    OraclePtr clone = ghost_units > 0 ? with_entrant(*f, target, ghost_units)
                                      : OraclePtr(std::make_shared<CloneOracle>(f, target));
    std::vector<double> vals = values;
    vals.push_back(ghost_value);
    auto run = clinching_auction(vals, *clone, clock_step);

    // Published under the committed root: announcements the operator can
    // legitimately tag are re-tagged, the phantom's cannot be.
    const std::string root = commitment_root(*f);
    run.transcript.commitment_root = root;
    run.transcript.participants.pop_back();
    for (auto& e : run.transcript.events)
        if (e.type == ClinchEvent::rank_announce && std::find(e.subset.begin(), e.subset.end(), n) == e.subset.end())
            e.auth_tag = auth_tag(e.subset, e.value, root);

    auto& out = run.outcome;
    out.undelivered = out.alloc[n];
    out.alloc.pop_back();
    out.pay.pop_back();
    settle(out, values);
    return run;
}

std::string to_string(Tamper::Kind k) {
    switch (k) {
        case Tamper::inflate_clinch: return "inflate_clinch";
        case Tamper::forge_rank: return "forge_rank";
        case Tamper::ghost_clinch: return "ghost_clinch";
    }
    return "?";
}

nlohmann::ordered_json to_json(const Tamper& m) {
    nlohmann::ordered_json j;
    j["kind"] = to_string(m.kind);
    j["event_index"] = m.event_index;
    j["original"] = m.original;
    j["replacement"] = m.replacement;
    return j;
}

Tamper apply_tamper(ClinchTranscript& t, Tamper::Kind kind, std::uint64_t seed) {
    Tamper m;
    m.kind = kind;
    std::vector<int> candidates;
    auto want = kind == Tamper::inflate_clinch ? ClinchEvent::clinch : ClinchEvent::rank_announce;
    for (int k = 0; k < static_cast<int>(t.events.size()); ++k)
        if (t.events[k].type == want) candidates.push_back(k);
    if (kind == Tamper::ghost_clinch) {
        // A clinch credited to an id outside the participant list.
        int ghost = t.participants.empty() ? 0 : *std::max_element(t.participants.begin(), t.participants.end()) + 1;
        int at = candidates.empty() ? static_cast<int>(t.events.size()) : candidates[seed % candidates.size()];
        ClinchEvent e = at < static_cast<int>(t.events.size()) ? t.events[at] : ClinchEvent{};
        e.type = ClinchEvent::clinch;
        e.agent = ghost;
        e.quantity = 1.0;
        e.subset.clear();
        t.events.insert(t.events.begin() + at + (at < static_cast<int>(t.events.size()) ? 1 : 0), e);
        m.event_index = at + 1;
        m.replacement = 1.0;
        return m;
    }
    if (candidates.empty()) throw DomainError("transcript has nothing to tamper with");
    int at = candidates[seed % candidates.size()];
    auto& e = t.events[at];
    m.event_index = at;
    switch (kind) {
        case Tamper::inflate_clinch:
            m.original = e.quantity;
            e.quantity += std::max(0.5, 0.5 * e.quantity);
            m.replacement = e.quantity;
            break;
        case Tamper::forge_rank:
            m.original = e.value;
            e.value = e.value > 0 ? 0.5 * e.value : 1.0;
            m.replacement = e.value;
            break;
        case Tamper::ghost_clinch: break;
    }
    return m;
}

// ---- deferred-revelation auction ------------------------------------------

nlohmann::ordered_json to_json(const DraState& s) {
    static const char* phases[] = {"commit", "execute", "verify"};
    nlohmann::ordered_json j;
    j["phase"] = phases[s.phase];
    j["commitment"] = s.commitment;
    j["deposits"] = s.deposits;
    auto slashes = nlohmann::ordered_json::array();
    for (const auto& e : s.slash_events) slashes.push_back({{"agents", e.agents}, {"amount", e.amount}});
    j["slash_events"] = slashes;
    return j;
}

namespace {

void require_matroid_rank(const RankOracle& f) {
    const int n = f.size();
    auto integral = [](double v) { return std::isfinite(v) && std::abs(v - std::round(v)) <= 1e-9; };
    for (int i = 0; i < n; ++i) {
        double r = f.rank({i});
        if (!integral(r) || r > 1.0 + 1e-9)
            throw BoundaryError("DRA is not credible beyond matroid feasibility: agent " + std::to_string(i) +
                                " has rank " + std::to_string(r));
    }
    std::mt19937_64 rng(7);
    const bool exhaustive = n <= 16;
    const std::uint64_t total = exhaustive ? (1ULL << n) : 4096;
    for (std::uint64_t k = 0; k < total; ++k) {
        Subset s;
        if (exhaustive) {
            s = mask_to_subset(k, n);
        } else {
            for (int i = 0; i < n; ++i)
                if (rng() & 1) s.push_back(i);
        }
        if (!integral(f.rank(s)))
            throw BoundaryError("DRA is not credible beyond matroid feasibility: fractional rank");
    }
}

bool same_outcome(const MarketOutcome& a, const MarketOutcome& b, int i) {
    auto close = [](double x, double y) { return std::abs(x - y) <= 1e-9 * std::max(1.0, std::abs(x)); };
    return close(a.alloc[i], b.alloc[i]) && close(a.pay[i], b.pay[i]);
}

}  // namespace

DraResult run_dra(const BidProfile& bids, const OraclePtr& f, const std::vector<Prior>& priors,
                  double operator_deposit, const DeviationStrategy& strategy) {
    require_matroid_rank(*f);
    const int n = f->size();
    Mechanism m;
    m.kind = MechanismKind::myerson;
    m.priors = priors;
    require_uniform(priors);
    if (!(operator_deposit > 0)) {
        double hi = 0.0;
        for (const auto& p : priors) hi = std::max(hi, p.hi);
        operator_deposit = n * hi;
    }

    DraResult r;
    auto& st = r.state;
    st.commitment = sha256_hex("dra|myerson|archer_tardos|" + commitment_root(*f));
    st.deposits["operator"] = operator_deposit;

    st.phase = DraState::execute;
    auto dev = apply_deviation(strategy, bids, m, f);
    r.outcome = dev.deviated;
    r.committed = dev.honest;

    st.phase = DraState::verify;
    SlashEvent slash;
    for (int i = 0; i < n; ++i)
        if (!same_outcome(r.committed, r.outcome, i)) slash.agents.push_back(i);
    if (!slash.agents.empty()) {
        slash.amount = operator_deposit;
        st.deposits["operator"] = 0.0;
        st.slash_events.push_back(slash);
    }
    r.operator_gain = r.outcome.revenue - r.committed.revenue;
    r.operator_net = r.operator_gain - slash.amount;
    return r;
}

DraResult run_dra(const BidProfile& bids, const Level1Matroid& matroid, const std::vector<Prior>& priors,
                  double operator_deposit, const DeviationStrategy& strategy) {
    auto v = check_matroid(matroid);
    if (!v.ok) throw BoundaryError("DRA is not credible beyond matroid feasibility: " + v.axiom + " fails");
    return run_dra(bids, matroid.oracle(), priors, operator_deposit, strategy);
}

// ---- domain separation ----------------------------------------------------

FeeSurplus fee_operator_surplus(const FeeOperator& op, const DeviationResult& d, const RankOracle& f) {
    if (!(op.fee_per_unit >= 0)) throw DomainError("fee per unit must be non-negative");
    if (!(op.stake >= 0 && op.stake <= 1)) throw DomainError("stake must lie in [0, 1]");
    FeeSurplus s;
    Subset everyone(f.size());
    for (int i = 0; i < f.size(); ++i) everyone[i] = i;
    double full = f.rank(everyone);
    s.capacity_binding = std::abs(d.honest.total_alloc() - full) <= 1e-9 * std::max(1.0, full);
    s.fee_component = op.fee_per_unit * (d.deviated.total_alloc() - d.honest.total_alloc());
    s.stake_component = op.stake * (d.deviated.revenue - d.honest.revenue);
    s.surplus = s.fee_component + s.stake_component;
    return s;
}

std::vector<std::pair<double, double>> knife_edge_sweep(const std::vector<double>& lambdas, const DeviationResult& d,
                                                        const RankOracle& f, double fee_per_unit) {
    std::vector<std::pair<double, double>> curve;
    for (double l : lambdas) curve.emplace_back(l, fee_operator_surplus(FeeOperator{fee_per_unit, l}, d, f).surplus);
    return curve;
}

}  // namespace polycred
