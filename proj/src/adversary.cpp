#include "polycred/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "polycred/errors.hpp"

namespace polycred {

DeviationStrategy DeviationStrategy::ghost(double epsilon_scale) {
    if (!(epsilon_scale > 0)) throw DomainError("epsilon_scale must be positive");
    DeviationStrategy s;
    s.kind = ghost_bid;
    s.epsilon_scale = epsilon_scale;
    return s;
}

DeviationStrategy DeviationStrategy::ghost_at(double level, int target, double units) {
    if (!(level >= 0)) throw DomainError("phantom bid must be non-negative");
    if (!(units >= 0)) throw DomainError("phantom units must be non-negative");
    DeviationStrategy s;
    s.kind = ghost_bid;
    s.ghost_level = level;
    s.ghost_target = target;
    s.ghost_units = units;
    return s;
}

DeviationStrategy DeviationStrategy::perturb(int i, int j, double delta) {
    DeviationStrategy s;
    s.kind = payment_perturb;
    s.i = i;
    s.j = j;
    s.delta = delta;
    return s;
}

DeviationStrategy DeviationStrategy::misreport(double shrink_factor) {
    DeviationStrategy s;
    s.kind = capacity_misreport;
    s.shrink_factor = shrink_factor;
    return s;
}

DeviationStrategy DeviationStrategy::inflate(double markup) {
    DeviationStrategy s;
    s.kind = posted_price_inflate;
    s.markup = markup;
    return s;
}

DeviationStrategy DeviationStrategy::discriminating(std::vector<int> favored) {
    DeviationStrategy s;
    s.kind = discriminate;
    s.favored = std::move(favored);
    return s;
}

std::string to_string(DeviationStrategy::Kind k) {
    switch (k) {
        case DeviationStrategy::identity: return "identity";
        case DeviationStrategy::ghost_bid: return "ghost_bid";
        case DeviationStrategy::payment_perturb: return "payment_perturb";
        case DeviationStrategy::capacity_misreport: return "capacity_misreport";
        case DeviationStrategy::posted_price_inflate: return "posted_price_inflate";
        case DeviationStrategy::discriminate: return "discriminate";
    }
    return "identity";
}

// ---- perturbation ---------------------------------------------------------

double walrasian_gap(const BidProfile& bids, int i, int j) {
    const int n = static_cast<int>(bids.size());
    if (i < 0 || j < 0 || i >= n || j >= n || i == j) throw DomainError("bad agent pair");
    double rest = -kInf;
    for (int k = 0; k < n; ++k)
        if (k != i && k != j) rest = std::max(rest, bids[k]);
    bool ordered = bids[i] > bids[j] && bids[j] > 0 && (n == 2 || (bids[j] > rest && rest > 0));
    if (!ordered) throw NoWindowError("bids do not satisfy b_i > b_j > max(rest) > 0");
    double gap = bids[i] - bids[j];
    if (n > 2) gap = std::min(gap, bids[j] - rest);
    return gap;
}

Perturbation construct_perturbation(const BidProfile& bids, const RankOracle& f, const PriorityRule& rule,
                                    double eps_target, std::optional<double> delta) {
    const int n = static_cast<int>(bids.size());
    if (n != f.size()) throw DomainError("bid profile size differs from ground set");
    if (n < 2) throw NoWindowError("need at least two agents");
    std::vector<int> order(n);
    for (int k = 0; k < n; ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](int a, int c) { return rule.before(a, bids[a], c, bids[c]); });
    Perturbation p;
    p.i = order[0];
    p.j = order[1];
    if (!rule.eligible(p.j, bids[p.j])) throw NoWindowError("runner-up is below its reserve");
    p.gap = walrasian_gap(bids, p.i, p.j);
    p.gamma = gamma_ij(f, p.i, p.j);
    if (p.gamma <= kTol) throw NoDeviationError("top pair shares no capacity (gamma = 0)");
    p.delta = delta ? *delta : std::min(0.5 * p.gap, eps_target / p.gamma);
    if (!(p.delta > 0) || !(p.delta < p.gap)) throw DomainError("delta must lie strictly inside the window");
    p.increment = p.delta * p.gamma;
    return p;
}

// ---- observation / certificates -------------------------------------------

nlohmann::ordered_json to_json(const Certificate& c) {
    nlohmann::ordered_json j;
    j["bids"] = c.bids;
    if (c.added_at >= 0) {
        j["added_at"] = c.added_at;
        j["added_bid"] = c.added_bid;
        if (c.added_cap > 0) j["added_cap"] = c.added_cap;
    }
    return j;
}

namespace {

struct Extended {
    OraclePtr f;
    BidProfile bids;
    Mechanism m;
};

Extended extend(const Certificate& c, const Mechanism& m, const OraclePtr& f) {
    Extended e{f, c.bids, m};
    if (c.added_at >= 0) {
        if (c.added_cap > 0)
            e.f = with_entrant(*f, c.added_at, c.added_cap);
        else
            e.f = std::make_shared<CloneOracle>(f, c.added_at);
        e.bids.push_back(c.added_bid);
        if (!e.m.priors.empty()) e.m.priors.push_back(e.m.priors.at(c.added_at));
    }
    return e;
}

}  // namespace

AgentObservation observe(int agent, const Certificate& c, const Mechanism& m, const OraclePtr& f) {
    Extended e = extend(c, m, f);
    AgentObservation o;
    o.bid = e.bids.at(agent);
    switch (m.kind) {
        case MechanismKind::vcg:
        case MechanismKind::myerson: {
            auto rule = e.m.rule();
            o.alloc = counterfactual_allocation(agent, o.bid, e.bids, *e.f, rule);
            o.payment = archer_tardos_payment(agent, e.bids, *e.f, rule);
            break;
        }
        case MechanismKind::first_price:
            o.alloc = counterfactual_allocation(agent, o.bid, e.bids, *e.f, PriorityRule::bid());
            o.payment = o.bid * o.alloc;
            break;
        case MechanismKind::posted_price: {
            auto out = posted_price_outcome(e.bids, *e.f, m.post_price, m.seed);
            o.alloc = out.alloc[agent];
            o.payment = out.pay[agent];
            break;
        }
    }
    return o;
}

SafetyVerdict check_safe_deviation(int agent, const AgentObservation& obs, const Mechanism& m, const OraclePtr& f,
                                   const Prior& support, const BidProfile& reference, int search_budget,
                                   const std::vector<Certificate>& hints, std::uint64_t seed) {
    const int n = f->size();
    if (agent < 0 || agent >= n) throw DomainError("unknown agent");
    if (static_cast<int>(reference.size()) != n) throw DomainError("reference profile has wrong size");
    SafetyVerdict v;
    const double scale = std::max(1.0, std::abs(obs.bid * obs.alloc));
    const double tol = 1e-9 * scale;

    // No honest run charges more than the bid or serves more than f({i}).
    if (obs.payment > obs.bid * obs.alloc + tol || obs.payment < -tol || obs.alloc > f->rank({agent}) + 1e-9) {
        v.reason = "individual_rationality";
        return v;
    }

    auto in_support = [&](const Certificate& c) {
        for (int k = 0; k < n; ++k)
            if (k != agent && (c.bids[k] < support.lo || c.bids[k] > support.hi)) return false;
        return c.added_at < 0 || (c.added_bid >= support.lo && c.added_bid <= support.hi);
    };
    auto matches = [&](Certificate c) {
        c.bids[agent] = obs.bid;
        if (!in_support(c)) return false;
        ++v.evaluations;
        auto o = observe(agent, c, m, f);
        if (std::abs(o.alloc - obs.alloc) <= 1e-9 * std::max(1.0, obs.alloc) &&
            std::abs(o.payment - obs.payment) <= tol) {
            v.safe = true;
            v.certificate = c;
            return true;
        }
        return false;
    };

    for (const auto& h : hints)
        if (matches(h)) {
            v.reason = "hint";
            return v;
        }

    Certificate base{reference};
    for (int k = 0; k < n; ++k)
        if (k != agent) base.bids[k] = std::clamp(base.bids[k], support.lo, support.hi);
    base.bids[agent] = obs.bid;
    if (matches(base)) {
        v.reason = "reference";
        return v;
    }

    // One free opponent slot at level L: either an existing opponent k moved to
    // L, or an extra bidder entering at k's leaf. Below i's crossover the
    // payment is monotone and piecewise linear in L, above it constant.
    struct Slot {
        int k;
        bool added;
    };
    std::vector<Slot> slots;
    for (int k = 0; k < n; ++k)
        if (k != agent) slots.push_back({k, false});
    for (int k = 0; k < n; ++k) slots.push_back({k, true});

    for (const auto& slot : slots) {
        Certificate c = base;
        int s = slot.k;
        if (slot.added) {
            c.added_at = slot.k;
            s = n;
        }
        Extended e = extend(c, m, f);
        auto rule = m.kind == MechanismKind::myerson ? e.m.rule() : PriorityRule::bid();
        auto at = [&](double L) {
            Certificate x = c;
            if (slot.added)
                x.added_bid = L;
            else
                x.bids[slot.k] = L;
            return x;
        };
        const double floor_s = rule.floor(s);
        const double cross_i = rule.crossover(s, agent, obs.bid);

        // Region where the slot is ineligible, and where it is ahead of i.
        if (floor_s > support.lo && matches(at(support.lo))) {
            v.reason = "analytic";
            return v;
        }
        if (support.hi > cross_i && matches(at(0.5 * (std::max(cross_i, support.lo) + support.hi)))) {
            v.reason = "analytic";
            return v;
        }
        double a = std::max(support.lo, floor_s), b = std::min(support.hi, cross_i);
        if (!(a < b)) continue;
        if (!m.truthful_payment_rule()) {
            if (matches(at(a))) {
                v.reason = "analytic";
                return v;
            }
            continue;
        }
        std::vector<double> pts{a};
        for (int k = 0; k < static_cast<int>(e.bids.size()); ++k) {
            if (k == s || k == agent || !rule.eligible(k, e.bids[k])) continue;
            double t = rule.crossover(s, k, e.bids[k]);
            if (t > a && t < b) pts.push_back(t);
        }
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        pts.push_back(b - 1e-12 * std::max(1.0, b));
        std::map<std::size_t, AgentObservation> cache;
        auto eval = [&](std::size_t idx) -> const AgentObservation& {
            auto it = cache.find(idx);
            if (it == cache.end()) {
                ++v.evaluations;
                it = cache.emplace(idx, observe(agent, at(pts[idx]), m, f)).first;
            }
            return it->second;
        };
        const auto& first = eval(0);
        if (std::abs(first.alloc - obs.alloc) > 1e-9 * std::max(1.0, obs.alloc)) continue;
        std::size_t lo = 0, hi = pts.size() - 1;
        if (obs.payment < eval(lo).payment - tol || obs.payment > eval(hi).payment + tol) continue;
        while (hi - lo > 1) {
            std::size_t mid = (lo + hi) / 2;
            if (eval(mid).payment <= obs.payment)
                lo = mid;
            else
                hi = mid;
        }
        double plo = eval(lo).payment, phi = eval(hi).payment;
        double L = phi > plo ? pts[lo] + (obs.payment - plo) / (phi - plo) * (pts[hi] - pts[lo]) : pts[lo];
        if (matches(at(std::clamp(L, pts[lo], pts[hi])))) {
            v.reason = "analytic";
            return v;
        }
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> level(support.lo, support.hi);
    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<int> who(0, n - 1);
    for (int t = 0; t < search_budget; ++t) {
        Certificate c = base;
        for (int k = 0; k < n; ++k)
            if (k != agent && coin(rng)) c.bids[k] = level(rng);
        if (coin(rng)) {
            c.added_at = who(rng);
            c.added_bid = level(rng);
        }
        if (matches(c)) {
            v.reason = "search";
            return v;
        }
    }
    v.budget_exhausted = true;
    v.reason = "budget";
    return v;
}

// ---- deviations -----------------------------------------------------------

DeviationResult apply_deviation(const DeviationStrategy& s, const BidProfile& bids, const Mechanism& m,
                                const OraclePtr& f, const std::vector<double>& values) {
    const int n = f->size();
    if (static_cast<int>(bids.size()) != n) throw DomainError("bid profile size differs from ground set");
    const std::vector<double>& vals = values.empty() ? bids : values;
    DeviationResult r;
    r.honest = run_mechanism(m, bids, *f, vals);
    r.deviated = r.honest;

    switch (s.kind) {
        case DeviationStrategy::identity: break;

        case DeviationStrategy::ghost_bid: {
            double top = *std::max_element(bids.begin(), bids.end());
            double g = s.ghost_level ? *s.ghost_level : s.epsilon_scale * top;
            int target = s.ghost_target;
            if (target < 0) {
                for (int k = 0; k < n; ++k)
                    if (bids[k] < g && (target < 0 || bids[k] > bids[target])) target = k;
                if (target < 0) target = static_cast<int>(std::min_element(bids.begin(), bids.end()) - bids.begin());
            }
            if (target >= n) throw DomainError("ghost target out of range");
            Certificate c{bids, target, g, s.ghost_units};
            Extended e = extend(c, m, f);
            std::vector<double> vals2 = vals;
            vals2.push_back(0.0);
            MarketOutcome out;
            if (m.kind == MechanismKind::posted_price) {
                // The operator's own phantom is served first.
                std::vector<int> order;
                if (g >= m.post_price) order.push_back(n);
                for (int k : posted_price_order(bids, m.post_price, m.seed)) order.push_back(k);
                out.alloc = allocate_in_order(order, *e.f);
                out.pay.resize(out.alloc.size());
                for (std::size_t k = 0; k < out.alloc.size(); ++k) out.pay[k] = m.post_price * out.alloc[k];
            } else {
                out = run_mechanism(e.m, e.bids, *e.f, vals2);
                r.hint = c;
            }
            r.deviated.alloc.assign(out.alloc.begin(), out.alloc.begin() + n);
            r.deviated.pay.assign(out.pay.begin(), out.pay.begin() + n);
            r.deviated.undelivered = out.alloc[n];
            break;
        }

        case DeviationStrategy::payment_perturb: {
            if (!m.truthful_payment_rule()) throw ConfigError("payment perturbation needs a VCG or Myerson payment rule");
            if (s.i < 0 || s.i >= n || s.j < 0 || s.j >= n || s.i == s.j) throw ConfigError("bad perturbation pair");
            BidProfile shifted = bids;
            shifted[s.j] += s.delta;
            r.deviated.pay[s.i] = archer_tardos_payment(s.i, shifted, *f, m.rule());
            r.hint = Certificate{shifted};
            break;
        }

        case DeviationStrategy::capacity_misreport: {
            auto scaled = std::make_shared<ScaledOracle>(f, s.shrink_factor);
            r.deviated = run_mechanism(m, bids, *scaled, vals);
            break;
        }

        case DeviationStrategy::posted_price_inflate: {
            if (m.kind != MechanismKind::posted_price) throw ConfigError("price inflation needs the posted-price mechanism");
            double charged = m.post_price * (1.0 + s.markup);
            for (int k = 0; k < n; ++k) r.deviated.pay[k] = std::min(bids[k], charged) * r.deviated.alloc[k];
            break;
        }

        case DeviationStrategy::discriminate: {
            PriorityRule rule = m.kind == MechanismKind::myerson ? m.rule() : PriorityRule::bid();
            rule.favored = s.favored;
            if (m.kind == MechanismKind::posted_price) {
                auto order = posted_price_order(bids, m.post_price, m.seed);
                std::stable_partition(order.begin(), order.end(), [&](int k) { return rule.is_favored(k); });
                r.deviated.alloc = allocate_in_order(order, *f);
                for (int k = 0; k < n; ++k) r.deviated.pay[k] = m.post_price * r.deviated.alloc[k];
            } else {
                r.deviated.alloc = edmonds_greedy(bids, *f, rule);
                for (int k = 0; k < n; ++k) {
                    if (m.kind == MechanismKind::first_price)
                        r.deviated.pay[k] = bids[k] * r.deviated.alloc[k];
                    else
                        r.deviated.pay[k] = r.deviated.alloc[k] > 0 ? archer_tardos_payment(k, bids, *f, rule) : 0.0;
                }
            }
            break;
        }
    }
    settle(r.deviated, vals);
    r.operator_surplus = r.deviated.revenue - r.honest.revenue;
    return r;
}

void certify(DeviationResult& r, const BidProfile& bids, const Mechanism& m, const OraclePtr& f,
             const Prior& support, int search_budget) {
    r.safety.clear();
    std::vector<Certificate> hints;
    if (r.hint) hints.push_back(*r.hint);
    for (int k = 0; k < f->size(); ++k) {
        AgentObservation obs{bids[k], r.deviated.alloc[k], r.deviated.pay[k]};
        r.safety.push_back(check_safe_deviation(k, obs, m, f, support, bids, search_budget, hints, 1000003ULL * k + 7));
    }
}

nlohmann::ordered_json to_json(const DeviationResult& r) {
    nlohmann::ordered_json j;
    j["honest"] = to_json(r.honest);
    j["deviated"] = to_json(r.deviated);
    j["operator_surplus"] = r.operator_surplus;
    auto safety = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < r.safety.size(); ++k) {
        nlohmann::ordered_json s;
        s["agent"] = k;
        s["safe"] = r.safety[k].safe;
        s["budget_exhausted"] = r.safety[k].budget_exhausted;
        s["reason"] = r.safety[k].reason;
        if (r.safety[k].certificate) s["certificate"] = to_json(*r.safety[k].certificate);
        safety.push_back(s);
    }
    j["safety"] = safety;
    return j;
}

}  // namespace polycred
