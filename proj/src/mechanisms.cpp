#include "polycred/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "polycred/errors.hpp"

namespace polycred {

void require_uniform(const std::vector<Prior>& priors) {
    for (const auto& p : priors) {
        if (p.family != "uniform")
            throw UnsupportedPriorError("prior family '" + p.family + "' needs ironing; only uniform is supported");
        if (!(p.lo > 0) || !(p.hi > p.lo)) throw DomainError("uniform prior needs 0 < lo < hi");
    }
}

// ---- priority -------------------------------------------------------------

PriorityRule PriorityRule::virtual_value(std::vector<Prior> priors) {
    require_uniform(priors);
    PriorityRule r;
    r.kind = by_virtual_value;
    r.priors = std::move(priors);
    return r;
}

double PriorityRule::level(int i, double b) const {
    return kind == by_bid ? b : priors.at(i).virtual_value(b);
}

double PriorityRule::floor(int i) const { return kind == by_bid ? 0.0 : priors.at(i).reserve(); }

bool PriorityRule::eligible(int i, double b) const { return b >= floor(i); }

bool PriorityRule::is_favored(int i) const {
    return std::find(favored.begin(), favored.end(), i) != favored.end();
}

bool PriorityRule::before(int a, double ba, int c, double bc) const {
    bool fa = is_favored(a), fc = is_favored(c);
    if (fa != fc) return fa;
    double la = level(a, ba), lc = level(c, bc);
    if (la != lc) return la > lc;
    return a < c;
}

double PriorityRule::crossover(int i, int k, double bk) const {
    bool fi = is_favored(i), fk = is_favored(k);
    if (fk && !fi) return kInf;
    if (fi && !fk) return -kInf;
    return kind == by_bid ? bk : priors.at(i).bid_for(priors.at(k).virtual_value(bk));
}

// ---- outcomes -------------------------------------------------------------

double MarketOutcome::total_alloc() const { return std::accumulate(alloc.begin(), alloc.end(), 0.0); }

void settle(MarketOutcome& o, const std::vector<double>& values) {
    o.welfare = 0.0;
    for (std::size_t i = 0; i < o.alloc.size(); ++i) o.welfare += values[i] * o.alloc[i];
    o.revenue = std::accumulate(o.pay.begin(), o.pay.end(), 0.0);
}

nlohmann::ordered_json to_json(const MarketOutcome& o) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json alloc = nlohmann::ordered_json::object(), pay = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < o.alloc.size(); ++i) {
        alloc[std::to_string(i)] = o.alloc[i];
        pay[std::to_string(i)] = o.pay[i];
    }
    j["alloc"] = alloc;
    j["pay"] = pay;
    j["welfare"] = o.welfare;
    j["revenue"] = o.revenue;
    if (o.undelivered != 0.0) j["undelivered"] = o.undelivered;
    return j;
}

namespace {

void check_bids(const BidProfile& bids, const RankOracle& f) {
    if (static_cast<int>(bids.size()) != f.size()) throw DomainError("bid profile size differs from ground set");
    for (double b : bids)
        if (!(b >= 0)) throw DomainError("bids must be non-negative");
}

const std::vector<double>& values_or_bids(const std::vector<double>& values, const BidProfile& bids) {
    if (values.empty()) return bids;
    if (values.size() != bids.size()) throw DomainError("values and bids differ in size");
    return values;
}

}  // namespace

std::vector<double> allocate_in_order(const std::vector<int>& order, const RankOracle& f) {
    std::vector<double> x(f.size(), 0.0);
    auto st = f.start();
    for (int a : order) {
        double before = st->value();
        x[a] = std::max(0.0, st->probe(a) - before);
        st->add(a);
    }
    return x;
}

std::vector<int> priority_order(const BidProfile& bids, const PriorityRule& rule) {
    std::vector<int> order;
    for (int i = 0; i < static_cast<int>(bids.size()); ++i)
        if (rule.eligible(i, bids[i])) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](int a, int c) { return rule.before(a, bids[a], c, bids[c]); });
    return order;
}

std::vector<double> edmonds_greedy(const BidProfile& bids, const RankOracle& f, const PriorityRule& rule) {
    check_bids(bids, f);
    return allocate_in_order(priority_order(bids, rule), f);
}

double counterfactual_allocation(int i, double z, const BidProfile& bids, const RankOracle& f,
                                 const PriorityRule& rule) {
    if (!rule.eligible(i, z)) return 0.0;
    auto st = f.start();
    for (int k = 0; k < static_cast<int>(bids.size()); ++k)
        if (k != i && rule.eligible(k, bids[k]) && rule.before(k, bids[k], i, z)) st->add(k);
    return std::max(0.0, st->probe(i) - st->value());
}

double archer_tardos_payment(int i, const BidProfile& bids, const RankOracle& f, const PriorityRule& rule) {
    check_bids(bids, f);
    const double b = bids[i];
    if (!rule.eligible(i, b)) return 0.0;
    const double lo = rule.floor(i);

    struct Threshold {
        double t;
        int k;
    };
    std::vector<Threshold> th;
    for (int k = 0; k < static_cast<int>(bids.size()); ++k)
        if (k != i && rule.eligible(k, bids[k])) th.push_back({rule.crossover(i, k, bids[k]), k});
    std::sort(th.begin(), th.end(), [](const Threshold& a, const Threshold& c) {
        return a.t != c.t ? a.t > c.t : a.k < c.k;
    });

    // Walk own-bid space downwards from b; each crossed threshold puts one
    // more agent ahead of i.
    auto st = f.start();
    std::size_t idx = 0;
    while (idx < th.size() && th[idx].t >= b) st->add(th[idx++].k);
    double upper = b, integral = 0.0, prev = kInf;
    while (true) {
        double lower = idx < th.size() ? std::max(th[idx].t, lo) : lo;
        if (lower < upper) {
            double x = std::max(0.0, st->probe(i) - st->value());
            if (x > prev + kTol * std::max(1.0, prev))
                throw ConsistencyError("allocation curve of agent " + std::to_string(i) + " is not monotone");
            integral += x * (upper - lower);
            prev = x;
            upper = lower;
        }
        if (idx >= th.size() || th[idx].t <= lo) break;
        st->add(th[idx++].k);
    }
    double xb = counterfactual_allocation(i, b, bids, f, rule);
    return b * xb - integral;
}

MarketOutcome vcg_outcome(const BidProfile& bids, const RankOracle& f, const std::vector<double>& values) {
    check_bids(bids, f);
    const int n = f.size();
    MarketOutcome o;
    auto order = priority_order(bids, PriorityRule::bid());
    o.alloc = allocate_in_order(order, f);
    double w = 0.0;
    for (int k = 0; k < n; ++k) w += bids[k] * o.alloc[k];
    o.pay.assign(n, 0.0);
    // Externality: best welfare of the others without i, minus what they get
    // with i. The greedy prefix ahead of i is shared, and an agent with no
    // allocation displaces nobody.
    auto prefix = f.start();
    double prefix_welfare = 0.0;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const int i = order[pos];
        if (o.alloc[i] > 0) {
            auto st = prefix->clone();
            double without = prefix_welfare;
            for (std::size_t q = pos + 1; q < order.size(); ++q) {
                const int a = order[q];
                double before = st->value();
                without += bids[a] * std::max(0.0, st->probe(a) - before);
                st->add(a);
            }
            o.pay[i] = std::max(0.0, without - (w - bids[i] * o.alloc[i]));
            if (o.pay[i] < 1e-12 * std::max(1.0, w)) o.pay[i] = 0.0;
        }
        prefix_welfare += bids[i] * o.alloc[i];
        prefix->add(i);
    }
    settle(o, values_or_bids(values, bids));
    return o;
}

MarketOutcome myerson_outcome(const BidProfile& bids, const RankOracle& f, const std::vector<Prior>& priors,
                              const std::vector<double>& values) {
    check_bids(bids, f);
    if (static_cast<int>(priors.size()) != f.size()) throw DomainError("one prior per agent required");
    auto rule = PriorityRule::virtual_value(priors);
    MarketOutcome o;
    o.alloc = edmonds_greedy(bids, f, rule);
    o.pay.assign(f.size(), 0.0);
    for (int i = 0; i < f.size(); ++i)
        if (o.alloc[i] > 0) o.pay[i] = archer_tardos_payment(i, bids, f, rule);
    settle(o, values_or_bids(values, bids));
    return o;
}

MarketOutcome first_price_outcome(const BidProfile& bids, const RankOracle& f, const std::vector<double>& values) {
    check_bids(bids, f);
    MarketOutcome o;
    o.alloc = edmonds_greedy(bids, f, PriorityRule::bid());
    o.pay.resize(o.alloc.size());
    for (std::size_t i = 0; i < o.alloc.size(); ++i) o.pay[i] = bids[i] * o.alloc[i];
    settle(o, values_or_bids(values, bids));
    return o;
}

std::vector<int> posted_price_order(const BidProfile& bids, double post_price, std::uint64_t seed) {
    if (!(post_price >= 0)) throw DomainError("posted price must be non-negative");
    std::vector<int> order;
    for (int i = 0; i < static_cast<int>(bids.size()); ++i)
        if (bids[i] >= post_price) order.push_back(i);
    std::mt19937_64 rng(seed);
    // Fisher-Yates with our own index draws so the order is library-independent.
    for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng() % k]);
    return order;
}

MarketOutcome posted_price_outcome(const BidProfile& bids, const RankOracle& f, double post_price,
                                   std::uint64_t seed, const std::vector<double>& values) {
    check_bids(bids, f);
    MarketOutcome o;
    o.alloc = allocate_in_order(posted_price_order(bids, post_price, seed), f);
    o.pay.resize(o.alloc.size());
    for (std::size_t i = 0; i < o.alloc.size(); ++i) o.pay[i] = post_price * o.alloc[i];
    settle(o, values_or_bids(values, bids));
    return o;
}

std::string to_string(MechanismKind k) {
    switch (k) {
        case MechanismKind::vcg: return "vcg";
        case MechanismKind::myerson: return "myerson";
        case MechanismKind::first_price: return "first_price";
        case MechanismKind::posted_price: return "posted_price";
    }
    return "vcg";
}

MechanismKind mechanism_from_string(const std::string& s) {
    if (s == "vcg") return MechanismKind::vcg;
    if (s == "myerson") return MechanismKind::myerson;
    if (s == "first_price") return MechanismKind::first_price;
    if (s == "posted_price") return MechanismKind::posted_price;
    throw ConfigError("unknown mechanism: " + s);
}

PriorityRule Mechanism::rule() const {
    return kind == MechanismKind::myerson ? PriorityRule::virtual_value(priors) : PriorityRule::bid();
}

MarketOutcome run_mechanism(const Mechanism& m, const BidProfile& bids, const RankOracle& f,
                            const std::vector<double>& values) {
    switch (m.kind) {
        case MechanismKind::vcg: return vcg_outcome(bids, f, values);
        case MechanismKind::myerson: return myerson_outcome(bids, f, m.priors, values);
        case MechanismKind::first_price: return first_price_outcome(bids, f, values);
        case MechanismKind::posted_price: return posted_price_outcome(bids, f, m.post_price, m.seed, values);
    }
    throw ConfigError("unknown mechanism");
}

}  // namespace polycred
