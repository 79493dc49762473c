#include <algorithm>
#include <cmath>

#include "polycred/digest.hpp"
#include "polycred/errors.hpp"
#include "polycred/mechanisms.hpp"

namespace polycred {

namespace {

const char* type_name(ClinchEvent::Type t) {
    switch (t) {
        case ClinchEvent::price_step: return "price_step";
        case ClinchEvent::demand: return "demand";
        case ClinchEvent::rank_announce: return "rank_announce";
        case ClinchEvent::clinch: return "clinch";
    }
    return "?";
}

ClinchEvent::Type type_from(const std::string& s) {
    if (s == "price_step") return ClinchEvent::price_step;
    if (s == "demand") return ClinchEvent::demand;
    if (s == "rank_announce") return ClinchEvent::rank_announce;
    if (s == "clinch") return ClinchEvent::clinch;
    throw StructureError("unknown transcript event type: " + s);
}

}  // namespace

nlohmann::ordered_json to_json(const ClinchTranscript& t) {
    nlohmann::ordered_json j;
    j["participants"] = t.participants;
    j["commitment_root"] = t.commitment_root;
    j["clock_step"] = t.clock_step;
    auto events = nlohmann::ordered_json::array();
    for (const auto& e : t.events) {
        nlohmann::ordered_json ev;
        ev["type"] = type_name(e.type);
        ev["step"] = e.step;
        ev["price"] = e.price;
        switch (e.type) {
            case ClinchEvent::price_step: break;
            case ClinchEvent::demand:
                ev["agent"] = e.agent;
                ev["quantity"] = e.quantity;
                break;
            case ClinchEvent::rank_announce:
                ev["subset"] = e.subset;
                ev["subset_digest"] = e.subset_digest;
                ev["value"] = e.value;
                ev["auth_tag"] = e.auth_tag;
                break;
            case ClinchEvent::clinch:
                ev["agent"] = e.agent;
                ev["quantity"] = e.quantity;
                break;
        }
        events.push_back(ev);
    }
    j["events"] = events;
    return j;
}

ClinchTranscript transcript_from_json(const nlohmann::json& j) {
    ClinchTranscript t;
    try {
        t.participants = j.at("participants").get<std::vector<int>>();
        t.commitment_root = j.at("commitment_root").get<std::string>();
        t.clock_step = j.at("clock_step").get<double>();
        for (const auto& ev : j.at("events")) {
            ClinchEvent e;
            e.type = type_from(ev.at("type").get<std::string>());
            e.step = ev.at("step").get<int>();
            e.price = ev.at("price").get<double>();
            if (e.type == ClinchEvent::demand || e.type == ClinchEvent::clinch) {
                e.agent = ev.at("agent").get<int>();
                e.quantity = ev.at("quantity").get<double>();
            } else if (e.type == ClinchEvent::rank_announce) {
                e.subset = ev.at("subset").get<Subset>();
                e.subset_digest = ev.at("subset_digest").get<std::string>();
                e.value = ev.at("value").get<double>();
                e.auth_tag = ev.at("auth_tag").get<std::string>();
            }
            t.events.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw StructureError(std::string("malformed transcript: ") + e.what());
    }
    return t;
}

ClinchResult clinching_auction(const std::vector<double>& values, const RankOracle& f, double clock_step) {
    if (!(clock_step > 0)) throw ConfigError("clock step must be positive");
    const int n = f.size();
    if (static_cast<int>(values.size()) != n) throw DomainError("one value per agent required");

    ClinchResult res;
    auto& tr = res.transcript;
    auto& out = res.outcome;
    tr.clock_step = clock_step;
    tr.commitment_root = commitment_root(f);
    for (int i = 0; i < n; ++i) tr.participants.push_back(i);
    out.alloc.assign(n, 0.0);
    out.pay.assign(n, 0.0);

    std::vector<double> demand(n);
    for (int i = 0; i < n; ++i) demand[i] = f.rank({i});
    std::vector<char> active(n, 0);

    auto announce = [&](int step, double price, const Subset& s, double v) {
        ClinchEvent e;
        e.type = ClinchEvent::rank_announce;
        e.step = step;
        e.price = price;
        e.subset = s;
        e.subset_digest = subset_digest(s);
        e.value = v;
        e.auth_tag = auth_tag(s, v, tr.commitment_root);
        tr.events.push_back(std::move(e));
    };
    auto clinch = [&](int step, double price, int i, double q) {
        out.alloc[i] += q;
        out.pay[i] += q * price;
        ClinchEvent e;
        e.type = ClinchEvent::clinch;
        e.step = step;
        e.price = price;
        e.agent = i;
        e.quantity = q;
        tr.events.push_back(e);
    };

    double supply = 0.0;
    std::vector<double> residual(n, 0.0);
    for (int step = 0;; ++step) {
        const double price = step * clock_step;
        ClinchEvent tick;
        tick.step = step;
        tick.price = price;
        tr.events.push_back(tick);
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            bool wants = price < values[i] && demand[i] > 0;
            if (wants != static_cast<bool>(active[i])) {
                active[i] = wants;
                changed = true;
                ClinchEvent e;
                e.type = ClinchEvent::demand;
                e.step = step;
                e.price = price;
                e.agent = i;
                e.quantity = wants ? demand[i] : 0.0;
                tr.events.push_back(e);
            }
        }
        Subset D;
        for (int i = 0; i < n; ++i)
            if (active[i]) D.push_back(i);
        if (changed || step == 0) {
            supply = f.rank(D);
            announce(step, price, D, supply);
            for (std::size_t k = 0; k < D.size(); ++k) {
                Subset rest = D;
                rest.erase(rest.begin() + k);
                double v = f.rank(rest);
                residual[D[k]] = supply - v;
                announce(step, price, rest, v);
            }
        }
        double total = 0.0;
        for (int i : D) total += demand[i];
        if (total <= supply + kTol) {
            for (int i : D) {
                double q = demand[i] - out.alloc[i];
                if (q > kTol) clinch(step, price, i, q);
            }
            break;
        }
        for (int i : D) {
            double target = std::min(demand[i], std::max(0.0, residual[i]));
            double q = target - out.alloc[i];
            if (q > kTol) clinch(step, price, i, q);
        }
    }
    settle(out, values);
    return res;
}

}  // namespace polycred
