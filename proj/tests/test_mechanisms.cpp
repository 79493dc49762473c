#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "polycred/errors.hpp"
#include "polycred/mechanisms.hpp"

using namespace polycred;

namespace {

std::vector<double> random_bids(std::mt19937_64& rng, int n, double lo = 1, double hi = 11) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> b(n);
    for (auto& x : b) x = u(rng);
    return b;
}

}  // namespace

TEST(Greedy, WorkedExample) {
    auto f = make_oracle(fx::worked_example());
    auto x = edmonds_greedy({10, 5}, *f, PriorityRule::bid());
    EXPECT_EQ(x, (std::vector<double>{2, 1}));
}

TEST(Greedy, SingleAgentGetsSingletonRank) {
    auto f = explicit_oracle(1, {0, 3.5});
    EXPECT_DOUBLE_EQ(edmonds_greedy({2}, *f, PriorityRule::bid())[0], 3.5);
}

TEST(Greedy, TiesGoToLowerId) {
    TopologyParams p;
    p.n = 3;
    auto f = make_oracle(generate_topology(TopologyClass::single_edge, p));
    auto x = edmonds_greedy({4, 7, 7}, *f, PriorityRule::bid());
    EXPECT_EQ(x, (std::vector<double>{0, 1, 0}));
}

TEST(Greedy, MatchesGridEnumeration) {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 25; ++t) {
        auto d = fx::random_instance(rng, t, 4);
        if (d.num_agents() > 5) continue;
        auto f = make_oracle(d);
        auto b = random_bids(rng, f->size());
        auto x = edmonds_greedy(b, *f, PriorityRule::bid());
        double w = 0.0;
        for (int i = 0; i < f->size(); ++i) w += b[i] * x[i];
        EXPECT_NEAR(w, fx::grid_max(*f, b, 0.25), 1e-9) << "trial " << t;
        EXPECT_TRUE(fx::feasible(*f, x));
    }
}

TEST(Greedy, AllocationMonotoneInOwnBid) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 30; ++t) {
        auto f = make_oracle(fx::random_instance(rng, t));
        auto b = random_bids(rng, f->size());
        int i = static_cast<int>(rng() % f->size());
        double prev = -1;
        for (double z = 0; z <= 12; z += 0.05) {
            double x = fx::alloc_at(*f, b, i, z);
            EXPECT_GE(x, prev - 1e-12);
            prev = x;
        }
    }
}

TEST(ArcherTardos, WorkedExample) {
    auto f = make_oracle(fx::worked_example());
    EXPECT_NEAR(archer_tardos_payment(0, {10, 5}, *f, PriorityRule::bid()), 5, 1e-12);
    EXPECT_NEAR(archer_tardos_payment(1, {10, 5}, *f, PriorityRule::bid()), 0, 1e-12);
}

TEST(ArcherTardos, LosingAgentPaysNothing) {
    TopologyParams p;
    p.n = 3;
    auto f = make_oracle(generate_topology(TopologyClass::single_edge, p));
    EXPECT_DOUBLE_EQ(archer_tardos_payment(2, {9, 8, 3}, *f, PriorityRule::bid()), 0);
}

TEST(ArcherTardos, MatchesDenseQuadrature) {
    std::mt19937_64 rng(99);
    for (int t = 0; t < 30; ++t) {
        auto f = make_oracle(fx::random_instance(rng, t));
        auto b = random_bids(rng, f->size());
        for (int i = 0; i < f->size(); ++i) {
            double xb = fx::alloc_at(*f, b, i, b[i]);
            double integral = fx::quadrature([&](double z) { return fx::alloc_at(*f, b, i, z); }, 0, b[i], 10000);
            double want = b[i] * xb - integral;
            EXPECT_NEAR(archer_tardos_payment(i, b, *f, PriorityRule::bid()), want, 1e-6 * b[i])
                << "trial " << t << " agent " << i;
        }
    }
}

TEST(Vcg, WorkedExample) {
    auto f = make_oracle(fx::worked_example());
    auto o = vcg_outcome({10, 5}, *f);
    EXPECT_EQ(o.alloc, (std::vector<double>{2, 1}));
    EXPECT_NEAR(o.pay[0], 5, 1e-12);
    EXPECT_NEAR(o.pay[1], 0, 1e-12);
    EXPECT_NEAR(o.revenue, 5, 1e-12);
    EXPECT_NEAR(o.welfare, 25, 1e-12);
}

TEST(Vcg, OneAgentPaysZero) {
    auto f = explicit_oracle(1, {0, 2});
    EXPECT_DOUBLE_EQ(vcg_outcome({7}, *f).pay[0], 0);
}

TEST(Vcg, ExternalityEqualsArcherTardos) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 40; ++t) {
        auto f = make_oracle(fx::random_instance(rng, t));
        auto b = random_bids(rng, f->size());
        auto o = vcg_outcome(b, *f);
        for (int i = 0; i < f->size(); ++i)
            EXPECT_NEAR(o.pay[i], archer_tardos_payment(i, b, *f, PriorityRule::bid()), 1e-9);
        EXPECT_TRUE(fx::feasible(*f, o.alloc));
        for (int i = 0; i < f->size(); ++i) {
            EXPECT_GE(o.pay[i], 0);
            EXPECT_LE(o.pay[i], b[i] * o.alloc[i] + 1e-9);
        }
    }
}

TEST(Myerson, SymmetricPriorKeepsBidOrder) {
    auto f = make_oracle(fx::worked_example());
    std::vector<Prior> pri(2, Prior{1, 11});
    auto m = myerson_outcome({10, 5.6}, *f, pri);
    auto v = vcg_outcome({10, 5.6}, *f);
    EXPECT_EQ(m.alloc, v.alloc);
}

TEST(Myerson, EveryoneBelowReserve) {
    auto f = make_oracle(fx::worked_example());
    std::vector<Prior> pri(2, Prior{1, 11});
    auto m = myerson_outcome({5, 4}, *f, pri);
    EXPECT_EQ(m.alloc, (std::vector<double>{0, 0}));
    EXPECT_EQ(m.revenue, 0);
}

TEST(Myerson, ReserveIsPaidByLoneWinner) {
    auto f = explicit_oracle(1, {0, 1});
    auto m = myerson_outcome({9}, *f, {Prior{1, 11}});
    EXPECT_NEAR(m.pay[0], 5.5, 1e-12);
}

TEST(Myerson, AsymmetricPriorsFollowVirtualValues) {
    // Unif[1,5] vs Unif[1,20]: bids 4.5 and 11 have virtual values 4 and 2.
    TopologyParams p;
    p.n = 2;
    auto f = make_oracle(generate_topology(TopologyClass::single_edge, p));
    std::vector<Prior> pri{{1, 5}, {1, 20}};
    auto m = myerson_outcome({4.5, 11}, *f, pri);
    EXPECT_EQ(m.alloc, (std::vector<double>{1, 0}));
    // Brute force over the grid with virtual-value weights.
    std::vector<double> phi{pri[0].virtual_value(4.5), pri[1].virtual_value(11)};
    EXPECT_NEAR(phi[0] * m.alloc[0] + phi[1] * m.alloc[1], fx::grid_max(*f, phi, 0.25), 1e-12);
    // Winner pays the bid at which its virtual value meets the loser's (or the reserve).
    EXPECT_NEAR(m.pay[0], std::max(pri[0].reserve(), pri[0].bid_for(phi[1])), 1e-12);
}

TEST(Myerson, RandomAsymmetricMatchesVirtualWelfareGrid) {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 15; ++t) {
        auto d = fx::random_instance(rng, t, 3);
        if (d.num_agents() > 5) continue;
        auto f = make_oracle(d);
        std::vector<Prior> pri(f->size());
        for (auto& pr : pri) pr.hi = 5 + static_cast<double>(rng() % 16);
        auto b = random_bids(rng, f->size(), 1, 20);
        for (int i = 0; i < f->size(); ++i) b[i] = std::min(b[i], pri[i].hi);
        auto m = myerson_outcome(b, *f, pri);
        std::vector<double> w(f->size());
        for (int i = 0; i < f->size(); ++i)
            w[i] = b[i] >= pri[i].reserve() ? pri[i].virtual_value(b[i]) : 0.0;
        double got = 0.0;
        for (int i = 0; i < f->size(); ++i) got += w[i] * m.alloc[i];
        EXPECT_NEAR(got, fx::grid_max(*f, w, 0.25), 1e-9);
    }
}

TEST(Myerson, NonUniformPriorRejected) {
    auto f = make_oracle(fx::worked_example());
    std::vector<Prior> pri(2, Prior{1, 11});
    pri[1].family = "exponential";
    EXPECT_THROW(myerson_outcome({10, 5}, *f, pri), UnsupportedPriorError);
}

TEST(FirstPrice, PayAsBid) {
    auto f = make_oracle(fx::worked_example());
    auto o = first_price_outcome({10, 5}, *f);
    EXPECT_EQ(o.alloc, (std::vector<double>{2, 1}));
    EXPECT_EQ(o.pay, (std::vector<double>{20, 5}));
    auto z = first_price_outcome({0, 0}, *f);
    EXPECT_EQ(z.revenue, 0);
}

TEST(FirstPrice, SharesVcgAllocator) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 20; ++t) {
        auto f = make_oracle(fx::random_instance(rng, t));
        auto b = random_bids(rng, f->size());
        EXPECT_EQ(first_price_outcome(b, *f).alloc, vcg_outcome(b, *f).alloc);
    }
}

TEST(PostedPrice, Basics) {
    auto f = make_oracle(fx::worked_example());
    auto zero = posted_price_outcome({10, 5}, *f, 0, 1);
    EXPECT_EQ(zero.revenue, 0);
    EXPECT_NEAR(zero.total_alloc(), 3, 1e-12);
    auto none = posted_price_outcome({10, 5}, *f, 11, 1);
    EXPECT_EQ(none.total_alloc(), 0);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto o = posted_price_outcome({10, 5}, *f, 4, seed);
        EXPECT_NEAR(o.total_alloc(), 3, 1e-12);
        EXPECT_NEAR(o.revenue, 12, 1e-12);
    }
}

TEST(PostedPrice, SeedDeterminesOrder) {
    std::vector<double> b(10, 5.0);
    EXPECT_EQ(posted_price_order(b, 1, 42), posted_price_order(b, 1, 42));
    EXPECT_NE(posted_price_order(b, 1, 42), posted_price_order(b, 1, 43));
}

TEST(Clinching, UnitCapacity) {
    TopologyParams p;
    p.n = 2;
    auto f = make_oracle(generate_topology(TopologyClass::single_edge, p));
    auto r = clinching_auction({10, 5}, *f, 0.01);
    EXPECT_NEAR(r.outcome.alloc[0], 1, 1e-12);
    EXPECT_NEAR(r.outcome.alloc[1], 0, 1e-12);
    EXPECT_NEAR(r.outcome.pay[0], 5, 0.01);
}

TEST(Clinching, SingleAgentAtZero) {
    auto f = explicit_oracle(1, {0, 2});
    auto r = clinching_auction({3}, *f, 0.01);
    EXPECT_DOUBLE_EQ(r.outcome.alloc[0], 2);
    EXPECT_DOUBLE_EQ(r.outcome.pay[0], 0);
}

TEST(Clinching, WorkedExampleMatchesVcg) {
    auto f = make_oracle(fx::worked_example());
    auto r = clinching_auction({10, 5}, *f, 0.01);
    auto v = vcg_outcome({10, 5}, *f);
    for (int i = 0; i < 2; ++i) {
        EXPECT_NEAR(r.outcome.alloc[i], v.alloc[i], 1e-12);
        EXPECT_LE(std::abs(r.outcome.pay[i] - v.pay[i]), r.outcome.alloc[i] * 0.01 + 1e-12);
    }
}

TEST(Clinching, BadClockIsConfigError) {
    auto f = make_oracle(fx::worked_example());
    EXPECT_THROW(clinching_auction({10, 5}, *f, 0), ConfigError);
}

TEST(Clinching, AllocationsFeasibleAndIndividuallyRational) {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 40; ++t) {
        auto f = make_oracle(fx::random_instance(rng, t));
        auto v = random_bids(rng, f->size());
        auto r = clinching_auction(v, *f, 0.05);
        EXPECT_TRUE(fx::feasible(*f, r.outcome.alloc)) << "trial " << t;
        for (int i = 0; i < f->size(); ++i) EXPECT_LE(r.outcome.pay[i], v[i] * r.outcome.alloc[i] + 1e-9);
    }
}

TEST(Clinching, TranscriptRoundTripsThroughJson) {
    auto f = make_oracle(fx::worked_example());
    auto r = clinching_auction({10, 5}, *f, 0.5);
    auto j = to_json(r.transcript);
    auto back = transcript_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(to_json(back).dump(), j.dump());
    EXPECT_THROW(transcript_from_json(nlohmann::json::parse(R"({"events":[]})")), StructureError);
}
