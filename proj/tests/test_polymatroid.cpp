#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "polycred/errors.hpp"
#include "polycred/polymatroid.hpp"

using namespace polycred;

TEST(Rank, WorkedExample) {
    auto f = make_oracle(fx::worked_example());
    EXPECT_EQ(f->evaluator(), "tree_cut");
    EXPECT_DOUBLE_EQ(f->rank({0}), 2);
    EXPECT_DOUBLE_EQ(f->rank({1}), 2);
    EXPECT_DOUBLE_EQ(f->rank({0, 1}), 3);
    EXPECT_DOUBLE_EQ(f->rank({}), 0);
}

TEST(Rank, UnknownAgentIsDomainError) {
    auto f = make_oracle(fx::worked_example());
    EXPECT_THROW(f->rank({2}), DomainError);
    EXPECT_THROW(f->rank({-1}), DomainError);
}

TEST(Rank, AllEvaluatorsMatchBruteForceCut) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 60; ++trial) {
        auto d = fx::random_dag(rng, 8, 4);
        auto flow = make_oracle(d, Evaluator::maxflow);
        auto any = make_oracle(d);
        for (std::uint64_t m = 0; m < 16; ++m) {
            auto s = fx::bits(m, 4);
            double want = fx::brute_min_cut(d, s);
            EXPECT_NEAR(flow->rank(s), want, 1e-9) << "trial " << trial;
            EXPECT_NEAR(any->rank(s), want, 1e-9) << "trial " << trial << " " << any->evaluator();
        }
    }
}

TEST(Rank, SpMatchesMaxflowOnRandomSpInstances) {
    int checked = 0;
    for (std::uint64_t seed = 1; checked < 100; ++seed) {
        TopologyParams p;
        p.n = 2 + static_cast<int>(seed % 7);
        p.h = 3;
        p.seed = seed;
        auto d = generate_topology(TopologyClass::sp, p);
        auto sp = make_oracle(d, Evaluator::sp_compositional);
        auto flow = make_oracle(d, Evaluator::maxflow);
        for (std::uint64_t m = 0; m < (1u << p.n); ++m) {
            auto s = fx::bits(m, p.n);
            ASSERT_NEAR(sp->rank(s), flow->rank(s), 1e-9) << "seed " << seed;
        }
        ++checked;
    }
}

TEST(Rank, WheatstoneIsNotSp) {
    // Bridge 2->3 between the two branches 1->{2,3}->4.
    CapacityDag d;
    d.cap = {kInf, kInf, 1, 1, kInf};
    d.edges = {{1, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}, {4, 0}};
    d.leaves = {1};
    d.sink = 0;
    EXPECT_EQ(SpOracle::recognize(d), nullptr);
    EXPECT_THROW(make_oracle(d, Evaluator::sp_compositional), StructureError);
    EXPECT_EQ(make_oracle(d)->evaluator(), "maxflow");
}

TEST(Rank, TreeGreedyStateMatchesRank) {
    TopologyParams p;
    p.h = 3;
    p.beta = 2;
    auto f = make_oracle(generate_topology(TopologyClass::tree, p));
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> order(f->size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        auto st = f->start();
        Subset members;
        for (int a : order) {
            Subset with = members;
            with.push_back(a);
            EXPECT_DOUBLE_EQ(st->probe(a), f->rank(with));
            st->add(a);
            members.push_back(a);
            EXPECT_DOUBLE_EQ(st->value(), f->rank(members));
        }
    }
}

TEST(Rank, FlowStateMatchesRank) {
    TopologyParams p;
    p.n = 5;
    auto f = make_oracle(generate_topology(TopologyClass::general, p));
    ASSERT_EQ(f->evaluator(), "maxflow");
    auto st = f->start();
    Subset members;
    for (int a : {3, 1, 4, 0, 2}) {
        Subset with = members;
        with.push_back(a);
        EXPECT_NEAR(st->probe(a), f->rank(with), 1e-9);
        st->add(a);
        members.push_back(a);
        EXPECT_NEAR(st->value(), f->rank(members), 1e-9);
    }
}

TEST(Rank, CloneEntersAtTarget) {
    auto base = make_oracle(fx::worked_example());
    CloneOracle c(base, 1);
    EXPECT_EQ(c.size(), 3);
    EXPECT_DOUBLE_EQ(c.rank({2}), 2);
    EXPECT_DOUBLE_EQ(c.rank({1, 2}), 2);
    EXPECT_DOUBLE_EQ(c.rank({0, 2}), 3);
    auto st = c.start();
    st->add(2);
    EXPECT_DOUBLE_EQ(st->probe(1), 2);
    EXPECT_DOUBLE_EQ(st->probe(0), 3);
}

TEST(Profile, WorkedExample) {
    auto p = nonmodularity_profile(*make_oracle(fx::worked_example()));
    ASSERT_EQ(p.pairs.size(), 1u);
    EXPECT_DOUBLE_EQ(p.pairs[0].gamma, 1);
    EXPECT_DOUBLE_EQ(p.Gamma, 1);
}

TEST(Profile, ModularIsZero) {
    TopologyParams p;
    p.k = 4;
    p.m = 0;
    auto prof = nonmodularity_profile(*make_oracle(generate_topology(TopologyClass::parallel, p)));
    EXPECT_EQ(prof.sharing_pair_count, 0);
    EXPECT_DOUBLE_EQ(prof.Gamma, 0);
}

TEST(Profile, EntangledEveryPairShares) {
    TopologyParams p;
    p.n = 5;
    auto f = make_oracle(generate_topology(TopologyClass::general, p));
    auto prof = nonmodularity_profile(*f);
    EXPECT_EQ(prof.sharing_pair_count, 10);
    for (const auto& g : prof.pairs) EXPECT_NEAR(g.gamma, 1, 1e-9);
}

TEST(Generators, SingleEdgeAndSeriesBaseCase) {
    TopologyParams p;
    p.n = 2;
    p.d = 1;
    auto a = make_oracle(generate_topology(TopologyClass::single_edge, p));
    auto b = make_oracle(generate_topology(TopologyClass::series, p));
    EXPECT_NEAR(gamma_ij(*a, 0, 1), 1, 1e-12);
    for (std::uint64_t m = 0; m < 4; ++m) EXPECT_EQ(a->rank_mask(m), b->rank_mask(m));
}

TEST(Generators, EntangledFullRankMatchesBruteCut) {
    TopologyParams p;
    p.n = 4;
    auto d = generate_topology(TopologyClass::general, p);
    auto f = make_oracle(d);
    EXPECT_NEAR(f->rank({0, 1, 2, 3}), 6, 1e-9);
    EXPECT_NEAR(f->rank({0}), 3, 1e-9);
    EXPECT_NEAR(f->rank({0, 1}), 5, 1e-9);
}

TEST(Generators, ParallelDisjointPathsAreModular) {
    TopologyParams p;
    p.k = 4;
    p.m = 2;
    auto f = make_oracle(generate_topology(TopologyClass::parallel, p));
    ASSERT_EQ(f->size(), 6);
    EXPECT_NEAR(gamma_ij(*f, 0, 1), 1, 1e-12);  // same saturated path
    EXPECT_NEAR(gamma_ij(*f, 0, 2), 0, 1e-12);  // disjoint paths
    EXPECT_NEAR(gamma_ij(*f, 4, 5), 0, 1e-12);
}

TEST(Generators, InvalidParamsAreConfigErrors) {
    TopologyParams p;
    p.k = 1;
    EXPECT_THROW(generate_topology(TopologyClass::parallel, p), ConfigError);
    p = {};
    p.d = 0;
    EXPECT_THROW(generate_topology(TopologyClass::series, p), ConfigError);
    p = {};
    p.beta = 1;
    EXPECT_THROW(generate_topology(TopologyClass::tree, p), ConfigError);
}

TEST(Generators, JsonRoundTrip) {
    TopologyParams p;
    p.n = 3;
    auto d = generate_topology(TopologyClass::general, p);
    auto j = to_json(d);
    auto back = dag_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(to_json(back).dump(), j.dump());
    EXPECT_TRUE(j["nodes"][0]["cap"].is_null());  // unbounded sink
}

TEST(Axioms, GeneratedOraclesArePolymatroids) {
    TopologyParams p;
    p.h = 3;
    p.beta = 2;
    EXPECT_TRUE(verify_axioms(*make_oracle(generate_topology(TopologyClass::tree, p))).ok);
    EXPECT_TRUE(verify_axioms(*make_oracle(fx::worked_example())).ok);
    p = {};
    p.n = 6;
    EXPECT_TRUE(verify_axioms(*make_oracle(generate_topology(TopologyClass::general, p))).ok);
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) EXPECT_TRUE(verify_axioms(*make_oracle(fx::random_dag(rng, 8, 5))).ok);
}

TEST(Axioms, SupermodularTableIsCaught) {
    auto f = explicit_oracle(2, {0, 1, 1, 3});
    auto v = verify_axioms(*f);
    EXPECT_FALSE(v.ok);
    EXPECT_EQ(v.axiom, "submodularity");
}

TEST(Axioms, SampledModeOnLargeGroundSet) {
    TopologyParams p;
    p.h = 4;
    p.beta = 2;
    EXPECT_TRUE(verify_axioms(*make_oracle(generate_topology(TopologyClass::tree, p)), 500).ok);
}

TEST(Encapsulate, IdentityPartition) {
    auto d = fx::worked_example();
    auto q = encapsulate(d, {0, 1, 2});
    EXPECT_EQ(q.quotient.cap, d.cap);
    EXPECT_EQ(q.quotient.edges, d.edges);
}

TEST(Encapsulate, ThreeTierChainCollapsesToBottleneck) {
    CapacityDag d;
    d.cap = {500, 300, 200};  // cloud, edge, sensor
    d.edges = {{2, 1}, {1, 0}};
    d.leaves = {2, 2};
    d.sink = 0;
    auto q = encapsulate(d, {0, 0, 0});
    ASSERT_EQ(q.slice_capacity.size(), 1u);
    EXPECT_DOUBLE_EQ(q.slice_capacity[0], 200);
    EXPECT_DOUBLE_EQ(dag_maxflow(d, {0, 1}), 200);
}

TEST(Encapsulate, TreeSubtreesAreFaithful) {
    TopologyParams p;
    p.h = 2;
    p.beta = 2;
    auto d = generate_topology(TopologyClass::tree, p);
    // root 0; children 1,2; leaves 3,4 under 1 and 5,6 under 2.
    auto q = encapsulate(d, {0, 1, 2, 1, 1, 2, 2});
    EXPECT_EQ(q.quotient.num_nodes(), 3);
    for (std::uint64_t m = 0; m < 16; ++m) {
        auto s = fx::bits(m, 4);
        EXPECT_NEAR(dag_maxflow(q.quotient, s), dag_maxflow(d, s), 1e-12);
    }
}

TEST(Encapsulate, DisconnectedClusterRejected) {
    auto d = fx::worked_example();
    EXPECT_THROW(encapsulate(d, {0, 1, 1}), StructureError);
}

TEST(Encapsulate, UnfaithfulContractionRejected) {
    // Two leaves with caps 1 and 5 merged: the slice forgets that the first
    // leaf alone carries only 1.
    CapacityDag d;
    d.cap = {kInf, 1, 5};
    d.edges = {{1, 0}, {2, 0}};
    d.leaves = {1, 2};
    d.sink = 0;
    try {
        encapsulate(d, {0, 0, 0});
        FAIL() << "expected a faithfulness error";
    } catch (const FaithfulnessError& e) {
        EXPECT_NE(std::string(e.what()).find("{0}"), std::string::npos);
    }
}

TEST(Level1, TwoAgentsTwoUnitIntegrators) {
    auto m = level1_matroid({1, 1}, {{0, 1}, {0, 1}});
    EXPECT_TRUE(m.independent({0, 1}));
    EXPECT_TRUE(check_matroid(m).ok);
    auto f = m.oracle();
    EXPECT_TRUE(check_level1_encapsulation(m, *f).ok);
}

TEST(Level1, ZeroCapacityOnlyEmptySet) {
    auto m = level1_matroid({0}, {{0}, {0}});
    EXPECT_TRUE(m.independent({}));
    EXPECT_FALSE(m.independent({0}));
    EXPECT_FALSE(m.independent({1}));
    EXPECT_TRUE(check_matroid(m).ok);
}

TEST(Level1, NonIntegerCapacityIsLevel2) {
    EXPECT_THROW(level1_matroid({1.5}, {{0}}), Level2RegimeError);
}

TEST(Level1, SharedDownstreamBottleneckBreaksAugmentation) {
    auto m = level1_matroid({1, 1}, {{0}, {1}});
    // Actual network: each integrator (cap 1) drains into a shared cap-1 node.
    CapacityDag d;
    d.cap = {1, 1, 1, 1, 1};
    d.edges = {{1, 0}, {2, 0}, {3, 1}, {4, 2}};
    d.leaves = {3, 4};
    d.sink = 0;
    auto actual = make_oracle(d);
    auto v = check_level1_encapsulation(m, *actual);
    ASSERT_FALSE(v.ok);
    EXPECT_EQ(v.axiom, "augmentation");
    EXPECT_EQ(v.a, (Subset{0}));
    EXPECT_EQ(v.b, (Subset{1}));
    EXPECT_EQ(v.augmented, (Subset{0, 1}));
}

TEST(Level1, RandomInstancesSatisfyAxioms) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> cap(0, 2), k(1, 3), agents(1, 8);
    for (int t = 0; t < 40; ++t) {
        int K = k(rng), n = agents(rng);
        std::vector<double> caps(K);
        for (auto& c : caps) c = cap(rng);
        std::vector<std::vector<int>> elig(n);
        for (auto& e : elig)
            for (int j = 0; j < K; ++j)
                if (rng() % 2) e.push_back(j);
        auto m = level1_matroid(caps, elig);
        EXPECT_TRUE(check_matroid(m).ok);
        auto f = m.oracle();
        for (std::uint64_t mask = 0; mask < (1u << n); ++mask)
            EXPECT_NEAR(f->rank_mask(mask), m.matroid_rank(fx::bits(mask, n)), 1e-9);
    }
}
