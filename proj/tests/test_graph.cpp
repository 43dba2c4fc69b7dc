#include "lcd/graph.hpp"
#include "lcd/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <vector>

namespace lcd {
namespace {

// ---------------------------------------------------------------------------
// Construction and validation
// ---------------------------------------------------------------------------

TEST(DagConstruction, AcceptsValidEdges) {
    Dag g(4, {{4, 2}, {2, 1}, {3, 1}});
    EXPECT_EQ(g.q(), 4);
    EXPECT_TRUE(g.has_edge(4, 2));
    EXPECT_TRUE(g.has_edge(2, 1));
    EXPECT_FALSE(g.has_edge(1, 2));
}

TEST(DagConstruction, RejectsOutOfRangeNodes) {
    EXPECT_THROW(Dag(3, {{4, 1}}), std::invalid_argument);
    EXPECT_THROW(Dag(3, {{0, 1}}), std::invalid_argument);
}

TEST(DagConstruction, RejectsSelfLoop) {
    EXPECT_THROW(Dag(3, {{2, 2}}), std::invalid_argument);
}

TEST(DagConstruction, RejectsCycle) {
    EXPECT_THROW(Dag(3, {{1, 2}, {2, 3}, {3, 1}}), std::invalid_argument);
}

TEST(DagConstruction, RejectsNonPositiveNodeCount) {
    EXPECT_THROW(Dag(0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Relations
// ---------------------------------------------------------------------------

TEST(DagRelations, ChildrenParentsOnDiamond) {
    Dag g(4, {{4, 2}, {4, 3}, {2, 1}, {3, 1}});
    EXPECT_EQ(g.children(4), (std::set<int>{2, 3}));
    EXPECT_EQ(g.parents(1), (std::set<int>{2, 3}));
    EXPECT_EQ(g.children(1), (std::set<int>{}));
    EXPECT_EQ(g.parents(4), (std::set<int>{}));
}

TEST(DagRelations, DescendantsAncestorsOnDiamond) {
    Dag g(4, {{4, 2}, {4, 3}, {2, 1}, {3, 1}});
    EXPECT_EQ(g.descendants(4), (std::set<int>{1, 2, 3}));
    EXPECT_EQ(g.ancestors(1), (std::set<int>{2, 3, 4}));
    EXPECT_EQ(g.descendants(1), (std::set<int>{}));
    EXPECT_EQ(g.ancestors(4), (std::set<int>{}));
}

TEST(DagRelations, RelationsBundleMatchesIndividualQueries) {
    Dag g(5, {{5, 3}, {3, 2}, {2, 1}, {5, 1}});
    for (int j = 1; j <= 5; ++j) {
        NodeRelations rel = relations(g, j);
        EXPECT_EQ(rel.children, g.children(j));
        EXPECT_EQ(rel.parents, g.parents(j));
        EXPECT_EQ(rel.descendants, g.descendants(j));
        EXPECT_EQ(rel.ancestors, g.ancestors(j));
    }
}

// ---------------------------------------------------------------------------
// Transitive closure
// ---------------------------------------------------------------------------

TEST(TransitiveClosure, ChainClosureAddsAllShortcuts) {
    Dag chain(4, {{4, 3}, {3, 2}, {2, 1}});
    Dag closure = transitive_closure(chain);
    std::set<Edge> want = {{4, 3}, {3, 2}, {2, 1}, {4, 2}, {3, 1}, {4, 1}};
    EXPECT_EQ(closure.edges(), want);
}

TEST(TransitiveClosure, Idempotent) {
    Rng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        Dag g = sample_dag(6, 0.5, rng);
        Dag c1 = transitive_closure(g);
        Dag c2 = transitive_closure(c1);
        EXPECT_EQ(c1, c2);
    }
}

TEST(TransitiveClosure, SubgraphBetweenGraphAndClosureHasSameClosure) {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        Dag g = sample_dag(5, 0.6, rng);
        Dag closure = transitive_closure(g);
        // g plus one random closure edge sits between g and its closure.
        std::set<Edge> mid = g.edges();
        for (const Edge& e : closure.edges()) {
            mid.insert(e);
            break;
        }
        EXPECT_EQ(transitive_closure(Dag(5, mid)), closure);
    }
}

// ---------------------------------------------------------------------------
// Same-closure enumeration
// ---------------------------------------------------------------------------

TEST(SameClosure, ThreeChainYieldsChainAndTriangle) {
    Dag chain(3, {{3, 2}, {2, 1}});
    std::vector<Dag> fam = same_closure_dags(chain);
    ASSERT_EQ(fam.size(), 2u);
    Dag triangle(3, {{3, 2}, {2, 1}, {3, 1}});
    EXPECT_TRUE(std::count(fam.begin(), fam.end(), chain) == 1);
    EXPECT_TRUE(std::count(fam.begin(), fam.end(), triangle) == 1);
}

TEST(SameClosure, FourChainYieldsEightMembers) {
    // Mandatory edges 4->3, 3->2, 2->1 all have 2-step bypasses absent, the
    // three shortcut edges are optional, so the family is all 2^3 subsets.
    Dag chain(4, {{4, 3}, {3, 2}, {2, 1}});
    std::vector<Dag> fam = same_closure_dags(chain);
    ASSERT_EQ(fam.size(), 8u);
    std::set<Edge> base = chain.edges();
    std::vector<Edge> optional = {{3, 1}, {4, 2}, {4, 1}};
    for (int mask = 0; mask < 8; ++mask) {
        std::set<Edge> edges = base;
        for (int b = 0; b < 3; ++b)
            if (mask & (1 << b)) edges.insert(optional[b]);
        Dag member(4, std::move(edges));
        EXPECT_EQ(std::count(fam.begin(), fam.end(), member), 1)
            << "missing subset mask " << mask;
    }
}

TEST(SameClosure, EveryMemberHasTheSameClosure) {
    Rng rng(13);
    for (int rep = 0; rep < 10; ++rep) {
        Dag g = sample_dag(5, 0.5, rng);
        Dag closure = transitive_closure(g);
        for (const Dag& member : same_closure_dags(g)) EXPECT_EQ(transitive_closure(member), closure);
    }
}

TEST(SameClosure, ContainsTheInputItself) {
    Rng rng(17);
    for (int rep = 0; rep < 10; ++rep) {
        Dag g = sample_dag(6, 0.4, rng);
        std::vector<Dag> fam = same_closure_dags(g);
        EXPECT_EQ(std::count(fam.begin(), fam.end(), g), 1);
    }
}

TEST(SameClosure, OutputIsSortedAndUnique) {
    Dag chain(4, {{4, 3}, {3, 2}, {2, 1}});
    std::vector<Dag> fam = same_closure_dags(chain);
    EXPECT_TRUE(std::is_sorted(fam.begin(), fam.end()));
    EXPECT_EQ(std::adjacent_find(fam.begin(), fam.end()), fam.end());
}

// ---------------------------------------------------------------------------
// Structural error
// ---------------------------------------------------------------------------

TEST(StructuralError, IdenticalGraphsScoreZero) {
    Dag g(4, {{4, 2}, {2, 1}});
    EXPECT_EQ(structural_error(g, g), 0);
}

TEST(StructuralError, MissingAndSpuriousCostOneEach) {
    Dag truth(3, {{3, 2}, {2, 1}});
    Dag missing(3, {{3, 2}});
    Dag spurious(3, {{3, 2}, {2, 1}, {3, 1}});
    EXPECT_EQ(structural_error(truth, missing), 1);
    EXPECT_EQ(structural_error(truth, spurious), 1);
}

TEST(StructuralError, ReversedEdgeCostsTwo) {
    Dag truth(2, {{2, 1}});
    Dag reversed(2, {{1, 2}});
    EXPECT_EQ(structural_error(truth, reversed), 2);
}

TEST(StructuralError, SymmetricWithoutReversals) {
    Dag a(4, {{4, 3}, {3, 1}});
    Dag b(4, {{4, 3}, {2, 1}});
    EXPECT_EQ(structural_error(a, b), structural_error(b, a));
}

// ---------------------------------------------------------------------------
// Random generation
// ---------------------------------------------------------------------------

TEST(SampleDag, EdgesRespectTheLabelOrder) {
    Rng rng(23);
    for (int rep = 0; rep < 50; ++rep) {
        Dag g = sample_dag(6, 0.75, rng);
        for (const auto& [j, i] : g.edges()) EXPECT_GT(j, i);
    }
}

TEST(SampleDag, DensityExtremes) {
    Rng rng(29);
    Dag empty = sample_dag(5, 0.0, rng);
    EXPECT_TRUE(empty.edges().empty());
    Dag full = sample_dag(5, 1.0, rng);
    EXPECT_EQ(full.edges().size(), 10u); // C(5,2) candidate pairs
}

TEST(SampleDag, EdgeFrequencyTracksDensity) {
    Rng rng(31);
    int total = 0;
    const int reps = 2000;
    for (int rep = 0; rep < reps; ++rep) total += static_cast<int>(sample_dag(4, 0.75, rng).edges().size());
    double freq = total / (6.0 * reps); // 6 candidate pairs at q=4
    EXPECT_NEAR(freq, 0.75, 0.03);
}

TEST(SampleDag, SameSeedSameGraph) {
    Rng a(41), b(41);
    for (int rep = 0; rep < 10; ++rep) EXPECT_EQ(sample_dag(7, 0.5, a), sample_dag(7, 0.5, b));
}

// ---------------------------------------------------------------------------
// Text round trip
// ---------------------------------------------------------------------------

TEST(DagText, RoundTrip) {
    Dag g(4, {{4, 2}, {4, 3}, {2, 1}});
    EXPECT_EQ(dag_from_text(to_text(g), 4), g);
}

TEST(DagText, AcceptsCommaAndSemicolonSeparators) {
    Dag want(3, {{3, 2}, {2, 1}});
    EXPECT_EQ(dag_from_text("3 -> 2, 2 -> 1", 3), want);
    EXPECT_EQ(dag_from_text("3->2; 2->1", 3), want);
}

TEST(DagText, InfersNodeCountFromLabels) {
    Dag g = dag_from_text("5 -> 2", 0);
    EXPECT_EQ(g.q(), 5);
}

TEST(DagText, RejectsMalformedLine) {
    EXPECT_THROW(dag_from_text("3 - 2", 3), std::invalid_argument);
    EXPECT_THROW(dag_from_text("x -> 2", 3), std::invalid_argument);
}

} // namespace
} // namespace lcd
