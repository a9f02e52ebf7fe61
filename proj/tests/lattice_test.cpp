#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "market_ising/lattice.hpp"
#include "oracles.hpp"

namespace mi = market_ising;

namespace {

std::set<std::size_t> neighbor_set(const mi::LatticeTopology& t, mi::SiteId s) {
    std::set<std::size_t> out;
    for (auto n : t.neighbors(s)) out.insert(n.index);
    return out;
}

} // namespace

TEST(Lattice, DefaultSizeHasHundredSitesAndThreeHundredEdges) {
    const auto t = mi::build_lattice(10);
    EXPECT_EQ(t.site_count(), 100u);
    EXPECT_EQ(t.edges().size(), 300u);
    for (std::size_t i = 0; i < t.site_count(); ++i) EXPECT_EQ(neighbor_set(t, mi::SiteId{i}).size(), 6u);
}

TEST(Lattice, SmallestValidLattice) {
    const auto t = mi::build_lattice(3);
    EXPECT_EQ(t.site_count(), 9u);
    EXPECT_EQ(t.edges().size(), 27u);
}

TEST(Lattice, SideTwoIsDegenerate) {
    // By hand: with L = 2, offsets +1 and -1 land on the same row, so (0,0)
    // reaches only {(1,0), (0,1), (1,1)}: three distinct sites instead of six.
    const std::set<std::size_t> by_hand{oracle::wrap_index(1, 0, 2), oracle::wrap_index(-1, 0, 2),
                                        oracle::wrap_index(0, 1, 2), oracle::wrap_index(0, -1, 2),
                                        oracle::wrap_index(1, -1, 2), oracle::wrap_index(-1, 1, 2)};
    EXPECT_EQ(by_hand.size(), 3u);
    EXPECT_THROW(mi::build_lattice(2), mi::DegenerateLattice);
    EXPECT_THROW(mi::build_lattice(0), mi::DegenerateLattice);
}

TEST(Lattice, NeighborOrderOfOrigin) {
    const auto t = mi::build_lattice(10);
    const auto n = t.neighbors(t.site(0, 0));
    const std::vector<mi::SiteId> expected{t.site(1, 0), t.site(9, 0), t.site(0, 1),
                                           t.site(0, 9), t.site(1, 9), t.site(9, 1)};
    EXPECT_TRUE(std::equal(n.begin(), n.end(), expected.begin()));
}

TEST(Lattice, NeighborOrderOnSideThree) {
    const auto t = mi::build_lattice(3);
    const auto n = t.neighbors(t.site(1, 1));
    const std::vector<mi::SiteId> expected{t.site(2, 1), t.site(0, 1), t.site(1, 2),
                                           t.site(1, 0), t.site(2, 0), t.site(0, 2)};
    EXPECT_TRUE(std::equal(n.begin(), n.end(), expected.begin()));
}

TEST(Lattice, OutOfRangeSiteThrows) {
    const auto t = mi::build_lattice(4);
    EXPECT_THROW(t.neighbors(mi::SiteId{16}), mi::InvalidSite);
    EXPECT_THROW(mi::neighbors(t, mi::SiteId{1000}), mi::InvalidSite);
}

TEST(Lattice, AxialIndexBijection) {
    const auto t = mi::build_lattice(7);
    for (std::size_t i = 0; i < t.site_count(); ++i) {
        const auto [a, b] = t.axial(mi::SiteId{i});
        EXPECT_EQ(t.site(a, b).index, i);
        EXPECT_EQ(i, a * 7 + b);
    }
}

// Exhaustive structural invariants for every side length up to 12.
TEST(Lattice, InvariantsHoldUpToSideTwelve) {
    for (int side = 3; side <= 12; ++side) {
        SCOPED_TRACE(side);
        const auto t = mi::build_lattice(static_cast<std::size_t>(side));
        const std::size_t n = t.site_count();
        std::size_t degree_sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto ns = neighbor_set(t, mi::SiteId{i});
            EXPECT_EQ(ns.size(), 6u);
            EXPECT_FALSE(ns.contains(i));
            degree_sum += ns.size();
            for (std::size_t j : ns) EXPECT_TRUE(neighbor_set(t, mi::SiteId{j}).contains(i));
        }
        EXPECT_EQ(degree_sum, 2 * t.edges().size());
        EXPECT_EQ(t.edges().size(), 3 * n);

        std::set<std::pair<std::size_t, std::size_t>> edges;
        for (const auto& e : t.edges()) edges.insert({std::min(e.first.index, e.second.index), std::max(e.first.index, e.second.index)});
        EXPECT_EQ(edges.size(), t.edges().size()) << "duplicate edge";
        EXPECT_EQ(edges, oracle::edge_set(side));
    }
}

TEST(Lattice, TranslationMapsEdgeSetOntoItself) {
    const int side = 6;
    const auto edges = oracle::edge_set(side);
    const auto t = mi::build_lattice(side);
    for (int da = 0; da < side; ++da) {
        for (int db = 0; db < side; ++db) {
            std::set<std::pair<std::size_t, std::size_t>> shifted;
            for (const auto& e : t.edges()) {
                const auto [a1, b1] = t.axial(e.first);
                const auto [a2, b2] = t.axial(e.second);
                const auto i = oracle::wrap_index(static_cast<int>(a1) + da, static_cast<int>(b1) + db, side);
                const auto j = oracle::wrap_index(static_cast<int>(a2) + da, static_cast<int>(b2) + db, side);
                shifted.insert({std::min(i, j), std::max(i, j)});
            }
            EXPECT_EQ(shifted, edges);
        }
    }
}

TEST(Lattice, NeighborsAreUnitDistanceInTheEmbeddingAwayFromTheSeam) {
    const auto t = mi::build_lattice(10);
    const auto s = t.site(4, 4);
    const auto p = t.coordinate(s);
    for (auto n : t.neighbors(s)) {
        const auto q = t.coordinate(n);
        EXPECT_NEAR(std::hypot(p.x - q.x, p.y - q.y), 1.0, 1e-12);
    }
}

TEST(Lattice, CsvDumpHasHeaderAndOneRowPerSite) {
    const auto t = mi::build_lattice(3);
    std::ostringstream os;
    mi::write_lattice_csv(os, t);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "site,a,b,x,y,n1,n2,n3,n4,n5,n6");
    std::getline(is, line);
    EXPECT_EQ(line, "0,0,0,0.000000,0.000000,3,6,1,2,5,7");
    std::size_t rows = 1;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 9u);
}
