#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "market_ising/errors.hpp"

namespace market_ising {

inline constexpr std::size_t kDegree = 6;

// A mall on the lattice. index = a * L + b for axial coordinates (a, b).
struct SiteId {
    std::size_t index = 0;

    friend constexpr bool operator==(SiteId, SiteId) = default;
    friend constexpr auto operator<=>(SiteId, SiteId) = default;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct Edge {
    SiteId first;
    SiteId second;
};

// Periodic triangular lattice: every site has six neighbours.
//
// Neighbour order for site (a, b), all mod L:
//   (a+1, b), (a-1, b), (a, b+1), (a, b-1), (a+1, b-1), (a-1, b+1)
class LatticeTopology {
public:
    explicit LatticeTopology(std::size_t side_length) : side_(side_length) {
        if (side_ < 3) {
            throw DegenerateLattice("lattice side length must be at least 3, got " +
                                    std::to_string(side_));
        }
        const std::size_t n = side_ * side_;
        neighbors_.resize(n);
        coordinates_.resize(n);
        edges_.reserve(3 * n);

        constexpr std::array<std::pair<int, int>, kDegree> offsets{
            {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, -1}, {-1, 1}}};
        const auto wrap = [this](std::size_t v, int d) {
            const auto l = static_cast<long>(side_);
            return static_cast<std::size_t>((static_cast<long>(v) + d + l) % l);
        };
        const double row_height = std::sqrt(3.0) / 2.0;

        for (std::size_t a = 0; a < side_; ++a) {
            for (std::size_t b = 0; b < side_; ++b) {
                const SiteId s = site(a, b);
                for (std::size_t k = 0; k < kDegree; ++k) {
                    neighbors_[s.index][k] =
                        site(wrap(a, offsets[k].first), wrap(b, offsets[k].second));
                }
                // (+1,0), (0,+1) and (-1,+1) enumerate each undirected edge once.
                edges_.push_back({s, neighbors_[s.index][0]});
                edges_.push_back({s, neighbors_[s.index][2]});
                edges_.push_back({s, neighbors_[s.index][5]});
                coordinates_[s.index] = {static_cast<double>(a) + 0.5 * static_cast<double>(b),
                                         row_height * static_cast<double>(b)};
            }
        }
    }

    std::size_t side_length() const noexcept { return side_; }
    std::size_t site_count() const noexcept { return neighbors_.size(); }

    SiteId site(std::size_t a, std::size_t b) const noexcept { return SiteId{a * side_ + b}; }
    std::pair<std::size_t, std::size_t> axial(SiteId s) const noexcept {
        return {s.index / side_, s.index % side_};
    }

    bool contains(SiteId s) const noexcept { return s.index < site_count(); }

    std::span<const SiteId, kDegree> neighbors(SiteId s) const {
        check_site(s);
        return neighbors_[s.index];
    }

    // Unchecked access for inner loops.
    const std::array<SiteId, kDegree>& neighbors_unchecked(std::size_t index) const noexcept {
        return neighbors_[index];
    }

    const std::vector<Edge>& edges() const noexcept { return edges_; }

    Point coordinate(SiteId s) const {
        check_site(s);
        return coordinates_[s.index];
    }

    void check_site(SiteId s) const {
        if (!contains(s)) {
            throw InvalidSite("site " + std::to_string(s.index) + " out of range [0, " +
                              std::to_string(site_count()) + ")");
        }
    }

private:
    std::size_t side_;
    std::vector<std::array<SiteId, kDegree>> neighbors_;
    std::vector<Edge> edges_;
    std::vector<Point> coordinates_;
};

inline LatticeTopology build_lattice(std::size_t side_length) { return LatticeTopology(side_length); }

inline std::span<const SiteId, kDegree> neighbors(const LatticeTopology& topology, SiteId site) {
    return topology.neighbors(site);
}

// CSV dump: site,a,b,x,y,n1..n6
inline void write_lattice_csv(std::ostream& os, const LatticeTopology& topology) {
    os << "site,a,b,x,y,n1,n2,n3,n4,n5,n6\n";
    char buf[64];
    for (std::size_t i = 0; i < topology.site_count(); ++i) {
        const SiteId s{i};
        const auto [a, b] = topology.axial(s);
        const Point p = topology.coordinate(s);
        std::snprintf(buf, sizeof buf, "%.6f,%.6f", p.x, p.y);
        os << i << ',' << a << ',' << b << ',' << buf;
        for (SiteId n : topology.neighbors(s)) os << ',' << n.index;
        os << '\n';
    }
}

} // namespace market_ising
