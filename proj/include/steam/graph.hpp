#pragma once

#include <optional>
#include <vector>

#include "steam/rng.hpp"
#include "steam/tensor.hpp"

namespace steam {

// Immutable node/neighbor-list topology. Neighbor lists are sorted
// ascending and never contain the node itself.
struct Graph {
    int num_nodes = 0;
    std::vector<std::vector<int>> neighbors;

    std::int64_t directed_edge_count() const {
        std::int64_t n = 0;
        for (const auto& nb : neighbors) n += static_cast<std::int64_t>(nb.size());
        return n;
    }
    // undirected edge count, assuming symmetry
    std::int64_t edge_count() const { return directed_edge_count() / 2; }
};

// Training-time edge drop: for each interior grid node, at most one
// dropped neighbor. The drop is per-row (asymmetric): node i stops
// attending to the dropped neighbor, the reverse direction is untouched.
struct EdgeDropMask {
    bool active = false;
    std::vector<std::optional<int>> dropped;  // indexed by node

    bool drops(int node, int neighbor) const {
        if (!active || node >= static_cast<int>(dropped.size())) return false;
        const auto& d = dropped[static_cast<std::size_t>(node)];
        return d.has_value() && *d == neighbor;
    }
    std::size_t entry_count() const {
        std::size_t n = 0;
        for (const auto& d : dropped)
            if (d.has_value()) ++n;
        return n;
    }
};

// Cyclic channel graph: hops=1 gives degree 2 (i +/- 1 mod C), hops=2 adds
// the second ring for degree 4.
Graph build_cyclic_channel_graph(int c, int hops, bool include_self_loops = false);

// m x m grid in row-major order with 4-adjacency; 2m(m-1) edges.
Graph build_grid_spatial_graph(int m, bool include_self_loops = false);

// For each of the (m-2)^2 interior nodes of a grid graph, drop one of its
// four neighbors uniformly at random. m < 3 yields an empty, active mask.
EdgeDropMask sample_edge_drop(const Graph& g, int m, Rng& rng);

// Directed k-NN graph over the rows of x (shape [C, H*W]) ranked by the
// correlation matrix X X^T; ties break toward the lower index.
Graph build_knn_correlation_graph(const Tensor& x, int k);

}  // namespace steam
