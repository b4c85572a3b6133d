#include "steam/graph.hpp"

#include <algorithm>
#include <set>

namespace steam {

Graph build_cyclic_channel_graph(int c, int hops, bool include_self_loops) {
    if (hops != 1 && hops != 2)
        throw ParameterError("channel graph hops must be 1 or 2, got " + std::to_string(hops));
    const int min_c = hops == 1 ? 3 : 5;
    if (c < min_c)
        throw ParameterError("cyclic channel graph with hops=" + std::to_string(hops) +
                             " needs C >= " + std::to_string(min_c) + ", got " + std::to_string(c));
    Graph g;
    g.num_nodes = c;
    g.neighbors.resize(static_cast<std::size_t>(c));
    for (int i = 0; i < c; ++i) {
        std::set<int> nb;
        for (int d = 1; d <= hops; ++d) {
            nb.insert(((i - d) % c + c) % c);
            nb.insert((i + d) % c);
        }
        nb.erase(i);
        if (include_self_loops) nb.insert(i);
        g.neighbors[static_cast<std::size_t>(i)].assign(nb.begin(), nb.end());
    }
    return g;
}

Graph build_grid_spatial_graph(int m, bool include_self_loops) {
    if (m < 2) throw ParameterError("grid spatial graph needs m >= 2, got " + std::to_string(m));
    Graph g;
    g.num_nodes = m * m;
    g.neighbors.resize(static_cast<std::size_t>(m * m));
    for (int r = 0; r < m; ++r) {
        for (int col = 0; col < m; ++col) {
            const int i = r * m + col;
            auto& nb = g.neighbors[static_cast<std::size_t>(i)];
            if (r > 0) nb.push_back(i - m);
            if (col > 0) nb.push_back(i - 1);
            if (include_self_loops) nb.push_back(i);
            if (col + 1 < m) nb.push_back(i + 1);
            if (r + 1 < m) nb.push_back(i + m);
        }
    }
    return g;
}

EdgeDropMask sample_edge_drop(const Graph& g, int m, Rng& rng) {
    EdgeDropMask mask;
    mask.active = true;
    mask.dropped.resize(static_cast<std::size_t>(g.num_nodes));
    if (m < 3) return mask;  // no interior nodes
    for (int r = 1; r < m - 1; ++r) {
        for (int col = 1; col < m - 1; ++col) {
            const int i = r * m + col;
            const auto& nb = g.neighbors[static_cast<std::size_t>(i)];
            const auto pick = rng.uniform_int(nb.size());
            mask.dropped[static_cast<std::size_t>(i)] = nb[static_cast<std::size_t>(pick)];
        }
    }
    return mask;
}

Graph build_knn_correlation_graph(const Tensor& x, int k) {
    if (x.ndim() != 2)
        throw DimensionError("knn graph expects a [C, H*W] feature matrix, got " + shape_str(x.shape));
    const std::int64_t c = x.dim(0), f = x.dim(1);
    if (k < 1 || k >= c)
        throw ParameterError("knn graph needs 1 <= k < C, got k=" + std::to_string(k) +
                             " with C=" + std::to_string(c));
    Graph g;
    g.num_nodes = static_cast<int>(c);
    g.neighbors.resize(static_cast<std::size_t>(c));
    for (std::int64_t i = 0; i < c; ++i) {
        // row i of XX^T, self excluded; ties break toward the lower index
        std::vector<std::pair<double, int>> scored;
        scored.reserve(static_cast<std::size_t>(c - 1));
        for (std::int64_t j = 0; j < c; ++j) {
            if (j == i) continue;
            double corr = 0.0;
            for (std::int64_t p = 0; p < f; ++p) corr += x[i * f + p] * x[j * f + p];
            scored.emplace_back(corr, static_cast<int>(j));
        }
        std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        auto& nb = g.neighbors[static_cast<std::size_t>(i)];
        for (int t = 0; t < k; ++t) nb.push_back(scored[static_cast<std::size_t>(t)].second);
        std::sort(nb.begin(), nb.end());
    }
    return g;
}

}  // namespace steam
