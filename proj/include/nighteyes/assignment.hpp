#pragma once

// Rectangular min-cost bipartite assignment with forbidden edges.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace nighteyes {

/// Marks a forbidden edge in a cost matrix.
inline constexpr double kForbidden = std::numeric_limits<double>::infinity();

struct Assignment {
    std::vector<int> row_to_col;  ///< -1 when the row is unassigned
    std::size_t matched = 0;
    double cost = 0.0;  ///< sum over matched (finite) edges
};

namespace detail {

// Kuhn-Munkres with potentials on an n x m matrix, n <= m. Returns, for each
// row, the assigned column.
inline std::vector<int> hungarian_rows_le_cols(const std::vector<std::vector<double>>& a) {
    const int n = static_cast<int>(a.size());
    const int m = n > 0 ? static_cast<int>(a[0].size()) : 0;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n + 1)), v(static_cast<std::size_t>(m + 1));
    std::vector<int> p(static_cast<std::size_t>(m + 1)), way(static_cast<std::size_t>(m + 1));
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
        std::vector<char> used(static_cast<std::size_t>(m + 1), 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = a[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                                   u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= m; ++j) {
        if (p[static_cast<std::size_t>(j)] != 0) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    }
    return row_to_col;
}

}  // namespace detail

/// Maximum-cardinality assignment over the finite edges; among those, the one
/// of minimum total cost. Costs must be >= 0 or kForbidden.
///
/// Forbidden edges (and padding) are priced above the sum of all finite
/// costs, so trading one forbidden edge for any set of feasible ones always
/// lowers the total.
inline Assignment solve_assignment(const std::vector<std::vector<double>>& cost) {
    Assignment out;
    const std::size_t rows = cost.size();
    if (rows == 0) return out;
    const std::size_t cols = cost[0].size();
    out.row_to_col.assign(rows, -1);
    if (cols == 0) return out;
    double finite_sum = 0.0;
    for (const auto& r : cost) {
        for (double c : r) {
            if (std::isfinite(c)) finite_sum += c;
        }
    }
    const double big = finite_sum + 1.0;
    const bool transpose = rows > cols;
    const std::size_t n = transpose ? cols : rows, m = transpose ? rows : cols;
    std::vector<std::vector<double>> a(n, std::vector<double>(m));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double c = transpose ? cost[j][i] : cost[i][j];
            a[i][j] = std::isfinite(c) ? c : big;
        }
    }
    const auto sol = detail::hungarian_rows_le_cols(a);
    for (std::size_t i = 0; i < n; ++i) {
        const int j = sol[i];
        if (j < 0) continue;
        const std::size_t r = transpose ? static_cast<std::size_t>(j) : i;
        const std::size_t c = transpose ? i : static_cast<std::size_t>(j);
        if (!std::isfinite(cost[r][c])) continue;
        out.row_to_col[r] = static_cast<int>(c);
        ++out.matched;
        out.cost += cost[r][c];
    }
    return out;
}

/// Ascending-cost greedy matching over finite edges; ties broken by
/// (row, col) order.
inline Assignment solve_assignment_greedy(const std::vector<std::vector<double>>& cost) {
    Assignment out;
    const std::size_t rows = cost.size();
    out.row_to_col.assign(rows, -1);
    if (rows == 0) return out;
    struct Edge {
        double c;
        std::size_t r, col;
    };
    std::vector<Edge> edges;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cost[r].size(); ++c) {
            if (std::isfinite(cost[r][c])) edges.push_back({cost[r][c], r, c});
        }
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        if (a.c != b.c) return a.c < b.c;
        if (a.r != b.r) return a.r < b.r;
        return a.col < b.col;
    });
    std::vector<char> col_used(rows ? cost[0].size() : 0, 0);
    for (const auto& e : edges) {
        if (out.row_to_col[e.r] >= 0 || col_used[e.col]) continue;
        out.row_to_col[e.r] = static_cast<int>(e.col);
        col_used[e.col] = 1;
        ++out.matched;
        out.cost += e.c;
    }
    return out;
}

}  // namespace nighteyes
