#pragma once

#include <thread>
#include <vector>

#include "spn/dataset.hpp"
#include "spn/evaluate.hpp"
#include "spn/model.hpp"
#include "spn/validate.hpp"

namespace spn {

namespace detail {

/// Run fn(acc, row_index) over [0, n) using `threads` workers on fixed
/// contiguous chunks, then fold the worker accumulators in worker order
/// with combine(total, local). Results are bit-reproducible for a given
/// worker count; changing the count only regroups the summations.
template <class Acc, class Fn, class Combine>
Acc accumulate_rows(size_t n, int threads, Acc zero, Fn fn, Combine combine) {
    if (threads < 1) threads = 1;
    size_t workers = std::min<size_t>(threads, n ? n : 1);
    if (workers <= 1) {
        Acc acc = zero;
        for (size_t t = 0; t < n; ++t) fn(acc, t);
        return acc;
    }
    std::vector<Acc> local(workers, zero);
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) {
        size_t lo = n * w / workers, hi = n * (w + 1) / workers;
        pool.emplace_back([&, w, lo, hi] {
            try {
                for (size_t t = lo; t < hi; ++t) fn(local[w], t);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    Acc total = std::move(local[0]);
    for (size_t w = 1; w < workers; ++w) combine(total, local[w]);
    return total;
}

}  // namespace detail

/// One double per sum edge, laid out parallel to each sum node's child
/// list. Used for hard counts, soft counts, and likelihood gradients.
struct EdgeValues {
    std::vector<std::vector<double>> by_node;

    static EdgeValues zeros(const Network& net) {
        EdgeValues ev;
        ev.by_node.resize(net.size());
        for (const Node& n : net.nodes())
            if (n.is_sum()) ev.by_node[n.id].assign(n.children.size(), 0.0);
        return ev;
    }

    double& at(int node, size_t child_pos) { return by_node[node][child_pos]; }
    double at(int node, size_t child_pos) const { return by_node[node][child_pos]; }

    void add(const EdgeValues& o) {
        for (size_t i = 0; i < by_node.size(); ++i)
            for (size_t j = 0; j < by_node[i].size(); ++j)
                by_node[i][j] += o.by_node[i][j];
    }

    double max_abs_difference(const EdgeValues& o) const {
        double m = 0.0;
        for (size_t i = 0; i < by_node.size(); ++i)
            for (size_t j = 0; j < by_node[i].size(); ++j)
                m = std::max(m, std::abs(by_node[i][j] - o.by_node[i][j]));
        return m;
    }
};

/// Sum of log S(row) over the data. Zero-probability rows contribute -inf.
inline double log_likelihood(const Network& net, const std::vector<ResolvedRow>& rows,
                             int threads = 1) {
    return detail::accumulate_rows<double>(
        rows.size(), threads, 0.0,
        [&](double& acc, size_t t) { acc += evaluate(net, rows[t]).log_value(); },
        [](double& a, const double& b) { a += b; });
}

inline double log_likelihood(const Network& net, const Dataset& ds, int threads = 1) {
    return log_likelihood(net, resolve_rows(net, ds), threads);
}

struct SelectiveCounts {
    EdgeValues counts;
    std::vector<size_t> zero_rows;  // rows with S(v) = 0, excluded from counts
};

namespace detail {

/// Walk the induced tree of a complete row top-down, incrementing the one
/// live edge under every traversed sum node. Requires selectivity.
template <class Visit>
void walk_induced(const Network& net, const Evaluation& ev, Visit&& visit) {
    std::vector<int> stack{net.root()};
    std::vector<char> seen(net.size(), 0);
    while (!stack.empty()) {
        int id = stack.back();
        stack.pop_back();
        if (seen[id]) continue;
        seen[id] = 1;
        const Node& n = net.node(id);
        if (n.is_leaf()) continue;
        if (n.is_product()) {
            for (int c : n.children) stack.push_back(c);
            continue;
        }
        int live = -1;
        for (size_t j = 0; j < n.children.size(); ++j) {
            if (n.weights[j] <= 0.0 || is_log_zero(ev.log_values[n.children[j]]))
                continue;
            if (live >= 0)
                throw ModelError("network is not selective: sum node " +
                                 std::to_string(id) + " has two live children");
            live = static_cast<int>(j);
        }
        if (live < 0) continue;  // cannot happen when S(row) > 0
        visit(id, static_cast<size_t>(live));
        stack.push_back(n.children[live]);
    }
}

inline void require_selective(const Network& net, uint64_t cap) {
    SelectivityResult s = selectivity_check(net, SelectivityMode::kStructural);
    if (s.verdict == Selectivity::kUnknown &&
        detail::enumerable_size(net.variables(), cap) != 0)
        s = selectivity_check(net, SelectivityMode::kExhaustive, cap);
    if (s.verdict == Selectivity::kNotSelective)
        throw ModelError("network is not selective");
    if (s.verdict == Selectivity::kUnknown)
        throw ModelError("selectivity could not be established for this network");
}

}  // namespace detail

/// Hard per-edge traversal counts over complete rows (Prop.-11 sufficient
/// statistics). Rows the model assigns probability zero have no induced
/// tree; they are excluded from the counts and reported by index.
inline SelectiveCounts count_stats_selective(const Network& net,
                                             const std::vector<ResolvedRow>& rows,
                                             int threads = 1) {
    detail::require_selective(net, uint64_t{1} << 20);
    for (size_t t = 0; t < rows.size(); ++t)
        if (!rows[t].complete())
            throw DataError("row " + std::to_string(t) +
                            " is incomplete; hard counts need complete rows");
    struct Acc {
        EdgeValues counts;
        std::vector<size_t> zero_rows;
    };
    Acc zero{EdgeValues::zeros(net), {}};
    Acc total = detail::accumulate_rows<Acc>(
        rows.size(), threads, zero,
        [&](Acc& acc, size_t t) {
            Evaluation ev = evaluate(net, rows[t]);
            if (is_log_zero(ev.log_value())) {
                acc.zero_rows.push_back(t);
                return;
            }
            detail::walk_induced(net, ev,
                                 [&](int id, size_t j) { acc.counts.at(id, j) += 1.0; });
        },
        [](Acc& a, const Acc& b) {
            a.counts.add(b.counts);
            a.zero_rows.insert(a.zero_rows.end(), b.zero_rows.begin(), b.zero_rows.end());
        });
    return SelectiveCounts{std::move(total.counts), std::move(total.zero_rows)};
}

inline SelectiveCounts count_stats_selective(const Network& net, const Dataset& ds,
                                             int threads = 1) {
    return count_stats_selective(net, resolve_rows(net, ds), threads);
}

}  // namespace spn
