#pragma once

#include <algorithm>
#include <vector>

#include "spn/evaluate.hpp"
#include "spn/model.hpp"

namespace spn {

/// The sub-network a complete configuration v induces: zero-valued nodes
/// are dropped, zero-weight sum links are dropped, and whatever is left
/// unreachable from the root goes too. For a selective network this is a
/// tree with one child per retained sum node.
struct InducedTree {
    std::vector<int> nodes;                      // ascending ids
    std::vector<std::pair<int, int>> edges;      // (parent, child), sorted
    std::vector<int> terminals;                  // retained leaves
};

inline InducedTree induced_subgraph(const Network& net, const ResolvedRow& v) {
    if (!v.complete())
        throw ModelError("induced subgraph needs a complete configuration");
    Evaluation ev = evaluate(net, v);
    if (is_log_zero(ev.log_value()))
        throw NumericError("no induced subgraph: S(v) = 0");

    std::vector<char> keep(net.size(), 0);
    std::vector<int> stack{net.root()};
    keep[net.root()] = 1;
    InducedTree t;
    while (!stack.empty()) {
        int id = stack.back();
        stack.pop_back();
        const Node& n = net.node(id);
        for (size_t j = 0; j < n.children.size(); ++j) {
            int c = n.children[j];
            if (is_log_zero(ev.log_values[c])) continue;
            if (n.is_sum() && n.weights[j] <= 0.0) continue;
            t.edges.emplace_back(id, c);
            if (!keep[c]) {
                keep[c] = 1;
                stack.push_back(c);
            }
        }
    }
    for (size_t i = 0; i < net.size(); ++i) {
        if (!keep[i]) continue;
        t.nodes.push_back(static_cast<int>(i));
        if (net.node(static_cast<int>(i)).is_leaf())
            t.terminals.push_back(static_cast<int>(i));
    }
    std::sort(t.edges.begin(), t.edges.end());
    return t;
}

inline InducedTree induced_subgraph(const Network& net, const Assignment& v) {
    return induced_subgraph(net, net.resolve(v));
}

/// Product of the retained sum-edge weights times the values of the
/// retained terminal nodes. Equal to S(v) when v induced the tree.
inline double tree_log_value(const Network& net, const InducedTree& t,
                             const ResolvedRow& v) {
    if (!v.complete())
        throw ModelError("tree value needs a complete configuration");
    double acc = 0.0;
    for (const auto& [p, c] : t.edges) {
        const Node& n = net.node(p);
        size_t pos = 0;
        while (pos < n.children.size() && n.children[pos] != c) ++pos;
        if (pos == n.children.size())
            throw ModelError("edge " + std::to_string(p) + " -> " + std::to_string(c) +
                             " is not in the network");
        if (n.is_sum()) {
            double w = n.weights[pos];
            acc += w > 0.0 ? std::log(w) : kLogZero;
        }
    }
    for (int k : t.terminals) acc += leaf_log_value(net, net.node(k), v);
    return acc;
}

inline double tree_value(const Network& net, const InducedTree& t, const ResolvedRow& v) {
    return std::exp(tree_log_value(net, t, v));
}

inline double tree_value(const Network& net, const InducedTree& t, const Assignment& v) {
    return tree_value(net, t, net.resolve(v));
}

}  // namespace spn
