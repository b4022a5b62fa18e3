#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spn/evaluate.hpp"
#include "spn/model.hpp"
#include "spn/validate.hpp"

namespace spn {

/// One latent variable introduced by augment(): which sum it conditions,
/// how it is named, and the shared uniform twin sum added alongside it.
struct AugmentEntry {
    int sum = -1;
    std::string variable;
    std::vector<std::string> states;  // one per child of the sum, child order
    int twin = -1;
};

struct Augmentation {
    Network network;
    std::vector<AugmentEntry> entries;
};

namespace detail {

/// Sums that actually need a latent: no structural representation and, when
/// the configuration space is small enough to sweep, at least one complete
/// configuration with two live children. Non-enumerable networks keep every
/// structurally open sum, which is safe (a latent on an already selective
/// sum changes nothing).
inline std::vector<int> augmentation_targets(const Network& net, uint64_t cap) {
    std::vector<int> open;
    for (const Node& n : net.nodes())
        if (n.is_sum() && n.children.size() > 1 && !detect_represented_variable(net, n.id))
            open.push_back(n.id);
    if (open.empty()) return {};
    if (enumerable_size(net.variables(), cap) == 0) return open;
    std::vector<char> violates(net.nodes().size(), 0);
    for_each_config(net.variables(), [&](const ResolvedRow& row) {
        Evaluation ev = evaluate(net, row);
        size_t undecided = 0;
        for (int q : open) {
            if (violates[q]) continue;
            int live = 0;
            for (int c : net.node(q).children) live += !is_log_zero(ev.log_values[c]);
            if (live > 1)
                violates[q] = 1;
            else
                ++undecided;
        }
        return undecided > 0;
    });
    std::vector<int> out;
    for (int q : open)
        if (violates[q]) out.push_back(q);
    return out;
}

/// True when `child` is a product node whose single parent edge comes from
/// `parent`; such a child can absorb an extra factor in place.
inline bool sole_parent_product(const std::vector<Node>& nodes, int child, int parent) {
    if (!nodes[child].is_product()) return false;
    int edges = 0;
    for (const Node& n : nodes)
        for (int c : n.children)
            if (c == child) {
                if (n.id != parent) return false;
                ++edges;
            }
    return edges == 1;
}

}  // namespace detail

/// Make every sum node conditioned on some variable by introducing latent
/// ones. Each offending sum q gets a fresh variable Z with one state per
/// child; child j is multiplied by the indicator [Z = state j] (appended in
/// place when the child is a product owned by q alone, wrapped in a new
/// product otherwise) and a shared twin sum with uniform weights over the
/// indicators is multiplied into every other sum's children that would
/// otherwise miss Z from their scope. Marginalizing the latents gives back
/// the original distribution exactly, and augmenting an already selective
/// network returns it unchanged.
inline Augmentation augment(const Network& net, uint64_t cap = uint64_t{1} << 20) {
    net.require_evaluable();
    std::vector<int> targets = detail::augmentation_targets(net, cap);

    std::vector<Variable> vars = net.variables();
    std::vector<Node> nodes = net.nodes();
    std::vector<AugmentEntry> entries;

    for (int q : targets) {
        const std::vector<int> kids = nodes[q].children;
        const size_t m = kids.size();

        std::string zname = "_Z" + std::to_string(q);
        auto taken = [&](const std::string& s) {
            return std::any_of(vars.begin(), vars.end(),
                               [&](const Variable& v) { return v.name == s; });
        };
        while (taken(zname)) zname += "_";
        Variable z;
        z.name = zname;
        for (int c : kids) z.states.push_back("_z" + std::to_string(c));
        const int zv = static_cast<int>(vars.size());
        vars.push_back(z);

        std::vector<int> indicators;
        for (size_t j = 0; j < m; ++j) {
            int ind = static_cast<int>(nodes.size());
            nodes.push_back(make_indicator(ind, z, z.states[j]));
            indicators.push_back(ind);
            if (detail::sole_parent_product(nodes, kids[j], q)) {
                nodes[kids[j]].children.push_back(ind);
            } else {
                int wrap = static_cast<int>(nodes.size());
                nodes.push_back(make_product(wrap, {kids[j], ind}));
                nodes[q].children[j] = wrap;
            }
        }
        // the twin sum over all Z indicators is only materialized when some
        // branch actually needs it to stay complete
        int twin = -1;
        auto twin_node = [&]() {
            if (twin < 0) {
                twin = static_cast<int>(nodes.size());
                nodes.push_back(make_sum(twin, indicators,
                                         std::vector<double>(m, 1.0 / static_cast<double>(m))));
            }
            return twin;
        };

        // completeness repair: push the twin into children of any sum whose
        // scope would otherwise mix Z-aware and Z-blind branches
        bool changed = true;
        while (changed) {
            changed = false;
            auto order = detail::topo_order(nodes, nullptr);
            std::map<std::string, int> var_of;
            for (size_t v = 0; v < vars.size(); ++v) var_of[vars[v].name] = static_cast<int>(v);
            auto scopes = detail::scope_sets(nodes, *order, var_of, vars.size());
            for (size_t s = 0; s < nodes.size() && !changed; ++s) {
                if (!nodes[s].is_sum()) continue;
                bool any = false, all = true;
                for (int c : nodes[s].children) {
                    bool has = scopes[c].contains(static_cast<size_t>(zv));
                    any = any || has;
                    all = all && has;
                }
                if (!any || all) continue;
                for (size_t j = 0; j < nodes[s].children.size(); ++j) {
                    int c = nodes[s].children[j];
                    if (scopes[c].contains(static_cast<size_t>(zv))) continue;
                    int t = twin_node();
                    if (detail::sole_parent_product(nodes, c, static_cast<int>(s))) {
                        nodes[c].children.push_back(t);
                    } else {
                        int wrap = static_cast<int>(nodes.size());
                        nodes.push_back(make_product(wrap, {c, t}));
                        nodes[s].children[j] = wrap;
                    }
                }
                changed = true;  // scopes are stale now; rescan
            }
        }

        entries.push_back(AugmentEntry{q, zname, z.states, twin});
    }

    return Augmentation{Network(std::move(vars), std::move(nodes), net.root()), std::move(entries)};
}

/// Mixture reading of a sum node that represents a variable: the weight on
/// each state's matched child is the state's prior, and whatever that child
/// multiplies with the state indicator are the factors conditioned on it.
struct SumInterpretation {
    int node = -1;
    int variable = -1;
    std::vector<double> prior;               // per state
    std::vector<std::vector<int>> factors;   // per state, node ids
};

inline SumInterpretation interpret_sum_node(const Network& net, int sum_node) {
    auto rep = detect_represented_variable(net, sum_node);
    if (!rep)
        throw ModelError("node " + std::to_string(sum_node) +
                         " does not represent a variable; augment the network first");
    const Node& n = net.node(sum_node);
    const Variable& var = net.variable(rep->variable);
    SumInterpretation out;
    out.node = sum_node;
    out.variable = rep->variable;
    out.prior.assign(var.states.size(), 0.0);
    out.factors.resize(var.states.size());
    for (size_t s = 0; s < var.states.size(); ++s) {
        int child = rep->sigma[s];
        for (size_t pos = 0; pos < n.children.size(); ++pos)
            if (n.children[pos] == child) out.prior[s] = n.weights[pos];
        int pin = detail::pinning_leaf(net, child, var.name, static_cast<int>(s));
        const Node& cn = net.node(child);
        if (cn.is_product())
            for (int g : cn.children)
                if (g != pin) out.factors[s].push_back(g);
    }
    return out;
}

/// Unnormalized log posterior of the represented variable: per state,
/// log(prior) plus the log values of that state's factors under `rest`.
/// Exponentiate and normalize to get P(V = s | rest) at this sum node.
inline std::vector<double> interpretation_log_posterior(const Network& net,
                                                        const SumInterpretation& in,
                                                        const Assignment& rest) {
    const std::string& vname = net.variable(in.variable).name;
    if (rest.binds(vname))
        throw ModelError("assignment already binds '" + vname + "'");
    Evaluation ev = evaluate(net, net.resolve(rest));
    std::vector<double> out(in.prior.size(), kLogZero);
    for (size_t s = 0; s < in.prior.size(); ++s) {
        if (in.prior[s] <= 0.0) continue;
        double acc = std::log(in.prior[s]);
        for (int f : in.factors[s]) acc += ev.log_values[f];
        out[s] = acc;
    }
    return out;
}

}  // namespace spn
