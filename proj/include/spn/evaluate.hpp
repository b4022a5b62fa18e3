#pragma once

#include <cmath>
#include <vector>

#include "spn/logspace.hpp"
#include "spn/model.hpp"

namespace spn {

/// Log value of a single leaf under a resolved row. A leaf over an unbound
/// variable contributes 1 (log 0.0), which is what makes a partial
/// assignment evaluate to its marginal.
inline double leaf_log_value(const Network& net, const Node& n, const ResolvedRow& row) {
    const LeafDistribution& leaf = *n.leaf;
    int v = net.var_index(leaf.variable.name);
    if (!row.is_bound(v)) return 0.0;
    if (std::holds_alternative<Indicator>(leaf.form)) {
        return row.state[v] == std::get<Indicator>(leaf.form).state ? 0.0 : kLogZero;
    }
    if (std::holds_alternative<Categorical>(leaf.form)) {
        double p = std::get<Categorical>(leaf.form).probs[row.state[v]];
        return p > 0.0 ? std::log(p) : kLogZero;
    }
    const Gaussian& g = std::get<Gaussian>(leaf.form);
    return gaussian_log_pdf(row.real[v], g.mean, g.variance);
}

struct EvalOptions {
    /// Substitute the precomputed all-unbound value for nodes whose scope
    /// does not touch any bound variable. Bit-identical to the full pass;
    /// turn it off only to test that claim.
    bool prune_unbound = true;
};

/// Result of a bottom-up evaluation: the natural-log value of every node,
/// plus the resolved row it was computed for.
struct Evaluation {
    std::vector<double> log_values;
    ResolvedRow row;
    int root = 0;

    double log_value() const { return log_values[root]; }
    /// Linear-space value; underflows to 0 for very small probabilities.
    double value() const { return std::exp(log_values[root]); }
};

inline Evaluation evaluate(const Network& net, const ResolvedRow& row,
                           const EvalOptions& opts = {}) {
    net.require_evaluable();
    Evaluation ev;
    ev.row = row;
    ev.root = net.root();
    ev.log_values.resize(net.size());
    std::vector<double> tmp;
    for (int id : net.topo_order()) {
        const Node& n = net.node(id);
        if (opts.prune_unbound && !net.scope(id).intersects(row.bound_set)) {
            ev.log_values[id] = net.unbound_log_value(id);
            continue;
        }
        if (n.is_leaf()) {
            ev.log_values[id] = leaf_log_value(net, n, row);
        } else if (n.is_product()) {
            double acc = 0.0;
            for (int c : n.children) acc += ev.log_values[c];
            ev.log_values[id] = acc;
        } else {
            tmp.resize(n.children.size());
            for (size_t j = 0; j < n.children.size(); ++j)
                tmp[j] = ev.log_values[n.children[j]];
            ev.log_values[id] = weighted_log_sum_exp(n.weights, tmp);
        }
    }
    return ev;
}

inline Evaluation evaluate(const Network& net, const Assignment& x,
                           const EvalOptions& opts = {}) {
    return evaluate(net, net.resolve(x), opts);
}

/// Merge two resolved rows; a variable bound by both must agree.
inline ResolvedRow merge_rows(const Network& net, const ResolvedRow& a,
                              const ResolvedRow& b) {
    ResolvedRow out = a;
    for (size_t v = 0; v < net.var_count(); ++v) {
        if (!b.is_bound(v)) continue;
        if (a.is_bound(v)) {
            bool same = net.variable(v).finite() ? a.state[v] == b.state[v]
                                                 : a.real[v] == b.real[v];
            if (!same)
                throw ModelError("variable '" + net.variable(v).name +
                                 "' is bound to different values");
            continue;
        }
        if (net.variable(v).finite())
            out.bind_state(v, b.state[v]);
        else
            out.bind_real(v, b.real[v]);
    }
    return out;
}

struct Conditional {
    double log_value;
    double value;
};

/// P(query | evidence) = S(query, evidence) / S(evidence), computed as a
/// log difference. The query and evidence must bind disjoint variables,
/// and evidence with zero probability is an error.
inline Conditional conditional(const Network& net, const Assignment& query,
                               const Assignment& evidence) {
    ResolvedRow e = net.resolve(evidence);
    ResolvedRow q = net.resolve(query);
    for (size_t v = 0; v < net.var_count(); ++v)
        if (e.is_bound(v) && q.is_bound(v))
            throw ModelError("query and evidence both bind '" + net.variable(v).name + "'");
    ResolvedRow qe = merge_rows(net, e, q);
    double le = evaluate(net, e).log_value();
    if (is_log_zero(le))
        throw NumericError("evidence is inconsistent with the model: S(evidence) = 0");
    double lqe = evaluate(net, qe).log_value();
    double lc = is_log_zero(lqe) ? kLogZero : lqe - le;
    return Conditional{lc, std::exp(lc)};
}

}  // namespace spn
