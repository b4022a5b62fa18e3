#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "spn/evaluate.hpp"
#include "spn/model.hpp"
#include "spn/validate.hpp"

namespace spn {

namespace detail {

/// Best value a leaf can contribute: its value under the evidence when the
/// variable is bound, otherwise the best over that variable's values
/// (indicator 1, categorical max probability, gaussian density at the mean).
inline double leaf_max_log_value(const Network& net, const Node& n, const ResolvedRow& e,
                                 int* best_state) {
    const LeafDistribution& leaf = *n.leaf;
    int v = net.var_index(leaf.variable.name);
    if (e.is_bound(v)) {
        if (best_state) *best_state = -1;
        return leaf_log_value(net, n, e);
    }
    if (const auto* ind = std::get_if<Indicator>(&leaf.form)) {
        if (best_state) *best_state = ind->state;
        return 0.0;
    }
    if (const auto* cat = std::get_if<Categorical>(&leaf.form)) {
        size_t arg = 0;
        for (size_t s = 1; s < cat->probs.size(); ++s)
            if (cat->probs[s] > cat->probs[arg]) arg = s;  // ties: lowest state
        if (best_state) *best_state = static_cast<int>(arg);
        return cat->probs[arg] > 0.0 ? std::log(cat->probs[arg]) : kLogZero;
    }
    const Gaussian& g = std::get<Gaussian>(leaf.form);
    if (best_state) *best_state = -1;
    return gaussian_log_pdf(g.mean, g.mean, g.variance);
}

struct MaxPass {
    std::vector<double> log_max;   // S_i^max(e)
    std::vector<int> best_child;   // argmax child at sum nodes, ties to lowest id
};

inline MaxPass max_upward(const Network& net, const ResolvedRow& e) {
    net.require_evaluable();
    MaxPass mp;
    mp.log_max.assign(net.size(), kLogZero);
    mp.best_child.assign(net.size(), -1);
    for (int id : net.topo_order()) {
        const Node& n = net.node(id);
        if (n.is_leaf()) {
            mp.log_max[id] = leaf_max_log_value(net, n, e, nullptr);
        } else if (n.is_product()) {
            double acc = 0.0;
            for (int c : n.children) acc += mp.log_max[c];
            mp.log_max[id] = acc;
        } else {
            double best = kLogZero;
            int arg = -1;
            for (size_t j = 0; j < n.children.size(); ++j) {
                double w = n.weights[j];
                double cand = w > 0.0 ? std::log(w) + mp.log_max[n.children[j]] : kLogZero;
                if (arg < 0 || cand > best ||
                    (cand == best && n.children[j] < arg)) {
                    best = cand;
                    arg = n.children[j];
                }
            }
            mp.log_max[id] = best;
            mp.best_child[id] = arg;
        }
    }
    return mp;
}

}  // namespace detail

/// Best-tree MPE result. `log_value` is the max-pass value S^max(e), the
/// tree value of the selected configuration; `completion_log_value` is the
/// actual log probability of (completion, evidence) under the network.
/// The two coincide exactly when the network is selective, which is also
/// when `exact` is set.
struct MpeResult {
    Assignment completion;         // over the unbound variables only
    double log_value;              // S^max(e)
    double value;
    double completion_log_value;   // log S(completion, e)
    bool exact;
};

/// Max-product upward pass followed by a backtrack: argmax child at sums
/// (ties to the lowest child id), all children at products, argmax state at
/// leaves over unbound variables. Exact for selective networks, a lower
/// bound otherwise.
inline MpeResult mpe_best_tree(const Network& net, const ResolvedRow& e) {
    detail::MaxPass mp = detail::max_upward(net, e);
    if (is_log_zero(mp.log_max[net.root()]))
        throw NumericError("no explanation: S^max(evidence) = 0");

    MpeResult res;
    res.log_value = mp.log_max[net.root()];
    res.value = std::exp(res.log_value);

    ResolvedRow full = e;
    std::vector<int> stack{net.root()};
    std::vector<char> seen(net.size(), 0);
    while (!stack.empty()) {
        int id = stack.back();
        stack.pop_back();
        if (seen[id]) continue;
        seen[id] = 1;
        const Node& n = net.node(id);
        if (n.is_leaf()) {
            int v = net.var_index(n.leaf->variable.name);
            if (e.is_bound(v)) continue;
            int best_state = -1;
            detail::leaf_max_log_value(net, n, e, &best_state);
            const Variable& var = net.variable(v);
            if (var.finite()) {
                res.completion.set(var.name, var.states[best_state]);
                full.bind_state(v, best_state);
            } else {
                double mean = std::get<Gaussian>(n.leaf->form).mean;
                res.completion.set(var.name, mean);
                full.bind_real(v, mean);
            }
        } else if (n.is_product()) {
            for (int c : n.children) stack.push_back(c);
        } else {
            stack.push_back(mp.best_child[id]);
        }
    }
    res.completion_log_value = evaluate(net, full).log_value();
    res.exact = selectivity_check(net, SelectivityMode::kStructural).verdict ==
                Selectivity::kSelective;
    return res;
}

inline MpeResult mpe_best_tree(const Network& net, const Assignment& evidence) {
    return mpe_best_tree(net, net.resolve(evidence));
}

// ---------------------------------------------------------------------------
// K-best-tree MAX
// ---------------------------------------------------------------------------

/// One candidate configuration from the k-best-tree pass: the tree value it
/// was found with and its re-evaluated network value.
struct KbtCandidate {
    Assignment config;
    double tree_log_value;
    double log_value;
};

struct KbtResult {
    Assignment config;   // best candidate after re-evaluation
    double log_value;
    double value;
    std::vector<KbtCandidate> candidates;  // all k, in tree-value order
};

namespace detail {

struct KbtEntry {
    double lv;                // tree log value
    int via_child;            // child id this entry came through (sum nodes)
    std::vector<int> states;  // one slot per variable, -1 = unset
};

inline bool kbt_before(const KbtEntry& a, const KbtEntry& b) {
    if (a.lv != b.lv) return a.lv > b.lv;
    if (a.via_child != b.via_child) return a.via_child < b.via_child;
    return a.states < b.states;
}

inline void kbt_finish(std::vector<KbtEntry>& list, size_t k) {
    std::sort(list.begin(), list.end(), kbt_before);
    // equal tree values are deduplicated only when they back the very same
    // configuration
    std::vector<KbtEntry> out;
    for (auto& e : list) {
        if (!out.empty() && out.back().lv == e.lv && out.back().states == e.states)
            continue;
        out.push_back(std::move(e));
        if (out.size() == k) break;
    }
    list = std::move(out);
}

}  // namespace detail

inline constexpr int kMaxKbt = 4096;

/// MAX inference by k-best-trees: every node keeps its k best tree values
/// with the configurations that achieve them; the k root candidates are
/// re-evaluated through the whole network and the best one wins (ties to
/// the earlier, better-ranked entry). k = 1 reproduces mpe_best_tree with
/// empty evidence. Exact once k covers the divergence, and always exact on
/// selective networks.
inline KbtResult max_kbt(const Network& net, int k) {
    net.require_evaluable();
    if (k < 1) throw ModelError("k must be at least 1");
    if (k > kMaxKbt)
        throw ModelError("k is capped at " + std::to_string(kMaxKbt));
    for (const Variable& v : net.variables())
        if (!v.finite())
            throw ModelError("MAX by k-best-trees needs a finite-state network");

    size_t nv = net.var_count();
    std::vector<std::vector<detail::KbtEntry>> lists(net.size());
    for (int id : net.topo_order()) {
        const Node& n = net.node(id);
        auto& mine = lists[id];
        if (n.is_leaf()) {
            const LeafDistribution& leaf = *n.leaf;
            int v = net.var_index(leaf.variable.name);
            auto push_state = [&](int s, double lp) {
                if (is_log_zero(lp)) return;
                detail::KbtEntry e{lp, -1, std::vector<int>(nv, -1)};
                e.states[v] = s;
                mine.push_back(std::move(e));
            };
            if (const auto* ind = std::get_if<Indicator>(&leaf.form)) {
                push_state(ind->state, 0.0);
            } else {
                const auto& p = std::get<Categorical>(leaf.form).probs;
                for (size_t s = 0; s < p.size(); ++s)
                    push_state(static_cast<int>(s), p[s] > 0.0 ? std::log(p[s]) : kLogZero);
            }
            detail::kbt_finish(mine, k);
        } else if (n.is_product()) {
            mine = lists[n.children[0]];
            for (auto& e : mine) e.via_child = -1;
            for (size_t j = 1; j < n.children.size(); ++j) {
                std::vector<detail::KbtEntry> merged;
                for (const auto& a : mine) {
                    for (const auto& b : lists[n.children[j]]) {
                        detail::KbtEntry e{a.lv + b.lv, -1, a.states};
                        for (size_t v = 0; v < nv; ++v)
                            if (b.states[v] >= 0) e.states[v] = b.states[v];
                        merged.push_back(std::move(e));
                    }
                }
                detail::kbt_finish(merged, k);
                mine = std::move(merged);
            }
        } else {
            for (size_t j = 0; j < n.children.size(); ++j) {
                if (n.weights[j] <= 0.0) continue;
                double lw = std::log(n.weights[j]);
                for (const auto& e : lists[n.children[j]])
                    mine.push_back(detail::KbtEntry{lw + e.lv, n.children[j], e.states});
            }
            detail::kbt_finish(mine, k);
        }
    }

    const auto& best = lists[net.root()];
    if (best.empty()) throw NumericError("no explanation: the network is identically zero");

    KbtResult res;
    size_t winner = 0;
    double winner_lv = kLogZero;
    for (size_t i = 0; i < best.size(); ++i) {
        ResolvedRow row(nv);
        Assignment a;
        for (size_t v = 0; v < nv; ++v) {
            if (best[i].states[v] < 0) continue;  // variable outside the root scope
            row.bind_state(v, best[i].states[v]);
            a.set(net.variable(v).name, net.variable(v).states[best[i].states[v]]);
        }
        double lv = evaluate(net, row).log_value();
        res.candidates.push_back(KbtCandidate{a, best[i].lv, lv});
        if (lv > winner_lv) {
            winner_lv = lv;
            winner = i;
        }
    }
    res.config = res.candidates[winner].config;
    res.log_value = res.candidates[winner].log_value;
    res.value = std::exp(res.log_value);
    return res;
}

}  // namespace spn
