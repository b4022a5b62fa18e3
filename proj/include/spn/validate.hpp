#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spn/evaluate.hpp"
#include "spn/model.hpp"

namespace spn {

struct Violation {
    int node;
    std::string property;
    std::string detail;
};

enum class Selectivity { kSelective, kNotSelective, kUnknown };

inline const char* to_string(Selectivity s) {
    switch (s) {
        case Selectivity::kSelective: return "selective";
        case Selectivity::kNotSelective: return "not-selective";
        default: return "unknown";
    }
}

/// Validity report. The six boolean flags are the load-gating properties;
/// the structural selectivity verdict is advisory (plenty of perfectly
/// valid networks are not selective) and never produces a violation.
struct ValidityReport {
    bool rooted = true;
    bool acyclic = true;
    bool alternating = true;
    bool normalized = true;
    bool complete = true;
    bool decomposable = true;
    Selectivity selective_structural = Selectivity::kUnknown;
    std::vector<Violation> violations;

    bool passed() const {
        return rooted && acyclic && alternating && normalized && complete && decomposable;
    }

    std::string summary() const {
        std::ostringstream os;
        auto flag = [&](const char* name, bool ok) {
            os << name << ": " << (ok ? "ok" : "VIOLATED") << "\n";
        };
        flag("rooted", rooted);
        flag("acyclic", acyclic);
        flag("alternating", alternating);
        flag("normalized", normalized);
        flag("complete", complete);
        flag("decomposable", decomposable);
        os << "selective (structural): " << to_string(selective_structural) << "\n";
        for (const Violation& v : violations)
            os << "  node " << v.node << " [" << v.property << "] " << v.detail << "\n";
        return os.str();
    }
};

/// A sum node that represents a variable V: child sigma[j] is (or contains)
/// the indicator of V's j-th state, one child per state.
struct RepresentedVariable {
    int variable;             // index into the network's variable list
    std::vector<int> sigma;   // state index -> child node id
    std::vector<int> ties;    // other variables that also match, if any
};

namespace detail {

/// True when the leaf pins `var` to state `s`: an indicator, or the
/// degenerate categorical with a single unit probability (the two behave
/// identically under evaluation).
inline bool pins_state(const LeafDistribution& leaf, const std::string& var, int s) {
    if (leaf.variable.name != var) return false;
    if (const auto* ind = std::get_if<Indicator>(&leaf.form)) return ind->state == s;
    if (const auto* cat = std::get_if<Categorical>(&leaf.form)) {
        for (size_t t = 0; t < cat->probs.size(); ++t) {
            double want = (static_cast<int>(t) == s) ? 1.0 : 0.0;
            if (cat->probs[t] != want) return false;
        }
        return true;
    }
    return false;
}

/// Child node id -> matched indicator leaf id when the child either is the
/// pinning leaf or is a product with one among its children; -1 otherwise.
inline int pinning_leaf(const Network& net, int child, const std::string& var, int s) {
    const Node& c = net.node(child);
    if (c.is_leaf()) return pins_state(*c.leaf, var, s) ? child : -1;
    if (c.is_product()) {
        for (int g : c.children) {
            const Node& gc = net.node(g);
            if (gc.is_leaf() && pins_state(*gc.leaf, var, s)) return g;
        }
    }
    return -1;
}

// Augmenting-path bipartite matching, states on the left, child positions
// on the right, candidates scanned in child order so the result is stable.
inline bool match_state(const std::vector<std::vector<int>>& cand, int s,
                        std::vector<int>& state_of_child, std::vector<char>& seen) {
    for (int pos : cand[s]) {
        if (seen[pos]) continue;
        seen[pos] = 1;
        if (state_of_child[pos] < 0 ||
            match_state(cand, state_of_child[pos], state_of_child, seen)) {
            state_of_child[pos] = s;
            return true;
        }
    }
    return false;
}

}  // namespace detail

/// Detect whether a sum node represents one of the variables in its scope:
/// one child per state, each child being (or containing) that state's
/// indicator, no child used twice. Returns the first matching variable in
/// declaration order; any further matches are reported as ties.
inline std::optional<RepresentedVariable> detect_represented_variable(const Network& net,
                                                                      int sum_node) {
    const Node& n = net.node(sum_node);
    if (!n.is_sum())
        throw ModelError("node " + std::to_string(sum_node) + " is not a sum node");
    size_t m = n.children.size();
    std::optional<RepresentedVariable> found;
    for (size_t v = 0; v < net.var_count(); ++v) {
        const Variable& var = net.variable(v);
        if (!var.finite() || var.states.size() != m) continue;
        if (!net.scope(sum_node).contains(v)) continue;
        std::vector<std::vector<int>> cand(m);
        bool hopeless = false;
        for (size_t s = 0; s < m && !hopeless; ++s) {
            for (size_t pos = 0; pos < m; ++pos)
                if (detail::pinning_leaf(net, n.children[pos], var.name,
                                         static_cast<int>(s)) >= 0)
                    cand[s].push_back(static_cast<int>(pos));
            if (cand[s].empty()) hopeless = true;
        }
        if (hopeless) continue;
        std::vector<int> state_of_child(m, -1);
        bool ok = true;
        for (size_t s = 0; s < m && ok; ++s) {
            std::vector<char> seen(m, 0);
            ok = detail::match_state(cand, static_cast<int>(s), state_of_child, seen);
        }
        if (!ok) continue;
        if (!found) {
            found.emplace();
            found->variable = static_cast<int>(v);
            found->sigma.assign(m, -1);
            for (size_t pos = 0; pos < m; ++pos)
                found->sigma[state_of_child[pos]] = n.children[pos];
        } else {
            found->ties.push_back(static_cast<int>(v));
        }
    }
    return found;
}

struct SelectivityWitness {
    int node;                           // sum node with two live children
    ResolvedRow config;                 // complete configuration exhibiting it
    std::vector<int> positive_children; // their ids
};

struct SelectivityResult {
    Selectivity verdict = Selectivity::kUnknown;
    std::optional<SelectivityWitness> witness;
};

enum class SelectivityMode { kStructural, kExhaustive };

namespace detail {

/// Number of complete configurations, or 0 when not enumerable (continuous
/// variable present or the count exceeds `cap`).
inline uint64_t enumerable_size(const std::vector<Variable>& vars, uint64_t cap) {
    uint64_t total = 1;
    for (const Variable& v : vars) {
        if (!v.finite()) return 0;
        total *= v.states.size();
        if (total > cap) return 0;
    }
    return total;
}

/// Odometer over complete configurations, declaration order, last variable
/// fastest. Calls fn(row) for each; fn returns false to stop early.
template <class Fn>
void for_each_config(const std::vector<Variable>& vars, Fn&& fn) {
    ResolvedRow row(vars.size());
    for (size_t v = 0; v < vars.size(); ++v) row.bind_state(v, 0);
    for (;;) {
        if (!fn(row)) return;
        size_t v = vars.size();
        while (v-- > 0) {
            if (++row.state[v] < static_cast<int>(vars[v].states.size())) break;
            row.state[v] = 0;
            if (v == 0) return;
        }
    }
}

}  // namespace detail

/// Selectivity of every sum node. Structural mode answers "selective" when
/// every sum node represents a variable and "unknown" otherwise (it cannot
/// prove a negative). Exhaustive mode enumerates all complete configurations
/// (finite-state networks up to `cap` configurations) and gives a definite
/// verdict, with a witness when the answer is no.
inline SelectivityResult selectivity_check(const Network& net,
                                           SelectivityMode mode,
                                           uint64_t cap = uint64_t{1} << 20) {
    SelectivityResult res;
    if (mode == SelectivityMode::kStructural) {
        for (const Node& n : net.nodes()) {
            if (!n.is_sum()) continue;
            if (!detect_represented_variable(net, n.id)) {
                res.verdict = Selectivity::kUnknown;
                return res;
            }
        }
        res.verdict = Selectivity::kSelective;
        return res;
    }
    uint64_t total = detail::enumerable_size(net.variables(), cap);
    if (total == 0)
        throw ModelError("exhaustive selectivity check needs a finite-state network with at most " +
                         std::to_string(cap) + " configurations");
    res.verdict = Selectivity::kSelective;
    detail::for_each_config(net.variables(), [&](const ResolvedRow& row) {
        Evaluation ev = evaluate(net, row);
        for (const Node& n : net.nodes()) {
            if (!n.is_sum()) continue;
            std::vector<int> live;
            for (int c : n.children)
                if (!is_log_zero(ev.log_values[c])) live.push_back(c);
            if (live.size() > 1) {
                res.verdict = Selectivity::kNotSelective;
                res.witness = SelectivityWitness{n.id, row, live};
                return false;
            }
        }
        return true;
    });
    return res;
}

/// Check every network invariant and report, never throw: a deliberately
/// broken model can still be inspected. Decomposability is checked two
/// ways, by scope disjointness and by the shared-descendant criterion; the
/// flag follows the scope check and a divergence (possible only when two
/// distinct leaves of one variable sit under different children) is called
/// out in the violation detail.
inline ValidityReport validate(const Network& net, double tol = 1e-9) {
    ValidityReport rep;
    auto add = [&](int node, const char* prop, std::string detail) {
        rep.violations.push_back(Violation{node, prop, std::move(detail)});
    };

    if (net.has_cycle()) {
        rep.acyclic = false;
        add(net.cycle_node(), "acyclic", "graph has a cycle through this node");
    }

    // rooted: the declared root is the only parentless node
    for (const Node& n : net.nodes()) {
        bool parentless = net.parents(n.id).empty();
        if (n.id == net.root() && !parentless) {
            rep.rooted = false;
            add(n.id, "rooted", "declared root has a parent");
        } else if (n.id != net.root() && parentless) {
            rep.rooted = false;
            add(n.id, "rooted", "node is not reachable from the root");
        }
    }

    for (const Node& n : net.nodes()) {
        if (n.is_sum()) {
            for (int c : n.children)
                if (net.node(c).is_sum()) {
                    rep.alternating = false;
                    add(n.id, "alternating",
                        "sum node has sum child " + std::to_string(c));
                }
            double total = 0.0;
            bool neg = false;
            for (double w : n.weights) {
                total += w;
                if (w < 0.0) neg = true;
            }
            if (neg) {
                rep.normalized = false;
                add(n.id, "normalized", "negative weight");
            }
            if (std::abs(total - 1.0) > tol) {
                rep.normalized = false;
                std::ostringstream os;
                os << "weights sum to " << total;
                add(n.id, "normalized", os.str());
            }
        } else if (n.is_product()) {
            for (int c : n.children)
                if (net.node(c).is_product()) {
                    rep.alternating = false;
                    add(n.id, "alternating",
                        "product node has product child " + std::to_string(c));
                }
        } else if (const auto* cat = std::get_if<Categorical>(&n.leaf->form)) {
            double total = 0.0;
            for (double p : cat->probs) total += p;
            if (std::abs(total - 1.0) > tol) {
                rep.normalized = false;
                std::ostringstream os;
                os << "leaf probabilities sum to " << total;
                add(n.id, "normalized", os.str());
            }
        }
    }

    if (!rep.acyclic) return rep;  // scope-based checks need an acyclic graph

    // completeness: all children of a sum share its scope
    for (const Node& n : net.nodes()) {
        if (!n.is_sum()) continue;
        for (size_t j = 1; j < n.children.size(); ++j) {
            if (net.scope(n.children[j]) != net.scope(n.children[0])) {
                rep.complete = false;
                add(n.id, "complete",
                    "children " + std::to_string(n.children[0]) + " and " +
                        std::to_string(n.children[j]) + " have different scopes");
                break;
            }
        }
    }

    // decomposability: scope check, plus the shared-descendant cross-check
    bool any_product = false;
    for (const Node& n : net.nodes()) any_product |= n.is_product();
    std::vector<VarSet> desc;  // descendants-or-self as node-id sets
    if (any_product) {
        desc.assign(net.size(), VarSet(net.size()));
        for (int id : net.topo_order()) {
            desc[id].add(id);
            for (int c : net.node(id).children) desc[id].merge(desc[c]);
        }
    }
    for (const Node& n : net.nodes()) {
        if (!n.is_product()) continue;
        for (size_t a = 0; a < n.children.size(); ++a) {
            for (size_t b = a + 1; b < n.children.size(); ++b) {
                bool scopes_overlap =
                    net.scope(n.children[a]).intersects(net.scope(n.children[b]));
                bool share_node = desc[n.children[a]].intersects(desc[n.children[b]]);
                if (scopes_overlap) {
                    rep.decomposable = false;
                    std::string extra =
                        share_node ? ""
                                   : " (no shared descendant: two distinct leaves of one variable)";
                    add(n.id, "decomposable",
                        "children " + std::to_string(n.children[a]) + " and " +
                            std::to_string(n.children[b]) + " share scope" + extra);
                }
            }
        }
    }

    rep.selective_structural =
        selectivity_check(net, SelectivityMode::kStructural).verdict;
    return rep;
}

}  // namespace spn
