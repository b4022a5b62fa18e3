#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spn/error.hpp"
#include "spn/logspace.hpp"

namespace spn {

// ---------------------------------------------------------------------------
// Variables and assignments
// ---------------------------------------------------------------------------

/// A model variable: finite with an ordered list of state labels, or
/// continuous (empty state list).
struct Variable {
    std::string name;
    std::vector<std::string> states;

    bool finite() const { return !states.empty(); }

    int state_index(std::string_view label) const {
        for (size_t i = 0; i < states.size(); ++i)
            if (states[i] == label) return static_cast<int>(i);
        return -1;
    }
};

/// A partial or complete configuration, mapping variable names to state
/// labels (finite) or reals (continuous). Model-independent; resolved
/// against a concrete Network before any computation.
class Assignment {
  public:
    using Value = std::variant<std::string, double>;

    Assignment() = default;
    Assignment(std::initializer_list<std::pair<std::string, std::string>> binds) {
        for (const auto& [k, v] : binds) set(k, v);
    }

    void set(const std::string& var, const std::string& label) { bound_[var] = label; }
    void set(const std::string& var, double value) { bound_[var] = value; }
    void unset(const std::string& var) { bound_.erase(var); }

    bool binds(const std::string& var) const { return bound_.count(var) != 0; }
    size_t size() const { return bound_.size(); }
    bool empty() const { return bound_.empty(); }

    const std::map<std::string, Value>& bindings() const { return bound_; }

  private:
    std::map<std::string, Value> bound_;
};

// ---------------------------------------------------------------------------
// VarSet: small bitset over variable indices, used for scopes
// ---------------------------------------------------------------------------

class VarSet {
  public:
    VarSet() = default;
    explicit VarSet(size_t n) : n_(n), w_((n + 63) / 64, 0) {}

    void add(size_t i) { w_[i >> 6] |= uint64_t{1} << (i & 63); }
    bool contains(size_t i) const { return (w_[i >> 6] >> (i & 63)) & 1; }

    void merge(const VarSet& o) {
        for (size_t k = 0; k < w_.size(); ++k) w_[k] |= o.w_[k];
    }
    bool intersects(const VarSet& o) const {
        for (size_t k = 0; k < w_.size(); ++k)
            if (w_[k] & o.w_[k]) return true;
        return false;
    }
    bool operator==(const VarSet& o) const { return w_ == o.w_; }
    bool operator!=(const VarSet& o) const { return w_ != o.w_; }

    size_t count() const {
        size_t c = 0;
        for (uint64_t word : w_) c += static_cast<size_t>(std::popcount(word));
        return c;
    }
    bool empty() const {
        for (uint64_t word : w_)
            if (word) return false;
        return true;
    }
    size_t universe_size() const { return n_; }

    std::vector<size_t> indices() const {
        std::vector<size_t> out;
        for (size_t i = 0; i < n_; ++i)
            if (contains(i)) out.push_back(i);
        return out;
    }

  private:
    size_t n_ = 0;
    std::vector<uint64_t> w_;
};

// ---------------------------------------------------------------------------
// Nodes
// ---------------------------------------------------------------------------

enum class NodeKind { kSum, kProduct, kLeaf };

struct Indicator {
    int state = 0;  // index into the variable's state list
};
struct Categorical {
    std::vector<double> probs;  // one per state
};
struct Gaussian {
    double mean = 0.0;
    double variance = 1.0;
};

struct LeafDistribution {
    Variable variable;
    std::variant<Indicator, Categorical, Gaussian> form;
};

struct Node {
    int id = 0;
    NodeKind kind = NodeKind::kLeaf;
    std::vector<int> children;            // sum and product nodes
    std::vector<double> weights;          // sum nodes, parallel to children
    std::optional<LeafDistribution> leaf; // leaf nodes

    bool is_sum() const { return kind == NodeKind::kSum; }
    bool is_product() const { return kind == NodeKind::kProduct; }
    bool is_leaf() const { return kind == NodeKind::kLeaf; }
};

// ---------------------------------------------------------------------------
// ResolvedRow: an Assignment resolved against a Network's variable list
// ---------------------------------------------------------------------------

/// One slot per network variable. state[v] is the bound state index of a
/// finite variable (-1 when unbound); real[v] the bound value of a
/// continuous one; bound[v] says whether v is bound at all.
struct ResolvedRow {
    std::vector<int> state;
    std::vector<double> real;
    std::vector<char> bound;
    VarSet bound_set;

    explicit ResolvedRow(size_t n = 0)
        : state(n, -1), real(n, 0.0), bound(n, 0), bound_set(n) {}

    size_t size() const { return state.size(); }
    bool is_bound(size_t v) const { return bound[v] != 0; }
    bool complete() const {
        for (char b : bound)
            if (!b) return false;
        return true;
    }
    void bind_state(size_t v, int s) {
        state[v] = s;
        bound[v] = 1;
        bound_set.add(v);
    }
    void bind_real(size_t v, double x) {
        real[v] = x;
        bound[v] = 1;
        bound_set.add(v);
    }
};

namespace detail {

inline void check_token(const std::string& s, const char* what) {
    if (s.empty()) throw ModelError(std::string(what) + " must not be empty");
    for (char c : s)
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ',' || c == '=' || c == '#')
            throw ModelError(std::string(what) + " '" + s +
                             "' contains whitespace or a reserved character");
}

/// Bottom-up scope computation shared by Network and the augmentation
/// rewrite (which works on loose node vectors). `order` must list children
/// before parents. `var_of` maps a leaf's variable name to its index.
inline std::vector<VarSet> scope_sets(const std::vector<Node>& nodes,
                                      const std::vector<int>& order,
                                      const std::map<std::string, int>& var_of,
                                      size_t var_count) {
    std::vector<VarSet> sc(nodes.size(), VarSet(var_count));
    for (int id : order) {
        const Node& n = nodes[id];
        if (n.is_leaf()) {
            sc[id].add(static_cast<size_t>(var_of.at(n.leaf->variable.name)));
        } else {
            for (int c : n.children) sc[id].merge(sc[c]);
        }
    }
    return sc;
}

/// Iterative DFS post-order over all nodes (children first). Returns
/// nullopt and sets `cycle_node` if a cycle is found.
inline std::optional<std::vector<int>> topo_order(const std::vector<Node>& nodes,
                                                  int* cycle_node) {
    enum : char { kWhite, kGrey, kBlack };
    std::vector<char> color(nodes.size(), kWhite);
    std::vector<int> order;
    order.reserve(nodes.size());
    std::vector<std::pair<int, size_t>> stack;
    for (size_t start = 0; start < nodes.size(); ++start) {
        if (color[start] != kWhite) continue;
        stack.emplace_back(static_cast<int>(start), 0);
        color[start] = kGrey;
        while (!stack.empty()) {
            auto& [id, next] = stack.back();
            const auto& ch = nodes[id].children;
            if (next < ch.size()) {
                int c = ch[next++];
                if (color[c] == kGrey) {
                    if (cycle_node) *cycle_node = c;
                    return std::nullopt;
                }
                if (color[c] == kWhite) {
                    color[c] = kGrey;
                    stack.emplace_back(c, 0);
                }
            } else {
                color[id] = kBlack;
                order.push_back(id);
                stack.pop_back();
            }
        }
    }
    return order;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// A sum-product network: a variable list, a dense vector of nodes
/// (node id == index), and an explicit root id. Immutable after
/// construction; every structural query is precomputed or reentrant.
///
/// The constructor enforces well-formedness only (dense ids, child ids in
/// range, weights parallel to children, leaves consistent with declared
/// variables). Semantic validity (completeness, decomposability, ...) is
/// checked by validate() in validate.hpp, which reports instead of throwing,
/// so deliberately broken networks can be built and inspected.
class Network {
  public:
    Network(std::vector<Variable> variables, std::vector<Node> nodes, int root)
        : vars_(std::move(variables)), nodes_(std::move(nodes)), root_(root) {
        check_wellformed();
        for (size_t v = 0; v < vars_.size(); ++v)
            var_index_[vars_[v].name] = static_cast<int>(v);
        int cyc = -1;
        if (auto order = detail::topo_order(nodes_, &cyc)) {
            topo_ = std::move(*order);
        } else {
            cycle_node_ = cyc;
        }
        parents_.assign(nodes_.size(), {});
        for (const Node& n : nodes_)
            for (int c : n.children) parents_[c].push_back(n.id);
        if (!has_cycle()) {
            scopes_ = detail::scope_sets(nodes_, topo_, var_index_, vars_.size());
            compute_unbound_cache();
        }
    }

    const std::vector<Variable>& variables() const { return vars_; }
    const std::vector<Node>& nodes() const { return nodes_; }
    const Node& node(int id) const { return nodes_[id]; }
    int root() const { return root_; }
    size_t size() const { return nodes_.size(); }
    size_t var_count() const { return vars_.size(); }

    int var_index(std::string_view name) const {
        auto it = var_index_.find(std::string(name));
        return it == var_index_.end() ? -1 : it->second;
    }
    const Variable& variable(size_t v) const { return vars_[v]; }

    bool has_cycle() const { return cycle_node_ >= 0; }
    int cycle_node() const { return cycle_node_; }
    bool has_negative_weight() const { return has_negative_weight_; }

    /// Topological order, children before parents, covering all nodes.
    const std::vector<int>& topo_order() const {
        require_acyclic();
        return topo_;
    }
    const std::vector<int>& parents(int id) const { return parents_[id]; }

    /// Scope of a node as a variable-index set.
    const VarSet& scope(int id) const {
        require_acyclic();
        return scopes_[id];
    }
    std::vector<std::string> scope_names(int id) const {
        std::vector<std::string> out;
        for (size_t v : scope(id).indices()) out.push_back(vars_[v].name);
        return out;
    }

    /// Log value of a node when no variable in its scope is bound,
    /// computed once with the same kernels the evaluator uses. This is
    /// what lets the evaluator skip unbound subtrees bit-identically.
    double unbound_log_value(int id) const {
        require_acyclic();
        return unbound_cache_[id];
    }

    /// Resolve an Assignment's labels against this network's variables.
    ResolvedRow resolve(const Assignment& a) const {
        ResolvedRow row(vars_.size());
        for (const auto& [name, value] : a.bindings()) {
            int v = var_index(name);
            if (v < 0) throw ModelError("unknown variable '" + name + "'");
            const Variable& var = vars_[v];
            if (std::holds_alternative<double>(value)) {
                if (var.finite())
                    throw ModelError("variable '" + name +
                                     "' is finite but was bound to a real value");
                row.bind_real(v, std::get<double>(value));
            } else {
                const std::string& label = std::get<std::string>(value);
                if (var.finite()) {
                    int s = var.state_index(label);
                    if (s < 0)
                        throw ModelError("variable '" + name + "' has no state '" +
                                         label + "'");
                    row.bind_state(v, s);
                } else {
                    char* end = nullptr;
                    double x = std::strtod(label.c_str(), &end);
                    if (end == label.c_str() || *end != '\0')
                        throw ModelError("variable '" + name +
                                         "' is continuous; '" + label +
                                         "' is not a number");
                    row.bind_real(v, x);
                }
            }
        }
        return row;
    }

    /// Throws unless the network can be evaluated (acyclic, no negative
    /// or non-finite weights).
    void require_evaluable() const {
        require_acyclic();
        if (has_negative_weight_)
            throw ModelError("network has a negative sum weight; evaluation is undefined");
    }

  private:
    void require_acyclic() const {
        if (has_cycle())
            throw ModelError("network contains a cycle through node " +
                             std::to_string(cycle_node_));
    }

    void check_wellformed() {
        if (nodes_.empty()) throw ModelError("network has no nodes");
        if (vars_.empty()) throw ModelError("network declares no variables");
        std::map<std::string, const Variable*> seen;
        for (const Variable& v : vars_) {
            detail::check_token(v.name, "variable name");
            if (!seen.emplace(v.name, &v).second)
                throw ModelError("duplicate variable '" + v.name + "'");
            std::map<std::string, int> labels;
            for (size_t s = 0; s < v.states.size(); ++s) {
                detail::check_token(v.states[s], "state label");
                if (!labels.emplace(v.states[s], 1).second)
                    throw ModelError("variable '" + v.name + "' has duplicate state '" +
                                     v.states[s] + "'");
            }
        }
        int n = static_cast<int>(nodes_.size());
        if (root_ < 0 || root_ >= n)
            throw ModelError("root id " + std::to_string(root_) + " out of range");
        for (int i = 0; i < n; ++i) {
            const Node& nd = nodes_[i];
            std::string at = "node " + std::to_string(i);
            if (nd.id != i)
                throw ModelError(at + ": ids must be dense (found id " +
                                 std::to_string(nd.id) + " at index " +
                                 std::to_string(i) + ")");
            if (nd.is_leaf()) {
                if (!nd.children.empty()) throw ModelError(at + ": leaf has children");
                if (!nd.leaf) throw ModelError(at + ": leaf payload missing");
                check_leaf(at, *nd.leaf);
            } else {
                if (nd.leaf) throw ModelError(at + ": non-leaf carries a leaf payload");
                if (nd.children.empty())
                    throw ModelError(at + ": sum/product needs at least one child");
                std::vector<int> sorted = nd.children;
                std::sort(sorted.begin(), sorted.end());
                if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
                    throw ModelError(at + ": duplicate child id");
                for (int c : nd.children)
                    if (c < 0 || c >= n)
                        throw ModelError(at + ": child id " + std::to_string(c) +
                                         " out of range");
                if (nd.is_sum()) {
                    if (nd.weights.size() != nd.children.size())
                        throw ModelError(at + ": " + std::to_string(nd.weights.size()) +
                                         " weights for " + std::to_string(nd.children.size()) +
                                         " children");
                    for (double w : nd.weights) {
                        if (!std::isfinite(w))
                            throw ModelError(at + ": non-finite weight");
                        if (w < 0.0) has_negative_weight_ = true;
                    }
                } else if (!nd.weights.empty()) {
                    throw ModelError(at + ": product carries weights");
                }
            }
        }
    }

    void check_leaf(const std::string& at, const LeafDistribution& leaf) {
        const Variable* declared = nullptr;
        for (const Variable& v : vars_)
            if (v.name == leaf.variable.name) declared = &v;
        if (!declared)
            throw ModelError(at + ": leaf variable '" + leaf.variable.name +
                             "' is not declared");
        if (declared->states != leaf.variable.states)
            throw ModelError(at + ": leaf disagrees with the declared states of '" +
                             leaf.variable.name + "'");
        if (std::holds_alternative<Indicator>(leaf.form)) {
            if (!declared->finite())
                throw ModelError(at + ": indicator on continuous variable");
            int s = std::get<Indicator>(leaf.form).state;
            if (s < 0 || s >= static_cast<int>(declared->states.size()))
                throw ModelError(at + ": indicator state index out of range");
        } else if (std::holds_alternative<Categorical>(leaf.form)) {
            if (!declared->finite())
                throw ModelError(at + ": categorical on continuous variable");
            const auto& p = std::get<Categorical>(leaf.form).probs;
            if (p.size() != declared->states.size())
                throw ModelError(at + ": categorical has " + std::to_string(p.size()) +
                                 " probabilities for " +
                                 std::to_string(declared->states.size()) + " states");
            for (double q : p)
                if (!std::isfinite(q) || q < 0.0)
                    throw ModelError(at + ": categorical probability out of range");
        } else {
            if (declared->finite())
                throw ModelError(at + ": gaussian on finite variable");
            const auto& g = std::get<Gaussian>(leaf.form);
            if (!std::isfinite(g.mean) || !std::isfinite(g.variance) || g.variance <= 0.0)
                throw ModelError(at + ": gaussian needs finite mean and positive variance");
        }
    }

    // Leaf value with nothing bound is 1 by definition, so the cache is a
    // plain bottom-up pass over an empty assignment.
    void compute_unbound_cache() {
        unbound_cache_.assign(nodes_.size(), 0.0);
        if (has_negative_weight_) return;  // evaluation refuses anyway
        for (int id : topo_) {
            const Node& n = nodes_[id];
            if (n.is_leaf()) {
                unbound_cache_[id] = 0.0;
            } else if (n.is_product()) {
                double acc = 0.0;
                for (int c : n.children) acc += unbound_cache_[c];
                unbound_cache_[id] = acc;
            } else {
                std::vector<double> lv(n.children.size());
                for (size_t j = 0; j < n.children.size(); ++j)
                    lv[j] = unbound_cache_[n.children[j]];
                unbound_cache_[id] = weighted_log_sum_exp(n.weights, lv);
            }
        }
    }

    std::vector<Variable> vars_;
    std::vector<Node> nodes_;
    int root_;
    std::map<std::string, int> var_index_;
    std::vector<int> topo_;
    std::vector<std::vector<int>> parents_;
    std::vector<VarSet> scopes_;
    std::vector<double> unbound_cache_;
    int cycle_node_ = -1;
    bool has_negative_weight_ = false;
};

/// Scope of every node as sorted variable-index lists. Errors out on a
/// cyclic graph, naming a node on the cycle.
inline std::vector<std::vector<int>> compute_scopes(const Network& net) {
    std::vector<std::vector<int>> out(net.size());
    for (size_t i = 0; i < net.size(); ++i)
        for (size_t v : net.scope(static_cast<int>(i)).indices())
            out[i].push_back(static_cast<int>(v));
    return out;
}

// Convenience constructors for the common leaf shapes.

inline Node make_indicator(int id, const Variable& var, const std::string& label) {
    int s = var.state_index(label);
    if (s < 0)
        throw ModelError("variable '" + var.name + "' has no state '" + label + "'");
    return Node{id, NodeKind::kLeaf, {}, {}, LeafDistribution{var, Indicator{s}}};
}

inline Node make_categorical(int id, const Variable& var, std::vector<double> probs) {
    return Node{id, NodeKind::kLeaf, {}, {},
                LeafDistribution{var, Categorical{std::move(probs)}}};
}

inline Node make_gaussian(int id, const Variable& var, double mean, double variance) {
    return Node{id, NodeKind::kLeaf, {}, {},
                LeafDistribution{var, Gaussian{mean, variance}}};
}

inline Node make_sum(int id, std::vector<int> children, std::vector<double> weights) {
    return Node{id, NodeKind::kSum, std::move(children), std::move(weights), std::nullopt};
}

inline Node make_product(int id, std::vector<int> children) {
    return Node{id, NodeKind::kProduct, std::move(children), {}, std::nullopt};
}

}  // namespace spn
