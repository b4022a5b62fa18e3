#pragma once

// Networks the tests run against: the hand-checked three-variable example
// with known probabilities, the two malformed counterexamples, a fixture
// where the best-tree bound is strictly below the true maximum, and seeded
// random generators for property tests.

#include <algorithm>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "spn/spn.hpp"

namespace fixtures {

inline std::string path(const std::string& name) {
    return std::string(SPN_FIXTURE_DIR) + "/" + name;
}

/// Three binary variables A, B, C. Selective, fully worked by hand:
/// S(+a,+b,-c) = 0.3*0.4*0.9 = 0.108, S^max(C=+c) = 0.144 at (+a,-b),
/// P(-a|+c) = 0.21/0.366, P(-b|+c) = 0.249/0.366.
inline spn::Network abc() {
    spn::Variable A{"A", {"+a", "-a"}}, B{"B", {"+b", "-b"}}, C{"C", {"+c", "-c"}};
    std::vector<spn::Node> n;
    n.push_back(spn::make_sum(0, {1, 2}, {0.3, 0.7}));
    n.push_back(spn::make_product(1, {3, 5}));
    n.push_back(spn::make_product(2, {4, 6}));
    n.push_back(spn::make_indicator(3, A, "+a"));
    n.push_back(spn::make_indicator(4, A, "-a"));
    n.push_back(spn::make_sum(5, {7, 8}, {0.4, 0.6}));
    n.push_back(spn::make_sum(6, {9, 10}, {0.5, 0.5}));
    n.push_back(spn::make_product(7, {11, 13}));
    n.push_back(spn::make_product(8, {12, 14}));
    n.push_back(spn::make_product(9, {11, 15}));
    n.push_back(spn::make_product(10, {12, 15}));
    n.push_back(spn::make_indicator(11, B, "+b"));
    n.push_back(spn::make_indicator(12, B, "-b"));
    n.push_back(spn::make_sum(13, {16, 17}, {0.1, 0.9}));
    n.push_back(spn::make_sum(14, {16, 17}, {0.8, 0.2}));
    n.push_back(spn::make_sum(15, {16, 17}, {0.3, 0.7}));
    n.push_back(spn::make_indicator(16, C, "+c"));
    n.push_back(spn::make_indicator(17, C, "-c"));
    return spn::Network({A, B, C}, std::move(n), 0);
}

/// Incomplete sum: children over different variables. S(+v1) = S(-v1) =
/// 0.6*0.5 + 0.4*1 = 0.7, so the "marginals" are not marginals at all.
inline spn::Network incomplete_pair() {
    spn::Variable V1{"V1", {"+v1", "-v1"}}, V2{"V2", {"+v2", "-v2"}};
    std::vector<spn::Node> n;
    n.push_back(spn::make_sum(0, {1, 2}, {0.6, 0.4}));
    n.push_back(spn::make_categorical(1, V1, {0.5, 0.5}));
    n.push_back(spn::make_categorical(2, V2, {0.5, 0.5}));
    return spn::Network({V1, V2}, std::move(n), 0);
}

/// Non-decomposable product: both children over the same variable.
/// S(+v) = S(-v) = 0.25, which sums to 0.5, not 1.
inline spn::Network nondecomposable_product() {
    spn::Variable V{"V", {"+v", "-v"}};
    std::vector<spn::Node> n;
    n.push_back(spn::make_product(0, {1, 2}));
    n.push_back(spn::make_categorical(1, V, {0.5, 0.5}));
    n.push_back(spn::make_categorical(2, V, {0.5, 0.5}));
    return spn::Network({V}, std::move(n), 0);
}

/// Non-selective mixture where the best-tree bound is strictly below the
/// true maximum AND picks the wrong configuration: the best tree reaches
/// 0.25 at (+1,+2) while S is maximized at (-1,+2) with value 0.5, because
/// both mixture components contribute there. Two candidate trees are
/// enough for the k-best search to recover the exact maximum.
inline spn::Network bt_gap() {
    spn::Variable V1{"V1", {"+1", "-1"}}, V2{"V2", {"+2", "-2"}};
    std::vector<spn::Node> n;
    n.push_back(spn::make_sum(0, {1, 2}, {0.5, 0.5}));
    n.push_back(spn::make_product(1, {3, 4}));
    n.push_back(spn::make_product(2, {5, 6}));
    n.push_back(spn::make_categorical(3, V1, {0.5, 0.5}));
    n.push_back(spn::make_categorical(4, V2, {1.0, 0.0}));
    n.push_back(spn::make_categorical(5, V1, {0.0, 1.0}));
    n.push_back(spn::make_categorical(6, V2, {0.5, 0.5}));
    return spn::Network({V1, V2}, std::move(n), 0);
}

// ---------------------------------------------------------------------------
// Seeded random generators
// ---------------------------------------------------------------------------

inline std::vector<spn::Variable> binary_variables(int count) {
    std::vector<spn::Variable> vars;
    for (int v = 0; v < count; ++v) {
        std::string name = "X" + std::to_string(v);
        vars.push_back(spn::Variable{name, {name + ".0", name + ".1"}});
    }
    return vars;
}

namespace detail {

inline std::vector<double> random_weights(spn::Rng& rng, size_t k) {
    std::vector<double> w(k);
    double total = 0.0;
    for (double& x : w) {
        x = 0.05 + rng.next_double();
        total += x;
    }
    for (double& x : w) x /= total;
    return w;
}

inline std::string scope_key(const std::vector<int>& scope) {
    std::string key;
    for (int v : scope) key += std::to_string(v) + ",";
    return key;
}

struct ValidGen {
    const std::vector<spn::Variable>& vars;
    spn::NetworkBuilder& b;
    spn::Rng& rng;
    size_t node_budget;
    // per-scope cache of already built subtrees; reusing them makes the
    // graph a proper DAG rather than a tree
    std::map<std::string, std::vector<int>> cache;

    int leaf(int v) {
        const spn::Variable& var = vars[v];
        if (rng.next_double() < 0.5) {
            int s = static_cast<int>(rng.next_index(var.states.size()));
            return b.add(spn::make_indicator(0, var, var.states[s]));
        }
        return b.add(spn::make_categorical(0, var, random_weights(rng, var.states.size())));
    }

    // sum over the scope (or a leaf for single-variable scopes); valid as a
    // child of any product node. Exhausted depth or budget still wraps the
    // lone product in a one-weight sum so products never nest directly.
    int sum_or_leaf(std::vector<int> scope, int depth) {
        if (scope.size() == 1) return leaf(scope[0]);
        std::string key = scope_key(scope);
        auto hit = cache.find(key);
        if (hit != cache.end() && rng.next_double() < 0.35)
            return hit->second[rng.next_index(hit->second.size())];
        size_t k = b.nodes.size() > node_budget || depth <= 0 ? 1 : 2 + rng.next_index(2);
        std::vector<int> children;
        for (size_t i = 0; i < k; ++i) children.push_back(product(scope, depth - 1));
        int id = b.add(spn::make_sum(0, std::move(children), random_weights(rng, k)));
        cache[key].push_back(id);
        return id;
    }

    // product over a scope of at least two variables; children are sums or
    // leaves over a random partition, so sums and products alternate and
    // sibling scopes never overlap
    int product(const std::vector<int>& scope, int depth) {
        std::vector<int> order = scope;
        rng.shuffle(order);
        size_t parts = 2 + (order.size() > 2 ? rng.next_index(order.size() - 1) : 0);
        parts = std::min(parts, order.size());
        std::vector<std::vector<int>> split(parts);
        for (size_t i = 0; i < order.size(); ++i) split[i % parts].push_back(order[i]);
        std::vector<int> children;
        for (auto& part : split) {
            std::sort(part.begin(), part.end());
            children.push_back(sum_or_leaf(part, depth));
        }
        return b.add(spn::make_product(0, std::move(children)));
    }
};

struct SelectiveGen {
    const std::vector<spn::Variable>& vars;
    spn::NetworkBuilder& b;
    spn::Rng& rng;
    bool share_tails;
    std::map<std::string, int> tail_cache;

    // selective by construction: each sum splits on one variable, each
    // child multiplies that state's indicator with the subtree over the
    // remaining scope
    int build(std::vector<int> scope) {
        int pick = static_cast<int>(rng.next_index(scope.size()));
        int v = scope[pick];
        std::vector<int> rest = scope;
        rest.erase(rest.begin() + pick);

        int shared_tail = -1;
        if (!rest.empty() && share_tails && rng.next_double() < 0.5) {
            std::string key = scope_key(rest);
            auto hit = tail_cache.find(key);
            if (hit != tail_cache.end()) {
                shared_tail = hit->second;
            } else {
                shared_tail = build(rest);
                tail_cache[key] = shared_tail;
            }
        }

        const spn::Variable& var = vars[v];
        std::vector<int> children;
        for (size_t s = 0; s < var.states.size(); ++s) {
            int ind = b.add(spn::make_indicator(0, var, var.states[s]));
            if (rest.empty()) {
                children.push_back(ind);
            } else {
                int tail = shared_tail >= 0 ? shared_tail : build(rest);
                children.push_back(b.add(spn::make_product(0, {ind, tail})));
            }
        }
        return b.add(
            spn::make_sum(0, std::move(children), random_weights(rng, var.states.size())));
    }
};

}  // namespace detail

/// Random valid network over `var_count` binary variables: alternating
/// sums and products, scope-partitioned product children, shared subtrees.
inline spn::Network random_valid(spn::Rng& rng, int var_count, size_t node_budget = 150) {
    std::vector<spn::Variable> vars = binary_variables(var_count);
    spn::NetworkBuilder b;
    detail::ValidGen gen{vars, b, rng, node_budget, {}};
    std::vector<int> scope;
    for (int v = 0; v < var_count; ++v) scope.push_back(v);
    int root;
    if (var_count == 1) {
        int k = 2;
        std::vector<int> children{gen.leaf(0), gen.leaf(0)};
        root = b.add(spn::make_sum(0, std::move(children),
                                   detail::random_weights(rng, k)));
    } else {
        root = gen.sum_or_leaf(scope, 3 + static_cast<int>(rng.next_index(2)));
    }
    return spn::Network(std::move(vars), std::move(b.nodes), root);
}

/// Random structurally selective network: a chain of variable splits with
/// indicator-carrying product children, optionally sharing tails.
inline spn::Network random_selective(spn::Rng& rng, int var_count, bool share_tails = true) {
    std::vector<spn::Variable> vars = binary_variables(var_count);
    spn::NetworkBuilder b;
    detail::SelectiveGen gen{vars, b, rng, share_tails, {}};
    std::vector<int> scope;
    for (int v = 0; v < var_count; ++v) scope.push_back(v);
    int root = gen.build(scope);
    return spn::Network(std::move(vars), std::move(b.nodes), root);
}

/// Random non-selective network: mixtures whose components are products of
/// strictly positive categorical leaves, so every sum has every child live
/// on every configuration. Nested mixtures appear below the root to give
/// the augmentation's completeness repair real work.
inline spn::Network random_nonselective(spn::Rng& rng, int var_count, int depth = 2) {
    std::vector<spn::Variable> vars = binary_variables(var_count);
    spn::NetworkBuilder b;

    std::function<int(std::vector<int>, int)> mixture = [&](std::vector<int> scope,
                                                            int d) -> int {
        auto positive_leaf = [&](int v) {
            std::vector<double> probs = detail::random_weights(rng, vars[v].states.size());
            return b.add(spn::make_categorical(0, vars[v], std::move(probs)));
        };
        if (scope.size() == 1 && d <= 0) return positive_leaf(scope[0]);
        if (scope.size() == 1) {
            // mixture of two positive leaves over one variable
            std::vector<int> ch{positive_leaf(scope[0]), positive_leaf(scope[0])};
            return b.add(spn::make_sum(0, std::move(ch), detail::random_weights(rng, 2)));
        }
        size_t k = 2;
        std::vector<int> children;
        for (size_t i = 0; i < k; ++i) {
            std::vector<int> order = scope;
            rng.shuffle(order);
            size_t cut = 1 + rng.next_index(order.size() - 1);
            std::vector<int> left(order.begin(), order.begin() + cut);
            std::vector<int> right(order.begin() + cut, order.end());
            std::sort(left.begin(), left.end());
            std::sort(right.begin(), right.end());
            auto part = [&](const std::vector<int>& s) {
                if (s.size() == 1) return positive_leaf(s[0]);
                if (d > 0) return mixture(s, d - 1);
                // depth exhausted: a two-leaf mixture keeps alternation and
                // covers the whole part
                std::vector<int> inner;
                for (int v : s) inner.push_back(positive_leaf(v));
                int prod = b.add(spn::make_product(0, std::move(inner)));
                return b.add(spn::make_sum(0, {prod}, {1.0}));
            };
            int l = part(left);
            int r = part(right);
            children.push_back(b.add(spn::make_product(0, {l, r})));
        }
        return b.add(spn::make_sum(0, std::move(children), detail::random_weights(rng, k)));
    };

    std::vector<int> scope;
    for (int v = 0; v < var_count; ++v) scope.push_back(v);
    int root = mixture(scope, depth);
    return spn::Network(std::move(vars), std::move(b.nodes), root);
}

}  // namespace fixtures
