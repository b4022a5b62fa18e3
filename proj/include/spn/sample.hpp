#pragma once

#include <vector>

#include "spn/model.hpp"
#include "spn/rng.hpp"

namespace spn {

/// Ancestral sampling: descend from the root, pick one child at each sum
/// node by its weights, follow every child of a product node, and draw a
/// value at each leaf. On a complete and decomposable network every
/// variable is assigned exactly once per sample.
inline std::vector<Assignment> sample(const Network& net, size_t n, uint64_t seed) {
    net.require_evaluable();
    Rng rng(seed);
    std::vector<Assignment> out;
    out.reserve(n);
    for (size_t t = 0; t < n; ++t) {
        Assignment a;
        std::vector<int> stack{net.root()};
        while (!stack.empty()) {
            const Node& nd = net.node(stack.back());
            stack.pop_back();
            if (nd.is_sum()) {
                stack.push_back(nd.children[rng.pick_weighted(nd.weights)]);
            } else if (nd.is_product()) {
                // reverse order so children are expanded left to right
                for (size_t j = nd.children.size(); j-- > 0;)
                    stack.push_back(nd.children[j]);
            } else {
                const LeafDistribution& leaf = *nd.leaf;
                const Variable& var = leaf.variable;
                if (const auto* ind = std::get_if<Indicator>(&leaf.form)) {
                    a.set(var.name, var.states[ind->state]);
                } else if (const auto* cat = std::get_if<Categorical>(&leaf.form)) {
                    size_t s = rng.pick_weighted(cat->probs);
                    a.set(var.name, var.states[s]);
                } else {
                    const Gaussian& g = std::get<Gaussian>(leaf.form);
                    a.set(var.name, rng.next_gaussian(g.mean, std::sqrt(g.variance)));
                }
            }
        }
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace spn
