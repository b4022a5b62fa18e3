#pragma once

#include <cmath>
#include <vector>

#include "spn/evaluate.hpp"
#include "spn/model.hpp"

namespace spn {

/// Per-node derivatives S_i'(x) = (1/S(x)) * dS/dS_i. The root entry is
/// always 1/S(x); a node that only sits under zero-valued branches gets 0.
struct DerivativeMap {
    std::vector<double> log_derivatives;
    std::vector<double> derivatives;  // linear space, exp of the above
    Evaluation eval;

    double at(int id) const { return derivatives[id]; }
};

/// Downward pass. Product fan-out uses forward/backward prefix sums of the
/// children's log values (the all-but-one products), never a division, so
/// zero-valued siblings are handled exactly.
inline DerivativeMap derivatives(const Network& net, Evaluation ev) {
    if (is_log_zero(ev.log_value()))
        throw NumericError("derivatives undefined: S(x) = 0");
    DerivativeMap dm;
    dm.log_derivatives.assign(net.size(), kLogZero);
    dm.log_derivatives[net.root()] = -ev.log_value();

    const auto& order = net.topo_order();
    std::vector<double> fwd, bwd;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const Node& n = net.node(*it);
        if (n.is_leaf()) continue;
        double ld = dm.log_derivatives[n.id];
        if (is_log_zero(ld)) continue;
        if (n.is_sum()) {
            for (size_t j = 0; j < n.children.size(); ++j) {
                if (n.weights[j] <= 0.0) continue;
                double c = ld + std::log(n.weights[j]);
                double& slot = dm.log_derivatives[n.children[j]];
                slot = log_add(slot, c);
            }
        } else {
            size_t m = n.children.size();
            fwd.assign(m + 1, 0.0);
            bwd.assign(m + 1, 0.0);
            for (size_t j = 0; j < m; ++j)
                fwd[j + 1] = fwd[j] + ev.log_values[n.children[j]];
            for (size_t j = m; j-- > 0;)
                bwd[j] = bwd[j + 1] + ev.log_values[n.children[j]];
            for (size_t j = 0; j < m; ++j) {
                double c = ld + fwd[j] + bwd[j + 1];
                if (is_log_zero(c)) continue;
                double& slot = dm.log_derivatives[n.children[j]];
                slot = log_add(slot, c);
            }
        }
    }
    dm.derivatives.resize(net.size());
    for (size_t i = 0; i < net.size(); ++i)
        dm.derivatives[i] = std::exp(dm.log_derivatives[i]);
    dm.eval = std::move(ev);
    return dm;
}

inline DerivativeMap derivatives(const Network& net, const ResolvedRow& row) {
    return derivatives(net, evaluate(net, row));
}

inline DerivativeMap derivatives(const Network& net, const Assignment& x) {
    return derivatives(net, evaluate(net, x));
}

}  // namespace spn
