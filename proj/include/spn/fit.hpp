#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "spn/dataset.hpp"
#include "spn/derivatives.hpp"
#include "spn/model.hpp"
#include "spn/mpe.hpp"
#include "spn/rng.hpp"
#include "spn/stats.hpp"

namespace spn {

struct FitConfig {
    double learning_rate = 0.1;
    int epochs = 100;
    int batch = 0;        // 0 or >= row count: batch GD; 1: stochastic; else mini-batch
    double alpha = 0.0;   // Laplace smoothing for the count-based M-steps
    double tol = 1e-6;    // stop once max |weight change| over an epoch drops below
    uint64_t seed = 0;
    int threads = 1;
    bool update_leaves = true;  // soft EM also refits leaf parameters
};

struct TraceEntry {
    int epoch;
    double log_lik;    // on the full data, after this epoch's updates
    double max_delta;  // max absolute weight change during the epoch
};

struct FitResult {
    Network network;
    std::vector<TraceEntry> trace;
    bool converged = false;
};

namespace detail {

inline void check_alpha(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ModelError("alpha must lie in [0, 1]");
}

/// (n_j + alpha) / sum_j' (n_j' + alpha); uniform when the whole node saw
/// no mass and there is no smoothing to break the tie.
inline std::vector<double> mle_weights(std::span<const double> counts, double alpha) {
    std::vector<double> w(counts.size());
    double denom = 0.0;
    for (double c : counts) denom += c + alpha;
    if (denom <= 0.0) {
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(counts.size()));
        return w;
    }
    for (size_t j = 0; j < counts.size(); ++j) w[j] = (counts[j] + alpha) / denom;
    return w;
}

inline Network rebuild(const Network& net, std::vector<Node> nodes) {
    return Network(net.variables(), std::move(nodes), net.root());
}

}  // namespace detail

/// Divide each sum node's weights by their total. Already-normalized
/// weights (total exactly 1.0) come back bit-identical.
inline Network renormalize(const Network& net) {
    std::vector<Node> nodes = net.nodes();
    for (Node& n : nodes) {
        if (!n.is_sum()) continue;
        double total = 0.0;
        for (double w : n.weights) {
            if (w < 0.0)
                throw NumericError("node " + std::to_string(n.id) +
                                   ": cannot renormalize negative weights");
            total += w;
        }
        if (total <= 0.0)
            throw NumericError("node " + std::to_string(n.id) +
                               ": cannot renormalize zero total weight");
        for (double& w : n.weights) w /= total;
    }
    return detail::rebuild(net, std::move(nodes));
}

/// Closed-form maximum-likelihood weights for a selective network from
/// hard traversal counts. Zero-probability rows are skipped (they carry no
/// induced tree); count_stats_selective reports them if you need the list.
inline Network mle_selective(const Network& net, const std::vector<ResolvedRow>& rows,
                             double alpha = 0.0, int threads = 1) {
    detail::check_alpha(alpha);
    SelectiveCounts sc = count_stats_selective(net, rows, threads);
    std::vector<Node> nodes = net.nodes();
    for (Node& n : nodes)
        if (n.is_sum()) n.weights = detail::mle_weights(sc.counts.by_node[n.id], alpha);
    return detail::rebuild(net, std::move(nodes));
}

inline Network mle_selective(const Network& net, const Dataset& ds, double alpha = 0.0,
                             int threads = 1) {
    return mle_selective(net, resolve_rows(net, ds), alpha, threads);
}

/// dL_D/dw_ij = sum_t S_i'(v_t) * S_j(v_t), accumulated per edge. The
/// finite-difference counterpart perturbs the raw weight without
/// renormalizing, which is exactly what this matches.
inline EdgeValues gradient(const Network& net, const std::vector<ResolvedRow>& rows,
                           std::span<const size_t> subset = {}, int threads = 1) {
    size_t n = subset.empty() ? rows.size() : subset.size();
    auto row_at = [&](size_t t) -> const ResolvedRow& {
        return subset.empty() ? rows[t] : rows[subset[t]];
    };
    return detail::accumulate_rows<EdgeValues>(
        n, threads, EdgeValues::zeros(net),
        [&](EdgeValues& acc, size_t t) {
            Evaluation ev = evaluate(net, row_at(t));
            if (is_log_zero(ev.log_value())) {
                size_t idx = subset.empty() ? t : subset[t];
                throw NumericError("row " + std::to_string(idx) +
                                   " has zero probability; the gradient is undefined");
            }
            DerivativeMap dm = derivatives(net, std::move(ev));
            for (const Node& nd : net.nodes()) {
                if (!nd.is_sum()) continue;
                double ld = dm.log_derivatives[nd.id];
                if (is_log_zero(ld)) continue;
                for (size_t j = 0; j < nd.children.size(); ++j) {
                    double lv = dm.eval.log_values[nd.children[j]];
                    if (is_log_zero(lv)) continue;
                    acc.at(nd.id, j) += std::exp(ld + lv);
                }
            }
        },
        [](EdgeValues& a, const EdgeValues& b) { a.add(b); });
}

inline EdgeValues gradient(const Network& net, const Dataset& ds, int threads = 1) {
    return gradient(net, resolve_rows(net, ds), {}, threads);
}

/// Projected gradient ascent on the data log-likelihood: w += lr * grad,
/// negatives clamped to zero, then per-node renormalization. A node whose
/// weights did not move is left untouched bit-for-bit, so lr = 0 is a true
/// no-op. Batch, stochastic, or mini-batch per cfg.batch; shuffling is
/// seeded and batches are contiguous after the shuffle.
inline FitResult gd_fit(const Network& net, const std::vector<ResolvedRow>& rows,
                        const FitConfig& cfg = {}) {
    if (cfg.epochs < 1) throw ModelError("epochs must be at least 1");
    if (cfg.learning_rate < 0.0) throw ModelError("learning rate must be non-negative");
    std::vector<Node> nodes = net.nodes();
    Rng rng(cfg.seed);
    std::vector<size_t> order(rows.size());
    for (size_t t = 0; t < rows.size(); ++t) order[t] = t;
    size_t batch = (cfg.batch <= 0 || static_cast<size_t>(cfg.batch) >= rows.size())
                       ? rows.size()
                       : static_cast<size_t>(cfg.batch);

    std::vector<TraceEntry> trace;
    bool converged = false;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::vector<double>> start_weights(nodes.size());
        for (const Node& n : nodes)
            if (n.is_sum()) start_weights[n.id] = n.weights;
        if (batch < rows.size()) rng.shuffle(order);
        for (size_t lo = 0; lo < rows.size(); lo += batch) {
            size_t hi = std::min(lo + batch, rows.size());
            Network cur = detail::rebuild(net, nodes);
            EdgeValues g = gradient(cur, rows,
                                    std::span<const size_t>(order).subspan(lo, hi - lo),
                                    cfg.threads);
            for (Node& n : nodes) {
                if (!n.is_sum()) continue;
                std::vector<double> w = n.weights;
                bool moved = false;
                for (size_t j = 0; j < w.size(); ++j) {
                    double nw = w[j] + cfg.learning_rate * g.at(n.id, j);
                    if (nw != w[j]) moved = true;
                    w[j] = nw;
                }
                if (!moved) continue;
                double total = 0.0;
                for (double& x : w) {
                    if (x < 0.0) x = 0.0;
                    total += x;
                }
                if (total > 0.0)
                    for (double& x : w) x /= total;
                else
                    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
                n.weights = std::move(w);
            }
        }
        Network cur = detail::rebuild(net, nodes);
        double ll = log_likelihood(cur, rows, cfg.threads);
        double delta = 0.0;
        for (const Node& n : nodes)
            if (n.is_sum())
                for (size_t j = 0; j < n.weights.size(); ++j)
                    delta = std::max(delta,
                                     std::abs(n.weights[j] - start_weights[n.id][j]));
        trace.push_back(TraceEntry{epoch, ll, delta});
        if (std::isnan(ll))
            throw NumericError("gradient ascent diverged: log-likelihood is NaN after epoch " +
                               std::to_string(epoch));
        if (delta < cfg.tol) {
            converged = true;
            break;
        }
    }
    return FitResult{detail::rebuild(net, std::move(nodes)), std::move(trace), converged};
}

inline FitResult gd_fit(const Network& net, const Dataset& ds, const FitConfig& cfg = {}) {
    return gd_fit(net, resolve_rows(net, ds), cfg);
}

namespace detail {

struct EmAccumulator {
    EdgeValues soft;
    std::vector<std::vector<double>> cat;       // per leaf node, per state
    std::vector<std::array<double, 3>> gauss;   // per leaf node: n, sum x, sum x^2

    static EmAccumulator zeros(const Network& net) {
        EmAccumulator a;
        a.soft = EdgeValues::zeros(net);
        a.cat.resize(net.size());
        a.gauss.assign(net.size(), {0.0, 0.0, 0.0});
        for (const Node& n : net.nodes())
            if (n.is_leaf())
                if (const auto* c = std::get_if<Categorical>(&n.leaf->form))
                    a.cat[n.id].assign(c->probs.size(), 0.0);
        return a;
    }

    void add(const EmAccumulator& o) {
        soft.add(o.soft);
        for (size_t i = 0; i < cat.size(); ++i)
            for (size_t s = 0; s < cat[i].size(); ++s) cat[i][s] += o.cat[i][s];
        for (size_t i = 0; i < gauss.size(); ++i)
            for (int k = 0; k < 3; ++k) gauss[i][k] += o.gauss[i][k];
    }
};

}  // namespace detail

/// Soft EM. E-step: expected edge traversals n_ij = sum_t w_ij * S_i'(v_t)
/// * S_j(v_t) (partial rows marginalize the unbound variables away on
/// their own). M-step: the MLE weight formula on the soft counts, plus
/// responsibility-weighted refits of categorical and gaussian leaves
/// (variance floored at 1e-6). Stops when the largest weight change falls
/// below cfg.tol or the epoch budget runs out.
inline FitResult em_fit(const Network& net, const std::vector<ResolvedRow>& rows,
                        const FitConfig& cfg = {}) {
    if (cfg.epochs < 1) throw ModelError("epochs must be at least 1");
    detail::check_alpha(cfg.alpha);
    std::vector<Node> nodes = net.nodes();
    std::vector<TraceEntry> trace;
    bool converged = false;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Network cur = detail::rebuild(net, nodes);
        detail::EmAccumulator acc = detail::accumulate_rows<detail::EmAccumulator>(
            rows.size(), cfg.threads, detail::EmAccumulator::zeros(cur),
            [&](detail::EmAccumulator& a, size_t t) {
                Evaluation ev = evaluate(cur, rows[t]);
                if (is_log_zero(ev.log_value()))
                    throw NumericError("row " + std::to_string(t) +
                                       " has zero probability; EM cannot proceed");
                DerivativeMap dm = derivatives(cur, std::move(ev));
                for (const Node& nd : cur.nodes()) {
                    double ld = dm.log_derivatives[nd.id];
                    if (is_log_zero(ld)) continue;
                    if (nd.is_sum()) {
                        for (size_t j = 0; j < nd.children.size(); ++j) {
                            if (nd.weights[j] <= 0.0) continue;
                            double lv = dm.eval.log_values[nd.children[j]];
                            if (is_log_zero(lv)) continue;
                            a.soft.at(nd.id, j) +=
                                nd.weights[j] * std::exp(ld + lv);
                        }
                    } else if (nd.is_leaf() && cfg.update_leaves) {
                        double f = std::exp(ld + dm.eval.log_values[nd.id]);
                        if (f <= 0.0) continue;
                        int v = cur.var_index(nd.leaf->variable.name);
                        if (const auto* c = std::get_if<Categorical>(&nd.leaf->form)) {
                            if (rows[t].is_bound(v)) {
                                a.cat[nd.id][rows[t].state[v]] += f;
                            } else {
                                for (size_t s = 0; s < c->probs.size(); ++s)
                                    a.cat[nd.id][s] += f * c->probs[s];
                            }
                        } else if (const auto* g = std::get_if<Gaussian>(&nd.leaf->form)) {
                            double x = rows[t].is_bound(v) ? rows[t].real[v] : g->mean;
                            double xx = rows[t].is_bound(v)
                                            ? x * x
                                            : g->variance + g->mean * g->mean;
                            a.gauss[nd.id][0] += f;
                            a.gauss[nd.id][1] += f * x;
                            a.gauss[nd.id][2] += f * xx;
                        }
                    }
                }
            },
            [](detail::EmAccumulator& a, const detail::EmAccumulator& b) { a.add(b); });

        double delta = 0.0;
        for (Node& n : nodes) {
            if (n.is_sum()) {
                std::vector<double> w =
                    detail::mle_weights(acc.soft.by_node[n.id], cfg.alpha);
                for (size_t j = 0; j < w.size(); ++j)
                    delta = std::max(delta, std::abs(w[j] - n.weights[j]));
                n.weights = std::move(w);
            } else if (n.is_leaf() && cfg.update_leaves) {
                if (auto* c = std::get_if<Categorical>(&n.leaf->form)) {
                    double denom = 0.0;
                    for (double x : acc.cat[n.id]) denom += x;
                    denom += cfg.alpha * static_cast<double>(c->probs.size());
                    if (denom > 0.0)
                        for (size_t s = 0; s < c->probs.size(); ++s)
                            c->probs[s] = (acc.cat[n.id][s] + cfg.alpha) / denom;
                } else if (auto* g = std::get_if<Gaussian>(&n.leaf->form)) {
                    double fn = acc.gauss[n.id][0];
                    if (fn > 0.0) {
                        double mean = acc.gauss[n.id][1] / fn;
                        double var = acc.gauss[n.id][2] / fn - mean * mean;
                        g->mean = mean;
                        g->variance = std::max(var, 1e-6);
                    }
                }
            }
        }
        Network updated = detail::rebuild(net, nodes);
        double ll = log_likelihood(updated, rows, cfg.threads);
        trace.push_back(TraceEntry{epoch, ll, delta});
        if (std::isnan(ll))
            throw NumericError("EM diverged: log-likelihood is NaN after epoch " +
                               std::to_string(epoch));
        if (delta < cfg.tol) {
            converged = true;
            break;
        }
    }
    return FitResult{detail::rebuild(net, std::move(nodes)), std::move(trace), converged};
}

inline FitResult em_fit(const Network& net, const Dataset& ds, const FitConfig& cfg = {}) {
    return em_fit(net, resolve_rows(net, ds), cfg);
}

/// Hard EM: each row contributes one count to the single best child of
/// every traversed sum node, found with the max-product pass under the row
/// as evidence (ties to the lowest child id). Rows may be partial. The
/// M-step is the MLE weight formula; leaves are not refit.
inline FitResult hard_em_fit(const Network& net, const std::vector<ResolvedRow>& rows,
                             const FitConfig& cfg = {}) {
    if (cfg.epochs < 1) throw ModelError("epochs must be at least 1");
    detail::check_alpha(cfg.alpha);
    std::vector<Node> nodes = net.nodes();
    std::vector<TraceEntry> trace;
    bool converged = false;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Network cur = detail::rebuild(net, nodes);
        EdgeValues counts = detail::accumulate_rows<EdgeValues>(
            rows.size(), cfg.threads, EdgeValues::zeros(cur),
            [&](EdgeValues& acc, size_t t) {
                detail::MaxPass mp = detail::max_upward(cur, rows[t]);
                if (is_log_zero(mp.log_max[cur.root()]))
                    throw NumericError("row " + std::to_string(t) +
                                       " has zero probability; hard EM cannot proceed");
                std::vector<int> stack{cur.root()};
                std::vector<char> seen(cur.size(), 0);
                while (!stack.empty()) {
                    int id = stack.back();
                    stack.pop_back();
                    if (seen[id]) continue;
                    seen[id] = 1;
                    const Node& n = cur.node(id);
                    if (n.is_leaf()) continue;
                    if (n.is_product()) {
                        for (int c : n.children) stack.push_back(c);
                        continue;
                    }
                    int best = mp.best_child[id];
                    for (size_t j = 0; j < n.children.size(); ++j)
                        if (n.children[j] == best) acc.at(id, j) += 1.0;
                    stack.push_back(best);
                }
            },
            [](EdgeValues& a, const EdgeValues& b) { a.add(b); });

        double delta = 0.0;
        for (Node& n : nodes) {
            if (!n.is_sum()) continue;
            std::vector<double> w = detail::mle_weights(counts.by_node[n.id], cfg.alpha);
            for (size_t j = 0; j < w.size(); ++j)
                delta = std::max(delta, std::abs(w[j] - n.weights[j]));
            n.weights = std::move(w);
        }
        Network updated = detail::rebuild(net, nodes);
        double ll = log_likelihood(updated, rows, cfg.threads);
        trace.push_back(TraceEntry{epoch, ll, delta});
        if (std::isnan(ll))
            throw NumericError("hard EM diverged: log-likelihood is NaN after epoch " +
                               std::to_string(epoch));
        if (delta < cfg.tol) {
            converged = true;
            break;
        }
    }
    return FitResult{detail::rebuild(net, std::move(nodes)), std::move(trace), converged};
}

inline FitResult hard_em_fit(const Network& net, const Dataset& ds,
                             const FitConfig& cfg = {}) {
    return hard_em_fit(net, resolve_rows(net, ds), cfg);
}

}  // namespace spn
