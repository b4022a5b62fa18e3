#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "spn/dataset.hpp"
#include "spn/fit.hpp"
#include "spn/model.hpp"
#include "spn/rng.hpp"

namespace spn {

/// A rectangular view into a dataset: row indices x variable indices.
struct DataSlice {
    std::vector<size_t> rows;
    std::vector<int> vars;
};

struct LearnConfig {
    int min_instances = 20;    // below this, a slice is factorized naively
    double alpha = 1.0;        // smoothing for leaf fits and clustering
    double p_value = 0.05;     // G-test significance level
    int max_clusters = 4;      // hard EM starts at min(max_clusters, rows)
    bool binary_splits = false;  // cap row clustering at 2 clusters
    uint64_t seed = 0;
};

/// Upper-tail chi-square critical value: P(X <= result) = prob.
inline double chi_squared_quantile(double prob, int dof) {
    return boost::math::quantile(boost::math::chi_squared(dof), prob);
}

namespace detail {

/// Per-row category of a slice variable for the independence test: finite
/// states as-is, continuous values binarized at the slice median (lower
/// median of the present values), missing cells as -1.
inline std::vector<int> g_test_categories(const Dataset& ds, const std::vector<size_t>& rows,
                                          int var, int* category_count) {
    const Variable& v = ds.variables[var];
    std::vector<int> out(rows.size(), -1);
    if (v.finite()) {
        *category_count = static_cast<int>(v.states.size());
        for (size_t t = 0; t < rows.size(); ++t) {
            const Cell& c = ds.rows[rows[t]][var];
            if (c.kind == Cell::kState) out[t] = c.state;
        }
        return out;
    }
    std::vector<double> present;
    for (size_t r : rows) {
        const Cell& c = ds.rows[r][var];
        if (c.kind == Cell::kReal) present.push_back(c.real);
    }
    *category_count = 2;
    if (present.empty()) return out;
    std::sort(present.begin(), present.end());
    double med = present[(present.size() - 1) / 2];
    for (size_t t = 0; t < rows.size(); ++t) {
        const Cell& c = ds.rows[rows[t]][var];
        if (c.kind == Cell::kReal) out[t] = c.real <= med ? 0 : 1;
    }
    return out;
}

}  // namespace detail

/// G statistic of the x/y contingency table over the slice rows (rows with
/// either cell missing are skipped). Returns the statistic and the degrees
/// of freedom computed from the categories that actually occur.
inline double g_statistic(const Dataset& ds, const std::vector<size_t>& rows, int x, int y,
                          int* dof) {
    int kx = 0, ky = 0;
    std::vector<int> cx = detail::g_test_categories(ds, rows, x, &kx);
    std::vector<int> cy = detail::g_test_categories(ds, rows, y, &ky);
    std::vector<double> table(static_cast<size_t>(kx) * ky, 0.0);
    double n = 0.0;
    for (size_t t = 0; t < rows.size(); ++t) {
        if (cx[t] < 0 || cy[t] < 0) continue;
        table[static_cast<size_t>(cx[t]) * ky + cy[t]] += 1.0;
        n += 1.0;
    }
    std::vector<double> rm(kx, 0.0), cm(ky, 0.0);
    for (int a = 0; a < kx; ++a)
        for (int b = 0; b < ky; ++b) {
            rm[a] += table[static_cast<size_t>(a) * ky + b];
            cm[b] += table[static_cast<size_t>(a) * ky + b];
        }
    int r = 0, c = 0;
    for (double m : rm) r += m > 0.0;
    for (double m : cm) c += m > 0.0;
    *dof = (r - 1) * (c - 1);
    if (n == 0.0 || *dof <= 0) return 0.0;
    double g = 0.0;
    for (int a = 0; a < kx; ++a)
        for (int b = 0; b < ky; ++b) {
            double o = table[static_cast<size_t>(a) * ky + b];
            if (o <= 0.0) continue;
            double e = rm[a] * cm[b] / n;
            g += o * std::log(o / e);
        }
    return 2.0 * g;
}

inline bool g_test_dependent(const Dataset& ds, const std::vector<size_t>& rows, int x,
                             int y, double p) {
    int dof = 0;
    double g = g_statistic(ds, rows, x, y, &dof);
    if (dof <= 0) return false;  // a degenerate column depends on nothing
    return g > chi_squared_quantile(1.0 - p, dof);
}

/// Partition the slice variables into groups that are pairwise-independent
/// across groups: a depth-first walk over the G-dependence relation,
/// starting from a seed-shuffled variable order (the order decides which
/// pairwise tests run, never the resulting components).
inline std::vector<std::vector<int>> split_variables(const Dataset& ds,
                                                     const DataSlice& slice, double p,
                                                     uint64_t seed) {
    std::vector<int> order = slice.vars;
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<char> done(order.size(), 0);
    std::vector<std::vector<int>> comps;
    for (size_t s = 0; s < order.size(); ++s) {
        if (done[s]) continue;
        std::vector<int> comp;
        std::vector<size_t> stack{s};
        done[s] = 1;
        while (!stack.empty()) {
            size_t cur = stack.back();
            stack.pop_back();
            comp.push_back(order[cur]);
            for (size_t u = 0; u < order.size(); ++u) {
                if (done[u]) continue;
                if (g_test_dependent(ds, slice.rows, order[cur], order[u], p)) {
                    done[u] = 1;
                    stack.push_back(u);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
    }
    // declaration order of the first member, so output is order-independent
    std::sort(comps.begin(), comps.end());
    return comps;
}

/// Maximum-likelihood univariate leaf over the present cells of a column:
/// smoothed categorical for finite variables, gaussian with population
/// variance (floored at 1e-6) for continuous ones.
inline LeafDistribution fit_univariate(const Dataset& ds, const std::vector<size_t>& rows,
                                       int var, double alpha) {
    const Variable& v = ds.variables[var];
    if (v.finite()) {
        std::vector<double> counts(v.states.size(), 0.0);
        double n = 0.0;
        for (size_t r : rows) {
            const Cell& c = ds.rows[r][var];
            if (c.kind != Cell::kState) continue;
            counts[c.state] += 1.0;
            n += 1.0;
        }
        if (n == 0.0) throw DataError("column '" + v.name + "' has no observed values");
        double denom = n + alpha * static_cast<double>(v.states.size());
        std::vector<double> probs(v.states.size());
        for (size_t s = 0; s < probs.size(); ++s) probs[s] = (counts[s] + alpha) / denom;
        return LeafDistribution{v, Categorical{std::move(probs)}};
    }
    std::vector<double> xs;
    for (size_t r : rows) {
        const Cell& c = ds.rows[r][var];
        if (c.kind == Cell::kReal) xs.push_back(c.real);
    }
    if (xs.empty()) throw DataError("column '" + v.name + "' has no observed values");
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var_acc = 0.0;
    for (double x : xs) var_acc += (x - mean) * (x - mean);
    double variance = std::max(var_acc / static_cast<double>(xs.size()), 1e-6);
    return LeafDistribution{v, Gaussian{mean, variance}};
}

/// Hard-EM naive-Bayes row clustering with k-means++-style seeding on
/// one-hot encodings. Starts from min(k, rows) clusters, runs to a fixed
/// point (at most 100 rounds), drops empty clusters. binary k = 2 gives
/// the binary-splits variant.
inline std::vector<std::vector<size_t>> cluster_instances(const Dataset& ds,
                                                          const DataSlice& slice, int k,
                                                          double alpha, uint64_t seed) {
    size_t n = slice.rows.size();
    if (n == 0) return {};
    size_t kk = std::min<size_t>(std::max(k, 1), n);

    // one-hot embedding (continuous columns min-max normalized, missing = 0)
    size_t dims = 0;
    std::vector<size_t> offset(slice.vars.size());
    std::vector<double> lo(slice.vars.size(), 0.0), hi(slice.vars.size(), 0.0);
    for (size_t c = 0; c < slice.vars.size(); ++c) {
        const Variable& v = ds.variables[slice.vars[c]];
        offset[c] = dims;
        dims += v.finite() ? v.states.size() : 1;
        if (!v.finite()) {
            bool first = true;
            for (size_t r : slice.rows) {
                const Cell& cell = ds.rows[r][slice.vars[c]];
                if (cell.kind != Cell::kReal) continue;
                if (first || cell.real < lo[c]) lo[c] = cell.real;
                if (first || cell.real > hi[c]) hi[c] = cell.real;
                first = false;
            }
        }
    }
    auto embed = [&](size_t t, std::vector<double>& out) {
        out.assign(dims, 0.0);
        for (size_t c = 0; c < slice.vars.size(); ++c) {
            const Cell& cell = ds.rows[slice.rows[t]][slice.vars[c]];
            if (cell.kind == Cell::kState)
                out[offset[c] + cell.state] = 1.0;
            else if (cell.kind == Cell::kReal)
                out[offset[c]] = hi[c] > lo[c] ? (cell.real - lo[c]) / (hi[c] - lo[c]) : 0.0;
        }
    };

    Rng rng(seed);
    std::vector<std::vector<double>> centers;
    std::vector<double> e, d2(n, 0.0);
    {
        std::vector<double> first;
        embed(rng.next_index(n), first);
        centers.push_back(std::move(first));
    }
    auto dist2 = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return s;
    };
    while (centers.size() < kk) {
        double total = 0.0;
        for (size_t t = 0; t < n; ++t) {
            embed(t, e);
            double best = dist2(e, centers[0]);
            for (size_t c = 1; c < centers.size(); ++c)
                best = std::min(best, dist2(e, centers[c]));
            d2[t] = best;
            total += best;
        }
        size_t pick;
        if (total <= 0.0) {
            pick = rng.next_index(n);
        } else {
            double u = rng.next_double() * total, acc = 0.0;
            pick = n - 1;
            for (size_t t = 0; t < n; ++t) {
                acc += d2[t];
                if (u < acc) {
                    pick = t;
                    break;
                }
            }
        }
        embed(pick, e);
        centers.push_back(e);
    }

    std::vector<int> assign(n, 0);
    for (size_t t = 0; t < n; ++t) {
        embed(t, e);
        int arg = 0;
        double best = dist2(e, centers[0]);
        for (size_t c = 1; c < centers.size(); ++c) {
            double d = dist2(e, centers[c]);
            if (d < best) {
                best = d;
                arg = static_cast<int>(c);
            }
        }
        assign[t] = arg;
    }

    // hard EM on a per-cluster naive-Bayes model
    struct ClusterModel {
        double log_prior;
        std::vector<std::vector<double>> cat;  // per slice var (finite)
        std::vector<double> mean, var;         // per slice var (continuous)
    };
    for (int round = 0; round < 100; ++round) {
        std::vector<double> sizes(kk, 0.0);
        for (int a : assign) sizes[a] += 1.0;
        std::vector<ClusterModel> models(kk);
        for (size_t c = 0; c < kk; ++c) {
            ClusterModel& m = models[c];
            m.log_prior = std::log((sizes[c] + alpha) /
                                   (static_cast<double>(n) + alpha * kk));
            m.cat.resize(slice.vars.size());
            m.mean.assign(slice.vars.size(), 0.0);
            m.var.assign(slice.vars.size(), 1.0);
        }
        for (size_t cvar = 0; cvar < slice.vars.size(); ++cvar) {
            const Variable& v = ds.variables[slice.vars[cvar]];
            if (v.finite()) {
                std::vector<std::vector<double>> counts(
                    kk, std::vector<double>(v.states.size(), 0.0));
                std::vector<double> tot(kk, 0.0);
                for (size_t t = 0; t < n; ++t) {
                    const Cell& cell = ds.rows[slice.rows[t]][slice.vars[cvar]];
                    if (cell.kind != Cell::kState) continue;
                    counts[assign[t]][cell.state] += 1.0;
                    tot[assign[t]] += 1.0;
                }
                for (size_t c = 0; c < kk; ++c) {
                    double denom = tot[c] + alpha * static_cast<double>(v.states.size());
                    models[c].cat[cvar].resize(v.states.size());
                    for (size_t s = 0; s < v.states.size(); ++s)
                        models[c].cat[cvar][s] =
                            denom > 0.0 ? (counts[c][s] + alpha) / denom
                                        : 1.0 / static_cast<double>(v.states.size());
                }
            } else {
                std::vector<double> cnt(kk, 0.0), sx(kk, 0.0), sxx(kk, 0.0);
                for (size_t t = 0; t < n; ++t) {
                    const Cell& cell = ds.rows[slice.rows[t]][slice.vars[cvar]];
                    if (cell.kind != Cell::kReal) continue;
                    cnt[assign[t]] += 1.0;
                    sx[assign[t]] += cell.real;
                    sxx[assign[t]] += cell.real * cell.real;
                }
                for (size_t c = 0; c < kk; ++c) {
                    if (cnt[c] > 0.0) {
                        double mean = sx[c] / cnt[c];
                        models[c].mean[cvar] = mean;
                        models[c].var[cvar] = std::max(sxx[c] / cnt[c] - mean * mean, 1e-6);
                    }
                }
            }
        }
        bool changed = false;
        for (size_t t = 0; t < n; ++t) {
            int arg = -1;
            double best = 0.0;
            for (size_t c = 0; c < kk; ++c) {
                double ll = models[c].log_prior;
                for (size_t cvar = 0; cvar < slice.vars.size(); ++cvar) {
                    const Cell& cell = ds.rows[slice.rows[t]][slice.vars[cvar]];
                    if (cell.kind == Cell::kState) {
                        double pr = models[c].cat[cvar][cell.state];
                        ll += pr > 0.0 ? std::log(pr) : kLogZero;
                    } else if (cell.kind == Cell::kReal) {
                        ll += gaussian_log_pdf(cell.real, models[c].mean[cvar],
                                               models[c].var[cvar]);
                    }
                }
                if (arg < 0 || ll > best) {
                    best = ll;
                    arg = static_cast<int>(c);
                }
            }
            if (arg != assign[t]) {
                assign[t] = arg;
                changed = true;
            }
        }
        if (!changed) break;
    }

    std::vector<std::vector<size_t>> clusters(kk);
    for (size_t t = 0; t < n; ++t) clusters[assign[t]].push_back(slice.rows[t]);
    std::erase_if(clusters, [](const auto& c) { return c.empty(); });
    return clusters;
}

/// Incrementally assembled node list; finalized into a Network by learn_spn.
struct NetworkBuilder {
    std::vector<Node> nodes;

    int add(Node n) {
        int id = static_cast<int>(nodes.size());
        n.id = id;
        nodes.push_back(std::move(n));
        return id;
    }
};

/// Product of independent univariate fits over the slice (the fallback
/// model); a single-variable slice elides the degenerate product.
inline int naive_factorization(NetworkBuilder& b, const Dataset& ds,
                               const DataSlice& slice, double alpha) {
    std::vector<int> leaves;
    for (int var : slice.vars)
        leaves.push_back(
            b.add(Node{0, NodeKind::kLeaf, {}, {}, fit_univariate(ds, slice.rows, var, alpha)}));
    if (leaves.size() == 1) return leaves[0];
    return b.add(make_product(0, std::move(leaves)));
}

namespace detail {

inline int learn_rec(NetworkBuilder& b, const Dataset& ds, const DataSlice& slice,
                     const LearnConfig& cfg, uint64_t seed, bool force_cluster) {
    if (slice.vars.size() == 1)
        return b.add(Node{0, NodeKind::kLeaf, {}, {},
                          fit_univariate(ds, slice.rows, slice.vars[0], cfg.alpha)});
    if (slice.rows.size() < static_cast<size_t>(cfg.min_instances))
        return naive_factorization(b, ds, slice, cfg.alpha);

    auto try_split = [&]() -> std::vector<std::vector<int>> {
        return split_variables(ds, slice, cfg.p_value, derive_seed(seed, 0));
    };
    auto build_product = [&](const std::vector<std::vector<int>>& comps) {
        std::vector<int> children;
        for (size_t i = 0; i < comps.size(); ++i)
            children.push_back(learn_rec(b, ds, DataSlice{slice.rows, comps[i]}, cfg,
                                         derive_seed(seed, 2 + i), false));
        return b.add(make_product(0, std::move(children)));
    };

    bool tried_split = false;
    if (!force_cluster) {
        auto comps = try_split();
        tried_split = true;
        if (comps.size() > 1) return build_product(comps);
    }

    int k = cfg.binary_splits ? 2 : cfg.max_clusters;
    auto clusters = cluster_instances(ds, slice, k, cfg.alpha, derive_seed(seed, 1));
    if (clusters.size() > 1) {
        std::vector<int> children;
        std::vector<double> weights;
        for (size_t i = 0; i < clusters.size(); ++i) {
            children.push_back(learn_rec(b, ds, DataSlice{clusters[i], slice.vars}, cfg,
                                         derive_seed(seed, 2 + i), false));
            weights.push_back(static_cast<double>(clusters[i].size()) /
                              static_cast<double>(slice.rows.size()));
        }
        return b.add(make_sum(0, std::move(children), std::move(weights)));
    }

    // clustering made no progress; a slice that also fails to split gets
    // factorized naively
    if (!tried_split) {
        auto comps = try_split();
        if (comps.size() > 1) return build_product(comps);
    }
    return naive_factorization(b, ds, slice, cfg.alpha);
}

/// Collapse sum-of-sum and product-of-product chains (and single-child
/// inner nodes) so the result alternates properly. The learned graph is a
/// tree, so a simple recursive rebuild does it.
inline int flatten_rec(const std::vector<Node>& in, int id, NetworkBuilder& out) {
    const Node& n = in[id];
    if (n.is_leaf()) return out.add(n);
    if (n.is_product()) {
        std::vector<int> children;
        for (int c : n.children) {
            int nc = flatten_rec(in, c, out);
            if (out.nodes[nc].is_product()) {
                for (int gc : out.nodes[nc].children) children.push_back(gc);
                out.nodes[nc].children.clear();  // orphaned; dropped on re-pack
            } else {
                children.push_back(nc);
            }
        }
        if (children.size() == 1) return children[0];
        return out.add(make_product(0, std::move(children)));
    }
    std::vector<int> children;
    std::vector<double> weights;
    for (size_t j = 0; j < n.children.size(); ++j) {
        int nc = flatten_rec(in, n.children[j], out);
        if (out.nodes[nc].is_sum()) {
            for (size_t g = 0; g < out.nodes[nc].children.size(); ++g) {
                children.push_back(out.nodes[nc].children[g]);
                weights.push_back(n.weights[j] * out.nodes[nc].weights[g]);
            }
            out.nodes[nc].children.clear();
        } else {
            children.push_back(nc);
            weights.push_back(n.weights[j]);
        }
    }
    if (children.size() == 1 && weights[0] == 1.0) return children[0];
    return out.add(make_sum(0, std::move(children), std::move(weights)));
}

/// Drop nodes orphaned by flattening and re-number densely.
inline std::pair<std::vector<Node>, int> repack(const std::vector<Node>& in, int root) {
    std::vector<int> remap(in.size(), -1);
    std::vector<Node> out;
    std::vector<int> stack{root};
    std::vector<char> seen(in.size(), 0);
    seen[root] = 1;
    std::vector<int> keep;
    while (!stack.empty()) {
        int id = stack.back();
        stack.pop_back();
        keep.push_back(id);
        for (int c : in[id].children)
            if (!seen[c]) {
                seen[c] = 1;
                stack.push_back(c);
            }
    }
    std::sort(keep.begin(), keep.end());
    for (int id : keep) {
        remap[id] = static_cast<int>(out.size());
        out.push_back(in[id]);
        out.back().id = remap[id];
    }
    for (Node& n : out)
        for (int& c : n.children) c = remap[c];
    return {std::move(out), remap[root]};
}

}  // namespace detail

/// LearnSPN. Single-variable slices become leaves; slices thinner than
/// cfg.min_instances are factorized naively; otherwise the variables are
/// split into independent groups (product node) or, failing that, the rows
/// are clustered (sum node weighted by cluster fractions). The first call
/// on the full dataset always clusters, so the root models the population
/// mixture. Fully deterministic for a given (data, cfg, seed).
inline Network learn_spn(const Dataset& ds, const LearnConfig& cfg = {}) {
    if (ds.row_count() == 0) throw DataError("cannot learn a model from an empty dataset");
    if (ds.var_count() == 0) throw DataError("dataset has no variables");
    if (cfg.min_instances < 2) throw ModelError("min_instances must be at least 2");
    if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0))
        throw ModelError("alpha must lie in [0, 1]");
    if (!(cfg.p_value > 0.0 && cfg.p_value < 1.0))
        throw ModelError("p_value must lie in (0, 1)");
    if (cfg.max_clusters < 2) throw ModelError("max_clusters must be at least 2");
    DataSlice all;
    for (size_t t = 0; t < ds.row_count(); ++t) all.rows.push_back(t);
    for (size_t v = 0; v < ds.var_count(); ++v) all.vars.push_back(static_cast<int>(v));

    NetworkBuilder b;
    int root = detail::learn_rec(b, ds, all, cfg, cfg.seed, ds.var_count() > 1);
    NetworkBuilder flat;
    root = detail::flatten_rec(b.nodes, root, flat);
    auto [nodes, new_root] = detail::repack(flat.nodes, root);
    return Network(ds.variables, std::move(nodes), new_root);
}

}  // namespace spn
