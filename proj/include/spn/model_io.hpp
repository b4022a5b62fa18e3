#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "spn/dataset.hpp"
#include "spn/model.hpp"
#include "spn/validate.hpp"

namespace spn {

namespace detail {

/// 17 significant digits: enough that parsing gives back the exact double,
/// so saving and reloading a model is byte-stable.
inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
}

}  // namespace detail

/// Line-oriented text form:
///
///   spn 1
///   variable NAME finite STATE...   |  variable NAME continuous
///   node ID sum children C... weights W...
///   node ID product children C...
///   node ID leaf indicator VAR STATE
///   node ID leaf categorical VAR P...
///   node ID leaf gaussian VAR MEAN VARIANCE
///   root ID
///
/// Node ids are dense and ascending; children may reference later ids.
/// Blank lines and lines starting with '#' are ignored on input.
inline void save_network(std::ostream& os, const Network& net) {
    os << "spn 1\n";
    for (const Variable& v : net.variables()) {
        os << "variable " << v.name;
        if (v.finite()) {
            os << " finite";
            for (const std::string& s : v.states) os << " " << s;
        } else {
            os << " continuous";
        }
        os << "\n";
    }
    for (const Node& n : net.nodes()) {
        os << "node " << n.id;
        if (n.is_sum()) {
            os << " sum children";
            for (int c : n.children) os << " " << c;
            os << " weights";
            for (double w : n.weights) os << " " << detail::format_double(w);
        } else if (n.is_product()) {
            os << " product children";
            for (int c : n.children) os << " " << c;
        } else {
            os << " leaf ";
            const LeafDistribution& lf = *n.leaf;
            if (const auto* ind = std::get_if<Indicator>(&lf.form)) {
                os << "indicator " << lf.variable.name << " "
                   << lf.variable.states[ind->state];
            } else if (const auto* cat = std::get_if<Categorical>(&lf.form)) {
                os << "categorical " << lf.variable.name;
                for (double p : cat->probs) os << " " << detail::format_double(p);
            } else {
                const auto& g = std::get<Gaussian>(lf.form);
                os << "gaussian " << lf.variable.name << " " << detail::format_double(g.mean)
                   << " " << detail::format_double(g.variance);
            }
        }
        os << "\n";
    }
    os << "root " << net.root() << "\n";
}

inline std::string to_text(const Network& net) {
    std::ostringstream os;
    save_network(os, net);
    return os.str();
}

inline void save_network_file(const std::string& path, const Network& net) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ModelError("cannot open '" + path + "' for writing");
    save_network(out, net);
    if (!out) throw ModelError("failed while writing '" + path + "'");
}

struct LoadOptions {
    bool strict = true;   // reject models that fail validate()
    double tol = 1e-9;
};

inline Network load_network(std::istream& is, const LoadOptions& opts = {}) {
    std::vector<Variable> vars;
    std::vector<Node> nodes;
    int root = -1;
    bool saw_header = false, saw_root = false;

    auto var_named = [&](const std::string& name) -> const Variable* {
        for (const Variable& v : vars)
            if (v.name == name) return &v;
        return nullptr;
    };

    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& msg) -> void {
        throw ModelError("line " + std::to_string(lineno) + ": " + msg);
    };
    auto want_int = [&](const std::string& tok, const char* what) {
        int value = 0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
            fail(std::string("expected ") + what + ", got '" + tok + "'");
        return value;
    };
    auto want_real = [&](const std::string& tok, const char* what) {
        double value = 0.0;
        if (!detail::parse_real(tok, &value))
            fail(std::string("expected ") + what + ", got '" + tok + "'");
        return value;
    };

    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.empty() || tok[0][0] == '#') continue;

        if (!saw_header) {
            if (tok[0] != "spn") fail("file must start with 'spn 1'");
            if (tok.size() != 2 || tok[1] != "1")
                fail("unsupported format version" + (tok.size() > 1 ? " '" + tok[1] + "'" : ""));
            saw_header = true;
            continue;
        }
        if (tok[0] == "spn") fail("duplicate header");

        if (tok[0] == "variable") {
            if (tok.size() < 3) fail("variable needs a name and a kind");
            if (var_named(tok[1])) fail("duplicate variable '" + tok[1] + "'");
            Variable v;
            v.name = tok[1];
            if (tok[2] == "finite") {
                if (tok.size() < 4) fail("finite variable '" + tok[1] + "' needs states");
                v.states.assign(tok.begin() + 3, tok.end());
            } else if (tok[2] == "continuous") {
                if (tok.size() != 3) fail("continuous variable takes no states");
            } else {
                fail("variable kind must be 'finite' or 'continuous', got '" + tok[2] + "'");
            }
            vars.push_back(std::move(v));
            continue;
        }

        if (tok[0] == "node") {
            if (tok.size() < 3) fail("node needs an id and a kind");
            int id = want_int(tok[1], "a node id");
            if (id != static_cast<int>(nodes.size()))
                fail("node ids must be dense and ascending; expected " +
                     std::to_string(nodes.size()));
            const std::string& kind = tok[2];
            if (kind == "sum" || kind == "product") {
                if (tok.size() < 4 || tok[3] != "children") fail("expected 'children'");
                std::vector<int> children;
                size_t t = 4;
                while (t < tok.size() && tok[t] != "weights")
                    children.push_back(want_int(tok[t++], "a child id"));
                if (children.empty()) fail("inner node needs at least one child");
                if (kind == "product") {
                    if (t != tok.size()) fail("product nodes take no weights");
                    nodes.push_back(make_product(id, std::move(children)));
                } else {
                    if (t == tok.size()) fail("sum node needs weights");
                    ++t;  // skip 'weights'
                    std::vector<double> weights;
                    while (t < tok.size()) weights.push_back(want_real(tok[t++], "a weight"));
                    if (weights.size() != children.size())
                        fail("sum node has " + std::to_string(children.size()) +
                             " children but " + std::to_string(weights.size()) + " weights");
                    nodes.push_back(Node{id, NodeKind::kSum, std::move(children),
                                         std::move(weights), std::nullopt});
                }
            } else if (kind == "leaf") {
                if (tok.size() < 5) fail("leaf needs a form and a variable");
                const std::string& form = tok[3];
                const Variable* v = var_named(tok[4]);
                if (!v) fail("unknown variable '" + tok[4] + "'");
                if (form == "indicator") {
                    if (tok.size() != 6) fail("indicator leaf takes one state");
                    if (!v->finite()) fail("'" + v->name + "' is continuous");
                    nodes.push_back(make_indicator(id, *v, tok[5]));
                } else if (form == "categorical") {
                    if (!v->finite()) fail("'" + v->name + "' is continuous");
                    std::vector<double> probs;
                    for (size_t t = 5; t < tok.size(); ++t)
                        probs.push_back(want_real(tok[t], "a probability"));
                    if (probs.size() != v->states.size())
                        fail("categorical over '" + v->name + "' needs " +
                             std::to_string(v->states.size()) + " probabilities");
                    nodes.push_back(make_categorical(id, *v, std::move(probs)));
                } else if (form == "gaussian") {
                    if (tok.size() != 7) fail("gaussian leaf takes mean and variance");
                    if (v->finite()) fail("'" + v->name + "' is finite");
                    nodes.push_back(make_gaussian(id, *v, want_real(tok[5], "a mean"),
                                                  want_real(tok[6], "a variance")));
                } else {
                    fail("unknown leaf form '" + form + "'");
                }
            } else {
                fail("unknown node kind '" + kind + "'");
            }
            continue;
        }

        if (tok[0] == "root") {
            if (tok.size() != 2) fail("root takes one node id");
            if (saw_root) fail("duplicate root line");
            root = want_int(tok[1], "a node id");
            saw_root = true;
            continue;
        }

        fail("unknown directive '" + tok[0] + "'");
    }

    if (!saw_header) throw ModelError("empty model: missing 'spn 1' header");
    if (nodes.empty()) throw ModelError("model has no nodes");
    if (!saw_root) throw ModelError("model has no root line");

    Network net(std::move(vars), std::move(nodes), root);
    if (opts.strict) {
        ValidityReport rep = validate(net, opts.tol);
        if (!rep.passed())
            throw ModelError("model fails validation:\n" + rep.summary());
    }
    return net;
}

inline Network load_network_file(const std::string& path, const LoadOptions& opts = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError("cannot open '" + path + "'");
    return load_network(in, opts);
}

/// Full joint over finite-state variables, enumerated the same way the
/// exhaustive checks do (declaration order, last variable fastest).
struct JointTable {
    std::vector<Variable> variables;
    std::vector<double> values;  // one per configuration
    double total = 0.0;

    size_t index_of(const std::vector<int>& states) const {
        size_t idx = 0;
        for (size_t v = 0; v < variables.size(); ++v)
            idx = idx * variables[v].states.size() + static_cast<size_t>(states[v]);
        return idx;
    }
    double at(const std::vector<int>& states) const { return values[index_of(states)]; }
};

inline JointTable brute_force_table(const Network& net, uint64_t cap = uint64_t{1} << 20) {
    uint64_t total = detail::enumerable_size(net.variables(), cap);
    if (total == 0)
        throw ModelError("joint table needs a finite-state network with at most " +
                         std::to_string(cap) + " configurations");
    JointTable table;
    table.variables = net.variables();
    table.values.reserve(total);
    detail::for_each_config(net.variables(), [&](const ResolvedRow& row) {
        double v = evaluate(net, row).value();
        table.values.push_back(v);
        table.total += v;
        return true;
    });
    return table;
}

}  // namespace spn
