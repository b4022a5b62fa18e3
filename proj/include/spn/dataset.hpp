#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spn/error.hpp"
#include "spn/model.hpp"

namespace spn {

struct Cell {
    enum Kind { kMissing, kState, kReal } kind = kMissing;
    int state = -1;
    double real = 0.0;

    static Cell missing() { return Cell{}; }
    static Cell of_state(int s) { return Cell{kState, s, 0.0}; }
    static Cell of_real(double x) { return Cell{kReal, -1, x}; }
};

/// A table of (possibly partial) rows over a fixed variable list. Finite
/// cells store state indices into the owning variable's label list.
struct Dataset {
    std::vector<Variable> variables;
    std::vector<std::vector<Cell>> rows;

    size_t row_count() const { return rows.size(); }
    size_t var_count() const { return variables.size(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline bool parse_real(const std::string& s, double* out) {
    char* end = nullptr;
    double x = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') return false;
    *out = x;
    return true;
}

}  // namespace detail

/// Load a comma-separated dataset. The first non-comment line is a header
/// of variable names; empty cells are missing values. Column types come
/// from `schema` when given (a model's variable list), else from leading
/// comment lines of the form `# NAME state state ...` or `# NAME real`,
/// else they are inferred: all-numeric columns become continuous, anything
/// else finite with the sorted distinct labels as states.
inline Dataset load_dataset(std::istream& in, const std::vector<Variable>* schema = nullptr) {
    std::vector<std::string> lines;
    std::map<std::string, Variable> declared;
    std::string line;
    size_t lineno = 0, header_line = 0;
    std::vector<std::string> names;
    std::vector<std::vector<std::string>> raw;
    std::vector<size_t> raw_lineno;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            if (!names.empty()) continue;  // comments after the header are plain comments
            std::istringstream ss(t.substr(1));
            std::string name, tok;
            if (!(ss >> name)) continue;
            Variable v{name, {}};
            while (ss >> tok) v.states.push_back(tok);
            if (v.states.size() == 1 && v.states[0] == "real") v.states.clear();
            declared[name] = v;
            continue;
        }
        if (names.empty()) {
            names = detail::split_csv(t);
            header_line = lineno;
            for (const std::string& n : names)
                if (n.empty())
                    throw DataError("line " + std::to_string(lineno) +
                                    ": empty column name in header");
        } else {
            auto cells = detail::split_csv(t);
            if (cells.size() != names.size())
                throw DataError("line " + std::to_string(lineno) + ": row has " +
                                std::to_string(cells.size()) + " cells, header has " +
                                std::to_string(names.size()));
            raw.push_back(std::move(cells));
            raw_lineno.push_back(lineno);
        }
    }
    if (names.empty()) throw DataError("dataset has no header row");
    (void)header_line;

    Dataset ds;
    for (size_t c = 0; c < names.size(); ++c) {
        const std::string& name = names[c];
        if (schema) {
            const Variable* found = nullptr;
            for (const Variable& v : *schema)
                if (v.name == name) found = &v;
            if (!found)
                throw DataError("column '" + name + "' is not a model variable");
            ds.variables.push_back(*found);
        } else if (auto it = declared.find(name); it != declared.end()) {
            ds.variables.push_back(it->second);
        } else {
            bool numeric = true;
            std::set<std::string> labels;
            for (const auto& row : raw) {
                if (row[c].empty()) continue;
                double x;
                if (!detail::parse_real(row[c], &x)) numeric = false;
                labels.insert(row[c]);
            }
            Variable v{name, {}};
            if (!numeric) v.states.assign(labels.begin(), labels.end());
            ds.variables.push_back(std::move(v));
        }
    }

    for (size_t r = 0; r < raw.size(); ++r) {
        std::vector<Cell> row(names.size());
        for (size_t c = 0; c < names.size(); ++c) {
            const std::string& cell = raw[r][c];
            if (cell.empty()) continue;
            const Variable& var = ds.variables[c];
            std::string at = "line " + std::to_string(raw_lineno[r]) + ", column '" +
                             var.name + "'";
            if (var.finite()) {
                int s = var.state_index(cell);
                if (s < 0)
                    throw DataError(at + ": unknown state '" + cell + "'");
                row[c] = Cell::of_state(s);
            } else {
                double x;
                if (!detail::parse_real(cell, &x))
                    throw DataError(at + ": '" + cell + "' is not a number");
                row[c] = Cell::of_real(x);
            }
        }
        ds.rows.push_back(std::move(row));
    }
    return ds;
}

inline Dataset load_dataset_file(const std::string& path,
                                 const std::vector<Variable>* schema = nullptr) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset '" + path + "'");
    return load_dataset(in, schema);
}

inline void save_dataset(std::ostream& out, const Dataset& ds) {
    for (size_t c = 0; c < ds.variables.size(); ++c)
        out << (c ? "," : "") << ds.variables[c].name;
    out << "\n";
    char buf[64];
    for (const auto& row : ds.rows) {
        for (size_t c = 0; c < row.size(); ++c) {
            if (c) out << ",";
            switch (row[c].kind) {
                case Cell::kMissing: break;
                case Cell::kState: out << ds.variables[c].states[row[c].state]; break;
                case Cell::kReal:
                    std::snprintf(buf, sizeof buf, "%.17g", row[c].real);
                    out << buf;
                    break;
            }
        }
        out << "\n";
    }
}

/// Turn complete or partial Assignments (e.g. samples) into a Dataset over
/// the given variables.
inline Dataset make_dataset(const std::vector<Variable>& vars,
                            const std::vector<Assignment>& rows) {
    Dataset ds;
    ds.variables = vars;
    for (const Assignment& a : rows) {
        std::vector<Cell> row(vars.size());
        for (size_t c = 0; c < vars.size(); ++c) {
            auto it = a.bindings().find(vars[c].name);
            if (it == a.bindings().end()) continue;
            if (std::holds_alternative<double>(it->second)) {
                row[c] = Cell::of_real(std::get<double>(it->second));
            } else {
                int s = vars[c].state_index(std::get<std::string>(it->second));
                if (s < 0)
                    throw DataError("assignment binds '" + vars[c].name +
                                    "' to unknown state '" +
                                    std::get<std::string>(it->second) + "'");
                row[c] = Cell::of_state(s);
            }
        }
        ds.rows.push_back(std::move(row));
    }
    return ds;
}

/// Map dataset rows onto a network's variables by name. Dataset columns
/// must all exist in the network with matching state labels; network
/// variables without a column are simply never bound.
inline std::vector<ResolvedRow> resolve_rows(const Network& net, const Dataset& ds) {
    std::vector<int> to_net(ds.var_count());
    std::vector<std::vector<int>> state_map(ds.var_count());
    for (size_t c = 0; c < ds.var_count(); ++c) {
        const Variable& dv = ds.variables[c];
        int v = net.var_index(dv.name);
        if (v < 0) throw DataError("dataset column '" + dv.name + "' is not a model variable");
        const Variable& nv = net.variable(v);
        if (dv.finite() != nv.finite())
            throw DataError("dataset column '" + dv.name + "' disagrees with the model type");
        to_net[c] = v;
        if (dv.finite()) {
            state_map[c].resize(dv.states.size());
            for (size_t s = 0; s < dv.states.size(); ++s) {
                int t = nv.state_index(dv.states[s]);
                if (t < 0)
                    throw DataError("dataset state '" + dv.states[s] + "' of '" +
                                    dv.name + "' is not a model state");
                state_map[c][s] = t;
            }
        }
    }
    std::vector<ResolvedRow> out;
    out.reserve(ds.row_count());
    for (const auto& row : ds.rows) {
        ResolvedRow r(net.var_count());
        for (size_t c = 0; c < row.size(); ++c) {
            if (row[c].kind == Cell::kState)
                r.bind_state(to_net[c], state_map[c][row[c].state]);
            else if (row[c].kind == Cell::kReal)
                r.bind_real(to_net[c], row[c].real);
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace spn
