// Command-line surface over the library. Every subcommand is a thin wrapper:
// load inputs, call one library function, print the result as line records.
//
// Exit codes: 0 success, 1 usage error, 2 data or model error, 3 numerical
// failure (inconsistent evidence, vanished likelihood, and the like).

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "spn/spn.hpp"

namespace {

std::string fmt(double x) { return spn::detail::format_double(x); }

/// "A=+a,B=+b" -> Assignment. Labels stay strings; resolve() turns them
/// into state indices or reals against the model.
spn::Assignment parse_assignment(const std::string& text) {
    spn::Assignment a;
    size_t start = 0;
    while (start <= text.size()) {
        size_t comma = text.find(',', start);
        std::string item = text.substr(
            start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!item.empty()) {
            size_t eq = item.find('=');
            if (eq == std::string::npos || eq == 0)
                throw spn::DataError("bad assignment '" + item + "', expected VAR=value");
            a.set(item.substr(0, eq), item.substr(eq + 1));
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return a;
}

std::string format_assignment(const spn::Assignment& a) {
    std::string out;
    for (const auto& [name, value] : a.bindings()) {
        if (!out.empty()) out += ",";
        out += name + "=";
        if (const auto* s = std::get_if<std::string>(&value))
            out += *s;
        else
            out += fmt(std::get<double>(value));
    }
    return out;
}

bool g_log10 = false;
double display_log(double nat) { return g_log10 ? nat / std::log(10.0) : nat; }

void write_model(const spn::Network& net, const std::string& out_path) {
    if (out_path.empty())
        spn::save_network(std::cout, net);
    else
        spn::save_network_file(out_path, net);
}

void print_trace(const spn::FitResult& res) {
    for (const spn::TraceEntry& t : res.trace)
        std::cout << "epoch " << t.epoch << " loglik " << fmt(t.log_lik) << " delta "
                  << fmt(t.max_delta) << "\n";
    std::cout << "converged " << (res.converged ? "yes" : "no") << "\n";
}

void seed_notice(const CLI::Option* opt, const char* what) {
    if (opt->count() == 0)
        std::cerr << "note: no --seed given for " << what << "; using 0\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sum-product network toolkit"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_flag("--log10", g_log10, "display log values in base 10");
    app.add_option("--threads", threads, "worker threads for data passes");

    std::string model_path, data_path, out_path, record_path;
    std::string query_text, evidence_text, method = "mle", node_text;
    int kbest = 1, n_samples = 0, node_id = -1;
    spn::FitConfig fit;
    spn::LearnConfig learn;
    uint64_t seed = 0;

    auto* c_validate = app.add_subcommand("validate", "check network properties");
    c_validate->add_option("model", model_path)->required();

    auto* c_eval = app.add_subcommand("eval", "probability of a query, optionally conditioned");
    c_eval->add_option("model", model_path)->required();
    c_eval->add_option("--query", query_text)->required();
    c_eval->add_option("--evidence", evidence_text);

    auto* c_mpe = app.add_subcommand("mpe", "most probable completion of the evidence");
    c_mpe->add_option("model", model_path)->required();
    c_mpe->add_option("--evidence", evidence_text);

    auto* c_max = app.add_subcommand("max", "exact most probable configuration via k best trees");
    c_max->add_option("model", model_path)->required();
    c_max->add_option("--k", kbest)->check(CLI::PositiveNumber);

    auto* c_lp = app.add_subcommand("learn-params", "fit sum weights (and leaves) to data");
    c_lp->add_option("model", model_path)->required();
    c_lp->add_option("data", data_path)->required();
    c_lp->add_option("--method", method)
        ->check(CLI::IsMember({"mle", "gd", "em", "hard-em"}));
    c_lp->add_option("--alpha", fit.alpha);
    c_lp->add_option("--lr", fit.learning_rate);
    c_lp->add_option("--epochs", fit.epochs);
    c_lp->add_option("--batch", fit.batch);
    c_lp->add_option("--tol", fit.tol);
    auto* lp_seed = c_lp->add_option("--seed", fit.seed);
    c_lp->add_option("--out", out_path);

    auto* c_ls = app.add_subcommand("learn-structure", "grow a network from data");
    c_ls->add_option("data", data_path)->required();
    c_ls->add_option("--m", learn.min_instances);
    c_ls->add_option("--alpha", learn.alpha);
    c_ls->add_option("--p", learn.p_value);
    c_ls->add_flag("--binary-splits", learn.binary_splits);
    auto* ls_seed = c_ls->add_option("--seed", learn.seed);
    c_ls->add_option("--out", out_path);

    auto* c_aug = app.add_subcommand("augment", "make every sum conditioned via latent variables");
    c_aug->add_option("model", model_path)->required();
    c_aug->add_option("--out", out_path);
    c_aug->add_option("--record", record_path, "write the introduced latents as JSON");

    auto* c_sample = app.add_subcommand("sample", "draw rows from the network");
    c_sample->add_option("model", model_path)->required();
    c_sample->add_option("-n", n_samples)->required()->check(CLI::PositiveNumber);
    auto* sm_seed = c_sample->add_option("--seed", seed);
    c_sample->add_option("--out", out_path);

    auto* c_interp = app.add_subcommand("interpret", "mixture reading of a sum node");
    c_interp->add_option("model", model_path)->required();
    c_interp->add_option("--node", node_id)->required();

    auto* c_table = app.add_subcommand("table", "brute-force joint table (finite scopes)");
    c_table->add_option("model", model_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(c_validate)) {
            // lenient load so a broken model can still be inspected
            spn::Network net = spn::load_network_file(model_path, {.strict = false});
            spn::ValidityReport rep = spn::validate(net);
            std::cout << "valid " << (rep.passed() ? "yes" : "no") << "\n" << rep.summary();
            return rep.passed() ? 0 : 2;
        }

        if (app.got_subcommand(c_eval)) {
            spn::Network net = spn::load_network_file(model_path);
            spn::Assignment query = parse_assignment(query_text);
            if (evidence_text.empty()) {
                spn::Evaluation ev = spn::evaluate(net, query);
                std::cout << "value " << fmt(ev.value()) << "\n"
                          << "log " << fmt(display_log(ev.log_value())) << "\n";
            } else {
                spn::Conditional c =
                    spn::conditional(net, query, parse_assignment(evidence_text));
                std::cout << "value " << fmt(c.value) << "\n"
                          << "log " << fmt(display_log(c.log_value)) << "\n";
            }
            return 0;
        }

        if (app.got_subcommand(c_mpe)) {
            spn::Network net = spn::load_network_file(model_path);
            spn::Assignment evidence = parse_assignment(evidence_text);
            spn::MpeResult res = spn::mpe_best_tree(net, net.resolve(evidence));
            std::cout << "completion " << format_assignment(res.completion) << "\n"
                      << "smax " << fmt(res.value) << "\n"
                      << "logprob " << fmt(display_log(res.completion_log_value)) << "\n"
                      << "exact " << (res.exact ? "yes" : "no") << "\n";
            return 0;
        }

        if (app.got_subcommand(c_max)) {
            spn::Network net = spn::load_network_file(model_path);
            spn::KbtResult res = spn::max_kbt(net, kbest);
            std::cout << "config " << format_assignment(res.config) << "\n"
                      << "value " << fmt(res.value) << "\n";
            for (size_t i = 0; i < res.candidates.size(); ++i)
                std::cout << "candidate " << i + 1 << " "
                          << format_assignment(res.candidates[i].config) << " tree "
                          << fmt(display_log(res.candidates[i].tree_log_value)) << " log "
                          << fmt(display_log(res.candidates[i].log_value)) << "\n";
            return 0;
        }

        if (app.got_subcommand(c_lp)) {
            spn::Network net = spn::load_network_file(model_path);
            spn::Dataset ds = spn::load_dataset_file(data_path, &net.variables());
            fit.threads = threads;
            spn::Network fitted = net;
            if (method == "mle") {
                fitted = spn::mle_selective(net, ds, fit.alpha, threads);
            } else if (method == "gd") {
                seed_notice(lp_seed, "gradient descent");
                spn::FitResult res = spn::gd_fit(net, ds, fit);
                print_trace(res);
                fitted = res.network;
            } else if (method == "em") {
                spn::FitResult res = spn::em_fit(net, ds, fit);
                print_trace(res);
                fitted = res.network;
            } else {
                spn::FitResult res = spn::hard_em_fit(net, ds, fit);
                print_trace(res);
                fitted = res.network;
            }
            std::cout << "loglik " << fmt(spn::log_likelihood(fitted, ds, threads)) << "\n";
            write_model(fitted, out_path);
            return 0;
        }

        if (app.got_subcommand(c_ls)) {
            seed_notice(ls_seed, "structure learning");
            spn::Dataset ds = spn::load_dataset_file(data_path);
            spn::Network net = spn::learn_spn(ds, learn);
            std::cout << "nodes " << net.size() << "\n"
                      << "loglik " << fmt(spn::log_likelihood(net, ds, threads)) << "\n";
            write_model(net, out_path);
            return 0;
        }

        if (app.got_subcommand(c_aug)) {
            spn::Network net = spn::load_network_file(model_path);
            spn::Augmentation aug = spn::augment(net);
            std::cout << "latents " << aug.entries.size() << "\n";
            for (const spn::AugmentEntry& e : aug.entries)
                std::cout << "latent sum " << e.sum << " variable " << e.variable
                          << " twin " << e.twin << "\n";
            if (!record_path.empty()) {
                nlohmann::json rec = nlohmann::json::array();
                for (const spn::AugmentEntry& e : aug.entries)
                    rec.push_back({{"sum", e.sum},
                                   {"variable", e.variable},
                                   {"states", e.states},
                                   {"twin", e.twin}});
                std::ofstream out(record_path);
                if (!out) throw spn::DataError("cannot open '" + record_path + "'");
                out << rec.dump(2) << "\n";
            }
            write_model(aug.network, out_path);
            return 0;
        }

        if (app.got_subcommand(c_sample)) {
            seed_notice(sm_seed, "sampling");
            spn::Network net = spn::load_network_file(model_path);
            spn::Dataset ds =
                spn::make_dataset(net.variables(), spn::sample(net, n_samples, seed));
            if (out_path.empty()) {
                spn::save_dataset(std::cout, ds);
            } else {
                std::ofstream out(out_path, std::ios::binary);
                if (!out) throw spn::DataError("cannot open '" + out_path + "'");
                spn::save_dataset(out, ds);
            }
            return 0;
        }

        if (app.got_subcommand(c_interp)) {
            spn::Network net = spn::load_network_file(model_path);
            spn::SumInterpretation in = spn::interpret_sum_node(net, node_id);
            const spn::Variable& var = net.variable(in.variable);
            std::cout << "node " << in.node << " represents " << var.name << "\n";
            for (size_t s = 0; s < var.states.size(); ++s) {
                std::cout << "state " << var.states[s] << " prior " << fmt(in.prior[s])
                          << " factors";
                for (int f : in.factors[s]) std::cout << " " << f;
                std::cout << "\n";
            }
            return 0;
        }

        if (app.got_subcommand(c_table)) {
            // lenient load: enumerating a broken model is a debugging aid
            spn::Network net = spn::load_network_file(model_path, {.strict = false});
            spn::JointTable table = spn::brute_force_table(net);
            std::cout << "vars";
            for (const spn::Variable& v : table.variables) std::cout << " " << v.name;
            std::cout << "\n";
            size_t i = 0;
            spn::detail::for_each_config(table.variables, [&](const spn::ResolvedRow& row) {
                std::cout << "row";
                for (size_t v = 0; v < table.variables.size(); ++v)
                    std::cout << " " << table.variables[v].states[row.state[v]];
                std::cout << " " << fmt(table.values[i++]) << "\n";
                return true;
            });
            std::cout << "total " << fmt(table.total) << "\n";
            return 0;
        }
    } catch (const spn::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const spn::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
