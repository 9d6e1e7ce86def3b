#ifndef MARKOVLM_CLI_HPP
#define MARKOVLM_CLI_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11/CLI11.hpp>
#include <nlohmann/json.hpp>

#include "markovlm/asymptotics.hpp"
#include "markovlm/error.hpp"
#include "markovlm/estimators.hpp"
#include "markovlm/io/csv.hpp"
#include "markovlm/io/discretize.hpp"
#include "markovlm/io/model_file.hpp"
#include "markovlm/io/report.hpp"
#include "markovlm/kernel.hpp"
#include "markovlm/oracle.hpp"
#include "markovlm/simulation.hpp"

namespace markovlm::cli {

enum ExitCode : int { ok = 0, check_failed = 1, usage = 2, invalid_data = 3, precondition = 4 };

namespace detail {

using io::json;

struct Options {
    std::string model, data, config, out, target_kernel = "uniform", estimator = "plugin", format = "csv";
    std::string factors, response, column_name, name, rule_out, levels;
    double level = 0.95, alpha = 0.0;
    std::uint64_t seed = 1;
    std::size_t n = 1000, replicates = 200, groups = 5, column = 0;
    unsigned workers = 1;
    bool check_markov = false;
};

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ','))
        if (!cur.empty()) out.push_back(cur);
    return out;
}

// Writes to --out when given, otherwise to `out`.
template <class Fn>
void emit(const std::string& path, std::ostream& out, Fn&& fn) {
    if (path.empty() || path == "-") {
        fn(out);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot write file: " + path);
    fn(f);
}

inline void write_report(const Options& o, const io::CellReport& rep, std::ostream& out) {
    emit(o.out, out, [&](std::ostream& s) {
        if (o.format == "json") {
            s << io::report_json(rep).dump(2) << "\n";
        } else {
            io::write_report_csv(s, rep);
        }
    });
}

struct Loaded {
    io::LoadedDataset ds;
    std::optional<io::ModelFile> model;
};

inline Loaded load_inputs(const Options& o) {
    Loaded l;
    if (!o.model.empty()) l.model = io::read_model_file(o.model);
    std::vector<std::string> factors = split_list(o.factors);
    std::string response = o.response;
    if (factors.empty() && l.model && !l.model->factors.empty()) factors = l.model->factors;
    if (response.empty() && l.model) response = l.model->response;
    if (factors.empty()) throw InvalidArgument("--factors is required without a --model naming them");
    if (response.empty()) throw InvalidArgument("--response is required without a --model naming it");
    auto table = io::read_csv_file(o.data);
    std::optional<DagSpec> known;
    if (l.model && !l.model->spec.labels.empty()) known = l.model->spec;
    l.ds = io::load_dataset(table, factors, response, known);
    if (l.model && l.ds.spec.levels != l.model->spec.levels) {
        throw ValidationError("data levels do not match the model's columns");
    }
    return l;
}

inline Estimator make_estimator(const Options& o, const Loaded& l) {
    const EstimatorKind kind = io::parse_estimator(o.estimator);
    if (kind == EstimatorKind::naive) return Estimator::naive();
    TransitionKernel target = io::resolve_kernel(o.target_kernel, l.ds.spec);
    if (kind == EstimatorKind::plugin) return Estimator::plugin(std::move(target), {}, o.target_kernel);
    if (!l.model || !l.model->kernel) {
        throw InvalidArgument("the weighted estimator needs --model with a sampling kernel");
    }
    return Estimator::weighted(*l.model->kernel, std::move(target), {}, o.target_kernel);
}

inline int run_analysis(const Options& o, bool cells, std::ostream& out, std::ostream& err, const char* command) {
    Loaded l = load_inputs(o);
    Estimator est = make_estimator(o, l);
    io::AnalysisOptions opt;
    opt.level = o.level;
    opt.cells = cells;
    if (o.column) {
        if (o.column > l.ds.spec.columns()) throw InvalidArgument("--column out of range");
        opt.filter.column = o.column - 1;
    }
    if (!o.levels.empty()) {
        auto parts = split_list(o.levels);
        if (parts.size() != 2 || !opt.filter.column) {
            throw InvalidArgument("--levels takes i,i2 and requires --column");
        }
        try {
            const std::size_t a = std::stoul(parts[0]), b = std::stoul(parts[1]);
            if (a == 0 || b == 0) throw std::invalid_argument("0");
            opt.filter.levels = std::make_pair(a - 1, b - 1);
        } catch (const std::logic_error&) {
            throw InvalidArgument("--levels expects two 1-based level numbers");
        }
    }
    io::CellReport rep = io::analyze(l.ds.data, est, opt);
    rep.command = command;
    rep.factors = l.ds.factors;
    rep.response = l.ds.response;
    if (o.check_markov) {
        auto mc = io::check_markov(l.ds.data);
        for (std::size_t k = 2; k < mc.per_column.size(); ++k) {
            io::ReportRow row;
            row.record_type = "markov-check";
            row.column = k;
            row.level = 0;
            row.quantity = "max-discrepancy";
            row.estimate = mc.per_column[k];
            row.count = l.ds.data.size();
            rep.rows.push_back(row);
        }
        if (mc.max_discrepancy > 0.05) {
            rep.warnings.push_back("empirical Markov discrepancy " + io::format_double(mc.max_discrepancy) +
                                   " exceeds 0.05");
        }
    }
    for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
    write_report(o, rep, out);
    return ok;
}

inline io::ModelFile require_full_model(const std::string& path) {
    if (path.empty()) throw InvalidArgument("--model is required");
    io::ModelFile m = io::read_model_file(path);
    if (!m.kernel) throw ValidationError(path + ": model has no kernel ('initial'/'steps')");
    if (!m.quality) throw ValidationError(path + ": model has no 'quality' section");
    auto missing = validate_quality(*m.quality, *m.kernel);
    if (!missing.empty()) throw ValidationError(path + ": " + missing.front());
    return m;
}

inline int run_simulate(Options o, const CLI::App* app, std::ostream& out) {
    if (!o.config.empty()) {
        auto e = io::read_experiment_file(o.config);
        if (o.model.empty()) o.model = e.model_ref;
        if (app->count("--n") == 0) o.n = e.n;
        if (app->count("--seed") == 0) o.seed = e.seed;
    }
    io::ModelFile m = require_full_model(o.model);
    if (o.n < 1) throw InvalidArgument("--n must be >= 1");
    PathDataset data = sample_dataset(*m.kernel, *m.quality, o.n, o.seed, o.workers);
    if (!m.spec.labels.empty()) data = PathDataset(m.spec, data.records());
    emit(o.out, out, [&](std::ostream& s) { io::write_csv(s, io::dataset_table(data, m.factors, m.response)); });
    return ok;
}

inline int run_validate(Options o, const CLI::App* app, std::ostream& out, std::ostream& err) {
    std::vector<EstimatorKind> kinds{EstimatorKind::plugin};
    std::vector<Node> nodes;
    if (!o.config.empty()) {
        auto e = io::read_experiment_file(o.config);
        if (o.model.empty()) o.model = e.model_ref;
        if (app->count("--n") == 0) o.n = e.n;
        if (app->count("--seed") == 0) o.seed = e.seed;
        if (app->count("--replicates") == 0) o.replicates = e.replicates;
        if (app->count("--target-kernel") == 0) o.target_kernel = e.target_kernel;
        if (app->count("--level") == 0) o.level = e.level;
        kinds = e.estimators;
        nodes = e.nodes;
    }
    io::ModelFile m = require_full_model(o.model);
    const TransitionKernel& q = *m.kernel;
    TransitionKernel target = io::resolve_kernel(o.target_kernel, m.spec);

    io::CellReport rep;
    rep.command = "validate";
    rep.target_kernel = o.target_kernel;
    rep.level = o.level;
    rep.factors = m.factors;
    rep.labels = m.spec.labels;
    rep.response = m.response;
    rep.n = o.n;
    bool all_pass = true;
    auto check = [&](const Node& node, std::string quantity, double value, bool pass, std::size_t count) {
        io::ReportRow row;
        row.record_type = "check";
        row.column = node.column;
        row.level = node.level;
        row.label = m.spec.label(node.column, node.level);
        row.quantity = std::move(quantity);
        row.estimate = value;
        row.count = count;
        row.status = pass ? "pass" : "fail";
        all_pass = all_pass && pass;
        rep.rows.push_back(row);
    };

    if (nodes.empty()) {
        for (std::size_t j = 0; j < m.spec.columns(); ++j)
            for (std::size_t i = 0; i < m.spec.levels[j]; ++i)
                if (node_reachable(q, Node{i, j})) nodes.push_back(Node{i, j});
    }
    for (const auto& node : nodes) {
        for (int power = 1; power <= 2; ++power) {
            const double r = oracle::verify_measure_change(q, target, *m.quality, node, power);
            check(node, power == 1 ? "measure-change-b" : "measure-change-b2", r, r <= 1e-10, 0);
        }
    }
    if (o.replicates >= 100) {
        ExperimentConfig cfg{q, *m.quality, target, o.target_kernel, o.n, o.seed, o.replicates, nodes, o.level,
                             o.workers};
        for (EstimatorKind kind : kinds) {
            auto res = coverage_study(cfg, kind, Target::mean);
            // four binomial standard errors around the nominal level
            const double tol = 4.0 * std::sqrt(o.level * (1.0 - o.level) / static_cast<double>(res.intervals));
            for (const auto& node : nodes) {
                std::size_t hit = 0, total = 0;
                for (const auto& s : res.replicates)
                    if (s.node == node) {
                        ++total;
                        hit += s.covered ? 1 : 0;
                    }
                const double cov = total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
                const double node_tol = 4.0 * std::sqrt(o.level * (1.0 - o.level) / static_cast<double>(total));
                check(node, std::string("coverage-") + to_string(kind) + "-mean", cov,
                      std::abs(cov - o.level) <= node_tol, total);
            }
            check(Node{0, 0}, std::string("coverage-") + to_string(kind) + "-mean-overall", res.coverage,
                  std::abs(res.coverage - o.level) <= tol, res.intervals);
        }
    } else {
        rep.warnings.push_back("coverage study skipped: needs --replicates >= 100");
    }
    for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
    write_report(o, rep, out);
    return all_pass ? ok : check_failed;
}

inline int run_discretize(const Options& o, std::ostream& out) {
    if (o.column_name.empty()) throw InvalidArgument("--column is required");
    auto table = io::read_csv_file(o.data);
    auto rule = io::quantile_discretize(io::numeric_column(table, o.column_name), o.groups, o.column_name);
    io::apply_rule(table, rule, o.name.empty() ? o.column_name + "Cat" : o.name);
    if (!o.rule_out.empty()) {
        json r{{"schema_version", 1}, {"source", rule.source}, {"groups", rule.groups}, {"breaks", rule.breaks}};
        emit(o.rule_out, out, [&](std::ostream& s) { s << r.dump(2) << "\n"; });
    }
    emit(o.out, out, [&](std::ostream& s) { io::write_csv(s, table); });
    return ok;
}

inline int run_kernel(const Options& o, std::ostream& out, std::ostream& err) {
    Loaded l = load_inputs(o);
    if (!(o.alpha >= 0.0)) throw InvalidArgument("--alpha must be >= 0");
    KernelEstimate est = estimate_kernel(l.ds.data, o.alpha);
    for (const auto& node : est.unobserved) {
        err << "warning: no transitions observed out of node " << to_string(node)
            << "; row set to a uniform placeholder\n";
    }
    const DagSpec& spec = l.ds.spec;
    emit(o.out, out, [&](std::ostream& s) {
        if (o.format == "json") {
            s << io::model_to_json(spec, l.ds.factors, est.kernel).dump(2) << "\n";
            return;
        }
        io::write_csv_row(s, {"column", "from_level", "to_level", "from_label", "to_label", "probability"});
        for (std::size_t i = 0; i < spec.levels[0]; ++i) {
            io::write_csv_row(s, {"1", "", std::to_string(i + 1), "", spec.label(0, i),
                                  io::format_double(est.kernel.initial()[i])});
        }
        for (std::size_t k = 1; k < spec.columns(); ++k)
            for (std::size_t a = 0; a < spec.levels[k - 1]; ++a)
                for (std::size_t b = 0; b < spec.levels[k]; ++b)
                    io::write_csv_row(s, {std::to_string(k + 1), std::to_string(a + 1), std::to_string(b + 1),
                                          spec.label(k - 1, a), spec.label(k, b),
                                          io::format_double(est.kernel.entry(k, a, b))});
    });
    return ok;
}

}  // namespace detail

// Entry point shared by the executable and the tests; args excludes argv[0].
inline int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    using detail::Options;
    Options o;
    CLI::App app{"Estimation of factor effects on layered-DAG path data"};
    app.name("markovlm");
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    auto add_data = [&](CLI::App* s) {
        s->add_option("--data", o.data, "input CSV (header row required)")->required();
        s->add_option("--factors", o.factors, "comma-separated factor columns, in DAG order");
        s->add_option("--response", o.response, "response column");
    };
    auto add_estimation = [&](CLI::App* s) {
        add_data(s);
        s->add_option("--model", o.model, "model file (labels, sampling kernel)");
        s->add_option("--target-kernel", o.target_kernel, "uniform, or a model file with a kernel");
        s->add_option("--estimator", o.estimator, "naive | weighted | plugin")
            ->check(CLI::IsMember({"naive", "weighted", "plugin"}));
        s->add_option("--level", o.level, "confidence level");
        s->add_option("--seed", o.seed, "unused; accepted for uniformity");
        s->add_option("--out", o.out, "output file (default stdout)");
        s->add_option("--format", o.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
        s->add_flag("--check-markov", o.check_markov, "report the empirical Markov discrepancy");
    };

    auto* simulate = app.add_subcommand("simulate", "draw a dataset from a model");
    simulate->add_option("--model", o.model, "model file with kernel and quality");
    simulate->add_option("--config", o.config, "experiment file");
    simulate->add_option("--n", o.n, "number of records");
    simulate->add_option("--seed", o.seed, "64-bit seed");
    simulate->add_option("--workers", o.workers, "threads (0 = all cores)");
    simulate->add_option("--out", o.out, "output CSV (default stdout)");

    auto* estimate = app.add_subcommand("estimate", "cell estimates and pairwise differences");
    add_estimation(estimate);

    auto* compare = app.add_subcommand("compare", "pairwise differences with intervals");
    add_estimation(compare);
    compare->add_option("--column", o.column, "restrict to this column (1-based)");
    compare->add_option("--levels", o.levels, "i,i2: a single pair within --column (1-based)");

    auto* validate = app.add_subcommand("validate", "oracle checks and a coverage study for a model");
    validate->add_option("--model", o.model, "model file with kernel and quality");
    validate->add_option("--config", o.config, "experiment file");
    validate->add_option("--target-kernel", o.target_kernel, "uniform, or a model file with a kernel");
    validate->add_option("--n", o.n, "records per replicate");
    validate->add_option("--replicates", o.replicates, "coverage replicates (< 100 skips the study)");
    validate->add_option("--seed", o.seed, "master seed");
    validate->add_option("--level", o.level, "confidence level");
    validate->add_option("--workers", o.workers, "threads (0 = all cores)");
    validate->add_option("--out", o.out, "output file (default stdout)");
    validate->add_option("--format", o.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

    auto* discretize = app.add_subcommand("discretize", "quantile groups for a numeric column");
    discretize->add_option("--data", o.data, "input CSV")->required();
    discretize->add_option("--column", o.column_name, "numeric column to discretize")->required();
    discretize->add_option("--groups", o.groups, "number of groups");
    discretize->add_option("--name", o.name, "name of the new column (default <column>Cat)");
    discretize->add_option("--rule-out", o.rule_out, "write the breaks as JSON here");
    discretize->add_option("--out", o.out, "output CSV (default stdout)");

    auto* kernel = app.add_subcommand("kernel", "empirical kernel of a dataset");
    add_data(kernel);
    kernel->add_option("--model", o.model, "model file (labels)");
    kernel->add_option("--alpha", o.alpha, "additive smoothing");
    kernel->add_option("--out", o.out, "output file (default stdout)");
    kernel->add_option("--format", o.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        if (!app.get_subcommands().empty()) err << app.get_subcommands().front()->help();
        return usage;
    }

    try {
        if (simulate->parsed()) return detail::run_simulate(o, simulate, out);
        if (estimate->parsed()) return detail::run_analysis(o, true, out, err, "estimate");
        if (compare->parsed()) return detail::run_analysis(o, false, out, err, "compare");
        if (validate->parsed()) return detail::run_validate(o, validate, out, err);
        if (discretize->parsed()) return detail::run_discretize(o, out);
        if (kernel->parsed()) return detail::run_kernel(o, out, err);
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return usage;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return invalid_data;
    } catch (const PreconditionError& e) {
        err << "error: " << e.what() << "\n";
        return precondition;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return check_failed;
    }
    return usage;
}

}  // namespace markovlm::cli

#endif  // MARKOVLM_CLI_HPP
