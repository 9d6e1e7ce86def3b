#ifndef MARKOVLM_IO_REPORT_HPP
#define MARKOVLM_IO_REPORT_HPP

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "markovlm/asymptotics.hpp"
#include "markovlm/dag.hpp"
#include "markovlm/dataset.hpp"
#include "markovlm/error.hpp"
#include "markovlm/estimators.hpp"
#include "markovlm/io/csv.hpp"
#include "markovlm/kernel.hpp"

namespace markovlm::io {

using nlohmann::json;

inline constexpr int kReportSchemaVersion = 1;

// One line of a report. Levels and columns are 0-based here and 1-based
// once written.
struct ReportRow {
    std::string record_type;  // cell, difference, markov-check, check
    std::size_t column = 0;
    std::size_t level = 0;
    std::optional<std::size_t> level_b;
    std::string label;
    std::string label_b;
    std::string quantity;
    std::optional<double> estimate;
    std::optional<double> std_error;
    std::optional<double> ci_lower;
    std::optional<double> ci_upper;
    std::size_t count = 0;
    std::optional<std::size_t> count_b;
    std::string status = "ok";
};

struct CellReport {
    std::string command;
    std::string estimator;
    std::string target_kernel;
    double level = 0.95;
    std::vector<std::string> factors;
    std::vector<std::vector<std::string>> labels;
    std::string response;
    std::size_t n = 0;
    std::vector<ReportRow> rows;
    std::vector<std::string> warnings;
};

inline const std::vector<std::string>& report_csv_header() {
    static const std::vector<std::string> h{"record_type", "column",   "level",    "level_b", "label",
                                            "label_b",     "quantity", "estimate", "std_error", "ci_lower",
                                            "ci_upper",    "count",    "count_b",  "status"};
    return h;
}

namespace detail {

inline std::string opt_cell(const std::optional<double>& v) {
    return v && std::isfinite(*v) ? format_double(*v) : std::string();
}

inline json opt_json(const std::optional<double>& v) {
    return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

}  // namespace detail

inline void write_report_csv(std::ostream& out, const CellReport& report) {
    write_csv_row(out, report_csv_header());
    for (const auto& r : report.rows) {
        write_csv_row(out, {r.record_type, std::to_string(r.column + 1), std::to_string(r.level + 1),
                            r.level_b ? std::to_string(*r.level_b + 1) : "", r.label, r.label_b, r.quantity,
                            detail::opt_cell(r.estimate), detail::opt_cell(r.std_error),
                            detail::opt_cell(r.ci_lower), detail::opt_cell(r.ci_upper), std::to_string(r.count),
                            r.count_b ? std::to_string(*r.count_b) : "", r.status});
    }
}

inline json report_json(const CellReport& report) {
    json doc;
    doc["schema_version"] = kReportSchemaVersion;
    doc["command"] = report.command;
    doc["estimator"] = report.estimator;
    doc["target_kernel"] = report.target_kernel;
    doc["level"] = report.level;
    doc["response"] = report.response;
    doc["n"] = report.n;
    json factors = json::array();
    for (std::size_t j = 0; j < report.factors.size(); ++j) {
        json f{{"name", report.factors[j]}};
        f["labels"] = j < report.labels.size() ? json(report.labels[j]) : json::array();
        factors.push_back(f);
    }
    doc["factors"] = factors;
    json rows = json::array();
    for (const auto& r : report.rows) {
        json row{{"record_type", r.record_type},
                 {"column", r.column + 1},
                 {"level", r.level + 1},
                 {"label", r.label},
                 {"quantity", r.quantity},
                 {"estimate", detail::opt_json(r.estimate)},
                 {"std_error", detail::opt_json(r.std_error)},
                 {"ci_lower", detail::opt_json(r.ci_lower)},
                 {"ci_upper", detail::opt_json(r.ci_upper)},
                 {"count", r.count},
                 {"status", r.status}};
        row["level_b"] = r.level_b ? json(*r.level_b + 1) : json(nullptr);
        row["label_b"] = r.level_b ? json(r.label_b) : json(nullptr);
        row["count_b"] = r.count_b ? json(*r.count_b) : json(nullptr);
        rows.push_back(row);
    }
    doc["records"] = rows;
    doc["warnings"] = report.warnings;
    return doc;
}

// Which ordered level pairs of which column to compare. Empty means all
// columns and all ordered pairs i != i2.
struct PairFilter {
    std::optional<std::size_t> column;
    std::optional<std::pair<std::size_t, std::size_t>> levels;
};

struct AnalysisOptions {
    double level = 0.95;
    bool cells = true;
    bool differences = true;
    PairFilter filter;
};

namespace detail {

struct CellResult {
    CellEstimate est;
    std::optional<double> av[2];  // mean, variance
    std::string av_error[2];
};

inline std::string join_status(const std::vector<std::string>& parts) {
    if (parts.empty()) return "ok";
    std::string s;
    for (const auto& p : parts) s += (s.empty() ? "" : ";") + p;
    return s;
}

}  // namespace detail

// Cell estimates and pairwise differences, each with a normal-theory
// interval from the data-driven asymptotic variance. Precondition failures
// of the estimator itself propagate; failures of the variance estimate
// only blank the interval and add a warning.
inline CellReport analyze(const PathDataset& data, const Estimator& estimator, const AnalysisOptions& opt) {
    check_level(opt.level);
    const DagSpec& spec = data.spec();
    CellReport rep;
    rep.estimator = to_string(estimator.kind());
    rep.target_kernel = estimator.kind() == EstimatorKind::naive ? "sampling" : estimator.target_id();
    rep.level = opt.level;
    rep.n = data.size();
    rep.labels = spec.labels;

    // Limit kernel and regime for the asymptotic variance.
    std::optional<TransitionKernel> limit, sampling;
    Regime regime = Regime::known_q;
    switch (estimator.kind()) {
        case EstimatorKind::naive: {
            if (!data.empty()) {
                limit = estimate_kernel(data).kernel;
                sampling = limit;
            }
            break;
        }
        case EstimatorKind::weighted:
            limit = estimator.target_kernel();
            sampling = estimator.sampling_kernel();
            break;
        case EstimatorKind::plugin:
            limit = estimator.target_kernel();
            regime = Regime::unknown_q;
            break;
    }

    std::map<Node, detail::CellResult> cells;
    auto cell = [&](const Node& node) -> const detail::CellResult& {
        auto it = cells.find(node);
        if (it != cells.end()) return it->second;
        detail::CellResult res;
        res.est = estimator.estimate(data, node);
        if (res.est.has_data) {
            for (int t = 0; t < 2; ++t) {
                try {
                    res.av[t] = plugin_asym_var(data, *limit, node, t == 0 ? Target::mean : Target::variance,
                                                regime, sampling)
                                    .value;
                } catch (const PreconditionError& e) {
                    res.av_error[t] = e.what();
                }
            }
        }
        return cells.emplace(node, std::move(res)).first->second;
    };

    auto warn = [&](const std::string& w) {
        for (const auto& x : rep.warnings)
            if (x == w) return;
        rep.warnings.push_back(w);
    };

    const Target targets[2] = {Target::mean, Target::variance};
    if (opt.cells) {
        for (std::size_t j = 0; j < spec.columns(); ++j) {
            if (opt.filter.column && *opt.filter.column != j) continue;
            for (std::size_t i = 0; i < spec.levels[j]; ++i) {
                const auto& c = cell(Node{i, j});
                for (int t = 0; t < 2; ++t) {
                    ReportRow row;
                    row.record_type = "cell";
                    row.column = j;
                    row.level = i;
                    row.label = spec.label(j, i);
                    row.quantity = to_string(targets[t]);
                    row.count = c.est.count;
                    std::vector<std::string> status;
                    if (!c.est.has_data) {
                        status.emplace_back("no-data");
                    } else {
                        const double point = t == 0 ? c.est.mean : c.est.variance;
                        row.estimate = point;
                        if (t == 1 && c.est.variance_clipped) status.emplace_back("variance-clipped");
                        if (c.av[t]) {
                            auto ci = confidence_interval(point, *c.av[t], c.est.count, opt.level);
                            row.std_error = std::sqrt(*c.av[t] / static_cast<double>(c.est.count));
                            row.ci_lower = ci.lower;
                            row.ci_upper = ci.upper;
                        } else {
                            status.emplace_back("se-unavailable");
                            warn(c.av_error[t]);
                        }
                    }
                    row.status = detail::join_status(status);
                    rep.rows.push_back(std::move(row));
                }
            }
        }
    }

    if (opt.differences) {
        for (std::size_t j = 0; j < spec.columns(); ++j) {
            if (opt.filter.column && *opt.filter.column != j) continue;
            std::vector<std::pair<std::size_t, std::size_t>> pairs;
            if (opt.filter.levels) {
                auto [a, b] = *opt.filter.levels;
                if (a >= spec.levels[j] || b >= spec.levels[j]) {
                    throw ValidationError("level out of range for column " + std::to_string(j + 1));
                }
                pairs.emplace_back(a, b);
            } else {
                for (std::size_t a = 0; a < spec.levels[j]; ++a)
                    for (std::size_t b = 0; b < spec.levels[j]; ++b)
                        if (a != b) pairs.emplace_back(a, b);
            }
            for (auto [a, b] : pairs) {
                const auto& ca = cell(Node{a, j});
                const auto& cb = cell(Node{b, j});
                for (int t = 0; t < 2; ++t) {
                    ReportRow row;
                    row.record_type = "difference";
                    row.column = j;
                    row.level = a;
                    row.level_b = b;
                    row.label = spec.label(j, a);
                    row.label_b = spec.label(j, b);
                    row.quantity = to_string(targets[t]);
                    row.count = ca.est.count;
                    row.count_b = cb.est.count;
                    std::vector<std::string> status;
                    if (!ca.est.has_data || !cb.est.has_data) {
                        status.emplace_back("no-data");
                    } else {
                        const double x = t == 0 ? ca.est.mean : ca.est.variance;
                        const double y = t == 0 ? cb.est.mean : cb.est.variance;
                        const double diff = a == b ? 0.0 : x - y;
                        row.estimate = diff;
                        if (t == 1 && (ca.est.variance_clipped || cb.est.variance_clipped))
                            status.emplace_back("variance-clipped");
                        if (ca.av[t] && cb.av[t]) {
                            ConfidenceInterval ci;
                            if (a == b) {
                                ci = ConfidenceInterval{0.0, 0.0, 0.0, opt.level, ca.est.count};
                                row.std_error = 0.0;
                            } else {
                                ci = difference_interval(diff, *ca.av[t], ca.est.count, *cb.av[t], cb.est.count,
                                                         opt.level);
                                row.std_error = std::sqrt(*ca.av[t] / static_cast<double>(ca.est.count) +
                                                          *cb.av[t] / static_cast<double>(cb.est.count));
                            }
                            row.ci_lower = ci.lower;
                            row.ci_upper = ci.upper;
                        } else {
                            status.emplace_back("se-unavailable");
                        }
                    }
                    row.status = detail::join_status(status);
                    rep.rows.push_back(std::move(row));
                }
            }
        }
    }
    return rep;
}

// Largest |P(p_{k+1} | p_k, p_{k-1}) - P(p_{k+1} | p_k)| over observed
// contexts, per column k+1 >= 3 (1-based). Zero for fewer than 3 columns.
struct MarkovCheck {
    std::vector<double> per_column;  // index k: column k+1 (0-based), k >= 2
    double max_discrepancy = 0.0;
};

inline MarkovCheck check_markov(const PathDataset& data) {
    const DagSpec& spec = data.spec();
    MarkovCheck out;
    out.per_column.assign(spec.columns(), 0.0);
    for (std::size_t k = 2; k < spec.columns(); ++k) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::map<std::uint32_t, double>> second;
        std::map<std::uint32_t, std::map<std::uint32_t, double>> first;
        for (const auto& rec : data.records()) {
            second[{rec.path[k - 2], rec.path[k - 1]}][rec.path[k]] += 1.0;
            first[rec.path[k - 1]][rec.path[k]] += 1.0;
        }
        auto total = [](const std::map<std::uint32_t, double>& m) {
            double s = 0.0;
            for (const auto& [l, c] : m) s += c;
            return s;
        };
        double worst = 0.0;
        for (const auto& [ctx, counts] : second) {
            const auto& marg = first[ctx.second];
            const double n2 = total(counts), n1 = total(marg);
            for (std::uint32_t to = 0; to < spec.levels[k]; ++to) {
                auto a = counts.find(to);
                auto b = marg.find(to);
                const double p2 = a == counts.end() ? 0.0 : a->second / n2;
                const double p1 = b == marg.end() ? 0.0 : b->second / n1;
                worst = std::max(worst, std::abs(p2 - p1));
            }
        }
        out.per_column[k] = worst;
        out.max_discrepancy = std::max(out.max_discrepancy, worst);
    }
    return out;
}

}  // namespace markovlm::io

#endif  // MARKOVLM_IO_REPORT_HPP
