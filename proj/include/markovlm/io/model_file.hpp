#ifndef MARKOVLM_IO_MODEL_FILE_HPP
#define MARKOVLM_IO_MODEL_FILE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "markovlm/dag.hpp"
#include "markovlm/error.hpp"
#include "markovlm/estimators.hpp"
#include "markovlm/kernel.hpp"
#include "markovlm/quality.hpp"

namespace markovlm::io {

using nlohmann::json;

// Model file (JSON):
//   columns   level counts, one per factor (required)
//   factors   factor names
//   labels    level names per factor
//   response  response column name
//   initial   first-column distribution      } together: a kernel
//   steps     list of transition matrices     }
//   quality   {"i,j": {"kind": ...}} with 1-based level i and column j
struct ModelFile {
    DagSpec spec;
    std::vector<std::string> factors;
    std::string response = "b";
    std::optional<TransitionKernel> kernel;
    std::optional<QualityModel> quality;
};

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& what) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) throw ValidationError("unknown field '" + it.key() + "' in " + what);
}

inline const json& require(const json& obj, const std::string& key, const std::string& what) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError("missing field '" + key + "' in " + what);
    return *it;
}

inline double number(const json& v, const std::string& what) {
    if (!v.is_number()) throw ValidationError(what + " must be a number");
    return v.get<double>();
}

inline std::vector<double> number_list(const json& v, const std::string& what) {
    if (!v.is_array()) throw ValidationError(what + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) out.push_back(number(x, what));
    return out;
}

inline Node parse_node_key(const std::string& key, const DagSpec& spec) {
    const auto comma = key.find(',');
    std::size_t i = 0, j = 0;
    try {
        if (comma == std::string::npos) throw std::invalid_argument(key);
        std::size_t used = 0;
        i = std::stoul(key.substr(0, comma), &used);
        if (used != comma) throw std::invalid_argument(key);
        const std::string rest = key.substr(comma + 1);
        j = std::stoul(rest, &used);
        if (used != rest.size()) throw std::invalid_argument(key);
    } catch (const std::logic_error&) {
        throw ValidationError("quality key '" + key + "' is not of the form \"level,column\"");
    }
    if (i == 0 || j == 0 || !node_valid(Node{i - 1, j - 1}, spec)) {
        throw ValidationError("quality key '" + key + "' is out of range");
    }
    return Node{i - 1, j - 1};
}

inline NodeDistribution parse_distribution(const json& v, const std::string& where) {
    if (!v.is_object()) throw ValidationError(where + ": distribution must be an object");
    const std::string kind = require(v, "kind", where).get<std::string>();
    if (kind == "gaussian") {
        reject_unknown(v, {"kind", "mean", "variance"}, where);
        return NodeDistribution::gaussian(number(require(v, "mean", where), where + ".mean"),
                                          number(require(v, "variance", where), where + ".variance"));
    }
    if (kind == "bernoulli") {
        reject_unknown(v, {"kind", "p"}, where);
        return NodeDistribution::bernoulli(number(require(v, "p", where), where + ".p"));
    }
    if (kind == "point-mass") {
        reject_unknown(v, {"kind", "value"}, where);
        return NodeDistribution::point_mass(number(require(v, "value", where), where + ".value"));
    }
    if (kind == "empirical-moments") {
        reject_unknown(v, {"kind", "moments"}, where);
        return NodeDistribution::from_moments(number_list(require(v, "moments", where), where + ".moments"));
    }
    throw ValidationError(where + ": unknown distribution kind '" + kind + "'");
}

inline json distribution_json(const NodeDistribution& d) {
    switch (d.kind()) {
        case DistributionKind::gaussian:
            return {{"kind", "gaussian"}, {"mean", d.parameter_a()}, {"variance", d.parameter_b()}};
        case DistributionKind::bernoulli: return {{"kind", "bernoulli"}, {"p", d.parameter_a()}};
        case DistributionKind::point_mass: return {{"kind", "point-mass"}, {"value", d.parameter_a()}};
        case DistributionKind::empirical_moments: return {{"kind", "empirical-moments"}, {"moments", d.moments()}};
    }
    return {};
}

}  // namespace detail

inline ModelFile parse_model(const json& doc) {
    const std::string what = "model";
    if (!doc.is_object()) throw ValidationError("model must be a JSON object");
    detail::reject_unknown(doc, {"schema_version", "columns", "factors", "labels", "response", "initial", "steps",
                                 "quality"},
                           what);
    if (doc.contains("schema_version") && doc["schema_version"] != 1) {
        throw ValidationError("unsupported model schema_version");
    }
    ModelFile m;
    const json& cols = detail::require(doc, "columns", what);
    if (!cols.is_array()) throw ValidationError("model.columns must be an array of level counts");
    for (const auto& c : cols) {
        if (!c.is_number_integer() || c.get<long long>() < 0) {
            throw ValidationError("model.columns entries must be non-negative integers");
        }
        m.spec.levels.push_back(c.get<std::size_t>());
    }
    if (doc.contains("labels")) m.spec.labels = doc["labels"].get<std::vector<std::vector<std::string>>>();
    require_valid(m.spec);

    if (doc.contains("factors")) {
        m.factors = doc["factors"].get<std::vector<std::string>>();
        if (m.factors.size() != m.spec.columns()) throw ValidationError("model.factors: one name per column required");
    } else {
        for (std::size_t j = 0; j < m.spec.columns(); ++j) m.factors.push_back("f" + std::to_string(j + 1));
    }
    if (doc.contains("response")) m.response = doc["response"].get<std::string>();

    const bool has_initial = doc.contains("initial"), has_steps = doc.contains("steps");
    if (has_initial != has_steps) throw ValidationError("model: 'initial' and 'steps' must be given together");
    if (has_initial) {
        auto initial = detail::number_list(doc["initial"], "model.initial");
        std::vector<Matrix> steps;
        if (!doc["steps"].is_array()) throw ValidationError("model.steps must be an array of matrices");
        for (std::size_t k = 0; k < doc["steps"].size(); ++k) {
            std::vector<std::vector<double>> rows;
            const json& mat = doc["steps"][k];
            if (!mat.is_array()) throw ValidationError("model.steps[" + std::to_string(k) + "] must be a matrix");
            for (const auto& row : mat) rows.push_back(detail::number_list(row, "model.steps entry"));
            steps.push_back(Matrix::from_rows(rows));
        }
        TransitionKernel q(std::move(initial), std::move(steps));
        if (q.levels() != m.spec.levels) throw ValidationError("model: kernel shape does not match 'columns'");
        m.kernel = std::move(q);
    }
    if (doc.contains("quality")) {
        const json& qual = doc["quality"];
        if (!qual.is_object()) throw ValidationError("model.quality must be an object keyed by \"level,column\"");
        QualityModel qm(m.spec);
        for (auto it = qual.begin(); it != qual.end(); ++it) {
            Node node = detail::parse_node_key(it.key(), m.spec);
            qm.set(node, detail::parse_distribution(it.value(), "quality[" + it.key() + "]"));
        }
        m.quality = std::move(qm);
    }
    return m;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

inline ModelFile read_model_file(const std::string& path) {
    try {
        return parse_model(read_json_file(path));
    } catch (const json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

inline json model_to_json(const DagSpec& spec, const std::vector<std::string>& factors,
                          const std::optional<TransitionKernel>& kernel,
                          const std::optional<QualityModel>& quality = std::nullopt) {
    json doc;
    doc["schema_version"] = 1;
    doc["columns"] = spec.levels;
    if (!factors.empty()) doc["factors"] = factors;
    if (!spec.labels.empty()) doc["labels"] = spec.labels;
    if (kernel) {
        doc["initial"] = kernel->initial();
        json steps = json::array();
        for (const auto& s : kernel->steps()) steps.push_back(s.to_rows());
        doc["steps"] = steps;
    }
    if (quality) {
        json q = json::object();
        for (std::size_t j = 0; j < spec.columns(); ++j)
            for (std::size_t i = 0; i < spec.levels[j]; ++i)
                if (quality->has(Node{i, j}))
                    q[std::to_string(i + 1) + "," + std::to_string(j + 1)] =
                        detail::distribution_json(quality->at(Node{i, j}));
        doc["quality"] = q;
    }
    return doc;
}

// "uniform", or a model file carrying a kernel.
inline TransitionKernel resolve_kernel(const std::string& ref, const DagSpec& spec) {
    if (ref == "uniform") return uniform_kernel(spec);
    ModelFile m = read_model_file(ref);
    if (!m.kernel) throw ValidationError(ref + ": target kernel file has no 'initial'/'steps'");
    require_same_shape(*m.kernel, spec);
    return *m.kernel;
}

inline EstimatorKind parse_estimator(const std::string& s) {
    if (s == "naive") return EstimatorKind::naive;
    if (s == "weighted") return EstimatorKind::weighted;
    if (s == "plugin") return EstimatorKind::plugin;
    throw InvalidArgument("unknown estimator '" + s + "' (expected naive, weighted or plugin)");
}

// Experiment file (JSON): model-ref (path relative to the file), n, seed,
// replicates, target-kernel, estimators, level; optional nodes as
// [[level, column], ...] 1-based.
struct ExperimentFile {
    std::string model_ref;
    std::size_t n = 1000;
    std::uint64_t seed = 1;
    std::size_t replicates = 1;
    std::string target_kernel = "uniform";
    std::vector<EstimatorKind> estimators{EstimatorKind::plugin};
    double level = 0.95;
    std::vector<Node> nodes;
};

inline ExperimentFile parse_experiment(const json& doc, const std::filesystem::path& base_dir = {}) {
    const std::string what = "experiment";
    if (!doc.is_object()) throw ValidationError("experiment must be a JSON object");
    detail::reject_unknown(doc, {"schema_version", "model-ref", "n", "seed", "replicates", "target-kernel",
                                 "estimators", "level", "nodes"},
                           what);
    ExperimentFile e;
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return (path.is_relative() && !base_dir.empty() ? base_dir / path : path).string();
    };
    e.model_ref = resolve(detail::require(doc, "model-ref", what).get<std::string>());
    auto positive = [&](const char* key, auto& slot) {
        if (!doc.contains(key)) return;
        const json& v = doc[key];
        if (!v.is_number_unsigned() || v.get<std::uint64_t>() < 1) {
            throw ValidationError(std::string("experiment.") + key + " must be an integer >= 1");
        }
        slot = v.get<std::remove_reference_t<decltype(slot)>>();
    };
    positive("n", e.n);
    positive("replicates", e.replicates);
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned()) throw ValidationError("experiment.seed must be a non-negative integer");
        e.seed = doc["seed"].get<std::uint64_t>();
    }
    if (doc.contains("target-kernel")) {
        const std::string t = doc["target-kernel"].get<std::string>();
        e.target_kernel = t == "uniform" ? t : resolve(t);
    }
    if (doc.contains("estimators")) {
        e.estimators.clear();
        for (const auto& s : doc["estimators"]) e.estimators.push_back(parse_estimator(s.get<std::string>()));
    }
    if (doc.contains("level")) e.level = detail::number(doc["level"], "experiment.level");
    if (doc.contains("nodes")) {
        for (const auto& n : doc["nodes"]) {
            auto v = n.get<std::vector<std::size_t>>();
            if (v.size() != 2 || v[0] == 0 || v[1] == 0) {
                throw ValidationError("experiment.nodes entries must be [level, column], 1-based");
            }
            e.nodes.push_back(Node{v[0] - 1, v[1] - 1});
        }
    }
    return e;
}

inline ExperimentFile read_experiment_file(const std::string& path) {
    try {
        return parse_experiment(read_json_file(path), std::filesystem::path(path).parent_path());
    } catch (const json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

}  // namespace markovlm::io

#endif  // MARKOVLM_IO_MODEL_FILE_HPP
