#pragma once

// End-to-end orchestration: dataset preparation from SCM files, generator
// execution and ingestion, four-dimension evaluation across seeds, ADTM
// aggregation across datasets, and report emission.
//
// Determinism contract: every random stream is a pure function of
// (dataset, seed, generator), so a sweep produces byte-identical canonical
// output regardless of worker count or completion order. Wall-clock timings
// are therefore kept out of the canonical records and written separately.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabbench/bif.hpp"
#include "tabbench/dag.hpp"
#include "tabbench/error.hpp"
#include "tabbench/generators.hpp"
#include "tabbench/metrics.hpp"
#include "tabbench/scm.hpp"
#include "tabbench/table.hpp"

namespace tabbench {

struct DatasetSpec {
    std::string path;
    std::string name;                    // defaults to the file stem
    std::optional<std::string> target;   // BIF target override
};

struct ExternalGenerator {
    std::string name;
    std::string dir;  // layout: <dir>/<dataset>/<seed>/<name>.csv
};

struct RunConfig {
    std::vector<DatasetSpec> datasets;
    std::vector<std::string> generators{"marginal", "smote", "bn"};
    std::vector<ExternalGenerator> external;
    std::vector<int> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    double n_syn_ratio = 3.0;
    double alpha = 0.01;
    int max_cond_size = 2;
    std::size_t statement_cap = 20000;
    std::size_t sample_n = 2000;
    int smote_k = 5;
    BnFitConfig bn;
    int workers = 1;
    bool include_ref_in_endpoints = true;
    std::string output_dir = "bench-out";

    void validate() const {
        if (datasets.empty()) throw ConfigError("config: no datasets");
        if (generators.empty() && external.empty())
            throw ConfigError("config: no generators");
        if (seeds.empty()) throw ConfigError("config: no seeds");
        if (!(n_syn_ratio > 0.0)) throw ConfigError("config: n_syn_ratio must be > 0");
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("config: alpha out of range");
        if (max_cond_size < 0) throw ConfigError("config: negative max_cond_size");
        if (sample_n < 10) throw ConfigError("config: sample_n too small");
        if (workers < 1) throw ConfigError("config: workers must be >= 1");
    }
};

inline RunConfig parse_run_config(const nlohmann::json& j) {
    RunConfig cfg;
    if (j.contains("datasets")) {
        cfg.datasets.clear();
        for (const auto& dj : j.at("datasets")) {
            DatasetSpec spec;
            if (dj.is_string()) {
                spec.path = dj.get<std::string>();
            } else {
                spec.path = dj.at("path").get<std::string>();
                spec.name = dj.value("name", "");
                if (dj.contains("target")) spec.target = dj["target"].get<std::string>();
            }
            if (spec.name.empty())
                spec.name = std::filesystem::path(spec.path).stem().string();
            cfg.datasets.push_back(std::move(spec));
        }
    }
    if (j.contains("generators"))
        cfg.generators = j.at("generators").get<std::vector<std::string>>();
    if (j.contains("external")) {
        for (const auto& ej : j.at("external"))
            cfg.external.push_back(
                {ej.at("name").get<std::string>(), ej.at("dir").get<std::string>()});
    }
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<int>>();
    cfg.n_syn_ratio = j.value("n_syn_ratio", cfg.n_syn_ratio);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.max_cond_size = j.value("max_cond_size", cfg.max_cond_size);
    cfg.statement_cap = j.value("statement_cap", cfg.statement_cap);
    cfg.sample_n = j.value("sample_n", cfg.sample_n);
    cfg.smote_k = j.value("smote_k", cfg.smote_k);
    cfg.bn.max_parents = j.value("bn_max_parents", cfg.bn.max_parents);
    cfg.bn.max_iters = j.value("bn_max_iters", cfg.bn.max_iters);
    cfg.bn.numeric_bins = j.value("bn_numeric_bins", cfg.bn.numeric_bins);
    cfg.workers = j.value("workers", cfg.workers);
    cfg.include_ref_in_endpoints =
        j.value("include_ref_in_endpoints", cfg.include_ref_in_endpoints);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    if (const char* env = std::getenv("TABBENCH_OUTPUT_DIR"))
        cfg.output_dir = env;
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Records

struct RunRecord {
    std::string dataset;
    int seed = 0;
    std::string generator;
    std::string task;  // "classification" or "regression"
    bool ok = true;
    std::string error;
    StructuralFidelityReport structural;
    DensityReport density;
    PrivacyReport privacy;
    UtilityReport utility;
    double wall_time_s = 0.0;  // informational; not part of canonical output
};

namespace bench_detail {

inline nlohmann::json level_to_json(const LevelFidelity& l) {
    nlohmann::json j;
    j["bacc"] = l.bacc;
    j["confusion"] = {{"tp", l.confusion.tp},
                      {"tn", l.confusion.tn},
                      {"fp", l.confusion.fp},
                      {"fn", l.confusion.fn}};
    j["statements_evaluated"] = l.statements_evaluated;
    j["single_class"] = l.single_class;
    return j;
}

inline LevelFidelity level_from_json(const nlohmann::json& j) {
    LevelFidelity l;
    l.bacc = j.at("bacc").get<double>();
    l.confusion.tp = j.at("confusion").at("tp").get<std::size_t>();
    l.confusion.tn = j.at("confusion").at("tn").get<std::size_t>();
    l.confusion.fp = j.at("confusion").at("fp").get<std::size_t>();
    l.confusion.fn = j.at("confusion").at("fn").get<std::size_t>();
    l.statements_evaluated = j.at("statements_evaluated").get<std::size_t>();
    l.single_class = j.at("single_class").get<bool>();
    return l;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace bench_detail

/// Canonical record serialisation; wall-clock time is excluded so repeated
/// sweeps emit identical bytes.
inline nlohmann::json record_to_json(const RunRecord& r) {
    nlohmann::json j;
    j["dataset"] = r.dataset;
    j["seed"] = r.seed;
    j["generator"] = r.generator;
    j["task"] = r.task;
    j["ok"] = r.ok;
    if (!r.ok) {
        j["error"] = r.error;
        return j;
    }
    j["structural"] = {{"global", bench_detail::level_to_json(r.structural.global)},
                       {"local", bench_detail::level_to_json(r.structural.local)}};
    j["density"] = {{"shape", r.density.shape},
                    {"trend", r.density.trend},
                    {"alpha_precision", r.density.alpha_precision},
                    {"beta_recall", r.density.beta_recall}};
    j["privacy"] = {{"dcr", r.privacy.dcr}, {"authenticity", r.privacy.authenticity}};
    nlohmann::json per;
    for (const auto& [name, score] : r.utility.per_predictor) per[name] = score;
    j["utility"] = {{"metric", r.utility.metric == UtilityMetric::BalancedAccuracyPct
                                   ? "balanced_accuracy_pct"
                                   : "rmse"},
                    {"per_predictor", per},
                    {"mean_score", r.utility.mean_score}};
    j["provenance"] = {{"alpha_precision_estimator", "quantile_ball"},
                       {"distance_space", "preprocessed"},
                       {"median_convention", "lower"}};
    return j;
}

inline RunRecord record_from_json(const nlohmann::json& j) {
    RunRecord r;
    r.dataset = j.at("dataset").get<std::string>();
    r.seed = j.at("seed").get<int>();
    r.generator = j.at("generator").get<std::string>();
    r.task = j.at("task").get<std::string>();
    r.ok = j.at("ok").get<bool>();
    if (!r.ok) {
        r.error = j.value("error", "");
        return r;
    }
    r.structural.global = bench_detail::level_from_json(j.at("structural").at("global"));
    r.structural.local = bench_detail::level_from_json(j.at("structural").at("local"));
    r.density.shape = j.at("density").at("shape").get<double>();
    r.density.trend = j.at("density").at("trend").get<double>();
    r.density.alpha_precision = j.at("density").at("alpha_precision").get<double>();
    r.density.beta_recall = j.at("density").at("beta_recall").get<double>();
    r.privacy.dcr = j.at("privacy").at("dcr").get<double>();
    r.privacy.authenticity = j.at("privacy").at("authenticity").get<double>();
    r.utility.metric = j.at("utility").at("metric").get<std::string>() == "rmse"
                           ? UtilityMetric::Rmse
                           : UtilityMetric::BalancedAccuracyPct;
    for (const auto& [name, score] : j.at("utility").at("per_predictor").items())
        r.utility.per_predictor[name] = score.get<double>();
    r.utility.mean_score = j.at("utility").at("mean_score").get<double>();
    return r;
}

/// Flat metric view of a record. The utility key depends on the task, the
/// rest are shared across tasks.
inline std::map<std::string, double> record_metrics(const RunRecord& r) {
    std::map<std::string, double> m;
    m["shape"] = r.density.shape;
    m["trend"] = r.density.trend;
    m["alpha_precision"] = r.density.alpha_precision;
    m["beta_recall"] = r.density.beta_recall;
    m[r.task == "regression" ? "rmse" : "accuracy"] = r.utility.mean_score;
    m["dcr"] = r.privacy.dcr;
    m["authenticity"] = r.privacy.authenticity;
    m["local_independence"] = r.structural.local.bacc;
    m["global_independence"] = r.structural.global.bacc;
    return m;
}

enum class Orientation { HigherBetter, LowerBetter };

inline Orientation metric_orientation(const std::string& metric) {
    return metric == "rmse" ? Orientation::LowerBetter : Orientation::HigherBetter;
}

inline std::vector<std::string> metric_names_for_task(const std::string& task) {
    std::vector<std::string> names{"shape", "trend", "alpha_precision", "beta_recall"};
    names.push_back(task == "regression" ? "rmse" : "accuracy");
    names.insert(names.end(), {"dcr", "authenticity", "local_independence",
                               "global_independence"});
    return names;
}

// ---------------------------------------------------------------------------
// Dataset context shared by all generators of one (dataset, seed)

struct DatasetContext {
    std::string name;
    std::string task;
    ScmModel scm;
    DataTable full;
    DataTable train;   // the reference data
    DataTable val;
    DataTable test;
    CiRelationSet global_relations;
    CiRelationSet local_relations;
};

inline ScmModel load_scm_file(const DatasetSpec& spec) {
    std::ifstream in(spec.path);
    if (!in) throw ConfigError("cannot open SCM file '" + spec.path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    if (std::filesystem::path(spec.path).extension() == ".bif")
        return parse_bif(buf.str(), spec.target);
    ScmModel model = parse_scm_json(buf.str());
    if (spec.target) {
        // Re-validate with the overridden target.
        return ScmModel(model.name(), model.task(), spec.target, model.cpds());
    }
    return model;
}

inline DatasetContext prepare_dataset(const ScmModel& scm, const std::string& name,
                                      int seed, const RunConfig& cfg) {
    DataTable full = prior_sample(scm, cfg.sample_n, static_cast<std::uint64_t>(seed));
    SplitIndices idx = split(full, seed);
    CiEnumerationOptions ci_opts;
    ci_opts.max_cond_size = cfg.max_cond_size;
    ci_opts.statement_cap = cfg.statement_cap;
    ci_opts.seed = static_cast<std::uint64_t>(seed);
    if (!scm.target()) throw ConfigError("dataset '" + name + "' has no target variable");
    CiRelationSet global =
        enumerate_ci_relations(scm.dag(), scm.target(), CiLevel::Global, ci_opts);
    CiRelationSet local =
        enumerate_ci_relations(scm.dag(), scm.target(), CiLevel::Local, ci_opts);
    return DatasetContext{
        name,
        scm.task() == Task::Classification ? "classification" : "regression",
        scm,
        full,
        full.select_rows(idx.train),
        full.select_rows(idx.val),
        full.select_rows(idx.test),
        std::move(global),
        std::move(local)};
}

/// Produce the synthetic table for one generator. "ref" scores the training
/// split as its own synthetic data.
inline DataTable make_synthetic(const DatasetContext& ctx, const std::string& generator,
                                int seed, const RunConfig& cfg) {
    GenRequest req;
    req.n_syn = static_cast<std::size_t>(
        cfg.n_syn_ratio * static_cast<double>(ctx.train.row_count()));
    req.seed = detail::combine(detail::combine(static_cast<std::uint64_t>(seed),
                                               bench_detail::fnv1a(ctx.name)),
                               bench_detail::fnv1a(generator));
    req.stratify = ctx.task == "classification";

    if (generator == "ref") return ctx.train;
    if (generator == "marginal") return gen_marginal(ctx.train, req);
    if (generator == "smote") return gen_smote(ctx.train, req, cfg.smote_k);
    if (generator == "bn") return gen_bayes_net(ctx.train, req, cfg.bn);
    for (const auto& ext : cfg.external) {
        if (ext.name != generator) continue;
        std::filesystem::path file = std::filesystem::path(ext.dir) / ctx.name /
                                     std::to_string(seed) / (ext.name + ".csv");
        std::ifstream in(file);
        if (!in)
            throw ValidationError("external synthetic file missing: " + file.string());
        std::stringstream buf;
        buf << in.rdbuf();
        return ingest_synthetic(buf.str(), ctx.train.schema(), ctx.train.target());
    }
    throw ConfigError("unknown generator '" + generator + "'");
}

inline RunRecord evaluate_triple(const DatasetContext& ctx, const std::string& generator,
                                 int seed, const RunConfig& cfg) {
    RunRecord rec;
    rec.dataset = ctx.name;
    rec.seed = seed;
    rec.generator = generator;
    rec.task = ctx.task;
    auto start = std::chrono::steady_clock::now();
    try {
        DataTable syn = make_synthetic(ctx, generator, seed, cfg);
        rec.structural = structural_fidelity(ctx.global_relations, ctx.local_relations,
                                             syn, cfg.alpha);
        rec.density = density_report(ctx.train, syn);
        rec.privacy = privacy_report(ctx.train, syn);
        rec.utility = utility_eval(syn, ctx.test);
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
    }
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

// ---------------------------------------------------------------------------
// The sweep

inline std::vector<RunRecord> run_benchmark(const RunConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(cfg.output_dir) / "records");

    std::vector<std::string> generator_names{"ref"};
    generator_names.insert(generator_names.end(), cfg.generators.begin(),
                           cfg.generators.end());
    for (const auto& ext : cfg.external) generator_names.push_back(ext.name);

    std::vector<ScmModel> models;
    for (const auto& spec : cfg.datasets) models.push_back(load_scm_file(spec));

    struct Job {
        std::size_t dataset_idx;
        int seed;
        std::string generator;
    };
    std::vector<Job> jobs;
    for (std::size_t d = 0; d < cfg.datasets.size(); ++d)
        for (int seed : cfg.seeds)
            for (const auto& g : generator_names) jobs.push_back({d, seed, g});

    auto record_path = [&](const Job& job) {
        return fs::path(cfg.output_dir) / "records" / cfg.datasets[job.dataset_idx].name /
               std::to_string(job.seed) / (job.generator + ".json");
    };

    std::map<std::pair<std::size_t, int>, std::shared_ptr<DatasetContext>> contexts;
    std::mutex context_mutex, write_mutex;
    auto context_for = [&](std::size_t d, int seed) {
        std::lock_guard<std::mutex> lock(context_mutex);
        auto key = std::make_pair(d, seed);
        auto it = contexts.find(key);
        if (it != contexts.end()) return it->second;
        auto ctx = std::make_shared<DatasetContext>(
            prepare_dataset(models[d], cfg.datasets[d].name, seed, cfg));
        contexts.emplace(key, ctx);
        return ctx;
    };

    std::vector<RunRecord> records(jobs.size());
    std::map<std::string, double> timings;
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;

    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            const Job& job = jobs[i];
            try {
                fs::path path = record_path(job);
                if (fs::exists(path)) {
                    std::ifstream in(path);
                    nlohmann::json j = nlohmann::json::parse(in);
                    records[i] = record_from_json(j);
                    continue;
                }
                auto ctx = context_for(job.dataset_idx, job.seed);
                RunRecord rec = evaluate_triple(*ctx, job.generator, job.seed, cfg);
                {
                    std::lock_guard<std::mutex> lock(write_mutex);
                    fs::create_directories(path.parent_path());
                    std::ofstream out(path);
                    out << record_to_json(rec).dump(2) << "\n";
                    timings[rec.dataset + "/" + std::to_string(rec.seed) + "/" +
                            rec.generator] = rec.wall_time_s;
                }
                records[i] = std::move(rec);
            } catch (...) {
                std::lock_guard<std::mutex> lock(write_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    int n_threads = std::min<int>(cfg.workers, static_cast<int>(jobs.size()));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);

    {
        std::ofstream out(fs::path(cfg.output_dir) / "timings.json");
        out << nlohmann::json(timings).dump(2) << "\n";
    }

    std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
        return std::tie(a.dataset, a.seed, a.generator) <
               std::tie(b.dataset, b.seed, b.generator);
    });
    return records;
}

// ---------------------------------------------------------------------------
// ADTM aggregation

struct AggregateCell {
    double mean = 0.0;
    double std = 0.0;
    bool degenerate = false;
};

struct AggregateReport {
    // task -> generator -> metric -> cell
    std::map<std::string, std::map<std::string, std::map<std::string, AggregateCell>>>
        values;
    bool include_ref_in_endpoints = true;
};

/// Affine renormalisation per (dataset, metric): the best generator's
/// mean-over-seeds maps to 1, the worst to 0; normalised values then average
/// across datasets, with std taken across seeds.
inline AggregateReport adtm_aggregate(const std::vector<RunRecord>& records,
                                      bool include_ref_in_endpoints = true) {
    AggregateReport report;
    report.include_ref_in_endpoints = include_ref_in_endpoints;

    std::set<std::string> tasks;
    for (const auto& r : records) tasks.insert(r.task);

    for (const auto& task : tasks) {
        std::set<std::string> datasets, generators;
        std::set<int> seeds;
        for (const auto& r : records)
            if (r.task == task) {
                datasets.insert(r.dataset);
                generators.insert(r.generator);
                seeds.insert(r.seed);
            }
        // raw[dataset][generator][metric] -> per-seed values
        std::map<std::string,
                 std::map<std::string, std::map<std::string, std::map<int, double>>>>
            raw;
        for (const auto& r : records) {
            if (r.task != task || !r.ok) continue;
            for (const auto& [metric, value] : record_metrics(r))
                raw[r.dataset][r.generator][metric][r.seed] = value;
        }

        for (const auto& metric : metric_names_for_task(task)) {
            // seed -> generator -> accumulated normalised values across datasets
            std::map<std::string, std::map<int, std::vector<double>>> normalised_by_seed;
            std::map<std::string, std::vector<double>> normalised_means;
            std::map<std::string, bool> any_degenerate;

            for (const auto& dataset : datasets) {
                auto dit = raw.find(dataset);
                if (dit == raw.end()) continue;
                // Mean over seeds per generator in this (dataset, metric) cell.
                std::map<std::string, double> cell_mean;
                for (const auto& [gen, metrics] : dit->second) {
                    auto mit = metrics.find(metric);
                    if (mit == metrics.end() || mit->second.empty()) continue;
                    double s = 0.0;
                    for (const auto& [seed, v] : mit->second) s += v;
                    cell_mean[gen] = s / static_cast<double>(mit->second.size());
                }
                if (cell_mean.size() < 2) continue;

                double best = 0.0, worst = 0.0;
                bool first = true;
                for (const auto& [gen, v] : cell_mean) {
                    if (!include_ref_in_endpoints && gen == "ref") continue;
                    if (first) {
                        best = worst = v;
                        first = false;
                    } else {
                        best = std::max(best, v);
                        worst = std::min(worst, v);
                    }
                }
                if (first) continue;  // endpoints empty after exclusion
                if (metric_orientation(metric) == Orientation::LowerBetter)
                    std::swap(best, worst);

                bool degenerate = std::abs(best - worst) < 1e-12;
                for (const auto& [gen, v] : cell_mean) {
                    double norm = degenerate ? 1.0 : (v - worst) / (best - worst);
                    normalised_means[gen].push_back(std::clamp(norm, 0.0, 1.0));
                    if (degenerate) any_degenerate[gen] = true;
                    for (const auto& [seed, sv] :
                         dit->second.at(gen).at(metric)) {
                        double ns = degenerate ? 1.0 : (sv - worst) / (best - worst);
                        normalised_by_seed[gen][seed].push_back(ns);
                    }
                }
            }

            for (const auto& [gen, vals] : normalised_means) {
                AggregateCell cell;
                double s = 0.0;
                for (double v : vals) s += v;
                cell.mean = s / static_cast<double>(vals.size());
                cell.degenerate = any_degenerate.count(gen) > 0;
                // std across seeds of the per-seed (dataset-averaged) values
                std::vector<double> per_seed;
                for (const auto& [seed, list] : normalised_by_seed[gen]) {
                    double m = 0.0;
                    for (double v : list) m += v;
                    per_seed.push_back(m / static_cast<double>(list.size()));
                }
                if (per_seed.size() > 1) cell.std = stddev_pop(per_seed);
                report.values[task][gen][metric] = cell;
            }
        }
    }
    return report;
}

/// Arithmetic mean of the normalised metrics in each evaluation dimension.
/// Missing metrics (failed cells) average over what is present and flag it.
struct DimensionSummary {
    std::map<std::string, double> value;   // dimension -> score
    std::set<std::string> incomplete;      // dimensions with missing metrics
};

inline DimensionSummary dimension_average(
    const std::map<std::string, AggregateCell>& metrics, const std::string& task) {
    static const std::map<std::string, std::vector<std::string>> kDimensions = {
        {"density", {"shape", "trend", "alpha_precision", "beta_recall"}},
        {"privacy", {"dcr", "authenticity"}},
        {"structural", {"local_independence", "global_independence"}},
    };
    DimensionSummary out;
    for (const auto& [dim, names] : kDimensions) {
        double sum = 0.0;
        int present = 0;
        for (const auto& name : names) {
            auto it = metrics.find(name);
            if (it == metrics.end()) continue;
            sum += it->second.mean;
            ++present;
        }
        if (present == 0) {
            out.incomplete.insert(dim);
            continue;
        }
        if (present < static_cast<int>(names.size())) out.incomplete.insert(dim);
        out.value[dim] = sum / present;
    }
    const std::string utility_metric = task == "regression" ? "rmse" : "accuracy";
    auto it = metrics.find(utility_metric);
    if (it != metrics.end())
        out.value["utility"] = it->second.mean;
    else
        out.incomplete.insert("utility");
    return out;
}

// ---------------------------------------------------------------------------
// Report emission

inline nlohmann::json aggregate_to_json(const AggregateReport& agg) {
    nlohmann::json j;
    j["include_ref_in_endpoints"] = agg.include_ref_in_endpoints;
    for (const auto& [task, gens] : agg.values) {
        nlohmann::json orientations;
        for (const auto& metric : metric_names_for_task(task))
            orientations[metric] = metric_orientation(metric) == Orientation::LowerBetter
                                       ? "lower_better"
                                       : "higher_better";
        j["orientations"][task] = std::move(orientations);
    }
    for (const auto& [task, gens] : agg.values) {
        for (const auto& [gen, metrics] : gens) {
            nlohmann::json gj;
            for (const auto& [metric, cell] : metrics) {
                gj[metric] = {{"mean", cell.mean},
                              {"std", cell.std},
                              {"degenerate", cell.degenerate}};
            }
            DimensionSummary dims = dimension_average(metrics, task);
            nlohmann::json dj;
            for (const auto& [dim, v] : dims.value) dj[dim] = v;
            gj["dimension_average"] = dj;
            if (!dims.incomplete.empty())
                gj["incomplete_dimensions"] = dims.incomplete;
            j["tasks"][task][gen] = std::move(gj);
        }
    }
    return j;
}

namespace bench_detail {

inline std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
}

} // namespace bench_detail

/// Leaderboard table: one block per task, one row per generator with the
/// reference row first, mean +/- std per metric. Fidelity columns are on the
/// 0-100 scale before normalisation, everything in the aggregate is 0-1.
inline std::string leaderboard_markdown(const AggregateReport& agg) {
    std::string out;
    for (const auto& [task, gens] : agg.values) {
        if (gens.empty()) continue;
        std::vector<std::string> metrics =
            metric_names_for_task(task);
        out += "## " + std::string(task == "regression" ? "Regression" : "Classification") +
               " tasks\n\n";
        out += "| Generator |";
        for (const auto& m : metrics) {
            out += " " + m + (metric_orientation(m) == Orientation::LowerBetter ? " ↓"
                                                                                : " ↑") +
                   " |";
        }
        out += "\n|---|";
        for (std::size_t i = 0; i < metrics.size(); ++i) out += "---|";
        out += "\n";
        std::vector<std::string> order;
        if (gens.count("ref")) order.push_back("ref");
        for (const auto& [gen, cells] : gens)
            if (gen != "ref") order.push_back(gen);
        for (const auto& gen : order) {
            out += "| " + (gen == "ref" ? std::string("D_ref") : gen) + " |";
            const auto& cells = gens.at(gen);
            for (const auto& m : metrics) {
                auto it = cells.find(m);
                if (it == cells.end()) {
                    out += " – |";
                } else {
                    out += " " + bench_detail::fixed2(it->second.mean) + " ± " +
                           bench_detail::fixed2(it->second.std) + " |";
                }
            }
            out += "\n";
        }
        out += "\n";
    }
    return out;
}

inline std::string records_csv(const std::vector<RunRecord>& records) {
    std::string out = "dataset,seed,generator,metric,value\n";
    for (const auto& r : records) {
        auto metrics = r.ok ? record_metrics(r) : std::map<std::string, double>{};
        for (const auto& name : metric_names_for_task(r.task)) {
            out += r.dataset + "," + std::to_string(r.seed) + "," + r.generator + "," +
                   name + ",";
            auto it = metrics.find(name);
            if (it != metrics.end()) out += detail::format_double(it->second);
            out += "\n";
        }
    }
    return out;
}

/// Write records.json / aggregate.json / records.csv / leaderboard.md as
/// requested. Formats: "json", "csv", "markdown".
inline void emit_report(const std::vector<RunRecord>& records, const AggregateReport& agg,
                        const std::set<std::string>& formats,
                        const std::string& output_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(output_dir, ec);
    if (!fs::exists(output_dir))
        throw ConfigError("cannot create output directory '" + output_dir + "'");
    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream out(fs::path(output_dir) / name);
        if (!out) throw ConfigError("cannot write '" + name + "'");
        out << content;
    };
    if (formats.count("json")) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : records) arr.push_back(record_to_json(r));
        write("records.json", arr.dump(2) + "\n");
        write("aggregate.json", aggregate_to_json(agg).dump(2) + "\n");
    }
    if (formats.count("csv")) write("records.csv", records_csv(records));
    if (formats.count("markdown")) write("leaderboard.md", leaderboard_markdown(agg));
}

} // namespace tabbench
