// Command-line front end: dataset sampling, splitting, generation,
// evaluation, aggregation and the full benchmark sweep.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "tabbench/tabbench.hpp"

namespace fs = std::filesystem;
using namespace tabbench;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitPartialFailure = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    if (fs::path(path).has_parent_path())
        fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << content;
}

DataTable load_dataset(const std::string& csv_path, const std::string& manifest_path) {
    auto manifest = nlohmann::json::parse(read_file(manifest_path));
    auto [schema, target] = manifest_to_schema(manifest);
    return load_csv(read_file(csv_path), schema, target);
}

void write_dataset(const std::string& prefix, const DataTable& table) {
    write_file(prefix + ".csv", write_csv(table));
    write_file(prefix + ".manifest.json",
               schema_to_manifest(table.schema(), table.target()).dump(2) + "\n");
}

std::vector<RunRecord> load_records(const std::string& path) {
    std::vector<RunRecord> records;
    if (fs::is_directory(path)) {
        fs::path root = fs::path(path);
        if (fs::is_directory(root / "records")) root /= "records";
        for (const auto& entry : fs::recursive_directory_iterator(root)) {
            if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
            records.push_back(
                record_from_json(nlohmann::json::parse(read_file(entry.path().string()))));
        }
    } else {
        for (const auto& j : nlohmann::json::parse(read_file(path)))
            records.push_back(record_from_json(j));
    }
    std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
        return std::tie(a.dataset, a.seed, a.generator) <
               std::tie(b.dataset, b.seed, b.generator);
    });
    if (records.empty()) throw ConfigError("no records found under '" + path + "'");
    return records;
}

std::set<std::string> parse_formats(const std::string& csv) {
    std::set<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item != "json" && item != "csv" && item != "markdown")
            throw ConfigError("unknown format '" + item + "'");
        out.insert(item);
    }
    if (out.empty()) throw ConfigError("no output format selected");
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Benchmark tabular data generators against ground-truth causal structure"};
    app.require_subcommand(1);

    // --- sample ---------------------------------------------------------
    auto* sample_cmd = app.add_subcommand("sample", "Draw a dataset from an SCM file");
    std::string sample_scm, sample_out = "dataset", sample_target;
    std::size_t sample_n = 2000;
    int sample_seed = 0;
    sample_cmd->add_option("scm", sample_scm, "SCM file (.bif or .json)")->required();
    sample_cmd->add_option("-n,--rows", sample_n, "number of rows");
    sample_cmd->add_option("--seed", sample_seed, "sampling seed");
    sample_cmd->add_option("--target", sample_target, "target variable override");
    sample_cmd->add_option("-o,--out", sample_out, "output prefix");

    // --- split ----------------------------------------------------------
    auto* split_cmd = app.add_subcommand("split", "Split a dataset 80/20 then 90/10");
    std::string split_data, split_manifest, split_out = "splits.json", split_emit;
    int split_seed = 0;
    split_cmd->add_option("--data", split_data, "dataset CSV")->required();
    split_cmd->add_option("--manifest", split_manifest, "schema manifest")->required();
    split_cmd->add_option("--seed", split_seed, "split seed");
    split_cmd->add_option("-o,--out", split_out, "indices JSON output");
    split_cmd->add_option("--emit-tables", split_emit,
                          "also write <prefix>.{train,val,test}.csv");

    // --- generate -------------------------------------------------------
    auto* gen_cmd = app.add_subcommand("generate", "Run a built-in generator");
    std::string gen_data, gen_manifest, gen_name = "marginal", gen_out = "synthetic.csv";
    int gen_seed = 0, gen_k = 5, gen_bins = 8, gen_max_parents = 3;
    std::size_t gen_n = 0;
    double gen_ratio = 3.0;
    gen_cmd->add_option("--data", gen_data, "training CSV")->required();
    gen_cmd->add_option("--manifest", gen_manifest, "schema manifest")->required();
    gen_cmd->add_option("--generator", gen_name, "marginal | smote | bn");
    gen_cmd->add_option("--seed", gen_seed, "generation seed");
    gen_cmd->add_option("--n-syn", gen_n, "synthetic rows (overrides ratio)");
    gen_cmd->add_option("--n-syn-ratio", gen_ratio, "synthetic rows per training row");
    gen_cmd->add_option("-k,--neighbours", gen_k, "SMOTE neighbour count");
    gen_cmd->add_option("--bins", gen_bins, "BN discretisation bins");
    gen_cmd->add_option("--max-parents", gen_max_parents, "BN parent cap");
    gen_cmd->add_option("-o,--out", gen_out, "synthetic CSV output");

    // --- evaluate -------------------------------------------------------
    auto* eval_cmd =
        app.add_subcommand("evaluate", "Evaluate one (dataset, seed, generator) triple");
    std::string eval_scm, eval_generator = "ref", eval_out, eval_target;
    std::string eval_external_dir, eval_predictions, eval_predictions_meta;
    int eval_seed = 0;
    double eval_alpha = 0.01, eval_ratio = 3.0;
    int eval_mcs = 2;
    std::size_t eval_sample_n = 2000, eval_cap = 20000;
    eval_cmd->add_option("scm", eval_scm, "SCM file")->required();
    eval_cmd->add_option("--generator", eval_generator,
                         "ref | marginal | smote | bn | <external name>");
    eval_cmd->add_option("--seed", eval_seed, "run seed");
    eval_cmd->add_option("--target", eval_target, "target variable override");
    eval_cmd->add_option("--alpha", eval_alpha, "CI significance level");
    eval_cmd->add_option("--max-cond-size", eval_mcs, "conditioning set bound");
    eval_cmd->add_option("--statement-cap", eval_cap, "CI statement cap");
    eval_cmd->add_option("--n-syn-ratio", eval_ratio, "synthetic rows per training row");
    eval_cmd->add_option("--sample-n", eval_sample_n, "dataset rows to sample");
    eval_cmd->add_option("--external-dir", eval_external_dir,
                         "root of <dataset>/<seed>/<generator>.csv files");
    eval_cmd->add_option("--predictions", eval_predictions,
                         "external predictions CSV to merge into utility");
    eval_cmd->add_option("--predictions-meta", eval_predictions_meta,
                         "sidecar JSON naming the predictor");
    eval_cmd->add_option("-o,--out", eval_out, "record JSON output (default stdout)");

    // --- aggregate ------------------------------------------------------
    auto* agg_cmd = app.add_subcommand("aggregate", "ADTM-aggregate run records");
    std::string agg_records, agg_out = "aggregate.json";
    bool agg_exclude_ref = false;
    agg_cmd->add_option("records", agg_records, "records.json or output directory")
        ->required();
    agg_cmd->add_flag("--exclude-ref-endpoints", agg_exclude_ref,
                      "exclude the reference row from affine endpoints");
    agg_cmd->add_option("-o,--out", agg_out, "aggregate JSON output");

    // --- report ---------------------------------------------------------
    auto* report_cmd = app.add_subcommand("report", "Emit JSON/CSV/markdown reports");
    std::string report_records, report_out = "bench-out",
                report_formats = "json,csv,markdown";
    bool report_exclude_ref = false;
    report_cmd->add_option("records", report_records, "records.json or output directory")
        ->required();
    report_cmd->add_option("-o,--out", report_out, "output directory");
    report_cmd->add_option("--format", report_formats, "comma list: json,csv,markdown");
    report_cmd->add_flag("--exclude-ref-endpoints", report_exclude_ref,
                         "exclude the reference row from affine endpoints");

    // --- run ------------------------------------------------------------
    auto* run_cmd = app.add_subcommand("run", "Full sweep: sample, generate, evaluate");
    std::string run_config, run_output, run_formats = "json,csv,markdown";
    int run_workers = 0, run_seed_count = 0, run_mcs = -1;
    double run_ratio = 0.0, run_alpha = 0.0;
    run_cmd->add_option("--config", run_config, "RunConfig JSON file")->required();
    run_cmd->add_option("--workers", run_workers, "worker thread count");
    run_cmd->add_option("--seed-count", run_seed_count, "use seeds 0..N-1");
    run_cmd->add_option("--n-syn-ratio", run_ratio, "synthetic rows per training row");
    run_cmd->add_option("--alpha", run_alpha, "CI significance level");
    run_cmd->add_option("--max-cond-size", run_mcs, "conditioning set bound");
    run_cmd->add_option("--output", run_output, "output directory override");
    run_cmd->add_option("--format", run_formats, "comma list: json,csv,markdown");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sample_cmd) {
            DatasetSpec spec{sample_scm, fs::path(sample_scm).stem().string(), {}};
            if (!sample_target.empty()) spec.target = sample_target;
            ScmModel scm = load_scm_file(spec);
            DataTable table =
                prior_sample(scm, sample_n, static_cast<std::uint64_t>(sample_seed));
            write_dataset(sample_out, table);
            std::cout << "wrote " << sample_out << ".csv (" << table.row_count()
                      << " rows)\n";
        } else if (*split_cmd) {
            DataTable table = load_dataset(split_data, split_manifest);
            SplitIndices idx = split(table, split_seed);
            nlohmann::json j{{"seed", split_seed},
                             {"train", idx.train},
                             {"val", idx.val},
                             {"test", idx.test}};
            write_file(split_out, j.dump(2) + "\n");
            if (!split_emit.empty()) {
                write_dataset(split_emit + ".train", table.select_rows(idx.train));
                write_dataset(split_emit + ".val", table.select_rows(idx.val));
                write_dataset(split_emit + ".test", table.select_rows(idx.test));
            }
            std::cout << "train/val/test = " << idx.train.size() << "/" << idx.val.size()
                      << "/" << idx.test.size() << "\n";
        } else if (*gen_cmd) {
            DataTable train = load_dataset(gen_data, gen_manifest);
            GenRequest req;
            req.seed = static_cast<std::uint64_t>(gen_seed);
            req.n_syn = gen_n > 0 ? gen_n
                                  : static_cast<std::size_t>(
                                        gen_ratio * static_cast<double>(train.row_count()));
            req.stratify = train.target() &&
                           train.schema()[train.target_index()].kind ==
                               ColumnKind::Categorical;
            DataTable syn = [&] {
                if (gen_name == "marginal") return gen_marginal(train, req);
                if (gen_name == "smote") return gen_smote(train, req, gen_k);
                if (gen_name == "bn") {
                    BnFitConfig cfg;
                    cfg.numeric_bins = gen_bins;
                    cfg.max_parents = gen_max_parents;
                    return gen_bayes_net(train, req, cfg);
                }
                throw ConfigError("unknown generator '" + gen_name + "'");
            }();
            write_file(gen_out, write_csv(syn));
            std::cout << "wrote " << gen_out << " (" << syn.row_count() << " rows)\n";
        } else if (*eval_cmd) {
            RunConfig cfg;
            DatasetSpec spec{eval_scm, fs::path(eval_scm).stem().string(), {}};
            if (!eval_target.empty()) spec.target = eval_target;
            cfg.datasets = {spec};
            cfg.alpha = eval_alpha;
            cfg.max_cond_size = eval_mcs;
            cfg.statement_cap = eval_cap;
            cfg.n_syn_ratio = eval_ratio;
            cfg.sample_n = eval_sample_n;
            if (!eval_external_dir.empty())
                cfg.external.push_back({eval_generator, eval_external_dir});
            ScmModel scm = load_scm_file(spec);
            DatasetContext ctx = prepare_dataset(scm, spec.name, eval_seed, cfg);
            RunRecord rec = evaluate_triple(ctx, eval_generator, eval_seed, cfg);
            if (rec.ok && !eval_predictions.empty()) {
                if (eval_predictions_meta.empty())
                    throw ConfigError("--predictions needs --predictions-meta");
                auto meta = nlohmann::json::parse(read_file(eval_predictions_meta));
                std::string predictor = meta.at("predictor").get<std::string>();
                double y_std = 1.0;
                if (ctx.task == "regression") {
                    std::size_t tc = ctx.train.target_index();
                    std::vector<double> y;
                    for (std::size_t r = 0; r < ctx.train.row_count(); ++r)
                        if (!ctx.train.is_missing(tc, r))
                            y.push_back(ctx.train.numeric(tc, r));
                    y_std = stddev_pop(y);
                }
                double score = score_external_predictions(read_file(eval_predictions),
                                                          ctx.test, y_std);
                merge_predictor_score(rec.utility, predictor, score);
            }
            std::string text = record_to_json(rec).dump(2) + "\n";
            if (eval_out.empty())
                std::cout << text;
            else
                write_file(eval_out, text);
            if (!rec.ok) {
                std::cerr << "evaluation failed: " << rec.error << "\n";
                return kExitPartialFailure;
            }
        } else if (*agg_cmd) {
            auto records = load_records(agg_records);
            AggregateReport agg = adtm_aggregate(records, !agg_exclude_ref);
            write_file(agg_out, aggregate_to_json(agg).dump(2) + "\n");
            std::cout << "aggregated " << records.size() << " records\n";
        } else if (*report_cmd) {
            auto records = load_records(report_records);
            AggregateReport agg = adtm_aggregate(records, !report_exclude_ref);
            emit_report(records, agg, parse_formats(report_formats), report_out);
            std::cout << "reports written to " << report_out << "\n";
        } else if (*run_cmd) {
            RunConfig cfg = parse_run_config(nlohmann::json::parse(read_file(run_config)));
            if (run_workers > 0) cfg.workers = run_workers;
            if (run_seed_count > 0) {
                cfg.seeds.clear();
                for (int s = 0; s < run_seed_count; ++s) cfg.seeds.push_back(s);
            }
            if (run_ratio > 0) cfg.n_syn_ratio = run_ratio;
            if (run_alpha > 0) cfg.alpha = run_alpha;
            if (run_mcs >= 0) cfg.max_cond_size = run_mcs;
            if (!run_output.empty()) cfg.output_dir = run_output;
            cfg.validate();

            auto records = run_benchmark(cfg);
            AggregateReport agg = adtm_aggregate(records, cfg.include_ref_in_endpoints);
            emit_report(records, agg, parse_formats(run_formats), cfg.output_dir);

            std::size_t failed = 0;
            for (const auto& r : records) failed += r.ok ? 0 : 1;
            std::cout << records.size() << " records (" << failed << " failed), output in "
                      << cfg.output_dir << "\n";
            if (failed > 0) return kExitPartialFailure;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPartialFailure;
    }
    return kExitOk;
}
