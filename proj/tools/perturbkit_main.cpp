// perturbkit CLI: dataset construction, evaluation, statistics, reports, and
// human-review tooling behind one config file.
//
// Exit codes: 0 success, 2 config error, 3 adapter error, 4 data validation
// error, 1 anything else.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "perturbkit/config.hpp"
#include "perturbkit/evaluation.hpp"
#include "perturbkit/manifest.hpp"
#include "perturbkit/pipeline.hpp"
#include "perturbkit/report.hpp"
#include "perturbkit/review.hpp"
#include "perturbkit/stats.hpp"

namespace fs = std::filesystem;
using namespace perturbkit;

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> occupations;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "run config JSON");
    if (config_required) opt->required();
    cmd->add_option("--seed", args.seed, "override the base seed");
    cmd->add_option("--occupation", args.occupations, "restrict to these occupations");
    cmd->add_option("--out", args.out_dir, "override the output directory");
}

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig cfg = load_run_config(args.config_path);
    if (args.seed) cfg.pipeline.base_seed = *args.seed;
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (!args.occupations.empty()) {
        std::vector<OccupationSpec> filtered;
        for (const auto& name : args.occupations) {
            bool found = false;
            for (const auto& spec : cfg.pipeline.occupations)
                if (spec.name == name) {
                    filtered.push_back(spec);
                    found = true;
                }
            if (!found) throw ConfigError("unknown occupation: " + name);
        }
        cfg.pipeline.occupations = std::move(filtered);
    }
    return cfg;
}

void write_yields(const YieldReport& yields, const fs::path& out_dir, const std::string& stem) {
    write_text_file(out_dir / (stem + ".json"), yields.to_json().dump(2) + "\n");
    write_text_file(out_dir / (stem + ".txt"), yields.to_text());
}

std::map<std::string, std::string> parse_named_paths(const std::vector<std::string>& specs,
                                                     const std::string& flag) {
    std::map<std::string, std::string> out;
    for (const auto& spec : specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
            throw ConfigError(flag + " expects name=path, got: " + spec);
        out[spec.substr(0, eq)] = spec.substr(eq + 1);
    }
    return out;
}

std::vector<std::string> read_id_list(const fs::path& path) {
    std::vector<std::string> ids;
    std::istringstream in(read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

int cmd_generate(const CommonArgs& args) {
    const RunConfig cfg = resolve_config(args);
    const AdapterSuite adapters = bind_adapters(cfg, cfg.out_dir);
    const PipelineResult result = run_generate_phase(cfg.pipeline, adapters, cfg.out_dir);
    result.manifest.save(cfg.out_dir / "base_manifest.jsonl");
    write_yields(result.yields, cfg.out_dir, "yields_generate");
    std::cout << "generate: " << result.manifest.base_images(true).size()
              << " selected base images across "
              << cfg.pipeline.occupations.size() << " occupation(s)\n";
    return 0;
}

int cmd_perturb(const CommonArgs& args, const std::string& base_manifest) {
    const RunConfig cfg = resolve_config(args);
    const AdapterSuite adapters = bind_adapters(cfg, cfg.out_dir);
    PipelineResult base;
    const fs::path manifest_path =
        base_manifest.empty() ? cfg.out_dir / "base_manifest.jsonl" : fs::path(base_manifest);
    base.manifest = Manifest::load(manifest_path);
    const fs::path yields_path = cfg.out_dir / "yields_generate.json";
    if (fs::exists(yields_path))
        base.yields = YieldReport::from_json(
            nlohmann::ordered_json::parse(read_text_file(yields_path)));
    const PipelineResult result =
        run_perturb_phase(cfg.pipeline, adapters, cfg.out_dir, std::move(base));
    result.manifest.save(cfg.out_dir / "manifest.jsonl");
    write_yields(result.yields, cfg.out_dir, "yields");
    std::cout << "perturb: " << result.manifest.sets(true).size() << " sampled sets\n";
    return 0;
}

int cmd_run(const CommonArgs& args) {
    const RunConfig cfg = resolve_config(args);
    const AdapterSuite adapters = bind_adapters(cfg, cfg.out_dir);
    const PipelineResult result = run_pipeline(cfg.pipeline, adapters, cfg.out_dir);
    result.manifest.save(cfg.out_dir / "manifest.jsonl");
    write_yields(result.yields, cfg.out_dir, "yields");
    const auto sampled = result.manifest.sets(true).size();
    std::cout << "run: " << sampled << " sampled sets (" << sampled * kVariantsPerSet
              << " images)\n";
    if (!result.yields.conserved()) {
        std::cerr << "run: yield report failed conservation check\n";
        return 4;
    }
    return 0;
}

struct EvaluateArgs {
    std::string manifest;
    std::string label_set;
    std::optional<double> temperature;
    std::string model_name;
    std::string labels_file;
    std::string similarities_in;
    std::string emit_similarities;
    std::vector<std::string> restrict_sets_files;
    std::string emit_correct_sets;
    bool iat = false;
    std::string scorer;
};

int cmd_evaluate(const CommonArgs& args, const EvaluateArgs& eargs) {
    RunConfig cfg = resolve_config(args);
    if (!eargs.label_set.empty()) cfg.evaluation.label_set = eargs.label_set;
    if (eargs.temperature) cfg.evaluation.temperature = *eargs.temperature;
    if (!eargs.model_name.empty()) cfg.evaluation.model_name = eargs.model_name;
    if (!eargs.scorer.empty()) cfg.evaluation.scorer = eargs.scorer;
    if (cfg.evaluation.scorer != "zero_shot" && cfg.evaluation.scorer != "lens")
        throw ConfigError("--scorer must be 'zero_shot' or 'lens'");
    if (cfg.evaluation.temperature <= 0.0) throw ConfigError("--temperature must be positive");

    const fs::path manifest_path =
        eargs.manifest.empty() ? cfg.out_dir / "manifest.jsonl" : fs::path(eargs.manifest);
    const Manifest manifest = Manifest::load(manifest_path);
    const auto sets = manifest.sets(/*sampled_only=*/true);
    if (sets.empty()) throw ValidationError("manifest has no sampled sets: " + manifest_path.string());

    // Scoring backend: recorded live adapters, or a frozen similarities file.
    std::shared_ptr<LabelScorer> scorer;
    std::shared_ptr<RecordingLabelScorer> recording;
    const bool zero_shot = cfg.evaluation.scorer == "zero_shot";
    if (!eargs.similarities_in.empty()) {
        scorer = std::make_shared<StoredLabelScorer>(
            StoredLabelScorer::load(eargs.similarities_in));
    } else {
        const AdapterSuite adapters = bind_adapters(cfg, cfg.out_dir);
        std::shared_ptr<LabelScorer> live;
        if (zero_shot) {
            if (!adapters.zero_shot) throw ConfigError("no zero_shot adapter bound");
            live = std::make_shared<ZeroShotLabelScorer>(adapters.zero_shot);
        } else {
            if (!adapters.scorer) throw ConfigError("no generative scorer adapter bound");
            live = std::make_shared<LensLabelScorer>(adapters.scorer);
        }
        if (!eargs.emit_similarities.empty()) {
            recording = std::make_shared<RecordingLabelScorer>(live, zero_shot);
            scorer = recording;
        } else {
            scorer = live;
        }
    }

    auto labels_for = cfg.evaluation.label_set == "difficult" ? label_provider_difficult()
                                                              : label_provider_base();
    std::string label_set_name = cfg.evaluation.label_set;
    if (!eargs.labels_file.empty()) {
        const auto j = nlohmann::ordered_json::parse(read_text_file(eargs.labels_file));
        std::map<std::string, std::vector<std::string>> custom;
        for (const auto& [occ, labels] : j.items())
            custom[occ] = labels.get<std::vector<std::string>>();
        labels_for = label_provider_custom(std::move(custom));
        label_set_name = "custom:" + fs::path(eargs.labels_file).filename().string();
    }

    EvaluationOptions options;
    options.temperature = cfg.evaluation.temperature;
    options.workers = cfg.pipeline.workers;
    if (!eargs.restrict_sets_files.empty()) {
        std::vector<std::vector<std::string>> lists;
        for (const auto& file : eargs.restrict_sets_files) lists.push_back(read_id_list(file));
        options.restrict_sets = intersect_sorted(std::move(lists));
        if (options.restrict_sets.empty())
            throw ValidationError("--restrict-sets intersection is empty");
    }

    const EvaluationOutcome outcome =
        evaluate_sets(*scorer, sets, cfg.pipeline.occupations, labels_for, options);
    for (const auto& [set_id, reason] : outcome.skipped)
        std::cerr << "evaluate: skipped set " << set_id << ": " << reason << "\n";
    if (outcome.predictions.empty()) throw ValidationError("evaluation produced no predictions");

    const fs::path eval_dir = cfg.out_dir / "eval" / cfg.evaluation.model_name;
    write_predictions(outcome.predictions, eval_dir / "predictions.jsonl");

    const FairnessReport report = build_fairness_report(
        outcome.predictions, cfg.evaluation.model_name, label_set_name, options.temperature);
    write_text_file(eval_dir / "fairness_report.json", to_json(report).dump(2) + "\n");
    write_set_stds(set_stds(build_fairness_input(outcome.predictions)), cfg.evaluation.model_name,
                   eval_dir / "set_stds.json");

    if (recording) recording->save(eargs.emit_similarities, zero_shot ? "zero_shot" : "lens");
    if (!eargs.emit_correct_sets.empty()) {
        std::string body;
        for (const auto& id : correct_set_ids(outcome.predictions)) body += id + "\n";
        write_text_file(eargs.emit_correct_sets, body);
    }
    if (eargs.iat) {
        const AdapterSuite adapters = bind_adapters(cfg, cfg.out_dir);
        if (!adapters.zero_shot) throw ConfigError("IAT probe needs a zero_shot adapter");
        std::vector<std::pair<DemographicGroup, std::string>> images;
        for (const auto* set : sets)
            for (const auto& [group, variant] : set->variants)
                images.emplace_back(group, variant.image_ref);
        const IatResult iat = iat_probe(*adapters.zero_shot, images, options.temperature);
        Json j;
        j["labels"] = iat_labels();
        Json means = Json::object();
        for (const auto& [g, mean] : iat.mean_trustworthy)
            means[std::string(canonical_name(g))] = mean;
        j["mean_trustworthy"] = std::move(means);
        j["spread"] = iat.spread;
        j["images"] = iat.images;
        write_text_file(eval_dir / "iat.json", j.dump(2) + "\n");
    }

    std::cout << "evaluate: model " << cfg.evaluation.model_name << " fairness "
              << to_fixed(report.fairness, 3) << " accuracy " << percent(report.accuracy, 1)
              << " over " << report.n_sets << " sets\n";
    return 0;
}

struct StatsArgs {
    std::vector<std::string> predictions;  // name=path
    std::vector<std::string> set_stds;     // name=path
    double alpha = 0.01;
    std::string occupation;
    std::string target_label;
    std::string reference_group = "Caucasian";
    std::size_t error_n = 10;
    std::uint64_t seed = 0;
    std::string out_dir;
};

int cmd_stats(const StatsArgs& sargs) {
    const auto prediction_files = parse_named_paths(sargs.predictions, "--predictions");
    const auto std_files = parse_named_paths(sargs.set_stds, "--set-stds");
    if (prediction_files.empty() && std_files.empty())
        throw ConfigError("stats needs --predictions and/or --set-stds inputs");
    const fs::path out_dir = sargs.out_dir.empty() ? fs::path("out") : fs::path(sargs.out_dir);
    const DemographicGroup reference = require_group(sargs.reference_group);

    Json out;
    std::string text;

    // Pairwise fairness comparison over per-set standard deviations, pooled
    // across occupations by default; --occupation switches to that subset.
    if (std_files.size() >= 2) {
        std::map<std::string, std::vector<double>> samples;
        for (const auto& [name, path] : std_files) {
            const auto [model, stds] = read_set_stds(path);
            auto& sample = samples[name];
            for (const auto& s : stds)
                if (sargs.occupation.empty() || s.occupation == sargs.occupation)
                    sample.push_back(s.std);
        }
        const ModelComparison cmp = compare_models(samples, sargs.alpha);
        Json pairs = Json::array();
        text += "pairwise Mood's median tests (alpha = " + to_fixed(sargs.alpha, 4) +
                ", Bonferroni m = " + std::to_string(cmp.comparisons) + ")\n";
        for (const auto& p : cmp.pairs) {
            Json pj;
            pj["model_a"] = p.model_a;
            pj["model_b"] = p.model_b;
            pj["median_std_a"] = p.median_std_a;
            pj["median_std_b"] = p.median_std_b;
            pj["chi2"] = p.test.chi2;
            pj["p_value"] = p.test.p_value;
            pj["p_adjusted"] = p.p_adjusted;
            pj["reject"] = p.reject;
            pairs.push_back(std::move(pj));
            text += "  " + p.model_a + " vs " + p.model_b + ": chi2 = " + to_fixed(p.test.chi2, 4) +
                    ", p = " + to_fixed(p.test.p_value, 6) + ", adjusted = " +
                    to_fixed(p.p_adjusted, 6) + (p.reject ? "  [reject]" : "") + "\n";
        }
        Json cmp_json;
        cmp_json["alpha"] = sargs.alpha;
        cmp_json["comparisons"] = cmp.comparisons;
        cmp_json["pairs"] = std::move(pairs);
        cmp_json["ranking_by_median_std"] = cmp.ranking;
        Json order = Json::array();
        for (const auto& [better, worse] : cmp.significant_order)
            order.push_back({{"better", better}, {"worse", worse}});
        cmp_json["significant_order"] = std::move(order);
        out["model_comparison"] = std::move(cmp_json);
        text += "  ranking by median std:";
        for (const auto& name : cmp.ranking) text += " " + name;
        text += "\n\n";
    }

    Json models = Json::object();
    for (const auto& [name, path] : prediction_files) {
        const auto predictions = read_predictions(path);
        Json mj;
        text += "model " + name + " (" + std::to_string(predictions.size()) + " predictions)\n";

        // Group deltas plus the clustered linear probability model.
        const auto by_group = per_group_accuracy(predictions);
        Json groups = Json::object();
        if (by_group.count(reference)) {
            std::map<DemographicGroup, double> deltas;
            const double ref_acc = by_group.at(reference);
            for (const auto& [g, acc] : by_group) deltas[g] = (acc - ref_acc) * 100.0;
            for (const auto& [g, acc] : by_group) {
                Json gj;
                gj["accuracy"] = acc;
                gj["delta_pct"] = deltas.at(g);
                groups[std::string(canonical_name(g))] = std::move(gj);
                text += "  " + std::string(canonical_name(g)) + ": accuracy " + percent(acc, 2) +
                        " (" + signed_percent(deltas.at(g), 2) + ")\n";
            }
        }
        mj["groups"] = std::move(groups);

        std::vector<double> outcome;
        std::vector<std::string> group_names, clusters;
        for (const auto& p : predictions) {
            outcome.push_back(p.correct ? 1.0 : 0.0);
            group_names.emplace_back(canonical_name(p.group));
            clusters.push_back(p.set_id);
        }
        const RegressionResult reg =
            lpm_cluster_regression(outcome, group_names, clusters, std::string(canonical_name(reference)));
        Json terms = Json::array();
        text += "  LPM with CR1 cluster-robust SEs (" + std::to_string(reg.n_clusters) +
                " clusters)\n";
        for (std::size_t t = 0; t < reg.terms.size(); ++t) {
            Json tj;
            tj["term"] = reg.terms[t];
            tj["coefficient"] = reg.coefficients[t];
            tj["std_error"] = reg.std_errors[t];
            tj["t_stat"] = reg.t_stats[t];
            tj["p_value"] = reg.p_values[t];
            terms.push_back(std::move(tj));
            text += "    " + reg.terms[t] + ": " + to_fixed(reg.coefficients[t], 4) + " (se " +
                    to_fixed(reg.std_errors[t], 4) + ", p " + to_fixed(reg.p_values[t], 4) + ")\n";
        }
        mj["regression"] = std::move(terms);
        mj["n_clusters"] = reg.n_clusters;

        // Misclassification analysis per occupation.
        std::set<std::string> occupations;
        for (const auto& p : predictions)
            if (sargs.occupation.empty() || p.occupation == sargs.occupation)
                occupations.insert(p.occupation);
        Json occ_json = Json::object();
        for (const auto& occ : occupations) {
            Json oj;
            const auto top = top_misclassified_label(predictions, occ);
            oj["top_misclassified_label"] = top ? Json(*top) : Json(nullptr);
            const std::string target = !sargs.target_label.empty() ? sargs.target_label
                                       : top                       ? *top
                                                                   : "";
            if (!target.empty()) {
                std::vector<PredictionRecord> subset;
                for (const auto& p : predictions)
                    if (p.occupation == occ) subset.push_back(p);
                const MisclassTable table = misclass_ratios(subset, target, reference);
                Json rates = Json::object();
                text += "  " + occ + ": top misclassified label = " + (top ? *top : "(none)") +
                        "\n";
                for (const auto& [g, rate] : table.rate_pct) {
                    Json rj;
                    rj["count"] = table.target_counts.at(g);
                    rj["rate_vs_reference_pct"] = rate ? Json(*rate) : Json(nullptr);
                    rates[std::string(canonical_name(g))] = std::move(rj);
                    if (g != reference && rate)
                        text += "    " + std::string(canonical_name(g)) + " predicted as \"" +
                                target + "\" " + signed_percent(*rate, 0) + " vs reference\n";
                }
                oj["target_label"] = target;
                oj["rates"] = std::move(rates);
            }
            occ_json[occ] = std::move(oj);
        }
        mj["occupations"] = std::move(occ_json);

        // Seeded error-analysis sample.
        const ErrorAnalysisSample sample =
            error_analysis_sample(predictions, sargs.error_n, sargs.seed, reference);
        Json sample_json = Json::object();
        for (const auto& [g, ids] : sample.set_ids)
            sample_json[std::string(canonical_name(g))] = ids;
        mj["error_analysis_sample"] = std::move(sample_json);
        for (const auto& w : sample.warnings) text += "  warning: " + w + "\n";
        text += "\n";
        models[name] = std::move(mj);
    }
    out["models"] = std::move(models);

    write_text_file(out_dir / "stats.json", out.dump(2) + "\n");
    write_text_file(out_dir / "stats.txt", text);
    std::cout << text;
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& fixture,
               const std::string& out_dir) {
    std::vector<FairnessReport> reports;
    if (!fixture.empty()) {
        const auto j = nlohmann::ordered_json::parse(read_text_file(fixture));
        for (const auto& mj : j.at("models")) reports.push_back(fairness_report_from_json(mj));
    }
    for (const auto& path : inputs)
        reports.push_back(
            fairness_report_from_json(nlohmann::ordered_json::parse(read_text_file(path))));
    if (reports.empty()) throw ConfigError("report needs --input and/or --fixture");
    const fs::path dir = out_dir.empty() ? fs::path("out") / "report" : fs::path(out_dir);
    write_report(reports, dir);
    std::cout << "report: wrote " << (dir / "report.md").string() << " and figures for "
              << reports.size() << " model(s)\n";
    return 0;
}

int cmd_review_sample(const CommonArgs& args, const std::string& manifest_file, double fraction,
                      const std::string& out_csv) {
    const RunConfig cfg = resolve_config(args);
    const fs::path manifest_path =
        manifest_file.empty() ? cfg.out_dir / "manifest.jsonl" : fs::path(manifest_file);
    const Manifest manifest = Manifest::load(manifest_path);
    const auto refs = sample_for_review(manifest, fraction, cfg.pipeline.base_seed);

    // Annotation template: intent columns filled, answer columns blank.
    std::map<std::string, std::pair<std::string, DemographicGroup>> by_ref;  // set_id, group
    for (const auto* set : manifest.sets(true))
        for (const auto& [group, variant] : set->variants)
            by_ref[variant.image_ref] = {set->set_id, group};
    std::string csv{kAnnotationHeader};
    csv.push_back('\n');
    for (const auto& ref : refs) {
        const auto& [set_id, group] = by_ref.at(ref);
        csv += ref + "," + set_id + "," + std::string(canonical_name(group)) + ",,\n";
    }
    const fs::path out_path =
        out_csv.empty() ? cfg.out_dir / "review_sample.csv" : fs::path(out_csv);
    write_text_file(out_path, csv);
    std::cout << "review sample: " << refs.size() << " images -> " << out_path.string() << "\n";
    return 0;
}

int cmd_review_aggregate(const std::string& annotations_file, const std::string& manifest_file,
                         const std::string& out_dir) {
    const ParsedAnnotations parsed = read_annotations(annotations_file);
    for (const auto& [line, error] : parsed.rejected)
        std::cerr << "review aggregate: line " << line << " rejected: " << error << "\n";
    std::map<std::string, std::string> occupation_index;
    if (!manifest_file.empty())
        occupation_index = set_occupation_index(Manifest::load(manifest_file));
    const ReviewAggregate agg = aggregate_review(parsed.rows, occupation_index);

    Json j;
    j["overall"] = {{"realism", agg.overall.realism},
                    {"fidelity", agg.overall.fidelity},
                    {"rows", agg.overall.rows}};
    Json occ = Json::object();
    for (const auto& [name, scores] : agg.per_occupation)
        occ[name] = {{"realism", scores.realism},
                     {"fidelity", scores.fidelity},
                     {"rows", scores.rows}};
    j["per_occupation"] = std::move(occ);
    j["rejected_rows"] = parsed.rejected.size();

    const fs::path dir = out_dir.empty() ? fs::path("out") : fs::path(out_dir);
    write_text_file(dir / "review_scores.json", j.dump(2) + "\n");
    const std::string md = render_review_table(agg);
    write_text_file(dir / "review_scores.md", md);
    std::cout << md;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"demographically perturbed dataset construction and fairness evaluation"};
    app.require_subcommand(1);

    CommonArgs generate_args;
    auto* generate = app.add_subcommand("generate", "stages generate..grayscale_filter");
    add_common(generate, generate_args);

    CommonArgs perturb_args;
    std::string perturb_base_manifest;
    auto* perturb = app.add_subcommand("perturb", "stages mask..sample on a base manifest");
    add_common(perturb, perturb_args);
    perturb->add_option("--base-manifest", perturb_base_manifest,
                        "base manifest (default <out>/base_manifest.jsonl)");

    CommonArgs run_args;
    auto* run = app.add_subcommand("run", "full eight-stage pipeline");
    add_common(run, run_args);

    CommonArgs evaluate_common;
    EvaluateArgs evaluate_args;
    auto* evaluate = app.add_subcommand("evaluate", "classify sampled sets and compute the metric");
    add_common(evaluate, evaluate_common);
    evaluate->add_option("--manifest", evaluate_args.manifest,
                         "dataset manifest (default <out>/manifest.jsonl)");
    evaluate->add_option("--label-set", evaluate_args.label_set, "base or difficult");
    evaluate->add_option("--temperature", evaluate_args.temperature, "softmax temperature");
    evaluate->add_option("--model-name", evaluate_args.model_name, "name used in outputs");
    evaluate->add_option("--labels-file", evaluate_args.labels_file,
                         "JSON {occupation: [labels...]} overriding the label set");
    evaluate->add_option("--similarities", evaluate_args.similarities_in,
                         "score offline from a similarities file instead of live adapters");
    evaluate->add_option("--emit-similarities", evaluate_args.emit_similarities,
                         "record raw backend scores for offline re-scoring");
    evaluate->add_option("--restrict-sets", evaluate_args.restrict_sets_files,
                         "file(s) of set ids; evaluation restricts to their intersection");
    evaluate->add_option("--emit-correct-sets", evaluate_args.emit_correct_sets,
                         "write ids of sets with all variants correct");
    evaluate->add_flag("--iat", evaluate_args.iat, "also run the trustworthy/untrustworthy probe");
    evaluate->add_option("--scorer", evaluate_args.scorer, "zero_shot or lens");

    StatsArgs stats_args;
    auto* stats = app.add_subcommand("stats", "statistical protocol over evaluation outputs");
    stats->add_option("--predictions", stats_args.predictions, "name=path predictions JSONL")
        ->take_all();
    stats->add_option("--set-stds", stats_args.set_stds, "name=path per-set std JSON")->take_all();
    stats->add_option("--alpha", stats_args.alpha, "significance level (default 0.01)");
    stats->add_option("--occupation", stats_args.occupation,
                      "restrict comparisons and misclass tables to one occupation");
    stats->add_option("--target-label", stats_args.target_label,
                      "misclass target (default: top misclassified)");
    stats->add_option("--reference-group", stats_args.reference_group, "default Caucasian");
    stats->add_option("--error-n", stats_args.error_n, "error-analysis sets per group");
    stats->add_option("--seed", stats_args.seed, "sampling seed");
    stats->add_option("--out", stats_args.out_dir, "output directory (default out)");

    std::vector<std::string> report_inputs;
    std::string report_fixture, report_out;
    auto* report = app.add_subcommand("report", "render tables and figures");
    report->add_option("--input", report_inputs, "fairness_report.json file(s)")->take_all();
    report->add_option("--fixture", report_fixture, "JSON with {models: [...]} rows");
    report->add_option("--out", report_out, "output directory (default out/report)");

    auto* review = app.add_subcommand("review", "human-review tooling");
    review->require_subcommand(1);
    CommonArgs review_sample_args;
    std::string review_manifest, review_out_csv;
    double review_fraction = 1.0 / 6.0;
    auto* review_sample = review->add_subcommand("sample", "stratified annotation sample");
    add_common(review_sample, review_sample_args);
    review_sample->add_option("--manifest", review_manifest, "dataset manifest");
    review_sample->add_option("--fraction", review_fraction, "fraction per cell (default 1/6)");
    review_sample->add_option("--out-csv", review_out_csv, "annotation template path");

    std::string agg_annotations, agg_manifest, agg_out;
    auto* review_aggregate = review->add_subcommand("aggregate", "score annotation CSVs");
    review_aggregate->add_option("--annotations", agg_annotations, "filled annotation CSV")
        ->required();
    review_aggregate->add_option("--manifest", agg_manifest, "manifest for per-occupation scores");
    review_aggregate->add_option("--out", agg_out, "output directory (default out)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return cmd_generate(generate_args);
        if (perturb->parsed()) return cmd_perturb(perturb_args, perturb_base_manifest);
        if (run->parsed()) return cmd_run(run_args);
        if (evaluate->parsed()) return cmd_evaluate(evaluate_common, evaluate_args);
        if (stats->parsed()) return cmd_stats(stats_args);
        if (report->parsed()) return cmd_report(report_inputs, report_fixture, report_out);
        if (review_sample->parsed())
            return cmd_review_sample(review_sample_args, review_manifest, review_fraction,
                                     review_out_csv);
        if (review_aggregate->parsed())
            return cmd_review_aggregate(agg_annotations, agg_manifest, agg_out);
    } catch (const ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return 2;
    } catch (const AdapterError& ex) {
        std::cerr << "adapter error: " << ex.what() << "\n";
        return 3;
    } catch (const ValidationError& ex) {
        std::cerr << "validation error: " << ex.what() << "\n";
        return 4;
    } catch (const StatsError& ex) {
        std::cerr << "validation error: " << ex.what() << "\n";
        return 4;
    } catch (const PipelineError& ex) {
        std::cerr << "pipeline error: " << ex.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "validation error: " << ex.what() << "\n";
        return 4;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
