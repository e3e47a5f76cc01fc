// Acceptance suite: one line per criterion, nonzero exit when any fails.
// Oracles here are written independently of the library implementations they
// check (explicit loops, sort-based medians, hand-assembled sandwiches).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "perturbkit/evaluation.hpp"
#include "perturbkit/image.hpp"
#include "perturbkit/mock_adapters.hpp"
#include "perturbkit/pipeline.hpp"
#include "perturbkit/report.hpp"
#include "perturbkit/review.hpp"
#include "perturbkit/rng.hpp"
#include "perturbkit/stats.hpp"

using namespace perturbkit;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void criterion(int number, const std::string& description,
               const std::function<std::string()>& body) {
    std::string error;
    try {
        error = body();
    } catch (const std::exception& ex) {
        error = std::string("exception: ") + ex.what();
    }
    if (error.empty()) {
        std::printf("[PASS] criterion %2d: %s\n", number, description.c_str());
    } else {
        std::printf("[FAIL] criterion %2d: %s -- %s\n", number, description.c_str(),
                    error.c_str());
        ++failures;
    }
}

std::string check(bool ok, const std::string& message) { return ok ? "" : message; }

double brute_force_metric(const std::vector<std::vector<double>>& sets) {
    std::vector<double> stds;
    for (const auto& probs : sets) {
        double mean = 0.0;
        for (double p : probs) mean += p;
        mean /= static_cast<double>(probs.size());
        double ss = 0.0;
        for (double p : probs) ss += (p - mean) * (p - mean);
        stds.push_back(std::sqrt(ss / static_cast<double>(probs.size() - 1)));
    }
    std::sort(stds.begin(), stds.end());
    const std::size_t n = stds.size();
    const double med = n % 2 == 1 ? stds[n / 2] : 0.5 * (stds[n / 2 - 1] + stds[n / 2]);
    return 1.0 - med;
}

FairnessInput as_input(const std::vector<std::vector<double>>& sets) {
    FairnessInput input;
    input.variants_per_set = static_cast<int>(sets[0].size());
    for (std::size_t i = 0; i < sets.size(); ++i)
        input.sets.push_back({"s" + std::to_string(i), "occ", sets[i]});
    return input;
}

fs::path fresh_root(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("perturbkit_acceptance_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

nlohmann::ordered_json e2e_mock_config() {
    return nlohmann::ordered_json::parse(R"({
      "generator": {"grayscale_every": 9},
      "inpainter": {"fail_every": 31},
      "vqa": {"rules": [
        {"question_contains": "Is there", "yes_rate": 0.85},
        {"question_contains": "limbs distorted", "yes_rate": 0.15},
        {"question_contains": "real or fake", "real_rate": 0.9}
      ]},
      "detector": {
        "default_box": {"x0": 0.1, "y0": 0.1, "x1": 0.9, "y1": 0.9, "confidence": 0.8},
        "none_every": 11
      },
      "race_classifier": {"mismatch_every": 17, "no_face_every": 29}
    })");
}

PipelineConfig acceptance_pipeline_config() {
    OccupationSpec chef;
    chef.name = "chef";
    chef.prompt_phrase = "a chef in a chef's jacket";
    chef.base_labels = base_label_set();
    chef.difficult_labels = {"chef", "line cook", "cafeteria attendant", "waiter",
                             "dishwasher", "food preparation worker", "host", "server"};
    PipelineConfig cfg;
    cfg.occupations = {chef};
    cfg.images_per_occupation = 40;
    cfg.top_k = 20;
    cfg.sets_per_occupation = 5;
    cfg.base_seed = 11;
    cfg.image_width = 24;
    cfg.image_height = 24;
    return cfg;
}

}  // namespace

int main() {
    criterion(1, "fairness metric matches a brute-force oracle (200 random inputs, <= 1e-10)", [] {
        const auto start = std::chrono::steady_clock::now();
        SplitMix rng(2781);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = 1 + rng.bounded(50);
            std::vector<std::vector<double>> sets(n, std::vector<double>(4));
            for (auto& s : sets)
                for (auto& p : s) p = rng.next_double();
            const double got = fairness_metric(as_input(sets));
            const double want = brute_force_metric(sets);
            if (std::abs(got - want) > 1e-10)
                return "mismatch " + std::to_string(got) + " vs " + std::to_string(want);
        }
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - start)
                                 .count();
        return check(elapsed < 5000, "took " + std::to_string(elapsed) + " ms (budget 5 s)");
    });

    criterion(2, "fairness metric fixed points and K=4 lower bound", [] {
        const double identical =
            fairness_metric(as_input({{0.4, 0.4, 0.4, 0.4}, {0.9, 0.9, 0.9, 0.9}}));
        if (identical != 1.0) return std::string("identical-probability sets must give exactly 1");
        const double worked = fairness_metric(as_input({{0.6, 0.7, 0.8, 0.9}}));
        if (std::abs(worked - 0.870901) > 1e-6)
            return "worked example: " + std::to_string(worked);
        SplitMix rng(404);
        for (int trial = 0; trial < 1000; ++trial) {
            std::vector<std::vector<double>> sets(1 + rng.bounded(10), std::vector<double>(4));
            for (auto& s : sets)
                for (auto& p : s) p = rng.next_double();
            const double metric = fairness_metric(as_input(sets));
            if (metric < 0.42265 || metric > 1.0)
                return "bound violated: " + std::to_string(metric);
        }
        return std::string{};
    });

    criterion(3, "softmax normalization, argmax invariance, worked value", [] {
        SplitMix rng(31337);
        for (int trial = 0; trial < 1000; ++trial) {
            const std::size_t n = 2 + rng.bounded(15);
            std::vector<double> scores(n);
            for (auto& s : scores) s = -8.0 + 16.0 * rng.next_double();
            const double temperature = 0.05 + 4.0 * rng.next_double();
            const auto probs = softmax(scores, temperature);
            double sum = 0.0;
            for (double p : probs) sum += p;
            if (std::abs(sum - 1.0) > 1e-12) return "sum " + std::to_string(sum);
            const auto amax_s = std::max_element(scores.begin(), scores.end()) - scores.begin();
            const auto amax_p = std::max_element(probs.begin(), probs.end()) - probs.begin();
            if (amax_s != amax_p) return std::string("argmax changed under softmax");
        }
        const auto worked = softmax({1.0, 0.0}, 1.0);
        if (std::abs(worked[0] - 0.731059) > 1e-6 || std::abs(worked[1] - 0.268941) > 1e-6)
            return "worked value " + std::to_string(worked[0]);
        return std::string{};
    });

    criterion(4, "Mood's median test worked example, symmetry, chi-square table", [] {
        const std::vector<double> a{1, 2, 3, 4, 5};
        const std::vector<double> b{6, 7, 8, 9, 10};
        const auto r = moods_median_test(a, b);
        if (std::abs(r.chi2 - 10.0) > 1e-9) return "chi2 " + std::to_string(r.chi2);
        if (std::abs(r.p_value - 0.001565) > 1e-5) return "p " + std::to_string(r.p_value);
        const auto rt = moods_median_test(b, a);
        if (rt.chi2 != r.chi2 || rt.p_value != r.p_value)
            return std::string("a<->b symmetry violated");
        if (std::abs(special::chi_squared_sf(3.841, 1.0) - 0.05) > 1e-3)
            return std::string("table value at 3.841");
        if (std::abs(special::chi_squared_sf(6.635, 1.0) - 0.01) > 1e-3)
            return std::string("table value at 6.635");
        return std::string{};
    });

    criterion(5, "clustered LPM: exact group means, CR1 SEs vs explicit sandwich (100 datasets)", [] {
        SplitMix rng(9090);
        int tested = 0;
        for (int trial = 0; tested < 100 && trial < 2000; ++trial) {
            const std::size_t clusters = 2 + rng.bounded(9);
            std::vector<double> y;
            std::vector<std::string> g, c;
            const std::vector<std::string> names{"Caucasian", "Black", "EastAsian", "Indian"};
            for (std::size_t cl = 0; cl < clusters; ++cl) {
                const std::size_t rows = 1 + rng.bounded(4);
                for (std::size_t rix = 0; rix < rows && y.size() < 40; ++rix) {
                    y.push_back(static_cast<double>(rng.bounded(2)));
                    g.push_back(names[rng.bounded(4)]);
                    c.push_back("cl" + std::to_string(cl));
                }
            }
            std::set<std::string> present(g.begin(), g.end());
            if (present.size() < 2 || !present.count("Caucasian") || y.size() <= present.size())
                continue;
            ++tested;
            const auto result = lpm_cluster_regression(y, g, c);

            // Oracle: group means and an explicit-loop sandwich.
            std::map<std::string, std::pair<double, std::size_t>> sums;
            for (std::size_t i = 0; i < y.size(); ++i) {
                sums[g[i]].first += y[i];
                sums[g[i]].second += 1;
            }
            const double ref = sums.at("Caucasian").first / sums.at("Caucasian").second;
            if (result.coefficients[0] != ref) return std::string("intercept not exact");
            const std::size_t k = result.terms.size();
            for (std::size_t t = 1; t < k; ++t) {
                const auto& [s, cnt] = sums.at(result.terms[t]);
                if (result.coefficients[t] != s / cnt - ref)
                    return std::string("dummy coefficient not exact");
            }
            // X'X, residual scores per cluster, sandwich with CR1.
            std::map<std::string, std::size_t> col;
            for (std::size_t t = 1; t < k; ++t) col[result.terms[t]] = t;
            std::vector<std::vector<double>> xtx(k, std::vector<double>(k, 0.0));
            std::map<std::string, std::vector<double>> score;
            for (std::size_t i = 0; i < y.size(); ++i) {
                std::vector<double> x(k, 0.0);
                x[0] = 1.0;
                if (auto it = col.find(g[i]); it != col.end()) x[it->second] = 1.0;
                for (std::size_t r = 0; r < k; ++r)
                    for (std::size_t cc = 0; cc < k; ++cc) xtx[r][cc] += x[r] * x[cc];
                double fit = 0.0;
                for (std::size_t t = 0; t < k; ++t) fit += x[t] * result.coefficients[t];
                auto& sc = score.try_emplace(c[i], std::vector<double>(k, 0.0)).first->second;
                for (std::size_t t = 0; t < k; ++t) sc[t] += x[t] * (y[i] - fit);
            }
            std::vector<std::vector<double>> inv(k, std::vector<double>(k, 0.0));
            for (std::size_t i = 0; i < k; ++i) inv[i][i] = 1.0;
            for (std::size_t cc = 0; cc < k; ++cc) {
                std::size_t piv = cc;
                for (std::size_t r = cc; r < k; ++r)
                    if (std::abs(xtx[r][cc]) > std::abs(xtx[piv][cc])) piv = r;
                std::swap(xtx[piv], xtx[cc]);
                std::swap(inv[piv], inv[cc]);
                const double scale = xtx[cc][cc];
                for (std::size_t q = 0; q < k; ++q) {
                    xtx[cc][q] /= scale;
                    inv[cc][q] /= scale;
                }
                for (std::size_t r = 0; r < k; ++r) {
                    if (r == cc) continue;
                    const double f = xtx[r][cc];
                    for (std::size_t q = 0; q < k; ++q) {
                        xtx[r][q] -= f * xtx[cc][q];
                        inv[r][q] -= f * inv[cc][q];
                    }
                }
            }
            std::vector<std::vector<double>> meat(k, std::vector<double>(k, 0.0));
            for (const auto& [id, sc] : score)
                for (std::size_t r = 0; r < k; ++r)
                    for (std::size_t cc = 0; cc < k; ++cc) meat[r][cc] += sc[r] * sc[cc];
            const double G = static_cast<double>(score.size());
            const double cr1 =
                (G / (G - 1.0)) * ((static_cast<double>(y.size()) - 1.0) / (y.size() - k));
            for (std::size_t t = 0; t < k; ++t) {
                double v = 0.0;
                for (std::size_t r = 0; r < k; ++r)
                    for (std::size_t cc = 0; cc < k; ++cc)
                        v += inv[t][r] * meat[r][cc] * inv[cc][t];
                const double se = std::sqrt(std::max(0.0, cr1 * v));
                const double tol = 1e-10 * std::max(1.0, se);
                if (std::abs(result.std_errors[t] - se) > tol)
                    return "SE mismatch " + std::to_string(result.std_errors[t]) + " vs " +
                           std::to_string(se);
            }
        }
        return check(tested == 100, "only " + std::to_string(tested) + " usable datasets");
    });

    criterion(6, "Bonferroni monotonicity, clamping, rejection-subset (1000 vectors)", [] {
        SplitMix rng(6);
        const double alpha = 0.05;
        for (int trial = 0; trial < 1000; ++trial) {
            std::vector<double> ps(1 + rng.bounded(10));
            for (auto& p : ps) p = rng.next_double();
            const auto result = bonferroni(ps, alpha);
            for (std::size_t i = 0; i < ps.size(); ++i) {
                if (result.adjusted[i] < ps[i]) return std::string("adjusted decreased a p-value");
                if (result.adjusted[i] > 1.0) return std::string("clamping failed");
                if (result.reject[i] && !(ps[i] < alpha))
                    return std::string("rejected a p-value the uncorrected test keeps");
            }
        }
        return std::string{};
    });

    criterion(7, "mock end-to-end pipeline: 5 sampled sets x 4, conservation, byte-identical", [] {
        const auto start = std::chrono::steady_clock::now();
        const PipelineConfig cfg = acceptance_pipeline_config();
        const auto root1 = fresh_root("e2e1");
        const auto root2 = fresh_root("e2e2");
        const PipelineResult r1 =
            run_pipeline(cfg, make_mock_suite(root1, e2e_mock_config()), root1);
        const PipelineResult r2 =
            run_pipeline(cfg, make_mock_suite(root2, e2e_mock_config()), root2);

        const auto sampled = r1.manifest.sets(true);
        if (sampled.size() != 5)
            return "sampled " + std::to_string(sampled.size()) + " sets, wanted 5";
        for (const auto* set : sampled) {
            if (set->variants.size() != 4) return std::string("incomplete set");
            if (!validate_set(*set).empty()) return std::string("sampled set fails validation");
        }
        if (!r1.yields.conserved()) return std::string("kept + dropped != input at some stage");
        const auto& stages = r1.yields.occupations.at(0).stages;
        for (std::size_t i = 1; i < stages.size(); ++i)
            if (stages[i].input != stages[i - 1].kept)
                return std::string("stage inputs not chained");

        r1.manifest.save(root1 / "manifest.jsonl");
        r2.manifest.save(root2 / "manifest.jsonl");
        if (read_text_file(root1 / "manifest.jsonl") != read_text_file(root2 / "manifest.jsonl"))
            return std::string("manifests differ across identical runs");
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - start)
                                 .count();
        return check(elapsed < 10000, "took " + std::to_string(elapsed) + " ms (budget 10 s)");
    });

    criterion(8, "filtering rules: VQA truth table, grayscale rule, attribute filter", [] {
        // VQA keep/drop truth table over the four (Q1, Q2) combinations.
        const auto root = fresh_root("filters");
        PipelineConfig cfg = acceptance_pipeline_config();
        cfg.images_per_occupation = 4;
        cfg.top_k = 1;
        cfg.sets_per_occupation = 1;
        MockImageGenerator generator(root);
        const auto generated = stage_generate(cfg, cfg.occupations[0], generator);
        MockVQAModel::Options vqa_opts;
        const std::string q1 = vqa_question_occupation(cfg.occupations[0]);
        const char* combos[4][2] = {{"yes", "no"}, {"yes", "yes"}, {"no", "no"}, {"no", "yes"}};
        for (int i = 0; i < 4; ++i) {
            vqa_opts.table[{generated.records[i].image_ref, q1}] = VQAResult{combos[i][0], 0.9};
            vqa_opts.table[{generated.records[i].image_ref, std::string(kVqaQuestionLimbs)}] =
                VQAResult{combos[i][1], 0.9};
            vqa_opts.table[{generated.records[i].image_ref, std::string(kVqaQuestionRealism)}] =
                VQAResult{"real", 0.9};
        }
        MockVQAModel vqa(vqa_opts);
        const auto filtered = stage_vqa_filter(cfg, cfg.occupations[0], generated.records, vqa);
        if (filtered.kept.size() != 1 || filtered.kept[0].base_id != generated.records[0].base_id)
            return std::string("VQA truth table: only (yes, no) may survive");

        // Grayscale rule.
        if (!is_grayscale(Image::filled(16, 16, 3, 128), 8, 0.99))
            return std::string("all-gray image must be grayscale");
        Image noise = Image::filled(16, 16, 3, 0);
        SplitMix rng(5);
        for (auto& px : noise.pixels) px = static_cast<std::uint8_t>(rng.next() & 0xFF);
        if (is_grayscale(noise, 8, 0.99)) return std::string("rgb noise must not be grayscale");

        // Attribute filter: 4/4 kept, 3/4 dropped.
        auto make_set = [](bool all_pass) {
            PerturbationSet s;
            s.set_id = all_pass ? "set-ok" : "set-bad";
            s.base_id = s.set_id;
            s.occupation = "chef";
            for (DemographicGroup g : kAllGroups) {
                PerturbationVariant v;
                v.image_ref = s.set_id + "_" + std::string(canonical_name(g)) + ".png";
                s.variants[g] = v;
            }
            return s;
        };
        MockRaceClassifier::Options race_opts;
        race_opts.decode_markers = false;
        for (DemographicGroup g : kAllGroups) {
            race_opts.table["set-ok_" + std::string(canonical_name(g)) + ".png"] =
                std::string(canonical_name(g));
            race_opts.table["set-bad_" + std::string(canonical_name(g)) + ".png"] =
                std::string(canonical_name(g));
        }
        race_opts.table["set-bad_Black.png"] = "Caucasian";  // 3/4 match
        MockRaceClassifier classifier(root, race_opts);
        const auto outcome =
            stage_attribute_filter(cfg, {make_set(true), make_set(false)}, classifier);
        if (outcome.kept.size() != 1 || outcome.kept[0].set_id != "set-ok")
            return std::string("attribute filter must keep exactly the 4/4 set");
        if (outcome.drops.size() != 1 || outcome.drops[0].id != "set-bad")
            return std::string("attribute filter must drop the 3/4 set");
        return std::string{};
    });

    criterion(9, "review aggregation: hand counts and the published overall fixture", [] {
        std::vector<AnnotationRow> rows;
        for (int i = 0; i < 8; ++i)
            rows.push_back({"i.png", "s", DemographicGroup::Black, QualityAnswer::No,
                            IdentityAnswer::Black});
        rows.push_back({"i.png", "s", DemographicGroup::Black, QualityAnswer::Yes,
                        IdentityAnswer::Black});
        rows.push_back({"i.png", "s", DemographicGroup::Black, QualityAnswer::Unsure,
                        IdentityAnswer::Others});
        const auto hand = aggregate_review(rows);
        if (std::abs(hand.overall.realism - 0.8) > 1e-12)
            return std::string("hand-counted realism");
        if (std::abs(hand.overall.fidelity - 0.9) > 1e-12)
            return std::string("hand-counted fidelity");

        std::vector<AnnotationRow> fixture;
        for (int i = 0; i < 1000; ++i)
            fixture.push_back({"i.png", "s", DemographicGroup::Caucasian,
                               i < 851 ? QualityAnswer::No : QualityAnswer::Yes,
                               i < 910 ? IdentityAnswer::Caucasian : IdentityAnswer::Others});
        ReviewAggregate agg = aggregate_review(fixture);
        const std::string md = render_review_table(agg);
        return check(md.find("| Overall | 85.1% | 91.0% |") != std::string::npos,
                     "rendered: " + md);
    });

    criterion(10, "report rendering: published-value fixture renders FLAVA 0.983 / 90.1%", [] {
        std::vector<FairnessReport> reports;
        const char* names[] = {"FLAVA", "CLIP-LAION400M", "CLIP-LAION2B", "CLIP-OpenAI"};
        const double metric[] = {0.983, 0.835, 0.849, 0.884};
        const double acc[] = {0.901, 0.751, 0.798, 0.686};
        for (int i = 0; i < 4; ++i) {
            FairnessReport r;
            r.model_name = names[i];
            r.fairness = metric[i];
            r.accuracy = acc[i];
            reports.push_back(r);
        }
        const auto dir = fresh_root("report");
        const std::string md = write_report(reports, dir);
        if (md.find("| FLAVA | 0.983 | 90.1% |") == std::string::npos)
            return std::string("FLAVA row not rendered as 0.983 / 90.1%");
        return check(fs::exists(dir / "figures" / "fairness_metric.png") &&
                         fs::exists(dir / "figures" / "accuracy.png"),
                     "figures missing");
    });

    criterion(11, "sampling determinism across 3 runs (sample, review, error analysis)", [] {
        PipelineConfig cfg = acceptance_pipeline_config();
        cfg.sets_per_occupation = 3;
        std::vector<PerturbationSet> sets;
        for (int i = 0; i < 12; ++i) {
            PerturbationSet s;
            s.set_id = "set-" + std::to_string(i);
            s.base_id = "chef-" + std::to_string(i);
            s.occupation = "chef";
            for (DemographicGroup g : kAllGroups) {
                PerturbationVariant v;
                v.image_ref = s.base_id + "_" + std::string(canonical_name(g)) + ".png";
                v.attribute_label = g;
                v.passed = true;
                s.variants[g] = v;
            }
            sets.push_back(s);
        }
        const auto s1 = stage_sample(cfg, cfg.occupations[0], sets);
        const auto s2 = stage_sample(cfg, cfg.occupations[0], sets);
        const auto s3 = stage_sample(cfg, cfg.occupations[0], sets);
        if (!(s1.sets == s2.sets && s2.sets == s3.sets))
            return std::string("stage_sample not deterministic");

        Manifest manifest;
        for (auto s : sets) {
            s.sampled = true;
            manifest.entries.push_back({"perturb", std::string(kDeterministicTimestamp), s});
        }
        const auto r1 = sample_for_review(manifest, 0.5, 9);
        const auto r2 = sample_for_review(manifest, 0.5, 9);
        const auto r3 = sample_for_review(manifest, 0.5, 9);
        if (!(r1 == r2 && r2 == r3)) return std::string("sample_for_review not deterministic");

        std::vector<PredictionRecord> preds;
        SplitMix rng(3);
        for (const auto& s : sets)
            for (DemographicGroup g : kAllGroups) {
                PredictionRecord p;
                p.set_id = s.set_id;
                p.group = g;
                p.occupation = "chef";
                p.correct = g == DemographicGroup::Caucasian || rng.bounded(2) == 0;
                preds.push_back(p);
            }
        const auto e1 = error_analysis_sample(preds, 3, 21);
        const auto e2 = error_analysis_sample(preds, 3, 21);
        const auto e3 = error_analysis_sample(preds, 3, 21);
        if (!(e1.set_ids == e2.set_ids && e2.set_ids == e3.set_ids))
            return std::string("error_analysis_sample not deterministic");
        return std::string{};
    });

    if (failures == 0) {
        std::printf("acceptance: all criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criterion(s) failed\n", failures);
    return 1;
}
