#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "perturbkit/rng.hpp"
#include "perturbkit/stats.hpp"

using namespace perturbkit;
using Catch::Matchers::WithinAbs;

namespace {

PredictionRecord pred(const std::string& set_id, DemographicGroup g, const std::string& occ,
                      const std::string& predicted, bool correct) {
    PredictionRecord p;
    p.set_id = set_id;
    p.group = g;
    p.occupation = occ;
    p.label_list = {occ, predicted};
    p.probabilities = {correct ? 0.8 : 0.2, correct ? 0.2 : 0.8};
    p.true_label_prob = p.probabilities[0];
    p.predicted_label = predicted;
    p.correct = correct;
    return p;
}

// Explicit-loop sandwich oracle: builds the design matrix row by row and
// assembles meat = sum_g (Xg' eg)(Xg' eg)' with nothing shared with the
// implementation beyond the CR1 factor definition.
std::vector<double> oracle_cluster_ses(const std::vector<double>& y,
                                       const std::vector<std::string>& group,
                                       const std::vector<std::string>& clusters,
                                       const std::string& reference,
                                       const std::vector<std::string>& dummy_order) {
    const std::size_t n = y.size();
    const std::size_t k = 1 + dummy_order.size();
    std::vector<std::vector<double>> X(n, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        X[i][0] = 1.0;
        for (std::size_t d = 0; d < dummy_order.size(); ++d)
            if (group[i] == dummy_order[d]) X[i][d + 1] = 1.0;
    }
    // Group means give beta for this saturated design.
    std::map<std::string, std::pair<double, std::size_t>> sums;
    for (std::size_t i = 0; i < n; ++i) {
        sums[group[i]].first += y[i];
        sums[group[i]].second += 1;
    }
    std::vector<double> beta(k, 0.0);
    beta[0] = sums.at(reference).first / sums.at(reference).second;
    for (std::size_t d = 0; d < dummy_order.size(); ++d)
        beta[d + 1] = sums.at(dummy_order[d]).first / sums.at(dummy_order[d]).second - beta[0];

    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) {
        double fit = 0.0;
        for (std::size_t c = 0; c < k; ++c) fit += X[i][c] * beta[c];
        resid[i] = y[i] - fit;
    }
    std::vector<std::vector<double>> xtx(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t c = 0; c < k; ++c) xtx[r][c] += X[i][r] * X[i][c];
    // Tiny Gauss-Jordan inverse, written independently.
    std::vector<std::vector<double>> inv(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) inv[i][i] = 1.0;
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col; r < k; ++r)
            if (std::abs(xtx[r][col]) > std::abs(xtx[piv][col])) piv = r;
        std::swap(xtx[piv], xtx[col]);
        std::swap(inv[piv], inv[col]);
        const double s = xtx[col][col];
        for (std::size_t c = 0; c < k; ++c) {
            xtx[col][c] /= s;
            inv[col][c] /= s;
        }
        for (std::size_t r = 0; r < k; ++r) {
            if (r == col) continue;
            const double f = xtx[r][col];
            for (std::size_t c = 0; c < k; ++c) {
                xtx[r][c] -= f * xtx[col][c];
                inv[r][c] -= f * inv[col][c];
            }
        }
    }
    std::map<std::string, std::vector<double>> scores;
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = scores.try_emplace(clusters[i], std::vector<double>(k, 0.0)).first->second;
        for (std::size_t c = 0; c < k; ++c) s[c] += X[i][c] * resid[i];
    }
    std::vector<std::vector<double>> meat(k, std::vector<double>(k, 0.0));
    for (const auto& [id, s] : scores)
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t c = 0; c < k; ++c) meat[r][c] += s[r] * s[c];
    const double G = static_cast<double>(scores.size());
    const double cr1 = (G / (G - 1.0)) * ((static_cast<double>(n) - 1.0) / (n - k));
    std::vector<double> ses(k);
    for (std::size_t t = 0; t < k; ++t) {
        double v = 0.0;
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t c = 0; c < k; ++c) v += inv[t][r] * meat[r][c] * inv[c][t];
        ses[t] = std::sqrt(std::max(0.0, cr1 * v));
    }
    return ses;
}

}  // namespace

TEST_CASE("chi-squared survival function matches published table values") {
    REQUIRE_THAT(special::chi_squared_sf(3.841, 1.0), WithinAbs(0.05, 1e-3));
    REQUIRE_THAT(special::chi_squared_sf(6.635, 1.0), WithinAbs(0.01, 1e-3));
    REQUIRE_THAT(special::chi_squared_sf(10.0, 1.0), WithinAbs(0.001565, 1e-5));
    // Q(df/2, x/2) with df=1 equals erfc(sqrt(x/2)).
    for (double x : {0.5, 1.0, 2.5, 7.0}) {
        REQUIRE_THAT(special::chi_squared_sf(x, 1.0),
                     WithinAbs(std::erfc(std::sqrt(x / 2.0)), 1e-12));
    }
    REQUIRE(special::chi_squared_sf(0.0, 1.0) == 1.0);
}

TEST_CASE("student t two-sided p-values match table values") {
    // t table: P(|T| > 2.776) = 0.05 at 4 df; P(|T| > 4.604) = 0.01 at 4 df.
    REQUIRE_THAT(special::student_t_two_sided(2.776, 4.0), WithinAbs(0.05, 1e-3));
    REQUIRE_THAT(special::student_t_two_sided(4.604, 4.0), WithinAbs(0.01, 1e-3));
    REQUIRE_THAT(special::student_t_two_sided(0.0, 7.0), WithinAbs(1.0, 1e-12));
}

TEST_CASE("moods median test on the canonical separated samples") {
    const std::vector<double> a{1, 2, 3, 4, 5};
    const std::vector<double> b{6, 7, 8, 9, 10};
    const auto result = moods_median_test(a, b);
    REQUIRE(result.grand_median == 5.5);
    REQUIRE(result.counts[0][0] == 0);
    REQUIRE(result.counts[0][1] == 5);
    REQUIRE(result.counts[1][0] == 5);
    REQUIRE(result.counts[1][1] == 0);
    REQUIRE_THAT(result.chi2, WithinAbs(10.0, 1e-9));
    REQUIRE_THAT(result.p_value, WithinAbs(0.001565, 1e-5));
}

TEST_CASE("moods median test is symmetric in its samples") {
    const std::vector<double> a{0.2, 0.5, 0.9, 1.4, 0.8};
    const std::vector<double> b{0.3, 0.1, 0.6, 0.7};
    const auto ab = moods_median_test(a, b);
    const auto ba = moods_median_test(b, a);
    REQUIRE(ab.chi2 == ba.chi2);
    REQUIRE(ab.p_value == ba.p_value);
    REQUIRE(ab.counts[0][0] == ba.counts[0][1]);
    REQUIRE(ab.counts[1][0] == ba.counts[1][1]);
}

TEST_CASE("moods median test on identical samples gives chi2 = 0, p = 1") {
    const std::vector<double> a{1, 2, 3};
    const auto result = moods_median_test(a, a);
    REQUIRE(result.chi2 == 0.0);
    REQUIRE(result.p_value == 1.0);
}

TEST_CASE("moods median test degenerate input raises no-variation") {
    const std::vector<double> flat{1, 1, 1};
    REQUIRE_THROWS_WITH(moods_median_test(flat, flat),
                        Catch::Matchers::ContainsSubstring("no variation"));
    const std::vector<double> one{1.0};
    const std::vector<double> two{2.0, 3.0};
    REQUIRE_THROWS_AS(moods_median_test(one, two), std::invalid_argument);
}

TEST_CASE("moods median test tie rules") {
    // Ties at the median go to the "not above" row under the default rule.
    const std::vector<double> a{1, 2, 2, 3};
    const std::vector<double> b{2, 2, 4, 5};
    const auto below = moods_median_test(a, b, TieRule::Below);
    REQUIRE(below.counts[0][0] + below.counts[1][0] == 4);
    const auto excluded = moods_median_test(a, b, TieRule::Exclude);
    REQUIRE(excluded.counts[0][0] + excluded.counts[1][0] < 4);
}

TEST_CASE("bonferroni worked examples and properties") {
    const auto single = bonferroni({0.004, 0.02, 0.03, 0.2, 0.5, 0.9}, 0.05);
    REQUIRE_THAT(single.adjusted[0], WithinAbs(0.024, 1e-12));
    REQUIRE(single.reject[0]);
    REQUIRE_FALSE(single.reject[1]);  // 0.02 * 6 = 0.12

    const auto pair = bonferroni({0.3, 0.3}, 0.05);
    REQUIRE_THAT(pair.adjusted[0], WithinAbs(0.6, 1e-12));
    REQUIRE_FALSE(pair.reject[0]);
    REQUIRE_FALSE(pair.reject[1]);

    const auto clamped = bonferroni({0.5, 0.6, 0.7}, 0.05);
    REQUIRE(clamped.adjusted[0] == 1.0);

    SplitMix rng(31);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> ps(1 + rng.bounded(8));
        for (auto& p : ps) p = rng.next_double();
        const auto result = bonferroni(ps, 0.05);
        for (std::size_t i = 0; i < ps.size(); ++i) {
            REQUIRE(result.adjusted[i] >= ps[i]);  // never decreases
            REQUIRE(result.adjusted[i] <= 1.0);
            if (result.reject[i]) REQUIRE(ps[i] < 0.05);  // rejections subset uncorrected
        }
    }
    REQUIRE_THROWS_AS(bonferroni({0.5}, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(bonferroni({1.5}, 0.05), std::invalid_argument);
}

TEST_CASE("lpm regression: two-cluster worked example") {
    // cluster1 = {(1, ref), (0, ref)}, cluster2 = {(1, B), (1, B)}.
    const std::vector<double> y{1, 0, 1, 1};
    const std::vector<std::string> g{"Caucasian", "Caucasian", "Black", "Black"};
    const std::vector<std::string> c{"c1", "c1", "c2", "c2"};
    const auto result = lpm_cluster_regression(y, g, c);
    REQUIRE(result.terms == std::vector<std::string>{"(intercept)", "Black"});
    REQUIRE(result.coefficients[0] == 0.5);
    REQUIRE(result.coefficients[1] == 0.5);
    REQUIRE(result.n_clusters == 2);
    const auto oracle = oracle_cluster_ses(y, g, c, "Caucasian", {"Black"});
    REQUIRE_THAT(result.std_errors[0], WithinAbs(oracle[0], 1e-12));
    REQUIRE_THAT(result.std_errors[1], WithinAbs(oracle[1], 1e-12));
}

TEST_CASE("lpm regression coefficients are exactly group mean differences") {
    SplitMix rng(47);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n_clusters = 2 + rng.bounded(9);
        std::vector<double> y;
        std::vector<std::string> g, c;
        const std::vector<std::string> names{"Caucasian", "Black", "EastAsian", "Indian"};
        for (std::size_t cl = 0; cl < n_clusters; ++cl) {
            const std::size_t rows = 1 + rng.bounded(4);
            for (std::size_t r = 0; r < rows; ++r) {
                y.push_back(static_cast<double>(rng.bounded(2)));
                g.push_back(names[rng.bounded(4)]);
                c.push_back("cl" + std::to_string(cl));
            }
        }
        // Every group must occur, and the design must leave df; otherwise re-roll.
        std::set<std::string> present(g.begin(), g.end());
        if (present.size() < 2 || !present.count("Caucasian") || y.size() <= present.size())
            continue;

        const auto result = lpm_cluster_regression(y, g, c);
        std::map<std::string, std::pair<double, std::size_t>> sums;
        for (std::size_t i = 0; i < y.size(); ++i) {
            sums[g[i]].first += y[i];
            sums[g[i]].second += 1;
        }
        const double ref_mean = sums.at("Caucasian").first / sums.at("Caucasian").second;
        REQUIRE(result.coefficients[0] == ref_mean);
        std::vector<std::string> dummy_order(result.terms.begin() + 1, result.terms.end());
        for (std::size_t d = 0; d < dummy_order.size(); ++d) {
            const auto& [s, cnt] = sums.at(dummy_order[d]);
            REQUIRE_THAT(result.coefficients[d + 1], WithinAbs(s / cnt - ref_mean, 0.0));
        }
        const auto oracle = oracle_cluster_ses(y, g, c, "Caucasian", dummy_order);
        for (std::size_t t = 0; t < oracle.size(); ++t) {
            REQUIRE_THAT(result.std_errors[t],
                         WithinAbs(oracle[t], 1e-10 * std::max(1.0, oracle[t])));
        }
    }
}

TEST_CASE("lpm regression is invariant to row order") {
    const std::vector<double> y{1, 0, 1, 1, 0, 1, 0, 0};
    const std::vector<std::string> g{"Caucasian", "Black", "Black", "Caucasian",
                                     "Indian", "Indian", "Caucasian", "Black"};
    const std::vector<std::string> c{"a", "a", "b", "b", "c", "c", "d", "d"};
    const auto base = lpm_cluster_regression(y, g, c);

    std::vector<std::size_t> perm{5, 2, 7, 0, 3, 6, 1, 4};
    std::vector<double> y2;
    std::vector<std::string> g2, c2;
    for (auto i : perm) {
        y2.push_back(y[i]);
        g2.push_back(g[i]);
        c2.push_back(c[i]);
    }
    const auto permuted = lpm_cluster_regression(y2, g2, c2);
    REQUIRE(base.coefficients == permuted.coefficients);
    for (std::size_t i = 0; i < base.std_errors.size(); ++i)
        REQUIRE_THAT(base.std_errors[i], WithinAbs(permuted.std_errors[i], 1e-14));
}

TEST_CASE("lpm regression errors name the missing category") {
    const std::vector<double> y{1, 0, 1, 0};
    const std::vector<std::string> g{"Black", "Black", "Indian", "Indian"};
    const std::vector<std::string> c{"a", "a", "b", "b"};
    REQUIRE_THROWS_WITH(lpm_cluster_regression(y, g, c),
                        Catch::Matchers::ContainsSubstring("Caucasian"));
    REQUIRE_THROWS_WITH(
        lpm_cluster_regression(y, g, c, "Black", {"EastAsian"}),
        Catch::Matchers::ContainsSubstring("EastAsian"));
    REQUIRE_THROWS_AS(
        lpm_cluster_regression({1, 0}, {"Black", "Caucasian"}, {"a", "a"}),
        StatsError);  // single cluster
}

TEST_CASE("misclassification ratios reproduce the +104% reading") {
    std::vector<PredictionRecord> preds;
    for (int i = 0; i < 51; ++i)
        preds.push_back(pred("b" + std::to_string(i), DemographicGroup::Black, "chef", "line cook", false));
    for (int i = 0; i < 25; ++i)
        preds.push_back(pred("c" + std::to_string(i), DemographicGroup::Caucasian, "chef", "line cook", false));
    const auto table = misclass_ratios(preds, "line cook");
    REQUIRE(table.target_counts.at(DemographicGroup::Black) == 51);
    REQUIRE(table.target_counts.at(DemographicGroup::Caucasian) == 25);
    REQUIRE_THAT(*table.rate_pct.at(DemographicGroup::Black), WithinAbs(104.0, 1e-9));
    REQUIRE_THAT(*table.rate_pct.at(DemographicGroup::Caucasian), WithinAbs(0.0, 1e-12));

    // Counts over misclassified records sum per group.
    long black_total = 0;
    for (const auto& [label, count] : table.counts.at(DemographicGroup::Black)) black_total += count;
    REQUIRE(black_total == 51);
}

TEST_CASE("misclassification ratio with equal counts is 0% and zero reference is undefined") {
    std::vector<PredictionRecord> preds;
    preds.push_back(pred("b1", DemographicGroup::Black, "chef", "waiter", false));
    preds.push_back(pred("c1", DemographicGroup::Caucasian, "chef", "waiter", false));
    const auto equal = misclass_ratios(preds, "waiter");
    REQUIRE_THAT(*equal.rate_pct.at(DemographicGroup::Black), WithinAbs(0.0, 1e-12));

    const auto undefined = misclass_ratios(preds, "dishwasher");
    REQUIRE_FALSE(undefined.rate_pct.at(DemographicGroup::Black).has_value());
}

TEST_CASE("top misclassified label with counts, tie-break, and none-marker") {
    std::vector<PredictionRecord> preds;
    for (int i = 0; i < 40; ++i)
        preds.push_back(pred("s" + std::to_string(i), DemographicGroup::Black, "chef", "line cook", false));
    for (int i = 0; i < 10; ++i)
        preds.push_back(pred("t" + std::to_string(i), DemographicGroup::Black, "chef", "waiter", false));
    REQUIRE(top_misclassified_label(preds, "chef") == "line cook");
    REQUIRE_FALSE(top_misclassified_label(preds, "pilot").has_value());

    std::vector<PredictionRecord> tied;
    for (int i = 0; i < 5; ++i) {
        tied.push_back(pred("x" + std::to_string(i), DemographicGroup::Black, "chef", "b-label", false));
        tied.push_back(pred("y" + std::to_string(i), DemographicGroup::Black, "chef", "a-label", false));
    }
    REQUIRE(top_misclassified_label(tied, "chef") == "a-label");

    std::vector<PredictionRecord> all_right;
    all_right.push_back(pred("z", DemographicGroup::Black, "chef", "chef", true));
    REQUIRE_FALSE(top_misclassified_label(all_right, "chef").has_value());
}

TEST_CASE("error analysis sampling is seeded and respects eligibility") {
    std::vector<PredictionRecord> preds;
    for (int i = 0; i < 30; ++i) {
        const std::string set_id = "s" + std::to_string(i);
        preds.push_back(pred(set_id, DemographicGroup::Caucasian, "chef", "chef", true));
        preds.push_back(pred(set_id, DemographicGroup::Black, "chef", "line cook", false));
        preds.push_back(pred(set_id, DemographicGroup::EastAsian, "chef", "chef", true));
        preds.push_back(pred(set_id, DemographicGroup::Indian, "chef", "chef", i >= 4));
    }
    const auto sample = error_analysis_sample(preds, 10, 42);
    REQUIRE(sample.set_ids.at(DemographicGroup::Black).size() == 10);
    REQUIRE(sample.set_ids.at(DemographicGroup::EastAsian).empty());
    REQUIRE(sample.set_ids.at(DemographicGroup::Indian).size() == 4);  // only 4 eligible
    REQUIRE_FALSE(sample.warnings.empty());

    const auto replay = error_analysis_sample(preds, 10, 42);
    REQUIRE(replay.set_ids == sample.set_ids);
    const auto other_seed = error_analysis_sample(preds, 10, 43);
    REQUIRE(other_seed.set_ids.at(DemographicGroup::Black) !=
            sample.set_ids.at(DemographicGroup::Black));

    std::set<std::string> distinct(sample.set_ids.at(DemographicGroup::Black).begin(),
                                   sample.set_ids.at(DemographicGroup::Black).end());
    REQUIRE(distinct.size() == 10);
}

TEST_CASE("compare_models orders separated distributions and claims nothing on ties") {
    std::map<std::string, std::vector<double>> stds;
    for (int i = 0; i < 40; ++i) {
        stds["flava"].push_back(0.01 + 0.0005 * i);
        stds["clip-a"].push_back(0.15 + 0.0005 * i);
        stds["clip-b"].push_back(0.30 + 0.0005 * i);
    }
    const auto cmp = compare_models(stds, 0.01);
    REQUIRE(cmp.comparisons == 3);
    REQUIRE(cmp.ranking == std::vector<std::string>{"flava", "clip-a", "clip-b"});
    REQUIRE(cmp.significant_order.size() == 3);
    for (const auto& pair : cmp.pairs) REQUIRE(pair.reject);

    // Identical samples: no ordering claimed.
    std::map<std::string, std::vector<double>> same;
    same["x"] = {0.1, 0.2, 0.3, 0.4};
    same["y"] = {0.1, 0.2, 0.3, 0.4};
    const auto none = compare_models(same, 0.01);
    REQUIRE(none.significant_order.empty());
    REQUIRE(none.pairs[0].test.p_value == 1.0);

    // 4 models -> C(4,2) = 6 comparisons.
    std::map<std::string, std::vector<double>> four;
    for (const std::string name : {"a", "b", "c", "d"}) {
        SplitMix rng(fnv1a64(name));
        for (int i = 0; i < 20; ++i) four[name].push_back(rng.next_double());
    }
    REQUIRE(compare_models(four, 0.05).comparisons == 6);
}
