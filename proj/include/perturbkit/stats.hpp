#pragma once
// Statistical protocol: Mood's median test with Bonferroni-corrected pairwise
// model comparisons, a linear probability model with CR1 cluster-robust
// standard errors, misclassification-ratio tables, and seeded error-analysis
// sampling.
//
// p-values come from self-contained incomplete gamma / beta implementations
// (validated against published tables in the test suite) so the contract
// carries no statistical-package dependency.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "perturbkit/errors.hpp"
#include "perturbkit/evaluation.hpp"
#include "perturbkit/rng.hpp"
#include "perturbkit/types.hpp"
#include "perturbkit/util.hpp"

namespace perturbkit {

namespace special {

// Regularized lower incomplete gamma P(a, x) by series, upper Q(a, x) by
// continued fraction (Lentz), switching at x = a + 1.
inline double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

inline double regularized_gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::invalid_argument("regularized_gamma_q: bad arguments");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_contfrac(a, x);
}

// Survival function of the chi-squared distribution.
inline double chi_squared_sf(double x, double df) {
    if (df <= 0.0) throw std::invalid_argument("chi_squared_sf: df must be positive");
    if (x <= 0.0) return 1.0;
    return regularized_gamma_q(df / 2.0, x / 2.0);
}

// Regularized incomplete beta I_x(a, b), continued fraction after Lentz.
inline double betacf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 500; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-15) break;
    }
    return h;
}

inline double regularized_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double front =
        std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                 b * std::log(1.0 - x));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          b * std::log(1.0 - x) + a * std::log(x)) *
                     betacf(b, a, 1.0 - x) / b;
}

// Two-sided p-value for a t statistic with df degrees of freedom.
inline double student_t_two_sided(double t, double df) {
    if (df <= 0.0) throw std::invalid_argument("student_t_two_sided: df must be positive");
    return regularized_beta(df / 2.0, 0.5, df / (df + t * t));
}

}  // namespace special

// --- Mood's median test ------------------------------------------------------

enum class TieRule {
    Below,    // values equal to the grand median count as "not above" (default)
    Exclude,  // drop exact ties from the table
};

struct MedianTestResult {
    double grand_median = 0.0;
    // counts[row][col]; row 0 = above median, row 1 = not above; col 0 = a, col 1 = b.
    std::array<std::array<long, 2>, 2> counts{{{0, 0}, {0, 0}}};
    double chi2 = 0.0;
    double p_value = 1.0;
};

inline MedianTestResult moods_median_test(std::span<const double> a, std::span<const double> b,
                                          TieRule tie_rule = TieRule::Below,
                                          bool yates_correction = false) {
    if (a.size() < 2 || b.size() < 2)
        throw std::invalid_argument("moods_median_test: both samples need >= 2 values");
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    MedianTestResult result;
    result.grand_median = median(pooled);

    auto tally = [&](std::span<const double> sample, int col) {
        for (double v : sample) {
            if (v > result.grand_median) ++result.counts[0][col];
            else if (v < result.grand_median || tie_rule == TieRule::Below) ++result.counts[1][col];
        }
    };
    tally(a, 0);
    tally(b, 1);

    const double n00 = static_cast<double>(result.counts[0][0]);
    const double n01 = static_cast<double>(result.counts[0][1]);
    const double n10 = static_cast<double>(result.counts[1][0]);
    const double n11 = static_cast<double>(result.counts[1][1]);
    const double n = n00 + n01 + n10 + n11;
    const double row0 = n00 + n01, row1 = n10 + n11;
    const double col0 = n00 + n10, col1 = n01 + n11;
    if (row0 == 0.0 || row1 == 0.0 || col0 == 0.0 || col1 == 0.0)
        throw StatsError("moods_median_test: no variation around the grand median");

    double det = std::abs(n00 * n11 - n01 * n10);
    if (yates_correction) det = std::max(0.0, det - n / 2.0);
    result.chi2 = n * det * det / (row0 * row1 * col0 * col1);
    result.p_value = special::chi_squared_sf(result.chi2, 1.0);
    return result;
}

// --- Bonferroni --------------------------------------------------------------

struct BonferroniResult {
    std::vector<double> adjusted;  // min(1, p * m)
    std::vector<bool> reject;      // adjusted < alpha
    std::size_t comparisons = 0;
};

inline BonferroniResult bonferroni(const std::vector<double>& p_values, double alpha) {
    if (alpha <= 0.0 || alpha >= 1.0)
        throw std::invalid_argument("bonferroni: alpha must be in (0,1)");
    BonferroniResult result;
    result.comparisons = p_values.size();
    const double m = static_cast<double>(p_values.size());
    for (double p : p_values) {
        if (p < 0.0 || p > 1.0) throw std::invalid_argument("bonferroni: p-value outside [0,1]");
        const double adj = std::min(1.0, p * m);
        result.adjusted.push_back(adj);
        result.reject.push_back(adj < alpha);
    }
    return result;
}

// --- linear probability model with clustered SEs -----------------------------

struct RegressionResult {
    std::vector<std::string> terms;  // "(intercept)" then group dummies
    std::vector<double> coefficients;
    std::vector<double> std_errors;
    std::vector<double> t_stats;
    std::vector<double> p_values;
    std::size_t n_obs = 0;
    std::size_t n_clusters = 0;
};

namespace stats_detail {

// Gauss-Jordan inverse for the small symmetric normal-equations matrix.
inline std::vector<std::vector<double>> invert(std::vector<std::vector<double>> m) {
    const std::size_t k = m.size();
    std::vector<std::vector<double>> inv(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) inv[i][i] = 1.0;
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < k; ++r)
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
        if (std::abs(m[pivot][col]) < 1e-12)
            throw StatsError("regression design matrix is rank deficient");
        std::swap(m[pivot], m[col]);
        std::swap(inv[pivot], inv[col]);
        const double scale = m[col][col];
        for (std::size_t c = 0; c < k; ++c) {
            m[col][c] /= scale;
            inv[col][c] /= scale;
        }
        for (std::size_t r = 0; r < k; ++r) {
            if (r == col) continue;
            const double factor = m[r][col];
            if (factor == 0.0) continue;
            for (std::size_t c = 0; c < k; ++c) {
                m[r][c] -= factor * m[col][c];
                inv[r][c] -= factor * inv[col][c];
            }
        }
    }
    return inv;
}

}  // namespace stats_detail

// OLS of a binary outcome on group dummies (reference omitted), variance from
// the CR1 cluster-robust sandwich with the (G/(G-1))*((n-1)/(n-k)) factor and
// two-sided p-values from t(G-1). On this saturated design the coefficients
// are exactly the group-mean differences, so they are computed that way.
inline RegressionResult lpm_cluster_regression(const std::vector<double>& outcome,
                                               const std::vector<std::string>& group,
                                               const std::vector<std::string>& cluster_ids,
                                               const std::string& reference = "Caucasian",
                                               const std::vector<std::string>& expected_groups = {}) {
    const std::size_t n = outcome.size();
    if (group.size() != n || cluster_ids.size() != n)
        throw std::invalid_argument("lpm_cluster_regression: input length mismatch");
    if (n == 0) throw std::invalid_argument("lpm_cluster_regression: empty input");

    std::set<std::string> present(group.begin(), group.end());
    if (!present.count(reference))
        throw StatsError("lpm_cluster_regression: reference group absent: " + reference);
    for (const auto& g : expected_groups)
        if (!present.count(g))
            throw StatsError("lpm_cluster_regression: group absent from data: " + g);

    std::vector<std::string> dummies;
    for (const auto& g : present)
        if (g != reference) dummies.push_back(g);
    const std::size_t k = 1 + dummies.size();

    std::map<std::string, std::size_t> dummy_index;
    for (std::size_t i = 0; i < dummies.size(); ++i) dummy_index[dummies[i]] = i + 1;

    // Group means give the saturated-design OLS solution directly.
    std::map<std::string, std::pair<double, std::size_t>> sums;
    for (std::size_t i = 0; i < n; ++i) {
        auto& [s, c] = sums[group[i]];
        s += outcome[i];
        ++c;
    }
    auto group_mean = [&](const std::string& g) {
        const auto& [s, c] = sums.at(g);
        return s / static_cast<double>(c);
    };
    std::vector<double> beta(k);
    beta[0] = group_mean(reference);
    for (const auto& g : dummies) beta[dummy_index[g]] = group_mean(g) - beta[0];

    // Design row for observation i: intercept plus its group dummy.
    auto design_col = [&](std::size_t i) -> std::size_t {
        const auto it = dummy_index.find(group[i]);
        return it == dummy_index.end() ? 0 : it->second;
    };

    std::vector<std::vector<double>> xtx(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = design_col(i);
        xtx[0][0] += 1.0;
        if (c != 0) {
            xtx[0][c] += 1.0;
            xtx[c][0] += 1.0;
            xtx[c][c] += 1.0;
        }
    }
    const auto xtx_inv = stats_detail::invert(xtx);

    // Meat: sum over clusters g of (Xg' eg)(Xg' eg)'.
    std::map<std::string, std::vector<double>> cluster_scores;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = design_col(i);
        const double fitted = beta[0] + (c != 0 ? beta[c] : 0.0);
        const double resid = outcome[i] - fitted;
        auto& score = cluster_scores.try_emplace(cluster_ids[i], std::vector<double>(k, 0.0))
                          .first->second;
        score[0] += resid;
        if (c != 0) score[c] += resid;
    }
    const std::size_t n_clusters = cluster_scores.size();
    if (n_clusters < 2) throw StatsError("lpm_cluster_regression: need at least 2 clusters");
    if (n <= k) throw StatsError("lpm_cluster_regression: more terms than observations");

    std::vector<std::vector<double>> meat(k, std::vector<double>(k, 0.0));
    for (const auto& [id, score] : cluster_scores)
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t c = 0; c < k; ++c) meat[r][c] += score[r] * score[c];

    const double g_count = static_cast<double>(n_clusters);
    const double cr1 = (g_count / (g_count - 1.0)) *
                       ((static_cast<double>(n) - 1.0) / (static_cast<double>(n - k)));

    RegressionResult result;
    result.terms.push_back("(intercept)");
    for (const auto& g : dummies) result.terms.push_back(g);
    result.coefficients = beta;
    result.n_obs = n;
    result.n_clusters = n_clusters;
    for (std::size_t t = 0; t < k; ++t) {
        double v = 0.0;
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t c = 0; c < k; ++c) v += xtx_inv[t][r] * meat[r][c] * xtx_inv[c][t];
        v *= cr1;
        const double se = std::sqrt(std::max(0.0, v));
        result.std_errors.push_back(se);
        const double tstat = se > 0.0 ? beta[t] / se : 0.0;
        result.t_stats.push_back(tstat);
        result.p_values.push_back(special::student_t_two_sided(tstat, g_count - 1.0));
    }
    return result;
}

// --- misclassification analysis ----------------------------------------------

struct MisclassTable {
    std::string target_label;
    DemographicGroup reference_group = DemographicGroup::Caucasian;
    // Predicted-label counts over misclassified records, per group.
    std::map<DemographicGroup, std::map<std::string, long>> counts;
    std::map<DemographicGroup, long> target_counts;             // predictions of target_label
    std::map<DemographicGroup, std::optional<double>> rate_pct;  // (count/ref - 1) * 100
};

inline MisclassTable misclass_ratios(const std::vector<PredictionRecord>& predictions,
                                     const std::string& target_label,
                                     DemographicGroup reference_group = DemographicGroup::Caucasian) {
    MisclassTable table;
    table.target_label = target_label;
    table.reference_group = reference_group;
    for (DemographicGroup g : kAllGroups) table.target_counts[g] = 0;
    for (const auto& p : predictions) {
        if (!p.correct) ++table.counts[p.group][p.predicted_label];
        if (p.predicted_label == target_label) ++table.target_counts[p.group];
    }
    const long ref = table.target_counts[reference_group];
    for (DemographicGroup g : kAllGroups) {
        if (ref == 0) {
            table.rate_pct[g] = std::nullopt;  // undefined, reported as such
        } else {
            table.rate_pct[g] =
                (static_cast<double>(table.target_counts[g]) / static_cast<double>(ref) - 1.0) *
                100.0;
        }
    }
    return table;
}

// The negative label most often predicted for misclassified records of one
// occupation; first-alphabetical tie-break; nullopt when nothing was wrong.
inline std::optional<std::string> top_misclassified_label(
    const std::vector<PredictionRecord>& predictions, const std::string& occupation) {
    std::map<std::string, long> counts;
    for (const auto& p : predictions)
        if (p.occupation == occupation && !p.correct) ++counts[p.predicted_label];
    if (counts.empty()) return std::nullopt;
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it)
        if (it->second > best->second) best = it;  // map order = alphabetical tie-break
    return best->first;
}

// --- error-analysis sampling ---------------------------------------------------

struct ErrorAnalysisSample {
    std::map<DemographicGroup, std::vector<std::string>> set_ids;
    std::vector<std::string> warnings;
};

// Per non-reference group, a seeded sample of sets where the reference
// variant is classified correctly and the group's variant is not.
inline ErrorAnalysisSample error_analysis_sample(const std::vector<PredictionRecord>& predictions,
                                                 std::size_t n_per_group, std::uint64_t seed,
                                                 DemographicGroup reference = DemographicGroup::Caucasian) {
    std::map<std::string, std::map<DemographicGroup, bool>> correct_by_set;
    for (const auto& p : predictions) correct_by_set[p.set_id][p.group] = p.correct;

    ErrorAnalysisSample result;
    for (DemographicGroup g : kAllGroups) {
        if (g == reference) continue;
        std::vector<std::string> eligible;
        for (const auto& [set_id, by_group] : correct_by_set) {
            const auto ref_it = by_group.find(reference);
            const auto g_it = by_group.find(g);
            if (ref_it == by_group.end() || g_it == by_group.end()) continue;
            if (ref_it->second && !g_it->second) eligible.push_back(set_id);
        }
        std::sort(eligible.begin(), eligible.end());
        if (eligible.size() < n_per_group)
            result.warnings.push_back("group " + std::string(canonical_name(g)) + ": only " +
                                      std::to_string(eligible.size()) + " eligible sets (wanted " +
                                      std::to_string(n_per_group) + ")");
        result.set_ids[g] = sample_without_replacement(
            eligible, n_per_group,
            derive_seed(seed, "error_analysis", canonical_name(g)));
    }
    return result;
}

// --- pairwise model comparison -----------------------------------------------

struct ModelComparison {
    struct Pair {
        std::string model_a;
        std::string model_b;
        double median_std_a = 0.0;
        double median_std_b = 0.0;
        MedianTestResult test;
        double p_adjusted = 1.0;
        bool reject = false;
    };
    std::vector<Pair> pairs;
    std::size_t comparisons = 0;
    double alpha = 0.0;
    // Models by median per-set std, ascending (lower = more robust).
    std::vector<std::string> ranking;
    // (better, worse) edges where the corrected test rejected.
    std::vector<std::pair<std::string, std::string>> significant_order;
};

inline ModelComparison compare_models(const std::map<std::string, std::vector<double>>& model_stds,
                                      double alpha, TieRule tie_rule = TieRule::Below) {
    if (model_stds.size() < 2)
        throw std::invalid_argument("compare_models: need at least 2 models");
    ModelComparison cmp;
    cmp.alpha = alpha;

    std::vector<std::string> names;
    std::map<std::string, double> medians;
    for (const auto& [name, stds] : model_stds) {
        names.push_back(name);
        medians[name] = median(stds);
    }

    std::vector<double> pvalues;
    for (std::size_t i = 0; i < names.size(); ++i) {
        for (std::size_t j = i + 1; j < names.size(); ++j) {
            ModelComparison::Pair pair;
            pair.model_a = names[i];
            pair.model_b = names[j];
            pair.median_std_a = medians[names[i]];
            pair.median_std_b = medians[names[j]];
            pair.test = moods_median_test(model_stds.at(names[i]), model_stds.at(names[j]), tie_rule);
            pvalues.push_back(pair.test.p_value);
            cmp.pairs.push_back(std::move(pair));
        }
    }
    const BonferroniResult adj = bonferroni(pvalues, alpha);
    cmp.comparisons = adj.comparisons;
    for (std::size_t i = 0; i < cmp.pairs.size(); ++i) {
        cmp.pairs[i].p_adjusted = adj.adjusted[i];
        cmp.pairs[i].reject = adj.reject[i];
        if (adj.reject[i]) {
            const auto& p = cmp.pairs[i];
            if (p.median_std_a < p.median_std_b)
                cmp.significant_order.emplace_back(p.model_a, p.model_b);
            else if (p.median_std_b < p.median_std_a)
                cmp.significant_order.emplace_back(p.model_b, p.model_a);
        }
    }
    cmp.ranking = names;
    std::sort(cmp.ranking.begin(), cmp.ranking.end(), [&](const auto& x, const auto& y) {
        if (medians[x] != medians[y]) return medians[x] < medians[y];
        return x < y;
    });
    return cmp;
}

}  // namespace perturbkit
