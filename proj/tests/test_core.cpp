#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "perturbkit/rng.hpp"
#include "perturbkit/types.hpp"
#include "perturbkit/util.hpp"

using namespace perturbkit;

TEST_CASE("demographic group name tables are bijective") {
    std::set<std::string> canon, prompt, review;
    for (DemographicGroup g : kAllGroups) {
        canon.insert(std::string(canonical_name(g)));
        prompt.insert(std::string(prompt_identifier(g)));
        review.insert(std::string(review_label(g)));
        REQUIRE(group_from_canonical(canonical_name(g)) == g);
        REQUIRE(group_from_review_label(review_label(g)) == g);
    }
    REQUIRE(canon.size() == 4);
    REQUIRE(prompt.size() == 4);
    REQUIRE(review.size() == 4);
    REQUIRE(prompt_identifier(DemographicGroup::EastAsian) == "Asian");
    REQUIRE_FALSE(group_from_canonical("Martian").has_value());
}

TEST_CASE("validate_set flags the documented violations") {
    PerturbationSet set;
    set.set_id = "set-1";
    set.occupation = "chef";
    set.base_id = "chef-000001";
    for (DemographicGroup g : kAllGroups) {
        PerturbationVariant v;
        v.image_ref = "img.png";
        v.prompt = "p";
        v.attribute_label = g;
        v.passed = true;
        set.variants[g] = v;
    }

    SECTION("fully passing set has no violations") {
        REQUIRE(validate_set(set).empty());
        set.sampled = true;
        REQUIRE(validate_set(set).empty());
    }

    SECTION("missing variant is reported by group name") {
        set.variants.erase(DemographicGroup::Indian);
        const auto violations = validate_set(set);
        REQUIRE(violations == std::vector<std::string>{"variants: missing group Indian"});
    }

    SECTION("sampled set with a mislabeled variant violates sampled-implies-passed") {
        set.sampled = true;
        set.variants[DemographicGroup::Black].attribute_label = DemographicGroup::Caucasian;
        set.variants[DemographicGroup::Black].passed = false;
        const auto violations = validate_set(set);
        REQUIRE(violations.size() == 1);
        REQUIRE(violations[0] == "sampled: variant Black has passed = false");
    }

    SECTION("passed variant whose label disagrees with its group is inconsistent") {
        set.variants[DemographicGroup::Black].attribute_label = DemographicGroup::Caucasian;
        const auto violations = validate_set(set);
        REQUIRE(violations.size() == 1);
        REQUIRE_THAT(violations[0], Catch::Matchers::ContainsSubstring("attribute_label"));
    }

    SECTION("validation is total on malformed input") {
        set.variants.clear();
        set.sampled = true;
        REQUIRE_NOTHROW(validate_set(set));
        REQUIRE(validate_set(set).size() == 4);
    }
}

TEST_CASE("derive_seed gives independent stable streams") {
    const auto a = derive_seed(42, "perturb/Black", "chef-000001");
    const auto b = derive_seed(42, "perturb/Black", "chef-000001");
    const auto c = derive_seed(42, "perturb/Indian", "chef-000001");
    const auto d = derive_seed(43, "perturb/Black", "chef-000001");
    REQUIRE(a == b);
    REQUIRE(a != c);
    REQUIRE(a != d);
}

TEST_CASE("sample_without_replacement is uniform-ish, seeded, and exact-size") {
    std::vector<int> pool(100);
    for (int i = 0; i < 100; ++i) pool[i] = i;
    const auto s1 = sample_without_replacement(pool, 10, 7);
    const auto s2 = sample_without_replacement(pool, 10, 7);
    const auto s3 = sample_without_replacement(pool, 10, 8);
    REQUIRE(s1 == s2);
    REQUIRE(s1 != s3);
    REQUIRE(s1.size() == 10);
    REQUIRE(std::set<int>(s1.begin(), s1.end()).size() == 10);
    REQUIRE(sample_without_replacement(pool, 200, 7).size() == 100);
}

TEST_CASE("median uses the mean-of-central-pair convention") {
    REQUIRE(median({3.0, 1.0, 2.0}) == 2.0);
    REQUIRE(median({1.0, 2.0, 3.0, 4.0}) == 2.5);
    REQUIRE(median({5.0}) == 5.0);
}

TEST_CASE("sample_std matches the K-1 denominator") {
    const std::vector<double> v{0.6, 0.7, 0.8, 0.9};
    REQUIRE_THAT(sample_std(v), Catch::Matchers::WithinAbs(0.1290994449, 1e-9));
}

TEST_CASE("parallel_for covers every index and propagates errors") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i] = static_cast<int>(i) + 1; });
    for (std::size_t i = 0; i < hits.size(); ++i) REQUIRE(hits[i] == static_cast<int>(i) + 1);
    REQUIRE_THROWS_AS(
        parallel_for(16, 4, [](std::size_t i) { if (i == 9) throw AdapterError("boom"); }),
        AdapterError);
}
