#pragma once
// Persistent record types shared by the dataset pipeline and the evaluator.
//
// The four demographic groups carry three spellings that must stay in sync:
// the canonical enum name used in files and code, the identifier inserted
// into generation prompts (East Asian images are prompted with "Asian"), and
// the label shown to human reviewers.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "perturbkit/errors.hpp"
#include "perturbkit/util.hpp"

namespace perturbkit {

enum class DemographicGroup { Black, Caucasian, EastAsian, Indian };

inline constexpr std::array<DemographicGroup, 4> kAllGroups = {
    DemographicGroup::Black, DemographicGroup::Caucasian,
    DemographicGroup::EastAsian, DemographicGroup::Indian};

inline constexpr int kVariantsPerSet = static_cast<int>(kAllGroups.size());

constexpr std::string_view canonical_name(DemographicGroup g) {
    switch (g) {
        case DemographicGroup::Black: return "Black";
        case DemographicGroup::Caucasian: return "Caucasian";
        case DemographicGroup::EastAsian: return "EastAsian";
        case DemographicGroup::Indian: return "Indian";
    }
    return "";
}

constexpr std::string_view prompt_identifier(DemographicGroup g) {
    switch (g) {
        case DemographicGroup::Black: return "Black";
        case DemographicGroup::Caucasian: return "Caucasian";
        case DemographicGroup::EastAsian: return "Asian";
        case DemographicGroup::Indian: return "Indian";
    }
    return "";
}

constexpr std::string_view review_label(DemographicGroup g) {
    switch (g) {
        case DemographicGroup::Black: return "Black";
        case DemographicGroup::Caucasian: return "Caucasian";
        case DemographicGroup::EastAsian: return "East Asian (e.g. Chinese)";
        case DemographicGroup::Indian: return "South Asian (e.g. Indian)";
    }
    return "";
}

inline std::optional<DemographicGroup> group_from_canonical(std::string_view name) {
    for (DemographicGroup g : kAllGroups)
        if (canonical_name(g) == name) return g;
    return std::nullopt;
}

inline std::optional<DemographicGroup> group_from_review_label(std::string_view label) {
    for (DemographicGroup g : kAllGroups)
        if (review_label(g) == label) return g;
    return std::nullopt;
}

inline DemographicGroup require_group(std::string_view name) {
    if (auto g = group_from_canonical(name)) return *g;
    throw ValidationError("unknown demographic group: " + std::string(name));
}

enum class Gender { Male, Female };

constexpr std::string_view gender_name(Gender g) {
    return g == Gender::Male ? "male" : "female";
}

inline std::optional<Gender> gender_from_name(std::string_view name) {
    if (name == "male") return Gender::Male;
    if (name == "female") return Gender::Female;
    return std::nullopt;
}

struct OccupationSpec {
    std::string name;           // true classification label, e.g. "chef"
    std::string prompt_phrase;  // generation noun phrase, e.g. "a chef in a chef's jacket"
    std::string vqa_subject;    // noun used in the faithfulness question; defaults to name
    std::vector<std::string> base_labels;       // shared across occupations
    std::vector<std::string> difficult_labels;  // true label + 7 adjacent

    bool operator==(const OccupationSpec&) const = default;
};

struct VQAResult {
    std::string answer;
    double score = 0.0;  // backend confidence in the returned answer, in [0,1]

    bool operator==(const VQAResult&) const = default;
};

// Yes/no answers arrive as free text; accept case-insensitive prefixes.
inline bool answer_is_yes(std::string_view answer) { return starts_with_ci(answer, "yes"); }
inline bool answer_is_no(std::string_view answer) { return starts_with_ci(answer, "no"); }

struct BoundingBox {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double confidence = 0;

    double area() const { return (x1 - x0) * (y1 - y0); }
    bool operator==(const BoundingBox&) const = default;
};

struct BaseImageRecord {
    std::string base_id;
    std::string occupation;
    std::string prompt;
    std::uint64_t seed = 0;
    std::string image_ref;  // path relative to the run root
    std::optional<Gender> gender;
    std::optional<VQAResult> vqa_q1;       // "Is there a <occupation> in this image?"
    std::optional<VQAResult> vqa_q2;       // "Are this person's limbs distorted?"
    std::optional<double> vqa_q3_score;    // confidence the image is real, in [0,1]
    std::optional<bool> grayscale;
    bool selected = false;

    bool operator==(const BaseImageRecord&) const = default;
};

struct MaskRecord {
    std::string base_id;
    int width = 0;
    int height = 0;
    std::vector<BoundingBox> boxes;
    std::string mask_ref;  // single-channel PNG, values exactly {0, 255}

    bool operator==(const MaskRecord&) const = default;
};

struct PerturbationVariant {
    std::string image_ref;
    std::string prompt;
    std::uint64_t seed = 0;
    std::optional<DemographicGroup> attribute_label;  // classifier output, set by the attribute filter
    bool passed = false;

    bool operator==(const PerturbationVariant&) const = default;
};

struct PerturbationSet {
    std::string set_id;
    std::string occupation;
    std::string base_id;
    std::optional<Gender> gender;
    std::map<DemographicGroup, PerturbationVariant> variants;
    bool sampled = false;

    bool operator==(const PerturbationSet&) const = default;
};

// One dropped record; `reason` is a stable machine-readable token.
struct DropRecord {
    std::string id;
    std::string reason;

    bool operator==(const DropRecord&) const = default;
};

// Violations are data, not errors: each entry names the field and the rule.
inline std::vector<std::string> validate_set(const PerturbationSet& set) {
    std::vector<std::string> violations;
    for (DemographicGroup g : kAllGroups) {
        const auto it = set.variants.find(g);
        if (it == set.variants.end()) {
            violations.push_back("variants: missing group " + std::string(canonical_name(g)));
            continue;
        }
        const PerturbationVariant& v = it->second;
        if (v.passed && v.attribute_label != g) {
            violations.push_back("variants[" + std::string(canonical_name(g)) +
                                 "].attribute_label: passed variant classified as " +
                                 (v.attribute_label ? std::string(canonical_name(*v.attribute_label))
                                                    : std::string("<none>")) +
                                 ", expected " + std::string(canonical_name(g)));
        }
        if (set.sampled && !v.passed) {
            violations.push_back("sampled: variant " + std::string(canonical_name(g)) +
                                 " has passed = false");
        }
    }
    return violations;
}

inline std::vector<std::string> validate_record(const BaseImageRecord& rec) {
    std::vector<std::string> violations;
    if (rec.base_id.empty()) violations.push_back("base_id: must be nonempty");
    if (rec.vqa_q1 && (rec.vqa_q1->score < 0.0 || rec.vqa_q1->score > 1.0))
        violations.push_back("vqa_q1.score: outside [0,1]");
    if (rec.vqa_q2 && (rec.vqa_q2->score < 0.0 || rec.vqa_q2->score > 1.0))
        violations.push_back("vqa_q2.score: outside [0,1]");
    if (rec.vqa_q3_score && (*rec.vqa_q3_score < 0.0 || *rec.vqa_q3_score > 1.0))
        violations.push_back("vqa_q3_score: outside [0,1]");
    if (rec.selected) {
        if (!rec.vqa_q1 || !answer_is_yes(rec.vqa_q1->answer))
            violations.push_back("selected: requires vqa_q1 answer yes");
        if (!rec.vqa_q2 || !answer_is_no(rec.vqa_q2->answer))
            violations.push_back("selected: requires vqa_q2 answer no");
        if (!rec.grayscale || *rec.grayscale)
            violations.push_back("selected: requires grayscale = false");
    }
    return violations;
}

inline std::vector<std::string> validate_record(const MaskRecord& rec) {
    std::vector<std::string> violations;
    if (rec.base_id.empty()) violations.push_back("base_id: must be nonempty");
    for (std::size_t i = 0; i < rec.boxes.size(); ++i) {
        const BoundingBox& b = rec.boxes[i];
        if (b.x0 < 0 || b.y0 < 0 || b.x1 > rec.width || b.y1 > rec.height || b.x0 >= b.x1 ||
            b.y0 >= b.y1)
            violations.push_back("boxes[" + std::to_string(i) + "]: outside image bounds");
    }
    if (!rec.boxes.empty() && rec.mask_ref.empty())
        violations.push_back("mask_ref: must be nonempty when boxes are present");
    return violations;
}

}  // namespace perturbkit
