#pragma once
// Prompt construction. Every generation prompt begins with a fixed prefix and
// an occupation noun phrase; demographic and gender identifiers are inserted
// right after the phrase's leading article. The article is kept verbatim even
// before vowel-initial identifiers ("a Asian firefighter"): the goal is to
// reproduce the exact conditioning text, not grammatical English.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "perturbkit/errors.hpp"
#include "perturbkit/types.hpp"
#include "perturbkit/util.hpp"

namespace perturbkit {

inline constexpr std::string_view kPromptPrefix = "A photo of the face of";

inline constexpr std::string_view kVqaQuestionLimbs = "Are this person's limbs distorted?";
inline constexpr std::string_view kVqaQuestionRealism = "Is this image real or fake?";

inline std::string_view indefinite_article(std::string_view noun) {
    if (noun.empty()) return "a";
    switch (std::tolower(static_cast<unsigned char>(noun.front()))) {
        case 'a': case 'e': case 'i': case 'o': case 'u': return "an";
        default: return "a";
    }
}

namespace detail {

// Splits "a chef in a chef's jacket" into ("a", "chef in a chef's jacket").
// Phrases without a leading article get an empty article.
inline std::pair<std::string, std::string> split_article(const std::string& phrase) {
    if (phrase.rfind("a ", 0) == 0) return {"a", phrase.substr(2)};
    if (phrase.rfind("an ", 0) == 0) return {"an", phrase.substr(3)};
    return {"", phrase};
}

inline std::string compose_phrase(const std::string& phrase,
                                  const std::vector<std::string>& identifiers) {
    auto [article, rest] = split_article(phrase);
    std::string out;
    if (!article.empty()) out = article + " ";
    for (const std::string& id : identifiers) out += id + " ";
    out += rest;
    return out;
}

}  // namespace detail

inline std::string build_base_prompt(const OccupationSpec& occupation,
                                     std::optional<Gender> gender = {}) {
    if (occupation.prompt_phrase.empty())
        throw std::invalid_argument("occupation prompt_phrase must be nonempty");
    std::vector<std::string> ids;
    if (gender) ids.emplace_back(gender_name(*gender));
    return std::string(kPromptPrefix) + " " +
           detail::compose_phrase(occupation.prompt_phrase, ids);
}

// Identifier order when both appear is "a {race} {gender} {occupation}".
inline std::string build_perturbed_prompt(const OccupationSpec& occupation, DemographicGroup group,
                                          std::optional<Gender> gender = {}) {
    if (occupation.prompt_phrase.empty())
        throw std::invalid_argument("occupation prompt_phrase must be nonempty");
    std::vector<std::string> ids;
    ids.emplace_back(prompt_identifier(group));
    if (gender) ids.emplace_back(gender_name(*gender));
    return std::string(kPromptPrefix) + " " +
           detail::compose_phrase(occupation.prompt_phrase, ids);
}

// Faithfulness question, e.g. "Is there a chef in this image?". The subject
// defaults to the occupation name and can be overridden per occupation.
inline std::string vqa_question_occupation(const OccupationSpec& occupation) {
    const std::string& subject =
        occupation.vqa_subject.empty() ? occupation.name : occupation.vqa_subject;
    return "Is there " + std::string(indefinite_article(subject)) + " " + subject +
           " in this image?";
}

inline const std::vector<std::string>& base_label_set() {
    static const std::vector<std::string> labels = {
        "chef",     "server",   "doctor",      "nurse",          "pilot",
        "driver",   "mechanic", "engineer",    "firefighter",    "police officer"};
    return labels;
}

// The five stock occupations with their generation phrases and the
// occupation-specific difficult label sets (true label + 7 adjacent).
inline std::vector<OccupationSpec> default_occupations() {
    auto make = [](std::string name, std::string phrase, std::vector<std::string> difficult) {
        OccupationSpec spec;
        spec.name = std::move(name);
        spec.prompt_phrase = std::move(phrase);
        spec.base_labels = base_label_set();
        spec.difficult_labels = std::move(difficult);
        return spec;
    };
    return {
        make("chef", "a chef in a chef's jacket",
             {"chef", "line cook", "cafeteria attendant", "waiter", "dishwasher",
              "food preparation worker", "host", "server"}),
        make("doctor", "a doctor in a white coat with a stethoscope",
             {"doctor", "nurse", "physician assistant", "veterinarian",
              "clinical laboratory technician", "pharmacist", "emergency medical technician",
              "midwife"}),
        make("firefighter", "a firefighter",
             {"firefighter", "fire chief", "coast guard", "security guard", "paramedic", "pilot",
              "police officer", "soldier"}),
        make("mechanic", "a car mechanic",
             {"mechanic", "automobile engineer", "civil engineer", "aerospace engineer",
              "mechanical engineer", "electrical engineer", "industrial engineer",
              "petroleum engineer"}),
        make("pilot", "a commercial pilot",
             {"pilot", "flight steward", "flight stewardess", "driver", "aircraft fueler",
              "airline reservation agent", "air traffic controller", "aircraft engineer"}),
    };
}

inline void validate_occupation(const OccupationSpec& spec) {
    if (spec.name.empty()) throw ConfigError("occupation name must be nonempty");
    if (spec.prompt_phrase.empty())
        throw ConfigError("occupation " + spec.name + ": prompt_phrase must be nonempty");
    if (spec.difficult_labels.size() != 8)
        throw ConfigError("occupation " + spec.name + ": difficult_labels must have 8 entries, got " +
                          std::to_string(spec.difficult_labels.size()));
    bool has_true = false;
    for (const auto& l : spec.difficult_labels) has_true |= (l == spec.name);
    if (!has_true)
        throw ConfigError("occupation " + spec.name + ": difficult_labels must include the true label");
    has_true = false;
    for (const auto& l : spec.base_labels) has_true |= (l == spec.name);
    if (!has_true)
        throw ConfigError("occupation " + spec.name + ": base_labels must include the true label");
}

// Config schema:
//   { "base_labels": [... 10 shared labels ...],
//     "occupations": { "<name>": { "phrase": "...",
//                                  "difficult_labels": [... 8 incl. true ...],
//                                  "vqa_subject": "..." (optional) } } }
inline std::vector<OccupationSpec> load_occupations(const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(read_text_file(path));
    } catch (const std::exception& ex) {
        throw ConfigError("occupations file " + path.string() + ": " + ex.what());
    }
    if (!j.contains("base_labels")) throw ConfigError("occupations file: missing key base_labels");
    if (!j.contains("occupations")) throw ConfigError("occupations file: missing key occupations");
    std::vector<std::string> base = j.at("base_labels").get<std::vector<std::string>>();
    std::vector<OccupationSpec> specs;
    for (const auto& [name, body] : j.at("occupations").items()) {
        OccupationSpec spec;
        spec.name = name;
        if (!body.contains("phrase"))
            throw ConfigError("occupation " + name + ": missing key phrase");
        spec.prompt_phrase = body.at("phrase").get<std::string>();
        if (!body.contains("difficult_labels"))
            throw ConfigError("occupation " + name + ": missing key difficult_labels");
        spec.difficult_labels = body.at("difficult_labels").get<std::vector<std::string>>();
        spec.vqa_subject = body.value("vqa_subject", std::string{});
        spec.base_labels = base;
        validate_occupation(spec);
        specs.push_back(std::move(spec));
    }
    if (specs.empty()) throw ConfigError("occupations file: no occupations defined");
    return specs;
}

}  // namespace perturbkit
