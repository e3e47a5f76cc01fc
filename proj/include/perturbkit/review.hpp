#pragma once
// Human-review support: stratified sampling of images for annotation, CSV
// ingestion of annotator responses, and aggregation into realism and
// race-fidelity scores.
//
// CSV schema (header required, UTF-8, RFC-4180 quoting):
//   image_ref,set_id,intended_group,q_quality,q_identity
// q_quality in {Yes, No, Unsure}; q_identity is one of the review labels
// ("Black", "Caucasian", "East Asian (e.g. Chinese)",
//  "South Asian (e.g. Indian)") or "Others".
//
// Realism is the fraction of rows answering No to the quality question;
// fidelity is the fraction whose identity answer maps to the intended group.
// "Unsure" and "Others" rows stay in the denominators.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "perturbkit/errors.hpp"
#include "perturbkit/manifest.hpp"
#include "perturbkit/rng.hpp"
#include "perturbkit/types.hpp"
#include "perturbkit/util.hpp"

namespace perturbkit {

enum class QualityAnswer { Yes, No, Unsure };

enum class IdentityAnswer { Black, Caucasian, EastAsianExample, SouthAsianExample, Others };

inline std::optional<QualityAnswer> quality_from_string(std::string_view s) {
    if (s == "Yes") return QualityAnswer::Yes;
    if (s == "No") return QualityAnswer::No;
    if (s == "Unsure") return QualityAnswer::Unsure;
    return std::nullopt;
}

inline std::string_view quality_to_string(QualityAnswer a) {
    switch (a) {
        case QualityAnswer::Yes: return "Yes";
        case QualityAnswer::No: return "No";
        case QualityAnswer::Unsure: return "Unsure";
    }
    return "";
}

inline std::optional<IdentityAnswer> identity_from_string(std::string_view s) {
    if (s == "Black") return IdentityAnswer::Black;
    if (s == "Caucasian") return IdentityAnswer::Caucasian;
    if (s == "East Asian (e.g. Chinese)") return IdentityAnswer::EastAsianExample;
    if (s == "South Asian (e.g. Indian)") return IdentityAnswer::SouthAsianExample;
    if (s == "Others") return IdentityAnswer::Others;
    return std::nullopt;
}

inline std::string_view identity_to_string(IdentityAnswer a) {
    switch (a) {
        case IdentityAnswer::Black: return "Black";
        case IdentityAnswer::Caucasian: return "Caucasian";
        case IdentityAnswer::EastAsianExample: return "East Asian (e.g. Chinese)";
        case IdentityAnswer::SouthAsianExample: return "South Asian (e.g. Indian)";
        case IdentityAnswer::Others: return "Others";
    }
    return "";
}

inline bool identity_matches_group(IdentityAnswer a, DemographicGroup g) {
    switch (a) {
        case IdentityAnswer::Black: return g == DemographicGroup::Black;
        case IdentityAnswer::Caucasian: return g == DemographicGroup::Caucasian;
        case IdentityAnswer::EastAsianExample: return g == DemographicGroup::EastAsian;
        case IdentityAnswer::SouthAsianExample: return g == DemographicGroup::Indian;
        case IdentityAnswer::Others: return false;
    }
    return false;
}

struct AnnotationRow {
    std::string image_ref;
    std::string set_id;
    DemographicGroup intended_group = DemographicGroup::Caucasian;
    QualityAnswer q_quality = QualityAnswer::Unsure;
    IdentityAnswer q_identity = IdentityAnswer::Others;

    bool operator==(const AnnotationRow&) const = default;
};

struct ParsedAnnotations {
    std::vector<AnnotationRow> rows;
    std::vector<std::pair<std::size_t, std::string>> rejected;  // line number, error
};

namespace review_detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace review_detail

inline constexpr std::string_view kAnnotationHeader =
    "image_ref,set_id,intended_group,q_quality,q_identity";

inline ParsedAnnotations read_annotations(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open annotations file: " + path.string());
    ParsedAnnotations parsed;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = review_detail::split_csv_line(line);
        if (!header_seen) {
            header_seen = true;
            if (fields != std::vector<std::string>{"image_ref", "set_id", "intended_group",
                                                   "q_quality", "q_identity"})
                throw ValidationError("annotations file: unexpected header on line 1");
            continue;
        }
        if (fields.size() != 5) {
            parsed.rejected.emplace_back(line_no, "expected 5 fields, got " +
                                                      std::to_string(fields.size()));
            continue;
        }
        const auto group = group_from_canonical(fields[2]);
        if (!group) {
            parsed.rejected.emplace_back(line_no, "unknown intended_group: " + fields[2]);
            continue;
        }
        const auto quality = quality_from_string(fields[3]);
        if (!quality) {
            parsed.rejected.emplace_back(line_no, "unknown q_quality: " + fields[3]);
            continue;
        }
        const auto identity = identity_from_string(fields[4]);
        if (!identity) {
            parsed.rejected.emplace_back(line_no, "unknown q_identity: " + fields[4]);
            continue;
        }
        parsed.rows.push_back(AnnotationRow{fields[0], fields[1], *group, *quality, *identity});
    }
    if (!header_seen) throw ValidationError("annotations file: missing header row");
    return parsed;
}

inline void write_annotations(const std::vector<AnnotationRow>& rows,
                              const std::filesystem::path& path) {
    std::string out{kAnnotationHeader};
    out.push_back('\n');
    for (const auto& r : rows) {
        out += review_detail::csv_quote(r.image_ref) + "," + review_detail::csv_quote(r.set_id) +
               "," + std::string(canonical_name(r.intended_group)) + "," +
               std::string(quality_to_string(r.q_quality)) + "," +
               review_detail::csv_quote(std::string(identity_to_string(r.q_identity))) + "\n";
    }
    write_text_file(path, out);
}

// --- review sampling ----------------------------------------------------------

// One image per (sampled set, group); an evenly distributed sample draws
// round(fraction * cell size) refs from each occupation x group cell.
inline std::vector<std::string> sample_for_review(const Manifest& manifest, double fraction,
                                                  std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw std::invalid_argument("sample_for_review: fraction must be in (0, 1]");
    std::map<std::pair<std::string, DemographicGroup>, std::vector<std::string>> cells;
    for (const PerturbationSet* set : manifest.sets(/*sampled_only=*/true))
        for (const auto& [group, variant] : set->variants)
            cells[{set->occupation, group}].push_back(variant.image_ref);

    std::vector<std::string> out;
    for (auto& [key, refs] : cells) {
        std::sort(refs.begin(), refs.end());
        const auto want = static_cast<std::size_t>(
            std::llround(fraction * static_cast<double>(refs.size())));
        auto picked = sample_without_replacement(
            refs, want,
            derive_seed(seed, "review/" + key.first, canonical_name(key.second)));
        std::sort(picked.begin(), picked.end());
        out.insert(out.end(), picked.begin(), picked.end());
    }
    return out;
}

// --- aggregation ----------------------------------------------------------------

struct ReviewScores {
    double realism = 0.0;   // fraction answering No to the quality question
    double fidelity = 0.0;  // fraction whose identity answer matches the intent
    std::size_t rows = 0;
};

struct ReviewAggregate {
    ReviewScores overall;
    std::map<std::string, ReviewScores> per_occupation;
};

// `set_to_occupation` resolves per-occupation buckets (usually from the
// manifest); rows with unresolvable set ids still count toward the overall
// scores.
inline ReviewAggregate aggregate_review(
    const std::vector<AnnotationRow>& rows,
    const std::map<std::string, std::string>& set_to_occupation = {}) {
    if (rows.empty()) throw std::invalid_argument("aggregate_review: no rows");
    struct Tally {
        std::size_t no = 0, match = 0, total = 0;
    };
    Tally overall;
    std::map<std::string, Tally> per_occ;
    for (const AnnotationRow& row : rows) {
        const bool is_no = row.q_quality == QualityAnswer::No;
        const bool is_match = identity_matches_group(row.q_identity, row.intended_group);
        overall.no += is_no;
        overall.match += is_match;
        ++overall.total;
        if (auto it = set_to_occupation.find(row.set_id); it != set_to_occupation.end()) {
            Tally& t = per_occ[it->second];
            t.no += is_no;
            t.match += is_match;
            ++t.total;
        }
    }
    auto to_scores = [](const Tally& t) {
        ReviewScores s;
        s.rows = t.total;
        s.realism = static_cast<double>(t.no) / static_cast<double>(t.total);
        s.fidelity = static_cast<double>(t.match) / static_cast<double>(t.total);
        return s;
    };
    ReviewAggregate agg;
    agg.overall = to_scores(overall);
    for (const auto& [occ, tally] : per_occ) agg.per_occupation[occ] = to_scores(tally);
    return agg;
}

inline std::map<std::string, std::string> set_occupation_index(const Manifest& manifest) {
    std::map<std::string, std::string> index;
    for (const PerturbationSet* set : manifest.sets(/*sampled_only=*/false))
        index[set->set_id] = set->occupation;
    return index;
}

}  // namespace perturbkit
