#pragma once
// The eight dataset-construction stages, run per occupation in a fixed order:
//
//   generate -> vqa_filter -> topk -> grayscale_filter      (base phase)
//   -> mask -> perturb -> attribute_filter -> sample        (perturb phase)
//
// Every stage conserves records: |kept| + |dropped| = |input|, and every drop
// carries a machine-readable reason into the manifest. Stage seeds derive
// from (base_seed, stage, record id), so identical configs give byte-identical
// manifests no matter the worker count; entries are canonically ordered by
// (occupation, stage block, record id).

#include <algorithm>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "perturbkit/adapters.hpp"
#include "perturbkit/errors.hpp"
#include "perturbkit/image.hpp"
#include "perturbkit/manifest.hpp"
#include "perturbkit/prompting.hpp"
#include "perturbkit/rng.hpp"
#include "perturbkit/types.hpp"
#include "perturbkit/util.hpp"

namespace perturbkit {

enum class GenderMode { Unspecified, Balanced };

struct PipelineConfig {
    std::vector<OccupationSpec> occupations;
    int images_per_occupation = 5000;
    int top_k = 2000;
    int sets_per_occupation = 1200;
    GenderMode gender_mode = GenderMode::Unspecified;
    std::uint64_t base_seed = 0;
    int image_width = 1024;
    int image_height = 1024;
    double box_confidence_threshold = 0.35;
    // Grayscale rule: drop when >= pixel_fraction of pixels have channel
    // spread <= spread_threshold.
    int grayscale_spread_threshold = 8;
    double grayscale_pixel_fraction = 0.99;
    int workers = 1;
    bool wall_clock_timestamps = false;
    // Opaque backend knobs (sampler steps, guidance scale, ...), forwarded to
    // adapter constructors by the config layer; the pipeline never reads them.
    nlohmann::ordered_json backend_options = nlohmann::ordered_json::object();

    void validate() const {
        if (occupations.empty()) throw ConfigError("pipeline config: no occupations");
        if (images_per_occupation <= 0)
            throw ConfigError("pipeline config: images_per_occupation must be positive");
        if (top_k <= 0 || top_k > images_per_occupation)
            throw ConfigError("pipeline config: requires 0 < top_k <= images_per_occupation");
        if (sets_per_occupation <= 0 || sets_per_occupation > top_k)
            throw ConfigError("pipeline config: requires 0 < sets_per_occupation <= top_k");
        if (image_width <= 0 || image_height <= 0)
            throw ConfigError("pipeline config: image size must be positive");
    }

    // Semantic fields only: workers and timestamp mode do not change output
    // records and stay out of the hash.
    nlohmann::ordered_json canonical_json() const {
        nlohmann::ordered_json j;
        nlohmann::ordered_json occs = nlohmann::ordered_json::array();
        for (const auto& o : occupations) {
            nlohmann::ordered_json oj;
            oj["name"] = o.name;
            oj["phrase"] = o.prompt_phrase;
            oj["vqa_subject"] = o.vqa_subject;
            oj["base_labels"] = o.base_labels;
            oj["difficult_labels"] = o.difficult_labels;
            occs.push_back(std::move(oj));
        }
        j["occupations"] = std::move(occs);
        j["images_per_occupation"] = images_per_occupation;
        j["top_k"] = top_k;
        j["sets_per_occupation"] = sets_per_occupation;
        j["gender_mode"] = gender_mode == GenderMode::Balanced ? "balanced" : "unspecified";
        j["base_seed"] = base_seed;
        j["image_width"] = image_width;
        j["image_height"] = image_height;
        j["box_confidence_threshold"] = box_confidence_threshold;
        j["grayscale_spread_threshold"] = grayscale_spread_threshold;
        j["grayscale_pixel_fraction"] = grayscale_pixel_fraction;
        j["backend_options"] = backend_options;
        return j;
    }

    std::string config_hash() const { return hex64(fnv1a64(canonical_json().dump())); }
};

struct StageDrop {
    std::string id;
    std::string reason;
};

struct StageYield {
    std::string stage;
    std::size_t input = 0;
    std::size_t kept = 0;
    std::size_t dropped = 0;
    std::map<std::string, std::size_t> drop_reasons;

    bool conserved() const { return kept + dropped == input; }
};

struct OccupationYield {
    std::string occupation;
    std::vector<StageYield> stages;
};

struct YieldReport {
    std::vector<OccupationYield> occupations;
    std::vector<std::string> warnings;

    bool conserved() const {
        for (const auto& occ : occupations)
            for (const auto& stage : occ.stages)
                if (!stage.conserved()) return false;
        return true;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        nlohmann::ordered_json occs = nlohmann::ordered_json::array();
        for (const auto& occ : occupations) {
            nlohmann::ordered_json oj;
            oj["occupation"] = occ.occupation;
            nlohmann::ordered_json stages = nlohmann::ordered_json::array();
            for (const auto& s : occ.stages) {
                nlohmann::ordered_json sj;
                sj["stage"] = s.stage;
                sj["input"] = s.input;
                sj["kept"] = s.kept;
                sj["dropped"] = s.dropped;
                sj["drop_reasons"] = s.drop_reasons;
                stages.push_back(std::move(sj));
            }
            oj["stages"] = std::move(stages);
            occs.push_back(std::move(oj));
        }
        j["occupations"] = std::move(occs);
        j["warnings"] = warnings;
        return j;
    }

    static YieldReport from_json(const nlohmann::ordered_json& j) {
        YieldReport report;
        for (const auto& oj : j.at("occupations")) {
            OccupationYield occ;
            occ.occupation = oj.at("occupation").get<std::string>();
            for (const auto& sj : oj.at("stages")) {
                StageYield s;
                s.stage = sj.at("stage").get<std::string>();
                s.input = sj.at("input").get<std::size_t>();
                s.kept = sj.at("kept").get<std::size_t>();
                s.dropped = sj.at("dropped").get<std::size_t>();
                for (const auto& [reason, count] : sj.at("drop_reasons").items())
                    s.drop_reasons[reason] = count.get<std::size_t>();
                occ.stages.push_back(std::move(s));
            }
            report.occupations.push_back(std::move(occ));
        }
        if (j.contains("warnings"))
            report.warnings = j.at("warnings").get<std::vector<std::string>>();
        return report;
    }

    std::string to_text() const {
        std::string out;
        for (const auto& occ : occupations) {
            out += "occupation: " + occ.occupation + "\n";
            out += "  stage              input   kept   dropped\n";
            for (const auto& s : occ.stages) {
                char line[128];
                std::snprintf(line, sizeof(line), "  %-18s %6zu %6zu %9zu\n", s.stage.c_str(),
                              s.input, s.kept, s.dropped);
                out += line;
                for (const auto& [reason, count] : s.drop_reasons)
                    out += "      " + reason + ": " + std::to_string(count) + "\n";
            }
        }
        if (!warnings.empty()) {
            out += "warnings:\n";
            for (const auto& w : warnings) out += "  " + w + "\n";
        }
        return out;
    }
};

// --- individual stages ---------------------------------------------------------

struct GenerateOutcome {
    std::vector<BaseImageRecord> records;
    std::vector<StageDrop> drops;
};

inline GenerateOutcome stage_generate(const PipelineConfig& config, const OccupationSpec& occupation,
                                      ImageGenerator& generator) {
    const std::size_t count = static_cast<std::size_t>(config.images_per_occupation);
    std::vector<std::optional<BaseImageRecord>> slots(count);
    std::vector<std::optional<StageDrop>> failures(count);

    parallel_for(count, config.workers, [&](std::size_t index) {
        char suffix[16];
        std::snprintf(suffix, sizeof(suffix), "%06zu", index);
        BaseImageRecord rec;
        rec.base_id = occupation.name + "-" + suffix;
        rec.occupation = occupation.name;
        rec.seed = config.base_seed + index;
        if (config.gender_mode == GenderMode::Balanced)
            rec.gender = index % 2 == 0 ? Gender::Male : Gender::Female;
        rec.prompt = build_base_prompt(occupation, rec.gender);
        try {
            rec.image_ref = generator.generate(rec.prompt, rec.seed, config.image_width,
                                               config.image_height);
            slots[index] = std::move(rec);
        } catch (const AdapterError& ex) {
            failures[index] = StageDrop{rec.base_id, std::string("backend_error: ") + ex.what()};
        }
    });

    GenerateOutcome outcome;
    for (auto& slot : slots)
        if (slot) outcome.records.push_back(std::move(*slot));
    for (auto& failure : failures)
        if (failure) outcome.drops.push_back(std::move(*failure));
    // A complete blank means the backend is down, not a yield problem.
    if (outcome.records.empty() && !outcome.drops.empty())
        throw AdapterError("generate: every image failed for " + occupation.name + "; first: " +
                           outcome.drops.front().reason);
    if (outcome.records.size() < static_cast<std::size_t>(config.top_k))
        throw PipelineError("generate: only " + std::to_string(outcome.records.size()) + " of " +
                            std::to_string(count) + " images generated for " + occupation.name +
                            " (top_k = " + std::to_string(config.top_k) + ")");
    return outcome;
}

struct FilterOutcome {
    std::vector<BaseImageRecord> kept;
    std::vector<BaseImageRecord> rejected;  // updated records that did not pass
    std::vector<StageDrop> drops;
    std::vector<std::string> warnings;
};

// Asks all three questions of every image (the record keeps all answers even
// when dropped), then keeps those answering yes to the faithfulness question
// and no to the limb-distortion question.
inline FilterOutcome stage_vqa_filter(const PipelineConfig& config, const OccupationSpec& occupation,
                                      std::vector<BaseImageRecord> records, VQAModel& vqa) {
    const std::string q1 = vqa_question_occupation(occupation);
    FilterOutcome outcome;
    std::vector<std::optional<std::string>> errors(records.size());

    parallel_for(records.size(), config.workers, [&](std::size_t i) {
        BaseImageRecord& rec = records[i];
        try {
            rec.vqa_q1 = vqa.answer(rec.image_ref, q1);
            rec.vqa_q2 = vqa.answer(rec.image_ref, std::string(kVqaQuestionLimbs));
            const VQAResult q3 = vqa.answer(rec.image_ref, std::string(kVqaQuestionRealism));
            // Score for "this image is real": confidence as returned when the
            // backend answers real, complemented otherwise.
            rec.vqa_q3_score = starts_with_ci(q3.answer, "real")
                                   ? std::clamp(q3.score, 0.0, 1.0)
                                   : std::clamp(1.0 - q3.score, 0.0, 1.0);
        } catch (const AdapterError& ex) {
            errors[i] = ex.what();
        }
    });

    for (std::size_t i = 0; i < records.size(); ++i) {
        BaseImageRecord& rec = records[i];
        if (errors[i]) {
            outcome.drops.push_back({rec.base_id, std::string("backend_error: ") + *errors[i]});
            outcome.rejected.push_back(std::move(rec));
        } else if (!answer_is_yes(rec.vqa_q1->answer)) {
            outcome.drops.push_back({rec.base_id, "filtered_q1_no"});
            outcome.rejected.push_back(std::move(rec));
        } else if (!answer_is_no(rec.vqa_q2->answer)) {
            outcome.drops.push_back({rec.base_id, "filtered_q2_yes"});
            outcome.rejected.push_back(std::move(rec));
        } else {
            outcome.kept.push_back(std::move(rec));
        }
    }
    return outcome;
}

// Highest realism score first; ties broken by base_id ascending.
inline FilterOutcome stage_select_topk(std::vector<BaseImageRecord> records, std::size_t k) {
    for (const auto& rec : records)
        if (!rec.vqa_q3_score)
            throw ValidationError("topk: record " + rec.base_id + " is missing vqa_q3_score");
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        if (*a.vqa_q3_score != *b.vqa_q3_score) return *a.vqa_q3_score > *b.vqa_q3_score;
        return a.base_id < b.base_id;
    });
    FilterOutcome outcome;
    if (records.size() <= k) {
        if (records.size() < k)
            outcome.warnings.push_back("topk: only " + std::to_string(records.size()) +
                                       " candidates for k = " + std::to_string(k));
        outcome.kept = std::move(records);
        std::sort(outcome.kept.begin(), outcome.kept.end(),
                  [](const auto& a, const auto& b) { return a.base_id < b.base_id; });
        return outcome;
    }
    outcome.kept.assign(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(k));
    for (auto it = records.begin() + static_cast<std::ptrdiff_t>(k); it != records.end(); ++it) {
        outcome.drops.push_back({it->base_id, "filtered_topk"});
        outcome.rejected.push_back(std::move(*it));
    }
    std::sort(outcome.kept.begin(), outcome.kept.end(),
              [](const auto& a, const auto& b) { return a.base_id < b.base_id; });
    return outcome;
}

inline FilterOutcome stage_grayscale_filter(const PipelineConfig& config,
                                            const std::filesystem::path& root,
                                            std::vector<BaseImageRecord> records) {
    FilterOutcome outcome;
    std::vector<std::optional<bool>> gray(records.size());
    std::vector<std::optional<std::string>> errors(records.size());
    parallel_for(records.size(), config.workers, [&](std::size_t i) {
        try {
            gray[i] = is_grayscale(read_png(root / records[i].image_ref),
                                   config.grayscale_spread_threshold,
                                   config.grayscale_pixel_fraction);
        } catch (const std::exception& ex) {
            errors[i] = ex.what();
        }
    });
    for (std::size_t i = 0; i < records.size(); ++i) {
        BaseImageRecord& rec = records[i];
        if (errors[i]) {
            outcome.drops.push_back({rec.base_id, std::string("unreadable_image: ") + *errors[i]});
            outcome.rejected.push_back(std::move(rec));
            continue;
        }
        rec.grayscale = gray[i];
        if (*rec.grayscale) {
            outcome.drops.push_back({rec.base_id, "filtered_grayscale"});
            outcome.rejected.push_back(std::move(rec));
        } else {
            rec.selected = true;  // survived the whole base phase
            outcome.kept.push_back(std::move(rec));
        }
    }
    return outcome;
}

struct MaskOutcome {
    std::vector<MaskRecord> masks;
    std::vector<StageDrop> drops;
};

// Union of segmentation masks over all person boxes at or above the
// confidence threshold. Images with no usable box are dropped.
inline MaskOutcome stage_mask(const PipelineConfig& config, const std::filesystem::path& root,
                              const std::vector<BaseImageRecord>& records, PersonDetector& detector,
                              Segmenter& segmenter) {
    MaskOutcome outcome;
    std::vector<std::optional<MaskRecord>> slots(records.size());
    std::vector<std::optional<StageDrop>> failures(records.size());

    parallel_for(records.size(), config.workers, [&](std::size_t i) {
        const BaseImageRecord& rec = records[i];
        try {
            std::vector<BoundingBox> boxes = detector.detect(rec.image_ref, "person");
            std::erase_if(boxes, [&](const BoundingBox& b) {
                return b.confidence < config.box_confidence_threshold ||
                       std::lround(b.x1) - std::lround(b.x0) < 1 ||
                       std::lround(b.y1) - std::lround(b.y0) < 1;
            });
            if (boxes.empty()) {
                failures[i] = StageDrop{rec.base_id, "no_person_box"};
                return;
            }
            Image merged;
            for (const BoundingBox& box : boxes) {
                const Image part = read_png(root / segmenter.segment(rec.image_ref, box));
                if (merged.width == 0) {
                    merged = part;
                } else {
                    if (part.width != merged.width || part.height != merged.height ||
                        part.channels != merged.channels)
                        throw AdapterError("segmenter returned a mask with mismatched resolution");
                    for (std::size_t p = 0; p < merged.pixels.size(); ++p)
                        if (part.pixels[p] != 0) merged.pixels[p] = 255;
                }
            }
            bool nonempty = false;
            for (auto px : merged.pixels) nonempty |= px != 0;
            if (!nonempty) {
                failures[i] = StageDrop{rec.base_id, "empty_mask"};
                return;
            }
            MaskRecord mask;
            mask.base_id = rec.base_id;
            mask.width = merged.width;
            mask.height = merged.height;
            mask.boxes = boxes;
            mask.mask_ref = "masks/" + rec.base_id + ".png";
            write_png(merged, root / mask.mask_ref);
            slots[i] = std::move(mask);
        } catch (const AdapterError& ex) {
            failures[i] = StageDrop{rec.base_id, std::string("backend_error: ") + ex.what()};
        } catch (const std::invalid_argument& ex) {
            failures[i] = StageDrop{rec.base_id, std::string("backend_error: ") + ex.what()};
        }
    });

    for (auto& slot : slots)
        if (slot) outcome.masks.push_back(std::move(*slot));
    for (auto& failure : failures)
        if (failure) outcome.drops.push_back(std::move(*failure));
    return outcome;
}

struct PerturbOutcome {
    std::vector<PerturbationSet> sets;
    std::vector<StageDrop> drops;
};

// One inpainted variant per demographic group; a set is only emitted when all
// four variants succeed.
inline PerturbOutcome stage_perturb(const PipelineConfig& config, const OccupationSpec& occupation,
                                    const std::vector<BaseImageRecord>& records,
                                    const std::vector<MaskRecord>& masks, Inpainter& inpainter) {
    std::map<std::string, const BaseImageRecord*> by_id;
    for (const auto& rec : records) by_id[rec.base_id] = &rec;

    PerturbOutcome outcome;
    std::vector<std::optional<PerturbationSet>> slots(masks.size());
    std::vector<std::optional<StageDrop>> failures(masks.size());

    parallel_for(masks.size(), config.workers, [&](std::size_t i) {
        const MaskRecord& mask = masks[i];
        const auto it = by_id.find(mask.base_id);
        if (it == by_id.end()) {
            failures[i] = StageDrop{mask.base_id, "missing_base_record"};
            return;
        }
        const BaseImageRecord& base = *it->second;
        PerturbationSet set;
        set.set_id = "set-" + hex64(fnv1a64(base.base_id));
        set.occupation = occupation.name;
        set.base_id = base.base_id;
        set.gender = base.gender;
        try {
            for (DemographicGroup group : kAllGroups) {
                PerturbationVariant variant;
                variant.prompt = build_perturbed_prompt(occupation, group, base.gender);
                variant.seed = derive_seed(config.base_seed,
                                           "perturb/" + std::string(canonical_name(group)),
                                           base.base_id);
                variant.image_ref =
                    inpainter.inpaint(base.image_ref, mask.mask_ref, variant.prompt, variant.seed);
                set.variants[group] = std::move(variant);
            }
            slots[i] = std::move(set);
        } catch (const AdapterError& ex) {
            failures[i] = StageDrop{set.set_id, std::string("variant_failed: ") + ex.what()};
        }
    });

    for (auto& slot : slots)
        if (slot) outcome.sets.push_back(std::move(*slot));
    for (auto& failure : failures)
        if (failure) outcome.drops.push_back(std::move(*failure));
    return outcome;
}

struct AttributeOutcome {
    std::vector<PerturbationSet> kept;
    std::vector<PerturbationSet> rejected;  // flag-annotated sets that failed
    std::vector<StageDrop> drops;
};

// A set survives only when every variant is classified to its intended group.
inline AttributeOutcome stage_attribute_filter(const PipelineConfig& config,
                                               std::vector<PerturbationSet> sets,
                                               RaceClassifier& classifier) {
    std::vector<std::optional<std::string>> failure_reason(sets.size());
    parallel_for(sets.size(), config.workers, [&](std::size_t i) {
        PerturbationSet& set = sets[i];
        for (auto& [group, variant] : set.variants) {
            try {
                const DemographicGroup observed = classifier.classify(variant.image_ref);
                variant.attribute_label = observed;
                variant.passed = observed == group;
            } catch (const NoFaceError&) {
                variant.attribute_label = std::nullopt;
                variant.passed = false;
                if (!failure_reason[i])
                    failure_reason[i] = "no_face: " + std::string(canonical_name(group));
            } catch (const AdapterError& ex) {
                variant.attribute_label = std::nullopt;
                variant.passed = false;
                if (!failure_reason[i])
                    failure_reason[i] = std::string("backend_error: ") + ex.what();
            }
        }
    });

    AttributeOutcome outcome;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        PerturbationSet& set = sets[i];
        bool all_passed = true;
        for (const auto& [group, variant] : set.variants) all_passed &= variant.passed;
        if (all_passed) {
            outcome.kept.push_back(std::move(set));
        } else {
            outcome.drops.push_back(
                {set.set_id, failure_reason[i] ? *failure_reason[i] : "attribute_mismatch"});
            outcome.rejected.push_back(std::move(set));
        }
    }
    return outcome;
}

struct SampleOutcome {
    std::vector<PerturbationSet> sets;  // every input set, sampled flags final
    std::vector<StageDrop> drops;       // reason "not_sampled"
    std::vector<std::string> warnings;
    std::size_t sampled = 0;
};

// Uniform seeded sample without replacement; in balanced mode the quota is
// split per gender (n/2 each).
inline SampleOutcome stage_sample(const PipelineConfig& config, const OccupationSpec& occupation,
                                  std::vector<PerturbationSet> sets) {
    std::sort(sets.begin(), sets.end(),
              [](const auto& a, const auto& b) { return a.set_id < b.set_id; });
    const std::size_t n = static_cast<std::size_t>(config.sets_per_occupation);

    std::set<std::string> chosen;
    SampleOutcome outcome;
    auto pick = [&](const std::vector<std::string>& ids, std::size_t want,
                    const std::string& stream) {
        if (ids.size() < want)
            outcome.warnings.push_back("sample: " + occupation.name + " (" + stream + "): only " +
                                       std::to_string(ids.size()) + " surviving sets for n = " +
                                       std::to_string(want));
        for (auto& id : sample_without_replacement(
                 ids, want, derive_seed(config.base_seed, "sample/" + stream, occupation.name)))
            chosen.insert(std::move(id));
    };

    if (config.gender_mode == GenderMode::Balanced) {
        std::vector<std::string> male, female;
        for (const auto& set : sets) {
            if (set.gender == Gender::Male) male.push_back(set.set_id);
            else if (set.gender == Gender::Female) female.push_back(set.set_id);
        }
        pick(male, n / 2, "male");
        pick(female, n - n / 2, "female");
    } else {
        std::vector<std::string> ids;
        for (const auto& set : sets) ids.push_back(set.set_id);
        pick(ids, n, "all");
    }

    for (auto& set : sets) {
        set.sampled = chosen.count(set.set_id) > 0;
        if (set.sampled) ++outcome.sampled;
        else outcome.drops.push_back({set.set_id, "not_sampled"});
    }
    outcome.sets = std::move(sets);
    return outcome;
}

// --- phase orchestration ---------------------------------------------------------

struct PipelineResult {
    Manifest manifest;
    YieldReport yields;
};

namespace pipeline_detail {

inline std::string now_iso8601() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

inline std::string stamp(const PipelineConfig& config) {
    return config.wall_clock_timestamps ? now_iso8601() : std::string(kDeterministicTimestamp);
}

inline const std::string& sort_id(const BaseImageRecord& r) { return r.base_id; }
inline const std::string& sort_id(const MaskRecord& r) { return r.base_id; }
inline const std::string& sort_id(const PerturbationSet& r) { return r.set_id; }

template <typename Record>
void append_records(Manifest& manifest, const std::string& stage, const std::string& ts,
                    std::vector<Record> records) {
    std::sort(records.begin(), records.end(),
              [](const auto& a, const auto& b) { return sort_id(a) < sort_id(b); });
    for (auto& rec : records) manifest.entries.push_back({stage, ts, std::move(rec)});
}

inline void append_drops(Manifest& manifest, const std::string& stage, const std::string& ts,
                         std::vector<StageDrop> drops) {
    std::sort(drops.begin(), drops.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    for (auto& d : drops)
        manifest.entries.push_back({stage, ts, DropRecord{std::move(d.id), std::move(d.reason)}});
}

inline StageYield yield_of(const std::string& stage, std::size_t input, std::size_t kept,
                           const std::vector<StageDrop>& drops) {
    StageYield y;
    y.stage = stage;
    y.input = input;
    y.kept = kept;
    y.dropped = drops.size();
    for (const auto& d : drops) {
        // Aggregate on the token before any ':' detail suffix.
        const auto colon = d.reason.find(':');
        ++y.drop_reasons[colon == std::string::npos ? d.reason : d.reason.substr(0, colon)];
    }
    return y;
}

inline void require_survivors(const std::vector<StageYield>& stages, const std::string& occupation) {
    const StageYield& last = stages.back();
    if (last.kept == 0)
        throw PipelineError("stage " + last.stage + ": zero survivors for occupation " +
                            occupation);
}

}  // namespace pipeline_detail

// Stages generate .. grayscale_filter for every configured occupation.
inline PipelineResult run_generate_phase(const PipelineConfig& config, const AdapterSuite& adapters,
                                         const std::filesystem::path& root) {
    config.validate();
    if (!adapters.generator || !adapters.vqa)
        throw ConfigError("generate phase requires generator and vqa adapters");
    const std::string ts = pipeline_detail::stamp(config);

    PipelineResult result;
    result.manifest.pipeline_config_hash = config.config_hash();
    for (const OccupationSpec& occupation : config.occupations) {
        OccupationYield yields;
        yields.occupation = occupation.name;

        GenerateOutcome generated = stage_generate(config, occupation, *adapters.generator);
        yields.stages.push_back(pipeline_detail::yield_of(
            "generate", static_cast<std::size_t>(config.images_per_occupation),
            generated.records.size(), generated.drops));
        pipeline_detail::require_survivors(yields.stages, occupation.name);

        FilterOutcome vqa = stage_vqa_filter(config, occupation, std::move(generated.records),
                                             *adapters.vqa);
        yields.stages.push_back(
            pipeline_detail::yield_of("vqa_filter", yields.stages.back().kept, vqa.kept.size(),
                                      vqa.drops));
        pipeline_detail::require_survivors(yields.stages, occupation.name);

        FilterOutcome topk = stage_select_topk(std::move(vqa.kept),
                                               static_cast<std::size_t>(config.top_k));
        yields.stages.push_back(pipeline_detail::yield_of("topk", yields.stages.back().kept,
                                                          topk.kept.size(), topk.drops));
        pipeline_detail::require_survivors(yields.stages, occupation.name);

        FilterOutcome gray = stage_grayscale_filter(config, root, std::move(topk.kept));
        yields.stages.push_back(pipeline_detail::yield_of(
            "grayscale_filter", yields.stages.back().kept, gray.kept.size(), gray.drops));
        pipeline_detail::require_survivors(yields.stages, occupation.name);

        // Final state of every generated record, kept and rejected alike.
        std::vector<BaseImageRecord> all_records = std::move(gray.kept);
        for (auto& v : vqa.rejected) all_records.push_back(std::move(v));
        for (auto& v : topk.rejected) all_records.push_back(std::move(v));
        for (auto& v : gray.rejected) all_records.push_back(std::move(v));
        pipeline_detail::append_records(result.manifest, "generate", ts, std::move(all_records));
        pipeline_detail::append_drops(result.manifest, "generate", ts, std::move(generated.drops));
        pipeline_detail::append_drops(result.manifest, "vqa_filter", ts, std::move(vqa.drops));
        pipeline_detail::append_drops(result.manifest, "topk", ts, std::move(topk.drops));
        pipeline_detail::append_drops(result.manifest, "grayscale_filter", ts, std::move(gray.drops));

        for (auto& w : vqa.warnings) result.yields.warnings.push_back(w);
        for (auto& w : topk.warnings) result.yields.warnings.push_back(w);
        result.yields.occupations.push_back(std::move(yields));
    }
    return result;
}

// Stages mask .. sample, continuing from a base-phase manifest. Appends to
// `base` so the combined result is identical to a single full run.
inline PipelineResult run_perturb_phase(const PipelineConfig& config, const AdapterSuite& adapters,
                                        const std::filesystem::path& root, PipelineResult base) {
    config.validate();
    if (!adapters.detector || !adapters.segmenter || !adapters.inpainter ||
        !adapters.race_classifier)
        throw ConfigError(
            "perturb phase requires detector, segmenter, inpainter, and race_classifier adapters");
    const std::string ts = pipeline_detail::stamp(config);

    if (base.manifest.pipeline_config_hash != config.config_hash())
        base.yields.warnings.push_back("perturb phase: config hash differs from the base manifest");

    std::map<std::string, std::vector<BaseImageRecord>> selected_by_occupation;
    for (const BaseImageRecord* rec : base.manifest.base_images(/*selected_only=*/true))
        selected_by_occupation[rec->occupation].push_back(*rec);

    base.yields.occupations.reserve(base.yields.occupations.size() + config.occupations.size());
    std::map<std::string, OccupationYield*> yields_by_occupation;
    for (auto& occ : base.yields.occupations) yields_by_occupation[occ.occupation] = &occ;

    for (const OccupationSpec& occupation : config.occupations) {
        auto selected_it = selected_by_occupation.find(occupation.name);
        if (selected_it == selected_by_occupation.end())
            throw PipelineError("perturb phase: no selected base images for occupation " +
                                occupation.name);
        const std::vector<BaseImageRecord>& selected = selected_it->second;

        OccupationYield* yields = nullptr;
        if (auto it = yields_by_occupation.find(occupation.name); it != yields_by_occupation.end()) {
            yields = it->second;
        } else {
            base.yields.occupations.push_back({occupation.name, {}});
            yields = &base.yields.occupations.back();
            yields_by_occupation[occupation.name] = yields;
        }

        MaskOutcome masks = stage_mask(config, root, selected, *adapters.detector,
                                       *adapters.segmenter);
        yields->stages.push_back(pipeline_detail::yield_of("mask", selected.size(),
                                                           masks.masks.size(), masks.drops));
        pipeline_detail::require_survivors(yields->stages, occupation.name);

        PerturbOutcome perturbed = stage_perturb(config, occupation, selected, masks.masks,
                                                 *adapters.inpainter);
        yields->stages.push_back(pipeline_detail::yield_of("perturb", masks.masks.size(),
                                                           perturbed.sets.size(), perturbed.drops));
        pipeline_detail::require_survivors(yields->stages, occupation.name);

        AttributeOutcome attributed = stage_attribute_filter(config, std::move(perturbed.sets),
                                                             *adapters.race_classifier);
        yields->stages.push_back(pipeline_detail::yield_of("attribute_filter",
                                                           yields->stages.back().kept,
                                                           attributed.kept.size(),
                                                           attributed.drops));
        pipeline_detail::require_survivors(yields->stages, occupation.name);

        SampleOutcome sampled = stage_sample(config, occupation, std::move(attributed.kept));
        yields->stages.push_back(pipeline_detail::yield_of("sample", yields->stages.back().kept,
                                                           sampled.sampled, sampled.drops));
        pipeline_detail::require_survivors(yields->stages, occupation.name);

        std::vector<PerturbationSet> all_sets = std::move(sampled.sets);
        for (auto& s : attributed.rejected) all_sets.push_back(std::move(s));
        pipeline_detail::append_records(base.manifest, "mask", ts, std::move(masks.masks));
        pipeline_detail::append_drops(base.manifest, "mask", ts, std::move(masks.drops));
        pipeline_detail::append_records(base.manifest, "perturb", ts, std::move(all_sets));
        pipeline_detail::append_drops(base.manifest, "perturb", ts, std::move(perturbed.drops));
        pipeline_detail::append_drops(base.manifest, "attribute_filter", ts,
                                      std::move(attributed.drops));
        pipeline_detail::append_drops(base.manifest, "sample", ts, std::move(sampled.drops));
        for (auto& w : sampled.warnings) base.yields.warnings.push_back(w);
    }
    return base;
}

inline PipelineResult run_pipeline(const PipelineConfig& config, const AdapterSuite& adapters,
                                   const std::filesystem::path& root) {
    return run_perturb_phase(config, adapters, root,
                             run_generate_phase(config, adapters, root));
}

}  // namespace perturbkit
