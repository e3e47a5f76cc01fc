#pragma once
// Append-only JSONL manifest. One JSON object per line, snake_case fields in
// a fixed order, with a `kind` discriminator. Serialization is lossless:
// read(write(r)) == r for every valid record.
//
// An optional header line (kind = "header") carries the pipeline config hash.
// Timestamps default to a fixed epoch string so that re-runs with the same
// seed produce byte-identical files; wall-clock stamps are opt-in.

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "perturbkit/errors.hpp"
#include "perturbkit/types.hpp"
#include "perturbkit/util.hpp"

namespace perturbkit {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kDeterministicTimestamp = "1970-01-01T00:00:00Z";

using ManifestRecord = std::variant<BaseImageRecord, MaskRecord, PerturbationSet, DropRecord>;

struct ManifestEntry {
    std::string stage;      // pipeline stage that emitted the record
    std::string timestamp;  // ISO-8601
    ManifestRecord record;

    bool operator==(const ManifestEntry&) const = default;
};

namespace detail {

inline Json gender_to_json(const std::optional<Gender>& g) {
    return g ? Json(std::string(gender_name(*g))) : Json(nullptr);
}

inline std::optional<Gender> gender_from_json(const Json& j, std::string_view context) {
    if (j.is_null()) return std::nullopt;
    if (auto g = gender_from_name(j.get<std::string>())) return g;
    throw ValidationError(std::string(context) + ": unknown gender value");
}

inline Json vqa_to_json(const std::optional<VQAResult>& r) {
    if (!r) return Json(nullptr);
    Json j;
    j["answer"] = r->answer;
    j["score"] = r->score;
    return j;
}

inline std::optional<VQAResult> vqa_from_json(const Json& j) {
    if (j.is_null()) return std::nullopt;
    return VQAResult{j.at("answer").get<std::string>(), j.at("score").get<double>()};
}

inline Json box_to_json(const BoundingBox& b) {
    Json j;
    j["x0"] = b.x0;
    j["y0"] = b.y0;
    j["x1"] = b.x1;
    j["y1"] = b.y1;
    j["confidence"] = b.confidence;
    return j;
}

inline BoundingBox box_from_json(const Json& j) {
    return BoundingBox{j.at("x0").get<double>(), j.at("y0").get<double>(),
                       j.at("x1").get<double>(), j.at("y1").get<double>(),
                       j.at("confidence").get<double>()};
}

}  // namespace detail

inline Json to_json(const BaseImageRecord& r) {
    Json j;
    j["kind"] = "base_image";
    j["base_id"] = r.base_id;
    j["occupation"] = r.occupation;
    j["prompt"] = r.prompt;
    j["seed"] = r.seed;
    j["image_ref"] = r.image_ref;
    j["gender"] = detail::gender_to_json(r.gender);
    j["vqa_q1"] = detail::vqa_to_json(r.vqa_q1);
    j["vqa_q2"] = detail::vqa_to_json(r.vqa_q2);
    j["vqa_q3_score"] = r.vqa_q3_score ? Json(*r.vqa_q3_score) : Json(nullptr);
    j["grayscale"] = r.grayscale ? Json(*r.grayscale) : Json(nullptr);
    j["selected"] = r.selected;
    return j;
}

inline BaseImageRecord base_image_from_json(const Json& j) {
    BaseImageRecord r;
    r.base_id = j.at("base_id").get<std::string>();
    r.occupation = j.at("occupation").get<std::string>();
    r.prompt = j.at("prompt").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.image_ref = j.at("image_ref").get<std::string>();
    r.gender = detail::gender_from_json(j.at("gender"), r.base_id);
    r.vqa_q1 = detail::vqa_from_json(j.at("vqa_q1"));
    r.vqa_q2 = detail::vqa_from_json(j.at("vqa_q2"));
    if (!j.at("vqa_q3_score").is_null()) r.vqa_q3_score = j.at("vqa_q3_score").get<double>();
    if (!j.at("grayscale").is_null()) r.grayscale = j.at("grayscale").get<bool>();
    r.selected = j.at("selected").get<bool>();
    return r;
}

inline Json to_json(const MaskRecord& r) {
    Json j;
    j["kind"] = "mask";
    j["base_id"] = r.base_id;
    j["width"] = r.width;
    j["height"] = r.height;
    j["boxes"] = Json::array();
    for (const auto& b : r.boxes) j["boxes"].push_back(detail::box_to_json(b));
    j["mask_ref"] = r.mask_ref;
    return j;
}

inline MaskRecord mask_from_json(const Json& j) {
    MaskRecord r;
    r.base_id = j.at("base_id").get<std::string>();
    r.width = j.at("width").get<int>();
    r.height = j.at("height").get<int>();
    for (const auto& b : j.at("boxes")) r.boxes.push_back(detail::box_from_json(b));
    r.mask_ref = j.at("mask_ref").get<std::string>();
    return r;
}

inline Json to_json(const PerturbationSet& s) {
    Json j;
    j["kind"] = "perturbation_set";
    j["set_id"] = s.set_id;
    j["occupation"] = s.occupation;
    j["base_id"] = s.base_id;
    j["gender"] = detail::gender_to_json(s.gender);
    Json variants;
    for (const auto& [group, v] : s.variants) {
        Json vj;
        vj["image_ref"] = v.image_ref;
        vj["prompt"] = v.prompt;
        vj["seed"] = v.seed;
        vj["attribute_label"] =
            v.attribute_label ? Json(std::string(canonical_name(*v.attribute_label))) : Json(nullptr);
        vj["passed"] = v.passed;
        variants[std::string(canonical_name(group))] = std::move(vj);
    }
    j["variants"] = std::move(variants);
    j["sampled"] = s.sampled;
    return j;
}

inline PerturbationSet set_from_json(const Json& j) {
    PerturbationSet s;
    s.set_id = j.at("set_id").get<std::string>();
    s.occupation = j.at("occupation").get<std::string>();
    s.base_id = j.at("base_id").get<std::string>();
    s.gender = detail::gender_from_json(j.at("gender"), s.set_id);
    for (const auto& [key, vj] : j.at("variants").items()) {
        PerturbationVariant v;
        v.image_ref = vj.at("image_ref").get<std::string>();
        v.prompt = vj.at("prompt").get<std::string>();
        v.seed = vj.at("seed").get<std::uint64_t>();
        if (!vj.at("attribute_label").is_null())
            v.attribute_label = require_group(vj.at("attribute_label").get<std::string>());
        v.passed = vj.at("passed").get<bool>();
        s.variants[require_group(key)] = std::move(v);
    }
    s.sampled = j.at("sampled").get<bool>();
    return s;
}

inline Json to_json(const DropRecord& r) {
    Json j;
    j["kind"] = "drop";
    j["id"] = r.id;
    j["reason"] = r.reason;
    return j;
}

inline DropRecord drop_from_json(const Json& j) {
    return DropRecord{j.at("id").get<std::string>(), j.at("reason").get<std::string>()};
}

inline std::string record_kind(const ManifestRecord& r) {
    if (std::holds_alternative<BaseImageRecord>(r)) return "base_image";
    if (std::holds_alternative<MaskRecord>(r)) return "mask";
    if (std::holds_alternative<PerturbationSet>(r)) return "perturbation_set";
    return "drop";
}

inline std::string record_id(const ManifestRecord& r) {
    if (const auto* b = std::get_if<BaseImageRecord>(&r)) return b->base_id;
    if (const auto* m = std::get_if<MaskRecord>(&r)) return m->base_id;
    if (const auto* s = std::get_if<PerturbationSet>(&r)) return s->set_id;
    return std::get<DropRecord>(r).id;
}

inline Json to_json(const ManifestEntry& e) {
    Json j = std::visit([](const auto& rec) { return to_json(rec); }, e.record);
    j["stage"] = e.stage;
    j["ts"] = e.timestamp;
    return j;
}

inline ManifestEntry entry_from_json(const Json& j) {
    ManifestEntry e;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "base_image") e.record = base_image_from_json(j);
    else if (kind == "mask") e.record = mask_from_json(j);
    else if (kind == "perturbation_set") e.record = set_from_json(j);
    else if (kind == "drop") e.record = drop_from_json(j);
    else throw ValidationError("unknown manifest record kind: " + kind);
    e.stage = j.at("stage").get<std::string>();
    e.timestamp = j.at("ts").get<std::string>();
    return e;
}

// Throws ValidationError naming the record id and offending field.
inline void validate_entries(const std::vector<ManifestEntry>& entries) {
    std::map<std::string, std::set<std::string>> seen;  // kind -> ids
    for (const ManifestEntry& e : entries) {
        const std::string kind = record_kind(e.record);
        const std::string id = record_id(e.record);
        if (!seen[kind].insert(id).second)
            throw ValidationError("record " + id + ": duplicate id for kind " + kind);
        std::vector<std::string> violations;
        if (const auto* b = std::get_if<BaseImageRecord>(&e.record)) violations = validate_record(*b);
        else if (const auto* m = std::get_if<MaskRecord>(&e.record)) violations = validate_record(*m);
        else if (const auto* s = std::get_if<PerturbationSet>(&e.record)) violations = validate_set(*s);
        if (!violations.empty())
            throw ValidationError("record " + id + ": " + violations.front());
    }
}

inline void write_manifest(const std::vector<ManifestEntry>& entries,
                           const std::filesystem::path& path) {
    validate_entries(entries);
    ensure_parent_dir(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open manifest for writing: " + path.string());
    for (const ManifestEntry& e : entries) out << to_json(e).dump() << '\n';
    if (!out) throw IoError("manifest write failed: " + path.string());
}

struct Manifest {
    std::string pipeline_config_hash;
    std::vector<ManifestEntry> entries;

    bool operator==(const Manifest&) const = default;

    void save(const std::filesystem::path& path) const {
        validate_entries(entries);
        ensure_parent_dir(path);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot open manifest for writing: " + path.string());
        Json header;
        header["kind"] = "header";
        header["pipeline_config_hash"] = pipeline_config_hash;
        out << header.dump() << '\n';
        for (const ManifestEntry& e : entries) out << to_json(e).dump() << '\n';
        if (!out) throw IoError("manifest write failed: " + path.string());
    }

    static Manifest load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open manifest for reading: " + path.string());
        Manifest m;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            Json j;
            try {
                j = Json::parse(line);
            } catch (const std::exception& ex) {
                throw ValidationError("manifest line " + std::to_string(line_no) +
                                      ": invalid JSON (" + ex.what() + ")");
            }
            const std::string kind = j.value("kind", "");
            if (kind == "header") {
                m.pipeline_config_hash = j.at("pipeline_config_hash").get<std::string>();
                continue;
            }
            try {
                m.entries.push_back(entry_from_json(j));
            } catch (const ValidationError&) {
                throw;
            } catch (const std::exception& ex) {
                throw ValidationError("manifest line " + std::to_string(line_no) + ": " + ex.what());
            }
        }
        return m;
    }

    std::vector<const PerturbationSet*> sets(bool sampled_only) const {
        std::vector<const PerturbationSet*> out;
        for (const ManifestEntry& e : entries)
            if (const auto* s = std::get_if<PerturbationSet>(&e.record))
                if (!sampled_only || s->sampled) out.push_back(s);
        return out;
    }

    std::vector<const BaseImageRecord*> base_images(bool selected_only) const {
        std::vector<const BaseImageRecord*> out;
        for (const ManifestEntry& e : entries)
            if (const auto* b = std::get_if<BaseImageRecord>(&e.record))
                if (!selected_only || b->selected) out.push_back(b);
        return out;
    }
};

inline std::vector<ManifestEntry> read_manifest_entries(const std::filesystem::path& path) {
    return Manifest::load(path).entries;
}

}  // namespace perturbkit
