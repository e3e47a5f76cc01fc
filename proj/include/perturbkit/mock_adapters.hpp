#pragma once
// Deterministic mock backends. Every mock is a pure function of its inputs,
// its options, and the content it reads from disk, so re-running a pipeline
// with the same seed reproduces every byte.
//
// Mock config file schema (all sections and fields optional):
// {
//   "generator":  { "grayscale_every": 0, "fail_every": 0, "fail_seeds": [7, 9] },
//   "inpainter":  { },
//   "vqa": {
//     "table": [ { "image": "x.png", "question": "...", "answer": "yes", "score": 0.9 } ],
//     "rules": [ { "question_contains": "Is there",        "yes_rate": 0.85 },
//                { "question_contains": "limbs distorted", "yes_rate": 0.10 },
//                { "question_contains": "real or fake",    "real_rate": 0.90 } ]
//   },
//   "detector": {
//     "default_box": { "x0": 0.25, "y0": 0.15, "x1": 0.80, "y1": 0.95, "confidence": 0.9 },
//     "none_every": 0,
//     "table": { "x.png": [ { "x0": 1, "y0": 2, "x1": 30, "y1": 40, "confidence": 0.8 } ] }
//   },
//   "race_classifier": { "decode_markers": true, "mismatch_every": 0, "no_face_every": 0,
//                        "table": { "x.png": "Black", "y.png": "no_face" } },
//   "zero_shot": { "table": { "x.png": [0.1, -0.2] },
//                  "label_bias": { "chef": 0.5 } },
//   "scorer": { "token_logprobs": { "chef": [-1.0, -0.5] } }
// }
//
// Rates and "every"-style rules are resolved by hashing the image ref (and
// question), never by call order, so results do not depend on scheduling.
// The mock inpainter stamps a short byte marker encoding the demographic
// identifier it finds in the prompt into the regenerated region; the mock
// race classifier recovers the group by scanning for that marker. This keeps
// the attribute-filter stage faithful (the classifier really reads the image)
// while staying fully deterministic.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "perturbkit/adapters.hpp"
#include "perturbkit/image.hpp"
#include "perturbkit/prompting.hpp"
#include "perturbkit/rng.hpp"
#include "perturbkit/types.hpp"

namespace perturbkit {

namespace mock_detail {

inline constexpr std::uint8_t kMarkerPrefix[3] = {0x07, 0xC1, 0x5A};
inline constexpr std::uint8_t kMarkerSuffix[2] = {0xA5, 0x07};

inline std::uint8_t marker_code(DemographicGroup g) {
    return static_cast<std::uint8_t>(0x10 + 0x20 * static_cast<int>(g));
}

inline std::optional<DemographicGroup> group_from_marker_code(std::uint8_t code) {
    for (DemographicGroup g : kAllGroups)
        if (marker_code(g) == code) return g;
    return std::nullopt;
}

// Uniform [0,1) keyed by an arbitrary string; stable across runs.
inline double unit_hash(std::string_view key) {
    std::uint64_t s = fnv1a64(key);
    return static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
}

inline std::optional<DemographicGroup> group_in_prompt(const std::string& prompt) {
    // Scan in a fixed order; "Asian" is matched as a whole word so it does
    // not also hit inside other identifiers.
    for (DemographicGroup g : kAllGroups) {
        const std::string needle = " " + std::string(prompt_identifier(g)) + " ";
        if (prompt.find(needle) != std::string::npos) return g;
    }
    return std::nullopt;
}

}  // namespace mock_detail

class MockImageGenerator : public ImageGenerator {
public:
    struct Options {
        std::string subdir = "images/base";
        int grayscale_every = 0;       // seed % n == 0 -> flat gray image
        int fail_every = 0;            // seed % n == 0 -> AdapterError
        std::set<std::uint64_t> fail_seeds;
    };

    explicit MockImageGenerator(std::filesystem::path root)
        : MockImageGenerator(std::move(root), Options()) {}
    MockImageGenerator(std::filesystem::path root, Options options)
        : root_(std::move(root)), options_(std::move(options)) {}

    std::string generate(const std::string& prompt, std::uint64_t seed, int width,
                         int height) override {
        if (options_.fail_seeds.count(seed) ||
            (options_.fail_every > 0 && seed % static_cast<std::uint64_t>(options_.fail_every) == 0))
            throw AdapterError("mock generator: configured failure for seed " +
                               std::to_string(seed));
        const std::string ref =
            options_.subdir + "/" + hex64(fnv1a64(prompt + "#" + std::to_string(seed))) + ".png";
        Image img;
        if (options_.grayscale_every > 0 &&
            seed % static_cast<std::uint64_t>(options_.grayscale_every) == 0) {
            std::uint64_t s = seed + 1;
            img = Image::filled(width, height, 3,
                                static_cast<std::uint8_t>(40 + splitmix64(s) % 176));
        } else {
            img = Image::filled(width, height, 3, 0);
            SplitMix rng(fnv1a64(prompt) ^ seed);
            for (auto& px : img.pixels) px = static_cast<std::uint8_t>(rng.next() & 0xFF);
        }
        write_png(img, root_ / ref);
        return ref;
    }

private:
    std::filesystem::path root_;
    Options options_;
};

class MockInpainter : public Inpainter {
public:
    struct Options {
        std::string subdir = "images/variants";
        int fail_every = 0;  // hash(base|prompt|seed) % n == 0 -> AdapterError
    };

    explicit MockInpainter(std::filesystem::path root)
        : MockInpainter(std::move(root), Options()) {}
    MockInpainter(std::filesystem::path root, Options options)
        : root_(std::move(root)), options_(std::move(options)) {}

    std::string inpaint(const std::string& base_ref, const std::string& mask_ref,
                        const std::string& prompt, std::uint64_t seed) override {
        if (options_.fail_every > 0 &&
            fnv1a64(base_ref + "|" + prompt + "#" + std::to_string(seed)) %
                    static_cast<std::uint64_t>(options_.fail_every) ==
                0)
            throw AdapterError("mock inpainter: configured failure");
        Image base = read_png(root_ / base_ref);
        const Image mask = read_png(root_ / mask_ref);
        if (mask.width != base.width || mask.height != base.height)
            throw std::invalid_argument("inpaint: mask resolution " + std::to_string(mask.width) +
                                        "x" + std::to_string(mask.height) +
                                        " does not match base " + std::to_string(base.width) + "x" +
                                        std::to_string(base.height));

        SplitMix rng(fnv1a64(prompt) ^ seed);
        std::vector<std::size_t> masked;  // pixel indices, raster order
        for (int y = 0; y < base.height; ++y)
            for (int x = 0; x < base.width; ++x)
                if (mask.at(x, y) != 0) {
                    masked.push_back(static_cast<std::size_t>(y) * base.width + x);
                    for (int c = 0; c < base.channels; ++c)
                        base.at(x, y, c) = static_cast<std::uint8_t>(rng.next() & 0xFF);
                }

        // Stamp the group marker into the first run of >= 2 consecutive
        // masked pixels so it never touches preserved pixels.
        if (const auto group = mock_detail::group_in_prompt(prompt); group && base.channels == 3) {
            for (std::size_t i = 0; i + 1 < masked.size(); ++i) {
                if (masked[i + 1] == masked[i] + 1) {
                    std::uint8_t* p = base.pixels.data() + masked[i] * 3;
                    p[0] = mock_detail::kMarkerPrefix[0];
                    p[1] = mock_detail::kMarkerPrefix[1];
                    p[2] = mock_detail::kMarkerPrefix[2];
                    p[3] = mock_detail::marker_code(*group);
                    p[4] = mock_detail::kMarkerSuffix[0];
                    p[5] = mock_detail::kMarkerSuffix[1];
                    break;
                }
            }
        }

        const std::string ref =
            options_.subdir + "/" +
            hex64(fnv1a64(base_ref + "|" + mask_ref + "|" + prompt + "#" + std::to_string(seed))) +
            ".png";
        write_png(base, root_ / ref);
        return ref;
    }

private:
    std::filesystem::path root_;
    Options options_;
};

class MockVQAModel : public VQAModel {
public:
    struct Rule {
        std::string question_contains;
        std::optional<double> yes_rate;   // answer "yes"/"no"
        std::optional<double> real_rate;  // answer "real"/"fake"
    };
    struct Options {
        std::map<std::pair<std::string, std::string>, VQAResult> table;
        std::vector<Rule> rules;
        VQAResult fallback{"no", 0.5};
    };

    MockVQAModel() : MockVQAModel(Options()) {}
    explicit MockVQAModel(Options options) : options_(std::move(options)) {}

    VQAResult answer(const std::string& image_ref, const std::string& question) override {
        if (auto it = options_.table.find({image_ref, question}); it != options_.table.end())
            return it->second;
        for (const Rule& rule : options_.rules) {
            if (question.find(rule.question_contains) == std::string::npos) continue;
            const double u = mock_detail::unit_hash(image_ref + "|" + question);
            const double score_draw = mock_detail::unit_hash(image_ref + "|s|" + question);
            if (rule.yes_rate)
                return VQAResult{u < *rule.yes_rate ? "yes" : "no", 0.55 + 0.4 * score_draw};
            if (rule.real_rate)
                return VQAResult{u < *rule.real_rate ? "real" : "fake", 0.5 + 0.5 * score_draw};
        }
        return options_.fallback;
    }

private:
    Options options_;
};

class MockPersonDetector : public PersonDetector {
public:
    struct Options {
        std::map<std::string, std::vector<BoundingBox>> table;  // absolute pixel coords
        std::optional<BoundingBox> default_box;                 // relative [0,1] coords
        int none_every = 0;  // hash(ref) % n == 0 -> no detection
    };

    explicit MockPersonDetector(std::filesystem::path root)
        : MockPersonDetector(std::move(root), Options()) {}
    MockPersonDetector(std::filesystem::path root, Options options)
        : root_(std::move(root)), options_(std::move(options)) {}

    std::vector<BoundingBox> detect(const std::string& image_ref,
                                    const std::string& query) override {
        if (query.empty()) throw std::invalid_argument("detect: query must be nonempty");
        const Image img = read_png(root_ / image_ref);
        std::vector<BoundingBox> boxes;
        if (auto it = options_.table.find(image_ref); it != options_.table.end()) {
            boxes = it->second;
        } else if (options_.none_every > 0 &&
                   fnv1a64(image_ref) % static_cast<std::uint64_t>(options_.none_every) == 0) {
            return {};
        } else if (options_.default_box) {
            const BoundingBox& rel = *options_.default_box;
            boxes.push_back(BoundingBox{rel.x0 * img.width, rel.y0 * img.height,
                                        rel.x1 * img.width, rel.y1 * img.height, rel.confidence});
        }
        for (BoundingBox& b : boxes) {
            b.x0 = std::clamp(b.x0, 0.0, static_cast<double>(img.width));
            b.x1 = std::clamp(b.x1, 0.0, static_cast<double>(img.width));
            b.y0 = std::clamp(b.y0, 0.0, static_cast<double>(img.height));
            b.y1 = std::clamp(b.y1, 0.0, static_cast<double>(img.height));
        }
        return boxes;
    }

private:
    std::filesystem::path root_;
    Options options_;
};

class MockSegmenter : public Segmenter {
public:
    struct Options {
        std::string subdir = "masks/parts";
    };

    explicit MockSegmenter(std::filesystem::path root)
        : MockSegmenter(std::move(root), Options()) {}
    MockSegmenter(std::filesystem::path root, Options options)
        : root_(std::move(root)), options_(std::move(options)) {}

    // Fills the box rectangle: pixel (x, y) is masked iff
    // round(x0) <= x < round(x1) and likewise for y.
    std::string segment(const std::string& image_ref, const BoundingBox& box) override {
        const Image img = read_png(root_ / image_ref);
        const int xs = static_cast<int>(std::lround(box.x0));
        const int xe = static_cast<int>(std::lround(box.x1));
        const int ys = static_cast<int>(std::lround(box.y0));
        const int ye = static_cast<int>(std::lround(box.y1));
        if (xs < 0 || ys < 0 || xe > img.width || ye > img.height)
            throw std::invalid_argument("segment: box outside image bounds");
        if (xs >= xe || ys >= ye) throw std::invalid_argument("segment: zero-area box");
        Image mask = Image::filled(img.width, img.height, 1, 0);
        for (int y = ys; y < ye; ++y)
            for (int x = xs; x < xe; ++x) mask.at(x, y) = 255;
        char coords[96];
        std::snprintf(coords, sizeof(coords), "|%d,%d,%d,%d", xs, ys, xe, ye);
        const std::string ref =
            options_.subdir + "/" + hex64(fnv1a64(image_ref + coords)) + ".png";
        write_png(mask, root_ / ref);
        return ref;
    }

private:
    std::filesystem::path root_;
    Options options_;
};

class MockRaceClassifier : public RaceClassifier {
public:
    struct Options {
        std::map<std::string, std::string> table;  // ref -> canonical group name or "no_face"
        bool decode_markers = true;
        int mismatch_every = 0;  // hash(ref) % n == 1 -> report the next group instead
        int no_face_every = 0;   // hash(ref) % n == 0 -> NoFaceError
    };

    explicit MockRaceClassifier(std::filesystem::path root)
        : MockRaceClassifier(std::move(root), Options()) {}
    MockRaceClassifier(std::filesystem::path root, Options options)
        : root_(std::move(root)), options_(std::move(options)) {}

    DemographicGroup classify(const std::string& image_ref) override {
        if (auto it = options_.table.find(image_ref); it != options_.table.end()) {
            if (it->second == "no_face") throw NoFaceError(image_ref);
            return require_group(it->second);
        }
        if (options_.decode_markers) {
            if (auto group = decode_marker(image_ref)) {
                const std::uint64_t h = fnv1a64(image_ref);
                if (options_.no_face_every > 0 &&
                    h % static_cast<std::uint64_t>(options_.no_face_every) == 0)
                    throw NoFaceError(image_ref);
                if (options_.mismatch_every > 0 &&
                    h % static_cast<std::uint64_t>(options_.mismatch_every) == 1) {
                    const int next = (static_cast<int>(*group) + 1) % kVariantsPerSet;
                    return static_cast<DemographicGroup>(next);
                }
                return *group;
            }
        }
        throw NoFaceError(image_ref);
    }

private:
    std::optional<DemographicGroup> decode_marker(const std::string& image_ref) const {
        const Image img = read_png(root_ / image_ref);
        if (img.channels != 3) return std::nullopt;
        const auto& px = img.pixels;
        for (std::size_t i = 0; i + 6 <= px.size(); ++i) {
            if (px[i] == mock_detail::kMarkerPrefix[0] && px[i + 1] == mock_detail::kMarkerPrefix[1] &&
                px[i + 2] == mock_detail::kMarkerPrefix[2] &&
                px[i + 4] == mock_detail::kMarkerSuffix[0] &&
                px[i + 5] == mock_detail::kMarkerSuffix[1]) {
                if (auto g = mock_detail::group_from_marker_code(px[i + 3])) return g;
            }
        }
        return std::nullopt;
    }

    std::filesystem::path root_;
    Options options_;
};

class MockZeroShotClassifier : public ZeroShotClassifier {
public:
    struct Options {
        std::map<std::string, std::vector<double>> table;  // ref -> one value per label
        std::map<std::string, double> label_bias;          // label-substring -> added bias
    };

    MockZeroShotClassifier() : MockZeroShotClassifier(Options()) {}
    explicit MockZeroShotClassifier(Options options) : options_(std::move(options)) {}

    std::vector<double> similarities(const std::string& image_ref,
                                     const std::vector<std::string>& label_texts) override {
        if (label_texts.empty())
            throw std::invalid_argument("similarities: label_texts must be nonempty");
        if (auto it = options_.table.find(image_ref); it != options_.table.end()) {
            if (it->second.size() != label_texts.size())
                throw AdapterError("mock zero-shot: configured vector for " + image_ref + " has " +
                                   std::to_string(it->second.size()) + " entries, expected " +
                                   std::to_string(label_texts.size()));
            return it->second;
        }
        std::vector<double> sims;
        sims.reserve(label_texts.size());
        for (const std::string& label : label_texts) {
            double s = -0.2 + 0.4 * mock_detail::unit_hash(image_ref + "|" + label);
            for (const auto& [needle, bias] : options_.label_bias)
                if (label.find(needle) != std::string::npos) s += bias;
            sims.push_back(std::clamp(s, -1.0, 1.0));
        }
        return sims;
    }

private:
    Options options_;
};

class MockGenerativeScorer : public GenerativeScorer {
public:
    struct Options {
        std::map<std::string, std::vector<double>> token_logprobs;  // answer -> per-token logprobs
    };

    MockGenerativeScorer() : MockGenerativeScorer(Options()) {}
    explicit MockGenerativeScorer(Options options) : options_(std::move(options)) {}

    std::vector<double> log_probs(const std::string& image_ref, const std::string& prompt_template,
                                  const std::vector<std::string>& answers) override {
        if (answers.empty()) throw std::invalid_argument("log_probs: answers must be nonempty");
        std::vector<double> joints;
        joints.reserve(answers.size());
        for (const std::string& answer : answers) {
            if (auto it = options_.token_logprobs.find(answer); it != options_.token_logprobs.end()) {
                double sum = 0.0;
                for (double lp : it->second) sum += lp;
                joints.push_back(sum);
                continue;
            }
            // Unknown answer: one synthetic token per whitespace-separated word.
            double sum = 0.0;
            std::size_t start = 0, index = 0;
            while (start <= answer.size()) {
                std::size_t end = answer.find(' ', start);
                if (end == std::string::npos) end = answer.size();
                sum -= 0.1 + 2.9 * mock_detail::unit_hash(image_ref + "|" + prompt_template + "|" +
                                                          answer.substr(start, end - start) + "#" +
                                                          std::to_string(index++));
                start = end + 1;
            }
            joints.push_back(sum);
        }
        return joints;
    }

private:
    Options options_;
};

// --- config-file loading ----------------------------------------------------

namespace mock_detail {

inline BoundingBox box_from_config(const nlohmann::ordered_json& j) {
    BoundingBox b;
    b.x0 = j.at("x0").get<double>();
    b.y0 = j.at("y0").get<double>();
    b.x1 = j.at("x1").get<double>();
    b.y1 = j.at("y1").get<double>();
    b.confidence = j.value("confidence", 1.0);
    return b;
}

}  // namespace mock_detail

// Builds a full suite from the documented mock-config JSON (see file header).
inline AdapterSuite make_mock_suite(const std::filesystem::path& root,
                                    const nlohmann::ordered_json& config = {}) {
    auto section = [&](const char* name) {
        return config.is_object() && config.contains(name) ? config.at(name)
                                                           : nlohmann::ordered_json::object();
    };

    MockImageGenerator::Options gen;
    {
        const auto j = section("generator");
        gen.grayscale_every = j.value("grayscale_every", 0);
        gen.fail_every = j.value("fail_every", 0);
        if (j.contains("fail_seeds"))
            for (const auto& s : j.at("fail_seeds")) gen.fail_seeds.insert(s.get<std::uint64_t>());
    }

    MockVQAModel::Options vqa;
    {
        const auto j = section("vqa");
        if (j.contains("table"))
            for (const auto& row : j.at("table"))
                vqa.table[{row.at("image").get<std::string>(),
                           row.at("question").get<std::string>()}] =
                    VQAResult{row.at("answer").get<std::string>(), row.at("score").get<double>()};
        if (j.contains("rules"))
            for (const auto& row : j.at("rules")) {
                MockVQAModel::Rule rule;
                rule.question_contains = row.at("question_contains").get<std::string>();
                if (row.contains("yes_rate")) rule.yes_rate = row.at("yes_rate").get<double>();
                if (row.contains("real_rate")) rule.real_rate = row.at("real_rate").get<double>();
                vqa.rules.push_back(std::move(rule));
            }
    }

    MockPersonDetector::Options det;
    {
        const auto j = section("detector");
        if (j.contains("default_box")) det.default_box = mock_detail::box_from_config(j.at("default_box"));
        det.none_every = j.value("none_every", 0);
        if (j.contains("table"))
            for (const auto& [ref, boxes] : j.at("table").items())
                for (const auto& b : boxes) det.table[ref].push_back(mock_detail::box_from_config(b));
    }

    MockRaceClassifier::Options race;
    {
        const auto j = section("race_classifier");
        race.decode_markers = j.value("decode_markers", true);
        race.mismatch_every = j.value("mismatch_every", 0);
        race.no_face_every = j.value("no_face_every", 0);
        if (j.contains("table"))
            for (const auto& [ref, group] : j.at("table").items())
                race.table[ref] = group.get<std::string>();
    }

    MockZeroShotClassifier::Options zs;
    {
        const auto j = section("zero_shot");
        if (j.contains("table"))
            for (const auto& [ref, sims] : j.at("table").items())
                zs.table[ref] = sims.get<std::vector<double>>();
        if (j.contains("label_bias"))
            for (const auto& [needle, bias] : j.at("label_bias").items())
                zs.label_bias[needle] = bias.get<double>();
    }

    MockGenerativeScorer::Options scorer;
    {
        const auto j = section("scorer");
        if (j.contains("token_logprobs"))
            for (const auto& [answer, lps] : j.at("token_logprobs").items())
                scorer.token_logprobs[answer] = lps.get<std::vector<double>>();
    }

    MockInpainter::Options inpaint;
    inpaint.fail_every = section("inpainter").value("fail_every", 0);

    AdapterSuite suite;
    suite.generator = std::make_shared<MockImageGenerator>(root, gen);
    suite.inpainter = std::make_shared<MockInpainter>(root, inpaint);
    suite.vqa = std::make_shared<MockVQAModel>(vqa);
    suite.detector = std::make_shared<MockPersonDetector>(root, det);
    suite.segmenter = std::make_shared<MockSegmenter>(root);
    suite.race_classifier = std::make_shared<MockRaceClassifier>(root, race);
    suite.zero_shot = std::make_shared<MockZeroShotClassifier>(zs);
    suite.scorer = std::make_shared<MockGenerativeScorer>(scorer);
    return suite;
}

}  // namespace perturbkit
