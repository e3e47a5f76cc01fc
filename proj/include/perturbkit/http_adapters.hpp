#pragma once
// JSON-over-HTTP backends. A deployment exposes the model endpoints below on
// one base URL; images travel base64-encoded. Responses the pipeline persists
// (generated images, inpaints, masks) are written under the run root and
// returned as refs, so remote and mock backends are interchangeable.
//
// Wire format (all POST, JSON bodies):
//   /generate       {prompt, seed, width, height}            -> {image_b64}
//   /inpaint        {image_b64, mask_b64, prompt, seed}      -> {image_b64}
//   /vqa            {image_b64, question}                    -> {answer, score}
//   /detect         {image_b64, query}                       -> {boxes: [{x0,y0,x1,y1,confidence}]}
//   /segment        {image_b64, box: {x0,y0,x1,y1}}          -> {mask_b64}
//   /classify_race  {image_b64}                              -> {group} | {no_face: true}
//   /similarities   {image_b64, labels: [...]}               -> {similarities: [...]}
//   /log_probs      {image_b64, prompt_template, answers}    -> {log_probs: [...]}
//
// Extra keys from the config's backend_options object are merged into every
// request body (guidance scale, steps, and similar backend knobs).

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "perturbkit/adapters.hpp"
#include "perturbkit/image.hpp"
#include "perturbkit/rng.hpp"
#include "perturbkit/util.hpp"

namespace perturbkit {

inline std::string base64_encode(const std::vector<std::uint8_t>& data) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < data.size(); i += 3) {
        std::uint32_t chunk = static_cast<std::uint32_t>(data[i]) << 16;
        if (i + 1 < data.size()) chunk |= static_cast<std::uint32_t>(data[i + 1]) << 8;
        if (i + 2 < data.size()) chunk |= data[i + 2];
        out.push_back(alphabet[(chunk >> 18) & 0x3F]);
        out.push_back(alphabet[(chunk >> 12) & 0x3F]);
        out.push_back(i + 1 < data.size() ? alphabet[(chunk >> 6) & 0x3F] : '=');
        out.push_back(i + 2 < data.size() ? alphabet[chunk & 0x3F] : '=');
    }
    return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::vector<std::uint8_t> out;
    int acc = 0, bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const int v = value_of(c);
        if (v < 0) throw ValidationError("base64: invalid character");
        acc = (acc << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
        }
    }
    return out;
}

class HttpBackend {
public:
    HttpBackend(std::filesystem::path root, const std::string& base_url,
                nlohmann::ordered_json extra_options = nlohmann::ordered_json::object(),
                int timeout_seconds = 120)
        : root_(std::move(root)), client_(base_url), extra_(std::move(extra_options)) {
        client_.set_connection_timeout(timeout_seconds);
        client_.set_read_timeout(timeout_seconds);
    }

    // One in-flight request per backend; the pipeline's worker pool may call
    // from several threads.
    nlohmann::ordered_json post(const std::string& endpoint, nlohmann::ordered_json body) {
        for (const auto& [key, value] : extra_.items())
            if (!body.contains(key)) body[key] = value;
        std::lock_guard<std::mutex> lock(mutex_);
        const auto res = client_.Post(endpoint, body.dump(), "application/json");
        if (!res)
            throw AdapterError("backend unreachable: " + endpoint + " (" +
                               httplib::to_string(res.error()) + ")");
        if (res->status == 422 && endpoint == "/classify_race") return {{"no_face", true}};
        if (res->status != 200)
            throw AdapterError("backend error " + std::to_string(res->status) + " from " +
                               endpoint);
        try {
            return nlohmann::ordered_json::parse(res->body);
        } catch (const std::exception& ex) {
            throw AdapterError("backend returned invalid JSON from " + endpoint + ": " +
                               ex.what());
        }
    }

    std::string image_b64(const std::string& ref) const {
        const std::string bytes = read_text_file(root_ / ref);
        return base64_encode(std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
    }

    std::string save_image(const std::string& b64, const std::string& subdir,
                           const std::string& key) const {
        const auto bytes = base64_decode(b64);
        const std::string ref = subdir + "/" + hex64(fnv1a64(key)) + ".png";
        const auto path = root_ / ref;
        ensure_parent_dir(path);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write image: " + path.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        return ref;
    }

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
    httplib::Client client_;
    nlohmann::ordered_json extra_;
    std::mutex mutex_;
};

class HttpImageGenerator : public ImageGenerator {
public:
    explicit HttpImageGenerator(std::shared_ptr<HttpBackend> backend)
        : backend_(std::move(backend)) {}

    std::string generate(const std::string& prompt, std::uint64_t seed, int width,
                         int height) override {
        nlohmann::ordered_json body;
        body["prompt"] = prompt;
        body["seed"] = seed;
        body["width"] = width;
        body["height"] = height;
        const auto res = backend_->post("/generate", std::move(body));
        return backend_->save_image(res.at("image_b64").get<std::string>(), "images/base",
                                    prompt + "#" + std::to_string(seed));
    }

private:
    std::shared_ptr<HttpBackend> backend_;
};

class HttpInpainter : public Inpainter {
public:
    explicit HttpInpainter(std::shared_ptr<HttpBackend> backend) : backend_(std::move(backend)) {}

    std::string inpaint(const std::string& base_ref, const std::string& mask_ref,
                        const std::string& prompt, std::uint64_t seed) override {
        nlohmann::ordered_json body;
        body["image_b64"] = backend_->image_b64(base_ref);
        body["mask_b64"] = backend_->image_b64(mask_ref);
        body["prompt"] = prompt;
        body["seed"] = seed;
        const auto res = backend_->post("/inpaint", std::move(body));
        return backend_->save_image(res.at("image_b64").get<std::string>(), "images/variants",
                                    base_ref + "|" + mask_ref + "|" + prompt + "#" +
                                        std::to_string(seed));
    }

private:
    std::shared_ptr<HttpBackend> backend_;
};

class HttpVQAModel : public VQAModel {
public:
    explicit HttpVQAModel(std::shared_ptr<HttpBackend> backend) : backend_(std::move(backend)) {}

    VQAResult answer(const std::string& image_ref, const std::string& question) override {
        nlohmann::ordered_json body;
        body["image_b64"] = backend_->image_b64(image_ref);
        body["question"] = question;
        const auto res = backend_->post("/vqa", std::move(body));
        return VQAResult{res.at("answer").get<std::string>(), res.at("score").get<double>()};
    }

private:
    std::shared_ptr<HttpBackend> backend_;
};

class HttpPersonDetector : public PersonDetector {
public:
    explicit HttpPersonDetector(std::shared_ptr<HttpBackend> backend)
        : backend_(std::move(backend)) {}

    std::vector<BoundingBox> detect(const std::string& image_ref,
                                    const std::string& query) override {
        if (query.empty()) throw std::invalid_argument("detect: query must be nonempty");
        nlohmann::ordered_json body;
        body["image_b64"] = backend_->image_b64(image_ref);
        body["query"] = query;
        const auto res = backend_->post("/detect", std::move(body));
        std::vector<BoundingBox> boxes;
        for (const auto& bj : res.at("boxes"))
            boxes.push_back(BoundingBox{bj.at("x0").get<double>(), bj.at("y0").get<double>(),
                                        bj.at("x1").get<double>(), bj.at("y1").get<double>(),
                                        bj.value("confidence", 1.0)});
        return boxes;
    }

private:
    std::shared_ptr<HttpBackend> backend_;
};

class HttpSegmenter : public Segmenter {
public:
    explicit HttpSegmenter(std::shared_ptr<HttpBackend> backend) : backend_(std::move(backend)) {}

    std::string segment(const std::string& image_ref, const BoundingBox& box) override {
        nlohmann::ordered_json body;
        body["image_b64"] = backend_->image_b64(image_ref);
        nlohmann::ordered_json bj;
        bj["x0"] = box.x0;
        bj["y0"] = box.y0;
        bj["x1"] = box.x1;
        bj["y1"] = box.y1;
        body["box"] = std::move(bj);
        const auto res = backend_->post("/segment", std::move(body));
        char coords[96];
        std::snprintf(coords, sizeof(coords), "|%f,%f,%f,%f", box.x0, box.y0, box.x1, box.y1);
        return backend_->save_image(res.at("mask_b64").get<std::string>(), "masks/parts",
                                    image_ref + coords);
    }

private:
    std::shared_ptr<HttpBackend> backend_;
};

class HttpRaceClassifier : public RaceClassifier {
public:
    explicit HttpRaceClassifier(std::shared_ptr<HttpBackend> backend)
        : backend_(std::move(backend)) {}

    DemographicGroup classify(const std::string& image_ref) override {
        nlohmann::ordered_json body;
        body["image_b64"] = backend_->image_b64(image_ref);
        const auto res = backend_->post("/classify_race", std::move(body));
        if (res.value("no_face", false)) throw NoFaceError(image_ref);
        return require_group(res.at("group").get<std::string>());
    }

private:
    std::shared_ptr<HttpBackend> backend_;
};

class HttpZeroShotClassifier : public ZeroShotClassifier {
public:
    explicit HttpZeroShotClassifier(std::shared_ptr<HttpBackend> backend)
        : backend_(std::move(backend)) {}

    std::vector<double> similarities(const std::string& image_ref,
                                     const std::vector<std::string>& label_texts) override {
        if (label_texts.empty())
            throw std::invalid_argument("similarities: label_texts must be nonempty");
        nlohmann::ordered_json body;
        body["image_b64"] = backend_->image_b64(image_ref);
        body["labels"] = label_texts;
        const auto res = backend_->post("/similarities", std::move(body));
        const auto sims = res.at("similarities").get<std::vector<double>>();
        if (sims.size() != label_texts.size())
            throw AdapterError("backend returned " + std::to_string(sims.size()) +
                               " similarities for " + std::to_string(label_texts.size()) +
                               " labels");
        return sims;
    }

private:
    std::shared_ptr<HttpBackend> backend_;
};

class HttpGenerativeScorer : public GenerativeScorer {
public:
    explicit HttpGenerativeScorer(std::shared_ptr<HttpBackend> backend)
        : backend_(std::move(backend)) {}

    std::vector<double> log_probs(const std::string& image_ref, const std::string& prompt_template,
                                  const std::vector<std::string>& answers) override {
        if (answers.empty()) throw std::invalid_argument("log_probs: answers must be nonempty");
        nlohmann::ordered_json body;
        body["image_b64"] = backend_->image_b64(image_ref);
        body["prompt_template"] = prompt_template;
        body["answers"] = answers;
        const auto res = backend_->post("/log_probs", std::move(body));
        const auto lps = res.at("log_probs").get<std::vector<double>>();
        if (lps.size() != answers.size())
            throw AdapterError("backend returned " + std::to_string(lps.size()) +
                               " log probs for " + std::to_string(answers.size()) + " answers");
        return lps;
    }

private:
    std::shared_ptr<HttpBackend> backend_;
};

inline AdapterSuite make_http_suite(const std::filesystem::path& root, const std::string& base_url,
                                    nlohmann::ordered_json extra_options = nlohmann::ordered_json::object(),
                                    int timeout_seconds = 120) {
    auto backend = std::make_shared<HttpBackend>(root, base_url, std::move(extra_options),
                                                 timeout_seconds);
    AdapterSuite suite;
    suite.generator = std::make_shared<HttpImageGenerator>(backend);
    suite.inpainter = std::make_shared<HttpInpainter>(backend);
    suite.vqa = std::make_shared<HttpVQAModel>(backend);
    suite.detector = std::make_shared<HttpPersonDetector>(backend);
    suite.segmenter = std::make_shared<HttpSegmenter>(backend);
    suite.race_classifier = std::make_shared<HttpRaceClassifier>(backend);
    suite.zero_shot = std::make_shared<HttpZeroShotClassifier>(backend);
    suite.scorer = std::make_shared<HttpGenerativeScorer>(backend);
    return suite;
}

}  // namespace perturbkit
