#pragma once
// Run configuration: one JSON file drives every CLI command. CLI flags
// override file values.
//
// {
//   "out_dir": "out",
//   "seed": 1234,
//   "occupations_file": "occupations.json",      // optional; stock five otherwise
//   "occupations": ["chef", "pilot"],            // optional name filter
//   "pipeline": {
//     "images_per_occupation": 5000, "top_k": 2000, "sets_per_occupation": 1200,
//     "gender_mode": "unspecified" | "balanced",
//     "image_width": 1024, "image_height": 1024,
//     "box_confidence_threshold": 0.35,
//     "grayscale_spread_threshold": 8, "grayscale_pixel_fraction": 0.99,
//     "workers": 1, "wall_clock_timestamps": false,
//     "backend_options": { ... }                 // forwarded to backends verbatim
//   },
//   "adapters": {
//     "kind": "mock" | "http",
//     "mock": { ... inline mock config ... },    // or "mock_config": "mocks.json"
//     "http": { "base_url": "http://host:port", "timeout_s": 120 }
//   },
//   "evaluation": { "label_set": "base" | "difficult", "temperature": 1.0,
//                   "model_name": "mock-clip", "scorer": "zero_shot" | "lens" }
// }

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "perturbkit/adapters.hpp"
#include "perturbkit/errors.hpp"
#include "perturbkit/http_adapters.hpp"
#include "perturbkit/mock_adapters.hpp"
#include "perturbkit/pipeline.hpp"
#include "perturbkit/prompting.hpp"
#include "perturbkit/util.hpp"

namespace perturbkit {

struct EvaluationConfig {
    std::string label_set = "base";  // "base" or "difficult"
    double temperature = 1.0;
    std::string model_name = "model";
    std::string scorer = "zero_shot";  // "zero_shot" or "lens"
};

struct RunConfig {
    std::filesystem::path config_dir;  // directory of the config file, for relative paths
    std::filesystem::path out_dir = "out";
    PipelineConfig pipeline;
    EvaluationConfig evaluation;
    std::string adapter_kind = "mock";
    nlohmann::ordered_json mock_config = nlohmann::ordered_json::object();
    std::string http_base_url;
    int http_timeout_s = 120;

    std::filesystem::path resolve(const std::filesystem::path& p) const {
        return p.is_absolute() ? p : config_dir / p;
    }
};

inline RunConfig load_run_config(const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(read_text_file(path));
    } catch (const IoError&) {
        throw ConfigError("config file not found: " + path.string());
    } catch (const std::exception& ex) {
        throw ConfigError("config file " + path.string() + ": " + ex.what());
    }

    RunConfig cfg;
    cfg.config_dir = path.has_parent_path() ? path.parent_path() : ".";
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    cfg.pipeline.base_seed = j.value("seed", std::uint64_t{0});

    if (j.contains("occupations_file")) {
        cfg.pipeline.occupations =
            load_occupations(cfg.resolve(j.at("occupations_file").get<std::string>()));
    } else {
        cfg.pipeline.occupations = default_occupations();
    }
    if (j.contains("occupations")) {
        const auto wanted = j.at("occupations").get<std::vector<std::string>>();
        std::vector<OccupationSpec> filtered;
        for (const auto& name : wanted) {
            bool found = false;
            for (const auto& spec : cfg.pipeline.occupations)
                if (spec.name == name) {
                    filtered.push_back(spec);
                    found = true;
                }
            if (!found) throw ConfigError("unknown occupation in config: " + name);
        }
        cfg.pipeline.occupations = std::move(filtered);
    }

    if (j.contains("pipeline")) {
        const auto& p = j.at("pipeline");
        cfg.pipeline.images_per_occupation =
            p.value("images_per_occupation", cfg.pipeline.images_per_occupation);
        cfg.pipeline.top_k = p.value("top_k", cfg.pipeline.top_k);
        cfg.pipeline.sets_per_occupation =
            p.value("sets_per_occupation", cfg.pipeline.sets_per_occupation);
        if (p.contains("gender_mode")) {
            const auto mode = p.at("gender_mode").get<std::string>();
            if (mode == "balanced") cfg.pipeline.gender_mode = GenderMode::Balanced;
            else if (mode == "unspecified") cfg.pipeline.gender_mode = GenderMode::Unspecified;
            else throw ConfigError("pipeline.gender_mode must be 'unspecified' or 'balanced'");
        }
        cfg.pipeline.image_width = p.value("image_width", cfg.pipeline.image_width);
        cfg.pipeline.image_height = p.value("image_height", cfg.pipeline.image_height);
        cfg.pipeline.box_confidence_threshold =
            p.value("box_confidence_threshold", cfg.pipeline.box_confidence_threshold);
        cfg.pipeline.grayscale_spread_threshold =
            p.value("grayscale_spread_threshold", cfg.pipeline.grayscale_spread_threshold);
        cfg.pipeline.grayscale_pixel_fraction =
            p.value("grayscale_pixel_fraction", cfg.pipeline.grayscale_pixel_fraction);
        cfg.pipeline.workers = p.value("workers", cfg.pipeline.workers);
        cfg.pipeline.wall_clock_timestamps =
            p.value("wall_clock_timestamps", cfg.pipeline.wall_clock_timestamps);
        if (p.contains("backend_options")) cfg.pipeline.backend_options = p.at("backend_options");
    }

    if (j.contains("adapters")) {
        const auto& a = j.at("adapters");
        cfg.adapter_kind = a.value("kind", cfg.adapter_kind);
        if (cfg.adapter_kind == "mock") {
            if (a.contains("mock_config")) {
                const auto mock_path = cfg.resolve(a.at("mock_config").get<std::string>());
                try {
                    cfg.mock_config = nlohmann::ordered_json::parse(read_text_file(mock_path));
                } catch (const std::exception& ex) {
                    throw ConfigError("mock config " + mock_path.string() + ": " + ex.what());
                }
            } else if (a.contains("mock")) {
                cfg.mock_config = a.at("mock");
            }
        } else if (cfg.adapter_kind == "http") {
            if (!a.contains("http") || !a.at("http").contains("base_url"))
                throw ConfigError("adapters.http.base_url is required for kind 'http'");
            cfg.http_base_url = a.at("http").at("base_url").get<std::string>();
            cfg.http_timeout_s = a.at("http").value("timeout_s", cfg.http_timeout_s);
        } else {
            throw ConfigError("adapters.kind must be 'mock' or 'http'");
        }
    }

    if (j.contains("evaluation")) {
        const auto& e = j.at("evaluation");
        cfg.evaluation.label_set = e.value("label_set", cfg.evaluation.label_set);
        if (cfg.evaluation.label_set != "base" && cfg.evaluation.label_set != "difficult")
            throw ConfigError("evaluation.label_set must be 'base' or 'difficult'");
        cfg.evaluation.temperature = e.value("temperature", cfg.evaluation.temperature);
        if (cfg.evaluation.temperature <= 0.0)
            throw ConfigError("evaluation.temperature must be positive");
        cfg.evaluation.model_name = e.value("model_name", cfg.evaluation.model_name);
        cfg.evaluation.scorer = e.value("scorer", cfg.evaluation.scorer);
        if (cfg.evaluation.scorer != "zero_shot" && cfg.evaluation.scorer != "lens")
            throw ConfigError("evaluation.scorer must be 'zero_shot' or 'lens'");
    }
    return cfg;
}

inline AdapterSuite bind_adapters(const RunConfig& cfg, const std::filesystem::path& root) {
    if (cfg.adapter_kind == "mock") return make_mock_suite(root, cfg.mock_config);
    return make_http_suite(root, cfg.http_base_url, cfg.pipeline.backend_options,
                           cfg.http_timeout_s);
}

}  // namespace perturbkit
