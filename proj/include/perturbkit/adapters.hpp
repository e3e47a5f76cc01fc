#pragma once
// Model-backend interfaces consumed by the pipeline and the evaluator.
// Images cross the boundary as refs: paths relative to a run root that each
// adapter receives at construction. Deployments bind real models (diffusion
// generator/inpainter, VQA, open-set detector, segmenter, face-attribution,
// image-text and generative scorers) behind these eight interfaces; the mock
// implementations in mock_adapters.hpp keep the whole pipeline runnable and
// bit-reproducible without any model.
//
// Adapters must either be safe for concurrent calls or be bound with
// workers = 1 in the pipeline config.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "perturbkit/errors.hpp"
#include "perturbkit/types.hpp"

namespace perturbkit {

class ImageGenerator {
public:
    virtual ~ImageGenerator() = default;
    // Produces an image file and returns its ref. Deterministic mocks return
    // byte-identical output for identical (prompt, seed).
    virtual std::string generate(const std::string& prompt, std::uint64_t seed, int width,
                                 int height) = 0;
};

class Inpainter {
public:
    virtual ~Inpainter() = default;
    // Regenerates the masked region of `base_ref` under `prompt`. The mask
    // must match the base resolution; pixels where mask = 0 stay unchanged
    // (exactly for mocks, approximately for real backends).
    virtual std::string inpaint(const std::string& base_ref, const std::string& mask_ref,
                                const std::string& prompt, std::uint64_t seed) = 0;
};

class VQAModel {
public:
    virtual ~VQAModel() = default;
    virtual VQAResult answer(const std::string& image_ref, const std::string& question) = 0;
};

class PersonDetector {
public:
    virtual ~PersonDetector() = default;
    // Open-set detection; the pipeline always queries "person". Returned
    // boxes are clipped to image bounds and may be empty.
    virtual std::vector<BoundingBox> detect(const std::string& image_ref,
                                            const std::string& query) = 0;
};

class Segmenter {
public:
    virtual ~Segmenter() = default;
    // Returns the ref of a binary mask ({0,255}) conditioned on `box`.
    virtual std::string segment(const std::string& image_ref, const BoundingBox& box) = 0;
};

class RaceClassifier {
public:
    virtual ~RaceClassifier() = default;
    // Throws NoFaceError when no face is found; the owning set is dropped.
    virtual DemographicGroup classify(const std::string& image_ref) = 0;
};

class ZeroShotClassifier {
public:
    virtual ~ZeroShotClassifier() = default;
    // One cosine similarity in [-1,1] per label text, in input order.
    virtual std::vector<double> similarities(const std::string& image_ref,
                                             const std::vector<std::string>& label_texts) = 0;
};

class GenerativeScorer {
public:
    virtual ~GenerativeScorer() = default;
    // Joint (summed) log probability of each answer as a continuation of
    // `prompt_template`, in input order.
    virtual std::vector<double> log_probs(const std::string& image_ref,
                                          const std::string& prompt_template,
                                          const std::vector<std::string>& answers) = 0;
};

struct AdapterSuite {
    std::shared_ptr<ImageGenerator> generator;
    std::shared_ptr<Inpainter> inpainter;
    std::shared_ptr<VQAModel> vqa;
    std::shared_ptr<PersonDetector> detector;
    std::shared_ptr<Segmenter> segmenter;
    std::shared_ptr<RaceClassifier> race_classifier;
    std::shared_ptr<ZeroShotClassifier> zero_shot;
    std::shared_ptr<GenerativeScorer> scorer;
};

}  // namespace perturbkit
