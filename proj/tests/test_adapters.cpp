#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "perturbkit/image.hpp"
#include "perturbkit/mock_adapters.hpp"
#include "perturbkit/util.hpp"

using namespace perturbkit;
namespace fs = std::filesystem;

namespace {

fs::path fresh_root(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("perturbkit_test_adapters_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("mock generator is deterministic and seed-sensitive") {
    const auto root = fresh_root("gen");
    MockImageGenerator gen(root);
    const auto ref1 = gen.generate("p", 7, 64, 64);
    const auto ref2 = gen.generate("p", 7, 64, 64);
    REQUIRE(ref1 == ref2);
    REQUIRE(read_text_file(root / ref1) == read_text_file(root / ref2));

    const auto ref3 = gen.generate("p", 8, 64, 64);
    REQUIRE(ref3 != ref1);
    REQUIRE(read_png(root / ref3) != read_png(root / ref1));

    const Image img = read_png(root / ref1);
    REQUIRE(img.width == 64);
    REQUIRE(img.height == 64);
    REQUIRE(img.channels == 3);
}

TEST_CASE("mock generator failure rules") {
    const auto root = fresh_root("genfail");
    MockImageGenerator::Options opts;
    opts.fail_seeds = {11};
    MockImageGenerator gen(root, opts);
    REQUIRE_NOTHROW(gen.generate("p", 10, 16, 16));
    REQUIRE_THROWS_AS(gen.generate("p", 11, 16, 16), AdapterError);
}

TEST_CASE("mock generator grayscale rule produces flat images") {
    const auto root = fresh_root("gengray");
    MockImageGenerator::Options opts;
    opts.grayscale_every = 3;
    MockImageGenerator gen(root, opts);
    const Image gray = read_png(root / gen.generate("p", 9, 16, 16));
    REQUIRE(is_grayscale(gray, 8, 0.99));
    const Image color = read_png(root / gen.generate("p", 10, 16, 16));
    REQUIRE_FALSE(is_grayscale(color, 8, 0.99));
}

TEST_CASE("mock inpainter preserves unmasked pixels exactly") {
    const auto root = fresh_root("inpaint");
    MockImageGenerator gen(root);
    const auto base_ref = gen.generate("base", 1, 32, 32);
    const Image base = read_png(root / base_ref);

    SECTION("all-zero mask returns the base unchanged") {
        write_png(Image::filled(32, 32, 1, 0), root / "mask0.png");
        MockInpainter inpaint(root);
        const auto out = inpaint.inpaint(base_ref, "mask0.png", "A photo of the face of a chef", 5);
        REQUIRE(read_png(root / out) == base);
    }

    SECTION("full mask regenerates everything from (prompt, seed)") {
        write_png(Image::filled(32, 32, 1, 255), root / "mask1.png");
        MockInpainter inpaint(root);
        const auto out1 = inpaint.inpaint(base_ref, "mask1.png", "p", 5);
        const auto out2 = inpaint.inpaint(base_ref, "mask1.png", "p", 5);
        const auto out3 = inpaint.inpaint(base_ref, "mask1.png", "p", 6);
        REQUIRE(read_text_file(root / out1) == read_text_file(root / out2));
        REQUIRE(read_png(root / out1) != read_png(root / out3));
        REQUIRE(read_png(root / out1) != base);
    }

    SECTION("half mask keeps the unmasked half byte-equal to the base") {
        Image half = Image::filled(32, 32, 1, 0);
        for (int y = 0; y < 32; ++y)
            for (int x = 16; x < 32; ++x) half.at(x, y) = 255;
        write_png(half, root / "maskh.png");
        MockInpainter inpaint(root);
        const auto out = inpaint.inpaint(base_ref, "maskh.png", "p", 5);
        const Image result = read_png(root / out);
        bool left_equal = true, right_differs = false;
        for (int y = 0; y < 32; ++y) {
            for (int x = 0; x < 16; ++x)
                for (int c = 0; c < 3; ++c)
                    left_equal &= result.at(x, y, c) == base.at(x, y, c);
            for (int x = 16; x < 32; ++x)
                for (int c = 0; c < 3; ++c)
                    right_differs |= result.at(x, y, c) != base.at(x, y, c);
        }
        REQUIRE(left_equal);
        REQUIRE(right_differs);
    }

    SECTION("resolution mismatch is a precondition error") {
        write_png(Image::filled(16, 16, 1, 255), root / "masks.png");
        MockInpainter inpaint(root);
        REQUIRE_THROWS_AS(inpaint.inpaint(base_ref, "masks.png", "p", 5), std::invalid_argument);
    }
}

TEST_CASE("mock vqa table lookup and default") {
    MockVQAModel::Options opts;
    opts.table[{"img1.png", "Q1"}] = VQAResult{"yes", 0.9};
    MockVQAModel vqa(opts);
    const auto hit = vqa.answer("img1.png", "Q1");
    REQUIRE(hit.answer == "yes");
    REQUIRE(hit.score == 0.9);
    const auto miss = vqa.answer("img2.png", "Q1");
    REQUIRE(miss.answer == "no");
    REQUIRE(miss.score == 0.5);
}

TEST_CASE("mock vqa hash rules are deterministic with plausible rates") {
    MockVQAModel::Options opts;
    opts.rules = {{"Is there", 0.8, std::nullopt}, {"real or fake", std::nullopt, 0.9}};
    MockVQAModel vqa(opts);
    int yes = 0;
    for (int i = 0; i < 500; ++i) {
        const std::string ref = "img" + std::to_string(i) + ".png";
        const auto a = vqa.answer(ref, "Is there a chef in this image?");
        REQUIRE(a == vqa.answer(ref, "Is there a chef in this image?"));
        REQUIRE((a.answer == "yes" || a.answer == "no"));
        REQUIRE(a.score >= 0.0);
        REQUIRE(a.score <= 1.0);
        if (a.answer == "yes") ++yes;
    }
    REQUIRE(yes > 350);
    REQUIRE(yes < 450);
    const auto q3 = vqa.answer("img1.png", "Is this image real or fake?");
    REQUIRE((q3.answer == "real" || q3.answer == "fake"));
}

TEST_CASE("mock detector default box, table, empty, and clipping") {
    const auto root = fresh_root("detect");
    MockImageGenerator gen(root);
    const auto ref = gen.generate("p", 3, 40, 20);

    MockPersonDetector::Options opts;
    opts.default_box = BoundingBox{0.25, 0.25, 0.75, 0.75, 0.9};
    MockPersonDetector det(root, opts);
    const auto boxes = det.detect(ref, "person");
    REQUIRE(boxes.size() == 1);
    REQUIRE(boxes[0].x0 == 10.0);
    REQUIRE(boxes[0].y1 == 15.0);
    REQUIRE(boxes[0].confidence == 0.9);

    MockPersonDetector::Options table_opts;
    table_opts.table[ref] = {BoundingBox{-5, -5, 100, 100, 0.5}};
    MockPersonDetector det2(root, table_opts);
    const auto clipped = det2.detect(ref, "person");
    REQUIRE(clipped[0].x0 == 0.0);
    REQUIRE(clipped[0].x1 == 40.0);
    REQUIRE(clipped[0].y1 == 20.0);

    MockPersonDetector det3(root, {});
    REQUIRE(det3.detect(ref, "person").empty());
    REQUIRE_THROWS_AS(det3.detect(ref, ""), std::invalid_argument);
}

TEST_CASE("mock segmenter fills exactly the box rectangle") {
    const auto root = fresh_root("segment");
    MockImageGenerator gen(root);
    const auto ref = gen.generate("p", 3, 20, 20);
    MockSegmenter seg(root);

    const auto full = seg.segment(ref, BoundingBox{0, 0, 20, 20, 1.0});
    const Image full_mask = read_png(root / full);
    REQUIRE(full_mask.channels == 1);
    for (auto px : full_mask.pixels) REQUIRE(px == 255);

    // 10x10 box in a 20x20 image: exactly 25% of pixels.
    const auto quarter = seg.segment(ref, BoundingBox{5, 5, 15, 15, 1.0});
    const Image quarter_mask = read_png(root / quarter);
    std::size_t on = 0;
    for (auto px : quarter_mask.pixels) {
        REQUIRE((px == 0 || px == 255));
        if (px == 255) ++on;
    }
    REQUIRE(on == 100);

    REQUIRE_THROWS_AS(seg.segment(ref, BoundingBox{5, 5, 5, 15, 1.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(seg.segment(ref, BoundingBox{5, 5, 25, 15, 1.0}), std::invalid_argument);
}

TEST_CASE("mock race classifier: table, marker decoding, and no-face") {
    const auto root = fresh_root("race");
    MockImageGenerator gen(root);
    const auto base_ref = gen.generate("base", 1, 24, 24);
    write_png(Image::filled(24, 24, 1, 255), root / "mask.png");
    MockInpainter inpaint(root);

    MockRaceClassifier::Options opts;
    opts.table["known.png"] = "EastAsian";
    opts.table["faceless.png"] = "no_face";
    MockRaceClassifier classifier(root, opts);

    REQUIRE(classifier.classify("known.png") == DemographicGroup::EastAsian);
    REQUIRE_THROWS_AS(classifier.classify("faceless.png"), NoFaceError);

    for (DemographicGroup g : kAllGroups) {
        const std::string prompt =
            "A photo of the face of a " + std::string(prompt_identifier(g)) + " chef";
        const auto variant = inpaint.inpaint(base_ref, "mask.png", prompt, 5);
        REQUIRE(classifier.classify(variant) == g);
    }

    // Unmarked image (no table entry, no marker) reads as no-face.
    REQUIRE_THROWS_AS(classifier.classify(base_ref), NoFaceError);
}

TEST_CASE("mock zero-shot classifier table and rule output") {
    MockZeroShotClassifier::Options opts;
    opts.table["img.png"] = {0.9, -0.3};
    MockZeroShotClassifier zs(opts);
    REQUIRE(zs.similarities("img.png", {"a", "b"}) == std::vector<double>{0.9, -0.3});
    REQUIRE_THROWS_AS(zs.similarities("img.png", {"a"}), AdapterError);

    const auto sims = zs.similarities("other.png", {"a", "b", "c"});
    REQUIRE(sims.size() == 3);
    for (double s : sims) {
        REQUIRE(s >= -1.0);
        REQUIRE(s <= 1.0);
    }
    REQUIRE(sims == zs.similarities("other.png", {"a", "b", "c"}));
    REQUIRE_THROWS_AS(zs.similarities("other.png", {}), std::invalid_argument);
}

TEST_CASE("mock generative scorer sums per-token log probabilities") {
    MockGenerativeScorer::Options opts;
    opts.token_logprobs["chef"] = {-1.0, -0.5};
    opts.token_logprobs["doctor"] = {-2.0};
    MockGenerativeScorer scorer(opts);
    const auto joints = scorer.log_probs("img.png", "T: {answer}", {"chef", "doctor"});
    REQUIRE(joints.size() == 2);
    REQUIRE_THAT(joints[0], Catch::Matchers::WithinAbs(-1.5, 1e-12));
    REQUIRE_THAT(joints[1], Catch::Matchers::WithinAbs(-2.0, 1e-12));

    const auto unknown = scorer.log_probs("img.png", "T: {answer}", {"line cook"});
    REQUIRE(unknown.size() == 1);
    REQUIRE(unknown[0] < 0.0);
    REQUIRE(unknown == scorer.log_probs("img.png", "T: {answer}", {"line cook"}));
    REQUIRE_THROWS_AS(scorer.log_probs("img.png", "T", {}), std::invalid_argument);
}

TEST_CASE("mock suite builds from the documented config schema") {
    const auto root = fresh_root("suite");
    const auto config = nlohmann::ordered_json::parse(R"({
      "generator": {"grayscale_every": 5},
      "vqa": {"rules": [{"question_contains": "Is there", "yes_rate": 1.0}]},
      "detector": {"default_box": {"x0": 0.1, "y0": 0.1, "x1": 0.9, "y1": 0.9, "confidence": 0.8}},
      "race_classifier": {"mismatch_every": 7},
      "zero_shot": {"label_bias": {"chef": 0.4}},
      "scorer": {"token_logprobs": {"chef": [-1.0]}}
    })");
    const AdapterSuite suite = make_mock_suite(root, config);
    REQUIRE(suite.generator != nullptr);
    const auto ref = suite.generator->generate("p", 1, 16, 16);
    REQUIRE(suite.vqa->answer(ref, "Is there a chef in this image?").answer == "yes");
    REQUIRE(suite.detector->detect(ref, "person").size() == 1);
    const auto sims = suite.zero_shot->similarities(ref, {"A photo of a chef", "A photo of a pilot"});
    REQUIRE(sims[0] > sims[1]);
    REQUIRE(suite.scorer->log_probs(ref, "T", {"chef"})[0] == -1.0);
}
