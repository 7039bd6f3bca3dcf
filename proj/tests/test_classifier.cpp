#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "slcnn/checkpoint.hpp"
#include "slcnn/classifier.hpp"
#include "slcnn/metrics.hpp"

using namespace slcnn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "slcnn_classifier_tests";
    fs::create_directories(dir);
    return dir;
}

struct SeparableSet {
    std::vector<SongFeature> train, valid, test;
    DatasetManifest manifest;
};

// Two well-separated Gaussian-ish blobs in 6 dimensions.
SeparableSet separable_set(uint64_t seed) {
    Rng rng(seed);
    SeparableSet set;
    set.manifest.task = Task::single_label;
    set.manifest.labels = {"left", "right"};

    int counter = 0;
    auto add = [&](Split split, std::vector<SongFeature>& bucket, int cls) {
        SongFeature f;
        f.song_id = "song" + std::to_string(counter);
        const float center = cls == 0 ? -2.0f : 2.0f;
        for (int d = 0; d < 6; ++d) {
            f.vec.push_back(center + static_cast<float>(rng.uniform(-0.5, 0.5)));
        }
        bucket.push_back(f);

        ManifestRow row;
        row.clip_id = f.song_id;
        row.path = f.song_id + ".wav";
        row.split = split;
        row.label_ids = {cls};
        set.manifest.rows.push_back(row);
        ++counter;
    };
    for (int i = 0; i < 12; ++i) add(Split::train, set.train, i % 2);
    for (int i = 0; i < 4; ++i) add(Split::valid, set.valid, i % 2);
    for (int i = 0; i < 8; ++i) add(Split::test, set.test, i % 2);
    set.manifest.validate();
    return set;
}

TrainConfig quick_config(uint64_t seed) {
    TrainConfig cfg;
    cfg.lr = 0.05;
    cfg.batch_size = 8;
    cfg.max_epochs = 60;
    cfg.patience = 5;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("a linearly separable set is classified perfectly") {
    SeparableSet set = separable_set(5);
    ClassifierSpec spec;
    spec.hidden = {16};
    spec.dropout = 0.2;

    ClassifierTrainResult result =
        train_classifier(set.train, set.valid, set.manifest, spec, quick_config(3));

    std::vector<std::vector<float>> scores;
    std::vector<long> labels;
    for (size_t i = 0; i < set.test.size(); ++i) {
        scores.push_back(result.classifier.predict(set.test[i].vec));
        labels.push_back(static_cast<long>(i % 2));
    }
    CHECK(accuracy(scores, labels) == 1.0);
}

TEST_CASE("zero hidden layers degenerate to logistic regression") {
    ClassifierSpec spec;
    spec.input_dim = 3;
    spec.hidden = {};
    spec.dropout = 0.0;
    spec.num_outputs = 1;
    spec.task = Task::multi_label;
    Classifier clf = Classifier::build(spec, 7);
    CHECK(clf.params().size() == 2); // one weight matrix, one bias

    // prediction is sigmoid(w.x + b), checked by hand
    auto state = clf.named_state();
    Tensor<float>& w = *state[0].second;
    Tensor<float>& b = *state[1].second;
    w = Tensor<float>(1, 3, 1, {0.5f, -1.0f, 2.0f});
    b = Tensor<float>(1, 1, 1, {0.25f});
    clf.set_standardizer({{0, 0, 0}, {1, 1, 1}}); // identity transform

    const std::vector<float> x{1.0f, 2.0f, 0.5f};
    const double z = 0.5 * 1.0 - 1.0 * 2.0 + 2.0 * 0.5 + 0.25;
    const std::vector<float> got = clf.predict(x);
    REQUIRE(got.size() == 1);
    CHECK(got[0] == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-6));
}

TEST_CASE("same seed gives a bitwise-identical classifier checkpoint") {
    SeparableSet set = separable_set(11);
    ClassifierSpec spec;
    spec.hidden = {8};

    ClassifierTrainResult a =
        train_classifier(set.train, set.valid, set.manifest, spec, quick_config(9));
    ClassifierTrainResult b =
        train_classifier(set.train, set.valid, set.manifest, spec, quick_config(9));

    const fs::path pa = temp_dir() / "a.ckpt";
    const fs::path pb = temp_dir() / "b.ckpt";
    a.classifier.save(pa);
    b.classifier.save(pb);
    std::ifstream fa(pa, std::ios::binary), fb(pb, std::ios::binary);
    const std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ba == bb);
}

TEST_CASE("classifier checkpoints round-trip through the shared container") {
    SeparableSet set = separable_set(13);
    ClassifierSpec spec;
    spec.hidden = {8, 4};
    spec.dropout = 0.3;
    ClassifierTrainResult result =
        train_classifier(set.train, set.valid, set.manifest, spec, quick_config(21));

    const fs::path path = temp_dir() / "roundtrip.ckpt";
    result.classifier.save(path);
    Classifier loaded = Classifier::load(path);
    CHECK(loaded.spec().hidden == std::vector<long>{8, 4});
    CHECK(loaded.spec().task == Task::single_label);

    for (const SongFeature& f : set.test) {
        const std::vector<float> a = result.classifier.predict(f.vec);
        const std::vector<float> b = loaded.predict(f.vec);
        REQUIRE(a.size() == b.size());
        for (size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
    }

    // a classifier checkpoint does not load as a dcnn
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
}

TEST_CASE("inference is dropout-free and repeatable; softmax head sums to 1") {
    SeparableSet set = separable_set(17);
    ClassifierSpec spec;
    spec.hidden = {12};
    spec.dropout = 0.5;
    ClassifierTrainResult result =
        train_classifier(set.train, set.valid, set.manifest, spec, quick_config(23));

    const std::vector<float> a = result.classifier.predict(set.test[0].vec);
    const std::vector<float> b = result.classifier.predict(set.test[0].vec);
    CHECK(a == b);
    double sum = 0;
    for (float v : a) {
        CHECK(v > 0.0f);
        sum += v;
    }
    CHECK(std::fabs(sum - 1.0) < 1e-6);

    // dimension mismatch is rejected
    std::vector<float> wrong(set.test[0].vec);
    wrong.push_back(0.0f);
    CHECK_THROWS_AS(result.classifier.predict(wrong), ShapeError);
}

TEST_CASE("argmax is invariant under a constant added to every logit") {
    SeparableSet set = separable_set(19);
    ClassifierSpec spec;
    spec.hidden = {8};
    ClassifierTrainResult result =
        train_classifier(set.train, set.valid, set.manifest, spec, quick_config(29));

    auto argmax = [](const std::vector<float>& v) {
        size_t best = 0;
        for (size_t i = 1; i < v.size(); ++i) {
            if (v[i] > v[best]) best = i;
        }
        return best;
    };

    std::vector<size_t> before;
    for (const SongFeature& f : set.test) before.push_back(argmax(result.classifier.predict(f.vec)));

    // shift the head bias: softmax scores change, the ranking cannot
    auto state = result.classifier.named_state();
    Tensor<float>* head_bias = state.back().second;
    for (long c = 0; c < head_bias->channels(); ++c) head_bias->at(0, c, 0) += 3.5f;

    for (size_t i = 0; i < set.test.size(); ++i) {
        CHECK(argmax(result.classifier.predict(set.test[i].vec)) == before[i]);
    }
}

TEST_CASE("predictions are invariant to a pre-standardization shift when refit") {
    // integer-valued features and a power-of-two count keep every
    // standardizer computation exact, so the paired runs match bitwise
    Rng rng(31);
    SeparableSet base;
    base.manifest.task = Task::single_label;
    base.manifest.labels = {"a", "b"};
    int counter = 0;
    auto add = [&](Split split, std::vector<SongFeature>& bucket, int cls) {
        SongFeature f;
        f.song_id = "s" + std::to_string(counter++);
        for (int d = 0; d < 4; ++d) {
            const long v = static_cast<long>(rng.below(9)) - 4 + (cls == 0 ? -4 : 4);
            f.vec.push_back(static_cast<float>(v));
        }
        bucket.push_back(f);
        ManifestRow row;
        row.clip_id = f.song_id;
        row.path = f.song_id + ".wav";
        row.split = split;
        row.label_ids = {cls};
        base.manifest.rows.push_back(row);
    };
    for (int i = 0; i < 8; ++i) add(Split::train, base.train, i % 2);
    for (int i = 0; i < 4; ++i) add(Split::valid, base.valid, i % 2);
    for (int i = 0; i < 4; ++i) add(Split::test, base.test, i % 2);

    SeparableSet shifted = base;
    for (auto bucket : {&shifted.train, &shifted.valid, &shifted.test}) {
        for (SongFeature& f : *bucket) {
            for (float& v : f.vec) v += 1024.0f;
        }
    }

    ClassifierSpec spec;
    spec.hidden = {6};
    spec.dropout = 0.25;
    ClassifierTrainResult r1 =
        train_classifier(base.train, base.valid, base.manifest, spec, quick_config(37));
    ClassifierTrainResult r2 =
        train_classifier(shifted.train, shifted.valid, shifted.manifest, spec, quick_config(37));

    for (size_t i = 0; i < base.test.size(); ++i) {
        const std::vector<float> a = r1.classifier.predict(base.test[i].vec);
        const std::vector<float> b = r2.classifier.predict(shifted.test[i].vec);
        REQUIRE(a.size() == b.size());
        for (size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
    }
}

TEST_CASE("train_classifier validates its inputs") {
    SeparableSet set = separable_set(41);
    ClassifierSpec spec;
    CHECK_THROWS_AS(train_classifier({}, set.valid, set.manifest, spec, quick_config(1)),
                    ConfigError);

    // explicit dim conflicting with the features
    ClassifierSpec wrong;
    wrong.input_dim = 99;
    CHECK_THROWS_AS(train_classifier(set.train, set.valid, set.manifest, wrong, quick_config(1)),
                    ConfigError);

    // song missing from the manifest
    std::vector<SongFeature> stray = set.train;
    stray[0].song_id = "ghost";
    CHECK_THROWS_AS(train_classifier(stray, set.valid, set.manifest, spec, quick_config(1)),
                    ConfigError);
}
