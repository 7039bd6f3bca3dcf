#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "slcnn/audio.hpp"
#include "slcnn/checkpoint.hpp"
#include "slcnn/aggregate.hpp"
#include "slcnn/manifest.hpp"

using namespace slcnn;
namespace fs = std::filesystem;

namespace {

fs::path work_root() {
    const fs::path dir = fs::temp_directory_path() / "slcnn_cli_tests";
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SLCNN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// one tiny corpus + config shared by the pipeline cases, built once
struct Fixture {
    fs::path root, corpus, cfg_path, run_dir;

    Fixture() {
        root = work_root();
        fs::remove_all(root);
        fs::create_directories(root);
        corpus = root / "corpus";
        run_dir = root / "run";

        REQUIRE(run_cli("make-synthetic --out " + corpus.string() +
                        " --classes 3 --clips-per-class 5 --seed 2") == 0);

        cfg_path = root / "pipe.cfg";
        std::ofstream cfg(cfg_path);
        cfg << "channels = 8\n"
               "scales = 2^3,3^2\n"
               "levels = -1,-2\n"
               "dcnn.max_epochs = 2\n"
               "dcnn.max_segments_per_clip = 6\n"
               "dcnn.batch_size = 16\n"
               "clf.max_epochs = 20\n"
               "clf.hidden = 16\n";
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

} // namespace

TEST_CASE("make-synthetic writes the advertised corpus deterministically") {
    Fixture& f = fixture();

    long wavs = 0;
    for (const auto& entry : fs::directory_iterator(f.corpus / "wavs_single")) {
        (void)entry;
        ++wavs;
    }
    CHECK(wavs == 15); // classes * clips-per-class

    DatasetManifest single = DatasetManifest::parse_file(f.corpus / "manifest_single.tsv");
    CHECK(single.task == Task::single_label);
    CHECK(single.rows.size() == 15);
    CHECK_NOTHROW(single.validate_for_training());
    DatasetManifest multi = DatasetManifest::parse_file(f.corpus / "manifest_multi.tsv");
    CHECK(multi.task == Task::multi_label);
    CHECK(multi.rows.size() == 15);

    // every generated clip decodes inside [-1, 1]
    for (const ManifestRow& row : single.rows) {
        WaveClip clip = decode_wav(single.resolve_path(row));
        for (float s : clip.samples) {
            CHECK(s >= -1.0f);
            CHECK(s <= 1.0f);
        }
    }

    // same seed, same bytes
    const fs::path again = f.root / "corpus_again";
    REQUIRE(run_cli("make-synthetic --out " + again.string() +
                    " --classes 3 --clips-per-class 5 --seed 2") == 0);
    CHECK(slurp(f.corpus / "manifest_single.tsv") == slurp(again / "manifest_single.tsv"));
    DatasetManifest m2 = DatasetManifest::parse_file(again / "manifest_single.tsv");
    CHECK(slurp(f.corpus / m2.rows[0].path) == slurp(again / m2.rows[0].path));

    // different seed, different audio
    const fs::path other = f.root / "corpus_other";
    REQUIRE(run_cli("make-synthetic --out " + other.string() +
                    " --classes 3 --clips-per-class 5 --seed 3") == 0);
    CHECK(slurp(f.corpus / m2.rows[0].path) != slurp(other / m2.rows[0].path));
}

TEST_CASE("bad usage exits with code 2") {
    Fixture& f = fixture();
    const std::string manifest = (f.corpus / "manifest_single.tsv").string();
    CHECK(run_cli("train-dcnn --manifest " + manifest + " --scale 7^2x --out " +
                  (f.root / "x").string()) == 2);
    CHECK(run_cli("train-dcnn --manifest " + manifest + " --out " + (f.root / "x").string()) == 2);
    CHECK(run_cli("definitely-not-a-subcommand") == 2);
    // runtime failure (missing manifest file) exits 1..2 by class; missing
    // file is a usage-level ConfigError here
    CHECK(run_cli("train-dcnn --manifest /nope.tsv --scale 2^3 --out " +
                  (f.root / "x").string()) == 2);
}

TEST_CASE("train-dcnn writes a loadable checkpoint and reruns byte-identically") {
    Fixture& f = fixture();
    const std::string manifest = (f.corpus / "manifest_single.tsv").string();
    const std::string base = "train-dcnn --config " + f.cfg_path.string() + " --manifest " +
                             manifest + " --seed 7 --out ";

    REQUIRE(run_cli(base + f.run_dir.string() + " --scale 2^3") == 0);
    const fs::path ckpt = f.run_dir / "dcnn_2^3.ckpt";
    REQUIRE(fs::exists(ckpt));
    LoadedModel loaded = load_checkpoint(ckpt);
    CHECK(loaded.model.spec().name() == "2^3");
    CHECK(loaded.sample_rate == 22050);
    CHECK(fs::exists(f.run_dir / "train_2^3.tsv"));
    CHECK(fs::exists(f.run_dir / "config.effective"));

    const fs::path rerun = f.root / "rerun";
    REQUIRE(run_cli(base + rerun.string() + " --scale 2^3") == 0);
    CHECK(slurp(ckpt) == slurp(rerun / "dcnn_2^3.ckpt"));

    // second scale for the extract stage
    REQUIRE(run_cli(base + f.run_dir.string() + " --scale 3^2") == 0);
}

TEST_CASE("extract writes one feature file per split with the right layout") {
    Fixture& f = fixture();
    const std::string manifest = (f.corpus / "manifest_single.tsv").string();

    REQUIRE(run_cli("extract --config " + f.cfg_path.string() + " --manifest " + manifest +
                    " --out " + f.run_dir.string()) == 0);

    DatasetManifest m = DatasetManifest::parse_file(f.corpus / "manifest_single.tsv");
    for (Split split : {Split::train, Split::valid, Split::test}) {
        const fs::path file = f.run_dir / ("features_" + split_name(split) + ".tsv");
        REQUIRE(fs::exists(file));
        std::vector<SongFeature> features = read_feature_file(file);
        CHECK(features.size() == m.rows_for(split).size());
        // 2 scales x 2 levels x 8 channels
        CHECK(features.front().vec.size() == 32);
        CHECK(features.front().layout.size() == 4);
    }

    // missing checkpoint names the scale
    const std::string cmd = std::string(SLCNN_CLI_PATH) + " extract --config " +
                            f.cfg_path.string() + " --manifest " + manifest + " --scales 5^5" +
                            " --checkpoints " + f.run_dir.string() + " --out " +
                            (f.root / "x").string() + " 2> " + (f.root / "err.txt").string();
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 2);
    CHECK(slurp(f.root / "err.txt").find("5^5") != std::string::npos);
}

TEST_CASE("export-features subsets blocks") {
    Fixture& f = fixture();
    const fs::path in_file = f.run_dir / "features_train.tsv";
    const fs::path out_file = f.root / "ablation.tsv";
    REQUIRE(run_cli("export-features --features " + in_file.string() + " --out " +
                    out_file.string() + " --scales 3^2 --levels -1") == 0);
    std::vector<SongFeature> sub = read_feature_file(out_file);
    CHECK(sub.front().vec.size() == 8);
    REQUIRE(sub.front().layout.size() == 1);
    CHECK(sub.front().layout[0].scale == "3^2");
    CHECK(sub.front().layout[0].level == -1);

    std::vector<SongFeature> full = read_feature_file(in_file);
    CHECK(sub.size() == full.size());
}

TEST_CASE("train-classifier and evaluate complete the pipeline") {
    Fixture& f = fixture();
    const std::string manifest = (f.corpus / "manifest_single.tsv").string();

    REQUIRE(run_cli("train-classifier --config " + f.cfg_path.string() + " --manifest " +
                    manifest + " --seed 5 --out " + f.run_dir.string()) == 0);
    REQUIRE(fs::exists(f.run_dir / "classifier.ckpt"));

    REQUIRE(run_cli("evaluate --config " + f.cfg_path.string() + " --manifest " + manifest +
                    " --runs 1 --seed 5 --out " + f.run_dir.string()) == 0);
    const std::string table = slurp(f.run_dir / "report.txt");
    CHECK(table.find("runs: 1") != std::string::npos);
    CHECK(table.find("std:  0") != std::string::npos); // runs=1 reports std 0

    // records file carries run, seed, metric; its mean matches the table
    const std::string records = slurp(f.run_dir / "report.tsv");
    CHECK(records.find("0\t5\t") == 0);

    // identical invocation, byte-identical reports
    const fs::path second = f.root / "eval_again";
    REQUIRE(run_cli("evaluate --config " + f.cfg_path.string() + " --manifest " + manifest +
                    " --features " + f.run_dir.string() + " --runs 1 --seed 5 --out " +
                    second.string()) == 0);
    CHECK(slurp(second / "report.txt") == slurp(f.run_dir / "report.txt"));
    CHECK(slurp(second / "report.tsv") == slurp(f.run_dir / "report.tsv"));
}
