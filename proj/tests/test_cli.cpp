#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "ucos/hash.hpp"
#include "ucos/imageio.hpp"
#include "ucos/rng.hpp"
#include "test_util.hpp"

using namespace ucos;
namespace fs = std::filesystem;

namespace {

int run(const std::string& cmd) {
    int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string cli() { return std::string(UCOS_CLI_PATH); }

// Toy dataset tree: <root>/{cod,sod}/images + gt squares.
void make_toy_tree(const fs::path& root, int per_set, int size, uint64_t seed) {
    Rng rng(seed);
    for (const std::string name : {"cod", "sod"}) {
        fs::create_directories(root / name / "images");
        fs::create_directories(root / name / "gt");
        for (int i = 0; i < per_set; ++i) {
            int side = size / 2;
            int r0 = static_cast<int>(rng.bounded(size - side));
            int c0 = static_cast<int>(rng.bounded(size - side));
            ImageTensor img = testutil::square_on_noise(size, r0, c0, side, rng);
            std::vector<uint8_t> bytes(img.data.size());
            for (size_t j = 0; j < bytes.size(); ++j)
                bytes[j] = static_cast<uint8_t>(std::lround(img.data[j] * 255.f));
            std::string stem = name + std::to_string(i);
            write_png_rgb(root / name / "images" / (stem + ".png"), bytes.data(), size, size);
            std::vector<uint8_t> gt(static_cast<size_t>(size) * size, 0);
            for (int r = r0; r < r0 + side; ++r)
                for (int c = c0; c < c0 + side; ++c) gt[static_cast<size_t>(r) * size + c] = 255;
            write_png_gray(root / name / "gt" / (stem + ".png"), gt.data(), size, size);
        }
    }
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("help and usage errors") {
    testutil::TempDir dir("clihelp");
    std::string null = " > " + (dir.path() / "out.txt").string() + " 2>&1";
    CHECK(run(cli() + " --help" + null) == 0);
    CHECK(run(cli() + " split --help" + null) == 0);
    std::string help = read_file(dir.path() / "out.txt");
    CHECK(help.find("--cod-root") != std::string::npos);
    CHECK(help.find("--per-source") != std::string::npos);

    // unknown flag and missing required flags are usage errors
    CHECK(run(cli() + " split --bogus 1" + null) == 2);
    CHECK(run(cli() + " split" + null) == 2);
    CHECK(run(cli() + null) == 2);
    // missing dataset root is a validation error
    CHECK(run(cli() + " split --cod-root /nonexistent --sod-root /nonexistent" + null) == 2);
}

TEST_CASE("full toy pipeline through the binary") {
    testutil::TempDir dir("clipipe");
    const int size = 64;
    make_toy_tree(dir.path() / "data", 6, size, 42);
    std::string quiet = " >> " + (dir.path() / "log.txt").string() + " 2>&1";

    // split
    fs::path manifest = dir.path() / "split.tsv";
    std::string split_cmd = cli() + " split --cod-root " + (dir.path() / "data/cod").string() +
                            " --sod-root " + (dir.path() / "data/sod").string() +
                            " --seed 5 --per-source 3 --out " + manifest.string();
    REQUIRE(run(split_cmd + quiet) == 0);
    {
        std::ifstream in(manifest);
        std::string line;
        std::getline(in, line);
        CHECK(line == "seed=5");
        size_t rows = 0;
        while (std::getline(in, line))
            if (!line.empty()) ++rows;
        CHECK(rows == 6);  // 2 * per-source
    }
    // determinism: rerun into a second file, byte-identical
    fs::path manifest2 = dir.path() / "split2.tsv";
    REQUIRE(run(cli() + " split --cod-root " + (dir.path() / "data/cod").string() +
                " --sod-root " + (dir.path() / "data/sod").string() +
                " --seed 5 --per-source 3 --out " + manifest2.string() + quiet) == 0);
    CHECK(fnv64_file(manifest) == fnv64_file(manifest2));

    // pseudo-label
    fs::path pl_cache = dir.path() / "plcache";
    std::string pl_cmd = cli() + " pseudo-label --split " + manifest.string() +
                         " --arch patch_stats_8 --image-size " + std::to_string(size) +
                         " --pl-cache " + pl_cache.string();
    REQUIRE(run(pl_cmd + quiet) == 0);
    REQUIRE(run(pl_cmd + quiet) == 0);  // idempotent rerun

    // train (2 epochs to keep the test quick)
    fs::path cfg = dir.path() / "train.cfg";
    std::ofstream(cfg) << "epochs=2\nimage_h=" << size << "\nimage_w=" << size
                       << "\nbatch_size=2\nseed=3\n";

    // a config with an unknown key is a validation error (exit 2)
    {
        fs::path bad_cfg = dir.path() / "bad.cfg";
        std::ofstream(bad_cfg) << "epochs=2\nlearning=0.1\n";
        CHECK(run(cli() + " train --config " + bad_cfg.string() + " --split " +
                  manifest.string() + " --arch patch_stats_8" + quiet) == 2);
    }
    fs::path run_dir = dir.path() / "run";
    std::string train_cmd = cli() + " train --config " + cfg.string() + " --split " +
                            manifest.string() + " --arch patch_stats_8 --image-size-ignored 0";
    // intentionally bad flag first: usage error
    CHECK(run(train_cmd + quiet) == 2);
    train_cmd = cli() + " train --config " + cfg.string() + " --split " + manifest.string() +
                " --arch patch_stats_8 --pl-cache " + pl_cache.string() + " --out " +
                run_dir.string();
    REQUIRE(run(train_cmd + quiet) == 0);
    CHECK(fs::exists(run_dir / "checkpoint.bin"));
    CHECK(fs::exists(run_dir / "loss_log.csv"));
    {
        std::ifstream in(run_dir / "loss_log.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header == "epoch,step,seg,adv,total");
    }

    // predict
    fs::path pred = dir.path() / "pred";
    std::string predict_cmd = cli() + " predict --checkpoint " +
                              (run_dir / "checkpoint.bin").string() + " --images " +
                              (dir.path() / "data/cod").string() + " --arch patch_stats_8" +
                              " --image-size " + std::to_string(size) + " --out " +
                              pred.string();
    REQUIRE(run(predict_cmd + quiet) == 0);
    size_t pngs = 0;
    for (const auto& e : fs::directory_iterator(pred))
        if (e.path().extension() == ".png") ++pngs;
    CHECK(pngs == 6);  // one per input image

    // prediction values are round(255 * P) of a soft map; just check shape
    ImageU8 one = read_image(pred / "cod0.png");
    CHECK(one.height == size);
    CHECK(one.width == size);
    CHECK(one.channels == 1);

    // native-resolution write-back: a non-square input comes back at its
    // own size even though inference ran at --image-size
    {
        fs::path odd_dir = dir.path() / "odd" / "images";
        fs::create_directories(odd_dir);
        Rng rng(77);
        std::vector<uint8_t> rgb(static_cast<size_t>(48) * 80 * 3);
        for (auto& v : rgb) v = static_cast<uint8_t>(rng.bounded(256));
        write_png_rgb(odd_dir / "odd.png", rgb.data(), 48, 80);
        fs::path odd_pred = dir.path() / "odd_pred";
        REQUIRE(run(cli() + " predict --checkpoint " + (run_dir / "checkpoint.bin").string() +
                    " --images " + (dir.path() / "odd").string() +
                    " --arch patch_stats_8 --image-size " + std::to_string(size) + " --out " +
                    odd_pred.string() + quiet) == 0);
        ImageU8 back = read_image(odd_pred / "odd.png");
        CHECK(back.height == 48);
        CHECK(back.width == 80);
    }

    // missing checkpoint: validation error
    CHECK(run(cli() + " predict --checkpoint /nonexistent.bin --images " +
              (dir.path() / "data/cod").string() + " --arch patch_stats_8 --out " +
              pred.string() + quiet) == 2);

    // eval against the toy ground truth
    fs::path report = dir.path() / "report.csv";
    std::string eval_cmd = cli() + " eval --pred " + pred.string() + " --gt " +
                           (dir.path() / "data/cod/gt").string() + " --name toy --out " +
                           report.string();
    REQUIRE(run(eval_cmd + " > " + (dir.path() / "eval_out.txt").string() + " 2>&1") == 0);
    std::string table = read_file(dir.path() / "eval_out.txt");
    CHECK(table.find("mIoU") != std::string::npos);
    CHECK(table.find("toy") != std::string::npos);
    std::string csv = read_file(report);
    CHECK(csv.find("dataset,n_images,miou,acc,f_max,f_mean,f_weighted,s,e_max,e_mean,mae") !=
          std::string::npos);

    // identical pred/gt dirs score all ones
    fs::path self_report = dir.path() / "self.csv";
    REQUIRE(run(cli() + " eval --pred " + (dir.path() / "data/cod/gt").string() + " --gt " +
                (dir.path() / "data/cod/gt").string() + " --name self --out " +
                self_report.string() + quiet) == 0);
    std::string self_csv = read_file(self_report);
    CHECK(self_csv.find("self,6,1.000000,1.000000") != std::string::npos);
}

TEST_CASE("eval multi-dataset layout") {
    testutil::TempDir dir("climulti");
    // two datasets, predictions identical to gts
    for (const std::string name : {"seta", "setb"}) {
        fs::create_directories(dir.path() / "pred" / name);
        fs::create_directories(dir.path() / "gt" / name);
        std::vector<uint8_t> mask(16 * 16, 0);
        for (int r = 4; r < 12; ++r)
            for (int c = 4; c < 12; ++c) mask[r * 16 + c] = 255;
        write_png_gray(dir.path() / "pred" / name / "x.png", mask.data(), 16, 16);
        write_png_gray(dir.path() / "gt" / name / "x.png", mask.data(), 16, 16);
    }
    fs::path report = dir.path() / "multi.csv";
    std::string cmd = cli() + " eval --pred " + (dir.path() / "pred").string() + " --gt " +
                      (dir.path() / "gt").string() + " --datasets seta,setb --out " +
                      report.string() + " > /dev/null 2>&1";
    REQUIRE(run(cmd) == 0);
    std::string csv = read_file(report);
    CHECK(csv.find("seta,1,") != std::string::npos);
    CHECK(csv.find("setb,1,") != std::string::npos);
}
