#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dagan.h"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / "frontalize_capi_test";
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<const char*> tiny_options() {
    static const char* opts[] = {
        "image_size=16", "base_channels=8", "n_identities=8",   "batch_size=4",
        "scale_count=2", "steps=2",         "embedder_epochs=40", "seed=21",
        "yaws=-60,-30,0,30,60",
    };
    return {opts, opts + sizeof(opts) / sizeof(opts[0])};
}

}  // namespace

TEST_CASE("null output pointers and bad arguments are rejected") {
    CHECK(dagan_session_create(nullptr, nullptr, 0, nullptr) == DAGAN_E_INVALID);
    CHECK(dagan_session_open(nullptr, nullptr) == DAGAN_E_INVALID);
    CHECK(dagan_train(nullptr, 1, nullptr, 0) == DAGAN_E_INVALID);
    CHECK(dagan_evaluate(nullptr, 1, nullptr, 0) == DAGAN_E_INVALID);
    CHECK(std::strlen(dagan_last_error()) > 0);
}

TEST_CASE("a missing config file fails and the error names the path") {
    dagan_session* s = nullptr;
    dagan_status st = dagan_session_create("/nonexistent/nowhere.cfg", nullptr, 0, &s);
    CHECK(st == DAGAN_E_IO);
    CHECK(s == nullptr);
    CHECK(std::string(dagan_last_error()).find("/nonexistent/nowhere.cfg") != std::string::npos);
}

TEST_CASE("an invalid option value is rejected before training") {
    dagan_session* s = nullptr;
    const char* opts[] = {"batch_size=0"};
    dagan_status st = dagan_session_create(nullptr, opts, 1, &s);
    CHECK(st == DAGAN_E_INVALID);
    CHECK(s == nullptr);
}

TEST_CASE("train, checkpoint, reopen, synthesize, and evaluate round trip") {
    TempDir tmp;
    auto opts = tiny_options();
    dagan_session* s = nullptr;
    REQUIRE(dagan_session_create(nullptr, opts.data(), (int)opts.size(), &s) == DAGAN_OK);

    std::string out_dir = (tmp.path / "run").string();
    CHECK(dagan_train(s, 2, out_dir.c_str(), 0) == DAGAN_OK);
    CHECK(fs::exists(fs::path(out_dir) / "train_log.txt"));

    std::string ckpt = (tmp.path / "model.ckpt").string();
    REQUIRE(dagan_save_checkpoint(s, ckpt.c_str()) == DAGAN_OK);
    dagan_session_destroy(s);
    s = nullptr;

    REQUIRE(dagan_session_open(ckpt.c_str(), &s) == DAGAN_OK);

    std::string sheet = (tmp.path / "sheet.pgm").string();
    double yaws[] = {-60, 0, 60};
    CHECK(dagan_synthesize(s, yaws, 3, 1, sheet.c_str()) == DAGAN_OK);
    CHECK(fs::exists(sheet));

    std::vector<char> buf(1 << 15);
    CHECK(dagan_evaluate(s, 1, buf.data(), buf.size()) == DAGAN_OK);
    CHECK(std::string(buf.data()).find("rank-1") != std::string::npos);

    std::string mask_dir = (tmp.path / "masks").string();
    CHECK(dagan_export_masks(s, 0, mask_dir.c_str()) == DAGAN_OK);
    bool any_mask = false;
    for (auto& e : fs::directory_iterator(mask_dir)) any_mask = any_mask || e.is_regular_file();
    CHECK(any_mask);

    std::string pair_dir = (tmp.path / "pairs").string();
    CHECK(dagan_export_pairs(s, 2, pair_dir.c_str()) == DAGAN_OK);

    dagan_session_destroy(s);
}

TEST_CASE("config files and option overlays cooperate") {
    TempDir tmp;
    fs::path cfg = tmp.path / "run.cfg";
    {
        std::ofstream f(cfg);
        f << "# test configuration\n";
        f << "image_size=16\nbase_channels=8\nn_identities=8\nbatch_size=4\n";
        f << "scale_count=2\nsteps=1\nembedder_epochs=40\nseed=21\nyaws=-30,0,30\n";
    }
    dagan_session* s = nullptr;
    const char* opts[] = {"seed=22"};
    REQUIRE(dagan_session_create(cfg.string().c_str(), opts, 1, &s) == DAGAN_OK);
    CHECK(dagan_train(s, 1, nullptr, 0) == DAGAN_OK);
    dagan_session_destroy(s);
}

TEST_CASE("opening a garbage checkpoint fails cleanly") {
    TempDir tmp;
    fs::path bad = tmp.path / "bad.ckpt";
    std::ofstream(bad) << "this is not a checkpoint";
    dagan_session* s = nullptr;
    dagan_status st = dagan_session_open(bad.string().c_str(), &s);
    CHECK(st != DAGAN_OK);
    CHECK(s == nullptr);
}

TEST_CASE("the gradient-check entry point reports and self-tests") {
    std::vector<char> buf(1 << 15);
    int all_pass = 0;
    REQUIRE(dagan_gradcheck(5, 0, buf.data(), buf.size(), &all_pass) == DAGAN_OK);
    CHECK(all_pass == 1);
    CHECK(std::string(buf.data()).find("ok") != std::string::npos);

    all_pass = 1;
    REQUIRE(dagan_gradcheck(5, 1, buf.data(), buf.size(), &all_pass) == DAGAN_OK);
    CHECK(all_pass == 0);
    CHECK(std::string(buf.data()).find("FAIL") != std::string::npos);
}
