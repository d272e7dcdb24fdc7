#include "dagan.h"

#include <cstring>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "dagan/ablation.hpp"
#include "dagan/config.hpp"
#include "dagan/eval.hpp"
#include "dagan/gradcheck_suite.hpp"
#include "dagan/image_io.hpp"
#include "dagan/trainer.hpp"

struct dagan_session {
    dagan::TrainState state;
};

namespace {

thread_local std::string g_last_error;

dagan_status to_status(const dagan::Error& e) {
    switch (e.kind()) {
        case dagan::ErrorKind::Invalid: return DAGAN_E_INVALID;
        case dagan::ErrorKind::Numeric: return DAGAN_E_NUMERIC;
        case dagan::ErrorKind::Io: return DAGAN_E_IO;
    }
    return DAGAN_E_INVALID;
}

template <typename F>
dagan_status guard(F&& f) {
    try {
        g_last_error.clear();
        f();
        return DAGAN_OK;
    } catch (const dagan::Error& e) {
        g_last_error = e.what();
        return to_status(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return DAGAN_E_INVALID;
    }
}

void copy_out(const std::string& text, char* buf, size_t buf_len) {
    if (!buf || buf_len == 0) return;
    size_t n = std::min(text.size(), buf_len - 1);
    std::memcpy(buf, text.data(), n);
    buf[n] = '\0';
}

dagan::TrainConfig config_from(const char* config_path, const char* const* options,
                               int n_options) {
    std::map<std::string, std::string> kv;
    if (config_path) kv = dagan::read_kv_file(config_path);
    for (int i = 0; i < n_options; ++i) {
        if (!options || !options[i])
            throw dagan::Error(dagan::ErrorKind::Invalid, "null option string");
        std::string opt = options[i];
        auto eq = opt.find('=');
        if (eq == std::string::npos)
            throw dagan::Error(dagan::ErrorKind::Invalid, "option '" + opt + "' is not key=value");
        kv[opt.substr(0, eq)] = opt.substr(eq + 1);
    }
    return dagan::TrainConfig::from_map(kv);
}

void require(bool cond, const char* msg) {
    if (!cond) throw dagan::Error(dagan::ErrorKind::Invalid, msg);
}

}  // namespace

extern "C" {

const char* dagan_last_error(void) { return g_last_error.c_str(); }

dagan_status dagan_session_create(const char* config_path, const char* const* options,
                                  int n_options, dagan_session** out) {
    return guard([&] {
        require(out != nullptr, "out session pointer is null");
        auto cfg = config_from(config_path, options, n_options);
        auto s = std::make_unique<dagan_session>();
        s->state = dagan::init_train_state(cfg);
        *out = s.release();
    });
}

dagan_status dagan_session_open(const char* checkpoint_path, dagan_session** out) {
    return guard([&] {
        require(out != nullptr, "out session pointer is null");
        require(checkpoint_path != nullptr, "checkpoint path is null");
        auto s = std::make_unique<dagan_session>();
        s->state = dagan::load_checkpoint(checkpoint_path);
        *out = s.release();
    });
}

void dagan_session_destroy(dagan_session* s) { delete s; }

dagan_status dagan_train(dagan_session* s, long steps, const char* out_dir, int echo_log) {
    return guard([&] {
        require(s != nullptr, "session is null");
        long n = steps < 0 ? s->state.cfg.steps : steps;
        dagan::run(s->state, n, out_dir ? out_dir : "", echo_log ? &std::cerr : nullptr);
    });
}

dagan_status dagan_save_checkpoint(dagan_session* s, const char* path) {
    return guard([&] {
        require(s != nullptr, "session is null");
        require(path != nullptr, "checkpoint path is null");
        dagan::save_checkpoint(s->state, path);
    });
}

dagan_status dagan_synthesize(dagan_session* s, const double* yaws, int n_yaws, int count,
                              const char* out_path) {
    return guard([&] {
        require(s != nullptr, "session is null");
        require(out_path != nullptr, "output path is null");
        require(yaws != nullptr && n_yaws > 0, "empty pose list");
        std::vector<double> y(yaws, yaws + n_yaws);
        dagan::Tensor grid =
            dagan::synthesize_grid(*s->state.gen, s->state.dataset, y, count);
        dagan::write_image(out_path, grid);
    });
}

dagan_status dagan_evaluate(dagan_session* s, int frontalize, char* report_buf, size_t buf_len) {
    return guard([&] {
        require(s != nullptr, "session is null");
        dagan::EvalReport rep =
            dagan::evaluate(*s->state.gen, *s->state.emb, s->state.dataset, frontalize != 0);
        copy_out(rep.to_text(), report_buf, buf_len);
    });
}

dagan_status dagan_export_masks(dagan_session* s, int identity, const char* out_dir) {
    return guard([&] {
        require(s != nullptr, "session is null");
        require(out_dir != nullptr, "output directory is null");
        require(identity >= 0 && identity < s->state.dataset.n_identities,
                "identity out of range");
        std::filesystem::create_directories(out_dir);
        const dagan::RegionMasks& m = s->state.masks_by_identity[identity];
        std::string base = std::string(out_dir) + "/id" + std::to_string(identity);
        dagan::write_mask(base + "_skin.pgm", m.skin);
        dagan::write_mask(base + "_keypoints.pgm", m.keypoints);
        dagan::write_mask(base + "_hair.pgm", m.hair);
    });
}

dagan_status dagan_export_pairs(dagan_session* s, int max_pairs, const char* out_dir) {
    return guard([&] {
        require(s != nullptr, "session is null");
        require(out_dir != nullptr, "output directory is null");
        require(max_pairs > 0, "max_pairs must be positive");
        std::filesystem::create_directories(out_dir);
        const dagan::Dataset& ds = s->state.dataset;
        int n = std::min<int>(max_pairs, (int)ds.pairs.size());
        const char* ext = ds.channels == 1 ? ".pgm" : ".ppm";
        for (int i = 0; i < n; ++i) {
            std::string base = std::string(out_dir) + "/pair" + std::to_string(i);
            dagan::write_image(base + "_profile" + ext, ds.pairs[i].profile);
            dagan::write_image(base + "_frontal" + ext, ds.pairs[i].frontal);
        }
    });
}

dagan_status dagan_gradcheck(unsigned long long seed, int inject_fault, char* report_buf,
                             size_t buf_len, int* all_pass) {
    return guard([&] {
        dagan::GradCheckResult res = dagan::run_gradcheck_suite(seed, inject_fault != 0);
        copy_out(res.to_text(), report_buf, buf_len);
        if (all_pass) *all_pass = res.all_pass() ? 1 : 0;
    });
}

dagan_status dagan_ablate(const char* config_path, const char* const* options, int n_options,
                          const char* modes_csv, const unsigned long long* seeds, int n_seeds,
                          char* report_buf, size_t buf_len) {
    return guard([&] {
        require(modes_csv != nullptr, "modes list is null");
        require(seeds != nullptr && n_seeds > 0, "empty seed list");
        auto cfg = config_from(config_path, options, n_options);
        std::vector<dagan::AblationMode> modes;
        std::stringstream ss(modes_csv);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) modes.push_back(dagan::parse_mode(tok));
        std::vector<uint64_t> seed_list(seeds, seeds + n_seeds);
        dagan::AblationReport rep = dagan::run_ablation(cfg, modes, seed_list, &std::cerr);
        copy_out(rep.to_text(), report_buf, buf_len);
    });
}

}  // extern "C"
