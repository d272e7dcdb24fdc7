// Command-line front end; talks to the engine through the C API only.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dagan.h"

namespace {

int finish(dagan_status st) {
    if (st != DAGAN_OK) std::fprintf(stderr, "error: %s\n", dagan_last_error());
    return (int)st;
}

std::vector<double> parse_poses(const std::string& csv) {
    std::vector<double> out;
    size_t pos = 0;
    while (pos < csv.size()) {
        size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        std::string tok = csv.substr(pos, comma - pos);
        if (!tok.empty()) out.push_back(std::stod(tok));
        pos = comma + 1;
    }
    return out;
}

std::vector<const char*> option_ptrs(const std::vector<std::string>& opts) {
    std::vector<const char*> ptrs;
    for (const auto& o : opts) ptrs.push_back(o.c_str());
    return ptrs;
}

struct SessionGuard {
    dagan_session* s = nullptr;
    ~SessionGuard() { dagan_session_destroy(s); }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Face frontalization: training, synthesis, and evaluation"};
    app.require_subcommand(1);

    std::string config, checkpoint, out, mode, poses, modes_csv, seeds_csv;
    std::vector<std::string> overrides;
    unsigned long long seed = 0;
    bool seed_set = false, raw = false, inject_fault = false;
    long steps = -1;
    int count = 2, identity = 0, max_pairs = 8;

    auto add_config_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config, "key=value config file");
        cmd->add_option("--set", overrides, "config override key=value (repeatable)");
        cmd->add_option_function<unsigned long long>(
            "--seed", [&](unsigned long long v) { seed = v; seed_set = true; }, "RNG seed");
        cmd->add_option("--mode", mode,
                        "ablation mode (baseline, self_attention_only, face_attention_only, dual, "
                        "d_skin_only, d_keypoint_only, d_hair_only)");
    };

    auto* cmd_train = app.add_subcommand("train", "train a model and write checkpoints");
    add_config_flags(cmd_train);
    cmd_train->add_option("--out", out, "output directory for log and checkpoints")->required();
    cmd_train->add_option("--steps", steps, "step count (default: from config)");

    auto* cmd_synth = app.add_subcommand("synthesize", "write a profile/synthesized/frontal sheet");
    cmd_synth->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    cmd_synth->add_option("--out", out, "output image path")->required();
    cmd_synth->add_option("--poses", poses, "comma-separated yaw degrees")->required();
    cmd_synth->add_option("--count", count, "samples per pose");

    auto* cmd_eval = app.add_subcommand("evaluate", "rank-1 retrieval on the held-out split");
    cmd_eval->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    cmd_eval->add_flag("--raw", raw, "evaluate raw profiles instead of frontalized images");

    auto* cmd_grad = app.add_subcommand("gradcheck", "verify all gradients by finite differences");
    cmd_grad->add_option("--seed", seed, "RNG seed");
    cmd_grad->add_flag("--inject-fault", inject_fault,
                       "corrupt one gradient on purpose (self-test of the checker)");

    auto* cmd_ablate = app.add_subcommand("ablate", "train and compare ablation modes");
    add_config_flags(cmd_ablate);
    cmd_ablate->add_option("--modes", modes_csv, "comma-separated mode list")
        ->default_val("baseline,self_attention_only,face_attention_only,dual");
    cmd_ablate->add_option("--seeds", seeds_csv, "comma-separated seed list")->default_val("1,2,3");

    auto* cmd_masks = app.add_subcommand("export-masks", "write one identity's region masks");
    cmd_masks->add_option("--checkpoint", checkpoint, "session checkpoint")->required();
    cmd_masks->add_option("--identity", identity, "identity index");
    cmd_masks->add_option("--out", out, "output directory")->required();

    auto* cmd_pairs = app.add_subcommand("export-pairs", "write profile/frontal training pairs");
    cmd_pairs->add_option("--checkpoint", checkpoint, "session checkpoint")->required();
    cmd_pairs->add_option("--count", max_pairs, "number of pairs");
    cmd_pairs->add_option("--out", out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : (int)DAGAN_E_INVALID;
    }

    if (seed_set) overrides.push_back("seed=" + std::to_string(seed));
    if (!mode.empty()) overrides.push_back("mode=" + mode);
    auto opts = option_ptrs(overrides);
    const char* cfg = config.empty() ? nullptr : config.c_str();

    if (cmd_train->parsed()) {
        SessionGuard g;
        dagan_status st = dagan_session_create(cfg, opts.data(), (int)opts.size(), &g.s);
        if (st != DAGAN_OK) return finish(st);
        return finish(dagan_train(g.s, steps, out.c_str(), 1));
    }
    if (cmd_synth->parsed()) {
        SessionGuard g;
        dagan_status st = dagan_session_open(checkpoint.c_str(), &g.s);
        if (st != DAGAN_OK) return finish(st);
        std::vector<double> yaws = parse_poses(poses);
        return finish(
            dagan_synthesize(g.s, yaws.data(), (int)yaws.size(), count, out.c_str()));
    }
    if (cmd_eval->parsed()) {
        SessionGuard g;
        dagan_status st = dagan_session_open(checkpoint.c_str(), &g.s);
        if (st != DAGAN_OK) return finish(st);
        std::vector<char> buf(1 << 16);
        st = dagan_evaluate(g.s, raw ? 0 : 1, buf.data(), buf.size());
        if (st == DAGAN_OK) std::fputs(buf.data(), stdout);
        return finish(st);
    }
    if (cmd_grad->parsed()) {
        std::vector<char> buf(1 << 16);
        int all_pass = 0;
        dagan_status st =
            dagan_gradcheck(seed_set ? seed : 1, inject_fault ? 1 : 0, buf.data(), buf.size(),
                            &all_pass);
        if (st == DAGAN_OK) std::fputs(buf.data(), stdout);
        if (st != DAGAN_OK) return finish(st);
        return all_pass ? 0 : (int)DAGAN_E_NUMERIC;
    }
    if (cmd_ablate->parsed()) {
        std::vector<unsigned long long> seeds;
        for (double v : parse_poses(seeds_csv)) seeds.push_back((unsigned long long)v);
        std::vector<char> buf(1 << 16);
        dagan_status st = dagan_ablate(cfg, opts.data(), (int)opts.size(), modes_csv.c_str(),
                                       seeds.data(), (int)seeds.size(), buf.data(), buf.size());
        if (st == DAGAN_OK) std::fputs(buf.data(), stdout);
        return finish(st);
    }
    if (cmd_masks->parsed()) {
        SessionGuard g;
        dagan_status st = dagan_session_open(checkpoint.c_str(), &g.s);
        if (st != DAGAN_OK) return finish(st);
        return finish(dagan_export_masks(g.s, identity, out.c_str()));
    }
    if (cmd_pairs->parsed()) {
        SessionGuard g;
        dagan_status st = dagan_session_open(checkpoint.c_str(), &g.s);
        if (st != DAGAN_OK) return finish(st);
        return finish(dagan_export_pairs(g.s, max_pairs, out.c_str()));
    }
    return (int)DAGAN_E_INVALID;
}
