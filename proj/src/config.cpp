#include "dagan/config.hpp"

#include "dagan/generator.hpp"

#include <fstream>
#include <sstream>

namespace dagan {

AblationMode parse_mode(const std::string& name) {
    if (name == "baseline") return AblationMode::baseline;
    if (name == "self_attention_only") return AblationMode::self_attention_only;
    if (name == "face_attention_only") return AblationMode::face_attention_only;
    if (name == "dual") return AblationMode::dual;
    if (name == "d_skin_only") return AblationMode::d_skin_only;
    if (name == "d_keypoint_only") return AblationMode::d_keypoint_only;
    if (name == "d_hair_only") return AblationMode::d_hair_only;
    throw Error(ErrorKind::Invalid, "unknown ablation mode '" + name + "'");
}

std::string mode_name(AblationMode mode) {
    switch (mode) {
        case AblationMode::baseline: return "baseline";
        case AblationMode::self_attention_only: return "self_attention_only";
        case AblationMode::face_attention_only: return "face_attention_only";
        case AblationMode::dual: return "dual";
        case AblationMode::d_skin_only: return "d_skin_only";
        case AblationMode::d_keypoint_only: return "d_keypoint_only";
        case AblationMode::d_hair_only: return "d_hair_only";
    }
    throw Error(ErrorKind::Invalid, "bad mode");
}

bool mode_uses_self_attention(AblationMode mode) {
    return mode == AblationMode::self_attention_only || mode == AblationMode::dual;
}

std::vector<char> mode_regions(AblationMode mode) {
    switch (mode) {
        case AblationMode::baseline:
        case AblationMode::self_attention_only: return {'f'};
        case AblationMode::face_attention_only:
        case AblationMode::dual: return {'f', 's', 'k', 'h'};
        case AblationMode::d_skin_only: return {'f', 's'};
        case AblationMode::d_keypoint_only: return {'f', 'k'};
        case AblationMode::d_hair_only: return {'f', 'h'};
    }
    throw Error(ErrorKind::Invalid, "bad mode");
}

void TrainConfig::validate() const {
    weights.validate();
    if (batch_size < 1) throw Error(ErrorKind::Invalid, "batch_size must be positive");
    if (steps < 0) throw Error(ErrorKind::Invalid, "steps must be nonnegative");
    if (d_steps_per_g_step < 1) throw Error(ErrorKind::Invalid, "d_steps_per_g_step must be >= 1");
    if (n_identities < 2) throw Error(ErrorKind::Invalid, "n_identities must be >= 2");
    if (lr_g < 0 || lr_d < 0) throw Error(ErrorKind::Invalid, "learning rates must be nonnegative");
    if (checkpoint_interval < 1) throw Error(ErrorKind::Invalid, "checkpoint_interval must be positive");
    GeneratorConfig g{image_size, base_channels, channels, scale_count, {}};
    g.validate();
}

namespace {
std::string join_list(const std::vector<double>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        os << v[i];
    }
    return os.str();
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stod(tok));
    return out;
}
}  // namespace

std::map<std::string, std::string> TrainConfig::to_map() const {
    std::map<std::string, std::string> kv;
    kv["image_size"] = std::to_string(image_size);
    kv["base_channels"] = std::to_string(base_channels);
    kv["channels"] = std::to_string(channels);
    kv["scale_count"] = std::to_string(scale_count);
    kv["n_identities"] = std::to_string(n_identities);
    kv["batch_size"] = std::to_string(batch_size);
    kv["lr_g"] = std::to_string(lr_g);
    kv["lr_d"] = std::to_string(lr_d);
    kv["beta1"] = std::to_string(beta1);
    kv["beta2"] = std::to_string(beta2);
    kv["steps"] = std::to_string(steps);
    kv["d_steps_per_g_step"] = std::to_string(d_steps_per_g_step);
    kv["mode"] = mode_name(mode);
    kv["seed"] = std::to_string(seed);
    kv["checkpoint_interval"] = std::to_string(checkpoint_interval);
    kv["lambda1"] = std::to_string(weights.lambda_id);
    kv["lambda2"] = std::to_string(weights.lambda_pixel);
    kv["lambda3"] = std::to_string(weights.lambda_adv);
    kv["lambda4"] = std::to_string(weights.lambda_tv);
    kv["embedder_epochs"] = std::to_string(embedder_epochs);
    if (!yaws.empty()) kv["yaws"] = join_list(yaws);
    if (!pitches.empty()) kv["pitches"] = join_list(pitches);
    return kv;
}

TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& kv) {
    TrainConfig c;
    auto geti = [&](const char* k, int& slot) {
        if (auto it = kv.find(k); it != kv.end()) slot = std::stoi(it->second);
    };
    auto getl = [&](const char* k, long& slot) {
        if (auto it = kv.find(k); it != kv.end()) slot = std::stol(it->second);
    };
    auto getd = [&](const char* k, double& slot) {
        if (auto it = kv.find(k); it != kv.end()) slot = std::stod(it->second);
    };
    static const char* known[] = {"image_size", "base_channels", "channels", "scale_count",
                                  "n_identities", "batch_size", "lr_g", "lr_d", "beta1", "beta2",
                                  "steps", "d_steps_per_g_step", "mode", "seed",
                                  "checkpoint_interval", "lambda1", "lambda2", "lambda3", "lambda4",
                                  "embedder_epochs", "yaws", "pitches"};
    for (const auto& [k, v] : kv) {
        bool ok = false;
        for (const char* name : known) ok = ok || k == name;
        if (!ok) throw Error(ErrorKind::Invalid, "unknown config key '" + k + "'");
    }
    geti("image_size", c.image_size);
    geti("base_channels", c.base_channels);
    geti("channels", c.channels);
    geti("scale_count", c.scale_count);
    geti("n_identities", c.n_identities);
    geti("batch_size", c.batch_size);
    getd("lr_g", c.lr_g);
    getd("lr_d", c.lr_d);
    getd("beta1", c.beta1);
    getd("beta2", c.beta2);
    getl("steps", c.steps);
    geti("d_steps_per_g_step", c.d_steps_per_g_step);
    if (auto it = kv.find("mode"); it != kv.end()) c.mode = parse_mode(it->second);
    if (auto it = kv.find("seed"); it != kv.end()) c.seed = std::stoull(it->second);
    getl("checkpoint_interval", c.checkpoint_interval);
    getd("lambda1", c.weights.lambda_id);
    getd("lambda2", c.weights.lambda_pixel);
    getd("lambda3", c.weights.lambda_adv);
    getd("lambda4", c.weights.lambda_tv);
    geti("embedder_epochs", c.embedder_epochs);
    if (auto it = kv.find("yaws"); it != kv.end()) c.yaws = parse_list(it->second);
    if (auto it = kv.find("pitches"); it != kv.end()) c.pitches = parse_list(it->second);
    c.validate();
    return c;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
    return from_map(read_kv_file(path));
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorKind::Io, "cannot read config file '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorKind::Invalid,
                        path + ":" + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

}  // namespace dagan
