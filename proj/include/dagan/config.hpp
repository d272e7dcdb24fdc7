#ifndef DAGAN_CONFIG_HPP
#define DAGAN_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

#include "dagan/losses.hpp"

namespace dagan {

enum class AblationMode {
    baseline,
    self_attention_only,
    face_attention_only,
    dual,
    d_skin_only,
    d_keypoint_only,
    d_hair_only,
};

AblationMode parse_mode(const std::string& name);
std::string mode_name(AblationMode mode);
bool mode_uses_self_attention(AblationMode mode);
std::vector<char> mode_regions(AblationMode mode);

struct TrainConfig {
    int image_size = 32;
    int base_channels = 16;
    int channels = 1;
    int scale_count = 3;
    int n_identities = 16;
    int batch_size = 8;
    double lr_g = 2e-4;
    double lr_d = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    long steps = 2000;
    int d_steps_per_g_step = 1;
    AblationMode mode = AblationMode::dual;
    uint64_t seed = 1;
    long checkpoint_interval = 500;
    LossWeights weights;
    int embedder_epochs = 20;
    std::vector<double> yaws;     // empty -> default grid
    std::vector<double> pitches;  // empty -> {0}

    void validate() const;
    std::map<std::string, std::string> to_map() const;
    static TrainConfig from_map(const std::map<std::string, std::string>& kv);
    static TrainConfig from_file(const std::string& path);
};

// Plain key=value lines, '#' comments.
std::map<std::string, std::string> read_kv_file(const std::string& path);

}  // namespace dagan

#endif
