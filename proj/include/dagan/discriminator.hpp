#ifndef DAGAN_DISCRIMINATOR_HPP
#define DAGAN_DISCRIMINATOR_HPP

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dagan/graph.hpp"
#include "dagan/params.hpp"

namespace dagan {

// 4-stage stride-2 convolutional classifier with a sigmoid head; maps a
// full-frame (possibly masked) image batch to per-sample probabilities.
class Discriminator {
public:
    Discriminator() = default;
    Discriminator(ParamStore& store, const std::string& prefix, int image_size, int channels,
                  int base_channels, std::mt19937_64& rng);

    // images: [N,C,H,W] -> probabilities [N] in (0,1).
    Var forward(Var images, bool with_grad) const;
    Tensor discriminate(const Tensor& images) const;

private:
    ParamStore* store_ = nullptr;
    std::string prefix_;
    int image_size_ = 0, channels_ = 0, base_ = 0, flat_ = 0;
};

// f = full frame, s = skin, k = keypoints, h = hairline.
inline const std::vector<char>& all_regions() {
    static const std::vector<char> r{'f', 's', 'k', 'h'};
    return r;
}

// Four independent discriminators over one parameter store ("D/f/...",
// "D/s/...", "D/k/...", "D/h/..."); identical architecture, no sharing.
class DiscriminatorBank {
public:
    DiscriminatorBank(int image_size, int channels, int base_channels, std::mt19937_64& rng);

    Discriminator& get(char region);
    const Discriminator& get(char region) const;
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

private:
    ParamStore store_;
    Discriminator d_f_, d_s_, d_k_, d_h_;
};

struct AdvLossReport {
    std::optional<double> l_f, l_s, l_k, l_h;
    double l_adv = 0.0;

    std::optional<double>& slot(char region);
};

// Per-region image batches: the full frame plus the three masked views.
struct RegionBatch {
    Tensor full, skin, keypoints, hair;
    const Tensor& get(char region) const;
};

struct RegionVars {
    Var full, skin, keypoints, hair;
    const Var& get(char region) const;
};

constexpr double kProbEps = 1e-7;

// D's minimization objective, summed over the requested regions:
// L_j = -mean(log D_j(real_j)) - mean(log(1 - D_j(fake_j))).
// Both branches are plain tensors, so no gradient reaches G.
Var adv_loss_D(DiscriminatorBank& bank, const RegionBatch& real, const RegionBatch& fake,
               const std::vector<char>& regions, AdvLossReport* report = nullptr);

// G's non-saturating adversarial term sum_j -mean(log D_j(fake_j)); fake
// images stay attached to G's graph, discriminators are frozen.
Var adv_loss_G(DiscriminatorBank& bank, const RegionVars& fake, const std::vector<char>& regions,
               AdvLossReport* report = nullptr);

}  // namespace dagan

#endif
