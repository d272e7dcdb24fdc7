#include "dagan/discriminator.hpp"

namespace dagan {

Discriminator::Discriminator(ParamStore& store, const std::string& prefix, int image_size,
                             int channels, int base_channels, std::mt19937_64& rng)
    : store_(&store), prefix_(prefix), image_size_(image_size), channels_(channels), base_(base_channels) {
    int in_ch = channels, size = image_size;
    for (int k = 1; k <= 4; ++k) {
        int out_ch = base_ << (k - 1);
        store.create(prefix_ + "/conv" + std::to_string(k) + "/w", randn({out_ch, in_ch, 4, 4}, rng, 0.02));
        store.create(prefix_ + "/conv" + std::to_string(k) + "/b", Tensor::zeros({out_ch}));
        in_ch = out_ch;
        size /= 2;
    }
    flat_ = in_ch * size * size;
    store.create(prefix_ + "/fc/w", randn({flat_, 1}, rng, 0.02));
    store.create(prefix_ + "/fc/b", Tensor::zeros({1}));
}

Var Discriminator::forward(Var images, bool with_grad) const {
    const Tensor& img = images->value;
    if (img.rank() != 4 || img.dim(1) != channels_ || img.dim(2) != image_size_ || img.dim(3) != image_size_)
        throw Error(ErrorKind::Invalid, "discriminator " + prefix_ + ": input " + shape_str(img.shape) +
                                            " does not match configured resolution");
    auto L = [&](const std::string& name) {
        Parameter& p = store_->get(prefix_ + name);
        return with_grad ? leaf(p) : leaf_frozen(p);
    };
    Var x = std::move(images);
    for (int k = 1; k <= 4; ++k) {
        std::string p = "/conv" + std::to_string(k);
        x = leaky_relu(conv2d(x, L(p + "/w"), L(p + "/b"), 2, 1), 0.2);
    }
    int n = x->value.dim(0);
    x = reshape(x, {n, flat_});
    x = sigmoid(linear(x, L("/fc/w"), L("/fc/b")));
    return reshape(x, {n});
}

Tensor Discriminator::discriminate(const Tensor& images) const {
    return forward(constant(images), false)->value;
}

DiscriminatorBank::DiscriminatorBank(int image_size, int channels, int base_channels,
                                     std::mt19937_64& rng) {
    d_f_ = Discriminator(store_, "D/f", image_size, channels, base_channels, rng);
    d_s_ = Discriminator(store_, "D/s", image_size, channels, base_channels, rng);
    d_k_ = Discriminator(store_, "D/k", image_size, channels, base_channels, rng);
    d_h_ = Discriminator(store_, "D/h", image_size, channels, base_channels, rng);
}

Discriminator& DiscriminatorBank::get(char region) {
    switch (region) {
        case 'f': return d_f_;
        case 's': return d_s_;
        case 'k': return d_k_;
        case 'h': return d_h_;
    }
    throw Error(ErrorKind::Invalid, std::string("unknown region '") + region + "'");
}

const Discriminator& DiscriminatorBank::get(char region) const {
    return const_cast<DiscriminatorBank*>(this)->get(region);
}

std::optional<double>& AdvLossReport::slot(char region) {
    switch (region) {
        case 'f': return l_f;
        case 's': return l_s;
        case 'k': return l_k;
        case 'h': return l_h;
    }
    throw Error(ErrorKind::Invalid, std::string("unknown region '") + region + "'");
}

const Tensor& RegionBatch::get(char region) const {
    switch (region) {
        case 'f': return full;
        case 's': return skin;
        case 'k': return keypoints;
        case 'h': return hair;
    }
    throw Error(ErrorKind::Invalid, std::string("unknown region '") + region + "'");
}

const Var& RegionVars::get(char region) const {
    switch (region) {
        case 'f': return full;
        case 's': return skin;
        case 'k': return keypoints;
        case 'h': return hair;
    }
    throw Error(ErrorKind::Invalid, std::string("unknown region '") + region + "'");
}

namespace {
Var mean_log_prob(Var p) { return reduce_mean(log_op(clamp(std::move(p), kProbEps, 1.0 - kProbEps))); }

Var one_minus(Var p) {
    Var ones = constant(Tensor::full(p->value.shape, 1.0));
    return sub(std::move(ones), std::move(p));
}
}  // namespace

Var adv_loss_D(DiscriminatorBank& bank, const RegionBatch& real, const RegionBatch& fake,
               const std::vector<char>& regions, AdvLossReport* report) {
    if (regions.empty()) throw Error(ErrorKind::Invalid, "adv_loss_D: no regions");
    Var total;
    double sum = 0.0;
    for (char r : regions) {
        Var p_real = bank.get(r).forward(constant(real.get(r)), true);
        Var p_fake = bank.get(r).forward(constant(fake.get(r)), true);
        Var lj = scalar_mul(add(mean_log_prob(p_real), mean_log_prob(one_minus(p_fake))), -1.0);
        if (report) report->slot(r) = lj->value[0];
        sum += lj->value[0];
        total = total ? add(total, lj) : lj;
    }
    if (report) report->l_adv = sum;
    return total;
}

Var adv_loss_G(DiscriminatorBank& bank, const RegionVars& fake, const std::vector<char>& regions,
               AdvLossReport* report) {
    if (regions.empty()) throw Error(ErrorKind::Invalid, "adv_loss_G: no regions");
    Var total;
    double sum = 0.0;
    for (char r : regions) {
        Var p_fake = bank.get(r).forward(fake.get(r), false);
        Var lj = scalar_mul(mean_log_prob(p_fake), -1.0);
        if (report) report->slot(r) = lj->value[0];
        sum += lj->value[0];
        total = total ? add(total, lj) : lj;
    }
    if (report) report->l_adv = sum;
    return total;
}

}  // namespace dagan
