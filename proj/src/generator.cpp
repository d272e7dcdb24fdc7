#include "dagan/generator.hpp"

#include <algorithm>
#include <cmath>

namespace dagan {

int GeneratorConfig::depth() const {
    int d = 0, s = image_size;
    while (s > 4) {
        s /= 2;
        ++d;
    }
    return d;
}

std::vector<int> GeneratorConfig::effective_attention_stages() const {
    if (!attention_stages.empty()) return attention_stages;
    int d = depth();
    if (d >= 2) return {d - 1, d};
    return {d};
}

void GeneratorConfig::validate() const {
    if (image_size < 8 || (image_size & (image_size - 1)))
        throw Error(ErrorKind::Invalid, "image_size must be a power of two >= 8");
    if (channels != 1 && channels != 3)
        throw Error(ErrorKind::Invalid, "channels must be 1 or 3");
    if (scales < 1 || scales > depth())
        throw Error(ErrorKind::Invalid, "scale_count must be in [1, depth]");
    if (base_channels < 1) throw Error(ErrorKind::Invalid, "base_channels must be positive");
    for (int s : attention_stages)
        if (s < 1 || s > depth())
            throw Error(ErrorKind::Invalid, "attention stage out of range: " + std::to_string(s));
}

Generator::Generator(GeneratorConfig cfg, std::mt19937_64& rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    int d = cfg_.depth();
    int cap = cfg_.base_channels * 8;
    int in_ch = cfg_.channels;
    for (int k = 1; k <= d; ++k) {
        int out_ch = std::min(cfg_.base_channels << (k - 1), cap);
        enc_channels_.push_back(out_ch);
        std::string p = "G/enc" + std::to_string(k);
        store_.create(p + "/w", randn({out_ch, in_ch, 4, 4}, rng, 0.02));
        store_.create(p + "/b", Tensor::zeros({out_ch}));
        if (k > 1) {
            store_.create(p + "/in_g", Tensor::full({out_ch}, 1.0));
            store_.create(p + "/in_b", Tensor::zeros({out_ch}));
        }
        in_ch = out_ch;
    }
    block_stages_ = cfg_.effective_attention_stages();
    std::sort(block_stages_.begin(), block_stages_.end());
    for (int j = 1; j <= d; ++j) {
        int src_ch = (j == 1) ? enc_channels_[d - 1] : 0;
        if (j > 1) {
            // previous decoder output + skip from the encoder at the same resolution
            int prev = (j - 1 == d) ? cfg_.base_channels : enc_channels_[d - j];
            src_ch = prev + enc_channels_[d - j];
        }
        int out_ch = (j == d) ? cfg_.base_channels : enc_channels_[d - j - 1];
        std::string p = "G/dec" + std::to_string(j);
        store_.create(p + "/w", randn({src_ch, out_ch, 4, 4}, rng, 0.02));
        store_.create(p + "/b", Tensor::zeros({out_ch}));
        store_.create(p + "/in_g", Tensor::full({out_ch}, 1.0));
        store_.create(p + "/in_b", Tensor::zeros({out_ch}));
        if (std::find(block_stages_.begin(), block_stages_.end(), j) != block_stages_.end())
            blocks_.emplace_back(store_, "G/att" + std::to_string(j), out_ch, rng);
    }
    for (int j = d - cfg_.scales + 1; j <= d; ++j) {
        std::string p = "G/tap" + std::to_string(j);
        store_.create(p + "/w", randn({cfg_.channels, (j == d) ? cfg_.base_channels : enc_channels_[d - j - 1], 1, 1},
                                      rng, 0.02));
        store_.create(p + "/b", Tensor::zeros({cfg_.channels}));
    }
}

MultiScaleVars Generator::forward(const Tensor& input, bool with_grad) const {
    if (input.rank() != 4 || input.dim(1) != cfg_.channels || input.dim(2) != cfg_.image_size ||
        input.dim(3) != cfg_.image_size)
        throw Error(ErrorKind::Invalid, "generator: input " + shape_str(input.shape) +
                                            " does not match configured " + std::to_string(cfg_.image_size) +
                                            "x" + std::to_string(cfg_.image_size) + "x" +
                                            std::to_string(cfg_.channels));
    auto& store = const_cast<ParamStore&>(store_);
    auto L = [&](const std::string& name) {
        return with_grad ? leaf(store.get(name)) : leaf_frozen(store.get(name));
    };
    int d = cfg_.depth();
    std::vector<Var> enc;
    Var x = constant(input);
    for (int k = 1; k <= d; ++k) {
        std::string p = "G/enc" + std::to_string(k);
        x = conv2d(x, L(p + "/w"), L(p + "/b"), 2, 1);
        if (k > 1) x = instance_norm(x, L(p + "/in_g"), L(p + "/in_b"));
        x = leaky_relu(x, 0.2);
        enc.push_back(x);
    }
    MultiScaleVars out;
    size_t bi = 0;
    for (int j = 1; j <= d; ++j) {
        std::string p = "G/dec" + std::to_string(j);
        Var src = (j == 1) ? enc[d - 1] : concat_channels({x, enc[d - j]});
        x = conv_transpose2d(src, L(p + "/w"), L(p + "/b"), 2, 1);
        x = instance_norm(x, L(p + "/in_g"), L(p + "/in_b"));
        x = relu(x);
        if (bi < blocks_.size() && block_stages_[bi] == j) {
            x = blocks_[bi].forward(x, with_grad);
            ++bi;
        }
        if (j > d - cfg_.scales) {
            std::string tp = "G/tap" + std::to_string(j);
            out.images.push_back(tanh_op(conv2d(x, L(tp + "/w"), L(tp + "/b"), 1, 0)));
        }
    }
    return out;
}

MultiScaleOutput Generator::generate(const Tensor& input) const {
    MultiScaleVars vars = forward(input, false);
    MultiScaleOutput out;
    for (size_t s = 0; s < vars.images.size(); ++s) {
        const Tensor& t = vars.images[s]->value;
        if (!t.all_finite())
            throw Error(ErrorKind::Numeric,
                        "generator produced non-finite values at scale " + std::to_string(s));
        out.images.push_back(t);
    }
    return out;
}

void Generator::set_attention_trainable(bool trainable) {
    for (auto& b : blocks_) b.set_trainable(trainable);
}

void Generator::force_attention_identity() {
    for (auto& b : blocks_) b.mu().value[0] = 0.0;
}

}  // namespace dagan
