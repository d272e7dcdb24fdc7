#include "dagan/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dagan {

void LossWeights::validate() const {
    if (lambda_id < 0 || lambda_pixel < 0 || lambda_adv < 0 || lambda_tv < 0)
        throw Error(ErrorKind::Invalid, "loss weights must be nonnegative");
}

Embedder::Embedder(int image_size, int channels, int n_classes, std::mt19937_64& rng)
    : image_size_(image_size), channels_(channels), n_classes_(n_classes) {
    int in_ch = channels, size = image_size;
    for (int k = 1; k <= 3; ++k) {
        int out_ch = 16 << (k - 1);
        store_.create("E/conv" + std::to_string(k) + "/w", randn({out_ch, in_ch, 4, 4}, rng, 0.05));
        store_.create("E/conv" + std::to_string(k) + "/b", Tensor::zeros({out_ch}));
        in_ch = out_ch;
        size /= 2;
    }
    flat_ = in_ch * size * size;
    store_.create("E/fc1/w", randn({flat_, feat_dim_}, rng, 0.05));
    store_.create("E/fc1/b", Tensor::zeros({feat_dim_}));
    store_.create("E/fc2/w", randn({feat_dim_, n_classes_}, rng, 0.05));
    store_.create("E/fc2/b", Tensor::zeros({n_classes_}));
}

std::pair<Var, Var> Embedder::features(Var images, bool train_params) const {
    const Tensor& img = images->value;
    if (img.rank() != 4 || img.dim(1) != channels_ || img.dim(2) != image_size_ || img.dim(3) != image_size_)
        throw Error(ErrorKind::Invalid, "embedder: input " + shape_str(img.shape) +
                                            " does not match configured resolution " +
                                            std::to_string(image_size_));
    auto& store = const_cast<ParamStore&>(store_);
    auto L = [&](const std::string& name) {
        return train_params ? leaf(store.get(name)) : leaf_frozen(store.get(name));
    };
    Var x = std::move(images);
    for (int k = 1; k <= 3; ++k) {
        std::string p = "E/conv" + std::to_string(k);
        x = leaky_relu(conv2d(x, L(p + "/w"), L(p + "/b"), 2, 1), 0.2);
    }
    int n = x->value.dim(0);
    x = reshape(x, {n, flat_});
    Var p1 = relu(linear(x, L("E/fc1/w"), L("E/fc1/b")));
    Var p2 = linear(p1, L("E/fc2/w"), L("E/fc2/b"));
    return {p1, p2};
}

Tensor Embedder::embed(const Tensor& images) const {
    return features(constant(images), false).first->value;
}

Var cross_entropy(Var logits, const std::vector<int>& labels) {
    const Tensor& lv = logits->value;
    if (lv.rank() != 2 || lv.dim(0) != (int)labels.size())
        throw Error(ErrorKind::Invalid, "cross_entropy: logits " + shape_str(lv.shape) +
                                            " vs " + std::to_string(labels.size()) + " labels");
    int n = lv.dim(0), k = lv.dim(1);
    Tensor onehot = Tensor::zeros({n, k});
    for (int i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= k)
            throw Error(ErrorKind::Invalid, "cross_entropy: label out of range");
        onehot[(long)i * k + labels[i]] = 1.0;
    }
    Var probs = clamp(softmax_axis(std::move(logits), 1), 1e-12, 1.0);
    Var picked = mul(log_op(probs), constant(onehot));
    return scalar_mul(reduce_sum(picked), -1.0 / n);
}

double train_embedder(Embedder& emb, const std::vector<std::pair<Tensor, int>>& samples, int epochs,
                      int batch_size, double lr, std::mt19937_64& rng, double target_accuracy) {
    if (samples.empty()) throw Error(ErrorKind::Invalid, "train_embedder: empty dataset");
    Adam opt({lr, 0.9, 0.999, 1e-8});
    std::vector<size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    int size = samples[0].first.dim(1);
    int channels = samples[0].first.dim(0);
    double acc = 0.0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t off = 0; off < order.size(); off += batch_size) {
            size_t nb = std::min((size_t)batch_size, order.size() - off);
            Tensor batch = Tensor::zeros({(int)nb, channels, size, size});
            std::vector<int> labels(nb);
            for (size_t i = 0; i < nb; ++i) {
                const auto& [img, label] = samples[order[off + i]];
                std::copy(img.data.begin(), img.data.end(), batch.data.begin() + (long)i * img.size());
                labels[i] = label;
            }
            auto [p1, logits] = emb.features(constant(batch), true);
            (void)p1;
            Var loss = cross_entropy(logits, labels);
            GradMap grads = backward(loss, Tensor::scalar(1.0));
            opt.step(emb.params(), grads);
        }
        // full-set train accuracy
        long hits = 0;
        for (const auto& [img, label] : samples) {
            Tensor one({1, channels, size, size}, img.data);
            Tensor logits = emb.features(constant(one), false).second->value;
            int best = 0;
            for (int c = 1; c < logits.size(); ++c)
                if (logits[c] > logits[best]) best = c;
            if (best == label) ++hits;
        }
        acc = (double)hits / (double)samples.size();
        if (acc >= target_accuracy && epoch >= 1) return acc;
    }
    if (acc < target_accuracy)
        throw Error(ErrorKind::Numeric, "embedder failed to converge: final train accuracy " +
                                            std::to_string(acc));
    return acc;
}

Var identity_loss(Var fake_images, const Tensor& real_images, const Embedder& emb) {
    if (!fake_images->value.same_shape(real_images))
        throw Error(ErrorKind::Invalid, "identity_loss: resolution mismatch " +
                                            shape_str(fake_images->value.shape) + " vs " +
                                            shape_str(real_images.shape));
    int n = real_images.dim(0);
    auto [pf1, pf2] = emb.features(std::move(fake_images), false);
    auto [pr1, pr2] = emb.features(constant(real_images), false);
    Var d1 = reduce_sum(square(sub(pf1, pr1)));
    Var d2 = reduce_sum(square(sub(pf2, pr2)));
    return scalar_mul(add(d1, d2), 1.0 / n);
}

Var pixel_loss(const std::vector<Var>& outputs, const Tensor& target_full) {
    if (outputs.empty()) throw Error(ErrorKind::Invalid, "pixel_loss: no scales");
    int s_count = (int)outputs.size();
    // targets per scale, largest last
    std::vector<Tensor> targets(s_count);
    targets[s_count - 1] = target_full;
    for (int s = s_count - 2; s >= 0; --s) targets[s] = mean_pool2(targets[s + 1]);
    Var total;
    for (int s = 0; s < s_count; ++s) {
        if (!outputs[s]->value.same_shape(targets[s]))
            throw Error(ErrorKind::Invalid, "pixel_loss: scale " + std::to_string(s) + " shape " +
                                                shape_str(outputs[s]->value.shape) + " vs target " +
                                                shape_str(targets[s].shape));
        Var term = reduce_mean(abs_op(sub(outputs[s], constant(targets[s]))));
        total = total ? add(total, term) : term;
    }
    return scalar_mul(total, 1.0 / s_count);
}

Var tv_loss(Var images) { return tv_op(std::move(images)); }

Var total_loss(Var l_id, Var l_pixel, Var l_adv, Var l_tv, const LossWeights& w, LossReport* report) {
    w.validate();
    if (report) {
        report->l_id = l_id->value[0];
        report->l_pixel = l_pixel->value[0];
        report->l_adv = l_adv->value[0];
        report->l_tv = l_tv->value[0];
    }
    Var total = add(add(scalar_mul(std::move(l_id), w.lambda_id), scalar_mul(std::move(l_pixel), w.lambda_pixel)),
                    add(scalar_mul(std::move(l_adv), w.lambda_adv), scalar_mul(std::move(l_tv), w.lambda_tv)));
    if (report) report->total = total->value[0];
    return total;
}

}  // namespace dagan
