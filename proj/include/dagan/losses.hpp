#ifndef DAGAN_LOSSES_HPP
#define DAGAN_LOSSES_HPP

#include <optional>
#include <random>
#include <vector>

#include "dagan/graph.hpp"
#include "dagan/params.hpp"
#include "dagan/synthdata.hpp"

namespace dagan {

struct LossWeights {
    double lambda_id = 0.1;
    double lambda_pixel = 10.0;
    double lambda_adv = 0.1;
    double lambda_tv = 1e-4;

    void validate() const;
};

// Small convolutional identity classifier standing in for a pretrained face
// recognizer. Feature layers p1 (penultimate, post-activation) and p2
// (class logits) feed the identity loss; frozen during GAN training.
class Embedder {
public:
    Embedder(int image_size, int channels, int n_classes, std::mt19937_64& rng);

    int n_classes() const { return n_classes_; }
    int feature_dim() const { return feat_dim_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

    // images: [N,C,H,W] -> (p1 [N,feat], p2 [N,classes]).
    std::pair<Var, Var> features(Var images, bool train_params) const;
    // Inference-only penultimate features for retrieval.
    Tensor embed(const Tensor& images) const;

private:
    ParamStore store_;
    int image_size_, channels_, n_classes_, feat_dim_ = 64, flat_ = 0;
};

// Trains the embedder with softmax cross entropy; returns final train
// accuracy. Throws Numeric when target_accuracy is not reached.
double train_embedder(Embedder& emb, const std::vector<std::pair<Tensor, int>>& samples, int epochs,
                      int batch_size, double lr, std::mt19937_64& rng,
                      double target_accuracy = 0.9);

// sum_i ||p_i(real) - p_i(fake)||^2 over the two feature layers, batch mean.
// Gradient flows only through the fake branch.
Var identity_loss(Var fake_images, const Tensor& real_images, const Embedder& emb);

// Multi-scale mean absolute error: outputs ordered small to large, target at
// full resolution (mean-pooled down per scale).
Var pixel_loss(const std::vector<Var>& outputs, const Tensor& target_full);

// Total-variation sum per image, batch mean.
Var tv_loss(Var images);

struct LossReport {
    double l_id = 0.0, l_pixel = 0.0, l_adv = 0.0, l_tv = 0.0, total = 0.0;
    std::optional<double> l_f, l_s, l_k, l_h;  // adversarial components
};

// Weighted sum of the four generator loss terms.
Var total_loss(Var l_id, Var l_pixel, Var l_adv, Var l_tv, const LossWeights& w,
               LossReport* report = nullptr);

// Softmax cross entropy against integer labels, batch mean.
Var cross_entropy(Var logits, const std::vector<int>& labels);

}  // namespace dagan

#endif
