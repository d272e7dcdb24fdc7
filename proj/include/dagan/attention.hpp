#ifndef DAGAN_ATTENTION_HPP
#define DAGAN_ATTENTION_HPP

#include <random>
#include <string>

#include "dagan/graph.hpp"
#include "dagan/params.hpp"

namespace dagan {

// Self-attention over spatial positions of a feature map: an N x N
// row-stochastic map (N = H*W) built from two 1x1 projections, applied as a
// residual scaled by a learned scalar that starts at exactly 0.
class SelfAttentionBlock {
public:
    // Registers parameters under `prefix` in `store`. bottleneck = max(C/8, 1).
    SelfAttentionBlock(ParamStore& store, const std::string& prefix, int channels,
                       std::mt19937_64& rng);

    int channels() const { return channels_; }
    int bottleneck() const { return bottleneck_; }
    Parameter& mu() { return *mu_; }
    const Parameter& mu() const { return *mu_; }

    void set_trainable(bool trainable);

    // x: [N,C,H,W] -> attention map [N, HW, HW]; each row sums to 1.
    Var attention_map(Var x, bool with_grad = true) const;

    // x: [N,C,H,W] -> [N,C,H,W], x + mu * (attention-weighted features).
    Var forward(Var x, bool with_grad = true) const;

    // Single feature map [C,H,W] convenience overloads.
    Tensor attention_map_single(const Tensor& x) const;
    Tensor forward_single(const Tensor& x) const;

    // Inference path that never materializes the full N x N map; processes
    // row blocks of the attention map on the fly. Identical values to the
    // materialized path.
    Tensor forward_chunked(const Tensor& x, int row_block = 64) const;

private:
    int channels_;
    int bottleneck_;
    Parameter* wf_;
    Parameter* wg_;
    Parameter* wh_;
    Parameter* mu_;
};

}  // namespace dagan

#endif
