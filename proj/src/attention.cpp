#include "dagan/attention.hpp"

#include <cmath>

namespace dagan {

SelfAttentionBlock::SelfAttentionBlock(ParamStore& store, const std::string& prefix, int channels,
                                       std::mt19937_64& rng)
    : channels_(channels), bottleneck_(std::max(channels / 8, 1)) {
    wf_ = &store.create(prefix + "/wf", randn({bottleneck_, channels_, 1, 1}, rng, 0.02));
    wg_ = &store.create(prefix + "/wg", randn({bottleneck_, channels_, 1, 1}, rng, 0.02));
    wh_ = &store.create(prefix + "/wh", randn({channels_, channels_, 1, 1}, rng, 0.02));
    mu_ = &store.create(prefix + "/mu", Tensor::scalar(0.0));
}

void SelfAttentionBlock::set_trainable(bool trainable) {
    wf_->trainable = trainable;
    wg_->trainable = trainable;
    wh_->trainable = trainable;
    mu_->trainable = trainable;
}

namespace {
Var conv1x1(Var x, Parameter& w, bool with_grad) {
    Var wv = with_grad ? leaf(w) : leaf_frozen(w);
    Var b = constant(Tensor::zeros({w.value.dim(0)}));
    return conv2d(std::move(x), std::move(wv), std::move(b), 1, 0);
}
}  // namespace

Var SelfAttentionBlock::attention_map(Var x, bool with_grad) const {
    const Tensor& xv = x->value;
    if (xv.rank() != 4 || xv.dim(1) != channels_)
        throw Error(ErrorKind::Invalid, "attention: feature map " + shape_str(xv.shape) +
                                            " does not match block channels " + std::to_string(channels_));
    int N = xv.dim(0), HW = xv.dim(2) * xv.dim(3);
    Var a = reshape(conv1x1(x, *wf_, with_grad), {N, bottleneck_, HW});
    Var b = reshape(conv1x1(x, *wg_, with_grad), {N, bottleneck_, HW});
    Var logits = batched_matmul(batched_transpose(a), b);
    return softmax_axis(logits, 2);
}

Var SelfAttentionBlock::forward(Var x, bool with_grad) const {
    const Tensor& xv = x->value;
    Shape in_shape = xv.shape;
    int N = xv.dim(0), HW = xv.dim(2) * xv.dim(3);
    Var m = attention_map(x, with_grad);
    Var xp = reshape(conv1x1(x, *wh_, with_grad), {N, channels_, HW});
    Var weighted = batched_matmul_bt(xp, m);
    Var mu = with_grad ? leaf(*mu_) : leaf_frozen(*mu_);
    return add(x, reshape(mul_param_scalar(weighted, mu), in_shape));
}

Tensor SelfAttentionBlock::attention_map_single(const Tensor& x) const {
    if (x.rank() != 3)
        throw Error(ErrorKind::Invalid, "attention: expected [C,H,W], got " + shape_str(x.shape));
    Tensor batched({1, x.dim(0), x.dim(1), x.dim(2)}, x.data);
    Var m = attention_map(constant(batched), false);
    int HW = x.dim(1) * x.dim(2);
    return Tensor({HW, HW}, m->value.data);
}

Tensor SelfAttentionBlock::forward_single(const Tensor& x) const {
    if (x.rank() != 3)
        throw Error(ErrorKind::Invalid, "attention: expected [C,H,W], got " + shape_str(x.shape));
    Tensor batched({1, x.dim(0), x.dim(1), x.dim(2)}, x.data);
    Var y = forward(constant(batched), false);
    return Tensor(x.shape, y->value.data);
}

Tensor SelfAttentionBlock::forward_chunked(const Tensor& x, int row_block) const {
    if (x.rank() != 4 || x.dim(1) != channels_)
        throw Error(ErrorKind::Invalid, "attention: feature map " + shape_str(x.shape) +
                                            " does not match block channels " + std::to_string(channels_));
    int N = x.dim(0), HW = x.dim(2) * x.dim(3);
    Tensor a = conv1x1(constant(x), *wf_, false)->value;  // [N,C',H,W]
    Tensor b = conv1x1(constant(x), *wg_, false)->value;
    Tensor xp = conv1x1(constant(x), *wh_, false)->value;  // [N,C,H,W]
    double mu = mu_->value[0];
    Tensor out = x;
    std::vector<double> row(HW);
    for (int n = 0; n < N; ++n) {
        const double* an = &a.data[(long)n * bottleneck_ * HW];
        const double* bn = &b.data[(long)n * bottleneck_ * HW];
        const double* xn = &xp.data[(long)n * channels_ * HW];
        double* on = &out.data[(long)n * channels_ * HW];
        for (int j0 = 0; j0 < HW; j0 += row_block) {
            int j1 = std::min(HW, j0 + row_block);
            for (int j = j0; j < j1; ++j) {
                // row j of the attention map: softmax_i of sum_c A[c,j]*B[c,i]
                double mx = -1e300;
                for (int i = 0; i < HW; ++i) {
                    double dot = 0.0;
                    for (int c = 0; c < bottleneck_; ++c) dot += an[(long)c * HW + j] * bn[(long)c * HW + i];
                    row[i] = dot;
                    mx = std::max(mx, dot);
                }
                double z = 0.0;
                for (int i = 0; i < HW; ++i) {
                    row[i] = std::exp(row[i] - mx);
                    z += row[i];
                }
                for (int c = 0; c < channels_; ++c) {
                    double acc = 0.0;
                    const double* xc = &xn[(long)c * HW];
                    for (int i = 0; i < HW; ++i) acc += row[i] * xc[i];
                    on[(long)c * HW + j] += mu * acc / z;
                }
            }
        }
    }
    return out;
}

}  // namespace dagan
