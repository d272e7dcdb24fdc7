#ifndef DAGAN_GENERATOR_HPP
#define DAGAN_GENERATOR_HPP

#include <random>
#include <vector>

#include "dagan/attention.hpp"
#include "dagan/graph.hpp"
#include "dagan/params.hpp"

namespace dagan {

struct GeneratorConfig {
    int image_size = 32;
    int base_channels = 16;
    int channels = 1;  // 1 grayscale, 3 color
    int scales = 3;
    // Decoder stages (1-based) that get a self-attention block after them.
    // Empty means the last two stages.
    std::vector<int> attention_stages;

    int depth() const;
    std::vector<int> effective_attention_stages() const;
    void validate() const;
};

// Output images ordered small to large; the last one is the full-resolution
// synthesis, values in [-1,1].
struct MultiScaleOutput {
    std::vector<Tensor> images;
};

struct MultiScaleVars {
    std::vector<Var> images;
};

// Encoder-decoder with skip connections at every stage, instance
// normalization, stride-2 convolutions down and transposed convolutions up,
// tanh read-outs from the last `scales` decoder stages, and self-attention
// blocks after the configured decoder stages.
class Generator {
public:
    Generator(GeneratorConfig cfg, std::mt19937_64& rng);

    const GeneratorConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    std::vector<SelfAttentionBlock>& attention_blocks() { return blocks_; }

    // input: [N, channels, image_size, image_size] in [-1,1].
    MultiScaleVars forward(const Tensor& input, bool with_grad) const;

    // Inference; throws Numeric on non-finite activations.
    MultiScaleOutput generate(const Tensor& input) const;

    long count_parameters() const { return store_.count_trainable(); }

    // Ablation switches: freeze the attention parameters (mu stays at its
    // current value, 0 at init) so the block is inert but still computed.
    void set_attention_trainable(bool trainable);
    void force_attention_identity();  // set every mu to exactly 0

private:
    GeneratorConfig cfg_;
    ParamStore store_;
    std::vector<SelfAttentionBlock> blocks_;
    std::vector<int> block_stages_;
    std::vector<int> enc_channels_;  // per encoder stage, 1-based at index-1
};

}  // namespace dagan

#endif
