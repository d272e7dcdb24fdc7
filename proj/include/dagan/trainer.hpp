#ifndef DAGAN_TRAINER_HPP
#define DAGAN_TRAINER_HPP

#include <deque>
#include <memory>
#include <ostream>
#include <random>

#include "dagan/config.hpp"
#include "dagan/discriminator.hpp"
#include "dagan/faceparse.hpp"
#include "dagan/generator.hpp"
#include "dagan/losses.hpp"
#include "dagan/synthdata.hpp"

namespace dagan {

// Everything a training run carries: nets, optimizer moments, the sampling
// stream, and the trailing window of pixel losses. Resumable via the
// checkpoint archive, bit-exactly.
struct TrainState {
    TrainConfig cfg;
    Dataset dataset;
    std::vector<RegionMasks> masks_by_identity;  // frontal masks, precomputed
    std::unique_ptr<Generator> gen;
    std::unique_ptr<DiscriminatorBank> bank;
    std::unique_ptr<Embedder> emb;
    double embedder_accuracy = 0.0;
    Adam opt_g, opt_d;
    std::mt19937_64 batch_rng;
    long step = 0;
    std::vector<char> regions;  // adversarial regions active this run
    std::deque<double> pixel_window;

    double pixel_running_avg() const;
};

TrainState init_train_state(const TrainConfig& cfg);

std::vector<size_t> sample_batch(TrainState& state);
LossReport train_step_on_batch(TrainState& state, const std::vector<size_t>& batch);
LossReport train_step(TrainState& state);

std::string format_log_line(long step, const LossReport& r, const std::vector<char>& regions);

// Runs `steps` additional steps, appending one log line per step and writing
// checkpoints at the configured interval into out_dir (when non-empty).
void run(TrainState& state, long steps, const std::string& out_dir, std::ostream* log = nullptr);

void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

// Builds the masked region views for a batch of frontal images.
RegionBatch masked_regions(const Tensor& images, const std::vector<const RegionMasks*>& masks);

}  // namespace dagan

#endif
