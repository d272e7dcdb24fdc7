#ifndef DAGAN_EVAL_HPP
#define DAGAN_EVAL_HPP

#include <string>
#include <vector>

#include "dagan/generator.hpp"
#include "dagan/losses.hpp"
#include "dagan/synthdata.hpp"

namespace dagan {

// Rank-1 retrieval counts for one absolute-yaw bucket, plus the mean
// per-pixel L1 distance to the ground-truth frontal.
struct PoseBucket {
    double abs_yaw = 0.0;
    long hits = 0;
    long total = 0;
    double pixel_l1 = 0.0;

    double rank1() const { return total ? (double)hits / (double)total : 0.0; }
};

struct EvalReport {
    std::vector<PoseBucket> buckets;  // ascending |yaw|
    long hits = 0;
    long total = 0;
    double pixel_l1 = 0.0;

    double rank1() const { return total ? (double)hits / (double)total : 0.0; }
    std::string to_text() const;
};

// Rank-1 identification of held-out identities: the gallery holds one
// canonical frontal render per test identity, probes are that split's posed
// images, frontalized through the generator when frontalize is set and used
// raw otherwise. Matching is cosine similarity in the embedder's penultimate
// feature space.
EvalReport evaluate(const Generator& gen, const Embedder& emb, const Dataset& ds, bool frontalize);

double cosine_similarity(const double* a, const double* b, int n);

// Demo sheet: three rows (input profile, synthesized frontal, ground-truth
// frontal), one column per (pose, sample) with samples drawn from held-out
// identities. count is the number of samples per pose.
Tensor synthesize_grid(const Generator& gen, const Dataset& ds, const std::vector<double>& yaws,
                       int count);

}  // namespace dagan

#endif
