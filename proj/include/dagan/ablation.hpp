#ifndef DAGAN_ABLATION_HPP
#define DAGAN_ABLATION_HPP

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "dagan/eval.hpp"
#include "dagan/trainer.hpp"

namespace dagan {

struct AblationRow {
    AblationMode mode;
    uint64_t seed = 0;
    EvalReport report;         // frontalized probes
    EvalReport raw_baseline;   // same probes, no frontalization

    double pose_avg_rank1() const;  // mean of per-bucket rank-1
};

struct AblationReport {
    std::vector<AblationRow> rows;

    const AblationRow* find(AblationMode mode, uint64_t seed) const;
    std::string to_text() const;  // mode x pose-bucket rank-1 table
};

// Trains every (mode, seed) combination from the same base config and data
// and evaluates rank-1 retrieval on the held-out split. Deterministic for a
// fixed seed list.
AblationReport run_ablation(TrainConfig base, const std::vector<AblationMode>& modes,
                            const std::vector<uint64_t>& seeds, std::ostream* log = nullptr);

}  // namespace dagan

#endif
