#ifndef DAGAN_GRADCHECK_SUITE_HPP
#define DAGAN_GRADCHECK_SUITE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dagan/gradcheck.hpp"

namespace dagan {

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;  // worst over the random instances
    bool pass = false;
};

struct GradCheckResult {
    std::vector<GradCheckEntry> entries;
    double threshold = 1e-4;

    bool all_pass() const;
    std::string to_text() const;  // one line per entry plus a verdict
};

// Checks the analytic gradient of every differentiable operation, the
// attention block, and each training loss against central finite
// differences, several random instances each. Inputs are sampled away from
// kinks (relu, abs, clamp edges) so the finite difference is valid.
// inject_fault corrupts one analytic gradient on purpose; the suite must
// then report a failure.
GradCheckResult run_gradcheck_suite(uint64_t seed, bool inject_fault = false);

}  // namespace dagan

#endif
