#include "dagan/ablation.hpp"

#include <iomanip>
#include <sstream>

namespace dagan {

double AblationRow::pose_avg_rank1() const {
    if (report.buckets.empty()) return 0.0;
    double s = 0.0;
    for (const auto& b : report.buckets) s += b.rank1();
    return s / (double)report.buckets.size();
}

const AblationRow* AblationReport::find(AblationMode mode, uint64_t seed) const {
    for (const auto& r : rows)
        if (r.mode == mode && r.seed == seed) return &r;
    return nullptr;
}

std::string AblationReport::to_text() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    for (const auto& r : rows) {
        os << "mode=" << mode_name(r.mode) << " seed=" << r.seed
           << " avg_rank1=" << r.pose_avg_rank1() << " overall=" << r.report.rank1();
        for (const auto& b : r.report.buckets)
            os << " yaw" << (long)b.abs_yaw << "=" << b.rank1() << "(" << b.hits << "/" << b.total
               << ")";
        os << " raw_overall=" << r.raw_baseline.rank1() << "\n";
    }
    return os.str();
}

AblationReport run_ablation(TrainConfig base, const std::vector<AblationMode>& modes,
                            const std::vector<uint64_t>& seeds, std::ostream* log) {
    if (modes.empty() || seeds.empty())
        throw Error(ErrorKind::Invalid, "ablation needs at least one mode and one seed");
    AblationReport rep;
    for (uint64_t seed : seeds)
        for (AblationMode mode : modes) {
            TrainConfig cfg = base;
            cfg.mode = mode;
            cfg.seed = seed;
            if (log) *log << "# ablation " << mode_name(mode) << " seed " << seed << "\n";
            TrainState state = init_train_state(cfg);
            for (long i = 0; i < cfg.steps; ++i) train_step(state);
            AblationRow row;
            row.mode = mode;
            row.seed = seed;
            row.report = evaluate(*state.gen, *state.emb, state.dataset, true);
            row.raw_baseline = evaluate(*state.gen, *state.emb, state.dataset, false);
            if (log)
                *log << "# avg_rank1=" << row.pose_avg_rank1()
                     << " overall=" << row.report.rank1() << "\n";
            rep.rows.push_back(std::move(row));
        }
    return rep;
}

}  // namespace dagan
