#include "dagan/eval.hpp"

#include "dagan/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace dagan {

double cosine_similarity(const double* a, const double* b, int n) {
    double dot = 0, na = 0, nb = 0;
    for (int i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    double denom = std::sqrt(na) * std::sqrt(nb);
    return denom > 0 ? dot / denom : 0.0;
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os.precision(4);
    os << "identity retrieval (rank-1)\n";
    os << "rank1_overall=" << rank1() << " hits=" << hits << " total=" << total
       << " pixel_l1=" << pixel_l1 << "\n";
    for (const auto& b : buckets)
        os << "yaw=" << b.abs_yaw << " rank1=" << b.rank1() << " hits=" << b.hits
           << " total=" << b.total << " pixel_l1=" << b.pixel_l1 << "\n";
    return os.str();
}

EvalReport evaluate(const Generator& gen, const Embedder& emb, const Dataset& ds, bool frontalize) {
    std::vector<size_t> probes = ds.test_indices();
    if (probes.empty()) throw Error(ErrorKind::Invalid, "evaluate: empty test split");

    // Gallery: canonical frontal render per held-out identity.
    std::vector<int> gallery_ids;
    std::vector<Tensor> gallery_feats;
    int feat = emb.feature_dim();
    for (int id = ds.n_train_identities; id < ds.n_identities; ++id) {
        FaceParams p = ds.identities[id];
        p.yaw_deg = 0;
        p.pitch_deg = 0;
        p.gain = 1.0;
        Tensor img = render(p, ds.image_size, ds.channels);
        Tensor batch = Tensor::zeros({1, ds.channels, ds.image_size, ds.image_size});
        std::copy(img.data.begin(), img.data.end(), batch.data.begin());
        gallery_ids.push_back(id);
        gallery_feats.push_back(emb.embed(batch));
    }

    std::map<double, PoseBucket> by_yaw;
    EvalReport rep;
    long pix_count = 0;
    for (size_t idx : probes) {
        const ImagePair& pair = ds.pairs[idx];
        Tensor probe = Tensor::zeros({1, ds.channels, ds.image_size, ds.image_size});
        std::copy(pair.profile.data.begin(), pair.profile.data.end(), probe.data.begin());
        if (frontalize) probe = gen.generate(probe).images.back();

        Tensor f = emb.embed(probe);
        int best = -1;
        double best_sim = -2.0;
        for (size_t g = 0; g < gallery_ids.size(); ++g) {
            double sim = cosine_similarity(f.data.data(), gallery_feats[g].data.data(), feat);
            if (sim > best_sim) {
                best_sim = sim;
                best = gallery_ids[g];
            }
        }
        bool hit = best == pair.identity;

        double l1 = 0;
        for (long i = 0; i < probe.size(); ++i) l1 += std::fabs(probe[i] - pair.frontal[i]);
        l1 /= (double)probe.size();

        PoseBucket& b = by_yaw[std::fabs(pair.yaw_deg)];
        b.abs_yaw = std::fabs(pair.yaw_deg);
        b.total += 1;
        b.hits += hit ? 1 : 0;
        b.pixel_l1 += l1;
        rep.total += 1;
        rep.hits += hit ? 1 : 0;
        rep.pixel_l1 += l1;
        ++pix_count;
    }
    for (auto& [yaw, b] : by_yaw) {
        b.pixel_l1 /= (double)b.total;
        rep.buckets.push_back(b);
    }
    if (pix_count) rep.pixel_l1 /= (double)pix_count;
    return rep;
}

Tensor synthesize_grid(const Generator& gen, const Dataset& ds, const std::vector<double>& yaws,
                       int count) {
    if (count < 1) throw Error(ErrorKind::Invalid, "synthesize_grid: count must be positive");
    if (yaws.empty()) throw Error(ErrorKind::Invalid, "synthesize_grid: empty pose list");
    int n_test = ds.n_identities - ds.n_train_identities;
    if (n_test < 1) throw Error(ErrorKind::Invalid, "synthesize_grid: no held-out identities");

    std::vector<Tensor> profiles, synths, frontals;
    for (double yaw : yaws)
        for (int c = 0; c < count; ++c) {
            int id = ds.n_train_identities + c % n_test;
            FaceParams p = ds.identities[id];
            p.yaw_deg = yaw;
            p.pitch_deg = 0;
            p.gain = 1.0;
            Tensor profile = render(p, ds.image_size, ds.channels);
            p.yaw_deg = 0;
            Tensor frontal = render(p, ds.image_size, ds.channels);
            Tensor batch = Tensor::zeros({1, ds.channels, ds.image_size, ds.image_size});
            std::copy(profile.data.begin(), profile.data.end(), batch.data.begin());
            Tensor synth_b = gen.generate(batch).images.back();
            Tensor synth(Shape{ds.channels, ds.image_size, ds.image_size},
                         std::vector<double>(synth_b.data.begin(), synth_b.data.end()));
            profiles.push_back(std::move(profile));
            synths.push_back(std::move(synth));
            frontals.push_back(std::move(frontal));
        }
    std::vector<Tensor> tiles;
    tiles.insert(tiles.end(), profiles.begin(), profiles.end());
    tiles.insert(tiles.end(), synths.begin(), synths.end());
    tiles.insert(tiles.end(), frontals.begin(), frontals.end());
    return tile_grid(tiles, 3, (int)yaws.size() * count);
}

}  // namespace dagan
