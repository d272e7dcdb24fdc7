#include "dagan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dagan {

namespace {

constexpr uint64_t kGenSeedSalt = 0x47454E5345454431ull;
constexpr uint64_t kBankSeedSalt = 0x42414E4B53454544ull;
constexpr uint64_t kEmbSeedSalt = 0x454D425345454431ull;
constexpr uint64_t kBatchSeedSalt = 0x4241544348534544ull;
constexpr uint64_t kEmbTrainSalt = 0x454D42545241494Eull;
constexpr int kPixelWindow = 100;

Tensor gather_images(const Dataset& ds, const std::vector<size_t>& idx, bool frontal) {
    int c = ds.channels, s = ds.image_size;
    Tensor out = Tensor::zeros({(int)idx.size(), c, s, s});
    long per = (long)c * s * s;
    for (size_t i = 0; i < idx.size(); ++i) {
        const Tensor& img = frontal ? ds.pairs[idx[i]].frontal : ds.pairs[idx[i]].profile;
        std::copy(img.data.begin(), img.data.end(), out.data.begin() + (long)i * per);
    }
    return out;
}

void check_finite(double v, const char* name, long step) {
    if (!std::isfinite(v))
        throw Error(ErrorKind::Numeric, std::string("non-finite ") + name + " at step " +
                                            std::to_string(step));
}

std::vector<std::pair<Tensor, int>> embedder_train_set(const Dataset& ds) {
    // Frontal faces plus near-frontal poses of every identity; the embedder
    // plays the role of an externally pretrained recognizer.
    std::vector<std::pair<Tensor, int>> out;
    for (int id = 0; id < ds.n_identities; ++id) {
        FaceParams p = ds.identities[id];
        p.yaw_deg = 0;
        p.pitch_deg = 0;
        p.gain = 1.0;
        out.emplace_back(render(p, ds.image_size, ds.channels), id);
    }
    for (const auto& pair : ds.pairs)
        if (std::fabs(pair.yaw_deg) <= 30.0 && std::fabs(pair.pitch_deg) <= 30.0)
            out.emplace_back(pair.profile, pair.identity);
    return out;
}

}  // namespace

double TrainState::pixel_running_avg() const {
    if (pixel_window.empty()) return 0.0;
    double s = 0.0;
    for (double v : pixel_window) s += v;
    return s / (double)pixel_window.size();
}

RegionBatch masked_regions(const Tensor& images, const std::vector<const RegionMasks*>& masks) {
    int channels = images.dim(1);
    RegionBatch rb;
    rb.full = images;
    Tensor ms = batch_mask(masks, channels, &RegionMasks::skin);
    Tensor mk = batch_mask(masks, channels, &RegionMasks::keypoints);
    Tensor mh = batch_mask(masks, channels, &RegionMasks::hair);
    auto apply = [&](const Tensor& m) {
        Tensor out = images;
        for (long i = 0; i < out.size(); ++i) out[i] *= m[i];
        return out;
    };
    rb.skin = apply(ms);
    rb.keypoints = apply(mk);
    rb.hair = apply(mh);
    return rb;
}

TrainState init_train_state(const TrainConfig& cfg) {
    cfg.validate();
    TrainState st;
    st.cfg = cfg;
    st.dataset = make_dataset(cfg.n_identities, cfg.yaws.empty() ? default_yaws() : cfg.yaws,
                              cfg.pitches.empty() ? default_pitches() : cfg.pitches, cfg.seed,
                              cfg.image_size, cfg.channels);
    for (int id = 0; id < st.dataset.n_identities; ++id)
        st.masks_by_identity.push_back(parse(st.dataset.identities[id], cfg.image_size));

    std::mt19937_64 gen_rng(cfg.seed ^ kGenSeedSalt);
    GeneratorConfig gcfg{cfg.image_size, cfg.base_channels, cfg.channels, cfg.scale_count, {}};
    st.gen = std::make_unique<Generator>(gcfg, gen_rng);
    st.gen->set_attention_trainable(mode_uses_self_attention(cfg.mode));

    std::mt19937_64 bank_rng(cfg.seed ^ kBankSeedSalt);
    st.bank = std::make_unique<DiscriminatorBank>(cfg.image_size, cfg.channels, cfg.base_channels,
                                                  bank_rng);

    std::mt19937_64 emb_rng(cfg.seed ^ kEmbSeedSalt);
    st.emb = std::make_unique<Embedder>(cfg.image_size, cfg.channels, cfg.n_identities, emb_rng);
    std::mt19937_64 emb_train_rng(cfg.seed ^ kEmbTrainSalt);
    st.embedder_accuracy = train_embedder(*st.emb, embedder_train_set(st.dataset),
                                          cfg.embedder_epochs, 16, 1e-3, emb_train_rng);
    for (auto& [name, p] : st.emb->params()) p->trainable = false;

    st.opt_g = Adam({cfg.lr_g, cfg.beta1, cfg.beta2, 1e-8});
    st.opt_d = Adam({cfg.lr_d, cfg.beta1, cfg.beta2, 1e-8});
    st.batch_rng.seed(cfg.seed ^ kBatchSeedSalt);
    st.regions = mode_regions(cfg.mode);
    return st;
}

std::vector<size_t> sample_batch(TrainState& st) {
    std::vector<size_t> train = st.dataset.train_indices();
    if (train.empty()) throw Error(ErrorKind::Invalid, "empty training split");
    std::uniform_int_distribution<size_t> pick(0, train.size() - 1);
    std::vector<size_t> batch(st.cfg.batch_size);
    for (auto& b : batch) b = train[pick(st.batch_rng)];
    return batch;
}

LossReport train_step_on_batch(TrainState& st, const std::vector<size_t>& batch) {
    const Dataset& ds = st.dataset;
    Tensor profiles = gather_images(ds, batch, false);
    Tensor frontals = gather_images(ds, batch, true);
    std::vector<const RegionMasks*> masks;
    for (size_t idx : batch) masks.push_back(&st.masks_by_identity[ds.pairs[idx].identity]);

    LossReport report;

    // D sub-step(s): fake branch detached.
    RegionBatch real = masked_regions(frontals, masks);
    for (int d = 0; d < st.cfg.d_steps_per_g_step; ++d) {
        MultiScaleOutput fake_out = st.gen->generate(profiles);
        RegionBatch fake = masked_regions(fake_out.images.back(), masks);
        AdvLossReport adv_d;
        Var d_loss = adv_loss_D(*st.bank, real, fake, st.regions, &adv_d);
        check_finite(d_loss->value[0], "discriminator loss", st.step);
        GradMap d_grads = backward(d_loss, Tensor::scalar(1.0));
        st.opt_d.step(st.bank->params(), d_grads);
    }

    // G sub-step.
    MultiScaleVars out = st.gen->forward(profiles, true);
    Var fake_full = out.images.back();
    int channels = ds.channels;
    RegionVars fake_regions;
    fake_regions.full = fake_full;
    fake_regions.skin = mul(fake_full, constant(batch_mask(masks, channels, &RegionMasks::skin)));
    fake_regions.keypoints =
        mul(fake_full, constant(batch_mask(masks, channels, &RegionMasks::keypoints)));
    fake_regions.hair = mul(fake_full, constant(batch_mask(masks, channels, &RegionMasks::hair)));

    AdvLossReport adv_g;
    Var l_adv = adv_loss_G(*st.bank, fake_regions, st.regions, &adv_g);
    Var l_id = identity_loss(fake_full, frontals, *st.emb);
    Var l_pix = pixel_loss(out.images, frontals);
    Var l_tv = tv_loss(fake_full);
    Var total = total_loss(l_id, l_pix, l_adv, l_tv, st.cfg.weights, &report);
    report.l_f = adv_g.l_f;
    report.l_s = adv_g.l_s;
    report.l_k = adv_g.l_k;
    report.l_h = adv_g.l_h;
    check_finite(report.l_id, "L_ID", st.step);
    check_finite(report.l_pixel, "L_pixel", st.step);
    check_finite(report.l_adv, "L_adv", st.step);
    check_finite(report.l_tv, "L_tv", st.step);
    check_finite(report.total, "total loss", st.step);

    GradMap g_grads = backward(total, Tensor::scalar(1.0));
    st.opt_g.step(st.gen->params(), g_grads);

    ++st.step;
    st.pixel_window.push_back(report.l_pixel);
    while ((int)st.pixel_window.size() > kPixelWindow) st.pixel_window.pop_front();
    return report;
}

LossReport train_step(TrainState& st) { return train_step_on_batch(st, sample_batch(st)); }

std::string format_log_line(long step, const LossReport& r, const std::vector<char>& regions) {
    std::ostringstream os;
    os.precision(6);
    os << "step=" << step << " L_ID=" << r.l_id << " L_pixel=" << r.l_pixel;
    for (char reg : regions) {
        const std::optional<double>* v = nullptr;
        switch (reg) {
            case 'f': v = &r.l_f; break;
            case 's': v = &r.l_s; break;
            case 'k': v = &r.l_k; break;
            case 'h': v = &r.l_h; break;
        }
        if (v && v->has_value()) os << " L_" << reg << "=" << **v;
    }
    os << " L_tv=" << r.l_tv << " total=" << r.total;
    return os.str();
}

void run(TrainState& st, long steps, const std::string& out_dir, std::ostream* log) {
    std::ofstream log_file;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        log_file.open(out_dir + "/train_log.txt", std::ios::app);
        if (!log_file) throw Error(ErrorKind::Io, "cannot open training log in '" + out_dir + "'");
    }
    for (long i = 0; i < steps; ++i) {
        LossReport r = train_step(st);
        std::string line = format_log_line(st.step, r, st.regions);
        if (log_file.is_open()) log_file << line << "\n";
        if (log) *log << line << "\n";
        if (!out_dir.empty() &&
            (st.step % st.cfg.checkpoint_interval == 0 || i + 1 == steps))
            save_checkpoint(st, out_dir + "/checkpoint.dgk");
    }
    if (!out_dir.empty() && steps == 0) save_checkpoint(st, out_dir + "/checkpoint.dgk");
}

void save_checkpoint(const TrainState& st, const std::string& path) {
    Archive a;
    for (const auto& [k, v] : st.cfg.to_map()) a.meta["cfg/" + k] = v;
    a.meta["step"] = std::to_string(st.step);
    a.meta["embedder_accuracy"] = std::to_string(st.embedder_accuracy);
    std::ostringstream rng_os;
    rng_os << st.batch_rng;
    a.meta["batch_rng"] = rng_os.str();
    a.put_store(st.gen->params());
    a.put_store(st.bank->params());
    a.put_store(st.emb->params());
    st.opt_g.save_into(a.tensors, a.meta, "opt_g");
    st.opt_d.save_into(a.tensors, a.meta, "opt_d");
    Tensor window = Tensor::zeros({std::max<int>(1, (int)st.pixel_window.size())});
    a.meta["pixel_window_len"] = std::to_string(st.pixel_window.size());
    for (size_t i = 0; i < st.pixel_window.size(); ++i) window[i] = st.pixel_window[i];
    a.tensors["pixel_window"] = window;
    a.save(path);
}

TrainState load_checkpoint(const std::string& path) {
    Archive a = Archive::load(path);
    std::map<std::string, std::string> cfg_map;
    for (const auto& [k, v] : a.meta)
        if (k.rfind("cfg/", 0) == 0) cfg_map[k.substr(4)] = v;
    TrainConfig cfg = TrainConfig::from_map(cfg_map);

    TrainState st;
    st.cfg = cfg;
    st.dataset = make_dataset(cfg.n_identities, cfg.yaws.empty() ? default_yaws() : cfg.yaws,
                              cfg.pitches.empty() ? default_pitches() : cfg.pitches, cfg.seed,
                              cfg.image_size, cfg.channels);
    for (int id = 0; id < st.dataset.n_identities; ++id)
        st.masks_by_identity.push_back(parse(st.dataset.identities[id], cfg.image_size));

    std::mt19937_64 gen_rng(cfg.seed ^ kGenSeedSalt);
    GeneratorConfig gcfg{cfg.image_size, cfg.base_channels, cfg.channels, cfg.scale_count, {}};
    st.gen = std::make_unique<Generator>(gcfg, gen_rng);
    st.gen->set_attention_trainable(mode_uses_self_attention(cfg.mode));
    std::mt19937_64 bank_rng(cfg.seed ^ kBankSeedSalt);
    st.bank = std::make_unique<DiscriminatorBank>(cfg.image_size, cfg.channels, cfg.base_channels,
                                                  bank_rng);
    std::mt19937_64 emb_rng(cfg.seed ^ kEmbSeedSalt);
    st.emb = std::make_unique<Embedder>(cfg.image_size, cfg.channels, cfg.n_identities, emb_rng);

    a.fill_store(st.gen->params());
    a.fill_store(st.bank->params());
    a.fill_store(st.emb->params());
    for (auto& [name, p] : st.emb->params()) p->trainable = false;

    st.opt_g = Adam({cfg.lr_g, cfg.beta1, cfg.beta2, 1e-8});
    st.opt_d = Adam({cfg.lr_d, cfg.beta1, cfg.beta2, 1e-8});
    st.opt_g.load_from(a.tensors, a.meta, "opt_g");
    st.opt_d.load_from(a.tensors, a.meta, "opt_d");

    st.step = std::stol(a.meta.at("step"));
    st.embedder_accuracy = std::stod(a.meta.at("embedder_accuracy"));
    std::istringstream rng_is(a.meta.at("batch_rng"));
    rng_is >> st.batch_rng;
    size_t wl = std::stoul(a.meta.at("pixel_window_len"));
    const Tensor& window = a.tensors.at("pixel_window");
    for (size_t i = 0; i < wl; ++i) st.pixel_window.push_back(window[i]);
    st.regions = mode_regions(cfg.mode);
    return st;
}

}  // namespace dagan
