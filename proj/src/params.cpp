#include "dagan/params.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

namespace dagan {

Parameter& ParamStore::create(const std::string& name, Tensor init, bool trainable) {
    auto [it, fresh] = params_.try_emplace(name, nullptr);
    if (!fresh) throw Error(ErrorKind::Invalid, "duplicate parameter name '" + name + "'");
    it->second = std::make_unique<Parameter>(Parameter{name, std::move(init), trainable});
    return *it->second;
}

Parameter& ParamStore::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error(ErrorKind::Invalid, "unknown parameter '" + name + "'");
    return *it->second;
}

const Parameter& ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error(ErrorKind::Invalid, "unknown parameter '" + name + "'");
    return *it->second;
}

long ParamStore::count_trainable() const {
    long n = 0;
    for (const auto& [name, p] : params_)
        if (p->trainable) n += p->value.size();
    return n;
}

void Adam::step(ParamStore& store, const GradMap& grads) {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, (double)t_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, (double)t_);
    for (auto& [name, p] : store) {
        if (!p->trainable) continue;
        auto mit = m_.try_emplace(name, Tensor::zeros(p->value.shape)).first;
        auto vit = v_.try_emplace(name, Tensor::zeros(p->value.shape)).first;
        auto git = grads.find(p.get());
        const Tensor* g = git == grads.end() ? nullptr : &git->second;
        Tensor& m = mit->second;
        Tensor& v = vit->second;
        for (long i = 0; i < p->value.size(); ++i) {
            double gi = g ? (*g)[i] : 0.0;
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p->value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Adam::save_into(std::map<std::string, Tensor>& tensors, std::map<std::string, std::string>& meta,
                     const std::string& prefix) const {
    meta[prefix + "/t"] = std::to_string(t_);
    for (const auto& [name, t] : m_) tensors[prefix + "/m/" + name] = t;
    for (const auto& [name, t] : v_) tensors[prefix + "/v/" + name] = t;
}

void Adam::load_from(const std::map<std::string, Tensor>& tensors,
                     const std::map<std::string, std::string>& meta, const std::string& prefix) {
    auto it = meta.find(prefix + "/t");
    if (it == meta.end()) throw Error(ErrorKind::Io, "checkpoint missing optimizer state '" + prefix + "'");
    t_ = std::stol(it->second);
    m_.clear();
    v_.clear();
    std::string mp = prefix + "/m/", vp = prefix + "/v/";
    for (const auto& [name, t] : tensors) {
        if (name.rfind(mp, 0) == 0) m_[name.substr(mp.size())] = t;
        if (name.rfind(vp, 0) == 0) v_[name.substr(vp.size())] = t;
    }
}

namespace {

constexpr char kMagic[8] = {'D', 'A', 'G', 'A', 'N', 'C', 'K', '1'};

void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
void write_str(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), (std::streamsize)s.size());
}
std::string read_str(std::istream& is) {
    uint64_t n = read_u64(is);
    std::string s(n, '\0');
    is.read(s.data(), (std::streamsize)n);
    return s;
}

}  // namespace

void Archive::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorKind::Io, "cannot write checkpoint '" + path + "'");
    os.write(kMagic, 8);
    write_u64(os, meta.size());
    for (const auto& [k, v] : meta) {
        write_str(os, k);
        write_str(os, v);
    }
    write_u64(os, tensors.size());
    for (const auto& [k, t] : tensors) {
        write_str(os, k);
        write_u64(os, t.shape.size());
        for (int d : t.shape) write_u64(os, (uint64_t)d);
        os.write(reinterpret_cast<const char*>(t.data.data()), (std::streamsize)(t.data.size() * 8));
    }
    if (!os) throw Error(ErrorKind::Io, "write failure on '" + path + "'");
}

Archive Archive::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorKind::Io, "cannot read checkpoint '" + path + "'");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != std::string(kMagic, 8))
        throw Error(ErrorKind::Io, "'" + path + "' is not a checkpoint archive");
    Archive a;
    uint64_t nmeta = read_u64(is);
    for (uint64_t i = 0; i < nmeta; ++i) {
        std::string k = read_str(is);
        a.meta[k] = read_str(is);
    }
    uint64_t nt = read_u64(is);
    for (uint64_t i = 0; i < nt; ++i) {
        std::string k = read_str(is);
        uint64_t rank = read_u64(is);
        Shape s(rank);
        for (auto& d : s) d = (int)read_u64(is);
        Tensor t = Tensor::zeros(s);
        is.read(reinterpret_cast<char*>(t.data.data()), (std::streamsize)(t.data.size() * 8));
        a.tensors[k] = std::move(t);
    }
    if (!is) throw Error(ErrorKind::Io, "truncated checkpoint '" + path + "'");
    return a;
}

void Archive::put_store(const ParamStore& store) {
    for (const auto& [name, p] : store) {
        tensors[name] = p->value;
        if (!p->trainable) meta["frozen/" + name] = "1";
    }
}

void Archive::fill_store(ParamStore& store) const {
    for (auto& [name, p] : store) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw Error(ErrorKind::Io, "checkpoint missing tensor '" + name + "'");
        if (it->second.shape != p->value.shape)
            throw Error(ErrorKind::Io, "checkpoint shape mismatch for '" + name + "': " +
                                           shape_str(it->second.shape) + " vs " + shape_str(p->value.shape));
        p->value = it->second;
    }
}

}  // namespace dagan
