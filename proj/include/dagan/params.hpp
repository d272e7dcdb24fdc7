#ifndef DAGAN_PARAMS_HPP
#define DAGAN_PARAMS_HPP

#include <map>
#include <memory>
#include <string>

#include "dagan/graph.hpp"
#include "dagan/tensor.hpp"

namespace dagan {

// Owns named parameters with stable addresses. Names are unique per store;
// stores use path-style prefixes ("G/...", "D/f/...") so names are globally
// unique across a model.
class ParamStore {
public:
    Parameter& create(const std::string& name, Tensor init, bool trainable = true);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) > 0; }
    long count_trainable() const;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::map<std::string, std::unique_ptr<Parameter>> params_;
};

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adaptive-moment optimizer over one parameter store. Parameters without an
// entry in the grad map are updated with a zero gradient so moment decay is
// identical regardless of which loss terms were active.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(ParamStore& store, const GradMap& grads);

    AdamConfig& config() { return cfg_; }
    long steps_taken() const { return t_; }

    // Checkpoint support.
    void save_into(std::map<std::string, Tensor>& tensors, std::map<std::string, std::string>& meta,
                   const std::string& prefix) const;
    void load_from(const std::map<std::string, Tensor>& tensors,
                   const std::map<std::string, std::string>& meta, const std::string& prefix);

private:
    AdamConfig cfg_;
    long t_ = 0;
    std::map<std::string, Tensor> m_, v_;
};

// Flat named-tensor archive with a string metadata header; the shared
// checkpoint format. Round-trips bit-exactly.
struct Archive {
    std::map<std::string, std::string> meta;
    std::map<std::string, Tensor> tensors;

    void save(const std::string& path) const;
    static Archive load(const std::string& path);

    void put_store(const ParamStore& store);
    // Assigns values into an already-constructed store; every parameter must
    // be present with a matching shape.
    void fill_store(ParamStore& store) const;
};

}  // namespace dagan

#endif
