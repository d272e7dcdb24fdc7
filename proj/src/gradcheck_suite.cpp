#include "dagan/gradcheck_suite.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "dagan/attention.hpp"
#include "dagan/discriminator.hpp"
#include "dagan/faceparse.hpp"
#include "dagan/generator.hpp"
#include "dagan/graph.hpp"
#include "dagan/losses.hpp"
#include "dagan/params.hpp"
#include "dagan/synthdata.hpp"

namespace dagan {

bool GradCheckResult::all_pass() const {
    for (const auto& e : entries)
        if (!e.pass) return false;
    return true;
}

std::string GradCheckResult::to_text() const {
    std::ostringstream os;
    for (const auto& e : entries) {
        os.precision(3);
        os << (e.pass ? "ok   " : "FAIL ") << e.name << " max_rel_error=" << std::scientific
           << e.max_rel_error << std::defaultfloat << "\n";
    }
    os << (all_pass() ? "gradient check passed" : "gradient check FAILED") << " ("
       << entries.size() << " entries, threshold " << threshold << ")\n";
    return os.str();
}

namespace {

constexpr int kInstances = 5;

// Pushes values away from zero so relu/abs kinks sit far from the finite
// difference probe.
Tensor away_from_zero(Tensor t, double margin = 0.15) {
    for (auto& v : t.data)
        if (std::fabs(v) < margin) v = v < 0 ? v - margin : v + margin;
    return t;
}

// Rel error against finite differences, skipping coordinates where two step
// sizes disagree: those sit on a leaky-relu kink of the network under test,
// where the central difference itself is invalid.
double rel_error_smooth_coords(const std::function<double(const Tensor&)>& f, const Tensor& x0,
                               const Tensor& analytic) {
    Tensor fd1 = finite_diff_grad(f, x0, 1e-5);
    Tensor fd2 = finite_diff_grad(f, x0, 5e-6);
    double scale = std::max(1.0, fd1.max_abs());
    double worst = 0.0;
    for (long i = 0; i < x0.size(); ++i) {
        if (std::fabs(fd1[i] - fd2[i]) > 1e-7 * scale) continue;
        worst = std::max(worst, std::fabs(analytic[i] - fd1[i]) / scale);
    }
    return worst;
}

struct Suite {
    GradCheckResult result;
    std::mt19937_64 rng;
    bool inject_fault;

    // Weighted-sum read-out turns a tensor-valued op into a scalar without
    // hiding per-element errors behind cancellation.
    Tensor weights_for(const Shape& s) { return uniform(s, rng, 0.5, 1.5); }

    // One instance: `build` maps the variable tensor to a scalar Var, with
    // the variable passed as an already-built leaf.
    double instance(const std::function<Var(Var)>& build, const Tensor& x0) {
        Var x = input_var(x0);
        Var y = build(x);
        backward(y, Tensor::scalar(1.0));
        Tensor analytic = x->has_grad ? x->grad : Tensor::zeros(x0.shape);
        auto f = [&](const Tensor& t) { return build(input_var(t))->value[0]; };
        Tensor fd = finite_diff_grad(f, x0);
        return grad_rel_error(analytic, fd);
    }

    void entry(const std::string& name,
               const std::function<double(std::mt19937_64&)>& one_instance, int reps = kInstances) {
        GradCheckEntry e;
        e.name = name;
        for (int i = 0; i < reps; ++i)
            e.max_rel_error = std::max(e.max_rel_error, one_instance(rng));
        e.pass = e.max_rel_error <= result.threshold;
        result.entries.push_back(e);
    }

    // Common case: elementwise-style op on a random [2,3,4] tensor.
    void op_entry(const std::string& name, const std::function<Var(Var)>& op,
                  bool kink_avoid = false, double lo = -2.0, double hi = 2.0) {
        entry(name, [&, this](std::mt19937_64& r) {
            Tensor x0 = uniform({2, 3, 4}, r, lo, hi);
            if (kink_avoid) x0 = away_from_zero(x0);
            Tensor w = weights_for(op(input_var(x0))->value.shape);
            return instance([&](Var x) { return reduce_sum(mul(op(x), constant(w))); }, x0);
        });
    }
};

}  // namespace

GradCheckResult run_gradcheck_suite(uint64_t seed, bool inject_fault) {
    Suite s;
    s.rng.seed(seed ^ 0x47524144434B5355ull);
    s.inject_fault = inject_fault;

    Tensor other = uniform({2, 3, 4}, s.rng, -1, 1);
    s.op_entry("add", [&](Var x) { return add(x, constant(other)); });
    s.op_entry("sub", [&](Var x) { return sub(constant(other), x); });
    s.op_entry("mul", [&](Var x) { return mul(x, x); });
    s.op_entry("scalar_mul", [&](Var x) { return scalar_mul(x, -1.7); });
    s.op_entry("relu", [&](Var x) { return relu(x); }, true);
    s.op_entry("leaky_relu", [&](Var x) { return leaky_relu(x); }, true);
    s.op_entry("sigmoid", [&](Var x) { return sigmoid(x); });
    s.op_entry("tanh", [&](Var x) { return tanh_op(x); });
    s.op_entry("abs", [&](Var x) { return abs_op(x); }, true);
    s.op_entry("square", [&](Var x) { return square(x); });
    s.op_entry("log", [&](Var x) { return log_op(x); }, false, 0.2, 3.0);
    // Clamp bounds outside the sample range keep the probe off the edges.
    s.op_entry("clamp", [&](Var x) { return clamp(x, -5.0, 5.0); });
    s.op_entry("reshape", [&](Var x) { return reshape(x, {4, 6}); });
    s.op_entry("upsample_nearest2", [&](Var x) { return reshape(upsample_nearest2(reshape(x, {1, 2, 3, 4})), {1, 2, 6, 8}); });

    s.entry("mul_param_scalar", [&](std::mt19937_64& r) {
        Tensor x0 = uniform({2, 3}, r, -2, 2);
        Tensor mu0 = uniform({1}, r, -2, 2);
        Tensor w = s.weights_for(x0.shape);
        // Check both the tensor side and the scalar side.
        double e1 = s.instance(
            [&](Var x) { return reduce_sum(mul(mul_param_scalar(x, input_var(mu0)), constant(w))); },
            x0);
        double e2 = s.instance(
            [&](Var mu) { return reduce_sum(mul(mul_param_scalar(input_var(x0), mu), constant(w))); },
            mu0);
        return std::max(e1, e2);
    });

    s.entry("matmul", [&](std::mt19937_64& r) {
        Tensor a0 = uniform({3, 4}, r, -1, 1);
        Tensor b0 = uniform({4, 2}, r, -1, 1);
        Tensor w = s.weights_for({3, 2});
        double e1 = s.instance(
            [&](Var a) { return reduce_sum(mul(matmul(a, constant(b0)), constant(w))); }, a0);
        double e2 = s.instance(
            [&](Var b) { return reduce_sum(mul(matmul(constant(a0), b), constant(w))); }, b0);
        return std::max(e1, e2);
    });
    s.entry("transpose2", [&](std::mt19937_64& r) {
        Tensor x0 = uniform({3, 5}, r, -1, 1);
        Tensor w = s.weights_for({5, 3});
        return s.instance([&](Var x) { return reduce_sum(mul(transpose2(x), constant(w))); }, x0);
    });
    s.entry("batched_matmul", [&](std::mt19937_64& r) {
        Tensor a0 = uniform({2, 3, 4}, r, -1, 1);
        Tensor b0 = uniform({2, 4, 2}, r, -1, 1);
        Tensor w = s.weights_for({2, 3, 2});
        double e1 = s.instance(
            [&](Var a) { return reduce_sum(mul(batched_matmul(a, constant(b0)), constant(w))); }, a0);
        double e2 = s.instance(
            [&](Var b) { return reduce_sum(mul(batched_matmul(constant(a0), b), constant(w))); }, b0);
        return std::max(e1, e2);
    });
    s.entry("batched_matmul_bt", [&](std::mt19937_64& r) {
        Tensor a0 = uniform({2, 3, 4}, r, -1, 1);
        Tensor b0 = uniform({2, 5, 4}, r, -1, 1);
        Tensor w = s.weights_for({2, 3, 5});
        double e1 = s.instance(
            [&](Var a) { return reduce_sum(mul(batched_matmul_bt(a, constant(b0)), constant(w))); },
            a0);
        double e2 = s.instance(
            [&](Var b) { return reduce_sum(mul(batched_matmul_bt(constant(a0), b), constant(w))); },
            b0);
        return std::max(e1, e2);
    });
    s.entry("batched_transpose", [&](std::mt19937_64& r) {
        Tensor x0 = uniform({2, 3, 4}, r, -1, 1);
        Tensor w = s.weights_for({2, 4, 3});
        return s.instance([&](Var x) { return reduce_sum(mul(batched_transpose(x), constant(w))); },
                          x0);
    });
    s.entry("softmax_axis", [&](std::mt19937_64& r) {
        Tensor x0 = uniform({2, 4, 5}, r, -3, 3);
        Tensor w = s.weights_for(x0.shape);
        return s.instance([&](Var x) { return reduce_sum(mul(softmax_axis(x, 2), constant(w))); },
                          x0);
    });
    s.entry("concat_channels", [&](std::mt19937_64& r) {
        Tensor x0 = uniform({2, 2, 3, 3}, r, -1, 1);
        Tensor other = uniform({2, 3, 3, 3}, r, -1, 1);
        Tensor w = s.weights_for({2, 5, 3, 3});
        return s.instance(
            [&](Var x) { return reduce_sum(mul(concat_channels({x, constant(other)}), constant(w))); },
            x0);
    });
    s.entry("linear", [&](std::mt19937_64& r) {
        Tensor x0 = uniform({3, 4}, r, -1, 1);
        Tensor w0 = uniform({4, 2}, r, -1, 1);
        Tensor b0 = uniform({2}, r, -1, 1);
        Tensor rw = s.weights_for({3, 2});
        double e1 = s.instance(
            [&](Var x) { return reduce_sum(mul(linear(x, constant(w0), constant(b0)), constant(rw))); },
            x0);
        double e2 = s.instance(
            [&](Var w) { return reduce_sum(mul(linear(constant(x0), w, constant(b0)), constant(rw))); },
            w0);
        double e3 = s.instance(
            [&](Var b) { return reduce_sum(mul(linear(constant(x0), constant(w0), b), constant(rw))); },
            b0);
        return std::max({e1, e2, e3});
    });
    s.entry("reduce_sum", [&](std::mt19937_64& r) {
        Tensor x0 = uniform({2, 3, 4}, r, -2, 2);
        return s.instance([&](Var x) { return reduce_sum(x); }, x0);
    });
    s.entry("reduce_mean", [&](std::mt19937_64& r) {
        Tensor x0 = uniform({2, 3, 4}, r, -2, 2);
        return s.instance([&](Var x) { return reduce_mean(x); }, x0);
    });

    s.entry("conv2d", [&](std::mt19937_64& r) {
        Tensor x0 = uniform({2, 2, 6, 6}, r, -1, 1);
        Tensor w0 = uniform({3, 2, 4, 4}, r, -0.5, 0.5);
        Tensor b0 = uniform({3}, r, -0.5, 0.5);
        Tensor rw = s.weights_for({2, 3, 3, 3});
        auto scal = [&](Var y) { return reduce_sum(mul(y, constant(rw))); };
        double e1 = s.instance(
            [&](Var x) { return scal(conv2d(x, constant(w0), constant(b0), 2, 1)); }, x0);
        double e2 = s.instance(
            [&](Var w) { return scal(conv2d(constant(x0), w, constant(b0), 2, 1)); }, w0);
        double e3 = s.instance(
            [&](Var b) { return scal(conv2d(constant(x0), constant(w0), b, 2, 1)); }, b0);
        return std::max({e1, e2, e3});
    });
    s.entry("conv_transpose2d", [&](std::mt19937_64& r) {
        Tensor x0 = uniform({2, 3, 3, 3}, r, -1, 1);
        Tensor w0 = uniform({3, 2, 4, 4}, r, -0.5, 0.5);
        Tensor b0 = uniform({2}, r, -0.5, 0.5);
        Tensor rw = s.weights_for({2, 2, 6, 6});
        auto scal = [&](Var y) { return reduce_sum(mul(y, constant(rw))); };
        double e1 = s.instance(
            [&](Var x) { return scal(conv_transpose2d(x, constant(w0), constant(b0), 2, 1)); }, x0);
        double e2 = s.instance(
            [&](Var w) { return scal(conv_transpose2d(constant(x0), w, constant(b0), 2, 1)); }, w0);
        double e3 = s.instance(
            [&](Var b) { return scal(conv_transpose2d(constant(x0), constant(w0), b, 2, 1)); }, b0);
        return std::max({e1, e2, e3});
    });
    s.entry("instance_norm", [&](std::mt19937_64& r) {
        Tensor x0 = uniform({2, 2, 4, 4}, r, -2, 2);
        Tensor g0 = uniform({2}, r, 0.5, 1.5);
        Tensor b0 = uniform({2}, r, -0.5, 0.5);
        Tensor rw = s.weights_for(x0.shape);
        auto scal = [&](Var y) { return reduce_sum(mul(y, constant(rw))); };
        double e1 = s.instance(
            [&](Var x) { return scal(instance_norm(x, constant(g0), constant(b0))); }, x0);
        double e2 = s.instance(
            [&](Var g) { return scal(instance_norm(constant(x0), g, constant(b0))); }, g0);
        double e3 = s.instance(
            [&](Var b) { return scal(instance_norm(constant(x0), constant(g0), b)); }, b0);
        return std::max({e1, e2, e3});
    });
    s.entry("total_variation", [&](std::mt19937_64& r) {
        // Distinct magnitudes keep neighbor differences off the |.| kink.
        Tensor x0 = away_from_zero(uniform({2, 1, 4, 4}, r, -2, 2), 0.0);
        for (long i = 0; i < x0.size(); ++i) x0[i] += 0.01 * (double)i;
        return s.instance([&](Var x) { return tv_op(x); }, x0);
    });

    s.entry("attention_block", [&](std::mt19937_64& r) {
        ParamStore store;
        SelfAttentionBlock block(store, "att", 4, r);
        block.mu().value[0] = 0.37;  // off the init value so all paths carry gradient
        Tensor x0 = uniform({1, 4, 3, 3}, r, -1, 1);
        Tensor rw = s.weights_for(x0.shape);
        auto scal = [&](Var y) { return reduce_sum(mul(y, constant(rw))); };
        double worst = s.instance([&](Var x) { return scal(block.forward(x)); }, x0);
        // Parameter gradients via finite differences on the stored values.
        for (auto& [name, p] : store) {
            Var x = input_var(x0);
            Var y = scal(block.forward(x));
            GradMap grads = backward(y, Tensor::scalar(1.0));
            Tensor analytic =
                grads.count(p.get()) ? grads.at(p.get()) : Tensor::zeros(p->value.shape);
            Tensor saved = p->value;
            auto f = [&](const Tensor& t) {
                p->value = t;
                return scal(block.forward(input_var(x0)))->value[0];
            };
            Tensor fd = finite_diff_grad(f, saved);
            p->value = saved;
            worst = std::max(worst, grad_rel_error(analytic, fd));
        }
        return worst;
    }, 2);

    s.entry("identity_loss", [&](std::mt19937_64& r) {
        Embedder emb(8, 1, 3, r);
        Tensor fake0 = uniform({2, 1, 8, 8}, r, -1, 1);
        Tensor real = uniform({2, 1, 8, 8}, r, -1, 1);
        return s.instance([&](Var fake) { return identity_loss(fake, real, emb); }, fake0);
    }, 3);
    s.entry("pixel_loss", [&](std::mt19937_64& r) {
        Tensor target = uniform({2, 1, 8, 8}, r, -1, 1);
        Tensor full0 = away_from_zero(uniform({2, 1, 8, 8}, r, -1, 1), 0.0);
        // Keep |output - target| away from zero at every scale.
        for (long i = 0; i < full0.size(); ++i)
            full0[i] = target[i] + (full0[i] >= target[i] ? 0.3 : -0.3) + 0.01 * std::sin((double)i);
        Tensor half0 = mean_pool2(full0);
        for (long i = 0; i < half0.size(); ++i) half0[i] += 0.11;
        double e1 = s.instance(
            [&](Var full) { return pixel_loss({constant(half0), full}, target); }, full0);
        double e2 = s.instance(
            [&](Var half) { return pixel_loss({half, constant(full0)}, target); }, half0);
        return std::max(e1, e2);
    }, 3);
    s.entry("tv_loss", [&](std::mt19937_64& r) {
        Tensor x0 = uniform({2, 1, 5, 5}, r, -2, 2);
        for (long i = 0; i < x0.size(); ++i) x0[i] += 0.02 * (double)i;
        return s.instance([&](Var x) { return tv_loss(x); }, x0);
    });
    s.entry("cross_entropy", [&](std::mt19937_64& r) {
        Tensor logits0 = uniform({4, 3}, r, -2, 2);
        std::vector<int> labels{0, 2, 1, 2};
        return s.instance([&](Var l) { return cross_entropy(l, labels); }, logits0);
    });
    s.entry("adversarial_loss_G", [&](std::mt19937_64& r) {
        DiscriminatorBank bank(16, 1, 2, r);
        Tensor fake0 = uniform({2, 1, 16, 16}, r, -1, 1);
        return s.instance(
            [&](Var fake) {
                RegionVars rv{fake, fake, fake, fake};
                return adv_loss_G(bank, rv, {'f', 's'});
            },
            fake0);
    }, 3);
    s.entry("adversarial_loss_D", [&](std::mt19937_64& r) {
        DiscriminatorBank bank(16, 1, 2, r);
        Tensor real = uniform({2, 1, 16, 16}, r, -1, 1);
        Tensor fake = uniform({2, 1, 16, 16}, r, -1, 1);
        RegionBatch rb_real{real, real, real, real};
        RegionBatch rb_fake{fake, fake, fake, fake};
        auto loss_value = [&]() {
            return adv_loss_D(bank, rb_real, rb_fake, {'f'})->value[0];
        };
        Var l = adv_loss_D(bank, rb_real, rb_fake, {'f'});
        GradMap grads = backward(l, Tensor::scalar(1.0));
        double worst = 0.0;
        for (auto& [name, p] : bank.params()) {
            if (name.rfind("D/f/", 0) != 0) continue;
            Tensor analytic =
                grads.count(p.get()) ? grads.at(p.get()) : Tensor::zeros(p->value.shape);
            Tensor saved = p->value;
            auto f = [&](const Tensor& t) {
                p->value = t;
                return loss_value();
            };
            double err = rel_error_smooth_coords(f, saved, analytic);
            p->value = saved;
            worst = std::max(worst, err);
        }
        return worst;
    }, 2);
    // Generator end-to-end: gradient of the full-resolution read-out with
    // respect to one early conv bias, through every stage and both attention
    // blocks.
    s.entry("generator_param_grad", [&](std::mt19937_64& r) {
        GeneratorConfig cfg{16, 2, 1, 2, {}};
        Generator gen(cfg, r);
        for (auto& b : gen.attention_blocks()) b.mu().value[0] = 0.25;
        Tensor x0 = uniform({1, 1, 16, 16}, r, -1, 1);
        Tensor rw = uniform({1, 1, 16, 16}, r, 0.5, 1.5);
        auto scal = [&](Var y) { return reduce_sum(mul(y, constant(rw))); };
        Parameter& p = gen.params().get("G/enc1/b");
        Var y = scal(gen.forward(x0, true).images.back());
        GradMap grads = backward(y, Tensor::scalar(1.0));
        Tensor analytic = grads.count(&p) ? grads.at(&p) : Tensor::zeros(p.value.shape);
        Tensor saved = p.value;
        auto f = [&](const Tensor& t) {
            p.value = t;
            return scal(gen.forward(x0, true).images.back())->value[0];
        };
        Tensor fd = finite_diff_grad(f, saved);
        p.value = saved;
        return grad_rel_error(analytic, fd);
    }, 2);

    if (inject_fault) {
        s.entry("fault_injection", [&](std::mt19937_64& r) {
            Tensor x0 = uniform({2, 3}, r, -1, 1);
            Tensor w = s.weights_for(x0.shape);
            Var x = input_var(x0);
            Var y = reduce_sum(mul(square(x), constant(w)));
            backward(y, Tensor::scalar(1.0));
            Tensor analytic = x->grad;
            for (auto& v : analytic.data) v *= 1.5;  // deliberately wrong
            auto f = [&](const Tensor& t) {
                return reduce_sum(mul(square(input_var(t)), constant(w)))->value[0];
            };
            return grad_rel_error(analytic, finite_diff_grad(f, x0));
        }, 1);
    }

    return s.result;
}

}  // namespace dagan
