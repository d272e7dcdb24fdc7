#include "dagan/graph.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace dagan {

namespace {

void ensure_grad(Node& n) {
    if (!n.has_grad) {
        n.grad = Tensor::zeros(n.value.shape);
        n.has_grad = true;
    }
}

bool wants_grad(const Node& n) { return n.requires_grad; }

Var make(std::string op, std::vector<Var> inputs, std::function<void(Node&)> compute,
         std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->op = std::move(op);
    n->inputs = std::move(inputs);
    n->compute = std::move(compute);
    n->backprop = std::move(backprop);
    bool ready = true;
    for (auto& in : n->inputs) {
        n->requires_grad = n->requires_grad || in->requires_grad;
        ready = ready && in->has_value;
    }
    if (ready) {
        n->compute(*n);
        n->has_value = true;
    }
    return n;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw Error(ErrorKind::Invalid, std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                            " vs " + shape_str(b.shape));
}

template <typename F, typename D>
Var unary(const char* op, Var a, F f, D dfdx_times_g) {
    // dfdx_times_g(x, y) returns d f / d x given input x and output y (chain factor).
    return make(
        op, {std::move(a)},
        [f](Node& n) {
            const Tensor& x = n.inputs[0]->value;
            n.value = Tensor::zeros(x.shape);
            for (long i = 0; i < x.size(); ++i) n.value[i] = f(x[i]);
        },
        [dfdx_times_g](Node& n) {
            Node& in = *n.inputs[0];
            if (!wants_grad(in)) return;
            ensure_grad(in);
            for (long i = 0; i < n.value.size(); ++i)
                in.grad[i] += n.grad[i] * dfdx_times_g(in.value[i], n.value[i]);
        });
}


// Patch matrix layout: col[(c*K+p)*K+q, oi*Wo+oj] = src[c, oi*stride+p-pad,
// oj*stride+q-pad], zero outside the image. Convolutions become plain matrix
// products over this layout, which keeps the hot loops contiguous.
void im2col(const double* src, int C, int H, int W, int K, int stride, int pad, int Ho, int Wo,
            double* col) {
    for (int c = 0; c < C; ++c)
        for (int p = 0; p < K; ++p)
            for (int q = 0; q < K; ++q) {
                double* dst = &col[(((long)c * K + p) * K + q) * Ho * Wo];
                for (int oi = 0; oi < Ho; ++oi) {
                    int y = oi * stride + p - pad;
                    double* drow = &dst[(long)oi * Wo];
                    if (y < 0 || y >= H) {
                        for (int oj = 0; oj < Wo; ++oj) drow[oj] = 0.0;
                        continue;
                    }
                    const double* srow = &src[((long)c * H + y) * W];
                    for (int oj = 0; oj < Wo; ++oj) {
                        int xx = oj * stride + q - pad;
                        drow[oj] = (xx < 0 || xx >= W) ? 0.0 : srow[xx];
                    }
                }
            }
}

void col2im_add(const double* col, int C, int H, int W, int K, int stride, int pad, int Ho, int Wo,
                double* dst) {
    for (int c = 0; c < C; ++c)
        for (int p = 0; p < K; ++p)
            for (int q = 0; q < K; ++q) {
                const double* src = &col[(((long)c * K + p) * K + q) * Ho * Wo];
                for (int oi = 0; oi < Ho; ++oi) {
                    int y = oi * stride + p - pad;
                    if (y < 0 || y >= H) continue;
                    const double* srow = &src[(long)oi * Wo];
                    double* drow = &dst[((long)c * H + y) * W];
                    for (int oj = 0; oj < Wo; ++oj) {
                        int xx = oj * stride + q - pad;
                        if (xx >= 0 && xx < W) drow[xx] += srow[oj];
                    }
                }
            }
}

// C[M,N] += A[M,Kd] * B[Kd,N]
void mm_acc(const double* A, const double* B, double* C, int M, int Kd, int N) {
    for (int i = 0; i < M; ++i) {
        const double* a = &A[(long)i * Kd];
        double* c = &C[(long)i * N];
        for (int k = 0; k < Kd; ++k) {
            double av = a[k];
            const double* b = &B[(long)k * N];
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

// C[M,N] += A^T * B with A stored [Kd,M]. The output row stays hot across
// the k loop, so C is streamed once even when it is the largest operand.
void mm_at_b(const double* A, const double* B, double* C, int M, int Kd, int N) {
    for (int m = 0; m < M; ++m) {
        double* c = &C[(long)m * N];
        for (int k = 0; k < Kd; ++k) {
            double av = A[(long)k * M + m];
            const double* br = &B[(long)k * N];
            for (int j = 0; j < N; ++j) c[j] += av * br[j];
        }
    }
}

// C[M,N] += A * B^T with B stored [N,Kd]. n outer so each B row is read
// exactly once even when B is the largest operand. The dot product keeps
// eight independent partial sums; a single accumulator would serialize on
// the add latency since strict FP forbids reassociation.
void mm_a_bt(const double* A, const double* B, double* C, int M, int Kd, int N) {
    for (int n = 0; n < N; ++n) {
        const double* b = &B[(long)n * Kd];
        for (int m = 0; m < M; ++m) {
            const double* a = &A[(long)m * Kd];
            double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
            int k = 0;
            for (; k + 8 <= Kd; k += 8) {
                s0 += a[k] * b[k];
                s1 += a[k + 1] * b[k + 1];
                s2 += a[k + 2] * b[k + 2];
                s3 += a[k + 3] * b[k + 3];
                s4 += a[k + 4] * b[k + 4];
                s5 += a[k + 5] * b[k + 5];
                s6 += a[k + 6] * b[k + 6];
                s7 += a[k + 7] * b[k + 7];
            }
            double acc = ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
            for (; k < Kd; ++k) acc += a[k] * b[k];
            C[(long)m * N + n] += acc;
        }
    }
}

// Regroup [N][R][P] as [R][N*P] so a whole batch becomes one matrix product;
// the per-sample products are too small to keep the multiply kernels busy.
void rows_across_batch(const double* src, int N, int R, long P, double* dst) {
    for (int bn = 0; bn < N; ++bn)
        for (int r = 0; r < R; ++r) {
            const double* s = src + ((long)bn * R + r) * P;
            std::copy(s, s + P, dst + (long)r * N * P + (long)bn * P);
        }
}

}  // namespace

Var constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->op = "const";
    n->value = std::move(t);
    n->has_value = true;
    return n;
}

Var input_var(Tensor t) {
    auto n = constant(std::move(t));
    n->op = "input";
    n->requires_grad = true;
    return n;
}

Var leaf(Parameter& p) {
    auto n = std::make_shared<Node>();
    n->op = "param";
    n->value = p.value;
    n->has_value = true;
    n->requires_grad = p.trainable;
    n->param = &p;
    return n;
}

Var leaf_frozen(Parameter& p) {
    auto n = leaf(p);
    n->requires_grad = false;
    n->param = nullptr;
    return n;
}

Var placeholder(const std::string& name) {
    auto n = std::make_shared<Node>();
    n->op = "placeholder";
    n->placeholder_name = name;
    return n;
}

Var add(Var a, Var b) {
    return make(
        "add", {std::move(a), std::move(b)},
        [](Node& n) {
            const Tensor &x = n.inputs[0]->value, &y = n.inputs[1]->value;
            check_same_shape("add", x, y);
            n.value = Tensor::zeros(x.shape);
            for (long i = 0; i < x.size(); ++i) n.value[i] = x[i] + y[i];
        },
        [](Node& n) {
            for (int k = 0; k < 2; ++k) {
                Node& in = *n.inputs[k];
                if (!wants_grad(in)) continue;
                ensure_grad(in);
                for (long i = 0; i < n.grad.size(); ++i) in.grad[i] += n.grad[i];
            }
        });
}

Var sub(Var a, Var b) {
    return make(
        "sub", {std::move(a), std::move(b)},
        [](Node& n) {
            const Tensor &x = n.inputs[0]->value, &y = n.inputs[1]->value;
            check_same_shape("sub", x, y);
            n.value = Tensor::zeros(x.shape);
            for (long i = 0; i < x.size(); ++i) n.value[i] = x[i] - y[i];
        },
        [](Node& n) {
            Node& ia = *n.inputs[0];
            Node& ib = *n.inputs[1];
            if (wants_grad(ia)) {
                ensure_grad(ia);
                for (long i = 0; i < n.grad.size(); ++i) ia.grad[i] += n.grad[i];
            }
            if (wants_grad(ib)) {
                ensure_grad(ib);
                for (long i = 0; i < n.grad.size(); ++i) ib.grad[i] -= n.grad[i];
            }
        });
}

Var mul(Var a, Var b) {
    return make(
        "mul", {std::move(a), std::move(b)},
        [](Node& n) {
            const Tensor &x = n.inputs[0]->value, &y = n.inputs[1]->value;
            check_same_shape("mul", x, y);
            n.value = Tensor::zeros(x.shape);
            for (long i = 0; i < x.size(); ++i) n.value[i] = x[i] * y[i];
        },
        [](Node& n) {
            Node& ia = *n.inputs[0];
            Node& ib = *n.inputs[1];
            if (wants_grad(ia)) {
                ensure_grad(ia);
                for (long i = 0; i < n.grad.size(); ++i) ia.grad[i] += n.grad[i] * ib.value[i];
            }
            if (wants_grad(ib)) {
                ensure_grad(ib);
                for (long i = 0; i < n.grad.size(); ++i) ib.grad[i] += n.grad[i] * ia.value[i];
            }
        });
}

Var scalar_mul(Var a, double s) {
    return make(
        "scalar_mul", {std::move(a)},
        [s](Node& n) {
            const Tensor& x = n.inputs[0]->value;
            n.value = Tensor::zeros(x.shape);
            for (long i = 0; i < x.size(); ++i) n.value[i] = s * x[i];
        },
        [s](Node& n) {
            Node& in = *n.inputs[0];
            if (!wants_grad(in)) return;
            ensure_grad(in);
            for (long i = 0; i < n.grad.size(); ++i) in.grad[i] += s * n.grad[i];
        });
}

Var mul_param_scalar(Var a, Var mu) {
    return make(
        "mul_param_scalar", {std::move(a), std::move(mu)},
        [](Node& n) {
            const Tensor& x = n.inputs[0]->value;
            const Tensor& m = n.inputs[1]->value;
            if (m.size() != 1)
                throw Error(ErrorKind::Invalid, "mul_param_scalar: scalar operand must have shape [1], got " +
                                                    shape_str(m.shape));
            n.value = Tensor::zeros(x.shape);
            for (long i = 0; i < x.size(); ++i) n.value[i] = m[0] * x[i];
        },
        [](Node& n) {
            Node& ia = *n.inputs[0];
            Node& im = *n.inputs[1];
            if (wants_grad(ia)) {
                ensure_grad(ia);
                double m = im.value[0];
                for (long i = 0; i < n.grad.size(); ++i) ia.grad[i] += m * n.grad[i];
            }
            if (wants_grad(im)) {
                ensure_grad(im);
                double acc = 0.0;
                for (long i = 0; i < n.grad.size(); ++i) acc += n.grad[i] * ia.value[i];
                im.grad[0] += acc;
            }
        });
}

Var relu(Var a) {
    return unary("relu", std::move(a), [](double x) { return x > 0 ? x : 0.0; },
                 [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double slope) {
    return unary("leaky_relu", std::move(a),
                 [slope](double x) { return x > 0 ? x : slope * x; },
                 [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var sigmoid(Var a) {
    return unary("sigmoid", std::move(a),
                 [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                 [](double, double y) { return y * (1.0 - y); });
}

Var tanh_op(Var a) {
    return unary("tanh", std::move(a), [](double x) { return std::tanh(x); },
                 [](double, double y) { return 1.0 - y * y; });
}

Var abs_op(Var a) {
    return unary("abs", std::move(a), [](double x) { return std::fabs(x); },
                 [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var square(Var a) {
    return unary("square", std::move(a), [](double x) { return x * x; },
                 [](double x, double) { return 2.0 * x; });
}

Var log_op(Var a) {
    return unary("log", std::move(a), [](double x) { return std::log(x); },
                 [](double x, double) { return 1.0 / x; });
}

Var clamp(Var a, double lo, double hi) {
    return unary("clamp", std::move(a),
                 [lo, hi](double x) { return std::min(hi, std::max(lo, x)); },
                 [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var matmul(Var a, Var b) {
    return make(
        "matmul", {std::move(a), std::move(b)},
        [](Node& n) {
            const Tensor &x = n.inputs[0]->value, &y = n.inputs[1]->value;
            if (x.rank() != 2 || y.rank() != 2 || x.dim(1) != y.dim(0))
                throw Error(ErrorKind::Invalid, "matmul: incompatible shapes " + shape_str(x.shape) +
                                                    " x " + shape_str(y.shape));
            int M = x.dim(0), K = x.dim(1), N = y.dim(1);
            n.value = Tensor::zeros({M, N});
            for (int i = 0; i < M; ++i)
                for (int k = 0; k < K; ++k) {
                    double xv = x[(long)i * K + k];
                    const double* yr = &y.data[(long)k * N];
                    double* out = &n.value.data[(long)i * N];
                    for (int j = 0; j < N; ++j) out[j] += xv * yr[j];
                }
        },
        [](Node& n) {
            Node& ia = *n.inputs[0];
            Node& ib = *n.inputs[1];
            int M = ia.value.dim(0), K = ia.value.dim(1), N = ib.value.dim(1);
            if (wants_grad(ia)) {
                ensure_grad(ia);
                // ga = g . b^T
                for (int i = 0; i < M; ++i)
                    for (int k = 0; k < K; ++k) {
                        const double* gr = &n.grad.data[(long)i * N];
                        const double* br = &ib.value.data[(long)k * N];
                        double acc = 0.0;
                        for (int j = 0; j < N; ++j) acc += gr[j] * br[j];
                        ia.grad[(long)i * K + k] += acc;
                    }
            }
            if (wants_grad(ib)) {
                ensure_grad(ib);
                // gb = a^T . g
                for (int i = 0; i < M; ++i)
                    for (int k = 0; k < K; ++k) {
                        double av = ia.value[(long)i * K + k];
                        const double* gr = &n.grad.data[(long)i * N];
                        double* gb = &ib.grad.data[(long)k * N];
                        for (int j = 0; j < N; ++j) gb[j] += av * gr[j];
                    }
            }
        });
}

Var transpose2(Var a) {
    return make(
        "transpose", {std::move(a)},
        [](Node& n) {
            const Tensor& x = n.inputs[0]->value;
            if (x.rank() != 2)
                throw Error(ErrorKind::Invalid, "transpose: expects rank-2, got " + shape_str(x.shape));
            int M = x.dim(0), N = x.dim(1);
            n.value = Tensor::zeros({N, M});
            for (int i = 0; i < M; ++i)
                for (int j = 0; j < N; ++j) n.value[(long)j * M + i] = x[(long)i * N + j];
        },
        [](Node& n) {
            Node& in = *n.inputs[0];
            if (!wants_grad(in)) return;
            ensure_grad(in);
            int N = n.value.dim(0), M = n.value.dim(1);
            for (int j = 0; j < N; ++j)
                for (int i = 0; i < M; ++i) in.grad[(long)i * N + j] += n.grad[(long)j * M + i];
        });
}

Var batched_matmul(Var a, Var b) {
    return make(
        "batched_matmul", {std::move(a), std::move(b)},
        [](Node& n) {
            const Tensor &x = n.inputs[0]->value, &y = n.inputs[1]->value;
            if (x.rank() != 3 || y.rank() != 3 || x.dim(0) != y.dim(0) || x.dim(2) != y.dim(1))
                throw Error(ErrorKind::Invalid, "batched_matmul: incompatible shapes " +
                                                    shape_str(x.shape) + " x " + shape_str(y.shape));
            int B = x.dim(0), M = x.dim(1), K = x.dim(2), N = y.dim(2);
            n.value = Tensor::zeros({B, M, N});
            for (int bt = 0; bt < B; ++bt) {
                const double* xb = &x.data[(long)bt * M * K];
                const double* yb = &y.data[(long)bt * K * N];
                double* ob = &n.value.data[(long)bt * M * N];
                for (int i = 0; i < M; ++i)
                    for (int k = 0; k < K; ++k) {
                        double xv = xb[(long)i * K + k];
                        const double* yr = &yb[(long)k * N];
                        double* out = &ob[(long)i * N];
                        for (int j = 0; j < N; ++j) out[j] += xv * yr[j];
                    }
            }
        },
        [](Node& n) {
            Node& ia = *n.inputs[0];
            Node& ib = *n.inputs[1];
            int B = ia.value.dim(0), M = ia.value.dim(1), K = ia.value.dim(2), N = ib.value.dim(2);
            if (wants_grad(ia)) {
                ensure_grad(ia);
                for (int bt = 0; bt < B; ++bt) {
                    const double* gb = &n.grad.data[(long)bt * M * N];
                    const double* yb = &ib.value.data[(long)bt * K * N];
                    double* gab = &ia.grad.data[(long)bt * M * K];
                    for (int i = 0; i < M; ++i)
                        for (int k = 0; k < K; ++k) {
                            const double* gr = &gb[(long)i * N];
                            const double* yr = &yb[(long)k * N];
                            double acc = 0.0;
                            for (int j = 0; j < N; ++j) acc += gr[j] * yr[j];
                            gab[(long)i * K + k] += acc;
                        }
                }
            }
            if (wants_grad(ib)) {
                ensure_grad(ib);
                // k outer keeps the updated row resident when K >> M.
                for (int bt = 0; bt < B; ++bt) {
                    const double* gb = &n.grad.data[(long)bt * M * N];
                    const double* xb = &ia.value.data[(long)bt * M * K];
                    double* gbb = &ib.grad.data[(long)bt * K * N];
                    for (int k = 0; k < K; ++k) {
                        double* go = &gbb[(long)k * N];
                        for (int i = 0; i < M; ++i) {
                            double av = xb[(long)i * K + k];
                            const double* gr = &gb[(long)i * N];
                            for (int j = 0; j < N; ++j) go[j] += av * gr[j];
                        }
                    }
                }
            }
        });
}

Var batched_matmul_bt(Var a, Var b) {
    return make(
        "batched_matmul_bt", {std::move(a), std::move(b)},
        [](Node& n) {
            const Tensor &x = n.inputs[0]->value, &y = n.inputs[1]->value;
            if (x.rank() != 3 || y.rank() != 3 || x.dim(0) != y.dim(0) || x.dim(2) != y.dim(2))
                throw Error(ErrorKind::Invalid, "batched_matmul_bt: incompatible shapes " +
                                                    shape_str(x.shape) + " x " + shape_str(y.shape) +
                                                    "^T");
            int B = x.dim(0), M = x.dim(1), K = x.dim(2), N = y.dim(1);
            n.value = Tensor::zeros({B, M, N});
            for (int bt = 0; bt < B; ++bt)
                mm_a_bt(&x.data[(long)bt * M * K], &y.data[(long)bt * N * K],
                        &n.value.data[(long)bt * M * N], M, K, N);
        },
        [](Node& n) {
            Node& ia = *n.inputs[0];
            Node& ib = *n.inputs[1];
            int B = ia.value.dim(0), M = ia.value.dim(1), K = ia.value.dim(2),
                N = ib.value.dim(1);
            if (wants_grad(ia)) {
                ensure_grad(ia);
                // gA = g * B
                for (int bt = 0; bt < B; ++bt)
                    mm_acc(&n.grad.data[(long)bt * M * N], &ib.value.data[(long)bt * N * K],
                           &ia.grad.data[(long)bt * M * K], M, N, K);
            }
            if (wants_grad(ib)) {
                ensure_grad(ib);
                // gB = g^T * A
                for (int bt = 0; bt < B; ++bt)
                    mm_at_b(&n.grad.data[(long)bt * M * N], &ia.value.data[(long)bt * M * K],
                            &ib.grad.data[(long)bt * N * K], N, M, K);
            }
        });
}

Var batched_transpose(Var a) {
    return make(
        "batched_transpose", {std::move(a)},
        [](Node& n) {
            const Tensor& x = n.inputs[0]->value;
            if (x.rank() != 3)
                throw Error(ErrorKind::Invalid, "batched_transpose: expects rank-3, got " + shape_str(x.shape));
            int B = x.dim(0), M = x.dim(1), N = x.dim(2);
            n.value = Tensor::zeros({B, N, M});
            // Tiled so both sides stay cache-resident on large maps.
            const int T = 48;
            for (int bt = 0; bt < B; ++bt) {
                const double* src = &x.data[(long)bt * M * N];
                double* dst = &n.value.data[(long)bt * M * N];
                for (int i0 = 0; i0 < M; i0 += T)
                    for (int j0 = 0; j0 < N; j0 += T)
                        for (int i = i0; i < std::min(M, i0 + T); ++i)
                            for (int j = j0; j < std::min(N, j0 + T); ++j)
                                dst[(long)j * M + i] = src[(long)i * N + j];
            }
        },
        [](Node& n) {
            Node& in = *n.inputs[0];
            if (!wants_grad(in)) return;
            ensure_grad(in);
            int B = n.value.dim(0), N = n.value.dim(1), M = n.value.dim(2);
            const int T = 48;
            for (int bt = 0; bt < B; ++bt) {
                const double* src = &n.grad.data[(long)bt * M * N];
                double* dst = &in.grad.data[(long)bt * M * N];
                for (int i0 = 0; i0 < M; i0 += T)
                    for (int j0 = 0; j0 < N; j0 += T)
                        for (int i = i0; i < std::min(M, i0 + T); ++i)
                            for (int j = j0; j < std::min(N, j0 + T); ++j)
                                dst[(long)i * N + j] += src[(long)j * M + i];
            }
        });
}

Var reshape(Var a, const Shape& s) {
    return make(
        "reshape", {std::move(a)},
        [s](Node& n) {
            const Tensor& x = n.inputs[0]->value;
            if (numel(s) != x.size())
                throw Error(ErrorKind::Invalid, "reshape: cannot view " + shape_str(x.shape) + " as " +
                                                    shape_str(s));
            n.value = Tensor(s, x.data);
        },
        [](Node& n) {
            Node& in = *n.inputs[0];
            if (!wants_grad(in)) return;
            ensure_grad(in);
            for (long i = 0; i < n.grad.size(); ++i) in.grad[i] += n.grad[i];
        });
}

Var softmax_axis(Var a, int axis) {
    return make(
        "softmax", {std::move(a)},
        [axis](Node& n) {
            const Tensor& x = n.inputs[0]->value;
            if (axis < 0 || axis >= x.rank())
                throw Error(ErrorKind::Invalid, "softmax: axis out of range for " + shape_str(x.shape));
            long outer = 1, inner = 1;
            int K = x.dim(axis);
            for (int i = 0; i < axis; ++i) outer *= x.dim(i);
            for (int i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
            n.value = Tensor::zeros(x.shape);
            for (long o = 0; o < outer; ++o)
                for (long in = 0; in < inner; ++in) {
                    long base = o * K * inner + in;
                    double mx = -1e300;
                    for (int k = 0; k < K; ++k) mx = std::max(mx, x[base + (long)k * inner]);
                    double z = 0.0;
                    for (int k = 0; k < K; ++k) z += std::exp(x[base + (long)k * inner] - mx);
                    for (int k = 0; k < K; ++k)
                        n.value[base + (long)k * inner] = std::exp(x[base + (long)k * inner] - mx) / z;
                }
        },
        [axis](Node& n) {
            Node& in = *n.inputs[0];
            if (!wants_grad(in)) return;
            ensure_grad(in);
            const Tensor& y = n.value;
            long outer = 1, inner = 1;
            int K = y.dim(axis);
            for (int i = 0; i < axis; ++i) outer *= y.dim(i);
            for (int i = axis + 1; i < y.rank(); ++i) inner *= y.dim(i);
            for (long o = 0; o < outer; ++o)
                for (long ii = 0; ii < inner; ++ii) {
                    long base = o * K * inner + ii;
                    double dot = 0.0;
                    for (int k = 0; k < K; ++k) dot += n.grad[base + (long)k * inner] * y[base + (long)k * inner];
                    for (int k = 0; k < K; ++k)
                        in.grad[base + (long)k * inner] +=
                            y[base + (long)k * inner] * (n.grad[base + (long)k * inner] - dot);
                }
        });
}

Var concat_channels(const std::vector<Var>& xs) {
    if (xs.empty()) throw Error(ErrorKind::Invalid, "concat: no inputs");
    return make(
        "concat", xs,
        [](Node& n) {
            int N = n.inputs[0]->value.dim(0), H = n.inputs[0]->value.dim(2), W = n.inputs[0]->value.dim(3);
            int Ctot = 0;
            for (auto& in : n.inputs) {
                const Tensor& t = in->value;
                if (t.rank() != 4 || t.dim(0) != N || t.dim(2) != H || t.dim(3) != W)
                    throw Error(ErrorKind::Invalid, "concat: incompatible input " + shape_str(t.shape));
                Ctot += t.dim(1);
            }
            n.value = Tensor::zeros({N, Ctot, H, W});
            long hw = (long)H * W;
            for (int b = 0; b < N; ++b) {
                long coff = 0;
                for (auto& in : n.inputs) {
                    const Tensor& t = in->value;
                    int C = t.dim(1);
                    std::copy(&t.data[(long)b * C * hw], &t.data[(long)(b + 1) * C * hw],
                              &n.value.data[((long)b * Ctot + coff) * hw]);
                    coff += C;
                }
            }
        },
        [](Node& n) {
            int N = n.value.dim(0), Ctot = n.value.dim(1), H = n.value.dim(2), W = n.value.dim(3);
            long hw = (long)H * W;
            long coff = 0;
            for (auto& inp : n.inputs) {
                Node& in = *inp;
                int C = in.value.dim(1);
                if (wants_grad(in)) {
                    ensure_grad(in);
                    for (int b = 0; b < N; ++b)
                        for (long i = 0; i < (long)C * hw; ++i)
                            in.grad[(long)b * C * hw + i] += n.grad[((long)b * Ctot + coff) * hw + i];
                }
                coff += C;
            }
            (void)H;
            (void)W;
        });
}

Var linear(Var x, Var w, Var b) {
    return make(
        "linear", {std::move(x), std::move(w), std::move(b)},
        [](Node& n) {
            const Tensor &xv = n.inputs[0]->value, &wv = n.inputs[1]->value, &bv = n.inputs[2]->value;
            if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(0) || bv.size() != wv.dim(1))
                throw Error(ErrorKind::Invalid, "linear: incompatible shapes " + shape_str(xv.shape) +
                                                    " x " + shape_str(wv.shape) + " + " + shape_str(bv.shape));
            int N = xv.dim(0), F = xv.dim(1), O = wv.dim(1);
            n.value = Tensor::zeros({N, O});
            for (int i = 0; i < N; ++i) {
                double* out = &n.value.data[(long)i * O];
                for (int o = 0; o < O; ++o) out[o] = bv[o];
                for (int f = 0; f < F; ++f) {
                    double xvf = xv[(long)i * F + f];
                    const double* wr = &wv.data[(long)f * O];
                    for (int o = 0; o < O; ++o) out[o] += xvf * wr[o];
                }
            }
        },
        [](Node& n) {
            Node& ix = *n.inputs[0];
            Node& iw = *n.inputs[1];
            Node& ib = *n.inputs[2];
            int N = ix.value.dim(0), F = ix.value.dim(1), O = iw.value.dim(1);
            if (wants_grad(ix)) {
                ensure_grad(ix);
                for (int i = 0; i < N; ++i)
                    for (int f = 0; f < F; ++f) {
                        const double* gr = &n.grad.data[(long)i * O];
                        const double* wr = &iw.value.data[(long)f * O];
                        double acc = 0.0;
                        for (int o = 0; o < O; ++o) acc += gr[o] * wr[o];
                        ix.grad[(long)i * F + f] += acc;
                    }
            }
            if (wants_grad(iw)) {
                ensure_grad(iw);
                for (int i = 0; i < N; ++i)
                    for (int f = 0; f < F; ++f) {
                        double xvf = ix.value[(long)i * F + f];
                        const double* gr = &n.grad.data[(long)i * O];
                        double* gw = &iw.grad.data[(long)f * O];
                        for (int o = 0; o < O; ++o) gw[o] += xvf * gr[o];
                    }
            }
            if (wants_grad(ib)) {
                ensure_grad(ib);
                for (int i = 0; i < N; ++i)
                    for (int o = 0; o < O; ++o) ib.grad[o] += n.grad[(long)i * O + o];
            }
        });
}

Var reduce_sum(Var a) {
    return make(
        "reduce_sum", {std::move(a)},
        [](Node& n) {
            double s = 0.0;
            for (double v : n.inputs[0]->value.data) s += v;
            n.value = Tensor::scalar(s);
        },
        [](Node& n) {
            Node& in = *n.inputs[0];
            if (!wants_grad(in)) return;
            ensure_grad(in);
            for (long i = 0; i < in.grad.size(); ++i) in.grad[i] += n.grad[0];
        });
}

Var reduce_mean(Var a) {
    return make(
        "reduce_mean", {std::move(a)},
        [](Node& n) {
            double s = 0.0;
            for (double v : n.inputs[0]->value.data) s += v;
            n.value = Tensor::scalar(s / (double)n.inputs[0]->value.size());
        },
        [](Node& n) {
            Node& in = *n.inputs[0];
            if (!wants_grad(in)) return;
            ensure_grad(in);
            double g = n.grad[0] / (double)in.value.size();
            for (long i = 0; i < in.grad.size(); ++i) in.grad[i] += g;
        });
}

Var conv2d(Var x, Var w, Var b, int stride, int pad) {
    return make(
        "conv2d", {std::move(x), std::move(w), std::move(b)},
        [stride, pad](Node& n) {
            const Tensor &xv = n.inputs[0]->value, &wv = n.inputs[1]->value, &bv = n.inputs[2]->value;
            if (xv.rank() != 4 || wv.rank() != 4 || xv.dim(1) != wv.dim(1) || bv.size() != wv.dim(0))
                throw Error(ErrorKind::Invalid, "conv2d: incompatible shapes " + shape_str(xv.shape) +
                                                    " * " + shape_str(wv.shape));
            int N = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
            int O = wv.dim(0), K = wv.dim(2);
            int Ho = (H + 2 * pad - K) / stride + 1, Wo = (W + 2 * pad - K) / stride + 1;
            if (Ho <= 0 || Wo <= 0)
                throw Error(ErrorKind::Invalid, "conv2d: empty output for input " + shape_str(xv.shape));
            n.value = Tensor::zeros({N, O, Ho, Wo});
            long P = (long)Ho * Wo, CKK = (long)Ci * K * K, NP = (long)N * P;
            std::vector<double> col(CKK * P), col_all(CKK * NP), out_all(O * NP, 0.0);
            for (int bn = 0; bn < N; ++bn) {
                im2col(&xv.data[(long)bn * Ci * H * W], Ci, H, W, K, stride, pad, Ho, Wo,
                       col.data());
                for (long r = 0; r < CKK; ++r)
                    std::copy(&col[r * P], &col[r * P + P], &col_all[r * NP + (long)bn * P]);
            }
            mm_acc(wv.data.data(), col_all.data(), out_all.data(), O, (int)CKK, (int)NP);
            for (int bn = 0; bn < N; ++bn)
                for (int o = 0; o < O; ++o) {
                    const double* src = &out_all[(long)o * NP + (long)bn * P];
                    double* out = &n.value.data[((long)bn * O + o) * P];
                    for (long i = 0; i < P; ++i) out[i] = src[i] + bv[o];
                }
        },
        [stride, pad](Node& n) {
            Node& ix = *n.inputs[0];
            Node& iw = *n.inputs[1];
            Node& ib = *n.inputs[2];
            const Tensor &xv = ix.value, &wv = iw.value;
            int N = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
            int O = wv.dim(0), K = wv.dim(2);
            int Ho = n.value.dim(2), Wo = n.value.dim(3);
            bool gx = wants_grad(ix), gw = wants_grad(iw), gb = wants_grad(ib);
            if (gx) ensure_grad(ix);
            if (gw) ensure_grad(iw);
            if (gb) ensure_grad(ib);
            long P = (long)Ho * Wo, CKK = (long)Ci * K * K, NP = (long)N * P;
            if (gb)
                for (int bn = 0; bn < N; ++bn) {
                    const double* gout = &n.grad.data[(long)bn * O * P];
                    for (int o = 0; o < O; ++o)
                        for (long i = 0; i < P; ++i) ib.grad[o] += gout[o * P + i];
                }
            if (!gx && !gw) return;
            std::vector<double> gout_all(O * NP);
            rows_across_batch(n.grad.data.data(), N, O, P, gout_all.data());
            if (gw) {
                std::vector<double> col(CKK * P), col_all(CKK * NP);
                for (int bn = 0; bn < N; ++bn) {
                    im2col(&xv.data[(long)bn * Ci * H * W], Ci, H, W, K, stride, pad, Ho, Wo,
                           col.data());
                    for (long r = 0; r < CKK; ++r)
                        std::copy(&col[r * P], &col[r * P + P], &col_all[r * NP + (long)bn * P]);
                }
                mm_a_bt(gout_all.data(), col_all.data(), iw.grad.data.data(), O, (int)NP,
                        (int)CKK);
            }
            if (gx) {
                std::vector<double> gcol_all(CKK * NP, 0.0), gcol(CKK * P);
                mm_at_b(wv.data.data(), gout_all.data(), gcol_all.data(), (int)CKK, O, (int)NP);
                for (int bn = 0; bn < N; ++bn) {
                    for (long r = 0; r < CKK; ++r)
                        std::copy(&gcol_all[r * NP + (long)bn * P], &gcol_all[r * NP + (long)bn * P + P],
                                  &gcol[r * P]);
                    col2im_add(gcol.data(), Ci, H, W, K, stride, pad, Ho, Wo,
                               &ix.grad.data[(long)bn * Ci * H * W]);
                }
            }
        });
}

Var conv_transpose2d(Var x, Var w, Var b, int stride, int pad) {
    return make(
        "conv_transpose2d", {std::move(x), std::move(w), std::move(b)},
        [stride, pad](Node& n) {
            const Tensor &xv = n.inputs[0]->value, &wv = n.inputs[1]->value, &bv = n.inputs[2]->value;
            if (xv.rank() != 4 || wv.rank() != 4 || xv.dim(1) != wv.dim(0) || bv.size() != wv.dim(1))
                throw Error(ErrorKind::Invalid, "conv_transpose2d: incompatible shapes " +
                                                    shape_str(xv.shape) + " * " + shape_str(wv.shape));
            int N = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
            int O = wv.dim(1), K = wv.dim(2);
            int Ho = (H - 1) * stride - 2 * pad + K, Wo = (W - 1) * stride - 2 * pad + K;
            if (Ho <= 0 || Wo <= 0)
                throw Error(ErrorKind::Invalid, "conv_transpose2d: empty output for input " + shape_str(xv.shape));
            n.value = Tensor::zeros({N, O, Ho, Wo});
            long P = (long)H * W, OKK = (long)O * K * K, NP = (long)N * P;
            std::vector<double> x_all(Ci * NP), col_all(OKK * NP, 0.0), col(OKK * P);
            rows_across_batch(xv.data.data(), N, Ci, P, x_all.data());
            mm_at_b(wv.data.data(), x_all.data(), col_all.data(), (int)OKK, Ci, (int)NP);
            for (int bn = 0; bn < N; ++bn) {
                for (long r = 0; r < OKK; ++r)
                    std::copy(&col_all[r * NP + (long)bn * P], &col_all[r * NP + (long)bn * P + P],
                              &col[r * P]);
                double* out = &n.value.data[(long)bn * O * Ho * Wo];
                for (int o = 0; o < O; ++o)
                    for (long i = 0; i < (long)Ho * Wo; ++i) out[o * (long)Ho * Wo + i] = bv[o];
                col2im_add(col.data(), O, Ho, Wo, K, stride, pad, H, W, out);
            }
        },
        [stride, pad](Node& n) {
            Node& ix = *n.inputs[0];
            Node& iw = *n.inputs[1];
            Node& ib = *n.inputs[2];
            const Tensor &xv = ix.value, &wv = iw.value;
            int N = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
            int O = wv.dim(1), K = wv.dim(2);
            int Ho = n.value.dim(2), Wo = n.value.dim(3);
            bool gx = wants_grad(ix), gw = wants_grad(iw), gb = wants_grad(ib);
            if (gx) ensure_grad(ix);
            if (gw) ensure_grad(iw);
            if (gb) ensure_grad(ib);
            long P = (long)H * W, OKK = (long)O * K * K, NP = (long)N * P;
            if (gb)
                for (int bn = 0; bn < N; ++bn) {
                    const double* gout = &n.grad.data[(long)bn * O * Ho * Wo];
                    for (int o = 0; o < O; ++o)
                        for (long i = 0; i < (long)Ho * Wo; ++i)
                            ib.grad[o] += gout[o * (long)Ho * Wo + i];
                }
            if (!gx && !gw) return;
            // gcol[(o*K+p)*K+q, i*W+j] = gout[o, i*stride+p-pad, j*stride+q-pad]
            std::vector<double> gcol(OKK * P), gcol_all(OKK * NP);
            for (int bn = 0; bn < N; ++bn) {
                im2col(&n.grad.data[(long)bn * O * Ho * Wo], O, Ho, Wo, K, stride, pad, H, W,
                       gcol.data());
                for (long r = 0; r < OKK; ++r)
                    std::copy(&gcol[r * P], &gcol[r * P + P], &gcol_all[r * NP + (long)bn * P]);
            }
            if (gx) {
                std::vector<double> gx_all(Ci * NP, 0.0);
                mm_acc(wv.data.data(), gcol_all.data(), gx_all.data(), Ci, (int)OKK, (int)NP);
                for (int bn = 0; bn < N; ++bn)
                    for (int c = 0; c < Ci; ++c) {
                        const double* src = &gx_all[(long)c * NP + (long)bn * P];
                        double* dst = &ix.grad.data[((long)bn * Ci + c) * P];
                        for (long i = 0; i < P; ++i) dst[i] += src[i];
                    }
            }
            if (gw) {
                std::vector<double> x_all(Ci * NP);
                rows_across_batch(xv.data.data(), N, Ci, P, x_all.data());
                mm_a_bt(x_all.data(), gcol_all.data(), iw.grad.data.data(), Ci, (int)NP,
                        (int)OKK);
            }
        });
}

Var instance_norm(Var x, Var gamma, Var beta, double eps) {
    return make(
        "instance_norm", {std::move(x), std::move(gamma), std::move(beta)},
        [eps](Node& n) {
            const Tensor &xv = n.inputs[0]->value, &gv = n.inputs[1]->value, &bv = n.inputs[2]->value;
            if (xv.rank() != 4 || gv.size() != xv.dim(1) || bv.size() != xv.dim(1))
                throw Error(ErrorKind::Invalid, "instance_norm: incompatible shapes " + shape_str(xv.shape));
            int N = xv.dim(0), C = xv.dim(1);
            long hw = (long)xv.dim(2) * xv.dim(3);
            n.value = Tensor::zeros(xv.shape);
            for (int bn = 0; bn < N; ++bn)
                for (int c = 0; c < C; ++c) {
                    const double* src = &xv.data[((long)bn * C + c) * hw];
                    double* dst = &n.value.data[((long)bn * C + c) * hw];
                    double mean = 0.0;
                    for (long i = 0; i < hw; ++i) mean += src[i];
                    mean /= (double)hw;
                    double var = 0.0;
                    for (long i = 0; i < hw; ++i) var += (src[i] - mean) * (src[i] - mean);
                    var /= (double)hw;
                    double inv = 1.0 / std::sqrt(var + eps);
                    for (long i = 0; i < hw; ++i) dst[i] = gv[c] * (src[i] - mean) * inv + bv[c];
                }
        },
        [eps](Node& n) {
            Node& ix = *n.inputs[0];
            Node& ig = *n.inputs[1];
            Node& ib = *n.inputs[2];
            const Tensor& xv = ix.value;
            int N = xv.dim(0), C = xv.dim(1);
            long hw = (long)xv.dim(2) * xv.dim(3);
            bool gx = wants_grad(ix), gg = wants_grad(ig), gb = wants_grad(ib);
            if (gx) ensure_grad(ix);
            if (gg) ensure_grad(ig);
            if (gb) ensure_grad(ib);
            for (int bn = 0; bn < N; ++bn)
                for (int c = 0; c < C; ++c) {
                    const double* src = &xv.data[((long)bn * C + c) * hw];
                    const double* gout = &n.grad.data[((long)bn * C + c) * hw];
                    double mean = 0.0;
                    for (long i = 0; i < hw; ++i) mean += src[i];
                    mean /= (double)hw;
                    double var = 0.0;
                    for (long i = 0; i < hw; ++i) var += (src[i] - mean) * (src[i] - mean);
                    var /= (double)hw;
                    double inv = 1.0 / std::sqrt(var + eps);
                    double sum_g = 0.0, sum_gx = 0.0;
                    for (long i = 0; i < hw; ++i) {
                        double xh = (src[i] - mean) * inv;
                        sum_g += gout[i];
                        sum_gx += gout[i] * xh;
                    }
                    if (gb) ib.grad[c] += sum_g;
                    if (gg) ig.grad[c] += sum_gx;
                    if (gx) {
                        double* gsrc = &ix.grad.data[((long)bn * C + c) * hw];
                        double gam = ig.value[c];
                        for (long i = 0; i < hw; ++i) {
                            double xh = (src[i] - mean) * inv;
                            gsrc[i] += gam * inv *
                                       (gout[i] - sum_g / (double)hw - xh * sum_gx / (double)hw);
                        }
                    }
                }
        });
}

Var upsample_nearest2(Var x) {
    return make(
        "upsample_nearest2", {std::move(x)},
        [](Node& n) { n.value = upsample_nearest2_raw(n.inputs[0]->value); },
        [](Node& n) {
            Node& in = *n.inputs[0];
            if (!wants_grad(in)) return;
            ensure_grad(in);
            int N = in.value.dim(0), C = in.value.dim(1), H = in.value.dim(2), W = in.value.dim(3);
            for (int bn = 0; bn < N; ++bn)
                for (int c = 0; c < C; ++c) {
                    double* gsrc = &in.grad.data[((long)bn * C + c) * H * W];
                    const double* gout = &n.grad.data[((long)bn * C + c) * 4 * H * W];
                    for (int i = 0; i < 2 * H; ++i)
                        for (int j = 0; j < 2 * W; ++j)
                            gsrc[(long)(i / 2) * W + j / 2] += gout[(long)i * 2 * W + j];
                }
        });
}

Var tv_op(Var x) {
    return make(
        "tv", {std::move(x)},
        [](Node& n) {
            const Tensor& xv = n.inputs[0]->value;
            if (xv.rank() != 4)
                throw Error(ErrorKind::Invalid, "tv: expects [N,C,H,W], got " + shape_str(xv.shape));
            int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
            double total = 0.0;
            for (int bn = 0; bn < N; ++bn)
                for (int c = 0; c < C; ++c) {
                    const double* src = &xv.data[((long)bn * C + c) * H * W];
                    for (int i = 0; i < H; ++i)
                        for (int j = 0; j < W; ++j) {
                            if (j + 1 < W) total += std::fabs(src[(long)i * W + j + 1] - src[(long)i * W + j]);
                            if (i + 1 < H) total += std::fabs(src[(long)(i + 1) * W + j] - src[(long)i * W + j]);
                        }
                }
            n.value = Tensor::scalar(total / (double)N);
        },
        [](Node& n) {
            Node& in = *n.inputs[0];
            if (!wants_grad(in)) return;
            ensure_grad(in);
            const Tensor& xv = in.value;
            int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
            double g = n.grad[0] / (double)N;
            auto sgn = [](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); };
            for (int bn = 0; bn < N; ++bn)
                for (int c = 0; c < C; ++c) {
                    const double* src = &xv.data[((long)bn * C + c) * H * W];
                    double* gsrc = &in.grad.data[((long)bn * C + c) * H * W];
                    for (int i = 0; i < H; ++i)
                        for (int j = 0; j < W; ++j) {
                            if (j + 1 < W) {
                                double s = sgn(src[(long)i * W + j + 1] - src[(long)i * W + j]);
                                gsrc[(long)i * W + j + 1] += g * s;
                                gsrc[(long)i * W + j] -= g * s;
                            }
                            if (i + 1 < H) {
                                double s = sgn(src[(long)(i + 1) * W + j] - src[(long)i * W + j]);
                                gsrc[(long)(i + 1) * W + j] += g * s;
                                gsrc[(long)i * W + j] -= g * s;
                            }
                        }
                }
        });
}

std::vector<Node*> topo_order(const Var& root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->inputs.size()) {
            Node* next = node->inputs[idx++].get();
            if (seen.insert(next).second) stack.push_back({next, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

Tensor forward(const Var& root, const std::unordered_map<std::string, Tensor>& bindings) {
    auto order = topo_order(root);
    for (Node* n : order) {
        if (!n->placeholder_name.empty()) {
            auto it = bindings.find(n->placeholder_name);
            if (it == bindings.end()) {
                if (!n->has_value)
                    throw Error(ErrorKind::Invalid, "forward: unbound input '" + n->placeholder_name + "'");
            } else {
                n->value = it->second;
                n->has_value = true;
            }
        }
    }
    for (Node* n : order) {
        if (n->compute) {
            n->compute(*n);
            n->has_value = true;
        } else if (!n->has_value) {
            throw Error(ErrorKind::Invalid, "forward: unbound input '" + n->placeholder_name + "'");
        }
    }
    return root->value;
}

GradMap backward(const Var& root, const Tensor& seed) {
    if (!root->has_value) throw Error(ErrorKind::Invalid, "backward: forward has not been evaluated");
    if (!seed.same_shape(root->value))
        throw Error(ErrorKind::Invalid, "backward: seed shape " + shape_str(seed.shape) +
                                            " does not match output shape " + shape_str(root->value.shape));
    auto order = topo_order(root);
    for (Node* n : order) n->has_grad = false;
    root->grad = seed;
    root->has_grad = true;
    GradMap grads;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->has_grad || !n->requires_grad) continue;
        if (n->backprop) n->backprop(*n);
        if (n->param && n->param->trainable) {
            auto [slot, fresh] = grads.try_emplace(n->param, n->grad);
            if (!fresh)
                for (long i = 0; i < n->grad.size(); ++i) slot->second[i] += n->grad[i];
        }
    }
    return grads;
}

}  // namespace dagan
