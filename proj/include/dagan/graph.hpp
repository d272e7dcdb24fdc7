#ifndef DAGAN_GRAPH_HPP
#define DAGAN_GRAPH_HPP

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "dagan/tensor.hpp"

namespace dagan {

// A named trainable tensor. mu-style scalars are Parameters of shape [1].
struct Parameter {
    std::string name;
    Tensor value;
    bool trainable = true;
};

// One node of the taped computation graph. Evaluation is eager: ops compute
// their value at construction time when all inputs are available. compute is
// kept so a graph with placeholders can be (re-)evaluated via forward().
struct Node {
    std::string op;
    std::vector<std::shared_ptr<Node>> inputs;
    Tensor value;
    bool has_value = false;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::function<void(Node&)> compute;
    std::function<void(Node&)> backprop;
    Parameter* param = nullptr;
    std::string placeholder_name;
};

using Var = std::shared_ptr<Node>;
using GradMap = std::map<const Parameter*, Tensor>;

// Leaves.
Var constant(Tensor t);
Var leaf(Parameter& p);                    // requires_grad = p.trainable
Var leaf_frozen(Parameter& p);             // never receives gradient
Var input_var(Tensor t);                   // non-parameter leaf that wants a gradient
Var placeholder(const std::string& name);  // unbound until forward() binds it

// Elementwise / scalar.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scalar_mul(Var a, double s);
Var mul_param_scalar(Var a, Var mu);  // mu has shape [1]
Var relu(Var a);
Var leaky_relu(Var a, double slope = 0.2);
Var sigmoid(Var a);
Var tanh_op(Var a);
Var abs_op(Var a);
Var square(Var a);
Var log_op(Var a);
Var clamp(Var a, double lo, double hi);

// Linear algebra / structure.
Var matmul(Var a, Var b);
Var transpose2(Var a);
Var batched_matmul(Var a, Var b);     // [N,P,Q] x [N,Q,R] -> [N,P,R]
Var batched_matmul_bt(Var a, Var b);  // [N,P,Q] x [N,R,Q]^T -> [N,P,R]
Var batched_transpose(Var a);      // [N,P,Q] -> [N,Q,P]
Var reshape(Var a, const Shape& s);
Var softmax_axis(Var a, int axis);
Var concat_channels(const std::vector<Var>& xs);  // along axis 1 of [N,C,H,W]
Var linear(Var x, Var w, Var b);                  // [N,F] x [F,O] + [O]

// Reductions.
Var reduce_sum(Var a);
Var reduce_mean(Var a);

// Image ops ([N,C,H,W]).
Var conv2d(Var x, Var w, Var b, int stride, int pad);
Var conv_transpose2d(Var x, Var w, Var b, int stride, int pad);
Var instance_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var upsample_nearest2(Var x);
Var tv_op(Var x);  // batch mean of per-image total-variation sums

// Re-evaluates the graph under root with the given placeholder bindings.
Tensor forward(const Var& root, const std::unordered_map<std::string, Tensor>& bindings);

// Reverse pass from root, seeded with seed (same shape as root's value).
// Returns gradients for every trainable Parameter reachable from root.
// Gradients of input_var leaves stay on their nodes.
GradMap backward(const Var& root, const Tensor& seed);

std::vector<Node*> topo_order(const Var& root);

}  // namespace dagan

#endif
