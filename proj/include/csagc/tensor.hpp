#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace csagc::ad {

// Reverse-mode automatic differentiation over dense double tensors.
// A Tensor is a value-semantic handle to a graph node; operations on tensors
// with requires_grad record a dynamic tape that backward() replays in reverse
// topological order. The graph is released after backward.

struct Node {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized lazily, same length as data
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // pushes this->grad into parents
    int mark = 0;                         // scratch for traversal
};

class Tensor {
public:
    Tensor() : node_(std::make_shared<Node>()) {}
    Tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor randn(std::vector<int> shape, std::mt19937_64& rng, double stddev = 1.0,
                        bool requires_grad = false);

    const std::vector<int>& shape() const { return node_->shape; }
    std::size_t size() const { return node_->data.size(); }
    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    std::vector<double>& grad();
    bool has_grad() const { return !node_->grad.empty(); }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }
    void zero_grad();

    double item() const;  // scalar tensors only

    std::shared_ptr<Node>& node() { return node_; }
    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

std::size_t shape_product(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// --- elementwise ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// log(max(x, floor)); the floor keeps losses finite at p -> 0
Tensor log_clamped(const Tensor& x, double floor = 1e-12);

// --- structural ---
Tensor reshape(const Tensor& x, std::vector<int> new_shape);
Tensor concat_cols(const Tensor& a, const Tensor& b);           // [n,p],[n,q] -> [n,p+q]
Tensor slice_cols(const Tensor& x, int begin, int end);         // [n,w] -> [n,end-begin]
Tensor pad_cols(const Tensor& x, int new_width);                // zero-pad on the right
Tensor detach(const Tensor& x);

// --- reductions / linear algebra ---
Tensor sum(const Tensor& x);   // -> scalar
Tensor mean(const Tensor& x);  // -> scalar
Tensor matmul(const Tensor& a, const Tensor& b);                      // [m,k]x[k,n]
Tensor linear_forward(const Tensor& x, const Tensor& W, const Tensor& b);
Tensor row_scale(const Tensor& x, const Tensor& w);             // [n,C] * w[C] per row
// batched: A[b,m,k] x B[b,k,n] -> [b,m,n]; transB treats B as [b,n,k]
Tensor batched_matmul(const Tensor& A, const Tensor& B, bool transpose_b = false);

// --- neural-net ops ---
Tensor conv1d_forward(const Tensor& x, const Tensor& kernels, const Tensor& bias,
                      int stride = 1, int padding = 0);
Tensor maxpool1d(const Tensor& x, int size);
Tensor softmax(const Tensor& x);                                // trailing axis
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng, bool training);
Tensor channel_avg(const Tensor& x);                            // [b,c,l] -> [b,c]
Tensor channel_max(const Tensor& x);                            // [b,c,l] -> [b,c]
Tensor scale_channels(const Tensor& x, const Tensor& a);        // x[b,c,l] * a[b,c]
// tokens[b,T,f], cond[b,c] -> [b,T,f+c] (condition repeated per token)
Tensor token_concat(const Tensor& tokens, const Tensor& cond);

// Populates grads of every requires_grad ancestor of `loss`, then releases
// the recorded graph. `loss` must be scalar.
void backward(Tensor& loss);

bool all_finite(const Tensor& t);
void check_finite(const Tensor& t, const std::string& context);

}  // namespace csagc::ad
