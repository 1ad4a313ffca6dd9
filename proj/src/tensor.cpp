#include "csagc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "csagc/errors.hpp"

namespace csagc::ad {

std::size_t shape_product(const std::vector<int>& shape) {
    std::size_t p = 1;
    for (int d : shape) p *= static_cast<std::size_t>(d);
    return p;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<Node>()) {
    for (int d : shape)
        if (d < 0) throw DimensionError("negative dimension in shape " + shape_str(shape));
    if (shape_product(shape) != data.size())
        throw DimensionError("shape " + shape_str(shape) + " does not match data length " +
                             std::to_string(data.size()));
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    std::vector<double> d(shape_product(shape), 0.0);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    std::vector<double> d(shape_product(shape), value);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::randn(std::vector<int> shape, std::mt19937_64& rng, double stddev,
                     bool requires_grad) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> d(shape_product(shape));
    for (double& v : d) v = dist(rng);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

std::vector<double>& Tensor::grad() {
    if (node_->grad.size() != node_->data.size()) node_->grad.assign(node_->data.size(), 0.0);
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

double Tensor::item() const {
    if (node_->data.size() != 1)
        throw ContractError("item() on non-scalar tensor of shape " + shape_str(node_->shape));
    return node_->data[0];
}

bool all_finite(const Tensor& t) {
    for (double v : t.data())
        if (!std::isfinite(v)) return false;
    return true;
}

void check_finite(const Tensor& t, const std::string& context) {
    if (!all_finite(t)) throw NumericError("non-finite values in " + context);
}

namespace {

using NodePtr = std::shared_ptr<Node>;

std::vector<double>& acc(Node& n) {
    if (n.grad.size() != n.data.size()) n.grad.assign(n.data.size(), 0.0);
    return n.grad;
}

Tensor make_result(std::vector<int> shape, std::vector<double> data,
                   std::vector<NodePtr> parents, std::function<void(Node&)> backprop) {
    Tensor out(std::move(shape), std::move(data));
    bool needs = false;
    for (const auto& p : parents)
        if (p->requires_grad) needs = true;
    if (needs) {
        out.node()->requires_grad = true;
        out.node()->parents = std::move(parents);
        out.node()->backprop = std::move(backprop);
    }
    return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    NodePtr pa = a.node(), pb = b.node();
    return make_result(a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& self) {
        if (pa->requires_grad) {
            auto& g = acc(*pa);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            auto& g = acc(*pb);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    NodePtr pa = a.node(), pb = b.node();
    return make_result(a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& self) {
        if (pa->requires_grad) {
            auto& g = acc(*pa);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            auto& g = acc(*pb);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    NodePtr pa = a.node(), pb = b.node();
    return make_result(a.shape(), std::move(out), {pa, pb}, [pa, pb](Node& self) {
        if (pa->requires_grad) {
            auto& g = acc(*pa);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->data[i];
        }
        if (pb->requires_grad) {
            auto& g = acc(*pb);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->data[i];
        }
    });
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + c;
    NodePtr pa = a.node();
    return make_result(a.shape(), std::move(out), {pa}, [pa](Node& self) {
        auto& g = acc(*pa);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor mul_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
    NodePtr pa = a.node();
    return make_result(a.shape(), std::move(out), {pa}, [pa, c](Node& self) {
        auto& g = acc(*pa);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * c;
    });
}

Tensor leaky_relu(const Tensor& x, double slope) {
    if (!(slope > 0.0 && slope < 1.0))
        throw ContractError("leaky_relu: slope must lie in (0,1), got " + std::to_string(slope));
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = x.data()[i];
        out[i] = v >= 0.0 ? v : slope * v;
    }
    NodePtr px = x.node();
    return make_result(x.shape(), std::move(out), {px}, [px, slope](Node& self) {
        auto& g = acc(*px);
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += self.grad[i] * (px->data[i] >= 0.0 ? 1.0 : slope);
    });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, x.data()[i]);
    NodePtr px = x.node();
    return make_result(x.shape(), std::move(out), {px}, [px](Node& self) {
        auto& g = acc(*px);
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += px->data[i] > 0.0 ? self.grad[i] : 0.0;
    });
}

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
    NodePtr px = x.node();
    return make_result(x.shape(), std::move(out), {px}, [px](Node& self) {
        auto& g = acc(*px);
        for (std::size_t i = 0; i < g.size(); ++i) {
            double y = self.data[i];
            g[i] += self.grad[i] * y * (1.0 - y);
        }
    });
}

Tensor log_clamped(const Tensor& x, double floor) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(x.data()[i], floor));
    NodePtr px = x.node();
    return make_result(x.shape(), std::move(out), {px}, [px, floor](Node& self) {
        auto& g = acc(*px);
        for (std::size_t i = 0; i < g.size(); ++i) {
            double v = px->data[i];
            if (v > floor) g[i] += self.grad[i] / v;
            // clamped region: derivative 0
        }
    });
}

Tensor reshape(const Tensor& x, std::vector<int> new_shape) {
    if (shape_product(new_shape) != x.size())
        throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(new_shape) +
                             " changes element count");
    NodePtr px = x.node();
    return make_result(std::move(new_shape), x.data(), {px}, [px](Node& self) {
        auto& g = acc(*px);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[0] != b.shape()[0])
        throw DimensionError("concat_cols: incompatible shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    const int n = a.shape()[0], p = a.shape()[1], q = b.shape()[1];
    std::vector<double> out(static_cast<std::size_t>(n) * (p + q));
    for (int i = 0; i < n; ++i) {
        std::copy_n(a.data().begin() + static_cast<std::size_t>(i) * p, p,
                    out.begin() + static_cast<std::size_t>(i) * (p + q));
        std::copy_n(b.data().begin() + static_cast<std::size_t>(i) * q, q,
                    out.begin() + static_cast<std::size_t>(i) * (p + q) + p);
    }
    NodePtr pa = a.node(), pb = b.node();
    return make_result({n, p + q}, std::move(out), {pa, pb}, [pa, pb, n, p, q](Node& self) {
        if (pa->requires_grad) {
            auto& g = acc(*pa);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < p; ++j)
                    g[static_cast<std::size_t>(i) * p + j] +=
                        self.grad[static_cast<std::size_t>(i) * (p + q) + j];
        }
        if (pb->requires_grad) {
            auto& g = acc(*pb);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < q; ++j)
                    g[static_cast<std::size_t>(i) * q + j] +=
                        self.grad[static_cast<std::size_t>(i) * (p + q) + p + j];
        }
    });
}

Tensor slice_cols(const Tensor& x, int begin, int end) {
    if (x.shape().size() != 2 || begin < 0 || end > x.shape()[1] || begin >= end)
        throw DimensionError("slice_cols: bad range [" + std::to_string(begin) + "," +
                             std::to_string(end) + ") for shape " + shape_str(x.shape()));
    const int n = x.shape()[0], w = x.shape()[1], m = end - begin;
    std::vector<double> out(static_cast<std::size_t>(n) * m);
    for (int i = 0; i < n; ++i)
        std::copy_n(x.data().begin() + static_cast<std::size_t>(i) * w + begin, m,
                    out.begin() + static_cast<std::size_t>(i) * m);
    NodePtr px = x.node();
    return make_result({n, m}, std::move(out), {px}, [px, n, w, m, begin](Node& self) {
        auto& g = acc(*px);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                g[static_cast<std::size_t>(i) * w + begin + j] +=
                    self.grad[static_cast<std::size_t>(i) * m + j];
    });
}

Tensor pad_cols(const Tensor& x, int new_width) {
    if (x.shape().size() != 2 || new_width < x.shape()[1])
        throw DimensionError("pad_cols: cannot pad " + shape_str(x.shape()) + " to width " +
                             std::to_string(new_width));
    const int n = x.shape()[0], w = x.shape()[1];
    std::vector<double> out(static_cast<std::size_t>(n) * new_width, 0.0);
    for (int i = 0; i < n; ++i)
        std::copy_n(x.data().begin() + static_cast<std::size_t>(i) * w, w,
                    out.begin() + static_cast<std::size_t>(i) * new_width);
    NodePtr px = x.node();
    return make_result({n, new_width}, std::move(out), {px}, [px, n, w, new_width](Node& self) {
        auto& g = acc(*px);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < w; ++j)
                g[static_cast<std::size_t>(i) * w + j] +=
                    self.grad[static_cast<std::size_t>(i) * new_width + j];
    });
}

Tensor detach(const Tensor& x) { return Tensor(x.shape(), x.data(), false); }

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    NodePtr px = x.node();
    return make_result({1}, {s}, {px}, [px](Node& self) {
        auto& g = acc(*px);
        for (double& v : g) v += self.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    if (x.size() == 0) throw ContractError("mean of empty tensor");
    double s = 0.0;
    for (double v : x.data()) s += v;
    const double inv = 1.0 / static_cast<double>(x.size());
    NodePtr px = x.node();
    return make_result({1}, {s * inv}, {px}, [px, inv](Node& self) {
        auto& g = acc(*px);
        for (double& v : g) v += self.grad[0] * inv;
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int l = 0; l < k; ++l) {
            const double av = a.data()[static_cast<std::size_t>(i) * k + l];
            if (av == 0.0) continue;
            const double* brow = b.data().data() + static_cast<std::size_t>(l) * n;
            double* orow = out.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    NodePtr pa = a.node(), pb = b.node();
    return make_result({m, n}, std::move(out), {pa, pb}, [pa, pb, m, k, n](Node& self) {
        if (pa->requires_grad) {
            auto& g = acc(*pa);  // dA = dY . B^T
            for (int i = 0; i < m; ++i)
                for (int l = 0; l < k; ++l) {
                    double s = 0.0;
                    const double* gy = self.grad.data() + static_cast<std::size_t>(i) * n;
                    const double* br = pb->data.data() + static_cast<std::size_t>(l) * n;
                    for (int j = 0; j < n; ++j) s += gy[j] * br[j];
                    g[static_cast<std::size_t>(i) * k + l] += s;
                }
        }
        if (pb->requires_grad) {
            auto& g = acc(*pb);  // dB = A^T . dY
            for (int i = 0; i < m; ++i) {
                const double* gy = self.grad.data() + static_cast<std::size_t>(i) * n;
                for (int l = 0; l < k; ++l) {
                    const double av = pa->data[static_cast<std::size_t>(i) * k + l];
                    if (av == 0.0) continue;
                    double* gr = g.data() + static_cast<std::size_t>(l) * n;
                    for (int j = 0; j < n; ++j) gr[j] += av * gy[j];
                }
            }
        }
    });
}

Tensor linear_forward(const Tensor& x, const Tensor& W, const Tensor& b) {
    if (x.shape().size() != 2 || W.shape().size() != 2 || x.shape()[1] != W.shape()[0])
        throw DimensionError("linear_forward: input " + shape_str(x.shape()) +
                             " does not match weight " + shape_str(W.shape()));
    if (b.shape().size() != 1 || b.shape()[0] != W.shape()[1])
        throw DimensionError("linear_forward: bias " + shape_str(b.shape()) +
                             " does not match weight " + shape_str(W.shape()));
    Tensor y = matmul(x, W);
    const int n = y.shape()[0], out_w = y.shape()[1];
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < out_w; ++j)
            y.data()[static_cast<std::size_t>(i) * out_w + j] += b.data()[j];
    if (!b.requires_grad()) return y;
    NodePtr py = y.node(), pb = b.node();
    return make_result(y.shape(), y.data(), {py, pb}, [py, pb, n, out_w](Node& self) {
        if (py->requires_grad) {
            auto& g = acc(*py);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        auto& gb = acc(*pb);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < out_w; ++j)
                gb[j] += self.grad[static_cast<std::size_t>(i) * out_w + j];
    });
}

Tensor row_scale(const Tensor& x, const Tensor& w) {
    if (x.shape().size() != 2 || w.shape().size() != 1 || x.shape()[1] != w.shape()[0])
        throw DimensionError("row_scale: " + shape_str(x.shape()) + " vs " + shape_str(w.shape()));
    const int n = x.shape()[0], c = x.shape()[1];
    std::vector<double> out(x.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j)
            out[static_cast<std::size_t>(i) * c + j] =
                x.data()[static_cast<std::size_t>(i) * c + j] * w.data()[j];
    NodePtr px = x.node(), pw = w.node();
    return make_result({n, c}, std::move(out), {px, pw}, [px, pw, n, c](Node& self) {
        if (px->requires_grad) {
            auto& g = acc(*px);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < c; ++j)
                    g[static_cast<std::size_t>(i) * c + j] +=
                        self.grad[static_cast<std::size_t>(i) * c + j] * pw->data[j];
        }
        if (pw->requires_grad) {
            auto& g = acc(*pw);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < c; ++j)
                    g[j] += self.grad[static_cast<std::size_t>(i) * c + j] *
                            px->data[static_cast<std::size_t>(i) * c + j];
        }
    });
}

Tensor batched_matmul(const Tensor& A, const Tensor& B, bool transpose_b) {
    if (A.shape().size() != 3 || B.shape().size() != 3 || A.shape()[0] != B.shape()[0])
        throw DimensionError("batched_matmul: " + shape_str(A.shape()) + " vs " +
                             shape_str(B.shape()));
    const int bs = A.shape()[0], m = A.shape()[1], k = A.shape()[2];
    const int n = transpose_b ? B.shape()[1] : B.shape()[2];
    const int bk = transpose_b ? B.shape()[2] : B.shape()[1];
    if (bk != k)
        throw DimensionError("batched_matmul: inner dimensions disagree, " +
                             shape_str(A.shape()) + " vs " + shape_str(B.shape()));
    std::vector<double> out(static_cast<std::size_t>(bs) * m * n, 0.0);
    auto a_at = [&](int b, int i, int l) {
        return A.data()[(static_cast<std::size_t>(b) * m + i) * k + l];
    };
    auto b_at = [&](const std::vector<double>& bd, int b, int l, int j) {
        return transpose_b ? bd[(static_cast<std::size_t>(b) * n + j) * k + l]
                           : bd[(static_cast<std::size_t>(b) * k + l) * n + j];
    };
    for (int b = 0; b < bs; ++b)
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int l = 0; l < k; ++l) s += a_at(b, i, l) * b_at(B.data(), b, l, j);
                out[(static_cast<std::size_t>(b) * m + i) * n + j] = s;
            }
    NodePtr pa = A.node(), pb = B.node();
    return make_result({bs, m, n}, std::move(out), {pa, pb},
                       [pa, pb, bs, m, k, n, transpose_b](Node& self) {
        auto gy = [&](int b, int i, int j) {
            return self.grad[(static_cast<std::size_t>(b) * m + i) * n + j];
        };
        if (pa->requires_grad) {
            auto& g = acc(*pa);
            for (int b = 0; b < bs; ++b)
                for (int i = 0; i < m; ++i)
                    for (int l = 0; l < k; ++l) {
                        double s = 0.0;
                        for (int j = 0; j < n; ++j) {
                            double bv = transpose_b
                                ? pb->data[(static_cast<std::size_t>(b) * n + j) * k + l]
                                : pb->data[(static_cast<std::size_t>(b) * k + l) * n + j];
                            s += gy(b, i, j) * bv;
                        }
                        g[(static_cast<std::size_t>(b) * m + i) * k + l] += s;
                    }
        }
        if (pb->requires_grad) {
            auto& g = acc(*pb);
            for (int b = 0; b < bs; ++b)
                for (int i = 0; i < m; ++i)
                    for (int l = 0; l < k; ++l) {
                        const double av = pa->data[(static_cast<std::size_t>(b) * m + i) * k + l];
                        if (av == 0.0) continue;
                        for (int j = 0; j < n; ++j) {
                            std::size_t idx = transpose_b
                                ? (static_cast<std::size_t>(b) * n + j) * k + l
                                : (static_cast<std::size_t>(b) * k + l) * n + j;
                            g[idx] += av * gy(b, i, j);
                        }
                    }
        }
    });
}

Tensor conv1d_forward(const Tensor& x, const Tensor& kernels, const Tensor& bias, int stride,
                      int padding) {
    if (x.shape().size() != 3 || kernels.shape().size() != 3)
        throw DimensionError("conv1d: expected rank-3 input and kernels, got " +
                             shape_str(x.shape()) + " and " + shape_str(kernels.shape()));
    const int B = x.shape()[0], Cin = x.shape()[1], L = x.shape()[2];
    const int Cout = kernels.shape()[0], K = kernels.shape()[2];
    if (kernels.shape()[1] != Cin)
        throw DimensionError("conv1d: kernel channels " + shape_str(kernels.shape()) +
                             " do not match input " + shape_str(x.shape()));
    if (stride < 1) throw ContractError("conv1d: stride must be >= 1");
    if (L + 2 * padding < K)
        throw DimensionError("conv1d: kernel size " + std::to_string(K) +
                             " exceeds padded length " + std::to_string(L + 2 * padding));
    if (bias.shape() != std::vector<int>{Cout})
        throw DimensionError("conv1d: bias " + shape_str(bias.shape()) + " needs length " +
                             std::to_string(Cout));
    const int Lout = (L + 2 * padding - K) / stride + 1;
    std::vector<double> out(static_cast<std::size_t>(B) * Cout * Lout);
    auto x_at = [&](const std::vector<double>& xd, int b, int c, int t) -> double {
        if (t < 0 || t >= L) return 0.0;
        return xd[(static_cast<std::size_t>(b) * Cin + c) * L + t];
    };
    for (int b = 0; b < B; ++b)
        for (int co = 0; co < Cout; ++co)
            for (int t = 0; t < Lout; ++t) {
                double s = bias.data()[co];
                const int t0 = t * stride - padding;
                for (int ci = 0; ci < Cin; ++ci)
                    for (int kk = 0; kk < K; ++kk)
                        s += x_at(x.data(), b, ci, t0 + kk) *
                             kernels.data()[(static_cast<std::size_t>(co) * Cin + ci) * K + kk];
                out[(static_cast<std::size_t>(b) * Cout + co) * Lout + t] = s;
            }
    NodePtr px = x.node(), pk = kernels.node(), pbias = bias.node();
    return make_result({B, Cout, Lout}, std::move(out), {px, pk, pbias},
                       [px, pk, pbias, B, Cin, Cout, L, K, Lout, stride, padding](Node& self) {
        auto gy = [&](int b, int co, int t) {
            return self.grad[(static_cast<std::size_t>(b) * Cout + co) * Lout + t];
        };
        if (px->requires_grad) {
            auto& g = acc(*px);
            for (int b = 0; b < B; ++b)
                for (int co = 0; co < Cout; ++co)
                    for (int t = 0; t < Lout; ++t) {
                        const double gv = gy(b, co, t);
                        if (gv == 0.0) continue;
                        const int t0 = t * stride - padding;
                        for (int ci = 0; ci < Cin; ++ci)
                            for (int kk = 0; kk < K; ++kk) {
                                const int pos = t0 + kk;
                                if (pos < 0 || pos >= L) continue;
                                g[(static_cast<std::size_t>(b) * Cin + ci) * L + pos] +=
                                    gv *
                                    pk->data[(static_cast<std::size_t>(co) * Cin + ci) * K + kk];
                            }
                    }
        }
        if (pk->requires_grad) {
            auto& g = acc(*pk);
            for (int b = 0; b < B; ++b)
                for (int co = 0; co < Cout; ++co)
                    for (int t = 0; t < Lout; ++t) {
                        const double gv = gy(b, co, t);
                        if (gv == 0.0) continue;
                        const int t0 = t * stride - padding;
                        for (int ci = 0; ci < Cin; ++ci)
                            for (int kk = 0; kk < K; ++kk) {
                                const int pos = t0 + kk;
                                if (pos < 0 || pos >= L) continue;
                                g[(static_cast<std::size_t>(co) * Cin + ci) * K + kk] +=
                                    gv * px->data[(static_cast<std::size_t>(b) * Cin + ci) * L +
                                                  pos];
                            }
                    }
        }
        if (pbias->requires_grad) {
            auto& g = acc(*pbias);
            for (int b = 0; b < B; ++b)
                for (int co = 0; co < Cout; ++co)
                    for (int t = 0; t < Lout; ++t) g[co] += gy(b, co, t);
        }
    });
}

Tensor maxpool1d(const Tensor& x, int size) {
    if (x.shape().size() != 3)
        throw DimensionError("maxpool1d: expected rank-3 input, got " + shape_str(x.shape()));
    if (size < 1) throw ContractError("maxpool1d: size must be >= 1");
    const int B = x.shape()[0], C = x.shape()[1], L = x.shape()[2];
    if (L < size)
        throw DimensionError("maxpool1d: window " + std::to_string(size) +
                             " exceeds length " + std::to_string(L));
    const int Lout = L / size;  // trailing remainder dropped
    std::vector<double> out(static_cast<std::size_t>(B) * C * Lout);
    auto argmax = std::make_shared<std::vector<int>>(out.size());
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int t = 0; t < Lout; ++t) {
                const std::size_t base = (static_cast<std::size_t>(b) * C + c) * L;
                int best = t * size;
                double bv = x.data()[base + best];
                for (int j = 1; j < size; ++j) {
                    const int pos = t * size + j;
                    if (x.data()[base + pos] > bv) {  // first occurrence wins ties
                        bv = x.data()[base + pos];
                        best = pos;
                    }
                }
                const std::size_t oi = (static_cast<std::size_t>(b) * C + c) * Lout + t;
                out[oi] = bv;
                (*argmax)[oi] = best;
            }
    NodePtr px = x.node();
    return make_result({B, C, Lout}, std::move(out), {px}, [px, argmax, C, L, Lout](Node& self) {
        auto& g = acc(*px);
        const int B2 = self.shape[0];
        for (int b = 0; b < B2; ++b)
            for (int c = 0; c < C; ++c)
                for (int t = 0; t < Lout; ++t) {
                    const std::size_t oi = (static_cast<std::size_t>(b) * C + c) * Lout + t;
                    g[(static_cast<std::size_t>(b) * C + c) * L + (*argmax)[oi]] += self.grad[oi];
                }
    });
}

Tensor softmax(const Tensor& x) {
    if (x.shape().empty() || x.shape().back() < 1)
        throw DimensionError("softmax: trailing axis required, shape " + shape_str(x.shape()));
    const int n = x.shape().back();
    const std::size_t slices = x.size() / n;
    std::vector<double> out(x.size());
    for (std::size_t s = 0; s < slices; ++s) {
        const double* in = x.data().data() + s * n;
        double* o = out.data() + s * n;
        double mx = in[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, in[j]);
        double denom = 0.0;
        for (int j = 0; j < n; ++j) {
            o[j] = std::exp(in[j] - mx);
            denom += o[j];
        }
        for (int j = 0; j < n; ++j) o[j] /= denom;
    }
    NodePtr px = x.node();
    return make_result(x.shape(), std::move(out), {px}, [px, n, slices](Node& self) {
        auto& g = acc(*px);
        for (std::size_t s = 0; s < slices; ++s) {
            const double* y = self.data.data() + s * n;
            const double* gy = self.grad.data() + s * n;
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += y[j] * gy[j];
            for (int j = 0; j < n; ++j) g[s * n + j] += y[j] * (gy[j] - dot);
        }
    });
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must be in [0,1)");
    if (!training || rate == 0.0) return x;
    const double keep = 1.0 - rate;
    std::bernoulli_distribution dist(keep);
    auto mask = std::make_shared<std::vector<double>>(x.size());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        (*mask)[i] = dist(rng) ? 1.0 / keep : 0.0;
        out[i] = x.data()[i] * (*mask)[i];
    }
    NodePtr px = x.node();
    return make_result(x.shape(), std::move(out), {px}, [px, mask](Node& self) {
        auto& g = acc(*px);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (*mask)[i];
    });
}

Tensor channel_avg(const Tensor& x) {
    if (x.shape().size() != 3)
        throw DimensionError("channel_avg: expected rank-3, got " + shape_str(x.shape()));
    const int B = x.shape()[0], C = x.shape()[1], L = x.shape()[2];
    std::vector<double> out(static_cast<std::size_t>(B) * C, 0.0);
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            double s = 0.0;
            for (int t = 0; t < L; ++t) s += x.data()[(static_cast<std::size_t>(b) * C + c) * L + t];
            out[static_cast<std::size_t>(b) * C + c] = s / L;
        }
    NodePtr px = x.node();
    return make_result({B, C}, std::move(out), {px}, [px, B, C, L](Node& self) {
        auto& g = acc(*px);
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                const double gv = self.grad[static_cast<std::size_t>(b) * C + c] / L;
                for (int t = 0; t < L; ++t)
                    g[(static_cast<std::size_t>(b) * C + c) * L + t] += gv;
            }
    });
}

Tensor channel_max(const Tensor& x) {
    if (x.shape().size() != 3)
        throw DimensionError("channel_max: expected rank-3, got " + shape_str(x.shape()));
    const int B = x.shape()[0], C = x.shape()[1], L = x.shape()[2];
    std::vector<double> out(static_cast<std::size_t>(B) * C);
    auto argmax = std::make_shared<std::vector<int>>(out.size());
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const std::size_t base = (static_cast<std::size_t>(b) * C + c) * L;
            int best = 0;
            for (int t = 1; t < L; ++t)
                if (x.data()[base + t] > x.data()[base + best]) best = t;
            out[static_cast<std::size_t>(b) * C + c] = x.data()[base + best];
            (*argmax)[static_cast<std::size_t>(b) * C + c] = best;
        }
    NodePtr px = x.node();
    return make_result({B, C}, std::move(out), {px}, [px, argmax, B, C, L](Node& self) {
        auto& g = acc(*px);
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                const std::size_t i = static_cast<std::size_t>(b) * C + c;
                g[i * L + (*argmax)[i]] += self.grad[i];
            }
    });
}

Tensor scale_channels(const Tensor& x, const Tensor& a) {
    if (x.shape().size() != 3 || a.shape().size() != 2 || x.shape()[0] != a.shape()[0] ||
        x.shape()[1] != a.shape()[1])
        throw DimensionError("scale_channels: " + shape_str(x.shape()) + " vs " +
                             shape_str(a.shape()));
    const int B = x.shape()[0], C = x.shape()[1], L = x.shape()[2];
    std::vector<double> out(x.size());
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const double av = a.data()[static_cast<std::size_t>(b) * C + c];
            for (int t = 0; t < L; ++t) {
                const std::size_t i = (static_cast<std::size_t>(b) * C + c) * L + t;
                out[i] = x.data()[i] * av;
            }
        }
    NodePtr px = x.node(), pa = a.node();
    return make_result({B, C, L}, std::move(out), {px, pa}, [px, pa, B, C, L](Node& self) {
        if (px->requires_grad) {
            auto& g = acc(*px);
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c) {
                    const double av = pa->data[static_cast<std::size_t>(b) * C + c];
                    for (int t = 0; t < L; ++t) {
                        const std::size_t i = (static_cast<std::size_t>(b) * C + c) * L + t;
                        g[i] += self.grad[i] * av;
                    }
                }
        }
        if (pa->requires_grad) {
            auto& g = acc(*pa);
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c) {
                    double s = 0.0;
                    for (int t = 0; t < L; ++t) {
                        const std::size_t i = (static_cast<std::size_t>(b) * C + c) * L + t;
                        s += self.grad[i] * px->data[i];
                    }
                    g[static_cast<std::size_t>(b) * C + c] += s;
                }
        }
    });
}

Tensor token_concat(const Tensor& tokens, const Tensor& cond) {
    if (tokens.shape().size() != 3 || cond.shape().size() != 2 ||
        tokens.shape()[0] != cond.shape()[0])
        throw DimensionError("token_concat: " + shape_str(tokens.shape()) + " vs " +
                             shape_str(cond.shape()));
    const int B = tokens.shape()[0], T = tokens.shape()[1], F = tokens.shape()[2];
    const int C = cond.shape()[1];
    std::vector<double> out(static_cast<std::size_t>(B) * T * (F + C));
    for (int b = 0; b < B; ++b)
        for (int t = 0; t < T; ++t) {
            double* o = out.data() + (static_cast<std::size_t>(b) * T + t) * (F + C);
            const double* tk = tokens.data().data() + (static_cast<std::size_t>(b) * T + t) * F;
            const double* cd = cond.data().data() + static_cast<std::size_t>(b) * C;
            std::copy_n(tk, F, o);
            std::copy_n(cd, C, o + F);
        }
    NodePtr pt = tokens.node(), pc = cond.node();
    return make_result({B, T, F + C}, std::move(out), {pt, pc}, [pt, pc, B, T, F, C](Node& self) {
        if (pt->requires_grad) {
            auto& g = acc(*pt);
            for (int b = 0; b < B; ++b)
                for (int t = 0; t < T; ++t)
                    for (int f = 0; f < F; ++f)
                        g[(static_cast<std::size_t>(b) * T + t) * F + f] +=
                            self.grad[(static_cast<std::size_t>(b) * T + t) * (F + C) + f];
        }
        if (pc->requires_grad) {
            auto& g = acc(*pc);
            for (int b = 0; b < B; ++b)
                for (int t = 0; t < T; ++t)
                    for (int c = 0; c < C; ++c)
                        g[static_cast<std::size_t>(b) * C + c] +=
                            self.grad[(static_cast<std::size_t>(b) * T + t) * (F + C) + F + c];
        }
    });
}

void backward(Tensor& loss) {
    if (loss.size() != 1)
        throw ContractError("backward: loss must be scalar, got shape " +
                            shape_str(loss.shape()));
    // Iterative post-order DFS; mark 1 = on stack, 2 = emitted.
    std::vector<Node*> order;
    std::vector<std::pair<Node*, std::size_t>> stack;
    // shared ownership: cleanup below drops parents/backprop, which may be the
    // only owners of intermediate nodes still awaiting their own cleanup
    std::vector<std::shared_ptr<Node>> visited;
    Node* root = loss.node().get();
    stack.emplace_back(root, 0);
    root->mark = 1;
    visited.push_back(loss.node());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            const std::shared_ptr<Node>& ps = n->parents[idx++];
            Node* p = ps.get();
            if (p->mark == 1) throw InternalError("backward: cycle detected in graph");
            if (p->mark == 0) {
                p->mark = 1;
                visited.push_back(ps);
                stack.emplace_back(p, 0);
            }
        } else {
            n->mark = 2;
            order.push_back(n);
            stack.pop_back();
        }
    }
    loss.node()->grad.assign(1, 1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && !n->grad.empty()) n->backprop(*n);
    }
    bool finite = true;
    for (const auto& sn : visited) {
        Node* n = sn.get();
        if (n->requires_grad)
            for (double v : n->grad)
                if (!std::isfinite(v)) finite = false;
        n->mark = 0;
        n->parents.clear();
        n->backprop = nullptr;
    }
    if (!finite) throw NumericError("backward: non-finite gradient produced");
}

}  // namespace csagc::ad
