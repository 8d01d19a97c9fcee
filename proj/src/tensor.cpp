#include "gridflow/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace gridflow {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t e : shape) {
        if (e < 0) throw ShapeError("negative extent in shape " + shape_to_string(shape));
        n *= e;
    }
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

namespace {

void check_finite(std::span<const double> values, const char* op_name) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NonFiniteError(std::string(op_name) + ": non-finite value produced");
        }
    }
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

// Copy [N,C,H,W] into a zero-padded [N,C,H+2p,W+2p] buffer.
std::vector<double> pad_nchw(std::span<const double> x, int64_t n, int64_t c, int64_t h,
                             int64_t w, int64_t p) {
    const int64_t hp = h + 2 * p;
    const int64_t wp = w + 2 * p;
    std::vector<double> out(static_cast<size_t>(n * c * hp * wp), 0.0);
    for (int64_t i = 0; i < n * c; ++i) {
        const double* src = x.data() + i * h * w;
        double* dst = out.data() + i * hp * wp + p * wp + p;
        for (int64_t row = 0; row < h; ++row) {
            std::copy(src, src + w, dst);
            src += w;
            dst += wp;
        }
    }
    return out;
}

}  // namespace

namespace detail {

void TensorNode::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void TensorNode::accumulate_grad(std::span<const double> g, const char* op_name) {
    check_finite(g, op_name);
    ensure_grad();
    if (g.size() != grad.size()) {
        throw ShapeError(std::string(op_name) + ": gradient size mismatch");
    }
    for (size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
}

Tensor make_node(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                 std::function<void(TensorNode&)> backward_fn) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    bool needs_grad = false;
    for (const Tensor& p : parents) {
        if (p.requires_grad()) needs_grad = true;
    }
    node->requires_grad = needs_grad;
    if (needs_grad) {
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

}  // namespace detail

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const int64_t n = shape_numel(shape);
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->data.assign(static_cast<size_t>(n), 0.0);
    node->requires_grad = requires_grad;
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.node_->data.begin(), t.node_->data.end(), value);
    return t;
}

Tensor Tensor::from_vector(std::vector<double> values, Shape shape, bool requires_grad) {
    const int64_t n = shape_numel(shape);
    if (n != static_cast<int64_t>(values.size())) {
        throw ShapeError("from_vector: " + std::to_string(values.size()) +
                         " values do not fill shape " + shape_to_string(shape));
    }
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

Tensor Tensor::uniform(Shape shape, double bound, Rng& rng, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : t.node_->data) v = rng.uniform(-bound, bound);
    return t;
}

const Shape& Tensor::shape() const {
    if (!node_) throw Error("shape() on undefined tensor");
    return node_->shape;
}

int64_t Tensor::numel() const {
    if (!node_) throw Error("numel() on undefined tensor");
    return node_->numel();
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::span<const double> Tensor::data() const {
    if (!node_) throw Error("data() on undefined tensor");
    return node_->data;
}

std::span<double> Tensor::mutable_data() {
    if (!node_) throw Error("mutable_data() on undefined tensor");
    return node_->data;
}

std::span<const double> Tensor::grad() const {
    if (!node_) throw Error("grad() on undefined tensor");
    return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
    if (!node_) throw Error("grad() on undefined tensor");
    node_->ensure_grad();
    return node_->grad;
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() requires a single-element tensor");
    return node_->data[0];
}

void Tensor::zero_grad() {
    if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() {
    if (!node_) throw Error("backward() on undefined tensor");
    if (!node_->requires_grad) throw Error("backward() on a tensor without gradient tracking");
    if (node_->numel() != 1) throw ShapeError("backward() requires a scalar root");

    // Topological order over the parent DAG, then a reverse sweep.
    std::vector<detail::TensorNode*> order;
    std::unordered_set<detail::TensorNode*> visited;
    std::vector<std::pair<detail::TensorNode*, size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::TensorNode* parent = node->parents[next].node();
            ++next;
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
}

Tensor Tensor::detached() const {
    if (!node_) return Tensor();
    return from_vector(node_->data, node_->shape, false);
}

// ---- conv2d ----------------------------------------------------------------

namespace {

struct ConvDims {
    int64_t n, ci, h, w, co, k, pad, stride, ho, wo;
};

ConvDims conv_dims(const Tensor& input, const Tensor& weight, const Tensor& bias,
                   int64_t padding, int64_t stride) {
    require(input.rank() == 4, "conv2d: input must be [N,Cin,H,W], got " +
                                   shape_to_string(input.shape()));
    require(weight.rank() == 4, "conv2d: weight must be [Cout,Cin,k,k]");
    ConvDims d{};
    d.n = input.extent(0);
    d.ci = input.extent(1);
    d.h = input.extent(2);
    d.w = input.extent(3);
    d.co = weight.extent(0);
    d.k = weight.extent(2);
    d.pad = padding;
    d.stride = stride;
    require(weight.extent(1) == d.ci,
            "conv2d: input channels " + std::to_string(d.ci) + " do not match weight " +
                shape_to_string(weight.shape()));
    require(weight.extent(3) == d.k, "conv2d: kernel must be square");
    require(d.k % 2 == 1, "conv2d: kernel size must be odd");
    require(bias.rank() == 1 && bias.extent(0) == d.co, "conv2d: bias must be [Cout]");
    require(stride >= 1 && padding >= 0, "conv2d: stride must be >=1, padding >=0");
    require(d.h + 2 * padding >= d.k && d.w + 2 * padding >= d.k,
            "conv2d: spatial extent smaller than kernel");
    d.ho = (d.h + 2 * padding - d.k) / stride + 1;
    d.wo = (d.w + 2 * padding - d.k) / stride + 1;
    return d;
}

// Fused 3x3 row kernel: one pass per output row folds all nine taps, so the
// out row is loaded and stored once instead of nine times.
inline void corr3_row(double* __restrict orow, const double* x0, const double* x1,
                      const double* x2, const double* w9, int64_t n) {
    const double w00 = w9[0], w01 = w9[1], w02 = w9[2];
    const double w10 = w9[3], w11 = w9[4], w12 = w9[5];
    const double w20 = w9[6], w21 = w9[7], w22 = w9[8];
    for (int64_t i = 0; i < n; ++i) {
        orow[i] += w00 * x0[i] + w01 * x0[i + 1] + w02 * x0[i + 2] +
                   w10 * x1[i] + w11 * x1[i + 1] + w12 * x1[i + 2] +
                   w20 * x2[i] + w21 * x2[i + 1] + w22 * x2[i + 2];
    }
}

// Dot product with eight independent accumulator lanes. The lane layout and
// the final reduction order are fixed, so results are bitwise reproducible
// while the lane loop still vectorizes.
inline double dot_lanes(const double* a, const double* b, int64_t n) {
    double lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (int j = 0; j < 8; ++j) lanes[j] += a[i + j] * b[i + j];
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
           ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7])) + tail;
}

inline double sum_lanes(const double* a, int64_t n) {
    double lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (int j = 0; j < 8; ++j) lanes[j] += a[i + j];
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i];
    return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
           ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7])) + tail;
}

// Stride-1 correlation on a pre-padded input. d.ho/d.wo must already match
// the padded extents.
void conv_forward_s1(const double* xpad, const double* wgt, const double* bias, double* out,
                     const ConvDims& d) {
    const int64_t hp = d.h + 2 * d.pad;
    const int64_t wp = d.w + 2 * d.pad;
    for (int64_t n = 0; n < d.n; ++n) {
        const double* xn = xpad + n * d.ci * hp * wp;
        for (int64_t co = 0; co < d.co; ++co) {
            double* on = out + (n * d.co + co) * d.ho * d.wo;
            std::fill(on, on + d.ho * d.wo, bias ? bias[co] : 0.0);
            for (int64_t ci = 0; ci < d.ci; ++ci) {
                const double* xc = xn + ci * hp * wp;
                const double* wc = wgt + (co * d.ci + ci) * d.k * d.k;
                if (d.k == 3) {
                    for (int64_t ho = 0; ho < d.ho; ++ho) {
                        corr3_row(on + ho * d.wo, xc + ho * wp, xc + (ho + 1) * wp,
                                  xc + (ho + 2) * wp, wc, d.wo);
                    }
                } else {
                    for (int64_t kh = 0; kh < d.k; ++kh) {
                        for (int64_t kw = 0; kw < d.k; ++kw) {
                            const double wv = wc[kh * d.k + kw];
                            for (int64_t ho = 0; ho < d.ho; ++ho) {
                                const double* __restrict xr = xc + (ho + kh) * wp + kw;
                                double* __restrict orow = on + ho * d.wo;
                                for (int64_t wo = 0; wo < d.wo; ++wo) orow[wo] += wv * xr[wo];
                            }
                        }
                    }
                }
            }
        }
    }
}

// General strided correlation; only non-unit strides take this path.
void conv_forward_strided(const double* xpad, const double* wgt, const double* bias, double* out,
                          const ConvDims& d) {
    const int64_t hp = d.h + 2 * d.pad;
    const int64_t wp = d.w + 2 * d.pad;
    for (int64_t n = 0; n < d.n; ++n) {
        const double* xn = xpad + n * d.ci * hp * wp;
        for (int64_t co = 0; co < d.co; ++co) {
            double* on = out + (n * d.co + co) * d.ho * d.wo;
            std::fill(on, on + d.ho * d.wo, bias ? bias[co] : 0.0);
            for (int64_t ci = 0; ci < d.ci; ++ci) {
                const double* xc = xn + ci * hp * wp;
                const double* wc = wgt + (co * d.ci + ci) * d.k * d.k;
                for (int64_t kh = 0; kh < d.k; ++kh) {
                    for (int64_t kw = 0; kw < d.k; ++kw) {
                        const double wv = wc[kh * d.k + kw];
                        for (int64_t ho = 0; ho < d.ho; ++ho) {
                            const double* xr = xc + (ho * d.stride + kh) * wp + kw;
                            double* orow = on + ho * d.wo;
                            for (int64_t wo = 0; wo < d.wo; ++wo)
                                orow[wo] += wv * xr[wo * d.stride];
                        }
                    }
                }
            }
        }
    }
}

void conv_forward(const double* xpad, const double* wgt, const double* bias, double* out,
                  const ConvDims& d) {
    if (d.stride == 1) {
        conv_forward_s1(xpad, wgt, bias, out, d);
    } else {
        conv_forward_strided(xpad, wgt, bias, out, d);
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int64_t padding,
              int64_t stride) {
    const ConvDims d = conv_dims(input, weight, bias, padding, stride);

    std::vector<double> out(static_cast<size_t>(d.n * d.co * d.ho * d.wo));
    {
        std::vector<double> padded;
        const double* xpad = input.data().data();
        if (d.pad > 0) {
            padded = pad_nchw(input.data(), d.n, d.ci, d.h, d.w, d.pad);
            xpad = padded.data();
        }
        conv_forward(xpad, weight.data().data(), bias.data().data(), out.data(), d);
    }
    check_finite(out, "conv2d");

    auto backward = [input, weight, bias, d](detail::TensorNode& self) {
        const double* g = self.grad.data();
        const int64_t hp = d.h + 2 * d.pad;
        const int64_t wp = d.w + 2 * d.pad;

        std::vector<double> padded;
        const double* xpad = input.data().data();
        if (d.pad > 0) {
            padded = pad_nchw(input.data(), d.n, d.ci, d.h, d.w, d.pad);
            xpad = padded.data();
        }

        if (bias.requires_grad()) {
            std::vector<double> db(static_cast<size_t>(d.co), 0.0);
            for (int64_t n = 0; n < d.n; ++n) {
                for (int64_t co = 0; co < d.co; ++co) {
                    db[static_cast<size_t>(co)] +=
                        sum_lanes(g + (n * d.co + co) * d.ho * d.wo, d.ho * d.wo);
                }
            }
            bias.node()->accumulate_grad(db, "conv2d[bias]");
        }

        if (weight.requires_grad()) {
            std::vector<double> dw(static_cast<size_t>(weight.numel()), 0.0);
            for (int64_t n = 0; n < d.n; ++n) {
                const double* xn = xpad + n * d.ci * hp * wp;
                for (int64_t co = 0; co < d.co; ++co) {
                    const double* gn = g + (n * d.co + co) * d.ho * d.wo;
                    for (int64_t ci = 0; ci < d.ci; ++ci) {
                        const double* xc = xn + ci * hp * wp;
                        double* dwc = dw.data() + (co * d.ci + ci) * d.k * d.k;
                        for (int64_t kh = 0; kh < d.k; ++kh) {
                            for (int64_t kw = 0; kw < d.k; ++kw) {
                                double acc = 0.0;
                                if (d.stride == 1) {
                                    for (int64_t ho = 0; ho < d.ho; ++ho) {
                                        acc += dot_lanes(xc + (ho + kh) * wp + kw,
                                                         gn + ho * d.wo, d.wo);
                                    }
                                } else {
                                    for (int64_t ho = 0; ho < d.ho; ++ho) {
                                        const double* xr = xc + (ho * d.stride + kh) * wp + kw;
                                        const double* gr = gn + ho * d.wo;
                                        for (int64_t wo = 0; wo < d.wo; ++wo)
                                            acc += xr[wo * d.stride] * gr[wo];
                                    }
                                }
                                dwc[kh * d.k + kw] += acc;
                            }
                        }
                    }
                }
            }
            weight.node()->accumulate_grad(dw, "conv2d[weight]");
        }

        if (input.requires_grad()) {
            if (d.stride == 1) {
                // dX is itself a stride-1 correlation: pad the output
                // gradient by k-1-pad and correlate with the kernel flipped
                // and transposed in its channel axes.
                const int64_t gpad_amount = d.k - 1 - d.pad;
                std::vector<double> gpad =
                    pad_nchw(std::span<const double>(g, self.data.size()), d.n, d.co, d.ho, d.wo,
                             gpad_amount);
                std::vector<double> wflip(static_cast<size_t>(weight.numel()));
                const double* wsrc = weight.data().data();
                for (int64_t co = 0; co < d.co; ++co) {
                    for (int64_t ci = 0; ci < d.ci; ++ci) {
                        for (int64_t kh = 0; kh < d.k; ++kh) {
                            for (int64_t kw = 0; kw < d.k; ++kw) {
                                wflip[static_cast<size_t>(((ci * d.co + co) * d.k +
                                                           (d.k - 1 - kh)) *
                                                              d.k +
                                                          (d.k - 1 - kw))] =
                                    wsrc[((co * d.ci + ci) * d.k + kh) * d.k + kw];
                            }
                        }
                    }
                }
                ConvDims back{};
                back.n = d.n;
                back.ci = d.co;
                back.h = d.ho;
                back.w = d.wo;
                back.co = d.ci;
                back.k = d.k;
                back.pad = gpad_amount;
                back.stride = 1;
                back.ho = d.h;
                back.wo = d.w;
                std::vector<double> dx(static_cast<size_t>(input.numel()));
                conv_forward_s1(gpad.data(), wflip.data(), nullptr, dx.data(), back);
                input.node()->accumulate_grad(dx, "conv2d[input]");
            } else {
                std::vector<double> dxpad(static_cast<size_t>(d.n * d.ci * hp * wp), 0.0);
                for (int64_t n = 0; n < d.n; ++n) {
                    double* dxn = dxpad.data() + n * d.ci * hp * wp;
                    for (int64_t ci = 0; ci < d.ci; ++ci) {
                        double* dxc = dxn + ci * hp * wp;
                        for (int64_t co = 0; co < d.co; ++co) {
                            const double* gn = g + (n * d.co + co) * d.ho * d.wo;
                            const double* wc =
                                weight.data().data() + (co * d.ci + ci) * d.k * d.k;
                            for (int64_t kh = 0; kh < d.k; ++kh) {
                                for (int64_t kw = 0; kw < d.k; ++kw) {
                                    const double wv = wc[kh * d.k + kw];
                                    for (int64_t ho = 0; ho < d.ho; ++ho) {
                                        double* dxr = dxc + (ho * d.stride + kh) * wp + kw;
                                        const double* gr = gn + ho * d.wo;
                                        for (int64_t wo = 0; wo < d.wo; ++wo)
                                            dxr[wo * d.stride] += wv * gr[wo];
                                    }
                                }
                            }
                        }
                    }
                }
                std::vector<double> dx(static_cast<size_t>(input.numel()));
                for (int64_t i = 0; i < d.n * d.ci; ++i) {
                    const double* src = dxpad.data() + i * hp * wp + d.pad * wp + d.pad;
                    double* dst = dx.data() + i * d.h * d.w;
                    for (int64_t row = 0; row < d.h; ++row) {
                        std::copy(src, src + d.w, dst);
                        src += wp;
                        dst += d.w;
                    }
                }
                input.node()->accumulate_grad(dx, "conv2d[input]");
            }
        }
    };

    return detail::make_node({d.n, d.co, d.ho, d.wo}, std::move(out), {input, weight, bias},
                             std::move(backward));
}

// ---- transpose_conv2d ------------------------------------------------------

Tensor transpose_conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int64_t stride) {
    require(input.rank() == 4, "transpose_conv2d: input must be [N,Cin,H,W]");
    require(weight.rank() == 4, "transpose_conv2d: weight must be [Cin,Cout,k,k]");
    const int64_t n = input.extent(0);
    const int64_t ci = input.extent(1);
    const int64_t h = input.extent(2);
    const int64_t w = input.extent(3);
    const int64_t co = weight.extent(1);
    const int64_t k = weight.extent(2);
    require(weight.extent(0) == ci, "transpose_conv2d: input channels " + std::to_string(ci) +
                                        " do not match weight " + shape_to_string(weight.shape()));
    require(weight.extent(3) == k, "transpose_conv2d: kernel must be square");
    require(stride >= 1 && k == stride,
            "transpose_conv2d: kernel size must equal stride for exact upsampling");
    require(bias.rank() == 1 && bias.extent(0) == co, "transpose_conv2d: bias must be [Cout]");
    const int64_t ho = h * stride;
    const int64_t wo = w * stride;

    std::vector<double> out(static_cast<size_t>(n * co * ho * wo));
    for (int64_t in = 0; in < n; ++in) {
        for (int64_t c = 0; c < co; ++c) {
            double* on = out.data() + (in * co + c) * ho * wo;
            std::fill(on, on + ho * wo, bias.data()[static_cast<size_t>(c)]);
        }
    }
    // k == stride: every output cell receives exactly one input contribution
    // per input channel, so this scatter never overlaps.
    for (int64_t in = 0; in < n; ++in) {
        for (int64_t c = 0; c < ci; ++c) {
            const double* xc = input.data().data() + (in * ci + c) * h * w;
            for (int64_t oc = 0; oc < co; ++oc) {
                double* on = out.data() + (in * co + oc) * ho * wo;
                const double* wc = weight.data().data() + (c * co + oc) * k * k;
                for (int64_t kh = 0; kh < k; ++kh) {
                    for (int64_t kw = 0; kw < k; ++kw) {
                        const double wv = wc[kh * k + kw];
                        for (int64_t y = 0; y < h; ++y) {
                            const double* xr = xc + y * w;
                            double* orow = on + (y * stride + kh) * wo + kw;
                            for (int64_t x = 0; x < w; ++x) orow[x * stride] += wv * xr[x];
                        }
                    }
                }
            }
        }
    }
    check_finite(out, "transpose_conv2d");

    auto backward = [input, weight, bias, n, ci, h, w, co, k, stride, ho,
                     wo](detail::TensorNode& self) {
        const double* g = self.grad.data();

        if (bias.requires_grad()) {
            std::vector<double> db(static_cast<size_t>(co), 0.0);
            for (int64_t in = 0; in < n; ++in) {
                for (int64_t c = 0; c < co; ++c) {
                    const double* gr = g + (in * co + c) * ho * wo;
                    double acc = 0.0;
                    for (int64_t i = 0; i < ho * wo; ++i) acc += gr[i];
                    db[static_cast<size_t>(c)] += acc;
                }
            }
            bias.node()->accumulate_grad(db, "transpose_conv2d[bias]");
        }

        if (weight.requires_grad()) {
            std::vector<double> dw(static_cast<size_t>(weight.numel()), 0.0);
            for (int64_t in = 0; in < n; ++in) {
                for (int64_t c = 0; c < ci; ++c) {
                    const double* xc = input.data().data() + (in * ci + c) * h * w;
                    for (int64_t oc = 0; oc < co; ++oc) {
                        const double* gn = g + (in * co + oc) * ho * wo;
                        double* dwc = dw.data() + (c * co + oc) * k * k;
                        for (int64_t kh = 0; kh < k; ++kh) {
                            for (int64_t kw = 0; kw < k; ++kw) {
                                double acc = 0.0;
                                for (int64_t y = 0; y < h; ++y) {
                                    const double* xr = xc + y * w;
                                    const double* gr = gn + (y * stride + kh) * wo + kw;
                                    for (int64_t x = 0; x < w; ++x) acc += xr[x] * gr[x * stride];
                                }
                                dwc[kh * k + kw] += acc;
                            }
                        }
                    }
                }
            }
            weight.node()->accumulate_grad(dw, "transpose_conv2d[weight]");
        }

        if (input.requires_grad()) {
            std::vector<double> dx(static_cast<size_t>(input.numel()), 0.0);
            for (int64_t in = 0; in < n; ++in) {
                for (int64_t c = 0; c < ci; ++c) {
                    double* dxc = dx.data() + (in * ci + c) * h * w;
                    for (int64_t oc = 0; oc < co; ++oc) {
                        const double* gn = g + (in * co + oc) * ho * wo;
                        const double* wc = weight.data().data() + (c * co + oc) * k * k;
                        for (int64_t kh = 0; kh < k; ++kh) {
                            for (int64_t kw = 0; kw < k; ++kw) {
                                const double wv = wc[kh * k + kw];
                                for (int64_t y = 0; y < h; ++y) {
                                    double* dxr = dxc + y * w;
                                    const double* gr = gn + (y * stride + kh) * wo + kw;
                                    for (int64_t x = 0; x < w; ++x) dxr[x] += wv * gr[x * stride];
                                }
                            }
                        }
                    }
                }
            }
            input.node()->accumulate_grad(dx, "transpose_conv2d[input]");
        }
    };

    return detail::make_node({n, co, ho, wo}, std::move(out), {input, weight, bias},
                             std::move(backward));
}

// ---- avg_pool2 --------------------------------------------------------------

Tensor avg_pool2(const Tensor& input) {
    require(input.rank() == 4, "avg_pool2: input must be [N,C,H,W]");
    const int64_t n = input.extent(0);
    const int64_t c = input.extent(1);
    const int64_t h = input.extent(2);
    const int64_t w = input.extent(3);
    require(h % 2 == 0 && w % 2 == 0, "avg_pool2: spatial extents must be even, got " +
                                          shape_to_string(input.shape()));
    const int64_t ho = h / 2;
    const int64_t wo = w / 2;

    std::vector<double> out(static_cast<size_t>(n * c * ho * wo));
    for (int64_t i = 0; i < n * c; ++i) {
        const double* xc = input.data().data() + i * h * w;
        double* oc = out.data() + i * ho * wo;
        for (int64_t y = 0; y < ho; ++y) {
            const double* r0 = xc + (2 * y) * w;
            const double* r1 = xc + (2 * y + 1) * w;
            double* orow = oc + y * wo;
            for (int64_t x = 0; x < wo; ++x) {
                orow[x] = (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]) * 0.25;
            }
        }
    }
    check_finite(out, "avg_pool2");

    auto backward = [input, n, c, h, w, ho, wo](detail::TensorNode& self) {
        if (!input.requires_grad()) return;
        const double* g = self.grad.data();
        std::vector<double> dx(static_cast<size_t>(input.numel()));
        for (int64_t i = 0; i < n * c; ++i) {
            const double* gc = g + i * ho * wo;
            double* dxc = dx.data() + i * h * w;
            for (int64_t y = 0; y < ho; ++y) {
                const double* grow = gc + y * wo;
                double* r0 = dxc + (2 * y) * w;
                double* r1 = dxc + (2 * y + 1) * w;
                for (int64_t x = 0; x < wo; ++x) {
                    const double v = grow[x] * 0.25;
                    r0[2 * x] = v;
                    r0[2 * x + 1] = v;
                    r1[2 * x] = v;
                    r1[2 * x + 1] = v;
                }
            }
        }
        input.node()->accumulate_grad(dx, "avg_pool2[input]");
    };

    return detail::make_node({n, c, ho, wo}, std::move(out), {input}, std::move(backward));
}

// ---- concat_channels ---------------------------------------------------------

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require(a.rank() == 4 && b.rank() == 4, "concat_channels: inputs must be [N,C,H,W]");
    const int64_t n = a.extent(0);
    const int64_t ca = a.extent(1);
    const int64_t cb = b.extent(1);
    const int64_t h = a.extent(2);
    const int64_t w = a.extent(3);
    require(b.extent(0) == n && b.extent(2) == h && b.extent(3) == w,
            "concat_channels: batch/spatial mismatch between " + shape_to_string(a.shape()) +
                " and " + shape_to_string(b.shape()));
    const int64_t cc = ca + cb;
    const int64_t plane = h * w;

    std::vector<double> out(static_cast<size_t>(n * cc * plane));
    for (int64_t in = 0; in < n; ++in) {
        double* dst = out.data() + in * cc * plane;
        const double* pa = a.data().data() + in * ca * plane;
        const double* pb = b.data().data() + in * cb * plane;
        std::copy(pa, pa + ca * plane, dst);
        std::copy(pb, pb + cb * plane, dst + ca * plane);
    }
    check_finite(out, "concat_channels");

    auto backward = [a, b, n, ca, cb, plane, cc](detail::TensorNode& self) {
        const double* g = self.grad.data();
        if (a.requires_grad()) {
            std::vector<double> ga(static_cast<size_t>(n * ca * plane));
            for (int64_t in = 0; in < n; ++in) {
                const double* src = g + in * cc * plane;
                std::copy(src, src + ca * plane, ga.data() + in * ca * plane);
            }
            a.node()->accumulate_grad(ga, "concat_channels[a]");
        }
        if (b.requires_grad()) {
            std::vector<double> gb(static_cast<size_t>(n * cb * plane));
            for (int64_t in = 0; in < n; ++in) {
                const double* src = g + in * cc * plane + ca * plane;
                std::copy(src, src + cb * plane, gb.data() + in * cb * plane);
            }
            b.node()->accumulate_grad(gb, "concat_channels[b]");
        }
    };

    return detail::make_node({n, cc, h, w}, std::move(out), {a, b}, std::move(backward));
}

// ---- relu -------------------------------------------------------------------

Tensor relu(const Tensor& input) {
    std::vector<double> out(input.data().begin(), input.data().end());
    for (double& v : out) v = v > 0.0 ? v : 0.0;
    check_finite(out, "relu");

    auto backward = [input](detail::TensorNode& self) {
        if (!input.requires_grad()) return;
        const auto x = input.data();
        std::vector<double> dx(x.size());
        for (size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? self.grad[i] : 0.0;
        input.node()->accumulate_grad(dx, "relu[input]");
    };

    return detail::make_node(input.shape(), std::move(out), {input}, std::move(backward));
}

// ---- mse_loss ----------------------------------------------------------------

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    require(pred.shape() == target.shape(), "mse_loss: shape mismatch " +
                                                shape_to_string(pred.shape()) + " vs " +
                                                shape_to_string(target.shape()));
    const auto p = pred.data();
    const auto t = target.data();
    require(!p.empty(), "mse_loss: empty tensors");
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        const double diff = p[i] - t[i];
        acc += diff * diff;
    }
    const double count = static_cast<double>(p.size());
    std::vector<double> out{acc / count};
    check_finite(out, "mse_loss");

    auto backward = [pred, target, count](detail::TensorNode& self) {
        const double scale = 2.0 / count * self.grad[0];
        const auto p = pred.data();
        const auto t = target.data();
        if (pred.requires_grad()) {
            std::vector<double> dp(p.size());
            for (size_t i = 0; i < p.size(); ++i) dp[i] = scale * (p[i] - t[i]);
            pred.node()->accumulate_grad(dp, "mse_loss[pred]");
        }
        if (target.requires_grad()) {
            std::vector<double> dt(t.size());
            for (size_t i = 0; i < t.size(); ++i) dt[i] = -scale * (p[i] - t[i]);
            target.node()->accumulate_grad(dt, "mse_loss[target]");
        }
    };

    return detail::make_node({}, std::move(out), {pred, target}, std::move(backward));
}

// ---- sum_all -----------------------------------------------------------------

Tensor sum_all(const Tensor& input) {
    double acc = 0.0;
    for (double v : input.data()) acc += v;
    std::vector<double> out{acc};
    check_finite(out, "sum_all");

    auto backward = [input](detail::TensorNode& self) {
        if (!input.requires_grad()) return;
        std::vector<double> dx(static_cast<size_t>(input.numel()), self.grad[0]);
        input.node()->accumulate_grad(dx, "sum_all[input]");
    };

    return detail::make_node({}, std::move(out), {input}, std::move(backward));
}

// ---- pad / crop --------------------------------------------------------------

Tensor pad_spatial(const Tensor& input, int64_t pad_bottom, int64_t pad_right) {
    require(input.rank() == 4, "pad_spatial: input must be [N,C,H,W]");
    require(pad_bottom >= 0 && pad_right >= 0, "pad_spatial: negative padding");
    const int64_t n = input.extent(0);
    const int64_t c = input.extent(1);
    const int64_t h = input.extent(2);
    const int64_t w = input.extent(3);
    const int64_t ho = h + pad_bottom;
    const int64_t wo = w + pad_right;

    std::vector<double> out(static_cast<size_t>(n * c * ho * wo), 0.0);
    for (int64_t i = 0; i < n * c; ++i) {
        const double* src = input.data().data() + i * h * w;
        double* dst = out.data() + i * ho * wo;
        for (int64_t y = 0; y < h; ++y) std::copy(src + y * w, src + (y + 1) * w, dst + y * wo);
    }

    auto backward = [input, n, c, h, w, ho, wo](detail::TensorNode& self) {
        if (!input.requires_grad()) return;
        std::vector<double> dx(static_cast<size_t>(input.numel()));
        for (int64_t i = 0; i < n * c; ++i) {
            const double* src = self.grad.data() + i * ho * wo;
            double* dst = dx.data() + i * h * w;
            for (int64_t y = 0; y < h; ++y) std::copy(src + y * wo, src + y * wo + w, dst + y * w);
        }
        input.node()->accumulate_grad(dx, "pad_spatial[input]");
    };

    return detail::make_node({n, c, ho, wo}, std::move(out), {input}, std::move(backward));
}

Tensor crop_spatial(const Tensor& input, int64_t height, int64_t width) {
    require(input.rank() == 4, "crop_spatial: input must be [N,C,H,W]");
    const int64_t n = input.extent(0);
    const int64_t c = input.extent(1);
    const int64_t h = input.extent(2);
    const int64_t w = input.extent(3);
    require(height >= 1 && height <= h && width >= 1 && width <= w,
            "crop_spatial: crop larger than input");

    std::vector<double> out(static_cast<size_t>(n * c * height * width));
    for (int64_t i = 0; i < n * c; ++i) {
        const double* src = input.data().data() + i * h * w;
        double* dst = out.data() + i * height * width;
        for (int64_t y = 0; y < height; ++y)
            std::copy(src + y * w, src + y * w + width, dst + y * width);
    }

    auto backward = [input, n, c, h, w, height, width](detail::TensorNode& self) {
        if (!input.requires_grad()) return;
        std::vector<double> dx(static_cast<size_t>(input.numel()), 0.0);
        for (int64_t i = 0; i < n * c; ++i) {
            const double* src = self.grad.data() + i * height * width;
            double* dst = dx.data() + i * h * w;
            for (int64_t y = 0; y < height; ++y)
                std::copy(src + y * width, src + (y + 1) * width, dst + y * w);
        }
        input.node()->accumulate_grad(dx, "crop_spatial[input]");
    };

    return detail::make_node({n, c, height, width}, std::move(out), {input}, std::move(backward));
}

Tensor clamp01(const Tensor& input) {
    std::vector<double> out(input.data().begin(), input.data().end());
    for (double& v : out) v = std::clamp(v, 0.0, 1.0);
    return Tensor::from_vector(std::move(out), input.shape(), false);
}

}  // namespace gridflow
