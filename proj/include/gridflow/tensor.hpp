#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gridflow/errors.hpp"
#include "gridflow/rng.hpp"

namespace gridflow {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class Tensor;

namespace detail {

// One node of the (fixed-op) reverse-mode graph. Ops create nodes through
// make_node; the backward function reads self.grad and accumulates into the
// parents' grad buffers.
struct TensorNode {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // allocated lazily, same length as data
    std::vector<Tensor> parents;
    std::function<void(TensorNode&)> backward_fn;

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    void ensure_grad();
    void accumulate_grad(std::span<const double> g, const char* op_name);
};

Tensor make_node(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                 std::function<void(TensorNode&)> backward_fn);

}  // namespace detail

// Dense n-dimensional array of doubles with optional gradient tracking.
// Cheap to copy: a Tensor is a shared handle to its storage node.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_vector(std::vector<double> values, Shape shape, bool requires_grad = false);
    // Uniform in [-bound, bound], drawn sequentially from rng.
    static Tensor uniform(Shape shape, double bound, Rng& rng, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int64_t rank() const { return static_cast<int64_t>(shape().size()); }
    int64_t extent(int64_t dim) const { return shape().at(static_cast<size_t>(dim)); }
    int64_t numel() const;
    bool requires_grad() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    // Empty span when no gradient has been accumulated.
    std::span<const double> grad() const;
    std::span<double> mutable_grad();

    double item() const;  // numel() == 1 only

    void zero_grad();
    // Reverse-mode sweep from a scalar root (seed gradient 1.0).
    void backward();

    // Copy of the values with no graph attached.
    Tensor detached() const;

    detail::TensorNode* node() const { return node_.get(); }

private:
    friend Tensor detail::make_node(Shape, std::vector<double>, std::vector<Tensor>,
                                    std::function<void(detail::TensorNode&)>);
    std::shared_ptr<detail::TensorNode> node_;
};

// ---- operations -----------------------------------------------------------
// All ops validate shapes, reject non-finite results, and are deterministic:
// fixed loop order, no unordered reductions.

// Cross-correlation (no kernel flip). input [N,Cin,H,W], weight
// [Cout,Cin,k,k] with k odd, bias [Cout]. Output spatial extent is
// floor((H + 2*padding - k) / stride) + 1.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int64_t padding, int64_t stride);

// Adjoint of a stride-s convolution with k == s (no output overlap), plus
// bias. input [N,Cin,H,W], weight [Cin,Cout,s,s], bias [Cout]; output is
// [N,Cout,s*H,s*W]. The model uses stride 2 everywhere.
Tensor transpose_conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int64_t stride = 2);

// Mean over non-overlapping 2x2 windows; H and W must be even.
Tensor avg_pool2(const Tensor& input);

// Channel concatenation of [N,Ca,H,W] and [N,Cb,H,W].
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Elementwise max(x, 0); subgradient at 0 is 0.
Tensor relu(const Tensor& input);

// Mean over all elements of the squared difference; scalar output.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

// Sum of all elements; scalar output.
Tensor sum_all(const Tensor& input);

// Zero padding at the bottom/right edges, and its inverse crop to the
// top-left region. Used to make odd spatial extents divisible by 2^depth.
Tensor pad_spatial(const Tensor& input, int64_t pad_bottom, int64_t pad_right);
Tensor crop_spatial(const Tensor& input, int64_t height, int64_t width);

// Detached copy with values clamped to [0, 1]. Inference-time only.
Tensor clamp01(const Tensor& input);

}  // namespace gridflow
