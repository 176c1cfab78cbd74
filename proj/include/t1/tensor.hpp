#ifndef T1_TENSOR_HPP
#define T1_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "t1/common.hpp"
#include "t1/rng.hpp"

namespace t1 {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

// One graph node: the op output plus what backward needs. Leaf nodes (data
// and parameters) have no parents. The chain of parent pointers is the tape;
// GradTape linearizes it so backward visits each node exactly once.
struct Node {
    Shape shape;
    std::vector<real_t> value;
    std::vector<real_t> grad;  // sized lazily by GradTape
    bool requires_grad = false;
    std::string op;  // empty for leaves
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this->grad, accumulates into parents' grads.
    std::function<void(Node&)> backward_fn;

    int64_t numel() const { return static_cast<int64_t>(value.size()); }
    void ensure_grad();
};

}  // namespace detail

// Dense tensor handle with reverse-mode autodiff. Value semantics on the
// handle; the node is shared, so copies alias the same storage. Mutate data()
// only on tensors that have not yet been used as op inputs.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, real_t v);
    static Tensor from_vector(Shape shape, std::vector<real_t> data, bool requires_grad = false);
    static Tensor randn(Shape shape, Rng& rng, real_t stddev = real_t(1));
    static Tensor scalar(real_t v);

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const;
    int rank() const { return static_cast<int>(shape().size()); }
    int64_t dim(int i) const { return shape()[static_cast<size_t>(i)]; }
    int64_t numel() const;

    std::span<const real_t> data() const;
    std::span<real_t> data();
    real_t item() const;  // numel()==1 only

    bool requires_grad() const;
    void set_requires_grad(bool on);
    std::span<const real_t> grad() const;
    std::span<real_t> grad_mut();
    void zero_grad();

    // Detached copy of the values; drops graph history and grad flag.
    Tensor detach() const;

    std::shared_ptr<detail::Node> node() const { return n_; }
    static Tensor wrap(std::shared_ptr<detail::Node> n);

private:
    std::shared_ptr<detail::Node> n_;
};

// Linearized reverse pass. Builds reverse topological order over the subgraph
// that requires grad, then runs each node's backward exactly once.
class GradTape {
public:
    explicit GradTape(const Tensor& root);  // root must be scalar
    void backward();
    size_t node_count() const { return order_.size(); }

private:
    std::shared_ptr<detail::Node> root_;
    std::vector<detail::Node*> order_;  // topological, root last
};

// Convenience: GradTape(loss).backward().
void backward(const Tensor& loss);

// ---- ops ----------------------------------------------------------------
// All ops are pure in their inputs and validate shapes. Outputs are checked
// finite when finite_checks_enabled().

Tensor add(const Tensor& a, const Tensor& b);            // same shape
Tensor sub(const Tensor& a, const Tensor& b);            // same shape
Tensor mul(const Tensor& a, const Tensor& b);            // elementwise
Tensor scale(const Tensor& a, real_t c);
Tensor add_scalar(const Tensor& a, real_t c);

Tensor matmul(const Tensor& a, const Tensor& b);         // [M,K]x[K,N]
Tensor matmul_nt(const Tensor& a, const Tensor& b);      // a * b^T, [M,K]x[N,K]

Tensor add_rowvec(const Tensor& x, const Tensor& b);     // [N,D] + [D]
Tensor concat_cols(const Tensor& a, const Tensor& b);    // [N,Da]|[N,Db]
Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1);
Tensor reshape(const Tensor& x, Shape shape);

Tensor softmax_rows(const Tensor& x);                    // [N,D] rows
Tensor layer_norm_rows(const Tensor& x, real_t eps = real_t(1e-5));
Tensor silu(const Tensor& x);
Tensor gelu_tanh(const Tensor& x);

Tensor sum(const Tensor& x);                             // -> [1]
Tensor mean_rows(const Tensor& x);                       // [N,D] -> [D]

// x * (1 + gamma) + beta with gamma/beta broadcast over rows. The (1+gamma)
// parameterization keeps zero-initialized conditioning at identity scale.
Tensor modulate_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta);
// x + branch * gate with gate broadcast over rows.
Tensor add_gated_rows(const Tensor& x, const Tensor& branch, const Tensor& gate);

// ---- helpers (no graph) -------------------------------------------------

real_t max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(std::span<const real_t> v);

}  // namespace t1

#endif
