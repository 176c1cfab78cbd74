#include "t1/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace t1 {

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

namespace detail {
void Node::ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), real_t(0));
}
}  // namespace detail

using detail::Node;

bool all_finite(std::span<const real_t> v) {
    for (real_t x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

static void validate_shape(const Shape& s, const char* who) {
    if (s.empty()) throw ShapeError(strf("%s: empty shape", who));
    for (int64_t d : s) {
        if (d <= 0) throw ShapeError(strf("%s: nonpositive dimension in %s", who, shape_str(s).c_str()));
    }
}

static std::shared_ptr<Node> new_leaf(Shape shape, std::vector<real_t> data, bool requires_grad) {
    validate_shape(shape, "Tensor");
    if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
        throw ShapeError(strf("Tensor: shape %s does not match data length %zu",
                              shape_str(shape).c_str(), data.size()));
    }
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto numel = shape_numel(shape);
    return wrap(new_leaf(std::move(shape), std::vector<real_t>(static_cast<size_t>(numel), real_t(0)),
                         requires_grad));
}

Tensor Tensor::full(Shape shape, real_t v) {
    auto numel = shape_numel(shape);
    return wrap(new_leaf(std::move(shape), std::vector<real_t>(static_cast<size_t>(numel), v), false));
}

Tensor Tensor::from_vector(Shape shape, std::vector<real_t> data, bool requires_grad) {
    return wrap(new_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::randn(Shape shape, Rng& rng, real_t stddev) {
    auto numel = shape_numel(shape);
    std::vector<real_t> v(static_cast<size_t>(numel));
    for (auto& x : v) x = static_cast<real_t>(rng.normal()) * stddev;
    return wrap(new_leaf(std::move(shape), std::move(v), false));
}

Tensor Tensor::scalar(real_t v) { return from_vector({1}, {v}); }

Tensor Tensor::wrap(std::shared_ptr<Node> n) {
    Tensor t;
    t.n_ = std::move(n);
    return t;
}

static const Node& deref(const std::shared_ptr<Node>& n, const char* who) {
    if (!n) throw Error(strf("%s: undefined tensor", who));
    return *n;
}

const Shape& Tensor::shape() const { return deref(n_, "shape").shape; }
int64_t Tensor::numel() const { return deref(n_, "numel").numel(); }

std::span<const real_t> Tensor::data() const {
    const Node& n = deref(n_, "data");
    return {n.value.data(), n.value.size()};
}

std::span<real_t> Tensor::data() {
    deref(n_, "data");
    return {n_->value.data(), n_->value.size()};
}

real_t Tensor::item() const {
    const Node& n = deref(n_, "item");
    if (n.numel() != 1) throw ShapeError(strf("item: tensor has %lld elements", (long long)n.numel()));
    return n.value[0];
}

bool Tensor::requires_grad() const { return deref(n_, "requires_grad").requires_grad; }

void Tensor::set_requires_grad(bool on) {
    deref(n_, "set_requires_grad");
    if (!n_->op.empty()) throw Error("set_requires_grad: only valid on leaf tensors");
    n_->requires_grad = on;
}

std::span<const real_t> Tensor::grad() const {
    const Node& n = deref(n_, "grad");
    if (n.grad.empty()) {
        static const std::vector<real_t> empty;
        return {empty.data(), size_t(0)};
    }
    return {n.grad.data(), n.grad.size()};
}

std::span<real_t> Tensor::grad_mut() {
    deref(n_, "grad_mut");
    n_->ensure_grad();
    return {n_->grad.data(), n_->grad.size()};
}

void Tensor::zero_grad() {
    deref(n_, "zero_grad");
    std::fill(n_->grad.begin(), n_->grad.end(), real_t(0));
}

Tensor Tensor::detach() const {
    const Node& n = deref(n_, "detach");
    return from_vector(n.shape, n.value, false);
}

// ---- graph construction --------------------------------------------------

static Tensor make_op(const char* op, Shape shape, std::vector<real_t> value,
                      std::vector<std::shared_ptr<Node>> parents,
                      std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->op = op;
    for (auto& p : parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    n->parents = std::move(parents);
    if (n->requires_grad) n->backward_fn = std::move(backward_fn);
    if (finite_checks_enabled() && !all_finite(n->value)) {
        throw NumericError(strf("%s: non-finite value in output %s", op, shape_str(n->shape).c_str()));
    }
    return Tensor::wrap(std::move(n));
}

GradTape::GradTape(const Tensor& root) : root_(root.node()) {
    if (!root_) throw Error("GradTape: undefined root");
    if (root_->numel() != 1) throw ShapeError("GradTape: loss must be scalar");
    if (!root_->requires_grad) throw Error("GradTape: root does not require grad");

    // Iterative post-order DFS; order_ ends up parents-before-consumers and
    // is walked in reverse, so each node's grad is complete before its own
    // backward runs, and each node is visited exactly once.
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root_.get(), 0);
    seen.insert(root_.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        bool descended = false;
        while (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
                descended = true;
                break;
            }
        }
        if (!descended && stack.back().second >= stack.back().first->parents.size()) {
            order_.push_back(stack.back().first);
            stack.pop_back();
        }
    }
}

void GradTape::backward() {
    for (Node* n : order_) n->ensure_grad();
    root_->grad[0] += real_t(1);
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

void backward(const Tensor& loss) { GradTape(loss).backward(); }

// ---- matmul kernels ------------------------------------------------------

// C[M,N] += A[M,K] * B[K,N]
static void mm_acc(const real_t* A, const real_t* B, real_t* C, int64_t M, int64_t K, int64_t N) {
    for (int64_t i = 0; i < M; ++i) {
        const real_t* a = A + i * K;
        real_t* c = C + i * N;
        for (int64_t k = 0; k < K; ++k) {
            const real_t av = a[k];
            const real_t* b = B + k * N;
            for (int64_t j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

// C[M,N] += A[M,K] * B[N,K]^T
// Four independent column accumulators; each output still sums in ascending k.
static void mm_nt_acc(const real_t* A, const real_t* B, real_t* C, int64_t M, int64_t K, int64_t N) {
    for (int64_t i = 0; i < M; ++i) {
        const real_t* a = A + i * K;
        int64_t j = 0;
        for (; j + 4 <= N; j += 4) {
            const real_t* b0 = B + j * K;
            const real_t* b1 = b0 + K;
            const real_t* b2 = b1 + K;
            const real_t* b3 = b2 + K;
            real_t s0 = 0, s1 = 0, s2 = 0, s3 = 0;
            for (int64_t k = 0; k < K; ++k) {
                const real_t av = a[k];
                s0 += av * b0[k];
                s1 += av * b1[k];
                s2 += av * b2[k];
                s3 += av * b3[k];
            }
            real_t* c = C + i * N + j;
            c[0] += s0;
            c[1] += s1;
            c[2] += s2;
            c[3] += s3;
        }
        for (; j < N; ++j) {
            const real_t* b = B + j * K;
            real_t acc = 0;
            for (int64_t k = 0; k < K; ++k) acc += a[k] * b[k];
            C[i * N + j] += acc;
        }
    }
}

// C[K,N] += A[M,K]^T * B[M,N]
static void mm_tn_acc(const real_t* A, const real_t* B, real_t* C, int64_t M, int64_t K, int64_t N) {
    for (int64_t m = 0; m < M; ++m) {
        const real_t* a = A + m * K;
        const real_t* b = B + m * N;
        for (int64_t k = 0; k < K; ++k) {
            const real_t av = a[k];
            real_t* c = C + k * N;
            for (int64_t j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

// ---- elementwise ops -----------------------------------------------------

static void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(strf("%s: shape mismatch %s vs %s", op, shape_str(a.shape()).c_str(),
                              shape_str(b.shape()).c_str()));
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    auto av = a.data();
    auto bv = b.data();
    std::vector<real_t> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    return make_op("add", a.shape(), std::move(out), {a.node(), b.node()}, [](Node& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] += n.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    auto av = a.data();
    auto bv = b.data();
    std::vector<real_t> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    return make_op("sub", a.shape(), std::move(out), {a.node(), b.node()}, [](Node& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] -= n.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    auto av = a.data();
    auto bv = b.data();
    std::vector<real_t> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return make_op("mul", a.shape(), std::move(out), {a.node(), b.node()}, [](Node& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] += n.grad[i] * pa.value[i];
        }
    });
}

Tensor scale(const Tensor& a, real_t c) {
    auto av = a.data();
    std::vector<real_t> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
    return make_op("scale", a.shape(), std::move(out), {a.node()}, [c](Node& n) {
        auto& pa = *n.parents[0];
        pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * c;
    });
}

Tensor add_scalar(const Tensor& a, real_t c) {
    auto av = a.data();
    std::vector<real_t> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + c;
    return make_op("add_scalar", a.shape(), std::move(out), {a.node()}, [](Node& n) {
        auto& pa = *n.parents[0];
        pa.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
    });
}

// ---- matrix ops ----------------------------------------------------------

static void check_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw ShapeError(strf("%s: expected rank-2 tensor, got %s", op, shape_str(t.shape()).c_str()));
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    const int64_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
    if (b.dim(0) != K) {
        throw ShapeError(strf("matmul: inner dimensions differ, %s vs %s",
                              shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str()));
    }
    std::vector<real_t> out(static_cast<size_t>(M * N), real_t(0));
    mm_acc(a.data().data(), b.data().data(), out.data(), M, K, N);
    return make_op("matmul", {M, N}, std::move(out), {a.node(), b.node()}, [M, K, N](Node& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            mm_nt_acc(n.grad.data(), pb.value.data(), pa.grad.data(), M, N, K);
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            mm_tn_acc(pa.value.data(), n.grad.data(), pb.grad.data(), M, K, N);
        }
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_rank2(a, "matmul_nt");
    check_rank2(b, "matmul_nt");
    const int64_t M = a.dim(0), K = a.dim(1), N = b.dim(0);
    if (b.dim(1) != K) {
        throw ShapeError(strf("matmul_nt: inner dimensions differ, %s vs %s",
                              shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str()));
    }
    std::vector<real_t> out(static_cast<size_t>(M * N), real_t(0));
    mm_nt_acc(a.data().data(), b.data().data(), out.data(), M, K, N);
    return make_op("matmul_nt", {M, N}, std::move(out), {a.node(), b.node()}, [M, K, N](Node& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        // y = a b^T: da += g b, db += g^T a
        if (pa.requires_grad) {
            pa.ensure_grad();
            mm_acc(n.grad.data(), pb.value.data(), pa.grad.data(), M, N, K);
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            mm_tn_acc(n.grad.data(), pa.value.data(), pb.grad.data(), M, N, K);
        }
    });
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
    check_rank2(x, "add_rowvec");
    if (b.rank() != 1 || b.dim(0) != x.dim(1)) {
        throw ShapeError(strf("add_rowvec: bias %s does not match %s", shape_str(b.shape()).c_str(),
                              shape_str(x.shape()).c_str()));
    }
    const int64_t N = x.dim(0), D = x.dim(1);
    auto xv = x.data();
    auto bv = b.data();
    std::vector<real_t> out(xv.size());
    for (int64_t i = 0; i < N; ++i) {
        for (int64_t j = 0; j < D; ++j) out[i * D + j] = xv[i * D + j] + bv[j];
    }
    return make_op("add_rowvec", x.shape(), std::move(out), {x.node(), b.node()}, [N, D](Node& n) {
        auto& px = *n.parents[0];
        auto& pb = *n.parents[1];
        if (px.requires_grad) {
            px.ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) px.grad[i] += n.grad[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (int64_t i = 0; i < N; ++i) {
                for (int64_t j = 0; j < D; ++j) pb.grad[j] += n.grad[i * D + j];
            }
        }
    });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    check_rank2(a, "concat_cols");
    check_rank2(b, "concat_cols");
    if (a.dim(0) != b.dim(0)) {
        throw ShapeError(strf("concat_cols: row counts differ, %s vs %s",
                              shape_str(a.shape()).c_str(), shape_str(b.shape()).c_str()));
    }
    const int64_t N = a.dim(0), Da = a.dim(1), Db = b.dim(1);
    auto av = a.data();
    auto bv = b.data();
    std::vector<real_t> out(static_cast<size_t>(N * (Da + Db)));
    for (int64_t i = 0; i < N; ++i) {
        std::copy_n(av.data() + i * Da, Da, out.data() + i * (Da + Db));
        std::copy_n(bv.data() + i * Db, Db, out.data() + i * (Da + Db) + Da);
    }
    return make_op("concat_cols", {N, Da + Db}, std::move(out), {a.node(), b.node()},
                   [N, Da, Db](Node& n) {
                       auto& pa = *n.parents[0];
                       auto& pb = *n.parents[1];
                       const int64_t D = Da + Db;
                       if (pa.requires_grad) {
                           pa.ensure_grad();
                           for (int64_t i = 0; i < N; ++i) {
                               for (int64_t j = 0; j < Da; ++j) pa.grad[i * Da + j] += n.grad[i * D + j];
                           }
                       }
                       if (pb.requires_grad) {
                           pb.ensure_grad();
                           for (int64_t i = 0; i < N; ++i) {
                               for (int64_t j = 0; j < Db; ++j)
                                   pb.grad[i * Db + j] += n.grad[i * D + Da + j];
                           }
                       }
                   });
}

Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1) {
    check_rank2(x, "slice_cols");
    const int64_t N = x.dim(0), D = x.dim(1);
    if (c0 < 0 || c1 > D || c0 >= c1) {
        throw ShapeError(strf("slice_cols: range [%lld,%lld) invalid for %lld columns",
                              (long long)c0, (long long)c1, (long long)D));
    }
    const int64_t W = c1 - c0;
    auto xv = x.data();
    std::vector<real_t> out(static_cast<size_t>(N * W));
    for (int64_t i = 0; i < N; ++i) std::copy_n(xv.data() + i * D + c0, W, out.data() + i * W);
    return make_op("slice_cols", {N, W}, std::move(out), {x.node()}, [N, D, c0, W](Node& n) {
        auto& px = *n.parents[0];
        px.ensure_grad();
        for (int64_t i = 0; i < N; ++i) {
            for (int64_t j = 0; j < W; ++j) px.grad[i * D + c0 + j] += n.grad[i * W + j];
        }
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    validate_shape(shape, "reshape");
    if (shape_numel(shape) != x.numel()) {
        throw ShapeError(strf("reshape: %s has %lld elements, target %s needs %lld",
                              shape_str(x.shape()).c_str(), (long long)x.numel(),
                              shape_str(shape).c_str(), (long long)shape_numel(shape)));
    }
    std::vector<real_t> out(x.data().begin(), x.data().end());
    return make_op("reshape", std::move(shape), std::move(out), {x.node()}, [](Node& n) {
        auto& px = *n.parents[0];
        px.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) px.grad[i] += n.grad[i];
    });
}

// ---- row-structured ops --------------------------------------------------

Tensor softmax_rows(const Tensor& x) {
    check_rank2(x, "softmax_rows");
    const int64_t N = x.dim(0), D = x.dim(1);
    auto xv = x.data();
    std::vector<real_t> out(xv.size());
    for (int64_t i = 0; i < N; ++i) {
        const real_t* row = xv.data() + i * D;
        real_t mx = row[0];
        for (int64_t j = 1; j < D; ++j) mx = std::max(mx, row[j]);
        real_t denom = 0;
        for (int64_t j = 0; j < D; ++j) {
            const real_t e = std::exp(row[j] - mx);
            out[i * D + j] = e;
            denom += e;
        }
        const real_t inv = real_t(1) / denom;
        for (int64_t j = 0; j < D; ++j) out[i * D + j] *= inv;
    }
    return make_op("softmax_rows", x.shape(), std::move(out), {x.node()}, [N, D](Node& n) {
        auto& px = *n.parents[0];
        px.ensure_grad();
        for (int64_t i = 0; i < N; ++i) {
            const real_t* y = n.value.data() + i * D;
            const real_t* g = n.grad.data() + i * D;
            real_t dot = 0;
            for (int64_t j = 0; j < D; ++j) dot += g[j] * y[j];
            real_t* gx = px.grad.data() + i * D;
            for (int64_t j = 0; j < D; ++j) gx[j] += y[j] * (g[j] - dot);
        }
    });
}

Tensor layer_norm_rows(const Tensor& x, real_t eps) {
    check_rank2(x, "layer_norm_rows");
    const int64_t N = x.dim(0), D = x.dim(1);
    auto xv = x.data();
    std::vector<real_t> out(xv.size());
    std::vector<real_t> inv_std(static_cast<size_t>(N));
    for (int64_t i = 0; i < N; ++i) {
        const real_t* row = xv.data() + i * D;
        real_t mu = 0;
        for (int64_t j = 0; j < D; ++j) mu += row[j];
        mu /= real_t(D);
        real_t var = 0;
        for (int64_t j = 0; j < D; ++j) {
            const real_t d = row[j] - mu;
            var += d * d;
        }
        var /= real_t(D);  // population variance
        const real_t inv = real_t(1) / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(i)] = inv;
        for (int64_t j = 0; j < D; ++j) out[i * D + j] = (row[j] - mu) * inv;
    }
    return make_op("layer_norm_rows", x.shape(), std::move(out), {x.node()},
                   [N, D, inv_std = std::move(inv_std)](Node& n) {
                       auto& px = *n.parents[0];
                       px.ensure_grad();
                       for (int64_t i = 0; i < N; ++i) {
                           const real_t* y = n.value.data() + i * D;
                           const real_t* g = n.grad.data() + i * D;
                           real_t gmean = 0, gydot = 0;
                           for (int64_t j = 0; j < D; ++j) {
                               gmean += g[j];
                               gydot += g[j] * y[j];
                           }
                           gmean /= real_t(D);
                           gydot /= real_t(D);
                           const real_t inv = inv_std[static_cast<size_t>(i)];
                           real_t* gx = px.grad.data() + i * D;
                           for (int64_t j = 0; j < D; ++j)
                               gx[j] += inv * (g[j] - gmean - y[j] * gydot);
                       }
                   });
}

Tensor silu(const Tensor& x) {
    auto xv = x.data();
    std::vector<real_t> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) {
        const real_t s = real_t(1) / (real_t(1) + std::exp(-xv[i]));
        out[i] = xv[i] * s;
    }
    return make_op("silu", x.shape(), std::move(out), {x.node()}, [](Node& n) {
        auto& px = *n.parents[0];
        px.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            const real_t xi = px.value[i];
            const real_t s = real_t(1) / (real_t(1) + std::exp(-xi));
            px.grad[i] += n.grad[i] * s * (real_t(1) + xi * (real_t(1) - s));
        }
    });
}

Tensor gelu_tanh(const Tensor& x) {
    static constexpr real_t kC0 = real_t(0.7978845608028654);  // sqrt(2/pi)
    static constexpr real_t kC1 = real_t(0.044715);
    auto xv = x.data();
    std::vector<real_t> out(xv.size());
    for (size_t i = 0; i < out.size(); ++i) {
        const real_t xi = xv[i];
        const real_t u = kC0 * (xi + kC1 * xi * xi * xi);
        out[i] = real_t(0.5) * xi * (real_t(1) + std::tanh(u));
    }
    return make_op("gelu_tanh", x.shape(), std::move(out), {x.node()}, [](Node& n) {
        auto& px = *n.parents[0];
        px.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            const real_t xi = px.value[i];
            const real_t u = kC0 * (xi + kC1 * xi * xi * xi);
            const real_t th = std::tanh(u);
            const real_t sech2 = real_t(1) - th * th;
            const real_t du = kC0 * (real_t(1) + real_t(3) * kC1 * xi * xi);
            px.grad[i] += n.grad[i] * (real_t(0.5) * (real_t(1) + th) +
                                       real_t(0.5) * xi * sech2 * du);
        }
    });
}

Tensor sum(const Tensor& x) {
    auto xv = x.data();
    real_t acc = 0;
    for (real_t v : xv) acc += v;
    return make_op("sum", {1}, {acc}, {x.node()}, [](Node& n) {
        auto& px = *n.parents[0];
        px.ensure_grad();
        const real_t g = n.grad[0];
        for (auto& gx : px.grad) gx += g;
    });
}

Tensor mean_rows(const Tensor& x) {
    check_rank2(x, "mean_rows");
    const int64_t N = x.dim(0), D = x.dim(1);
    auto xv = x.data();
    std::vector<real_t> out(static_cast<size_t>(D), real_t(0));
    for (int64_t i = 0; i < N; ++i) {
        for (int64_t j = 0; j < D; ++j) out[j] += xv[i * D + j];
    }
    const real_t inv = real_t(1) / real_t(N);
    for (auto& v : out) v *= inv;
    return make_op("mean_rows", {D}, std::move(out), {x.node()}, [N, D, inv](Node& n) {
        auto& px = *n.parents[0];
        px.ensure_grad();
        for (int64_t i = 0; i < N; ++i) {
            for (int64_t j = 0; j < D; ++j) px.grad[i * D + j] += n.grad[j] * inv;
        }
    });
}

static void check_rowvec_pair(const Tensor& x, const Tensor& v, const char* op) {
    if (v.rank() != 1 || v.dim(0) != x.dim(1)) {
        throw ShapeError(strf("%s: vector %s does not match %s", op, shape_str(v.shape()).c_str(),
                              shape_str(x.shape()).c_str()));
    }
}

Tensor modulate_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    check_rank2(x, "modulate_rows");
    check_rowvec_pair(x, gamma, "modulate_rows");
    check_rowvec_pair(x, beta, "modulate_rows");
    const int64_t N = x.dim(0), D = x.dim(1);
    auto xv = x.data();
    auto gv = gamma.data();
    auto bv = beta.data();
    std::vector<real_t> out(xv.size());
    for (int64_t i = 0; i < N; ++i) {
        for (int64_t j = 0; j < D; ++j)
            out[i * D + j] = xv[i * D + j] * (real_t(1) + gv[j]) + bv[j];
    }
    return make_op("modulate_rows", x.shape(), std::move(out),
                   {x.node(), gamma.node(), beta.node()}, [N, D](Node& n) {
                       auto& px = *n.parents[0];
                       auto& pg = *n.parents[1];
                       auto& pb = *n.parents[2];
                       if (px.requires_grad) {
                           px.ensure_grad();
                           for (int64_t i = 0; i < N; ++i) {
                               for (int64_t j = 0; j < D; ++j)
                                   px.grad[i * D + j] +=
                                       n.grad[i * D + j] * (real_t(1) + pg.value[j]);
                           }
                       }
                       if (pg.requires_grad) {
                           pg.ensure_grad();
                           for (int64_t i = 0; i < N; ++i) {
                               for (int64_t j = 0; j < D; ++j)
                                   pg.grad[j] += n.grad[i * D + j] * px.value[i * D + j];
                           }
                       }
                       if (pb.requires_grad) {
                           pb.ensure_grad();
                           for (int64_t i = 0; i < N; ++i) {
                               for (int64_t j = 0; j < D; ++j) pb.grad[j] += n.grad[i * D + j];
                           }
                       }
                   });
}

Tensor add_gated_rows(const Tensor& x, const Tensor& branch, const Tensor& gate) {
    check_rank2(x, "add_gated_rows");
    check_same_shape(x, branch, "add_gated_rows");
    check_rowvec_pair(x, gate, "add_gated_rows");
    const int64_t N = x.dim(0), D = x.dim(1);
    auto xv = x.data();
    auto brv = branch.data();
    auto gv = gate.data();
    std::vector<real_t> out(xv.size());
    for (int64_t i = 0; i < N; ++i) {
        for (int64_t j = 0; j < D; ++j)
            out[i * D + j] = xv[i * D + j] + brv[i * D + j] * gv[j];
    }
    return make_op("add_gated_rows", x.shape(), std::move(out),
                   {x.node(), branch.node(), gate.node()}, [N, D](Node& n) {
                       auto& px = *n.parents[0];
                       auto& pbr = *n.parents[1];
                       auto& pg = *n.parents[2];
                       if (px.requires_grad) {
                           px.ensure_grad();
                           for (size_t i = 0; i < n.grad.size(); ++i) px.grad[i] += n.grad[i];
                       }
                       if (pbr.requires_grad) {
                           pbr.ensure_grad();
                           for (int64_t i = 0; i < N; ++i) {
                               for (int64_t j = 0; j < D; ++j)
                                   pbr.grad[i * D + j] += n.grad[i * D + j] * pg.value[j];
                           }
                       }
                       if (pg.requires_grad) {
                           pg.ensure_grad();
                           for (int64_t i = 0; i < N; ++i) {
                               for (int64_t j = 0; j < D; ++j)
                                   pg.grad[j] += n.grad[i * D + j] * pbr.value[i * D + j];
                           }
                       }
                   });
}

real_t max_abs_diff(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "max_abs_diff");
    auto av = a.data();
    auto bv = b.data();
    real_t m = 0;
    for (size_t i = 0; i < av.size(); ++i) m = std::max(m, std::abs(av[i] - bv[i]));
    return m;
}

}  // namespace t1
