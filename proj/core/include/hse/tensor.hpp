#pragma once

// Minimal dense tensors with a single-use reverse-mode tape.
//
// Values are 64-bit floats in row-major order. A Tape records every primitive
// applied to its Vars; backward() replays the record in reverse and writes
// dLoss/dParam into the grad buffer of every bound Tensor with requires_grad.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hse::tk {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

struct Tensor {
    Shape shape;
    std::vector<double> values;
    bool requires_grad = false;
    std::optional<std::vector<double>> grad;

    Tensor() = default;
    /// Throws ShapeError unless product(shape) == values.size().
    Tensor(Shape shape, std::vector<double> values);

    static Tensor zeros(Shape shape);
    static Tensor scalar(double value);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rank() const noexcept { return shape.size(); }
    std::size_t size() const noexcept { return values.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    /// Value of a tensor holding exactly one element.
    double item() const;
    double at(std::size_t r, std::size_t c) const;
    std::span<const double> row(std::size_t r) const;

    /// Equality of shape and values. Gradient state is ignored.
    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape == b.shape && a.values == b.values;
    }
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while its tape lives.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape; }
    double item() const { return value().item(); }
    Tape& tape() const;
    bool valid() const noexcept { return tape_ != nullptr; }
    std::uint32_t id() const noexcept { return id_; }

private:
    friend class Tape;
    Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;
};

/// What a primitive's backward function sees. `in_grad[i]` is null when input
/// i does not need a gradient; otherwise it points at a zero-initialised
/// accumulator of input i's size which the function must add into.
struct BackwardArgs {
    std::span<const double> grad_out;
    const Tensor& out;
    std::span<const Tensor* const> in;
    std::span<double* const> in_grad;
};

using BackwardFn = std::function<void(const BackwardArgs&)>;

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Registers a leaf. When `t.requires_grad` is set, backward() writes the
    /// gradient into `t.grad`; `t` must outlive the backward call. Registering
    /// the same tensor twice returns the same Var.
    Var input(Tensor& t);
    /// Registers a leaf that never receives a gradient.
    Var constant(Tensor t);
    /// Records a primitive. Every input must belong to this tape. `backward` is
    /// only materialised when some input needs a gradient.
    template <class F>
    Var record(Tensor value, std::span<const Var> inputs, F&& backward) {
        if (!any_needs_grad(inputs)) return record_constant(std::move(value));
        return record_impl(std::move(value), inputs, BackwardFn(std::forward<F>(backward)));
    }

    /// Populates gradients of every bound requires_grad leaf with dLoss/dLeaf.
    /// Throws ContractError for non-scalar loss or on a second call.
    void backward(Var loss);

    /// Gradient accumulated at a node after backward(); empty when the node
    /// was not on any path to the loss.
    std::span<const double> grad(Var v) const;

    /// Folds the branch taken by a piecewise primitive (hinge side, max winner)
    /// into branch_signature(), so callers can tell when two evaluations of
    /// the same graph straddle a kink.
    void note_branch(std::uint64_t choice) noexcept {
        branches_ = (branches_ ^ (choice + 1)) * 1099511628211ULL;
    }
    std::uint64_t branch_signature() const noexcept { return branches_; }

    bool spent() const noexcept { return spent_; }
    std::size_t size() const noexcept { return nodes_.size(); }

private:
    friend class Var;

    struct Node {
        Tensor value;
        std::vector<std::uint32_t> inputs;
        BackwardFn backward;
        std::vector<double> grad;
        Tensor* bound = nullptr;
        bool needs_grad = false;
    };

    const Node& node(Var v) const;
    Var push(Node node);
    bool any_needs_grad(std::span<const Var> inputs) const;
    Var record_constant(Tensor value);
    Var record_impl(Tensor value, std::span<const Var> inputs, BackwardFn backward);

    std::deque<Node> nodes_;
    std::unordered_map<const Tensor*, std::uint32_t> bound_;
    bool spent_ = false;
    std::uint64_t branches_ = 1469598103934665603ULL;
};

// Primitives. Every primitive records itself on the tape of its first operand.

enum class PointwiseOp { add, sub, mul, sigmoid, tanh, relu_hinge, square };

/// Elementwise op; binary ops require equal shapes.
Var pointwise(PointwiseOp op, std::span<const Var> inputs);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu_hinge(Var a);
Var square(Var a);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);

/// [m x k] . [k x n] -> [m x n]; a rank-1 right operand [k] yields [m].
Var matmul(Var a, Var b);

enum class ReduceOp { sum, mean, max };

/// Without an axis, sum and mean reduce to a scalar. max always needs an axis
/// and routes its gradient to the first attaining index along that axis.
Var reduce(ReduceOp op, Var t, std::optional<std::size_t> axis = std::nullopt);
Var sum(Var t);
Var mean(Var t);
Var max_over_axis(Var t, std::size_t axis);

/// Stacks same-shape tensors along a new leading axis.
Var stack(std::span<const Var> items);
/// Row `index` of a rank-2 tensor as a rank-1 tensor.
Var row(Var m, std::size_t index);
/// Same value, cut from the gradient graph.
Var detach(Var a);
/// Pairwise cosine similarities between the rows of a [n x d] and b [m x d].
/// Throws DegenerateInputError for a zero-norm row.
Var cosine_matrix(Var a, Var b);

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    /// Lower bound on the relative-error denominator max(|analytic|, |numeric|),
    /// multiplied by max(1, |f|) since difference roundoff grows with |f|.
    double denominator_floor = 1e-6;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t coordinates = 0;
    std::size_t worst_param = 0;
    std::size_t worst_index = 0;
    /// Coordinates left out because f(p+h) or f(p-h) took a different branch
    /// than f(p); central differences are meaningless across a kink.
    std::size_t kinks = 0;
    bool passed = true;
};

/// Compares analytic gradients against central differences (f(p+h)-f(p-h))/2h
/// for every coordinate of every tensor in `params`. `f` must register the
/// params on the given tape via Tape::input and return a scalar.
GradCheckReport finite_diff_check(const std::function<Var(Tape&)>& f,
                                  std::span<Tensor* const> params,
                                  const GradCheckOptions& options = {});

}  // namespace hse::tk
