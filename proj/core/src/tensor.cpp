#include "hse/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hse/errors.hpp"

namespace hse::tk {

std::size_t element_count(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (element_count(shape) != values.size()) {
        throw ShapeError("tensor shape " + to_string(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
    }
}

Tensor Tensor::zeros(Shape shape) {
    const std::size_t n = element_count(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged matrix literal");
        values.insert(values.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(values));
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw ShapeError("rows() on non-matrix " + to_string(shape));
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw ShapeError("cols() on non-matrix " + to_string(shape));
    return shape[1];
}

double Tensor::item() const {
    if (values.size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape));
    return values[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

std::span<const double> Tensor::row(std::size_t r) const {
    const std::size_t c = cols();
    return std::span<const double>(values).subspan(r * c, c);
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const {
    if (!tape_) throw ContractError("use of an unbound Var");
    return tape_->node(*this).value;
}

Tape& Var::tape() const {
    if (!tape_) throw ContractError("use of an unbound Var");
    return *tape_;
}

const Tape::Node& Tape::node(Var v) const { return nodes_.at(v.id_); }

Var Tape::push(Node n) {
    if (spent_) throw ContractError("tape already ran backward; record on a fresh tape");
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::input(Tensor& t) {
    if (auto it = bound_.find(&t); it != bound_.end()) return Var(this, it->second);
    Node n;
    n.value = Tensor(t.shape, t.values);
    n.needs_grad = t.requires_grad;
    n.bound = t.requires_grad ? &t : nullptr;
    Var v = push(std::move(n));
    bound_.emplace(&t, v.id_);
    return v;
}

Var Tape::constant(Tensor t) {
    Node n;
    t.requires_grad = false;
    t.grad.reset();
    n.value = std::move(t);
    return push(std::move(n));
}

bool Tape::any_needs_grad(std::span<const Var> inputs) const {
    for (const Var& in : inputs) {
        if (in.tape_ != this) throw ContractError("operands belong to different tapes");
        if (nodes_[in.id_].needs_grad) return true;
    }
    return false;
}

Var Tape::record_constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::record_impl(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.inputs.reserve(inputs.size());
    for (const Var& in : inputs) n.inputs.push_back(in.id_);
    n.needs_grad = true;
    n.backward = std::move(backward);
    return push(std::move(n));
}

void Tape::backward(Var loss) {
    if (loss.tape_ != this) throw ContractError("loss belongs to a different tape");
    if (spent_) throw ContractError("backward() already called on this tape");
    if (!nodes_[loss.id_].value.shape.empty() && nodes_[loss.id_].value.size() != 1) {
        throw ContractError("backward() needs a scalar loss, got shape " +
                            to_string(nodes_[loss.id_].value.shape));
    }
    spent_ = true;

    nodes_[loss.id_].grad.assign(1, 1.0);
    std::vector<const Tensor*> in_values;
    std::vector<double*> in_grads;
    for (std::size_t id = loss.id_ + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.needs_grad || n.grad.empty() || !n.backward) continue;
        in_values.clear();
        in_grads.clear();
        for (std::uint32_t in : n.inputs) {
            Node& src = nodes_[in];
            in_values.push_back(&src.value);
            if (src.needs_grad) {
                if (src.grad.empty()) src.grad.assign(src.value.size(), 0.0);
                in_grads.push_back(src.grad.data());
            } else {
                in_grads.push_back(nullptr);
            }
        }
        n.backward(BackwardArgs{n.grad, n.value, in_values, in_grads});
    }

    for (Node& n : nodes_) {
        if (!n.bound) continue;
        if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
        n.bound->grad = n.grad;
    }
}

std::span<const double> Tape::grad(Var v) const { return node(v).grad; }

// ---------------------------------------------------------------------------
// Primitives

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape) {
        throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape) + " vs " +
                         to_string(b.shape));
    }
}

template <class Fwd, class Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
    const Tensor& x = a.value();
    Tensor out = Tensor::zeros(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = fwd(x.values[i]);
    // deriv(x, y) gives dy/dx from the input and output value.
    return a.tape().record(std::move(out), std::span<const Var>(&a, 1),
                           [deriv](const BackwardArgs& args) {
                               double* g = args.in_grad[0];
                               const auto& xv = args.in[0]->values;
                               const auto& yv = args.out.values;
                               for (std::size_t i = 0; i < xv.size(); ++i)
                                   g[i] += args.grad_out[i] * deriv(xv[i], yv[i]);
                           });
}

}  // namespace

Var add(Var a, Var b) {
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    require_same_shape(x, y, "add");
    Tensor out = Tensor::zeros(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = x.values[i] + y.values[i];
    const Var in[] = {a, b};
    return a.tape().record(std::move(out), in, [](const BackwardArgs& args) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (double* g = args.in_grad[k])
                for (std::size_t i = 0; i < args.grad_out.size(); ++i) g[i] += args.grad_out[i];
        }
    });
}

Var sub(Var a, Var b) {
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    require_same_shape(x, y, "sub");
    Tensor out = Tensor::zeros(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = x.values[i] - y.values[i];
    const Var in[] = {a, b};
    return a.tape().record(std::move(out), in, [](const BackwardArgs& args) {
        if (double* g = args.in_grad[0])
            for (std::size_t i = 0; i < args.grad_out.size(); ++i) g[i] += args.grad_out[i];
        if (double* g = args.in_grad[1])
            for (std::size_t i = 0; i < args.grad_out.size(); ++i) g[i] -= args.grad_out[i];
    });
}

Var mul(Var a, Var b) {
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    require_same_shape(x, y, "mul");
    Tensor out = Tensor::zeros(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = x.values[i] * y.values[i];
    const Var in[] = {a, b};
    return a.tape().record(std::move(out), in, [](const BackwardArgs& args) {
        const auto& xv = args.in[0]->values;
        const auto& yv = args.in[1]->values;
        if (double* g = args.in_grad[0])
            for (std::size_t i = 0; i < xv.size(); ++i) g[i] += args.grad_out[i] * yv[i];
        if (double* g = args.in_grad[1])
            for (std::size_t i = 0; i < xv.size(); ++i) g[i] += args.grad_out[i] * xv[i];
    });
}

Var sigmoid(Var a) {
    return unary(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
    return unary(
        a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu_hinge(Var a) {
    for (double x : a.value().values) a.tape().note_branch(x > 0.0);
    return unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var square(Var a) {
    return unary(
        a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var scale(Var a, double factor) {
    return unary(
        a, [factor](double x) { return factor * x; },
        [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
    return unary(
        a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var pointwise(PointwiseOp op, std::span<const Var> inputs) {
    const bool binary = op == PointwiseOp::add || op == PointwiseOp::sub || op == PointwiseOp::mul;
    if (inputs.size() != (binary ? 2u : 1u)) {
        throw ContractError("pointwise: wrong operand count " + std::to_string(inputs.size()));
    }
    switch (op) {
        case PointwiseOp::add: return add(inputs[0], inputs[1]);
        case PointwiseOp::sub: return sub(inputs[0], inputs[1]);
        case PointwiseOp::mul: return mul(inputs[0], inputs[1]);
        case PointwiseOp::sigmoid: return sigmoid(inputs[0]);
        case PointwiseOp::tanh: return tanh(inputs[0]);
        case PointwiseOp::relu_hinge: return relu_hinge(inputs[0]);
        case PointwiseOp::square: return square(inputs[0]);
    }
    throw ContractError("pointwise: unknown op");
}

Var matmul(Var a, Var b) {
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (x.rank() != 2 || (y.rank() != 1 && y.rank() != 2) || x.shape[1] != y.shape[0]) {
        throw ShapeError("matmul: incompatible shapes " + to_string(x.shape) + " and " +
                         to_string(y.shape));
    }
    const std::size_t m = x.shape[0];
    const std::size_t k = x.shape[1];
    const std::size_t n = y.rank() == 2 ? y.shape[1] : 1;
    Tensor out = Tensor::zeros(y.rank() == 2 ? Shape{m, n} : Shape{m});
    for (std::size_t i = 0; i < m; ++i) {
        double* o = out.values.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double xv = x.values[i * k + p];
            const double* yr = y.values.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) o[j] += xv * yr[j];
        }
    }
    const Var in[] = {a, b};
    return a.tape().record(std::move(out), in, [m, k, n](const BackwardArgs& args) {
        const auto& xv = args.in[0]->values;
        const auto& yv = args.in[1]->values;
        const auto& g = args.grad_out;
        if (double* gx = args.in_grad[0]) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * yv[p * n + j];
                    gx[i * k + p] += acc;
                }
        }
        if (double* gy = args.in_grad[1]) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double xip = xv[i * k + p];
                    for (std::size_t j = 0; j < n; ++j) gy[p * n + j] += xip * g[i * n + j];
                }
        }
    });
}

Var reduce(ReduceOp op, Var t, std::optional<std::size_t> axis) {
    const Tensor& x = t.value();
    if (!axis) {
        if (op == ReduceOp::max) throw ContractError("reduce(max) needs an axis");
        if (op == ReduceOp::mean && x.size() == 0) throw ShapeError("mean of an empty tensor");
        double acc = 0.0;
        for (double v : x.values) acc += v;
        const double factor = op == ReduceOp::mean ? 1.0 / static_cast<double>(x.size()) : 1.0;
        return t.tape().record(Tensor::scalar(acc * factor), std::span<const Var>(&t, 1),
                               [factor](const BackwardArgs& args) {
                                   const double g = args.grad_out[0] * factor;
                                   double* gx = args.in_grad[0];
                                   for (std::size_t i = 0; i < args.in[0]->size(); ++i) gx[i] += g;
                               });
    }

    if (*axis >= x.rank()) {
        throw ShapeError("reduce: axis " + std::to_string(*axis) + " out of range for shape " +
                         to_string(x.shape));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < *axis; ++d) outer *= x.shape[d];
    for (std::size_t d = *axis + 1; d < x.rank(); ++d) inner *= x.shape[d];
    const std::size_t len = x.shape[*axis];
    if (len == 0) throw ShapeError("reduce over an empty axis");

    Shape out_shape = x.shape;
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(*axis));
    Tensor out = Tensor::zeros(out_shape);
    // For max, remember the first attaining position along the axis.
    std::vector<std::size_t> argmax;
    if (op == ReduceOp::max) argmax.assign(out.size(), 0);

    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t dst = o * inner + in;
            const double* base = x.values.data() + o * len * inner + in;
            if (op == ReduceOp::max) {
                double best = base[0];
                std::size_t best_at = 0;
                for (std::size_t l = 1; l < len; ++l) {
                    if (base[l * inner] > best) {
                        best = base[l * inner];
                        best_at = l;
                    }
                }
                out.values[dst] = best;
                argmax[dst] = best_at;
                t.tape().note_branch(best_at);
            } else {
                double acc = 0.0;
                for (std::size_t l = 0; l < len; ++l) acc += base[l * inner];
                out.values[dst] = op == ReduceOp::mean ? acc / static_cast<double>(len) : acc;
            }
        }
    }

    return t.tape().record(
        std::move(out), std::span<const Var>(&t, 1),
        [op, outer, inner, len, argmax = std::move(argmax)](const BackwardArgs& args) {
            double* gx = args.in_grad[0];
            const double factor = op == ReduceOp::mean ? 1.0 / static_cast<double>(len) : 1.0;
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t in = 0; in < inner; ++in) {
                    const std::size_t src = o * inner + in;
                    const double g = args.grad_out[src];
                    double* base = gx + o * len * inner + in;
                    if (op == ReduceOp::max) {
                        base[argmax[src] * inner] += g;
                    } else {
                        for (std::size_t l = 0; l < len; ++l) base[l * inner] += g * factor;
                    }
                }
            }
        });
}

Var sum(Var t) { return reduce(ReduceOp::sum, t); }
Var mean(Var t) { return reduce(ReduceOp::mean, t); }
Var max_over_axis(Var t, std::size_t axis) { return reduce(ReduceOp::max, t, axis); }

Var stack(std::span<const Var> items) {
    if (items.empty()) throw ContractError("stack of zero tensors");
    const Shape& item_shape = items[0].shape();
    const std::size_t width = element_count(item_shape);
    Shape out_shape;
    out_shape.reserve(item_shape.size() + 1);
    out_shape.push_back(items.size());
    out_shape.insert(out_shape.end(), item_shape.begin(), item_shape.end());
    std::vector<double> values;
    values.reserve(items.size() * width);
    for (const Var& v : items) {
        require_same_shape(items[0].value(), v.value(), "stack");
        values.insert(values.end(), v.value().values.begin(), v.value().values.end());
    }
    return items[0].tape().record(Tensor(std::move(out_shape), std::move(values)), items,
                                  [width](const BackwardArgs& args) {
                                      for (std::size_t k = 0; k < args.in.size(); ++k) {
                                          if (double* g = args.in_grad[k])
                                              for (std::size_t i = 0; i < width; ++i)
                                                  g[i] += args.grad_out[k * width + i];
                                      }
                                  });
}

Var row(Var m, std::size_t index) {
    const Tensor& x = m.value();
    if (x.rank() != 2) throw ShapeError("row: expected a matrix, got " + to_string(x.shape));
    if (index >= x.shape[0]) {
        throw ShapeError("row " + std::to_string(index) + " out of range for " + to_string(x.shape));
    }
    const std::size_t width = x.shape[1];
    auto r = x.row(index);
    return m.tape().record(Tensor::vector({r.begin(), r.end()}), std::span<const Var>(&m, 1),
                           [index, width](const BackwardArgs& args) {
                               double* g = args.in_grad[0] + index * width;
                               for (std::size_t i = 0; i < width; ++i) g[i] += args.grad_out[i];
                           });
}

Var detach(Var a) { return a.tape().constant(Tensor(a.value().shape, a.value().values)); }

Var cosine_matrix(Var a, Var b) {
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (x.rank() != 2 || y.rank() != 2 || x.shape[1] != y.shape[1]) {
        throw ShapeError("cosine_matrix: incompatible shapes " + to_string(x.shape) + " and " +
                         to_string(y.shape));
    }
    const std::size_t n = x.shape[0], m = y.shape[0], d = x.shape[1];
    auto norms = [d](const Tensor& t, std::size_t rows) {
        std::vector<double> out(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) acc += t.values[r * d + c] * t.values[r * d + c];
            out[r] = std::sqrt(acc);
            if (!(out[r] > 0.0)) throw DegenerateInputError("cosine similarity of a zero-norm vector");
        }
        return out;
    };
    std::vector<double> na = norms(x, n);
    std::vector<double> nb = norms(y, m);

    Tensor out = Tensor::zeros({n, m});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < d; ++c) dot += x.values[i * d + c] * y.values[j * d + c];
            out.values[i * m + j] = dot / (na[i] * nb[j]);
        }

    const Var in[] = {a, b};
    return a.tape().record(
        std::move(out), in,
        [n, m, d, na = std::move(na), nb = std::move(nb)](const BackwardArgs& args) {
            const auto& xv = args.in[0]->values;
            const auto& yv = args.in[1]->values;
            const auto& s = args.out.values;
            const auto& g = args.grad_out;
            // ds_ij/dx_i = y_j / (|x_i||y_j|) - s_ij x_i / |x_i|^2, symmetric for y_j.
            if (double* gx = args.in_grad[0]) {
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) {
                        const double gij = g[i * m + j];
                        if (gij == 0.0) continue;
                        const double a1 = gij / (na[i] * nb[j]);
                        const double a2 = gij * s[i * m + j] / (na[i] * na[i]);
                        for (std::size_t c = 0; c < d; ++c)
                            gx[i * d + c] += a1 * yv[j * d + c] - a2 * xv[i * d + c];
                    }
            }
            if (double* gy = args.in_grad[1]) {
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) {
                        const double gij = g[i * m + j];
                        if (gij == 0.0) continue;
                        const double a1 = gij / (na[i] * nb[j]);
                        const double a2 = gij * s[i * m + j] / (nb[j] * nb[j]);
                        for (std::size_t c = 0; c < d; ++c)
                            gy[j * d + c] += a1 * xv[i * d + c] - a2 * yv[j * d + c];
                    }
            }
        });
}

// ---------------------------------------------------------------------------

GradCheckReport finite_diff_check(const std::function<Var(Tape&)>& f,
                                  std::span<Tensor* const> params,
                                  const GradCheckOptions& options) {
    if (!(options.step > 0.0)) throw ContractError("finite_diff_check: step must be positive");

    std::vector<bool> saved_flags;
    for (Tensor* p : params) {
        saved_flags.push_back(p->requires_grad);
        p->requires_grad = true;
        p->grad.reset();
    }

    double magnitude = 0.0;
    std::uint64_t branches = 0;
    {
        Tape tape;
        Var loss = f(tape);
        magnitude = std::abs(loss.item());
        branches = tape.branch_signature();
        tape.backward(loss);
    }
    const double floor = options.denominator_floor * std::max(1.0, magnitude);
    for (Tensor* p : params) p->requires_grad = false;

    bool same_branch = true;
    auto evaluate = [&] {
        Tape tape;
        const double v = f(tape).item();
        same_branch = same_branch && tape.branch_signature() == branches;
        return v;
    };

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = *params[pi];
        const std::vector<double> analytic =
            p.grad ? *p.grad : std::vector<double>(p.size(), 0.0);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double original = p.values[i];
            same_branch = true;
            p.values[i] = original + options.step;
            const double up = evaluate();
            p.values[i] = original - options.step;
            const double down = evaluate();
            p.values[i] = original;
            if (!same_branch) {
                ++report.kinks;
                continue;
            }

            const double numeric = (up - down) / (2.0 * options.step);
            const double abs_err = std::abs(analytic[i] - numeric);
            const double denom =
                std::max({std::abs(analytic[i]), std::abs(numeric), floor});
            const double rel = abs_err == 0.0 ? 0.0 : abs_err / denom;
            ++report.coordinates;
            report.max_abs_error = std::max(report.max_abs_error, abs_err);
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = pi;
                report.worst_index = i;
            }
        }
    }
    report.passed = report.max_rel_error < options.tolerance;

    for (std::size_t pi = 0; pi < params.size(); ++pi) params[pi]->requires_grad = saved_flags[pi];
    return report;
}

}  // namespace hse::tk
