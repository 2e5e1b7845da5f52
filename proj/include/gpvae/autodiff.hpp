#pragma once
// Reverse-mode automatic differentiation over dense row-major float64 tensors.
//
// Graphs are recorded define-by-run on a Tape. Every op appends one node whose
// inputs are earlier nodes, so the node list is already a topological order
// and backward() is a single reverse sweep.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gpvae::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor {
 public:
  /// Scalar zero.
  Tensor() : data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_, 0.0); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  /// Value of a single-element tensor.
  double item() const;
  bool all_finite() const;

  /// Same data, new shape of equal size.
  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

enum class Op {
  Leaf,
  Constant,
  Add,
  Sub,
  Mul,
  Scale,
  AddScalar,
  MatMul,
  Conv1dSame,
  Relu,
  Sigmoid,
  Softplus,
  Exp,
  Log,
  Sqrt,
  Square,
  Sum,
  Broadcast,
  Reshape,
  SliceCols,
  SwapLastAxes,
  Custom,
};

std::string_view op_name(Op op);

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// User-defined primitive with a hand-written adjoint. backward() must
/// accumulate into the non-null entries of grad_inputs.
class CustomOp {
 public:
  virtual ~CustomOp() = default;
  virtual std::string_view name() const = 0;
  virtual Tensor forward(std::span<const Tensor* const> inputs) const = 0;
  virtual void backward(std::span<const Tensor* const> inputs, const Tensor& output,
                        const Tensor& grad_output,
                        std::span<Tensor* const> grad_inputs) const = 0;
};

struct Node {
  Op op = Op::Leaf;
  std::vector<int> inputs;
  Tensor value;
  bool requires_grad = false;
  double param = 0.0;          // Scale / AddScalar factor
  std::size_t begin = 0;       // SliceCols
  std::size_t end = 0;
  std::shared_ptr<const CustomOp> custom;
};

class Gradients {
 public:
  /// Adjoint of `v`; zero-filled when `v` does not influence the output.
  const Tensor& wrt(Var v) const;
  std::size_t nodes_visited() const { return visited_; }

 private:
  friend class Tape;
  std::vector<Tensor> adjoints_;
  std::vector<bool> touched_;
  std::size_t visited_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var leaf(Tensor value);
  /// Input that never receives a gradient.
  Var constant(Tensor value);

  /// Appends a node. Throws NumericError if the value is not finite.
  Var record(Node node);

  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes_.size(); }

  /// d output / d node for every node. `output` must be a one-element tensor.
  Gradients backward(Var output) const;

 private:
  std::vector<Node> nodes_;
};

// Primitive ops. Elementwise binary ops require identical shapes; use
// broadcast_to() to expand an operand first.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
Var neg(Var a);
/// a: m x k, b: k x n.
Var matmul(Var a, Var b);
/// x: [T, C_in] or [N, T, C_in]; w: [W, C_in, C_out]. Zero padding keeps
/// length T: (W-1)/2 steps on the left, the remainder on the right.
Var conv1d_same(Var x, Var w);
Var relu(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var exp(Var a);
/// Throws DomainError on nonpositive entries.
Var log(Var a);
/// Throws DomainError on negative entries.
Var sqrt(Var a);
Var square(Var a);
/// Sum of all entries, as a scalar.
Var sum(Var a);
/// Numpy-style broadcast: the source shape is right-aligned against `shape`
/// and each source dim must equal the target dim or be 1.
Var broadcast_to(Var a, const Shape& shape);
Var reshape(Var a, const Shape& shape);
/// Columns [begin, end) of a rank-2 tensor.
Var slice_cols(Var a, std::size_t begin, std::size_t end);
/// [..., A, B] -> [..., B, A] for rank 2 or 3.
Var swap_last_axes(Var a);
Var apply(std::shared_ptr<const CustomOp> op, std::vector<Var> inputs);

/// x[r, :] + b for every row r of a rank-2 x.
Var add_bias(Var x, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

/// max_i |g_ad - g_fd| / (|g_fd| + 1e-8) over every coordinate of every
/// input, with g_fd from central differences of width 2*step.
double gradient_check(const ScalarFn& f, std::span<const Tensor> points, double step = 1e-5);
double gradient_check(const std::function<Var(Tape&, Var)>& f, const Tensor& point,
                      double step = 1e-5);

}  // namespace gpvae::ad
