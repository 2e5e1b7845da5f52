#include "gpvae/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gpvae/error.hpp"
#include "gpvae/simd.hpp"

namespace gpvae::ad {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_))
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_str(shape_));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size())
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  return Tensor(std::move(shape), data_);
}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::MatMul: return "matmul";
    case Op::Conv1dSame: return "conv1d_same";
    case Op::Relu: return "relu";
    case Op::Sigmoid: return "sigmoid";
    case Op::Softplus: return "softplus";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Square: return "square";
    case Op::Sum: return "sum";
    case Op::Broadcast: return "broadcast";
    case Op::Reshape: return "reshape";
    case Op::SliceCols: return "slice_cols";
    case Op::SwapLastAxes: return "swap_last_axes";
    case Op::Custom: return "custom";
  }
  return "?";
}

const Tensor& Var::value() const {
  if (!tape_) throw Error("use of an unbound Var");
  return tape_->node(id_).value;
}

namespace {

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) throw Error("operands live on different tapes");
  return *a.tape();
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw Error("use of an unbound Var");
  return *a.tape();
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

Var record_unary(Op op, Var a, Tensor value) {
  Node n;
  n.op = op;
  n.inputs = {a.id()};
  n.value = std::move(value);
  return tape_of(a).record(std::move(n));
}

template <class F>
Tensor map(const Tensor& in, F f) {
  Tensor out(in.shape());
  auto src = in.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

// Per-target-axis strides into a broadcast source (0 along expanded axes).
std::vector<std::size_t> broadcast_strides(const Shape& src, const Shape& dst) {
  const std::size_t offset = dst.size() - src.size();
  std::vector<std::size_t> src_stride(src.size(), 1);
  for (std::size_t j = src.size(); j-- > 1;) src_stride[j - 1] = src_stride[j] * src[j];
  std::vector<std::size_t> strides(dst.size(), 0);
  for (std::size_t i = offset; i < dst.size(); ++i) {
    const std::size_t j = i - offset;
    strides[i] = (src[j] == 1 && dst[i] != 1) ? 0 : src_stride[j];
  }
  return strides;
}

template <class F>
void for_each_broadcast(const Shape& src, const Shape& dst, F f) {
  const auto strides = broadcast_strides(src, dst);
  const std::size_t total = shape_size(dst);
  std::vector<std::size_t> idx(dst.size(), 0);
  std::size_t src_off = 0;
  for (std::size_t lin = 0; lin < total; ++lin) {
    f(lin, src_off);
    for (std::size_t ax = dst.size(); ax-- > 0;) {
      ++idx[ax];
      src_off += strides[ax];
      if (idx[ax] < dst[ax]) break;
      src_off -= strides[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
}

struct ConvDims {
  std::size_t batch, steps, cin, cout, width, left;
};

ConvDims conv_dims(const Shape& x, const Shape& w) {
  if (w.size() != 3) throw ShapeError("conv1d_same: kernel must be [W, C_in, C_out], got " + shape_str(w));
  ConvDims d{};
  if (x.size() == 2) {
    d.batch = 1;
    d.steps = x[0];
    d.cin = x[1];
  } else if (x.size() == 3) {
    d.batch = x[0];
    d.steps = x[1];
    d.cin = x[2];
  } else {
    throw ShapeError("conv1d_same: input must be [T, C] or [N, T, C], got " + shape_str(x));
  }
  if (w[1] != d.cin)
    throw ShapeError("conv1d_same: input channels " + std::to_string(d.cin) + " vs kernel " + shape_str(w));
  d.width = w[0];
  d.cout = w[2];
  if (d.width == 0) throw ShapeError("conv1d_same: empty kernel");
  d.left = (d.width - 1) / 2;
  return d;
}

// For tap j, output steps [t0, t1) read input steps shifted by j - left.
std::pair<std::size_t, std::size_t> tap_range(const ConvDims& d, std::size_t j) {
  const long shift = static_cast<long>(j) - static_cast<long>(d.left);
  const long steps = static_cast<long>(d.steps);
  const long t0 = std::max(0L, -shift);
  const long t1 = std::min(steps, steps - shift);
  if (t1 <= t0) return {0, 0};
  return {static_cast<std::size_t>(t0), static_cast<std::size_t>(t1)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape

Var Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  n.requires_grad = true;
  return record(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return record(std::move(n));
}

Var Tape::record(Node node) {
  const int id = static_cast<int>(nodes_.size());
  for (int in : node.inputs) {
    if (in < 0 || in >= id) throw Error("tape input does not precede its node");
    node.requires_grad = node.requires_grad || nodes_[static_cast<std::size_t>(in)].requires_grad;
  }
  if (!node.value.all_finite())
    throw NumericError(std::string("non-finite value produced by ") + std::string(op_name(node.op)) +
                       (node.custom ? " (" + std::string(node.custom->name()) + ")" : ""));
  nodes_.push_back(std::move(node));
  return Var(this, id);
}

const Tensor& Gradients::wrt(Var v) const {
  const auto id = static_cast<std::size_t>(v.id());
  return adjoints_.at(id);
}

Gradients Tape::backward(Var output) const {
  if (output.tape() != this) throw Error("backward: output belongs to another tape");
  if (output.value().size() != 1)
    throw ShapeError("backward: output must be scalar, got " + shape_str(output.shape()));

  const std::size_t count = nodes_.size();
  Gradients g;
  g.adjoints_.resize(count);
  g.touched_.assign(count, false);

  auto acc = [&](int id) -> Tensor* {
    const auto i = static_cast<std::size_t>(id);
    if (!nodes_[i].requires_grad) return nullptr;
    if (!g.touched_[i]) {
      g.adjoints_[i] = Tensor::zeros_like(nodes_[i].value);
      g.touched_[i] = true;
    }
    return &g.adjoints_[i];
  };

  auto fill_untouched = [&] {
    for (std::size_t i = 0; i < count; ++i)
      if (!g.touched_[i]) g.adjoints_[i] = Tensor::zeros_like(nodes_[i].value);
  };

  const auto out = static_cast<std::size_t>(output.id());
  if (!nodes_[out].requires_grad) {
    fill_untouched();
    return g;
  }
  acc(output.id())->data()[0] = 1.0;

  const auto& K = simd::kernels();

  for (std::size_t idx = out + 1; idx-- > 0;) {
    if (!g.touched_[idx]) continue;
    ++g.visited_;
    const Node& n = nodes_[idx];
    const Tensor& gy = g.adjoints_[idx];
    auto in = [&](std::size_t k) -> const Tensor& {
      return nodes_[static_cast<std::size_t>(n.inputs[k])].value;
    };

    switch (n.op) {
      case Op::Leaf:
      case Op::Constant:
        break;
      case Op::Add:
      case Op::Sub: {
        const double sign_b = n.op == Op::Add ? 1.0 : -1.0;
        if (Tensor* ga = acc(n.inputs[0])) K.axpy(1.0, gy.data().data(), ga->data().data(), gy.size());
        if (Tensor* gb = acc(n.inputs[1])) K.axpy(sign_b, gy.data().data(), gb->data().data(), gy.size());
        break;
      }
      case Op::Mul: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        if (Tensor* ga = acc(n.inputs[0]))
          for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * b[i];
        if (Tensor* gb = acc(n.inputs[1]))
          for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i] * a[i];
        break;
      }
      case Op::Scale:
        if (Tensor* ga = acc(n.inputs[0])) K.axpy(n.param, gy.data().data(), ga->data().data(), gy.size());
        break;
      case Op::AddScalar:
      case Op::Reshape:
        if (Tensor* ga = acc(n.inputs[0])) K.axpy(1.0, gy.data().data(), ga->data().data(), gy.size());
        break;
      case Op::MatMul: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        const std::size_t m = a.dim(0), k = a.dim(1), nn = b.dim(1);
        // dA = dC B^T, dB = A^T dC
        if (Tensor* ga = acc(n.inputs[0])) K.gemm_nt(gy.data().data(), b.data().data(), ga->data().data(), m, nn, k);
        if (Tensor* gb = acc(n.inputs[1])) K.gemm_tn(a.data().data(), gy.data().data(), gb->data().data(), k, m, nn);
        break;
      }
      case Op::Conv1dSame: {
        const Tensor& x = in(0);
        const Tensor& w = in(1);
        const ConvDims d = conv_dims(x.shape(), w.shape());
        Tensor* gx = acc(n.inputs[0]);
        Tensor* gw = acc(n.inputs[1]);
        for (std::size_t j = 0; j < d.width; ++j) {
          const auto [t0, t1] = tap_range(d, j);
          if (t1 == t0) continue;
          const std::size_t rows = t1 - t0;
          const std::size_t s0 = t0 + j - d.left;
          const double* wj = w.data().data() + j * d.cin * d.cout;
          for (std::size_t b = 0; b < d.batch; ++b) {
            const double* gyrow = gy.data().data() + (b * d.steps + t0) * d.cout;
            if (gx)
              K.gemm_nt(gyrow, wj, gx->data().data() + (b * d.steps + s0) * d.cin, rows, d.cout, d.cin);
            if (gw)
              K.gemm_tn(x.data().data() + (b * d.steps + s0) * d.cin, gyrow,
                        gw->data().data() + j * d.cin * d.cout, d.cin, rows, d.cout);
          }
        }
        break;
      }
      case Op::Relu:
        if (Tensor* ga = acc(n.inputs[0]))
          K.relu_backward(in(0).data().data(), gy.data().data(), ga->data().data(), gy.size());
        break;
      case Op::Sigmoid:
        if (Tensor* ga = acc(n.inputs[0]))
          for (std::size_t i = 0; i < gy.size(); ++i) {
            const double s = n.value[i];
            (*ga)[i] += gy[i] * s * (1.0 - s);
          }
        break;
      case Op::Softplus:
        if (Tensor* ga = acc(n.inputs[0]))
          for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * sigmoid_scalar(in(0)[i]);
        break;
      case Op::Exp:
        if (Tensor* ga = acc(n.inputs[0]))
          for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * n.value[i];
        break;
      case Op::Log:
        if (Tensor* ga = acc(n.inputs[0]))
          for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] / in(0)[i];
        break;
      case Op::Sqrt:
        if (Tensor* ga = acc(n.inputs[0]))
          for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * 0.5 / n.value[i];
        break;
      case Op::Square:
        if (Tensor* ga = acc(n.inputs[0]))
          for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * 2.0 * in(0)[i];
        break;
      case Op::Sum:
        if (Tensor* ga = acc(n.inputs[0])) {
          const double s = gy[0];
          for (double& v : ga->data()) v += s;
        }
        break;
      case Op::Broadcast:
        if (Tensor* ga = acc(n.inputs[0]))
          for_each_broadcast(in(0).shape(), n.value.shape(),
                             [&](std::size_t dst, std::size_t src) { (*ga)[src] += gy[dst]; });
        break;
      case Op::SliceCols:
        if (Tensor* ga = acc(n.inputs[0])) {
          const std::size_t rows = in(0).dim(0), cols = in(0).dim(1), w = n.end - n.begin;
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < w; ++c) (*ga)[r * cols + n.begin + c] += gy[r * w + c];
        }
        break;
      case Op::SwapLastAxes:
        if (Tensor* ga = acc(n.inputs[0])) {
          const Shape& s = in(0).shape();
          const std::size_t outer = s.size() == 3 ? s[0] : 1;
          const std::size_t A = s[s.size() - 2], B = s[s.size() - 1];
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < A; ++i)
              for (std::size_t j = 0; j < B; ++j) (*ga)[o * A * B + i * B + j] += gy[o * A * B + j * A + i];
        }
        break;
      case Op::Custom: {
        std::vector<const Tensor*> ins;
        std::vector<Tensor*> gins;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          ins.push_back(&in(k));
          gins.push_back(acc(n.inputs[k]));
        }
        n.custom->backward(ins, n.value, gy, gins);
        break;
      }
    }
  }
  fill_untouched();
  return g;
}

// ---------------------------------------------------------------------------
// Ops

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape("add", a, b);
  Tensor out = a.value();
  simd::kernels().axpy(1.0, b.value().data().data(), out.data().data(), out.size());
  Node n;
  n.op = Op::Add;
  n.inputs = {a.id(), b.id()};
  n.value = std::move(out);
  return t.record(std::move(n));
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  simd::kernels().axpy(-1.0, b.value().data().data(), out.data().data(), out.size());
  Node n;
  n.op = Op::Sub;
  n.inputs = {a.id(), b.id()};
  n.value = std::move(out);
  return t.record(std::move(n));
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape("mul", a, b);
  Tensor out(a.shape());
  const auto& x = a.value();
  const auto& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  Node n;
  n.op = Op::Mul;
  n.inputs = {a.id(), b.id()};
  n.value = std::move(out);
  return t.record(std::move(n));
}

Var scale(Var a, double factor) {
  Node n;
  n.op = Op::Scale;
  n.inputs = {a.id()};
  n.param = factor;
  n.value = map(a.value(), [factor](double v) { return v * factor; });
  return tape_of(a).record(std::move(n));
}

Var add_scalar(Var a, double c) {
  Node n;
  n.op = Op::AddScalar;
  n.inputs = {a.id()};
  n.param = c;
  n.value = map(a.value(), [c](double v) { return v + c; });
  return tape_of(a).record(std::move(n));
}

Var neg(Var a) { return scale(a, -1.0); }

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
    throw ShapeError("matmul: incompatible shapes " + shape_str(sa) + " x " + shape_str(sb));
  Tensor out(Shape{sa[0], sb[1]});
  simd::kernels().gemm_nn(a.value().data().data(), b.value().data().data(), out.data().data(), sa[0], sa[1],
                          sb[1]);
  Node n;
  n.op = Op::MatMul;
  n.inputs = {a.id(), b.id()};
  n.value = std::move(out);
  return t.record(std::move(n));
}

Var conv1d_same(Var x, Var w) {
  Tape& t = same_tape(x, w);
  const ConvDims d = conv_dims(x.shape(), w.shape());
  Shape out_shape = x.shape();
  out_shape.back() = d.cout;
  Tensor out(out_shape);
  const auto& K = simd::kernels();
  for (std::size_t j = 0; j < d.width; ++j) {
    const auto [t0, t1] = tap_range(d, j);
    if (t1 == t0) continue;
    const std::size_t s0 = t0 + j - d.left;
    const double* wj = w.value().data().data() + j * d.cin * d.cout;
    for (std::size_t b = 0; b < d.batch; ++b)
      K.gemm_nn(x.value().data().data() + (b * d.steps + s0) * d.cin, wj,
                out.data().data() + (b * d.steps + t0) * d.cout, t1 - t0, d.cin, d.cout);
  }
  Node n;
  n.op = Op::Conv1dSame;
  n.inputs = {x.id(), w.id()};
  n.value = std::move(out);
  return t.record(std::move(n));
}

Var relu(Var a) {
  Tensor out(a.shape());
  simd::kernels().relu(a.value().data().data(), out.data().data(), out.size());
  return record_unary(Op::Relu, a, std::move(out));
}

Var sigmoid(Var a) { return record_unary(Op::Sigmoid, a, map(a.value(), sigmoid_scalar)); }

Var softplus(Var a) { return record_unary(Op::Softplus, a, map(a.value(), softplus_scalar)); }

Var exp(Var a) { return record_unary(Op::Exp, a, map(a.value(), [](double v) { return std::exp(v); })); }

Var log(Var a) {
  for (double v : a.value().data())
    if (!(v > 0.0)) throw DomainError("log of nonpositive value " + std::to_string(v));
  return record_unary(Op::Log, a, map(a.value(), [](double v) { return std::log(v); }));
}

Var sqrt(Var a) {
  for (double v : a.value().data())
    if (v < 0.0) throw DomainError("sqrt of negative value " + std::to_string(v));
  return record_unary(Op::Sqrt, a, map(a.value(), [](double v) { return std::sqrt(v); }));
}

Var square(Var a) { return record_unary(Op::Square, a, map(a.value(), [](double v) { return v * v; })); }

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return record_unary(Op::Sum, a, Tensor::scalar(s));
}

Var broadcast_to(Var a, const Shape& shape) {
  const Shape& src = a.shape();
  bool ok = src.size() <= shape.size();
  for (std::size_t j = 0; ok && j < src.size(); ++j) {
    const std::size_t target = shape[shape.size() - src.size() + j];
    ok = src[j] == target || src[j] == 1;
  }
  if (!ok) throw ShapeError("broadcast_to: cannot broadcast " + shape_str(src) + " to " + shape_str(shape));
  Tensor out(shape);
  const auto& v = a.value();
  for_each_broadcast(src, shape, [&](std::size_t dst, std::size_t s) { out[dst] = v[s]; });
  return record_unary(Op::Broadcast, a, std::move(out));
}

Var reshape(Var a, const Shape& shape) { return record_unary(Op::Reshape, a, a.value().reshaped(shape)); }

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  if (s.size() != 2 || begin > end || end > s[1])
    throw ShapeError("slice_cols: bad range [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                     shape_str(s));
  const std::size_t rows = s[0], cols = s[1], w = end - begin;
  Tensor out(Shape{rows, w});
  const auto& v = a.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] = v[r * cols + begin + c];
  Node n;
  n.op = Op::SliceCols;
  n.inputs = {a.id()};
  n.begin = begin;
  n.end = end;
  n.value = std::move(out);
  return tape_of(a).record(std::move(n));
}

Var swap_last_axes(Var a) {
  const Shape& s = a.shape();
  if (s.size() != 2 && s.size() != 3) throw ShapeError("swap_last_axes: rank must be 2 or 3, got " + shape_str(s));
  const std::size_t outer = s.size() == 3 ? s[0] : 1;
  const std::size_t A = s[s.size() - 2], B = s[s.size() - 1];
  Shape os = s;
  std::swap(os[os.size() - 2], os[os.size() - 1]);
  Tensor out(os);
  const auto& v = a.value();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < A; ++i)
      for (std::size_t j = 0; j < B; ++j) out[o * A * B + j * A + i] = v[o * A * B + i * B + j];
  return record_unary(Op::SwapLastAxes, a, std::move(out));
}

Var apply(std::shared_ptr<const CustomOp> op, std::vector<Var> inputs) {
  if (inputs.empty()) throw Error("custom op without inputs");
  Tape& t = tape_of(inputs.front());
  std::vector<const Tensor*> ins;
  Node n;
  for (const Var& v : inputs) {
    if (v.tape() != &t) throw Error("operands live on different tapes");
    ins.push_back(&v.value());
    n.inputs.push_back(v.id());
  }
  n.op = Op::Custom;
  n.value = op->forward(ins);
  n.custom = std::move(op);
  return t.record(std::move(n));
}

Var add_bias(Var x, Var b) { return add(x, broadcast_to(b, x.shape())); }

// ---------------------------------------------------------------------------

double gradient_check(const ScalarFn& f, std::span<const Tensor> points, double step) {
  auto evaluate = [&](const std::vector<Tensor>& at) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : at) vars.push_back(tape.leaf(p));
    return f(tape, vars).value().item();
  };

  std::vector<Tensor> base(points.begin(), points.end());
  Tape tape;
  std::vector<Var> vars;
  for (const auto& p : base) vars.push_back(tape.leaf(p));
  const Var out = f(tape, vars);
  const Gradients grads = tape.backward(out);

  double worst = 0.0;
  for (std::size_t k = 0; k < base.size(); ++k) {
    const Tensor& ad = grads.wrt(vars[k]);
    for (std::size_t i = 0; i < base[k].size(); ++i) {
      std::vector<Tensor> probe = base;
      probe[k][i] = base[k][i] + step;
      const double up = evaluate(probe);
      probe[k][i] = base[k][i] - step;
      const double down = evaluate(probe);
      const double fd = (up - down) / (2.0 * step);
      worst = std::max(worst, std::abs(ad[i] - fd) / (std::abs(fd) + 1e-8));
    }
  }
  return worst;
}

double gradient_check(const std::function<Var(Tape&, Var)>& f, const Tensor& point, double step) {
  const Tensor pts[] = {point};
  return gradient_check([&](Tape& t, std::span<const Var> v) { return f(t, v[0]); }, pts, step);
}

}  // namespace gpvae::ad
