#include "georecon/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace georecon::ad {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

bool finite(const Vec& v) { return v.allFinite(); }

// Normalized 2D view of a rank-1/rank-2 operand for matmul.
struct Dims {
  Index rows, cols;
};

Dims lhs_dims(const Shape& s) {
  if (s.rank == 2) return {s.dim[0], s.dim[1]};
  if (s.rank == 1) return {1, s.dim[0]};
  throw std::invalid_argument("matmul: left operand must be rank 1 or 2");
}

Dims rhs_dims(const Shape& s) {
  if (s.rank == 2) return {s.dim[0], s.dim[1]};
  if (s.rank == 1) return {s.dim[0], 1};
  throw std::invalid_argument("matmul: right operand must be rank 1 or 2");
}

ConstRowMatMap view(const Vec& v, Dims d) { return ConstRowMatMap(v.data(), d.rows, d.cols); }
RowMatMap view(Vec& v, Dims d) { return RowMatMap(v.data(), d.rows, d.cols); }

Real sigmoid(Real x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec silu_slope(const Vec& x) {
  Vec d(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const Real s = sigmoid(x[i]);
    d[i] = s * (1.0 + x[i] * (1.0 - s));
  }
  return d;
}

Vec cross3(const Vec& a, const Vec& b) {
  Vec c(3);
  c[0] = a[1] * b[2] - a[2] * b[1];
  c[1] = a[2] * b[0] - a[0] * b[2];
  c[2] = a[0] * b[1] - a[1] * b[0];
  return c;
}

// Elementwise combine with scalar-tensor broadcast (the only broadcast form).
template <typename F>
Vec broadcast_combine(const Vec& a, const Vec& b, F f) {
  if (a.size() == b.size()) {
    Vec out(a.size());
    for (Index i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  if (a.size() == 1) {
    Vec out(b.size());
    for (Index i = 0; i < b.size(); ++i) out[i] = f(a[0], b[i]);
    return out;
  }
  Vec out(a.size());
  for (Index i = 0; i < a.size(); ++i) out[i] = f(a[i], b[0]);
  return out;
}

}  // namespace

std::string Shape::str() const {
  std::ostringstream os;
  if (rank == 0) {
    os << "scalar";
  } else if (rank == 1) {
    os << "(" << dim[0] << ")";
  } else {
    os << "(" << dim[0] << " x " << dim[1] << ")";
  }
  return os.str();
}

Real Value::scalar() const {
  const Vec& v = data();
  require(v.size() == 1, "scalar() on tensor of " + shape().str());
  return v[0];
}

Value Tape::push(Node n) {
  eval(n);
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Value Tape::constant(const Shape& s, Vec data) {
  require(data.size() == s.numel(), "constant: data length does not match shape " + s.str());
  Node n;
  n.op = Op::kConst;
  n.shape = s;
  n.value = std::move(data);
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Value Tape::constant_scalar(Real v) {
  Vec d(1);
  d[0] = v;
  return constant(Shape::scalar(), std::move(d));
}

Value Tape::leaf(const Shape& s, Vec data, bool requires_grad) {
  require(data.size() == s.numel(), "leaf: data length does not match shape " + s.str());
  Node n;
  n.op = Op::kLeaf;
  n.requires_grad = requires_grad;
  n.shape = s;
  n.value = std::move(data);
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

void Tape::eval(Node& n) {
  switch (n.op) {
    case Op::kConst:
    case Op::kLeaf:
      return;
    case Op::kAdd: {
      n.value = broadcast_combine(node(n.a).value, node(n.b).value,
                                  [](Real x, Real y) { return x + y; });
      return;
    }
    case Op::kSub: {
      n.value = broadcast_combine(node(n.a).value, node(n.b).value,
                                  [](Real x, Real y) { return x - y; });
      return;
    }
    case Op::kMul: {
      n.value = broadcast_combine(node(n.a).value, node(n.b).value,
                                  [](Real x, Real y) { return x * y; });
      return;
    }
    case Op::kScale:
      n.value = node(n.a).value * n.c0;
      return;
    case Op::kMatMul: {
      const Node& A = node(n.a);
      const Node& B = node(n.b);
      const Dims da = lhs_dims(A.shape), db = rhs_dims(B.shape);
      n.value.resize(da.rows * db.cols);
      view(n.value, {da.rows, db.cols}).noalias() = view(A.value, da) * view(B.value, db);
      return;
    }
    case Op::kSum:
      n.value.resize(1);
      n.value[0] = node(n.a).value.sum();
      return;
    case Op::kMean:
      n.value.resize(1);
      n.value[0] = node(n.a).value.sum() / static_cast<Real>(node(n.a).value.size());
      return;
    case Op::kMeanRows: {
      // Column sums accumulate in value-sorted order, so the result is
      // independent of row permutation bit for bit.
      const Node& A = node(n.a);
      const Index m = A.shape.dim[0], c = A.shape.dim[1];
      n.value.resize(c);
      std::vector<Real> col(static_cast<std::size_t>(m));
      for (Index j = 0; j < c; ++j) {
        for (Index i = 0; i < m; ++i) col[static_cast<std::size_t>(i)] = A.value[i * c + j];
        std::sort(col.begin(), col.end());
        Real s = 0.0;
        for (Real x : col) s += x;
        n.value[j] = s / static_cast<Real>(m);
      }
      return;
    }
    case Op::kConcat: {
      const Node& A = node(n.a);
      const Node& B = node(n.b);
      n.value.resize(n.shape.numel());
      if (n.shape.rank == 1 || n.i0 == 0) {
        n.value.head(A.value.size()) = A.value;
        n.value.tail(B.value.size()) = B.value;
      } else {
        const Index m = n.shape.dim[0], ca = A.shape.dim[1], cb = B.shape.dim[1];
        for (Index i = 0; i < m; ++i) {
          n.value.segment(i * (ca + cb), ca) = A.value.segment(i * ca, ca);
          n.value.segment(i * (ca + cb) + ca, cb) = B.value.segment(i * cb, cb);
        }
      }
      return;
    }
    case Op::kSlice: {
      const Node& A = node(n.a);
      const Index b = n.i1, e = n.i2;
      if (A.shape.rank == 1) {
        n.value = A.value.segment(b, e - b);
      } else if (n.i0 == 0) {
        const Index c = A.shape.dim[1];
        n.value = A.value.segment(b * c, (e - b) * c);
      } else {
        const Index m = A.shape.dim[0], c = A.shape.dim[1], w = e - b;
        n.value.resize(m * w);
        for (Index i = 0; i < m; ++i) n.value.segment(i * w, w) = A.value.segment(i * c + b, w);
      }
      return;
    }
    case Op::kReshape:
    case Op::kDetach:
      n.value = node(n.a).value;
      return;
    case Op::kRelu:
      n.value = node(n.a).value.cwiseMax(0.0);
      return;
    case Op::kSilu: {
      const Vec& x = node(n.a).value;
      n.value.resize(x.size());
      for (Index i = 0; i < x.size(); ++i) n.value[i] = x[i] * sigmoid(x[i]);
      return;
    }
    case Op::kTanh:
      n.value = node(n.a).value.array().tanh();
      return;
    case Op::kExp:
      n.value = node(n.a).value.array().exp();
      return;
    case Op::kSqrt:
      n.value = node(n.a).value.array().sqrt();
      return;
    case Op::kPow:
      n.value = node(n.a).value.array().pow(n.c0);
      return;
    case Op::kCross:
      n.value = cross3(node(n.a).value, node(n.b).value);
      return;
    case Op::kNorm:
      n.value.resize(1);
      n.value[0] = node(n.a).value.norm();
      return;
  }
}

Value Tape::add(const Value& a, const Value& b) {
  require(a.tape == this && b.tape == this, "add: values from another tape");
  const bool bc = a.numel() == 1 || b.numel() == 1;
  require(bc || a.shape() == b.shape(),
          "add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.shape = a.numel() == 1 ? b.shape() : a.shape();
  n.requires_grad = node(a.id).requires_grad || node(b.id).requires_grad;
  return push(std::move(n));
}

Value Tape::sub(const Value& a, const Value& b) {
  require(a.tape == this && b.tape == this, "sub: values from another tape");
  const bool bc = a.numel() == 1 || b.numel() == 1;
  require(bc || a.shape() == b.shape(),
          "sub: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.shape = a.numel() == 1 ? b.shape() : a.shape();
  n.requires_grad = node(a.id).requires_grad || node(b.id).requires_grad;
  return push(std::move(n));
}

Value Tape::mul(const Value& a, const Value& b) {
  require(a.tape == this && b.tape == this, "mul: values from another tape");
  const bool bc = a.numel() == 1 || b.numel() == 1;
  require(bc || a.shape() == b.shape(),
          "mul: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.shape = a.numel() == 1 ? b.shape() : a.shape();
  n.requires_grad = node(a.id).requires_grad || node(b.id).requires_grad;
  return push(std::move(n));
}

Value Tape::scale(const Value& a, Real c) {
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.c0 = c;
  n.shape = a.shape();
  n.requires_grad = node(a.id).requires_grad;
  return push(std::move(n));
}

Value Tape::matmul(const Value& a, const Value& b) {
  require(a.tape == this && b.tape == this, "matmul: values from another tape");
  const Dims da = lhs_dims(a.shape()), db = rhs_dims(b.shape());
  require(da.cols == db.rows,
          "matmul: inner dimensions differ, " + a.shape().str() + " vs " + b.shape().str());
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  const int ra = a.shape().rank, rb = b.shape().rank;
  if (ra == 2 && rb == 2)
    n.shape = Shape::matrix(da.rows, db.cols);
  else if (ra == 1 && rb == 2)
    n.shape = Shape::vector(db.cols);
  else if (ra == 2 && rb == 1)
    n.shape = Shape::vector(da.rows);
  else
    n.shape = Shape::scalar();
  n.requires_grad = node(a.id).requires_grad || node(b.id).requires_grad;
  return push(std::move(n));
}

Value Tape::sum(const Value& a) {
  Node n;
  n.op = Op::kSum;
  n.a = a.id;
  n.shape = Shape::scalar();
  n.requires_grad = node(a.id).requires_grad;
  return push(std::move(n));
}

Value Tape::mean(const Value& a) {
  Node n;
  n.op = Op::kMean;
  n.a = a.id;
  n.shape = Shape::scalar();
  n.requires_grad = node(a.id).requires_grad;
  return push(std::move(n));
}

Value Tape::mean_rows(const Value& a) {
  require(a.shape().rank == 2, "mean_rows: expects a matrix, got " + a.shape().str());
  Node n;
  n.op = Op::kMeanRows;
  n.a = a.id;
  n.shape = Shape::vector(a.shape().dim[1]);
  n.requires_grad = node(a.id).requires_grad;
  return push(std::move(n));
}

Value Tape::concat(const Value& a, const Value& b, int axis) {
  require(a.tape == this && b.tape == this, "concat: values from another tape");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  require(sa.rank == sb.rank && sa.rank >= 1, "concat: rank mismatch");
  Node n;
  n.op = Op::kConcat;
  n.a = a.id;
  n.b = b.id;
  n.i0 = axis;
  if (sa.rank == 1) {
    require(axis == 0, "concat: vector concat must use axis 0");
    n.shape = Shape::vector(sa.dim[0] + sb.dim[0]);
  } else if (axis == 0) {
    require(sa.dim[1] == sb.dim[1], "concat: column count mismatch");
    n.shape = Shape::matrix(sa.dim[0] + sb.dim[0], sa.dim[1]);
  } else {
    require(axis == 1, "concat: axis must be 0 or 1");
    require(sa.dim[0] == sb.dim[0], "concat: row count mismatch");
    n.shape = Shape::matrix(sa.dim[0], sa.dim[1] + sb.dim[1]);
  }
  n.requires_grad = node(a.id).requires_grad || node(b.id).requires_grad;
  return push(std::move(n));
}

Value Tape::slice(const Value& a, int axis, Index begin, Index end) {
  const Shape& s = a.shape();
  require(s.rank >= 1, "slice: scalar cannot be sliced");
  const Index extent = (s.rank == 1) ? s.dim[0] : s.dim[static_cast<std::size_t>(axis)];
  require(axis == 0 || (axis == 1 && s.rank == 2), "slice: bad axis");
  require(begin >= 0 && begin < end && end <= extent, "slice: range out of bounds");
  Node n;
  n.op = Op::kSlice;
  n.a = a.id;
  n.i0 = axis;
  n.i1 = begin;
  n.i2 = end;
  if (s.rank == 1)
    n.shape = Shape::vector(end - begin);
  else if (axis == 0)
    n.shape = Shape::matrix(end - begin, s.dim[1]);
  else
    n.shape = Shape::matrix(s.dim[0], end - begin);
  n.requires_grad = node(a.id).requires_grad;
  return push(std::move(n));
}

Value Tape::reshape(const Value& a, const Shape& s) {
  require(s.numel() == a.numel(), "reshape: element count mismatch");
  Node n;
  n.op = Op::kReshape;
  n.a = a.id;
  n.shape = s;
  n.requires_grad = node(a.id).requires_grad;
  return push(std::move(n));
}

#define GEORECON_UNARY(NAME, KIND)                \
  Value Tape::NAME(const Value& a) {              \
    Node n;                                       \
    n.op = KIND;                                  \
    n.a = a.id;                                   \
    n.shape = a.shape();                          \
    n.requires_grad = node(a.id).requires_grad;   \
    return push(std::move(n));                    \
  }

GEORECON_UNARY(relu, Op::kRelu)
GEORECON_UNARY(silu, Op::kSilu)
GEORECON_UNARY(tanh, Op::kTanh)
GEORECON_UNARY(exp, Op::kExp)
GEORECON_UNARY(sqrt, Op::kSqrt)
#undef GEORECON_UNARY

Value Tape::pow(const Value& a, Real exponent) {
  Node n;
  n.op = Op::kPow;
  n.a = a.id;
  n.c0 = exponent;
  n.shape = a.shape();
  n.requires_grad = node(a.id).requires_grad;
  return push(std::move(n));
}

Value Tape::cross(const Value& a, const Value& b) {
  require(a.shape() == Shape::vector(3) && b.shape() == Shape::vector(3),
          "cross: expects two 3-vectors");
  Node n;
  n.op = Op::kCross;
  n.a = a.id;
  n.b = b.id;
  n.shape = Shape::vector(3);
  n.requires_grad = node(a.id).requires_grad || node(b.id).requires_grad;
  return push(std::move(n));
}

Value Tape::norm(const Value& a) {
  Node n;
  n.op = Op::kNorm;
  n.a = a.id;
  n.shape = Shape::scalar();
  n.requires_grad = node(a.id).requires_grad;
  return push(std::move(n));
}

Value Tape::detach(const Value& a) {
  Node n;
  n.op = Op::kDetach;
  n.a = a.id;
  n.shape = a.shape();
  n.requires_grad = false;
  return push(std::move(n));
}

void Tape::accumulate(std::int32_t id, const Vec& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = Vec::Zero(n.value.size());
    n.has_grad = true;
  }
  n.grad += g;
}

void Tape::backward(const Value& root) {
  require(root.attached(), "backward: detached root (no tape)");
  require(root.tape == this, "backward: root from another tape");
  require(root.numel() == 1, "backward: root must be a scalar, got " + root.shape().str());
  Vec one(1);
  one[0] = 1.0;
  backward_with_cotangent(root, one);
}

void Tape::backward_with_cotangent(const Value& out, const Vec& u) {
  require(out.attached(), "backward: detached output");
  require(u.size() == out.numel(), "backward: cotangent size mismatch");
  for (Node& n : nodes_) n.has_grad = false;
  Node& root = nodes_[static_cast<std::size_t>(out.id)];
  if (!root.requires_grad) return;  // no parameters reachable; empty gradient map
  root.grad = u;
  root.has_grad = true;
  backprop(out.id);
}

void Tape::backprop(std::int32_t root_id) {
  for (std::int32_t id = root_id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad || !n.requires_grad) continue;
    const Vec& g = n.grad;
    switch (n.op) {
      case Op::kConst:
      case Op::kLeaf:
      case Op::kDetach:
        break;
      case Op::kAdd: {
        const Node& A = node(n.a);
        const Node& B = node(n.b);
        if (A.value.size() == g.size())
          accumulate(n.a, g);
        else
          accumulate(n.a, Vec::Constant(1, g.sum()));
        if (B.value.size() == g.size())
          accumulate(n.b, g);
        else
          accumulate(n.b, Vec::Constant(1, g.sum()));
        break;
      }
      case Op::kSub: {
        const Node& A = node(n.a);
        const Node& B = node(n.b);
        if (A.value.size() == g.size())
          accumulate(n.a, g);
        else
          accumulate(n.a, Vec::Constant(1, g.sum()));
        if (B.value.size() == g.size())
          accumulate(n.b, -g);
        else
          accumulate(n.b, Vec::Constant(1, -g.sum()));
        break;
      }
      case Op::kMul: {
        const Node& A = node(n.a);
        const Node& B = node(n.b);
        if (A.value.size() == B.value.size()) {
          accumulate(n.a, g.cwiseProduct(B.value));
          accumulate(n.b, g.cwiseProduct(A.value));
        } else if (A.value.size() == 1) {
          accumulate(n.a, Vec::Constant(1, g.dot(B.value)));
          accumulate(n.b, g * A.value[0]);
        } else {
          accumulate(n.a, g * B.value[0]);
          accumulate(n.b, Vec::Constant(1, g.dot(A.value)));
        }
        break;
      }
      case Op::kScale:
        accumulate(n.a, g * n.c0);
        break;
      case Op::kMatMul: {
        const Node& A = node(n.a);
        const Node& B = node(n.b);
        const Dims da = lhs_dims(A.shape), db = rhs_dims(B.shape);
        const Dims dg{da.rows, db.cols};
        if (node(n.a).requires_grad) {
          Vec ga(A.value.size());
          view(ga, da).noalias() = view(g, dg) * view(B.value, db).transpose();
          accumulate(n.a, ga);
        }
        if (node(n.b).requires_grad) {
          Vec gb(B.value.size());
          view(gb, db).noalias() = view(A.value, da).transpose() * view(g, dg);
          accumulate(n.b, gb);
        }
        break;
      }
      case Op::kSum:
        accumulate(n.a, Vec::Constant(node(n.a).value.size(), g[0]));
        break;
      case Op::kMean:
        accumulate(n.a,
                   Vec::Constant(node(n.a).value.size(),
                                 g[0] / static_cast<Real>(node(n.a).value.size())));
        break;
      case Op::kMeanRows: {
        const Node& A = node(n.a);
        const Index m = A.shape.dim[0], c = A.shape.dim[1];
        Vec ga(m * c);
        for (Index i = 0; i < m; ++i) ga.segment(i * c, c) = g / static_cast<Real>(m);
        accumulate(n.a, ga);
        break;
      }
      case Op::kConcat: {
        const Node& A = node(n.a);
        const Node& B = node(n.b);
        if (n.shape.rank == 1 || n.i0 == 0) {
          accumulate(n.a, g.head(A.value.size()));
          accumulate(n.b, g.tail(B.value.size()));
        } else {
          const Index m = n.shape.dim[0], ca = A.shape.dim[1], cb = B.shape.dim[1];
          Vec ga(A.value.size()), gb(B.value.size());
          for (Index i = 0; i < m; ++i) {
            ga.segment(i * ca, ca) = g.segment(i * (ca + cb), ca);
            gb.segment(i * cb, cb) = g.segment(i * (ca + cb) + ca, cb);
          }
          accumulate(n.a, ga);
          accumulate(n.b, gb);
        }
        break;
      }
      case Op::kSlice: {
        const Node& A = node(n.a);
        Vec ga = Vec::Zero(A.value.size());
        if (A.shape.rank == 1) {
          ga.segment(n.i1, n.i2 - n.i1) = g;
        } else if (n.i0 == 0) {
          const Index c = A.shape.dim[1];
          ga.segment(n.i1 * c, (n.i2 - n.i1) * c) = g;
        } else {
          const Index m = A.shape.dim[0], c = A.shape.dim[1], w = n.i2 - n.i1;
          for (Index i = 0; i < m; ++i) ga.segment(i * c + n.i1, w) = g.segment(i * w, w);
        }
        accumulate(n.a, ga);
        break;
      }
      case Op::kReshape:
        accumulate(n.a, g);
        break;
      case Op::kRelu: {
        const Vec& x = node(n.a).value;
        Vec ga(x.size());
        for (Index i = 0; i < x.size(); ++i) ga[i] = x[i] > 0.0 ? g[i] : 0.0;
        accumulate(n.a, ga);
        break;
      }
      case Op::kSilu:
        accumulate(n.a, g.cwiseProduct(silu_slope(node(n.a).value)));
        break;
      case Op::kTanh:
        accumulate(n.a, g.cwiseProduct((1.0 - n.value.array().square()).matrix()));
        break;
      case Op::kExp:
        accumulate(n.a, g.cwiseProduct(n.value));
        break;
      case Op::kSqrt:
        accumulate(n.a, g.cwiseProduct((0.5 * n.value.array().inverse()).matrix()));
        break;
      case Op::kPow: {
        const Vec& x = node(n.a).value;
        accumulate(n.a, g.cwiseProduct((n.c0 * x.array().pow(n.c0 - 1.0)).matrix()));
        break;
      }
      case Op::kCross: {
        const Vec& a = node(n.a).value;
        const Vec& b = node(n.b).value;
        accumulate(n.a, cross3(b, g));
        accumulate(n.b, cross3(g, a));
        break;
      }
      case Op::kNorm: {
        const Real y = n.value[0];
        if (y > 0.0) accumulate(n.a, (g[0] / y) * node(n.a).value);
        break;
      }
    }
  }
}

void Tape::forward_tangent(const Value& seed_leaf, const Vec& v) {
  forward_tangent_multi({{seed_leaf, v}});
}

void Tape::forward_tangent_multi(const std::vector<std::pair<Value, Vec>>& seeds) {
  require(!seeds.empty(), "forward_tangent: no seeds");
  for (Node& n : nodes_) n.has_tangent = false;
  std::int32_t first = std::numeric_limits<std::int32_t>::max();
  for (const auto& [leaf, v] : seeds) {
    require(leaf.attached() && leaf.tape == this, "forward_tangent: bad seed");
    require(v.size() == leaf.numel(), "forward_tangent: tangent size mismatch");
    Node& s = nodes_[static_cast<std::size_t>(leaf.id)];
    s.tangent = v;
    s.has_tangent = true;
    first = std::min(first, leaf.id);
  }

  auto tan = [&](std::int32_t id) -> const Vec* {
    const Node& p = nodes_[static_cast<std::size_t>(id)];
    return p.has_tangent ? &p.tangent : nullptr;
  };

  for (std::size_t i = static_cast<std::size_t>(first) + 1; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    const Vec* ta = n.a >= 0 ? tan(n.a) : nullptr;
    const Vec* tb = n.b >= 0 ? tan(n.b) : nullptr;
    if (!ta && !tb) continue;
    switch (n.op) {
      case Op::kConst:
      case Op::kLeaf:
        continue;
      case Op::kDetach:
        continue;  // tangent stops at detach
      case Op::kAdd:
      case Op::kSub: {
        const Real sgn = n.op == Op::kSub ? -1.0 : 1.0;
        Vec t = Vec::Zero(n.value.size());
        if (ta) {
          if (ta->size() == t.size())
            t += *ta;
          else
            t.array() += (*ta)[0];
        }
        if (tb) {
          if (tb->size() == t.size())
            t += sgn * *tb;
          else
            t.array() += sgn * (*tb)[0];
        }
        n.tangent = std::move(t);
        break;
      }
      case Op::kMul: {
        const Vec& a = node(n.a).value;
        const Vec& b = node(n.b).value;
        Vec t = Vec::Zero(n.value.size());
        if (ta) t += broadcast_combine(*ta, b, [](Real x, Real y) { return x * y; });
        if (tb) t += broadcast_combine(a, *tb, [](Real x, Real y) { return x * y; });
        n.tangent = std::move(t);
        break;
      }
      case Op::kScale:
        n.tangent = *ta * n.c0;
        break;
      case Op::kMatMul: {
        const Node& A = node(n.a);
        const Node& B = node(n.b);
        const Dims da = lhs_dims(A.shape), db = rhs_dims(B.shape);
        Vec t = Vec::Zero(n.value.size());
        if (ta) view(t, {da.rows, db.cols}).noalias() += view(*ta, da) * view(B.value, db);
        if (tb) view(t, {da.rows, db.cols}).noalias() += view(A.value, da) * view(*tb, db);
        n.tangent = std::move(t);
        break;
      }
      case Op::kSum: {
        n.tangent.resize(1);
        n.tangent[0] = ta->sum();
        break;
      }
      case Op::kMean: {
        n.tangent.resize(1);
        n.tangent[0] = ta->sum() / static_cast<Real>(ta->size());
        break;
      }
      case Op::kMeanRows: {
        const Node& A = node(n.a);
        const Index m = A.shape.dim[0], c = A.shape.dim[1];
        n.tangent = Vec::Zero(c);
        for (Index i = 0; i < m; ++i) n.tangent += ta->segment(i * c, c);
        n.tangent /= static_cast<Real>(m);
        break;
      }
      case Op::kConcat: {
        const Node& A = node(n.a);
        const Node& B = node(n.b);
        const Vec za = ta ? *ta : Vec(Vec::Zero(A.value.size()));
        const Vec zb = tb ? *tb : Vec(Vec::Zero(B.value.size()));
        n.tangent.resize(n.value.size());
        if (n.shape.rank == 1 || n.i0 == 0) {
          n.tangent.head(za.size()) = za;
          n.tangent.tail(zb.size()) = zb;
        } else {
          const Index m = n.shape.dim[0], ca = A.shape.dim[1], cb = B.shape.dim[1];
          for (Index i = 0; i < m; ++i) {
            n.tangent.segment(i * (ca + cb), ca) = za.segment(i * ca, ca);
            n.tangent.segment(i * (ca + cb) + ca, cb) = zb.segment(i * cb, cb);
          }
        }
        break;
      }
      case Op::kSlice: {
        const Node& A = node(n.a);
        if (A.shape.rank == 1) {
          n.tangent = ta->segment(n.i1, n.i2 - n.i1);
        } else if (n.i0 == 0) {
          const Index c = A.shape.dim[1];
          n.tangent = ta->segment(n.i1 * c, (n.i2 - n.i1) * c);
        } else {
          const Index m = A.shape.dim[0], c = A.shape.dim[1], w = n.i2 - n.i1;
          n.tangent.resize(m * w);
          for (Index i = 0; i < m; ++i)
            n.tangent.segment(i * w, w) = ta->segment(i * c + n.i1, w);
        }
        break;
      }
      case Op::kReshape:
        n.tangent = *ta;
        break;
      case Op::kRelu: {
        const Vec& x = node(n.a).value;
        n.tangent.resize(x.size());
        for (Index i = 0; i < x.size(); ++i) n.tangent[i] = x[i] > 0.0 ? (*ta)[i] : 0.0;
        break;
      }
      case Op::kSilu:
        n.tangent = ta->cwiseProduct(silu_slope(node(n.a).value));
        break;
      case Op::kTanh:
        n.tangent = ta->cwiseProduct((1.0 - n.value.array().square()).matrix());
        break;
      case Op::kExp:
        n.tangent = ta->cwiseProduct(n.value);
        break;
      case Op::kSqrt:
        n.tangent = ta->cwiseProduct((0.5 * n.value.array().inverse()).matrix());
        break;
      case Op::kPow: {
        const Vec& x = node(n.a).value;
        n.tangent = ta->cwiseProduct((n.c0 * x.array().pow(n.c0 - 1.0)).matrix());
        break;
      }
      case Op::kCross: {
        Vec t = Vec::Zero(3);
        if (ta) t += cross3(*ta, node(n.b).value);
        if (tb) t += cross3(node(n.a).value, *tb);
        n.tangent = std::move(t);
        break;
      }
      case Op::kNorm: {
        const Real y = n.value[0];
        n.tangent.resize(1);
        n.tangent[0] = y > 0.0 ? node(n.a).value.dot(*ta) / y : 0.0;
        break;
      }
    }
    n.has_tangent = true;
  }
}

Vec Tape::grad(const Value& v) const {
  const Node& n = node(v.id);
  if (!n.has_grad) return Vec::Zero(n.value.size());
  return n.grad;
}

Vec Tape::tangent(const Value& v) const {
  const Node& n = node(v.id);
  if (!n.has_tangent) return Vec::Zero(n.value.size());
  return n.tangent;
}

void Tape::set_value(const Value& leaf, const Vec& data) {
  Node& n = node(leaf.id);
  require(n.op == Op::kLeaf || n.op == Op::kConst, "set_value: not a leaf");
  require(data.size() == n.value.size(), "set_value: size mismatch");
  n.value = data;
}

void Tape::replay() {
  for (Node& n : nodes_) {
    if (n.op == Op::kLeaf || n.op == Op::kConst) continue;
    eval(n);
  }
}

Recording::Recording(const FlatFn& f, const Vec& x) {
  if (x.size() != f.input_shape.numel())
    throw std::invalid_argument("recording: point size does not match input shape");
  input_ = tape_.leaf(f.input_shape, x, true);
  output_ = f.build(tape_, input_);
  if (!finite(output_.data())) throw std::runtime_error("recording: non-finite output");
}

Vec Recording::jvp(const Vec& v) {
  if (v.size() != input_dim()) throw std::invalid_argument("jvp: direction size mismatch");
  tape_.forward_tangent(input_, v);
  Vec out = tape_.tangent(output_);
  if (!finite(out)) throw std::runtime_error("jvp: non-finite tangent output");
  return out;
}

Vec Recording::vjp(const Vec& u) {
  if (u.size() != output_dim()) throw std::invalid_argument("vjp: cotangent size mismatch");
  tape_.backward_with_cotangent(output_, u);
  Vec out = tape_.grad(input_);
  if (!finite(out)) throw std::runtime_error("vjp: non-finite cotangent output");
  return out;
}

Vec jvp(const FlatFn& f, const Vec& x, const Vec& v) {
  Recording rec(f, x);
  return rec.jvp(v);
}

Vec vjp(const FlatFn& f, const Vec& x, const Vec& u) {
  Recording rec(f, x);
  return rec.vjp(u);
}

GradCheckReport check_gradients(
    const std::function<Value(Tape&, const std::vector<Value>&)>& scalar_fn,
    const std::vector<ParamSpec>& params, Real tolerance) {
  GradCheckReport report;

  Tape tape;
  std::vector<Value> leaves;
  leaves.reserve(params.size());
  for (const ParamSpec& p : params) leaves.push_back(tape.leaf(p.shape, p.data, true));
  Value root = scalar_fn(tape, leaves);
  if (root.numel() != 1) throw std::invalid_argument("check_gradients: function is not scalar");
  tape.backward(root);

  auto eval_at = [&](const std::vector<Vec>& data) -> Real {
    Tape t;
    std::vector<Value> ls;
    ls.reserve(params.size());
    for (std::size_t k = 0; k < params.size(); ++k)
      ls.push_back(t.leaf(params[k].shape, data[k], false));
    return scalar_fn(t, ls).scalar();
  };

  std::vector<Vec> point;
  for (const ParamSpec& p : params) point.push_back(p.data);

  for (std::size_t k = 0; k < params.size(); ++k) {
    const Vec g_ad = tape.grad(leaves[k]);
    Vec g_fd(point[k].size());
    for (Index i = 0; i < point[k].size(); ++i) {
      const Real xi = point[k][i];
      const Real h = 1e-5 * (1.0 + std::abs(xi));
      point[k][i] = xi + h;
      const Real fp = eval_at(point);
      point[k][i] = xi - h;
      const Real fm = eval_at(point);
      point[k][i] = xi;
      g_fd[i] = (fp - fm) / (2.0 * h);
    }
    GradCheckEntry entry;
    entry.name = params[k].name;
    const Real denom = std::max(g_fd.cwiseAbs().maxCoeff(), 1e-12);
    entry.max_rel_err = (g_ad - g_fd).cwiseAbs().maxCoeff() / denom;
    entry.pass = entry.max_rel_err <= tolerance;
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

Vec flatten_rowmajor(const Mat& m) {
  Vec v(m.size());
  RowMatMap(v.data(), m.rows(), m.cols()) = m;
  return v;
}

Mat unflatten_rowmajor(const Vec& v, Index rows, Index cols) {
  return ConstRowMatMap(v.data(), rows, cols);
}

}  // namespace georecon::ad
