#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "georecon/types.hpp"

namespace georecon::ad {

/// Dense tensor shape, rank <= 2. Scalars are rank 0 with one element.
struct Shape {
  int rank = 0;
  std::array<Index, 2> dim{{0, 0}};

  static Shape scalar() { return Shape{}; }
  static Shape vector(Index n) { return Shape{1, {n, 0}}; }
  static Shape matrix(Index r, Index c) { return Shape{2, {r, c}}; }

  Index numel() const {
    if (rank == 0) return 1;
    if (rank == 1) return dim[0];
    return dim[0] * dim[1];
  }
  Index rows() const { return rank == 2 ? dim[0] : (rank == 1 ? dim[0] : 1); }
  Index cols() const { return rank == 2 ? dim[1] : 1; }

  friend bool operator==(const Shape& a, const Shape& b) {
    if (a.rank != b.rank) return false;
    for (int i = 0; i < a.rank; ++i)
      if (a.dim[i] != b.dim[i]) return false;
    return true;
  }
  std::string str() const;
};

enum class Op : std::uint8_t {
  kConst,
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kScale,      // value * c0
  kMatMul,
  kSum,        // all elements -> scalar
  kMean,       // all elements -> scalar
  kMeanRows,   // (m,n) -> (n,) column means, row-order independent
  kConcat,     // along axis i0
  kSlice,      // axis i0, range [i1, i2)
  kReshape,
  kRelu,
  kSilu,
  kTanh,
  kExp,
  kSqrt,
  kPow,        // elementwise x^c0
  kCross,      // 3-vector cross product
  kNorm,       // full-tensor L2 norm -> scalar
  kDetach,
};

class Tape;

/// Handle to a node on a tape. Default-constructed handles are detached.
struct Value {
  Tape* tape = nullptr;
  std::int32_t id = -1;

  bool attached() const { return tape != nullptr && id >= 0; }
  const Shape& shape() const;
  Index numel() const { return shape().numel(); }
  const Vec& data() const;
  Real scalar() const;
};

struct Node {
  Op op;
  bool requires_grad = false;
  Shape shape;
  std::int32_t a = -1, b = -1;  // parent ids
  Real c0 = 0.0;                // scale factor or exponent
  Index i0 = 0, i1 = 0, i2 = 0; // axis / slice bounds
  Vec value;                    // flat, row-major
  Vec grad;                     // adjoint accumulator
  Vec tangent;                  // forward-mode accumulator
  bool has_grad = false;
  bool has_tangent = false;
};

/// Recording tape for one forward/backward episode. Single writer.
/// Values are evaluated eagerly at record time; replay() re-executes the
/// recorded program and reproduces identical bits for identical leaf data.
class Tape {
 public:
  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value constant(const Shape& s, Vec data);
  Value constant_scalar(Real v);
  Value leaf(const Shape& s, Vec data, bool requires_grad = true);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
  Node& node(std::int32_t id) { return nodes_[static_cast<std::size_t>(id)]; }

  /// Reverse accumulation from a scalar root into every reachable
  /// gradient-enabled leaf. Clears previous gradients first.
  void backward(const Value& root);

  /// Reverse accumulation from a non-scalar output seeded with cotangent u.
  void backward_with_cotangent(const Value& out, const Vec& u);

  /// Forward (tangent) sweep: seeds d(leaf)=v and propagates J.v to all nodes.
  void forward_tangent(const Value& seed_leaf, const Vec& v);

  /// Tangent sweep seeded at several leaves at once (directional derivative
  /// in the joint space of those leaves, e.g. all parameter blocks).
  void forward_tangent_multi(const std::vector<std::pair<Value, Vec>>& seeds);

  bool has_grad(const Value& v) const { return node(v.id).has_grad; }
  Vec grad(const Value& v) const;
  Vec tangent(const Value& v) const;

  /// Overwrite a leaf/constant value (shape must match), then replay() to
  /// propagate. Used for checkpoint-free re-evaluation of a recorded program.
  void set_value(const Value& leaf, const Vec& data);
  void replay();

  // Recorded primitive builders. Shape errors throw std::invalid_argument.
  Value add(const Value& a, const Value& b);
  Value sub(const Value& a, const Value& b);
  Value mul(const Value& a, const Value& b);
  Value scale(const Value& a, Real c);
  Value matmul(const Value& a, const Value& b);
  Value sum(const Value& a);
  Value mean(const Value& a);
  Value mean_rows(const Value& a);
  Value concat(const Value& a, const Value& b, int axis);
  Value slice(const Value& a, int axis, Index begin, Index end);
  Value reshape(const Value& a, const Shape& s);
  Value relu(const Value& a);
  Value silu(const Value& a);
  Value tanh(const Value& a);
  Value exp(const Value& a);
  Value sqrt(const Value& a);
  Value pow(const Value& a, Real exponent);
  Value cross(const Value& a, const Value& b);
  Value norm(const Value& a);
  Value detach(const Value& a);

 private:
  friend struct Value;
  Value push(Node n);
  void eval(Node& n);
  void backprop(std::int32_t root_id);
  void accumulate(std::int32_t id, const Vec& g);

  std::vector<Node> nodes_;
};

inline const Shape& Value::shape() const { return tape->node(id).shape; }
inline const Vec& Value::data() const { return tape->node(id).value; }

// Operator sugar.
inline Value operator+(const Value& a, const Value& b) { return a.tape->add(a, b); }
inline Value operator-(const Value& a, const Value& b) { return a.tape->sub(a, b); }
inline Value operator*(const Value& a, const Value& b) { return a.tape->mul(a, b); }
inline Value operator*(const Value& a, Real c) { return a.tape->scale(a, c); }
inline Value operator*(Real c, const Value& a) { return a.tape->scale(a, c); }

/// A differentiable map from one flat input vector to a flat output vector.
/// `build` records the computation of the output from a single leaf input.
struct FlatFn {
  Shape input_shape;
  std::function<Value(Tape&, Value)> build;
};

/// One recorded evaluation of a FlatFn at a point; supports repeated
/// Jacobian-vector and vector-Jacobian products without re-recording.
class Recording {
 public:
  Recording(const FlatFn& f, const Vec& x);

  Index input_dim() const { return input_.numel(); }
  Index output_dim() const { return output_.numel(); }
  const Vec& output() const { return output_.data(); }

  Vec jvp(const Vec& v);
  Vec vjp(const Vec& u);

 private:
  Tape tape_;
  Value input_;
  Value output_;
};

/// J_f(x) . v via a forward tangent sweep over a fresh recording.
Vec jvp(const FlatFn& f, const Vec& x, const Vec& v);

/// J_f(x)^T . u via one reverse sweep over a fresh recording.
Vec vjp(const FlatFn& f, const Vec& x, const Vec& u);

/// Named parameter block fed to check_gradients.
struct ParamSpec {
  std::string name;
  Shape shape;
  Vec data;
};

struct GradCheckEntry {
  std::string name;
  Real max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool pass = true;
};

/// Compares reverse-mode gradients of a scalar function against central
/// finite differences, blockwise. Failures are recorded, never thrown.
GradCheckReport check_gradients(
    const std::function<Value(Tape&, const std::vector<Value>&)>& scalar_fn,
    const std::vector<ParamSpec>& params, Real tolerance);

// Flat row-major bridging between Eigen matrices and tape vectors.
Vec flatten_rowmajor(const Mat& m);
Mat unflatten_rowmajor(const Vec& v, Index rows, Index cols);

}  // namespace georecon::ad
