#include "georecon/autodiff.hpp"

#include <doctest.h>

#include <cmath>

#include "georecon/rng.hpp"
#include "oracles.hpp"

using namespace georecon;
using ad::FlatFn;
using ad::Shape;
using ad::Tape;
using ad::Value;

namespace {

// Two-layer tanh net y = W2 tanh(W1 x + b1) + b2 with constant weights.
struct TinyNet {
  Mat w1, w2;
  Vec b1, b2;

  static TinyNet make(Index in, Index hidden, Index out, std::uint64_t seed) {
    Rng rng(seed);
    TinyNet net;
    net.w1 = rng.gaussian_mat(in, hidden, 0.7);
    net.w2 = rng.gaussian_mat(hidden, out, 0.7);
    net.b1 = rng.gaussian_vec(hidden, 0.3);
    net.b2 = rng.gaussian_vec(out, 0.3);
    return net;
  }

  Value build(Tape& t, Value x) const {
    Value m1 = t.constant(Shape::matrix(w1.rows(), w1.cols()), ad::flatten_rowmajor(w1));
    Value m2 = t.constant(Shape::matrix(w2.rows(), w2.cols()), ad::flatten_rowmajor(w2));
    Value c1 = t.constant(Shape::vector(b1.size()), b1);
    Value c2 = t.constant(Shape::vector(b2.size()), b2);
    Value h = t.tanh(t.add(t.matmul(x, m1), c1));
    return t.add(t.matmul(h, m2), c2);
  }

  Vec eval(const Vec& x) const { return w2.transpose() * (w1.transpose() * x + b1).array().tanh().matrix() + b2; }
};

FlatFn net_fn(const TinyNet& net) {
  return FlatFn{Shape::vector(net.w1.rows()),
                [&net](Tape& t, Value x) { return net.build(t, x); }};
}

}  // namespace

TEST_CASE("backward: sum of squares") {
  Tape t;
  Vec x(3);
  x << 1, 2, 3;
  Value xv = t.leaf(Shape::vector(3), x);
  Value root = t.sum(t.mul(xv, xv));
  t.backward(root);
  Vec g = t.grad(xv);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(g[2] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("backward: constant root has no dependencies") {
  Tape t;
  Value c = t.constant_scalar(5.0);
  Value p = t.leaf(Shape::vector(2), Vec::Ones(2));
  CHECK_NOTHROW(t.backward(c));
  CHECK_FALSE(t.has_grad(p));
}

TEST_CASE("backward: rejects non-scalar and detached roots") {
  Tape t;
  Value v = t.leaf(Shape::vector(3), Vec::Ones(3));
  CHECK_THROWS_AS(t.backward(v), std::invalid_argument);
  Value detached;
  CHECK_THROWS_AS(t.backward(detached), std::invalid_argument);
}

TEST_CASE("backward: two-layer net loss matches central differences") {
  Rng rng(11);
  const Index in = 4, hidden = 5, out = 2;
  Vec x = rng.gaussian_vec(in);
  Vec target = rng.gaussian_vec(out);
  Mat w1 = rng.gaussian_mat(in, hidden, 0.6);
  Mat w2 = rng.gaussian_mat(hidden, out, 0.6);

  Tape t;
  Value w1v = t.leaf(Shape::matrix(in, hidden), ad::flatten_rowmajor(w1));
  Value w2v = t.leaf(Shape::matrix(hidden, out), ad::flatten_rowmajor(w2));
  Value xv = t.constant(Shape::vector(in), x);
  Value pred = t.matmul(t.tanh(t.matmul(xv, w1v)), w2v);
  Value diff = t.sub(pred, t.constant(Shape::vector(out), target));
  t.backward(t.mean(t.mul(diff, diff)));

  auto eval_w1 = [&](const Vec& w1f) {
    Tape tt;
    Value a = tt.constant(Shape::matrix(in, hidden), w1f);
    Value b = tt.constant(Shape::matrix(hidden, out), ad::flatten_rowmajor(w2));
    Value xc = tt.constant(Shape::vector(in), x);
    Value p = tt.matmul(tt.tanh(tt.matmul(xc, a)), b);
    Value d = tt.sub(p, tt.constant(Shape::vector(out), target));
    return tt.mean(tt.mul(d, d)).scalar();
  };
  Vec g_fd = oracles::fd_gradient(eval_w1, ad::flatten_rowmajor(w1));
  Vec g_ad = t.grad(w1v);
  const Real rel = (g_ad - g_fd).cwiseAbs().maxCoeff() / g_fd.cwiseAbs().maxCoeff();
  CHECK(rel <= 1e-4);
}

TEST_CASE("jvp: identity, linear map, and trained net against dense Jacobian") {
  Rng rng(21);

  FlatFn ident{Shape::vector(5), [](Tape&, Value x) { return x; }};
  Vec v = rng.gaussian_vec(5);
  CHECK((ad::jvp(ident, rng.gaussian_vec(5), v) - v).norm() == 0.0);

  const Index n = 4, m = 3;
  Mat a = rng.gaussian_mat(m, n);
  FlatFn linear{Shape::vector(n), [&a, m, n](Tape& t, Value x) {
                  Value av = t.constant(Shape::matrix(m, n), ad::flatten_rowmajor(a));
                  return t.matmul(av, x);
                }};
  Vec e1 = Vec::Zero(n);
  e1[0] = 1.0;
  Vec col = ad::jvp(linear, rng.gaussian_vec(n), e1);
  CHECK((col - a.col(0)).norm() <= 1e-14);

  TinyNet net = TinyNet::make(6, 8, 4, 31);
  FlatFn f = net_fn(net);
  Vec x = rng.gaussian_vec(6);
  Mat jac = oracles::fd_jacobian([&](const Vec& p) { return net.eval(p); }, x);
  Vec dir = rng.gaussian_vec(6);
  Vec jv = ad::jvp(f, x, dir);
  CHECK((jv - jac * dir).norm() / (jac * dir).norm() <= 1e-4);
}

TEST_CASE("jvp: dimension mismatch and non-finite outputs are errors") {
  FlatFn ident{Shape::vector(3), [](Tape&, Value x) { return x; }};
  CHECK_THROWS_AS(ad::jvp(ident, Vec::Ones(3), Vec::Ones(4)), std::invalid_argument);

  FlatFn bad{Shape::vector(2), [](Tape& t, Value x) {
               return t.pow(x, -1.0);  // infinite at zero input
             }};
  CHECK_THROWS_AS(ad::jvp(bad, Vec::Zero(2), Vec::Ones(2)), std::runtime_error);
}

TEST_CASE("vjp: identity, linear map row, adjoint identity") {
  Rng rng(41);
  FlatFn ident{Shape::vector(4), [](Tape&, Value x) { return x; }};
  Vec u = rng.gaussian_vec(4);
  CHECK((ad::vjp(ident, rng.gaussian_vec(4), u) - u).norm() == 0.0);

  const Index n = 5, m = 3;
  Mat a = rng.gaussian_mat(m, n);
  FlatFn linear{Shape::vector(n), [&a, m, n](Tape& t, Value x) {
                  Value av = t.constant(Shape::matrix(m, n), ad::flatten_rowmajor(a));
                  return t.matmul(av, x);
                }};
  Vec e1 = Vec::Zero(m);
  e1[0] = 1.0;
  Vec row = ad::vjp(linear, rng.gaussian_vec(n), e1);
  CHECK((row - a.row(0).transpose()).norm() <= 1e-14);

  TinyNet net = TinyNet::make(5, 7, 3, 43);
  FlatFn f = net_fn(net);
  for (int trial = 0; trial < 20; ++trial) {
    Vec x = rng.gaussian_vec(5);
    Vec dir = rng.gaussian_vec(5);
    Vec cot = rng.gaussian_vec(3);
    ad::Recording rec(f, x);
    const Real lhs = cot.dot(rec.jvp(dir));
    const Real rhs = rec.vjp(cot).dot(dir);
    CHECK(std::abs(lhs - rhs) <= 1e-6 * std::max(std::abs(lhs), 1.0));
  }
}

TEST_CASE("adjoint identity over 100 random nets") {
  Rng rng(57);
  for (int draw = 0; draw < 100; ++draw) {
    const Index in = 2 + static_cast<Index>(rng.uniform_int(6));
    const Index hidden = 2 + static_cast<Index>(rng.uniform_int(10));
    const Index out = 1 + static_cast<Index>(rng.uniform_int(5));
    TinyNet net = TinyNet::make(in, hidden, out, 2000 + static_cast<std::uint64_t>(draw));
    REQUIRE(net.w1.size() + net.w2.size() + net.b1.size() + net.b2.size() <= 500);
    FlatFn f = net_fn(net);
    Vec x = rng.gaussian_vec(in);
    Vec v = rng.gaussian_vec(in);
    Vec u = rng.gaussian_vec(out);
    ad::Recording rec(f, x);
    const Real lhs = u.dot(rec.jvp(v));
    const Real rhs = rec.vjp(u).dot(v);
    const Real scale = std::max({std::abs(lhs), std::abs(rhs), 1e-3});
    CHECK(std::abs(lhs - rhs) / scale <= 1e-6);
  }
}

TEST_CASE("every primitive differentiates correctly") {
  Rng rng(71);
  // Each case builds a scalar through one primitive; gradients are compared
  // against central differences and jvp against the dense FD Jacobian.
  struct Case {
    const char* name;
    Shape in;
    std::function<Value(Tape&, Value)> fn;
    bool positive_input = false;
  };
  const Index m = 3, c = 4;
  Mat a = rng.gaussian_mat(c, 2);
  std::vector<Case> cases = {
      {"add_bcast", Shape::vector(4),
       [](Tape& t, Value x) { return t.add(x, t.constant_scalar(2.5)); }},
      {"sub", Shape::vector(4),
       [](Tape& t, Value x) { return t.sub(t.constant(Shape::vector(4), Vec::Ones(4)), x); }},
      {"mul", Shape::vector(4), [](Tape& t, Value x) { return t.mul(x, x); }},
      {"scale", Shape::vector(4), [](Tape& t, Value x) { return t.scale(x, -1.7); }},
      {"matmul", Shape::matrix(m, c),
       [&a, c](Tape& t, Value x) {
         Value av = t.constant(Shape::matrix(c, 2), ad::flatten_rowmajor(a));
         return t.matmul(x, av);
       }},
      {"mean_rows", Shape::matrix(m, c), [](Tape& t, Value x) { return t.mean_rows(x); }},
      {"concat0", Shape::matrix(m, c),
       [](Tape& t, Value x) { return t.concat(x, t.scale(x, 2.0), 0); }},
      {"concat1", Shape::matrix(m, c),
       [](Tape& t, Value x) { return t.concat(x, t.scale(x, 2.0), 1); }},
      {"slice_rows", Shape::matrix(m, c), [](Tape& t, Value x) { return t.slice(x, 0, 1, 3); }},
      {"slice_cols", Shape::matrix(m, c), [](Tape& t, Value x) { return t.slice(x, 1, 1, 3); }},
      {"reshape", Shape::matrix(m, c),
       [m, c](Tape& t, Value x) { return t.reshape(x, Shape::vector(m * c)); }},
      {"relu", Shape::vector(6), [](Tape& t, Value x) { return t.relu(x); }},
      {"silu", Shape::vector(6), [](Tape& t, Value x) { return t.silu(x); }},
      {"tanh", Shape::vector(6), [](Tape& t, Value x) { return t.tanh(x); }},
      {"exp", Shape::vector(6), [](Tape& t, Value x) { return t.exp(x); }},
      {"sqrt", Shape::vector(6), [](Tape& t, Value x) { return t.sqrt(x); }, true},
      {"pow", Shape::vector(6), [](Tape& t, Value x) { return t.pow(x, 1.5); }, true},
      {"cross", Shape::vector(3),
       [](Tape& t, Value x) {
         Vec b(3);
         b << 0.3, -1.2, 0.8;
         return t.cross(x, t.constant(Shape::vector(3), b));
       }},
      {"norm", Shape::vector(6), [](Tape& t, Value x) { return t.norm(x); }},
  };

  for (const Case& cse : cases) {
    CAPTURE(cse.name);
    Vec x = rng.gaussian_vec(cse.in.numel());
    if (cse.positive_input) x = x.cwiseAbs().array() + 0.5;
    // relu kinks break finite differences; keep coordinates away from zero
    for (Index i = 0; i < x.size(); ++i)
      if (std::abs(x[i]) < 0.05) x[i] = 0.2;

    Vec weights;  // fixed cotangent turning the op output into a scalar
    {
      Rng wrng(99);
      Tape probe;
      Value out = cse.fn(probe, probe.leaf(cse.in, x, false));
      weights = wrng.gaussian_vec(out.numel());
    }
    auto scalar_of = [&](const Vec& p) {
      Tape t;
      Value out = cse.fn(t, t.leaf(cse.in, p, false));
      return weights.dot(out.data());
    };

    Tape t;
    Value leaf = t.leaf(cse.in, x);
    Value out = cse.fn(t, leaf);
    Value wv = t.constant(out.shape(), weights);
    t.backward(t.sum(t.mul(out, wv)));
    Vec g_ad = t.grad(leaf);
    Vec g_fd = oracles::fd_gradient(scalar_of, x);
    const Real denom = std::max(g_fd.cwiseAbs().maxCoeff(), 1e-10);
    CHECK((g_ad - g_fd).cwiseAbs().maxCoeff() / denom <= 2e-4);

    // forward tangents agree with reverse gradients through the adjoint identity
    FlatFn f{cse.in, cse.fn};
    ad::Recording rec(f, x);
    Vec v = Rng(123).gaussian_vec(x.size());
    const Real lhs = weights.dot(rec.jvp(v));
    const Real rhs = rec.vjp(weights).dot(v);
    CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max({std::abs(lhs), std::abs(rhs), 1.0}));
  }
}

TEST_CASE("check_gradients: linear regression passes, detach fixture fails") {
  Rng rng(81);
  const Index n = 6, dim = 3;
  Mat xs = rng.gaussian_mat(n, dim);
  Vec ys = rng.gaussian_vec(n);

  std::vector<ad::ParamSpec> params;
  params.push_back({"w", Shape::vector(dim), rng.gaussian_vec(dim)});
  params.push_back({"b", Shape::scalar(), rng.gaussian_vec(1)});

  auto loss = [&](Tape& t, const std::vector<Value>& p) {
    Value x = t.constant(Shape::matrix(n, dim), ad::flatten_rowmajor(xs));
    Value pred = t.matmul(x, p[0]);
    Value ones = t.constant(Shape::vector(n), Vec::Ones(n));
    pred = t.add(pred, t.mul(ones, p[1]));
    Value diff = t.sub(pred, t.constant(Shape::vector(n), ys));
    return t.mean(t.mul(diff, diff));
  };
  ad::GradCheckReport report = ad::check_gradients(loss, params, 1e-4);
  REQUIRE(report.entries.size() == 2);
  CHECK(report.pass);

  // Zero-parameter function: empty report, passes.
  auto constant_fn = [](Tape& t, const std::vector<Value>&) { return t.constant_scalar(3.0); };
  ad::GradCheckReport empty = ad::check_gradients(constant_fn, {}, 1e-4);
  CHECK(empty.pass);
  CHECK(empty.entries.empty());

  // Negative control: detach severs the recorded gradient while the value
  // still depends on the parameter, so reverse mode disagrees with FD.
  auto corrupted = [&](Tape& t, const std::vector<Value>& p) {
    return t.sum(t.mul(p[0], t.detach(p[0])));
  };
  std::vector<ad::ParamSpec> one = {{"w", Shape::vector(dim), rng.gaussian_vec(dim)}};
  ad::GradCheckReport bad = ad::check_gradients(corrupted, one, 1e-4);
  CHECK_FALSE(bad.pass);
  CHECK_FALSE(bad.entries[0].pass);
}

TEST_CASE("backward is linear in the root") {
  Rng rng(91);
  const Index dim = 5;
  Vec x = rng.gaussian_vec(dim);
  const Real a = 1.7, b = -0.6;

  auto grads = [&](Real ca, Real cb) {
    Tape t;
    Value xv = t.leaf(Shape::vector(dim), x);
    Value f = t.sum(t.mul(xv, xv));
    Value g = t.norm(xv);
    t.backward(t.add(t.scale(f, ca), t.scale(g, cb)));
    return Vec(t.grad(xv));
  };
  Vec combined = grads(a, b);
  Vec from_f = grads(1.0, 0.0);
  Vec from_g = grads(0.0, 1.0);
  CHECK((combined - (a * from_f + b * from_g)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("tape replay reproduces identical bits") {
  Rng rng(101);
  TinyNet net = TinyNet::make(5, 9, 4, 103);
  Vec x = rng.gaussian_vec(5);

  Tape t;
  Value leaf = t.leaf(Shape::vector(5), x, false);
  Value out = net.build(t, leaf);
  Vec first = out.data();
  t.replay();
  Vec second = out.data();
  REQUIRE(first.size() == second.size());
  for (Index i = 0; i < first.size(); ++i) CHECK(first[i] == second[i]);

  // A second, independently recorded tape produces the same bits too.
  Tape t2;
  Value leaf2 = t2.leaf(Shape::vector(5), x, false);
  Vec third = net.build(t2, leaf2).data();
  for (Index i = 0; i < first.size(); ++i) CHECK(first[i] == third[i]);
}
