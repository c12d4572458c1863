#include "georecon/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "georecon/rng.hpp"

namespace georecon {

using ad::Shape;
using ad::Tape;
using ad::Value;

Mat& ParamSet::at(const std::string& name) {
  for (auto& [n, m] : blocks)
    if (n == name) return m;
  throw std::invalid_argument("parameter block not found: " + name);
}

const Mat& ParamSet::at(const std::string& name) const {
  for (const auto& [n, m] : blocks)
    if (n == name) return m;
  throw std::invalid_argument("parameter block not found: " + name);
}

bool ParamSet::has(const std::string& name) const {
  for (const auto& [n, m] : blocks)
    if (n == name) return true;
  return false;
}

void ParamSet::add(const std::string& name, Mat value) {
  if (has(name)) throw std::invalid_argument("duplicate parameter block: " + name);
  blocks.emplace_back(name, std::move(value));
}

Index ParamSet::total_size() const {
  Index n = 0;
  for (const auto& [name, m] : blocks) n += m.size();
  return n;
}

Value BoundParams::at(const std::string& name) const {
  for (std::size_t i = 0; i < set->blocks.size(); ++i)
    if (set->blocks[i].first == name) return leaves[i];
  throw std::invalid_argument("bound parameter not found: " + name);
}

BoundParams bind_params(Tape& tape, const ParamSet& params, bool requires_grad) {
  BoundParams bound;
  bound.set = &params;
  bound.leaves.reserve(params.blocks.size());
  for (const auto& [name, m] : params.blocks) {
    const Shape s = m.cols() == 1 && m.rows() != 1
                        ? Shape::vector(m.rows())
                        : Shape::matrix(m.rows(), m.cols());
    bound.leaves.push_back(tape.leaf(s, ad::flatten_rowmajor(m), requires_grad));
  }
  return bound;
}

namespace {

Mat glorot(Index rows, Index cols, Rng& rng) {
  const Real limit = std::sqrt(6.0 / static_cast<Real>(rows + cols));
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-limit, limit);
  return m;
}

Mat zeros_vec(Index n) { return Mat::Zero(n, 1); }

// y = x W + 1 b^T ; bias rows replicated through a constant ones column.
Value affine(Tape& t, const Value& x, const Value& w, const Value& b) {
  const Index rows = x.shape().rows();
  Value wm = w.shape().rank == 1 ? t.reshape(w, Shape::matrix(w.numel(), 1)) : w;
  Value xw = t.matmul(x, wm);
  Value ones = t.constant(Shape::matrix(rows, 1), Vec::Ones(rows));
  Value bias = t.matmul(ones, t.reshape(b, Shape::matrix(1, b.numel())));
  return t.add(xw, bias);
}

// Columns [c0, c1) of a row-major matrix value.
Value cols(Tape& t, const Value& m, Index c0, Index c1) { return t.slice(m, 1, c0, c1); }

struct PairList {
  std::vector<Index> src;  // message source j
  std::vector<Index> dst;  // message destination i
};

PairList build_pairs(const Coords& coords, Real cutoff) {
  PairList pairs;
  const Index n = coords.rows();
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      if ((coords.row(i) - coords.row(j)).norm() < cutoff) {
        pairs.dst.push_back(i);
        pairs.src.push_back(j);
      }
    }
  return pairs;
}

// 0/1 selection matrix gathering rows `idx` from an n-row matrix.
Value gather_matrix(Tape& t, const std::vector<Index>& idx, Index n) {
  const Index e = static_cast<Index>(idx.size());
  Vec data = Vec::Zero(e * n);
  for (Index r = 0; r < e; ++r) data[r * n + idx[static_cast<std::size_t>(r)]] = 1.0;
  return t.constant(Shape::matrix(e, n), std::move(data));
}

// Transposed selection: accumulates pair rows into their destination atoms.
Value scatter_matrix(Tape& t, const std::vector<Index>& idx, Index n) {
  const Index e = static_cast<Index>(idx.size());
  Vec data = Vec::Zero(n * e);
  for (Index r = 0; r < e; ++r) data[idx[static_cast<std::size_t>(r)] * e + r] = 1.0;
  return t.constant(Shape::matrix(n, e), std::move(data));
}

Value tile_cols(Tape& t, const Value& col, Index width) {
  return t.matmul(col, t.constant(Shape::matrix(1, width), Vec::Ones(width)));
}

}  // namespace

ParamSet init_encoder_params(const EncoderConfig& cfg, std::uint64_t seed) {
  if (cfg.num_layers < 1 || cfg.hidden_dim < 1 || cfg.cutoff <= 0.0 || cfg.num_rbf < 1)
    throw std::invalid_argument("encoder config: invalid sizes");
  ParamSet p;
  const Index d = cfg.hidden_dim;
  const Index r = cfg.num_rbf;
  std::uint64_t block = 0;
  auto next_rng = [&] { return Rng(derive_seed(seed, block++)); };

  {
    Rng rng = next_rng();
    p.add("embed.species", rng.gaussian_mat(cfg.max_z + 1, d, 0.1));
  }
  for (int l = 0; l < cfg.num_layers; ++l) {
    const std::string base = "enc.l" + std::to_string(l);
    Rng rng = next_rng();
    p.add(base + ".msg.w1", glorot(2 * d + r, d, rng));
    p.add(base + ".msg.b1", zeros_vec(d));
    p.add(base + ".msg.w2", glorot(d, 3 * d, rng));
    p.add(base + ".msg.b2", zeros_vec(3 * d));
    p.add(base + ".upd.w1", glorot(2 * d, d, rng));
    p.add(base + ".upd.b1", zeros_vec(d));
    p.add(base + ".upd.w2", glorot(d, d, rng));
    p.add(base + ".upd.b2", zeros_vec(d));
  }
  {
    Rng rng = next_rng();
    p.add("dns.w1", glorot(2 * d, d, rng));
    p.add("dns.b1", zeros_vec(d));
    p.add("dns.w2", glorot(d, d, rng));
    p.add("dns.b2", zeros_vec(d));
  }
  return p;
}

void add_decoder_params(ParamSet& params, const EncoderConfig& enc, const DecoderConfig& dec,
                        std::uint64_t seed) {
  if (dec.depth < 1 || dec.width < 1) throw std::invalid_argument("decoder config: invalid sizes");
  const Index d = enc.hidden_dim;
  for (int l = 0; l < dec.depth; ++l) {
    Rng rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(l)));
    const Index in = l == 0 ? 2 * d : dec.width;
    const Index out = l == dec.depth - 1 ? d : dec.width;
    const std::string base = "rec.l" + std::to_string(l);
    params.add(base + ".w", glorot(in, out, rng));
    params.add(base + ".b", zeros_vec(out));
  }
}

void add_scalar_head_params(ParamSet& params, const EncoderConfig& enc, std::uint64_t seed) {
  const Index d = enc.hidden_dim;
  Rng rng(derive_seed(seed, 2000));
  params.add("head.w1", glorot(d, d, rng));
  params.add("head.b1", zeros_vec(d));
  params.add("head.w2", glorot(d, 1, rng));
  params.add("head.b2", zeros_vec(1));
}

void add_linear_head_params(ParamSet& params, const EncoderConfig& enc, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 3000));
  params.add("probe.w", glorot(enc.hidden_dim, 1, rng));
  params.add("probe.b", zeros_vec(1));
}

EncoderOut encode(Tape& t, const Value& coords, const std::vector<int>& z,
                  const BoundParams& params, const EncoderConfig& cfg) {
  const Index n = coords.shape().rows();
  if (n < 1) throw std::invalid_argument("encode: empty molecule");
  if (coords.shape().cols() != 3) throw std::invalid_argument("encode: coords must be (N,3)");
  if (static_cast<Index>(z.size()) != n)
    throw std::invalid_argument("encode: atomic number count mismatch");
  for (int zi : z)
    if (zi < 1 || zi > cfg.max_z)
      throw std::invalid_argument("encode: atomic number " + std::to_string(zi) +
                                  " outside embedding range [1, " + std::to_string(cfg.max_z) + "]");
  if (!coords.data().allFinite()) throw std::invalid_argument("encode: non-finite coordinates");

  const Index d = cfg.hidden_dim;
  const Index r = cfg.num_rbf;

  // Initial scalars from the species table; vector channels start at zero.
  std::vector<Index> zidx(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) zidx[i] = z[i];
  Value h = t.matmul(gather_matrix(t, zidx, cfg.max_z + 1), params.at("embed.species"));
  std::array<Value, 3> v;
  for (int a = 0; a < 3; ++a) v[a] = t.constant(Shape::matrix(n, d), Vec::Zero(n * d));

  const Coords pos = unflatten_coords(coords.data());
  const PairList pairs = build_pairs(pos, cfg.cutoff);
  const Index e = static_cast<Index>(pairs.src.size());

  Value gather_dst, gather_src, scatter;
  Value rbf, env_t, dirs;
  if (e > 0) {
    gather_dst = gather_matrix(t, pairs.dst, n);
    gather_src = gather_matrix(t, pairs.src, n);
    scatter = scatter_matrix(t, pairs.dst, n);

    Value diff = t.sub(t.matmul(gather_dst, coords), t.matmul(gather_src, coords));
    Value dsq = t.matmul(t.mul(diff, diff), t.constant(Shape::matrix(3, 1), Vec::Ones(3)));
    Value dist = t.sqrt(dsq);  // (E,1)
    dirs = t.mul(diff, tile_cols(t, t.pow(dist, -1.0), 3));

    // Gaussian radial basis on (0, cutoff] and a polynomial cutoff envelope
    // (1 - (d/rc)^2)^2 so every pair contribution vanishes smoothly at rc.
    const Real spacing = cfg.cutoff / static_cast<Real>(r);
    Vec mu(r);
    for (Index k = 0; k < r; ++k) mu[k] = spacing * static_cast<Real>(k + 1);
    Vec mu_rows(e * r);
    for (Index row = 0; row < e; ++row) mu_rows.segment(row * r, r) = mu;
    Value centers = t.constant(Shape::matrix(e, r), std::move(mu_rows));
    Value dev = t.sub(tile_cols(t, dist, r), centers);
    rbf = t.exp(t.scale(t.mul(dev, dev), -0.5 / (spacing * spacing)));

    Value ratio_sq = t.scale(dsq, 1.0 / (cfg.cutoff * cfg.cutoff));
    Value one_col = t.constant(Shape::matrix(e, 1), Vec::Ones(e));
    Value env = t.sub(one_col, ratio_sq);
    env = t.mul(env, env);
    env_t = tile_cols(t, env, d);
  }

  for (int l = 0; l < cfg.num_layers; ++l) {
    const std::string base = "enc.l" + std::to_string(l);
    Value agg;
    std::array<Value, 3> vec_agg;
    bool have_pairs = e > 0;
    if (have_pairs) {
      Value phi = t.concat(t.concat(t.matmul(gather_dst, h), t.matmul(gather_src, h), 1), rbf, 1);
      Value hidden = t.silu(affine(t, phi, params.at(base + ".msg.w1"), params.at(base + ".msg.b1")));
      Value out = affine(t, hidden, params.at(base + ".msg.w2"), params.at(base + ".msg.b2"));
      Value m_scalar = t.mul(cols(t, out, 0, d), env_t);
      Value gate_dir = t.mul(cols(t, out, d, 2 * d), env_t);
      Value gate_vec = t.mul(cols(t, out, 2 * d, 3 * d), env_t);
      agg = t.matmul(scatter, m_scalar);
      for (int a = 0; a < 3; ++a) {
        Value dir_a = tile_cols(t, cols(t, dirs, a, a + 1), d);
        Value contrib = t.add(t.mul(dir_a, gate_dir), t.mul(t.matmul(gather_src, v[a]), gate_vec));
        vec_agg[a] = t.matmul(scatter, contrib);
      }
    } else {
      agg = t.constant(Shape::matrix(n, d), Vec::Zero(n * d));
    }

    Value upd_in = t.concat(h, agg, 1);
    Value upd_hidden =
        t.silu(affine(t, upd_in, params.at(base + ".upd.w1"), params.at(base + ".upd.b1")));
    Value delta = affine(t, upd_hidden, params.at(base + ".upd.w2"), params.at(base + ".upd.b2"));
    h = t.add(h, delta);
    if (have_pairs)
      for (int a = 0; a < 3; ++a) v[a] = t.add(v[a], vec_agg[a]);
  }

  return EncoderOut{h, v};
}

Value pool(Tape& t, const Value& scalars) { return t.mean_rows(scalars); }

namespace {

// Contract per-channel gates with the vector channels into (N,3).
Value gated_contraction(Tape& t, const Value& gates, const std::array<Value, 3>& v) {
  const Index d = gates.shape().cols();
  Value ones = t.constant(Shape::matrix(d, 1), Vec::Ones(d));
  Value out = t.matmul(t.mul(gates, v[0]), ones);
  out = t.concat(out, t.matmul(t.mul(gates, v[1]), ones), 1);
  out = t.concat(out, t.matmul(t.mul(gates, v[2]), ones), 1);
  return out;
}

Value vector_norms_sq(Tape& t, const std::array<Value, 3>& v) {
  return t.add(t.add(t.mul(v[0], v[0]), t.mul(v[1], v[1])), t.mul(v[2], v[2]));
}

}  // namespace

Value denoise_head(Tape& t, const EncoderOut& node, const BoundParams& params) {
  Value feats = t.concat(node.scalars, vector_norms_sq(t, node.vectors), 1);
  Value hidden = t.silu(affine(t, feats, params.at("dns.w1"), params.at("dns.b1")));
  Value gates = affine(t, hidden, params.at("dns.w2"), params.at("dns.b2"));
  return gated_contraction(t, gates, node.vectors);
}

Value recon_decode(Tape& t, const Value& g, const EncoderOut& node_rec, const BoundParams& params,
                   const DecoderConfig& cfg) {
  const Index n = node_rec.scalars.shape().rows();
  const Index d = node_rec.scalars.shape().cols();
  if (g.numel() != d)
    throw std::invalid_argument("recon_decode: graph embedding width " +
                                std::to_string(g.numel()) + " does not match decoder input " +
                                std::to_string(d));
  Value ones = t.constant(Shape::matrix(n, 1), Vec::Ones(n));
  Value g_bcast = t.matmul(ones, t.reshape(g, Shape::matrix(1, d)));
  Value x = t.concat(g_bcast, node_rec.scalars, 1);
  for (int l = 0; l < cfg.depth; ++l) {
    const std::string base = "rec.l" + std::to_string(l);
    x = affine(t, x, params.at(base + ".w"), params.at(base + ".b"));
    if (l + 1 < cfg.depth) x = t.silu(x);
  }
  return gated_contraction(t, x, node_rec.vectors);
}

Value linear_head(Tape& t, const Value& g, const Value& w, const Value& b) {
  if (g.numel() != w.numel())
    throw std::invalid_argument("linear_head: dimension mismatch");
  Value gv = g.shape().rank == 1 ? g : t.reshape(g, Shape::vector(g.numel()));
  Value wv = w.shape().rank == 1 ? w : t.reshape(w, Shape::vector(w.numel()));
  Value bs = b.shape().rank == 0 ? b : t.reshape(b, Shape::scalar());
  return t.add(t.matmul(gv, wv), bs);
}

Value scalar_head(Tape& t, const Value& g, const BoundParams& params) {
  Value row = t.reshape(g, Shape::matrix(1, g.numel()));
  Value hidden = t.silu(affine(t, row, params.at("head.w1"), params.at("head.b1")));
  Value out = affine(t, hidden, params.at("head.w2"), params.at("head.b2"));
  return t.reshape(out, Shape::scalar());
}

Vec eval_graph_embedding(const Coords& coords, const std::vector<int>& z, const ParamSet& params,
                         const EncoderConfig& cfg) {
  Tape t;
  Value x = t.leaf(Shape::matrix(coords.rows(), 3), ad::flatten_rowmajor(coords), false);
  BoundParams bound = bind_params(t, params, false);
  EncoderOut enc = encode(t, x, z, bound, cfg);
  return pool(t, enc.scalars).data();
}

SpectralFactors spectral_factors(const std::vector<Mat>& layer_weights) {
  SpectralFactors f;
  f.product_of_spectral_norms = 1.0;
  Real complexity_sq = 0.0;
  Rng rng(0x5eedu);
  for (const Mat& w : layer_weights) {
    Real s = 0.0;
    if (w.norm() > 0.0) {
      Vec v = rng.gaussian_vec(w.cols());
      v.normalize();
      Real prev = 0.0;
      for (int it = 0; it < 500; ++it) {
        Vec wv = w * v;
        s = wv.norm();
        if (s == 0.0) break;
        v = w.transpose() * wv;
        v.normalize();
        if (std::abs(s - prev) <= 1e-13 * s && it > 2) break;
        prev = s;
      }
    }
    f.product_of_spectral_norms *= s;
    if (s == 0.0)
      f.complexity_defined = false;
    else
      complexity_sq += w.squaredNorm() / (s * s);
  }
  f.frobenius_complexity = f.complexity_defined ? std::sqrt(complexity_sq) : 0.0;
  return f;
}

std::vector<Mat> scalar_head_weights(const ParamSet& params) {
  return {params.at("head.w1"), params.at("head.w2")};
}

}  // namespace georecon
