#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "georecon/autodiff.hpp"
#include "georecon/geometry.hpp"
#include "georecon/types.hpp"

namespace georecon {

struct EncoderConfig {
  int num_layers = 4;
  Index hidden_dim = 64;
  Real cutoff = 5.0;  // neighbor radius, Angstrom
  int max_z = 100;
  Index num_rbf = 32;
};

struct DecoderConfig {
  int depth = 3;
  Index width = 64;
};

/// Ordered named parameter blocks; block order is the checkpoint order.
struct ParamSet {
  std::vector<std::pair<std::string, Mat>> blocks;

  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  bool has(const std::string& name) const;
  void add(const std::string& name, Mat value);
  Index total_size() const;
};

/// Parameter blocks bound as tape leaves for one forward episode,
/// aligned with the ParamSet block order.
struct BoundParams {
  const ParamSet* set = nullptr;
  std::vector<ad::Value> leaves;

  ad::Value at(const std::string& name) const;
};

BoundParams bind_params(ad::Tape& tape, const ParamSet& params, bool requires_grad);

/// Encoder + denoising head parameters.
ParamSet init_encoder_params(const EncoderConfig& cfg, std::uint64_t seed);
void add_decoder_params(ParamSet& params, const EncoderConfig& enc, const DecoderConfig& dec,
                        std::uint64_t seed);
/// Scalar readout MLP used by finetuning.
void add_scalar_head_params(ParamSet& params, const EncoderConfig& enc, std::uint64_t seed);
/// Affine probe head (w, b).
void add_linear_head_params(ParamSet& params, const EncoderConfig& enc, std::uint64_t seed);

/// Node embeddings: invariant scalars (N,d) plus equivariant vector features
/// stored per spatial axis as three (N,d) blocks.
struct EncoderOut {
  ad::Value scalars;
  std::array<ad::Value, 3> vectors;
};

/// Equivariant message-passing encoder. Scalar channels mix species
/// embeddings with radial features of neighbor distances; vector channels
/// accumulate gated relative directions and gated neighbor vectors, so
/// scalars are E(3)-invariant and vectors rotate with the input.
EncoderOut encode(ad::Tape& tape, const ad::Value& coords, const std::vector<int>& z,
                  const BoundParams& params, const EncoderConfig& cfg);

/// Mean pooling over node scalars -> graph embedding (d,).
ad::Value pool(ad::Tape& tape, const ad::Value& scalars);

/// Gated equivariant readout of per-atom noise vectors (N,3).
ad::Value denoise_head(ad::Tape& tape, const EncoderOut& node, const BoundParams& params);

/// Graph-conditioned reconstruction decoder: broadcasts g to every node,
/// concatenates with that node's scalars, and a depth-L scalar stack emits
/// gates contracting the node's vector channels into a 3-vector.
ad::Value recon_decode(ad::Tape& tape, const ad::Value& g, const EncoderOut& node_rec,
                       const BoundParams& params, const DecoderConfig& cfg);

/// <w, g> + b.
ad::Value linear_head(ad::Tape& tape, const ad::Value& g, const ad::Value& w, const ad::Value& b);

/// Two-layer scalar readout on g (finetune head).
ad::Value scalar_head(ad::Tape& tape, const ad::Value& g, const BoundParams& params);

/// Plain (non-recording) evaluation of the pooled graph embedding.
Vec eval_graph_embedding(const Coords& coords, const std::vector<int>& z, const ParamSet& params,
                         const EncoderConfig& cfg);

struct SpectralFactors {
  Real product_of_spectral_norms = 0.0;  // product of per-layer operator norms
  Real frobenius_complexity = 0.0;       // sqrt(sum ||W||_F^2 / s^2)
  bool complexity_defined = true;        // false when some layer has zero weight
};

/// Operator norms via power iteration on W^T W, layer by layer.
SpectralFactors spectral_factors(const std::vector<Mat>& layer_weights);

/// Weight matrices of the finetune readout stack, for spectral diagnostics.
std::vector<Mat> scalar_head_weights(const ParamSet& params);

}  // namespace georecon
