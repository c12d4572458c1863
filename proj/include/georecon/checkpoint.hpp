#pragma once

#include <string>

#include "georecon/model.hpp"

namespace georecon {

/// Self-contained model snapshot: configs plus all named parameter blocks.
struct Checkpoint {
  EncoderConfig encoder;
  DecoderConfig decoder;
  ParamSet params;
};

/// Single-file layout: magic, JSON manifest (block names, shapes, order, and
/// configs), then one little-endian float64 payload blob holding every block
/// row-major in manifest order.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace georecon
