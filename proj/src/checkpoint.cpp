#include "georecon/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "georecon/autodiff.hpp"

namespace georecon {

namespace {

constexpr char kMagic[8] = {'G', 'R', 'C', 'C', 'K', 'P', 'T', '1'};

void require_little_endian() {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  if constexpr (std::endian::native != std::endian::little)
    throw std::runtime_error("checkpoint: big-endian hosts are not supported");
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  require_little_endian();
  nlohmann::json manifest;
  manifest["format"] = "georecon-checkpoint";
  manifest["version"] = 1;
  manifest["dtype"] = "f64";
  manifest["byte_order"] = "le";
  manifest["encoder"] = {{"num_layers", ckpt.encoder.num_layers},
                         {"hidden_dim", ckpt.encoder.hidden_dim},
                         {"cutoff", ckpt.encoder.cutoff},
                         {"max_z", ckpt.encoder.max_z},
                         {"num_rbf", ckpt.encoder.num_rbf}};
  manifest["decoder"] = {{"depth", ckpt.decoder.depth}, {"width", ckpt.decoder.width}};
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& [name, m] : ckpt.params.blocks)
    blocks.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}});
  manifest["blocks"] = std::move(blocks);

  const std::string header = manifest.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [name, m] : ckpt.params.blocks) {
    const Vec flat = ad::flatten_rowmajor(m);
    out.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(Real)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  require_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint: truncated manifest in " + path);

  const nlohmann::json manifest = nlohmann::json::parse(header);
  if (manifest.value("dtype", "") != "f64" || manifest.value("byte_order", "") != "le")
    throw std::runtime_error("checkpoint: unsupported payload encoding in " + path);

  Checkpoint ckpt;
  ckpt.encoder.num_layers = manifest["encoder"]["num_layers"].get<int>();
  ckpt.encoder.hidden_dim = manifest["encoder"]["hidden_dim"].get<Index>();
  ckpt.encoder.cutoff = manifest["encoder"]["cutoff"].get<Real>();
  ckpt.encoder.max_z = manifest["encoder"]["max_z"].get<int>();
  ckpt.encoder.num_rbf = manifest["encoder"]["num_rbf"].get<Index>();
  ckpt.decoder.depth = manifest["decoder"]["depth"].get<int>();
  ckpt.decoder.width = manifest["decoder"]["width"].get<Index>();

  for (const auto& block : manifest["blocks"]) {
    const Index rows = block["shape"][0].get<Index>();
    const Index cols = block["shape"][1].get<Index>();
    Vec flat(rows * cols);
    in.read(reinterpret_cast<char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(Real)));
    if (!in) throw std::runtime_error("checkpoint: truncated payload in " + path);
    ckpt.params.add(block["name"].get<std::string>(), ad::unflatten_rowmajor(flat, rows, cols));
  }
  return ckpt;
}

}  // namespace georecon
