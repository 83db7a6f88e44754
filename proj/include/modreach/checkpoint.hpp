#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "modreach/io.hpp"
#include "modreach/nn.hpp"

namespace modreach {

// Network weights on disk: a magic line, a little-endian length-prefixed
// JSON header describing the architecture and tensor shapes, then the raw
// f32 parameter arrays in header order, then the optimizer accumulators
// when present.
inline constexpr char kCheckpointMagic[] = "MDQN1\n";

struct Checkpoint {
  Network net;
  int64_t step = 0;
  uint64_t seed = 0;
  std::optional<OptimizerState> opt;
};

inline void save_checkpoint(const std::string& path, const Network& net, int64_t step,
                            uint64_t seed, const OptimizerState* opt = nullptr) {
  nlohmann::json hdr;
  hdr["version"] = 1;
  hdr["net"] = net.spec.to_json();
  hdr["dtype"] = "f32le";
  hdr["step"] = step;
  hdr["seed"] = seed;
  hdr["has_opt"] = opt != nullptr;
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& p : net.params) shapes.push_back(p.shape);
  hdr["shapes"] = shapes;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  write_exact(f, kCheckpointMagic, 6);
  const std::string hs = hdr.dump();
  write_u32le(f, uint32_t(hs.size()));
  write_exact(f, hs.data(), hs.size());
  for (const auto& p : net.params) write_f32_array(f, p.data.data(), p.data.size());
  if (opt) {
    if (opt->acc.size() != net.params.size())
      throw std::invalid_argument("optimizer state does not match network");
    for (const auto& a : opt->acc) write_f32_array(f, a.data.data(), a.data.size());
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char magic[6];
  read_exact(f, magic, 6, "checkpoint magic in " + path);
  if (std::memcmp(magic, kCheckpointMagic, 6) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  const uint32_t hlen = read_u32le(f, "checkpoint header length in " + path);
  if (hlen == 0 || hlen > (1u << 20))
    throw std::runtime_error("implausible checkpoint header size in " + path);
  std::string hs(hlen, '\0');
  read_exact(f, hs.data(), hlen, "checkpoint header in " + path);

  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt checkpoint header in " + path + ": " + e.what());
  }
  if (hdr.value("version", 0) != 1)
    throw std::runtime_error("unsupported checkpoint version in " + path);
  if (hdr.value("dtype", "") != "f32le")
    throw std::runtime_error("unsupported checkpoint dtype in " + path);

  Checkpoint ck;
  ck.net = Network(NetworkSpec::from_json(hdr.at("net")));
  ck.step = hdr.value("step", int64_t(0));
  ck.seed = hdr.value("seed", uint64_t(0));

  const auto& shapes = hdr.at("shapes");
  if (shapes.size() != ck.net.params.size())
    throw std::runtime_error("checkpoint shape list does not match architecture in " + path);
  for (size_t i = 0; i < ck.net.params.size(); ++i) {
    const auto sh = shapes[i].get<std::vector<int>>();
    if (sh != ck.net.params[i].shape)
      throw std::runtime_error("checkpoint tensor shape mismatch in " + path);
  }

  for (auto& p : ck.net.params)
    read_f32_array(f, p.data.data(), p.data.size(), "parameters in " + path);
  if (hdr.value("has_opt", false)) {
    OptimizerState opt(ck.net);
    for (auto& a : opt.acc)
      read_f32_array(f, a.data.data(), a.data.size(), "optimizer state in " + path);
    ck.opt = std::move(opt);
  }
  f.peek();
  if (!f.eof()) throw std::runtime_error("trailing bytes after checkpoint payload in " + path);
  for (const auto& p : ck.net.params)
    if (!p.all_finite()) throw std::runtime_error("non-finite parameters in " + path);
  return ck;
}

}  // namespace modreach
