#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "modreach/control.hpp"
#include "modreach/io.hpp"

namespace modreach {

// Sidecar next to a training checkpoint holding everything the weights do
// not: rng state, the live episode, the replay ring and the target copy.
// Restoring it continues a run bit-for-bit.
inline constexpr char kTrainStateMagic[] = "MTRN1\n";

namespace detail {

inline nlohmann::json joints_to_json(const JointConfig& q) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < q.size(); ++i) a.push_back(q[i]);
  return a;
}

inline JointConfig joints_from_json(const nlohmann::json& a) {
  JointConfig q;
  if (!a.is_array() || a.size() > 3) throw std::runtime_error("bad joint list in train state");
  for (const auto& v : a) q[q.n++] = v.get<double>();
  return q;
}

inline nlohmann::json episode_to_json(const EpisodeState& e) {
  return {{"tx", e.scene.target.x}, {"ty", e.scene.target.y},
          {"q", joints_to_json(e.scene.q)}, {"qs", joints_to_json(e.q_star)},
          {"n", e.n},           {"n_success", e.n_success},
          {"step", e.step},     {"done", e.done},
          {"success", e.success}};
}

inline EpisodeState episode_from_json(const nlohmann::json& j) {
  EpisodeState e;
  e.scene.target = {j.at("tx").get<double>(), j.at("ty").get<double>()};
  e.scene.q = joints_from_json(j.at("q"));
  e.q_star = joints_from_json(j.at("qs"));
  e.n = j.at("n").get<int>();
  e.n_success = j.at("n_success").get<int>();
  e.step = j.at("step").get<int>();
  e.done = j.at("done").get<bool>();
  e.success = j.at("success").get<bool>();
  return e;
}

inline void write_transition(std::ostream& os, const Transition& t) {
  write_f32_array(os, t.s.data(), t.s.size());
  write_f32_array(os, t.s2.data(), t.s2.size());
  write_u32le(os, uint32_t(t.action));
  write_f32_array(os, &t.reward, 1);
  write_exact(os, &t.terminal, 1);
}

inline Transition read_transition(std::istream& is, const std::string& path) {
  Transition t;
  read_f32_array(is, t.s.data(), t.s.size(), "replay in " + path);
  read_f32_array(is, t.s2.data(), t.s2.size(), "replay in " + path);
  t.action = int32_t(read_u32le(is, "replay in " + path));
  read_f32_array(is, &t.reward, 1, "replay in " + path);
  read_exact(is, &t.terminal, 1, "replay in " + path);
  return t;
}

}  // namespace detail

inline void save_control_state(const std::string& path, const ControlTrainer& tr) {
  nlohmann::json hdr;
  hdr["version"] = 1;
  hdr["kind"] = "control";
  hdr["updates"] = tr.updates_done;
  hdr["env_steps"] = tr.env_steps;
  const auto st = tr.rng.state();
  hdr["rng"] = {st[0], st[1], st[2], st[3]};
  hdr["ep_valid"] = tr.ep_valid;
  if (tr.ep_valid) hdr["ep"] = detail::episode_to_json(tr.ep);
  hdr["replay_count"] = tr.replay.size();
  hdr["replay_head"] = tr.replay.head();
  hdr["has_target"] = true;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  write_exact(f, kTrainStateMagic, 6);
  const std::string hs = hdr.dump();
  write_u32le(f, uint32_t(hs.size()));
  write_exact(f, hs.data(), hs.size());
  for (const auto& t : tr.replay.items()) detail::write_transition(f, t);
  for (const auto& p : tr.target.params) write_f32_array(f, p.data.data(), p.data.size());
  if (!f) throw std::runtime_error("write failed: " + path);
}

// Fills the volatile parts of a freshly constructed trainer whose arm, opts,
// net and optimizer already match the paired checkpoint.
inline void load_control_state(const std::string& path, ControlTrainer& tr) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char magic[6];
  read_exact(f, magic, 6, "train state magic in " + path);
  if (std::memcmp(magic, kTrainStateMagic, 6) != 0)
    throw std::runtime_error("not a train state file: " + path);
  const uint32_t hlen = read_u32le(f, "train state header length in " + path);
  if (hlen == 0 || hlen > (1u << 20))
    throw std::runtime_error("implausible train state header size in " + path);
  std::string hs(hlen, '\0');
  read_exact(f, hs.data(), hlen, "train state header in " + path);
  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt train state header in " + path + ": " + e.what());
  }
  if (hdr.value("version", 0) != 1 || hdr.value("kind", "") != "control")
    throw std::runtime_error("unsupported train state in " + path);

  tr.updates_done = hdr.at("updates").get<int64_t>();
  tr.env_steps = hdr.at("env_steps").get<int64_t>();
  const auto r = hdr.at("rng");
  if (!r.is_array() || r.size() != 4) throw std::runtime_error("bad rng state in " + path);
  tr.rng.set_state({r[0].get<uint64_t>(), r[1].get<uint64_t>(), r[2].get<uint64_t>(),
                    r[3].get<uint64_t>()});
  tr.ep_valid = hdr.value("ep_valid", false);
  if (tr.ep_valid) tr.ep = detail::episode_from_json(hdr.at("ep"));

  const size_t count = hdr.at("replay_count").get<size_t>();
  const size_t head = hdr.at("replay_head").get<size_t>();
  if (count > tr.replay.capacity())
    throw std::runtime_error("replay larger than configured capacity in " + path);
  std::vector<Transition> items;
  items.reserve(count);
  for (size_t i = 0; i < count; ++i) items.push_back(detail::read_transition(f, path));
  tr.replay.restore(std::move(items), head);

  if (hdr.value("has_target", false)) {
    for (auto& p : tr.target.params)
      read_f32_array(f, p.data.data(), p.data.size(), "target net in " + path);
  } else {
    tr.target = tr.net;
  }
  f.peek();
  if (!f.eof()) throw std::runtime_error("trailing bytes after train state payload in " + path);
}

// Perception training only needs its sampling rng and step counter restored.
inline void save_perception_state(const std::string& path, const Rng& rng, int64_t step) {
  nlohmann::json hdr;
  hdr["version"] = 1;
  hdr["kind"] = "perception";
  hdr["updates"] = step;
  const auto st = rng.state();
  hdr["rng"] = {st[0], st[1], st[2], st[3]};
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  write_exact(f, kTrainStateMagic, 6);
  const std::string hs = hdr.dump();
  write_u32le(f, uint32_t(hs.size()));
  write_exact(f, hs.data(), hs.size());
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline int64_t load_perception_state(const std::string& path, Rng& rng) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char magic[6];
  read_exact(f, magic, 6, "train state magic in " + path);
  if (std::memcmp(magic, kTrainStateMagic, 6) != 0)
    throw std::runtime_error("not a train state file: " + path);
  const uint32_t hlen = read_u32le(f, "train state header length in " + path);
  if (hlen == 0 || hlen > (1u << 20))
    throw std::runtime_error("implausible train state header size in " + path);
  std::string hs(hlen, '\0');
  read_exact(f, hs.data(), hlen, "train state header in " + path);
  const auto hdr = nlohmann::json::parse(hs, nullptr, false);
  if (hdr.is_discarded() || hdr.value("version", 0) != 1 || hdr.value("kind", "") != "perception")
    throw std::runtime_error("unsupported train state in " + path);
  const auto r = hdr.at("rng");
  rng.set_state({r[0].get<uint64_t>(), r[1].get<uint64_t>(), r[2].get<uint64_t>(),
                 r[3].get<uint64_t>()});
  return hdr.at("updates").get<int64_t>();
}

}  // namespace modreach
