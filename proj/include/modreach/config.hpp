#pragma once

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "modreach/arm.hpp"
#include "modreach/control.hpp"
#include "modreach/dataset.hpp"
#include "modreach/e2e.hpp"
#include "modreach/perception.hpp"
#include "modreach/render.hpp"

namespace modreach {

// Flat key=value configuration with [section] grouping. Every key must be
// registered below with its default; anything else is rejected so typos
// cannot silently fall back to defaults.
class RunConfig {
 public:
  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"arm.dof", "3"},
        {"arm.links", "0.37,0.374,0.229"},
        {"arm.limits_lo", "-1.0,-0.8,-1.2"},
        {"arm.limits_hi", "1.0,1.6,1.2"},
        {"arm.rest", "0,0,0"},
        {"arm.action_step", "0.04"},
        {"arm.reach_delta", "0.05"},
        {"arm.reward_lambda", "0.001"},
        {"arm.success_consec", "4"},
        {"arm.success_dist", "0.16"},
        {"arm.max_steps", "200"},
        {"arm.frame_half", "0.96"},

        {"render.link_radius", "0.035"},
        {"render.joint_radius", "0.055"},
        {"render.target_radius", "0.09"},

        {"augment.rot_deg", "5"},
        {"augment.shift_px", "3"},
        {"augment.noise_sigma", "0.02"},
        {"augment.brightness", "0.1"},

        {"data.count", "8000"},
        {"data.style", "A"},
        {"data.augment", "false"},
        {"data.occluders", "false"},

        {"perception.steps", "100000"},
        {"perception.batch", "128"},
        {"perception.lr_start", "0.01"},
        {"perception.lr_end", "0.001"},
        {"perception.mix", "0"},
        {"perception.eval_every", "2500"},
        {"perception.stop_err", "0"},
        {"perception.trace_every", "100"},

        {"control.updates", "150000"},
        {"control.batch", "64"},
        {"control.lr_start", "0.01"},
        {"control.lr_end", "0.001"},
        {"control.gamma", "0.99"},
        {"control.replay", "100000"},
        {"control.warmup", "1000"},
        {"control.target_sync", "1000"},
        {"control.eps_start", "1.0"},
        {"control.eps_end", "0.1"},
        {"control.eps_decay", "0"},
        {"control.method", "kgps"},
        {"control.eval_every", "5000"},
        {"control.eval_episodes", "200"},
        {"control.stop_success", "0"},

        {"finetune.updates", "30000"},
        {"finetune.beta", "0.8"},
        {"finetune.q_batch", "64"},
        {"finetune.per_batch_b", "192"},
        {"finetune.per_batch_a", "64"},
        {"finetune.lr_start", "0.01"},
        {"finetune.lr_end", "0.001"},
        {"finetune.gamma", "0.99"},
        {"finetune.replay", "20000"},
        {"finetune.warmup", "500"},
        {"finetune.target_sync", "1000"},
        {"finetune.eps", "0.1"},
        {"finetune.method", "kgps"},
        {"finetune.style", "A"},
        {"finetune.naive", "false"},
        {"finetune.eval_every", "2000"},
        {"finetune.eval_episodes", "20"},

        {"eval.episodes", "400"},
        {"eval.style", "A"},
        {"eval.workers", "1"},
    };
    return d;
  }

  void set(const std::string& key, const std::string& value) {
    if (defaults().count(key) == 0) throw std::invalid_argument("unknown config key: " + key);
    values_[key] = value;
  }

  bool overridden(const std::string& key) const { return values_.count(key) > 0; }

  // key=value lines, optional [section] headers prefixing bare keys, # or ;
  // comments, blank lines ignored.
  void load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    std::string line, section;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      const auto hash = line.find_first_of("#;");
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": malformed section");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key=value");
      std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;
      try {
        set(key, value);
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  std::string get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    const auto d = defaults().find(key);
    if (d == defaults().end()) throw std::invalid_argument("unknown config key: " + key);
    return d->second;
  }

  double get_double(const std::string& key) const {
    const std::string v = get(key);
    size_t pos = 0;
    double r;
    try {
      r = std::stod(v, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("config key " + key + ": not a number: '" + v + "'");
    }
    if (pos != v.size())
      throw std::invalid_argument("config key " + key + ": not a number: '" + v + "'");
    return r;
  }

  int64_t get_int(const std::string& key) const {
    const std::string v = get(key);
    size_t pos = 0;
    int64_t r;
    try {
      r = std::stoll(v, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("config key " + key + ": not an integer: '" + v + "'");
    }
    if (pos != v.size())
      throw std::invalid_argument("config key " + key + ": not an integer: '" + v + "'");
    return r;
  }

  bool get_bool(const std::string& key) const {
    std::string v = get(key);
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config key " + key + ": not a boolean: '" + get(key) + "'");
  }

  std::vector<double> get_list(const std::string& key) const {
    const std::string v = get(key);
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) throw std::invalid_argument("config key " + key + ": empty list element");
      size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size())
        throw std::invalid_argument("config key " + key + ": bad list element '" + item + "'");
    }
    if (out.empty()) throw std::invalid_argument("config key " + key + ": empty list");
    return out;
  }

  // Full effective configuration, defaults overlaid with overrides, grouped
  // into sections. Stable across reruns so output directories diff clean.
  std::string echo() const {
    std::string out;
    std::string section;
    for (const auto& [key, def] : defaults()) {
      const auto dot = key.find('.');
      const std::string sec = key.substr(0, dot);
      if (sec != section) {
        if (!out.empty()) out += "\n";
        out += "[" + sec + "]\n";
        section = sec;
      }
      out += key.substr(dot + 1) + " = " + get(key) + "\n";
    }
    return out;
  }

  void echo_to(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << echo();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

inline ArmModel arm_from_config(const RunConfig& cfg) {
  ArmModel m;
  m.dof = int(cfg.get_int("arm.dof"));
  const auto links = cfg.get_list("arm.links");
  const auto lo = cfg.get_list("arm.limits_lo");
  const auto hi = cfg.get_list("arm.limits_hi");
  const auto rest = cfg.get_list("arm.rest");
  if (links.size() != 3 || lo.size() != 3 || hi.size() != 3 || rest.size() != 3)
    throw std::invalid_argument("arm link/limit/rest lists must have 3 entries");
  for (int i = 0; i < 3; ++i) {
    m.links[size_t(i)] = links[size_t(i)];
    m.limit_lo[size_t(i)] = lo[size_t(i)];
    m.limit_hi[size_t(i)] = hi[size_t(i)];
    m.rest[size_t(i)] = rest[size_t(i)];
  }
  m.action_step = cfg.get_double("arm.action_step");
  m.reach_delta = cfg.get_double("arm.reach_delta");
  m.reward_lambda = cfg.get_double("arm.reward_lambda");
  m.success_consec = int(cfg.get_int("arm.success_consec"));
  m.success_dist = cfg.get_double("arm.success_dist");
  m.max_steps = int(cfg.get_int("arm.max_steps"));
  m.frame_half = cfg.get_double("arm.frame_half");
  m.validate();
  return m;
}

inline RenderConfig render_from_config(const RunConfig& cfg) {
  RenderConfig rc;
  rc.link_radius = cfg.get_double("render.link_radius");
  rc.joint_radius = cfg.get_double("render.joint_radius");
  rc.target_radius = cfg.get_double("render.target_radius");
  if (rc.link_radius <= 0 || rc.joint_radius <= 0 || rc.target_radius <= 0)
    throw std::invalid_argument("render radii must be positive");
  return rc;
}

inline AugmentOpts augment_from_config(const RunConfig& cfg) {
  AugmentOpts a;
  a.max_rot_deg = cfg.get_double("augment.rot_deg");
  a.max_shift_px = cfg.get_double("augment.shift_px");
  a.noise_sigma = cfg.get_double("augment.noise_sigma");
  a.max_brightness = cfg.get_double("augment.brightness");
  return a;
}

inline bool method_is_kgps(const std::string& m) {
  if (m == "kgps") return true;
  if (m == "egreedy") return false;
  throw std::invalid_argument("method must be kgps or egreedy, got '" + m + "'");
}

// `q=0.1,0.2,-0.3;target=0.45,0.20` with q arity equal to the arm's dof.
inline SceneConfig parse_scene_literal(const std::string& text, const ArmModel& arm) {
  std::vector<double> q, target;
  std::stringstream parts(text);
  std::string part;
  while (std::getline(parts, part, ';')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("scene literal: expected name=values in '" + part + "'");
    auto trimmed = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    const std::string name = trimmed(part.substr(0, eq));
    std::vector<double> vals;
    std::stringstream ss(part.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trimmed(item);
      size_t pos = 0;
      vals.push_back(std::stod(item, &pos));
      if (pos != item.size())
        throw std::invalid_argument("scene literal: bad number '" + item + "'");
    }
    if (name == "q")
      q = vals;
    else if (name == "target")
      target = vals;
    else
      throw std::invalid_argument("scene literal: unknown field '" + name + "'");
  }
  if (int(q.size()) != arm.dof)
    throw std::invalid_argument("scene literal: q needs " + std::to_string(arm.dof) +
                                " angles, got " + std::to_string(q.size()));
  if (target.size() != 2) throw std::invalid_argument("scene literal: target needs 2 coordinates");
  SceneConfig s;
  s.q.n = arm.dof;
  for (int i = 0; i < arm.dof; ++i) s.q[i] = q[size_t(i)];
  s.target = {target[0], target[1]};
  if (!arm.within_limits(s.q)) throw std::invalid_argument("scene literal: q outside joint limits");
  return s;
}

}  // namespace modreach
