#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modreach/arm.hpp"
#include "modreach/io.hpp"
#include "modreach/render.hpp"
#include "modreach/tensor.hpp"

namespace modreach {

// Labelled image corpus for the perception regressor. Images are stored
// quantized to bytes, exactly as they serialize, so that a generated set and
// a reloaded set feed training identically.
struct Dataset {
  int dof = 3;
  RenderStyle style = RenderStyle::a;
  uint64_t seed = 0;
  int w = 84, h = 84;
  std::vector<double> ranges;   // [frame_half, lo_0, hi_0, ...] used for labels
  std::vector<float> thetas;    // count * (2+dof)
  std::vector<uint8_t> images;  // count * w * h

  int theta_dim() const { return 2 + dof; }
  int64_t image_numel() const { return int64_t(w) * h; }
  int64_t size() const { return theta_dim() == 0 ? 0 : int64_t(thetas.size()) / theta_dim(); }

  const float* theta(int64_t i) const { return thetas.data() + i * theta_dim(); }
  const uint8_t* image(int64_t i) const { return images.data() + i * image_numel(); }

  // Decodes sample i into a [h,w,1] float slab at dst.
  void decode_image(int64_t i, float* dst) const {
    const uint8_t* src = image(i);
    for (int64_t k = 0; k < image_numel(); ++k) dst[k] = float(src[k]) / 255.f;
  }
};

inline std::vector<double> label_ranges(const ArmModel& m) {
  std::vector<double> r{m.frame_half};
  for (int i = 0; i < m.dof; ++i) {
    r.push_back(m.lo(i));
    r.push_back(m.hi(i));
  }
  return r;
}

// Random image jitter: rotation about the image center, subpixel shift,
// additive Gaussian noise, then a brightness offset, clamped to [0,1].
// It models sensor variation, so labels stay those of the clean scene.
struct AugmentOpts {
  double max_rot_deg = 5.0;
  double max_shift_px = 3.0;
  double noise_sigma = 0.02;
  double max_brightness = 0.1;
};

inline void augment_image(const float* src, float* dst, int w, int h, Rng& rng,
                          const AugmentOpts& o = {}) {
  const double ang = rng.uniform(-o.max_rot_deg, o.max_rot_deg) * std::acos(-1.0) / 180.0;
  const double dx = rng.uniform(-o.max_shift_px, o.max_shift_px);
  const double dy = rng.uniform(-o.max_shift_px, o.max_shift_px);
  const double c = std::cos(ang), s = std::sin(ang);
  const double cx = (w - 1) * 0.5, cy = (h - 1) * 0.5;

  // Clamp-to-edge bilinear lookup of the source.
  auto sample = [&](double x, double y) -> double {
    x = std::clamp(x, 0.0, double(w - 1));
    y = std::clamp(y, 0.0, double(h - 1));
    const int x0 = int(x), y0 = int(y);
    const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const double tx = x - x0, ty = y - y0;
    const double top = src[y0 * w + x0] * (1 - tx) + src[y0 * w + x1] * tx;
    const double bot = src[y1 * w + x0] * (1 - tx) + src[y1 * w + x1] * tx;
    return top * (1 - ty) + bot * ty;
  };

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double u = x - cx, v = y - cy;
      double val = sample(c * u + s * v + cx - dx, -s * u + c * v + cy - dy);
      if (o.noise_sigma > 0) val += o.noise_sigma * rng.gaussian();
      dst[y * w + x] = float(val);
    }
  const double bright = rng.uniform(-o.max_brightness, o.max_brightness);
  for (int i = 0; i < w * h; ++i) dst[i] = float(std::clamp(double(dst[i]) + bright, 0.0, 1.0));
}

// Renders `count` freshly sampled scenes in the given style, optionally
// jittering each stored image. Occluders, when requested, cover a random
// patch of the final image per sample.
inline Dataset gen_dataset(const ArmModel& arm, int count, RenderStyle style, uint64_t seed,
                           bool augment = false, const AugmentOpts& aug_opts = {},
                           bool with_occluders = false, const RenderConfig& rc = {}) {
  if (count < 1) throw std::invalid_argument("dataset size must be positive");
  arm.validate();
  Dataset ds;
  ds.dof = arm.dof;
  ds.style = style;
  ds.seed = seed;
  ds.ranges = label_ranges(arm);
  ds.thetas.reserve(size_t(count) * size_t(ds.theta_dim()));
  ds.images.reserve(size_t(count) * size_t(ds.image_numel()));

  Rng rng(seed);
  std::vector<float> jittered(size_t(84) * 84);
  for (int i = 0; i < count; ++i) {
    const EpisodeState ep = sample_scene(arm, rng);
    std::vector<Occluder> occs;
    if (with_occluders) {
      const int ow = 8 + rng.uniform_int(17);
      const int oh = 8 + rng.uniform_int(17);
      const int x0 = rng.uniform_int(84 - ow);
      const int y0 = rng.uniform_int(84 - oh);
      occs.push_back({x0, y0, x0 + ow, y0 + oh, 0.5f});
    }
    const Image img = render_scene(arm, ep.scene, style, occs, rc);
    const auto theta = normalize_theta(arm, ep.scene);
    for (double t : theta) ds.thetas.push_back(float(t));
    if (augment) {
      jittered.resize(img.px.size());
      augment_image(img.px.data(), jittered.data(), img.w, img.h, rng, aug_opts);
      for (float v : jittered) ds.images.push_back(quantize_px(v));
    } else {
      for (float v : img.px) ds.images.push_back(quantize_px(v));
    }
  }
  return ds;
}

inline constexpr char kDatasetMagic[] = "MDSET1\n";

inline void save_dataset(const std::string& path, const Dataset& ds) {
  nlohmann::json hdr;
  hdr["version"] = 1;
  hdr["count"] = ds.size();
  hdr["dof"] = ds.dof;
  hdr["style"] = to_string(ds.style);
  hdr["seed"] = ds.seed;
  hdr["width"] = ds.w;
  hdr["height"] = ds.h;
  hdr["ranges"] = ds.ranges;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  write_exact(f, kDatasetMagic, 7);
  const std::string hs = hdr.dump();
  write_u32le(f, uint32_t(hs.size()));
  write_exact(f, hs.data(), hs.size());
  const int64_t n = ds.size();
  for (int64_t i = 0; i < n; ++i) {
    write_f32_array(f, ds.theta(i), size_t(ds.theta_dim()));
    write_exact(f, ds.image(i), size_t(ds.image_numel()));
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char magic[7];
  read_exact(f, magic, 7, "dataset magic in " + path);
  if (std::memcmp(magic, kDatasetMagic, 7) != 0)
    throw std::runtime_error("not a dataset file: " + path);
  const uint32_t hlen = read_u32le(f, "dataset header length in " + path);
  if (hlen == 0 || hlen > (1u << 20))
    throw std::runtime_error("implausible dataset header size in " + path);
  std::string hs(hlen, '\0');
  read_exact(f, hs.data(), hlen, "dataset header in " + path);
  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt dataset header in " + path + ": " + e.what());
  }
  if (hdr.value("version", 0) != 1)
    throw std::runtime_error("unsupported dataset version in " + path);

  Dataset ds;
  ds.dof = hdr.at("dof").get<int>();
  if (ds.dof < 1 || ds.dof > 3) throw std::runtime_error("invalid dof in " + path);
  ds.style = style_from_string(hdr.at("style").get<std::string>());
  ds.seed = hdr.value("seed", uint64_t(0));
  ds.w = hdr.value("width", 84);
  ds.h = hdr.value("height", 84);
  if (ds.w <= 0 || ds.h <= 0) throw std::runtime_error("invalid image dims in " + path);
  ds.ranges = hdr.value("ranges", std::vector<double>{});
  const int64_t count = hdr.at("count").get<int64_t>();
  if (count < 0 || count > (int64_t(1) << 32))
    throw std::runtime_error("implausible dataset count in " + path);

  ds.thetas.resize(size_t(count) * size_t(ds.theta_dim()));
  ds.images.resize(size_t(count) * size_t(ds.image_numel()));
  for (int64_t i = 0; i < count; ++i) {
    read_f32_array(f, ds.thetas.data() + i * ds.theta_dim(), size_t(ds.theta_dim()),
                   "dataset labels in " + path);
    read_exact(f, ds.images.data() + i * ds.image_numel(), size_t(ds.image_numel()),
               "dataset images in " + path);
  }
  f.peek();
  if (!f.eof()) throw std::runtime_error("trailing bytes after dataset payload in " + path);
  for (float t : ds.thetas)
    if (!(t >= -1e-6f && t <= 1.f + 1e-6f))
      throw std::runtime_error("dataset label outside [0,1] in " + path);
  return ds;
}

}  // namespace modreach
