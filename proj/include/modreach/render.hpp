#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "modreach/arm.hpp"

namespace modreach {

// Two visual domains rendered from the same scene geometry. Style a is the
// clean source domain (light background, dark target); style b shifts the
// palette, adds texture and a small camera offset to stand in for a second
// sensor.
enum class RenderStyle { a, b };

inline RenderStyle style_from_string(const std::string& s) {
  if (s == "a" || s == "A") return RenderStyle::a;
  if (s == "b" || s == "B") return RenderStyle::b;
  throw std::invalid_argument("unknown render style: " + s);
}

inline const char* to_string(RenderStyle s) { return s == RenderStyle::a ? "A" : "B"; }

// Axis-aligned patch painted over the final 84x84 image, half-open pixel
// ranges [x0,x1) x [y0,y1).
struct Occluder {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  float value = 0.5f;
};

struct Image {
  int w = 0, h = 0;
  std::vector<float> px;

  Image() = default;
  Image(int w_, int h_) : w(w_), h(h_), px(size_t(w_) * size_t(h_), 0.f) {
    if (w_ <= 0 || h_ <= 0) throw std::invalid_argument("image dims must be positive");
  }
  float& at(int x, int y) { return px[size_t(y) * size_t(w) + size_t(x)]; }
  float at(int x, int y) const { return px[size_t(y) * size_t(w) + size_t(x)]; }
};

struct RenderConfig {
  int raster_w = 160;
  int raster_h = 210;
  int out_w = 84;
  int out_h = 84;
  double link_radius = 0.035;
  double joint_radius = 0.055;
  double target_radius = 0.09;
};

namespace detail {

inline double seg_dist(const Vec2& p, const Vec2& a, const Vec2& b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double wx = p.x - a.x, wy = p.y - a.y;
  const double vv = vx * vx + vy * vy;
  const double t = vv > 0 ? std::clamp((wx * vx + wy * vy) / vv, 0.0, 1.0) : 0.0;
  return std::hypot(wx - t * vx, wy - t * vy);
}

// Coverage of a shape with signed distance sd, softened over one raster
// pixel so edges stay stable under the later downscale.
inline double coverage(double sd, double aa) {
  return std::clamp(0.5 - sd / aa, 0.0, 1.0);
}

inline uint64_t pixel_hash(uint64_t x, uint64_t y) {
  uint64_t z = x * 0x9E3779B97F4A7C15ull ^ (y + 0xBF58476D1CE4E5B9ull) * 0x94D049BB133111EBull;
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

// [0,1) from integer pixel coordinates, stable across platforms.
inline double pixel_noise(int x, int y) {
  return double(pixel_hash(uint64_t(x), uint64_t(y)) >> 11) * 0x1.0p-53;
}

}  // namespace detail

// Paints the scene into the wide raster by evaluating world-space distances
// per pixel: three link capsules, joint discs, then the target disc on top.
inline Image render_raster(const ArmModel& arm, const SceneConfig& scene, RenderStyle style,
                           const RenderConfig& cfg = {}) {
  Image img(cfg.raster_w, cfg.raster_h);

  const bool b = style == RenderStyle::b;
  const double zoom = b ? 1.04 : 1.0;
  const Vec2 cam_off = b ? Vec2{0.03, -0.02} : Vec2{0.0, 0.0};
  const double half = arm.frame_half / zoom;

  const auto full = arm.full_config(scene.q);
  std::array<Vec2, 4> pts{};
  double phi = 0;
  for (int i = 0; i < 3; ++i) {
    phi += full[size_t(i)];
    pts[size_t(i + 1)].x = pts[size_t(i)].x + arm.links[size_t(i)] * std::cos(phi);
    pts[size_t(i + 1)].y = pts[size_t(i)].y + arm.links[size_t(i)] * std::sin(phi);
  }

  const std::array<float, 3> link_ink = b ? std::array<float, 3>{0.30f, 0.25f, 0.20f}
                                          : std::array<float, 3>{0.46f, 0.38f, 0.30f};
  const float joint_ink = b ? 0.12f : 0.22f;
  const float target_ink = b ? 0.95f : 0.04f;
  const double link_r = b ? cfg.link_radius * 1.3 : cfg.link_radius;

  // Anti-alias over roughly one raster pixel of world size.
  const double aa = 2.0 * half / cfg.raster_w;

  for (int py = 0; py < cfg.raster_h; ++py) {
    const double wy = cam_off.y + half - (py + 0.5) * (2.0 * half / cfg.raster_h);
    for (int px = 0; px < cfg.raster_w; ++px) {
      const double wx = cam_off.x - half + (px + 0.5) * (2.0 * half / cfg.raster_w);
      const Vec2 p{wx, wy};

      float v;
      if (b) {
        const double grad = 0.10 * (double(py) / (cfg.raster_h - 1) - 0.5);
        const double tex = 0.06 * (detail::pixel_noise(px, py) - 0.5);
        v = float(0.55 + grad + tex);
      } else {
        v = 0.92f;
      }

      for (int i = 0; i < 3; ++i) {
        const double sd = detail::seg_dist(p, pts[size_t(i)], pts[size_t(i + 1)]) - link_r;
        const double c = detail::coverage(sd, aa);
        v = float(v * (1 - c) + link_ink[size_t(i)] * c);
      }
      for (int i = 0; i < 3; ++i) {
        const double sd = dist(p, pts[size_t(i)]) - cfg.joint_radius;
        const double c = detail::coverage(sd, aa);
        v = float(v * (1 - c) + joint_ink * c);
      }
      const double sd = dist(p, scene.target) - cfg.target_radius;
      const double c = detail::coverage(sd, aa);
      v = float(v * (1 - c) + target_ink * c);

      img.at(px, py) = std::clamp(v, 0.f, 1.f);
    }
  }
  return img;
}

inline Image downscale_bilinear(const Image& src, int w, int h) {
  if (w <= 0 || h <= 0) throw std::invalid_argument("downscale dims must be positive");
  Image out(w, h);
  const double sx = double(src.w) / w;
  const double sy = double(src.h) / h;
  for (int oy = 0; oy < h; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, double(src.h - 1));
    const int y0 = int(fy);
    const int y1 = std::min(y0 + 1, src.h - 1);
    const double ty = fy - y0;
    for (int ox = 0; ox < w; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, double(src.w - 1));
      const int x0 = int(fx);
      const int x1 = std::min(x0 + 1, src.w - 1);
      const double tx = fx - x0;
      const double top = src.at(x0, y0) * (1 - tx) + src.at(x1, y0) * tx;
      const double bot = src.at(x0, y1) * (1 - tx) + src.at(x1, y1) * tx;
      out.at(ox, oy) = float(top * (1 - ty) + bot * ty);
    }
  }
  return out;
}

inline void apply_occluders(Image& img, const std::vector<Occluder>& occs) {
  for (const auto& o : occs) {
    if (o.x0 > o.x1 || o.y0 > o.y1) throw std::invalid_argument("occluder with negative extent");
    const int x0 = std::max(o.x0, 0), x1 = std::min(o.x1, img.w);
    const int y0 = std::max(o.y0, 0), y1 = std::min(o.y1, img.h);
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) img.at(x, y) = o.value;
  }
}

// Full camera pipeline: wide raster, bilinear resize to the network input
// size, then any occluder patches in output coordinates.
inline Image render_scene(const ArmModel& arm, const SceneConfig& scene, RenderStyle style,
                          const std::vector<Occluder>& occs = {}, const RenderConfig& cfg = {}) {
  Image img = downscale_bilinear(render_raster(arm, scene, style, cfg), cfg.out_w, cfg.out_h);
  apply_occluders(img, occs);
  return img;
}

inline uint8_t quantize_px(float v) {
  return uint8_t(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
}

inline void write_pgm(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "P5\n" << img.w << " " << img.h << "\n255\n";
  std::vector<uint8_t> row(size_t(img.w));
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) row[size_t(x)] = quantize_px(img.at(x, y));
    f.write(reinterpret_cast<const char*>(row.data()), img.w);
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline Image read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw std::runtime_error("not a binary pgm: " + path);
  auto next_int = [&f, &path]() {
    int c;
    while ((c = f.peek()) != EOF && (std::isspace(c) || c == '#')) {
      if (c == '#')
        f.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
      else
        f.get();
    }
    int v;
    if (!(f >> v)) throw std::runtime_error("truncated pgm header: " + path);
    return v;
  };
  const int w = next_int(), h = next_int(), maxval = next_int();
  if (w <= 0 || h <= 0 || maxval != 255) throw std::runtime_error("unsupported pgm: " + path);
  f.get();
  Image img(w, h);
  std::vector<uint8_t> buf(size_t(w) * size_t(h));
  f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
  if (size_t(f.gcount()) != buf.size()) throw std::runtime_error("truncated pgm data: " + path);
  for (size_t i = 0; i < buf.size(); ++i) img.px[i] = float(buf[i]) / 255.f;
  return img;
}

}  // namespace modreach
