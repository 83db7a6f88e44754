#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace modreach {

// Linear-interpolation quantile (the spreadsheet convention): position
// p*(n-1) between order statistics.
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("quantile of empty sample");
  if (p < 0 || p > 1) throw std::invalid_argument("quantile level must lie in [0,1]");
  std::sort(v.begin(), v.end());
  const double pos = p * double(v.size() - 1);
  const size_t lo = size_t(pos);
  const size_t hi = std::min(lo + 1, v.size() - 1);
  const double t = pos - double(lo);
  return v[lo] * (1 - t) + v[hi] * t;
}

// Pixel scale of the downscaled camera: 84 px across 1.92 m.
inline constexpr double kCmPerPixel = 16.0 / 7.0;

struct EpisodeOutcome {
  bool success = false;
  double d_final = 0;      // m
  double total_reward = 0;
  int steps = 0;
};

struct EvalStats {
  int episodes = 0;
  double success_rate = 0;  // fraction in [0,1]
  double d_med_cm = 0;
  double d_q3_cm = 0;
  double avg_reward = 0;

  double d_med_px() const { return d_med_cm / kCmPerPixel; }
  double d_q3_px() const { return d_q3_cm / kCmPerPixel; }
};

inline EvalStats aggregate(const std::vector<EpisodeOutcome>& eps) {
  if (eps.empty()) throw std::invalid_argument("no episodes to aggregate");
  EvalStats st;
  st.episodes = int(eps.size());
  std::vector<double> d;
  d.reserve(eps.size());
  for (const auto& e : eps) {
    st.success_rate += e.success ? 1.0 : 0.0;
    st.avg_reward += e.total_reward;
    d.push_back(e.d_final * 100.0);
  }
  st.success_rate /= double(eps.size());
  st.avg_reward /= double(eps.size());
  st.d_med_cm = quantile(d, 0.5);
  st.d_q3_cm = quantile(d, 0.75);
  return st;
}

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Appends rows to a training-curve csv, writing the header on first use.
class CurveWriter {
 public:
  CurveWriter() = default;
  explicit CurveWriter(const std::string& path) { open(path); }

  void open(const std::string& path) {
    f_.open(path, std::ios::trunc);
    if (!f_) throw std::runtime_error("cannot open for write: " + path);
    f_ << "step,success_rate,d_med_cm,d_q3_cm,avg_reward,epsilon\n";
  }

  // Continues an existing curve in place; the header is only written when the
  // file starts empty.
  void open_append(const std::string& path) {
    f_.open(path, std::ios::app);
    if (!f_) throw std::runtime_error("cannot open for write: " + path);
    if (f_.tellp() == std::ofstream::pos_type(0))
      f_ << "step,success_rate,d_med_cm,d_q3_cm,avg_reward,epsilon\n";
  }

  bool is_open() const { return f_.is_open(); }

  void row(int64_t step, const EvalStats& st, double epsilon) {
    if (!f_.is_open()) return;
    f_ << step << ',' << fmt_double(st.success_rate) << ',' << fmt_double(st.d_med_cm) << ','
       << fmt_double(st.d_q3_cm) << ',' << fmt_double(st.avg_reward) << ',' << fmt_double(epsilon)
       << '\n';
    f_.flush();
  }

 private:
  std::ofstream f_;
};

// Final evaluation table, one row per (net, style) pairing.
class ReportWriter {
 public:
  explicit ReportWriter(const std::string& path) : f_(path, std::ios::trunc) {
    if (!f_) throw std::runtime_error("cannot open for write: " + path);
    f_ << "net,style,episodes,success_rate,d_med_cm,d_q3_cm,d_med_px,d_q3_px,avg_reward\n";
  }

  void row(const std::string& net, const std::string& style, const EvalStats& st) {
    f_ << net << ',' << style << ',' << st.episodes << ',' << fmt_double(st.success_rate) << ','
       << fmt_double(st.d_med_cm) << ',' << fmt_double(st.d_q3_cm) << ','
       << fmt_double(st.d_med_px()) << ',' << fmt_double(st.d_q3_px()) << ','
       << fmt_double(st.avg_reward) << '\n';
    f_.flush();
  }

 private:
  std::ofstream f_;
};

}  // namespace modreach
