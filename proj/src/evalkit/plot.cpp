#include <algorithm>
#include <cmath>
#include <cstdio>

#include "opgan/error.hpp"
#include "opgan/eval.hpp"
#include "opgan/serialize.hpp"

namespace opgan::eval {

std::string triplet_title(const SegmentScores& s) {
  return "Input PSNR: " + format_db(s.input_time) + " | Output PSNR: " + format_db(s.output_time) +
         " || FFT Input PSNR: " + format_db(s.input_freq) +
         " | FFT Output PSNR: " + format_db(s.output_freq);
}

namespace {

constexpr double kWidth = 1100.0;
constexpr double kPanelW = 480.0;
constexpr double kPanelH = 170.0;
constexpr double kLeft = 70.0;
constexpr double kGap = 80.0;
constexpr double kTop = 60.0;
constexpr double kRowH = 230.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// One axis box with a polyline of ys over [x0, x1].
std::string panel(double px, double py, std::span<const double> ys, double x0, double x1,
                  const std::string& cls, const std::string& unit, double tick_step) {
  double lo = *std::min_element(ys.begin(), ys.end());
  double hi = *std::max_element(ys.begin(), ys.end());
  if (hi == lo) {
    hi += 1.0;
    lo -= 1.0;
  }
  std::string s = "<g class=\"" + cls + "\" data-x-min=\"" + tick_label(x0) + "\" data-x-max=\"" +
                  tick_label(x1) + "\">\n";
  s += "<rect x=\"" + num(px) + "\" y=\"" + num(py) + "\" width=\"" + num(kPanelW) +
       "\" height=\"" + num(kPanelH) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  s += "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"0.8\" points=\"";
  const double n = static_cast<double>(ys.size() > 1 ? ys.size() - 1 : 1);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double x = px + kPanelW * static_cast<double>(i) / n;
    const double y = py + kPanelH * (1.0 - (ys[i] - lo) / (hi - lo));
    s += (i ? " " : "") + num(x) + "," + num(y);
  }
  s += "\"/>\n";
  for (double t = x0; t <= x1 + 1e-9; t += tick_step) {
    const double x = px + kPanelW * (t - x0) / (x1 - x0);
    s += "<line x1=\"" + num(x) + "\" y1=\"" + num(py + kPanelH) + "\" x2=\"" + num(x) +
         "\" y2=\"" + num(py + kPanelH + 5) + "\" stroke=\"#444\"/>\n";
    s += "<text x=\"" + num(x) + "\" y=\"" + num(py + kPanelH + 18) +
         "\" font-size=\"11\" text-anchor=\"middle\">" + tick_label(t) + "</text>\n";
  }
  s += "<text x=\"" + num(px + kPanelW) + "\" y=\"" + num(py + kPanelH + 32) +
       "\" font-size=\"11\" text-anchor=\"end\">" + unit + "</text>\n";
  return s + "</g>\n";
}

}  // namespace

std::string triplet_svg(std::span<const double> input, std::span<const double> synthesized,
                        std::span<const double> target, const SegmentScores& scores, double fs) {
  const std::span<const double> rows[3] = {input, synthesized, target};
  const char* names[3] = {"input", "synthesized", "target"};
  const double height = kTop + 3 * kRowH;
  const double seconds = static_cast<double>(input.size()) / fs;
  const double nyquist = fs / 2.0;

  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
       num(height) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(height) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<title>" + triplet_title(scores) + "</title>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"28\" font-size=\"15\" text-anchor=\"middle\">" +
       triplet_title(scores) + "</text>\n";
  for (int r = 0; r < 3; ++r) {
    const double py = kTop + r * kRowH;
    s += "<g class=\"row\" data-row=\"" + std::string(names[r]) + "\">\n";
    s += "<text x=\"" + num(kLeft) + "\" y=\"" + num(py - 6) + "\" font-size=\"12\">" + names[r] +
         "</text>\n";
    s += panel(kLeft, py, rows[r], 0.0, seconds, "time", "time (s)", 1.0);
    s += panel(kLeft + kPanelW + kGap, py, signal::magnitude_spectrum(rows[r]), 0.0, nyquist,
               "spectrum", "frequency (Hz)", nyquist / 4.0);
    s += "</g>\n";
  }
  return s + "</svg>\n";
}

SegmentScores plot_triplet(std::span<const double> input, std::span<const double> synthesized,
                           std::span<const double> target, const std::string& out_svg, double fs) {
  if (input.size() != synthesized.size() || input.size() != target.size() || input.empty()) {
    throw ConfigError("plot_triplet needs three equal-length, non-empty segments");
  }
  if (!(fs > 0.0)) throw ConfigError("sampling rate must be positive");
  signal::SegmentPair pair;
  pair.source.assign(input.begin(), input.end());
  pair.target.assign(target.begin(), target.end());
  const SegmentScores scores = score_segment(pair, synthesized);
  models::write_file_atomic(out_svg, triplet_svg(input, synthesized, target, scores, fs));
  return scores;
}

}  // namespace opgan::eval
