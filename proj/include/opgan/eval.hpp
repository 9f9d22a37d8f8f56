#pragma once

// Restoration metrics, reports, file-level synthesis, SVG plots and latency
// measurement for trained generators.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "opgan/gradcheck.hpp"
#include "opgan/models.hpp"
#include "opgan/signal.hpp"

namespace opgan::eval {

/// Value reported instead of +infinity when y == gt.
inline constexpr double kPsnrCapDb = 160.0;

struct Psnr {
  double db = 0.0;
  bool capped = false;  // zero MSE (or zero peak) hit the cap
};

/// 10 log10(max(y)^2 / MSE(y, gt)), peak taken from y. Results are clamped to
/// [-cap, cap] and flagged. Throws ConfigError on a length mismatch or empty input.
Psnr psnr(std::span<const double> y, std::span<const double> gt, double cap = kPsnrCapDb);
/// psnr() on the 1024-point one-sided magnitude spectra of both segments.
Psnr psnr_freq(std::span<const double> y, std::span<const double> gt, double cap = kPsnrCapDb);

/// Maps a 1000-sample normalized source segment to a 1000-sample output.
using SegmentModel = std::function<std::vector<double>(std::span<const double>)>;

/// Zero-pads to 1024, runs G, crops back to 1000.
SegmentModel generator_model(const models::Generator& g);
SegmentModel identity_model();

struct SegmentScores {
  std::string record_id;
  std::size_t segment_index = 0;
  double input_time = 0.0;
  double output_time = 0.0;
  double input_freq = 0.0;
  double output_freq = 0.0;
  bool capped = false;
};

struct EvalRow {
  std::string sensor;
  double input_psnr_time = 0.0;
  double output_psnr_time = 0.0;
  double input_psnr_freq = 0.0;
  double output_psnr_freq = 0.0;
  std::size_t n_segments = 0;
  std::size_t capped_segments = 0;
};

struct EvalReport {
  EvalRow row;
  std::vector<SegmentScores> segments;  // ordered by (record_id, segment_index)
};

SegmentScores score_segment(const signal::SegmentPair& pair, std::span<const double> output);

/// Averages the four PSNRs over every pair. Throws ConfigError when empty.
EvalReport evaluate(const SegmentModel& model, const std::vector<signal::SegmentPair>& test,
                    const std::string& sensor);

/// Two decimals, the rounding used in every report.
std::string format_db(double db);

inline constexpr const char* kEvalCsvHeader = "sensor,side,psnr_time_db,psnr_freq_db,n_segments";
/// Header plus an "input" and an "output" row.
std::string eval_csv(const EvalRow& row);
std::string segment_csv(const EvalReport& report);
std::string pretty_table(const EvalRow& row);

// ---------------------------------------------------------------------------
// synthesis

struct SynthesisResult {
  std::size_t segments = 0;
  std::size_t degenerate = 0;
  std::vector<std::string> warnings;
  std::string stats_path;
};

/// Segments, resamples and normalizes the waveform, runs the model on every
/// segment and writes the concatenated output (normalized units) to out_file.
/// Per-segment source min/max go to "<out_file>.stats.json". Constant
/// segments are copied through unchanged and reported as warnings.
SynthesisResult synthesize(const SegmentModel& model, const std::string& input_file,
                           signal::Sensor sensor, const std::string& out_file);

// ---------------------------------------------------------------------------
// plots

/// "Input PSNR: a | Output PSNR: b || FFT Input PSNR: c | FFT Output PSNR: d"
std::string triplet_title(const SegmentScores& s);

/// Three rows (input, synthesized, target), each with its time trace and
/// magnitude spectrum (0 to fs/2 Hz). Returns the scores in the title.
SegmentScores plot_triplet(std::span<const double> input, std::span<const double> synthesized,
                           std::span<const double> target, const std::string& out_svg,
                           double fs = signal::kTargetRate);
std::string triplet_svg(std::span<const double> input, std::span<const double> synthesized,
                        std::span<const double> target, const SegmentScores& scores, double fs);

// ---------------------------------------------------------------------------
// latency

struct LatencyReport {
  double median_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  std::size_t n_segments = 0;
};

/// Times n_segments single-threaded forward passes of one 1024-sample segment
/// after one warm-up pass. Throws ConfigError when n_segments < 10.
LatencyReport bench_latency(const models::Generator& g, std::size_t n_segments);

// ---------------------------------------------------------------------------
// gradient sweep

struct GradcheckSweep {
  std::size_t cases = 0;
  std::size_t failures = 0;
  double max_rel_err = 0.0;
  std::string worst;  // configuration and detail of the worst case
  bool pass() const noexcept { return cases > 0 && failures == 0; }
};

/// Random operational layers: Q from `orders`, K in {1,3,5}, stride in {1,2},
/// L <= 32, random channel counts and activation.
GradcheckSweep gradcheck_sweep(std::span<const std::size_t> orders, std::size_t cases,
                               std::uint64_t seed, const ad::GradCheckOptions& opts = {});

}  // namespace opgan::eval
