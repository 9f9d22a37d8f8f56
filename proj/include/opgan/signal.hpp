#pragma once

// Raw sensor files -> normalized network segments, plus the spectral tools
// (Hanning window, FFT, STFT) shared by the losses and the metrics.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace opgan::signal {

inline constexpr double kTargetRate = 200.0;      // Hz, every segment after resampling
inline constexpr double kSegmentSeconds = 5.0;
inline constexpr std::size_t kSegmentSamples = 1000;
inline constexpr std::size_t kNetworkLength = 1024;  // segments are zero-padded to this
inline constexpr std::size_t kStftWindow = 256;
inline constexpr std::size_t kStftHop = 128;

enum class Sensor { kAndroid, kIphone, kCsn, kEpisensor, kOther };

std::string to_string(Sensor s);
/// Accepts android | iphone | csn | episensor | other.
Sensor sensor_from_string(const std::string& s);
/// Interpolation factor that brings the sensor to 200 Hz: csn 4, iphone 2, others 1.
std::size_t resample_factor(Sensor s);
/// Native rate assumed when a file carries no "# fs=" line.
double default_sampling_rate(Sensor s);

struct Waveform {
  std::vector<double> samples;
  double fs = kTargetRate;
  Sensor sensor = Sensor::kOther;
  std::string record_id;
};

struct SegmentStats {
  double min = 0.0;
  double max = 0.0;
};

struct SegmentPair {
  std::vector<double> source;  // 1000 samples in [-1, 1]
  std::vector<double> target;  // 1000 samples in [-1, 1]
  SegmentStats source_stats;
  SegmentStats target_stats;
  std::string record_id;
  std::size_t segment_index = 0;
};

/// Consecutive non-overlapping windows of round(seg_seconds * fs) samples; the
/// trailing remainder is dropped. Too-short input gives an empty list.
std::vector<std::vector<double>> segment_waveform(const Waveform& w,
                                                  double seg_seconds = kSegmentSeconds);

/// out[j] = x interpolated linearly at j / factor, holding the last sample past the end.
std::vector<double> resample_linear(std::span<const double> x, std::size_t factor);

struct Normalized {
  std::vector<double> values;
  SegmentStats stats;
};

/// x_n = 2 (x - min) / (max - min) - 1. Throws DegenerateSegment when max == min.
Normalized normalize(std::span<const double> x);
std::vector<double> denormalize(std::span<const double> x_n, const SegmentStats& stats);

/// Symmetric window w[m] = 0.5 (1 - cos(2 pi m / (N - 1))).
std::vector<double> hanning(std::size_t n = kStftWindow);

/// In-place radix-2 FFT with precomputed twiddles.
class Fft {
 public:
  explicit Fft(std::size_t n);  // n must be a power of two
  std::size_t size() const noexcept { return n_; }
  void forward(std::span<std::complex<double>> data) const;

 private:
  std::size_t n_;
  std::vector<std::complex<double>> twiddles_;
  std::vector<std::size_t> bitrev_;
};

bool is_power_of_two(std::size_t n);

/// Complex STFT frames with one-sided bins 0..N/2.
struct Spectrogram {
  std::size_t n_frames = 0;
  std::size_t n_bins = 0;
  std::size_t window = kStftWindow;
  std::size_t hop = kStftHop;
  std::vector<std::complex<double>> frames;  // row-major [frame][bin]

  std::complex<double> at(std::size_t frame, std::size_t bin) const {
    return frames[frame * n_bins + bin];
  }
  double bin_frequency(std::size_t bin, double fs) const {
    return fs * static_cast<double>(bin) / static_cast<double>(window);
  }
};

std::size_t stft_frame_count(std::size_t length, std::size_t n = kStftWindow,
                             std::size_t hop = kStftHop);

/// Frame f windows samples [f*hop, f*hop + N) with hanning(N) and takes an
/// N-point DFT. Throws ConfigError when len(x) < N.
Spectrogram stft(std::span<const double> x, std::size_t n = kStftWindow,
                 std::size_t hop = kStftHop);

/// |X(n,k)|^2, row-major [frame][bin].
std::vector<double> spectrogram_power(const Spectrogram& s);
/// |X(n,k)|, row-major [frame][bin].
std::vector<double> spectrogram_magnitude(const Spectrogram& s);

/// Zero-pads x to nfft and returns |DFT| / nfft for bins 0..nfft/2.
std::vector<double> magnitude_spectrum(std::span<const double> x, std::size_t nfft = 1024);

/// Power spectrogram as CSV: header row of bin centre frequencies in Hz, one row per frame.
std::string spectrogram_csv(const Spectrogram& s, double fs);

// ---------------------------------------------------------------------------
// files

/// Text format: optional '#'-prefixed metadata lines ("# fs=<Hz>"), then one
/// decimal float per line. Blank lines are ignored. Throws ParseError naming
/// file and line for anything else.
Waveform read_waveform(const std::string& path, Sensor sensor, std::string record_id = {});
std::string format_waveform(std::span<const double> samples, double fs);
void write_waveform(const std::string& path, std::span<const double> samples, double fs);

/// 5-second segments brought to 200 Hz by the sensor's interpolation factor
/// (for kOther, round(200 / fs)). Throws ConfigError when fs does not divide 200.
std::vector<std::vector<double>> segments_at_target_rate(const Waveform& w);

/// Segments, resamples and normalizes an aligned source/target recording.
/// Segments where either side is constant are skipped and counted.
std::vector<SegmentPair> make_pairs(const Waveform& source, const Waveform& target,
                                    std::size_t* degenerate = nullptr);

struct SkipRecord {
  std::string record_id;
  std::string reason;
};

struct Dataset {
  std::vector<SegmentPair> pairs;  // sorted by (record_id, segment_index)
  std::vector<SkipRecord> skipped;
  std::size_t degenerate_segments = 0;
};

/// Reads <root>/<sensor>/<record>.txt against <root>/episensor/<record>.txt.
Dataset load_dataset(const std::string& root, Sensor source);

/// Record-level split: records listed in the split file (one id per line) are
/// the test set. Without a file the last 20% of sorted record ids are held out.
struct Split {
  std::vector<SegmentPair> train;
  std::vector<SegmentPair> test;
};
Split split_pairs(const std::vector<SegmentPair>& pairs, const std::string& split_file = {});

// ---------------------------------------------------------------------------
// synthetic restoration task

struct ToyOptions {
  std::size_t sinusoids = 6;
  double min_hz = 5.0;
  double max_hz = 95.0;
  double noise_fraction = 0.01;  // noise std relative to the clean RMS
  double cutoff_hz = 25.0;
  std::size_t decimation = 4;
  std::size_t fir_taps = 101;
};

/// Windowed-sinc (Hamming) low-pass FIR with unit DC gain.
std::vector<double> lowpass_fir(double cutoff_hz, double fs, std::size_t taps);

/// One 5-second record: target = random sinusoid mixture plus noise; source =
/// target low-passed, decimated and re-interpolated back to 200 Hz.
struct ToyRecord {
  Waveform source;
  Waveform target;
};
ToyRecord make_toy_record(std::uint64_t seed, std::size_t index, const ToyOptions& opts = {});
/// n records named toy-00000..; each yields exactly one SegmentPair.
std::vector<SegmentPair> make_toy_pairs(std::size_t n, std::uint64_t seed,
                                        const ToyOptions& opts = {});

}  // namespace opgan::signal
