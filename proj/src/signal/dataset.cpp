#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

#include "opgan/error.hpp"
#include "opgan/rng.hpp"
#include "opgan/signal.hpp"

namespace fs = std::filesystem;

namespace opgan::signal {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& out) {
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end != begin && *end == '\0' && std::isfinite(out);
}

}  // namespace

Waveform read_waveform(const std::string& path, Sensor sensor, std::string record_id) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  Waveform w;
  w.sensor = sensor;
  w.fs = default_sampling_rate(sensor);
  w.record_id = record_id.empty() ? fs::path(path).stem().string() : std::move(record_id);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const auto pos = t.find("fs=");
      if (pos != std::string::npos) {
        double rate = 0.0;
        if (!parse_double(trim(t.substr(pos + 3)), rate) || rate <= 0.0) {
          throw ParseError(path, lineno, "invalid sampling rate in '" + t + "'");
        }
        w.fs = rate;
      }
      continue;
    }
    double v = 0.0;
    if (!parse_double(t, v)) throw ParseError(path, lineno, "not a number: '" + t + "'");
    w.samples.push_back(v);
  }
  if (w.samples.empty()) throw ParseError(path, lineno, "no samples");
  return w;
}

std::string format_waveform(std::span<const double> samples, double fs) {
  std::string out;
  out.reserve(samples.size() * 24 + 32);
  char buf[64];
  std::snprintf(buf, sizeof buf, "# fs=%.17g\n", fs);
  out += buf;
  for (double v : samples) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out += buf;
  }
  return out;
}

void write_waveform(const std::string& path, std::span<const double> samples, double fs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << format_waveform(samples, fs);
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::vector<std::vector<double>> segments_at_target_rate(const Waveform& w) {
  const std::size_t factor = w.sensor == Sensor::kOther
                                 ? static_cast<std::size_t>(std::llround(kTargetRate / w.fs))
                                 : resample_factor(w.sensor);
  if (factor == 0 || std::abs(w.fs * static_cast<double>(factor) - kTargetRate) > 1e-9) {
    throw ConfigError("record '" + w.record_id + "' (" + to_string(w.sensor) + ") at " +
                      std::to_string(w.fs) + " Hz cannot be brought to 200 Hz");
  }
  auto segs = segment_waveform(w);
  if (factor > 1) {
    for (auto& s : segs) s = resample_linear(s, factor);
  }
  return segs;
}

std::vector<SegmentPair> make_pairs(const Waveform& source, const Waveform& target,
                                    std::size_t* degenerate) {
  const auto src = segments_at_target_rate(source);
  const auto tgt = segments_at_target_rate(target);
  std::vector<SegmentPair> out;
  const std::size_t n = std::min(src.size(), tgt.size());
  for (std::size_t i = 0; i < n; ++i) {
    try {
      auto s = normalize(src[i]);
      auto t = normalize(tgt[i]);
      SegmentPair p;
      p.source = std::move(s.values);
      p.target = std::move(t.values);
      p.source_stats = s.stats;
      p.target_stats = t.stats;
      p.record_id = source.record_id;
      p.segment_index = i;
      out.push_back(std::move(p));
    } catch (const DegenerateSegment&) {
      if (degenerate) ++*degenerate;
    }
  }
  return out;
}

Dataset load_dataset(const std::string& root, Sensor source) {
  const fs::path src_dir = fs::path(root) / to_string(source);
  const fs::path tgt_dir = fs::path(root) / to_string(Sensor::kEpisensor);
  if (!fs::is_directory(src_dir)) throw IoError("missing directory '" + src_dir.string() + "'");
  if (!fs::is_directory(tgt_dir)) throw IoError("missing directory '" + tgt_dir.string() + "'");

  auto list = [](const fs::path& dir) {
    std::set<std::string> ids;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".txt") ids.insert(e.path().stem().string());
    }
    return ids;
  };
  const auto src_ids = list(src_dir);
  const auto tgt_ids = list(tgt_dir);

  Dataset ds;
  for (const auto& id : src_ids) {
    if (!tgt_ids.count(id)) {
      ds.skipped.push_back({id, "no episensor counterpart"});
      continue;
    }
    const Waveform s = read_waveform((src_dir / (id + ".txt")).string(), source, id);
    const Waveform t = read_waveform((tgt_dir / (id + ".txt")).string(), Sensor::kEpisensor, id);
    auto pairs = make_pairs(s, t, &ds.degenerate_segments);
    std::move(pairs.begin(), pairs.end(), std::back_inserter(ds.pairs));
  }
  for (const auto& id : tgt_ids) {
    if (!src_ids.count(id)) ds.skipped.push_back({id, "no " + to_string(source) + " counterpart"});
  }
  std::sort(ds.pairs.begin(), ds.pairs.end(), [](const SegmentPair& a, const SegmentPair& b) {
    return std::tie(a.record_id, a.segment_index) < std::tie(b.record_id, b.segment_index);
  });
  return ds;
}

Split split_pairs(const std::vector<SegmentPair>& pairs, const std::string& split_file) {
  std::set<std::string> test_ids;
  if (!split_file.empty()) {
    std::ifstream in(split_file);
    if (!in) throw IoError("cannot open split file '" + split_file + "'");
    std::string line;
    while (std::getline(in, line)) {
      const auto t = trim(line);
      if (!t.empty() && t[0] != '#') test_ids.insert(t);
    }
  } else {
    std::set<std::string> ids;
    for (const auto& p : pairs) ids.insert(p.record_id);
    const std::size_t n_train = ids.size() - ids.size() / 5;
    std::size_t i = 0;
    for (const auto& id : ids) {
      if (i++ >= n_train) test_ids.insert(id);
    }
  }
  Split s;
  for (const auto& p : pairs) (test_ids.count(p.record_id) ? s.test : s.train).push_back(p);
  return s;
}

// ---------------------------------------------------------------------------
// synthetic restoration task

std::vector<double> lowpass_fir(double cutoff_hz, double fs, std::size_t taps) {
  if (taps % 2 == 0) throw ConfigError("low-pass FIR needs an odd tap count");
  const double fc = cutoff_hz / fs;
  const auto mid = static_cast<double>(taps / 2);
  std::vector<double> h(taps);
  double sum = 0.0;
  for (std::size_t n = 0; n < taps; ++n) {
    const double m = static_cast<double>(n) - mid;
    const double sinc = m == 0.0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * m) / (std::numbers::pi * m);
    const double win = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                              static_cast<double>(taps - 1));
    h[n] = sinc * win;
    sum += h[n];
  }
  for (double& v : h) v /= sum;
  return h;
}

ToyRecord make_toy_record(std::uint64_t seed, std::size_t index, const ToyOptions& o) {
  Rng rng(derive_seed(seed, 1000 + index));
  const std::size_t n = kSegmentSamples;
  const std::size_t margin = o.fir_taps / 2;
  const std::size_t total = n + 2 * margin;

  std::vector<double> clean(total, 0.0);
  for (std::size_t s = 0; s < o.sinusoids; ++s) {
    const double f = uniform(rng, o.min_hz, o.max_hz);
    const double a = uniform(rng, 0.5, 1.0);
    const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < total; ++i) {
      clean[i] += a * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / kTargetRate + phi);
    }
  }
  double rms = 0.0;
  for (double v : clean) rms += v * v;
  rms = std::sqrt(rms / static_cast<double>(total));
  std::vector<double> noisy = clean;
  for (double& v : noisy) v += o.noise_fraction * rms * standard_normal(rng);

  const auto h = lowpass_fir(o.cutoff_hz, kTargetRate, o.fir_taps);
  std::vector<double> low(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) s += h[k] * noisy[i + k];
    low[i] = s;
  }

  char id[32];
  std::snprintf(id, sizeof id, "toy-%05zu", index);
  ToyRecord r;
  r.target.samples.assign(noisy.begin() + static_cast<long>(margin),
                          noisy.begin() + static_cast<long>(margin + n));
  r.target.fs = kTargetRate;
  r.target.sensor = Sensor::kEpisensor;
  r.target.record_id = id;
  for (std::size_t i = 0; i < n; i += o.decimation) r.source.samples.push_back(low[i]);
  r.source.fs = kTargetRate / static_cast<double>(o.decimation);
  r.source.sensor = o.decimation == 4 ? Sensor::kCsn : (o.decimation == 2 ? Sensor::kIphone : Sensor::kOther);
  r.source.record_id = id;
  return r;
}

std::vector<SegmentPair> make_toy_pairs(std::size_t n, std::uint64_t seed, const ToyOptions& o) {
  std::vector<SegmentPair> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = make_toy_record(seed, i, o);
    auto p = make_pairs(r.source, r.target);
    std::move(p.begin(), p.end(), std::back_inserter(out));
  }
  return out;
}

}  // namespace opgan::signal
