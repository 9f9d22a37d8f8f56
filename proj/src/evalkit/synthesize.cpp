#include "json.hpp"
#include "opgan/error.hpp"
#include "opgan/eval.hpp"
#include "opgan/serialize.hpp"

namespace opgan::eval {

SynthesisResult synthesize(const SegmentModel& model, const std::string& input_file,
                           signal::Sensor sensor, const std::string& out_file) {
  const signal::Waveform w = signal::read_waveform(input_file, sensor);
  const auto segments = signal::segments_at_target_rate(w);
  if (segments.empty()) {
    throw ConfigError("'" + input_file + "' is shorter than one " +
                      std::to_string(static_cast<int>(signal::kSegmentSeconds)) + "-second segment");
  }

  SynthesisResult r;
  std::vector<double> out;
  out.reserve(segments.size() * signal::kSegmentSamples);
  auto stats = nlohmann::json::array();
  for (std::size_t i = 0; i < segments.size(); ++i) {
    try {
      const auto n = signal::normalize(segments[i]);
      const auto y = model(n.values);
      out.insert(out.end(), y.begin(), y.end());
      stats.push_back({{"segment", i}, {"min", n.stats.min}, {"max", n.stats.max},
                       {"degenerate", false}});
    } catch (const DegenerateSegment& e) {
      out.insert(out.end(), segments[i].begin(), segments[i].end());
      r.warnings.push_back("segment " + std::to_string(i) + " copied unchanged: " + e.what());
      stats.push_back({{"segment", i}, {"min", segments[i].front()}, {"max", segments[i].front()},
                       {"degenerate", true}});
      ++r.degenerate;
    }
  }
  r.segments = segments.size();
  r.stats_path = out_file + ".stats.json";

  const nlohmann::json sidecar{{"input", input_file},
                               {"record_id", w.record_id},
                               {"sensor", signal::to_string(sensor)},
                               {"fs", signal::kTargetRate},
                               {"units", "normalized"},
                               {"segments", std::move(stats)}};
  models::write_file_atomic(out_file, signal::format_waveform(out, signal::kTargetRate));
  models::write_file_atomic(r.stats_path, sidecar.dump(2) + "\n");
  return r;
}

}  // namespace opgan::eval
