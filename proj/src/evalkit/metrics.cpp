#include <algorithm>
#include <cmath>
#include <cstdio>

#include "opgan/error.hpp"
#include "opgan/eval.hpp"
#include "opgan/trainer.hpp"

namespace opgan::eval {

Psnr psnr(std::span<const double> y, std::span<const double> gt, double cap) {
  if (y.empty() || y.size() != gt.size()) {
    throw ConfigError("psnr needs equal non-empty lengths, got " + std::to_string(y.size()) +
                      " and " + std::to_string(gt.size()));
  }
  double mse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) mse += (y[i] - gt[i]) * (y[i] - gt[i]);
  mse /= static_cast<double>(y.size());
  const double peak = *std::max_element(y.begin(), y.end());
  if (mse == 0.0) return {cap, true};
  if (peak == 0.0) return {-cap, true};
  const double db = 10.0 * std::log10(peak * peak / mse);
  if (db > cap) return {cap, true};
  if (db < -cap) return {-cap, true};
  return {db, false};
}

Psnr psnr_freq(std::span<const double> y, std::span<const double> gt, double cap) {
  if (y.size() != gt.size()) throw ConfigError("psnr_freq needs equal lengths");
  return psnr(signal::magnitude_spectrum(y), signal::magnitude_spectrum(gt), cap);
}

SegmentModel generator_model(const models::Generator& g) {
  return [&g](std::span<const double> x) {
    const auto padded = training::pad_to_network(x);
    const ad::Var in = ad::Var::constant(Tensor3({1, 1, padded.size()}, padded));
    const auto out = g.forward(in).value().values();
    return training::crop_from_network(out);
  };
}

SegmentModel identity_model() {
  return [](std::span<const double> x) { return std::vector<double>(x.begin(), x.end()); };
}

SegmentScores score_segment(const signal::SegmentPair& pair, std::span<const double> output) {
  SegmentScores s;
  s.record_id = pair.record_id;
  s.segment_index = pair.segment_index;
  const Psnr it = psnr(pair.source, pair.target);
  const Psnr ot = psnr(output, pair.target);
  const Psnr iff = psnr_freq(pair.source, pair.target);
  const Psnr of = psnr_freq(output, pair.target);
  s.input_time = it.db;
  s.output_time = ot.db;
  s.input_freq = iff.db;
  s.output_freq = of.db;
  s.capped = it.capped || ot.capped || iff.capped || of.capped;
  return s;
}

EvalReport evaluate(const SegmentModel& model, const std::vector<signal::SegmentPair>& test,
                    const std::string& sensor) {
  if (test.empty()) throw ConfigError("evaluation needs at least one test segment");
  std::vector<const signal::SegmentPair*> order;
  for (const auto& p : test) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    return a->record_id != b->record_id ? a->record_id < b->record_id
                                        : a->segment_index < b->segment_index;
  });

  EvalReport r;
  r.row.sensor = sensor;
  for (const auto* p : order) {
    const auto s = score_segment(*p, model(p->source));
    r.row.input_psnr_time += s.input_time;
    r.row.output_psnr_time += s.output_time;
    r.row.input_psnr_freq += s.input_freq;
    r.row.output_psnr_freq += s.output_freq;
    r.row.capped_segments += s.capped;
    r.segments.push_back(s);
  }
  const double n = static_cast<double>(r.segments.size());
  r.row.n_segments = r.segments.size();
  r.row.input_psnr_time /= n;
  r.row.output_psnr_time /= n;
  r.row.input_psnr_freq /= n;
  r.row.output_psnr_freq /= n;
  return r;
}

std::string format_db(double db) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", db);
  // "-0.00" and "0.00" are the same number in a report.
  return std::string(buf) == "-0.00" ? "0.00" : buf;
}

std::string eval_csv(const EvalRow& row) {
  std::string out = std::string(kEvalCsvHeader) + "\n";
  const auto line = [&](const char* side, double t, double f) {
    out += row.sensor + "," + side + "," + format_db(t) + "," + format_db(f) + "," +
           std::to_string(row.n_segments) + "\n";
  };
  line("input", row.input_psnr_time, row.input_psnr_freq);
  line("output", row.output_psnr_time, row.output_psnr_freq);
  return out;
}

std::string segment_csv(const EvalReport& report) {
  std::string out =
      "record_id,segment_index,input_psnr_time_db,output_psnr_time_db,input_psnr_freq_db,"
      "output_psnr_freq_db,capped\n";
  for (const auto& s : report.segments) {
    out += s.record_id + "," + std::to_string(s.segment_index) + "," + format_db(s.input_time) +
           "," + format_db(s.output_time) + "," + format_db(s.input_freq) + "," +
           format_db(s.output_freq) + "," + (s.capped ? "1" : "0") + "\n";
  }
  return out;
}

std::string pretty_table(const EvalRow& row) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%-10s %-7s %12s %12s\n"
                "%-10s %-7s %12s %12s\n"
                "%-10s %-7s %12s %12s\n",
                "sensor", "side", "PSNR time", "PSNR freq",                              //
                row.sensor.c_str(), "input", format_db(row.input_psnr_time).c_str(),     //
                format_db(row.input_psnr_freq).c_str(),                                  //
                row.sensor.c_str(), "output", format_db(row.output_psnr_time).c_str(),   //
                format_db(row.output_psnr_freq).c_str());
  std::string out = buf;
  out += std::to_string(row.n_segments) + " segments";
  if (row.capped_segments) {
    out += ", " + std::to_string(row.capped_segments) + " with a PSNR capped at " +
           format_db(kPsnrCapDb) + " dB";
  }
  return out + "\n";
}

}  // namespace opgan::eval
