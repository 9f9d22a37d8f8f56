#include "opgan/cli.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "opgan/error.hpp"
#include "opgan/eval.hpp"
#include "opgan/serialize.hpp"
#include "opgan/trainer.hpp"

namespace opgan::cli {

namespace {

constexpr const char* kToy = "toy";

struct DataOptions {
  std::string data = kToy;
  std::string sensor = "csn";
  std::string split_file;
  std::size_t toy_count = 100;
  std::uint64_t data_seed = 42;
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data", d.data, "dataset root (<root>/<sensor>/*.txt) or 'toy'");
  cmd->add_option("--sensor", d.sensor, "source sensor: android|iphone|csn|other");
  cmd->add_option("--split-file", d.split_file, "record ids held out for testing, one per line");
  cmd->add_option("--toy-count", d.toy_count, "records in the synthetic set");
  cmd->add_option("--data-seed", d.data_seed, "seed of the synthetic set");
}

signal::Split load_split(const DataOptions& d, std::ostream& err) {
  std::vector<signal::SegmentPair> pairs;
  if (d.data == kToy) {
    if (d.toy_count < 2) throw ConfigError("--toy-count must be >= 2");
    pairs = signal::make_toy_pairs(d.toy_count, d.data_seed);
  } else {
    auto ds = signal::load_dataset(d.data, signal::sensor_from_string(d.sensor));
    for (const auto& s : ds.skipped) err << "warning: skipped record " << s.record_id << ": " << s.reason << "\n";
    if (ds.degenerate_segments) {
      err << "warning: skipped " << ds.degenerate_segments << " constant segments\n";
    }
    pairs = std::move(ds.pairs);
  }
  if (pairs.empty()) throw ConfigError("no segment pairs found in '" + d.data + "'");
  return signal::split_pairs(pairs, d.split_file);
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

models::ArchitectureConfig named_arch(const std::string& name) {
  if (name == "default") return {};
  if (name == "reduced") return models::reduced_architecture();
  throw ConfigError("unknown --arch '" + name + "' (default|reduced)");
}

// A loaded generator together with the adapter evaluate() needs.
struct LoadedModel {
  std::optional<models::Generator> generator;
  eval::SegmentModel fn;
};

LoadedModel load_model(const std::string& path) {
  LoadedModel m;
  if (path == "identity") {
    m.fn = eval::identity_model();
  } else {
    m.generator.emplace(models::load_generator(path));
  }
  return m;
}

eval::SegmentModel model_fn(const LoadedModel& m) {
  return m.generator ? eval::generator_model(*m.generator) : m.fn;
}

const CLI::App* innermost(const CLI::App& app) {
  const CLI::App* a = &app;
  for (const auto* sub : app.get_subcommands()) a = sub;
  return a;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Operational GAN signal restoration toolkit"};
  app.name("opgan");
  app.require_subcommand(1);

  // train
  DataOptions train_data;
  std::string train_config, train_out, loss_csv, checkpoint, resume, arch_name = "default";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> q, iters, checkpoint_interval, batch;
  bool strict = false;
  auto* train_cmd = app.add_subcommand("train", "train a generator");
  add_data_options(train_cmd, train_data);
  train_cmd->add_option("--config", train_config, "JSON training config; flags override it");
  train_cmd->add_option("--seed", seed, "init and shuffle seed");
  train_cmd->add_option("--q", q, "polynomial order Q");
  train_cmd->add_option("--iters", iters, "training iterations (D + G step each)");
  train_cmd->add_option("--batch", batch, "pairs per iteration");
  train_cmd->add_option("--arch", arch_name, "channel widths: default|reduced");
  train_cmd->add_option("--out", train_out, "generator output file")->required();
  train_cmd->add_option("--loss-csv", loss_csv, "append per-iteration losses here");
  train_cmd->add_option("--checkpoint", checkpoint, "checkpoint file");
  train_cmd->add_option("--checkpoint-interval", checkpoint_interval, "iterations between checkpoints");
  train_cmd->add_option("--resume", resume, "continue from this checkpoint");
  train_cmd->add_flag("--strict-determinism", strict, "log wallclock as 0 so logs are byte-stable");

  // eval
  DataOptions eval_data;
  std::string eval_model, eval_out, eval_segments;
  auto* eval_cmd = app.add_subcommand("eval", "PSNR report on the test split");
  add_data_options(eval_cmd, eval_data);
  eval_cmd->add_option("--model", eval_model, "generator file or 'identity'")->required();
  eval_cmd->add_option("--out", eval_out, "CSV report path (default: stdout)");
  eval_cmd->add_option("--segments-csv", eval_segments, "per-segment scores");

  // synth
  std::string synth_model, synth_input, synth_out, synth_sensor = "csn";
  auto* synth_cmd = app.add_subcommand("synth", "restore one waveform file");
  synth_cmd->add_option("--model", synth_model, "generator file")->required();
  synth_cmd->add_option("--input", synth_input, "waveform text file")->required();
  synth_cmd->add_option("--sensor", synth_sensor, "sensor of the input");
  synth_cmd->add_option("--out", synth_out, "output waveform file")->required();

  // plot
  DataOptions plot_data;
  std::string plot_model, plot_out;
  std::size_t plot_index = 0;
  auto* plot_cmd = app.add_subcommand("plot", "input / synthesized / target SVG for one test segment");
  add_data_options(plot_cmd, plot_data);
  plot_cmd->add_option("--model", plot_model, "generator file or 'identity'")->required();
  plot_cmd->add_option("--index", plot_index, "test segment index");
  plot_cmd->add_option("--out", plot_out, "SVG path")->required();

  // gradcheck
  std::size_t gc_q = 0, gc_cases = 100;
  std::uint64_t gc_seed = 1;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of random operational layers");
  gc_cmd->add_option("--q", gc_q, "order to test (default: 1, 2 and 3)");
  gc_cmd->add_option("--cases", gc_cases, "random layer configurations");
  gc_cmd->add_option("--seed", gc_seed, "sweep seed");

  // bench
  std::string bench_model, bench_arch = "default";
  std::size_t bench_segments = 20, bench_q = 3;
  std::uint64_t bench_seed = 1;
  auto* bench_cmd = app.add_subcommand("bench", "single-threaded latency per 5-second segment");
  bench_cmd->add_option("--model", bench_model, "generator file (default: freshly initialized)");
  bench_cmd->add_option("--segments", bench_segments, "timed forward passes (>= 10)");
  bench_cmd->add_option("--q", bench_q, "order Q of a fresh model");
  bench_cmd->add_option("--arch", bench_arch, "widths of a fresh model: default|reduced");
  bench_cmd->add_option("--seed", bench_seed, "init seed of a fresh model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << innermost(app)->help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << "\n" << innermost(app)->help();
    return 2;
  }

  try {
    if (train_cmd->parsed()) {
      training::TrainConfig cfg;
      if (!train_config.empty()) cfg = training::train_config_from_json(read_json_file(train_config));
      if (train_cmd->count("--arch")) cfg.arch = named_arch(arch_name);
      if (seed) cfg.seed = *seed;
      if (q) cfg.arch.order = *q;
      if (iters) cfg.max_iters = *iters;
      if (batch) cfg.batch = *batch;
      if (checkpoint_interval) cfg.checkpoint_interval = *checkpoint_interval;
      if (!checkpoint.empty()) cfg.checkpoint_path = checkpoint;
      if (!loss_csv.empty()) cfg.loss_csv_path = loss_csv;
      if (strict) cfg.strict_determinism = true;
      cfg.validate();

      const auto split = load_split(train_data, err);
      if (split.train.empty()) throw ConfigError("the split leaves no training segments");
      training::Trainer trainer = resume.empty()
                                      ? training::Trainer(cfg, split.train)
                                      : training::Trainer::resume(resume, split.train);
      if (!resume.empty()) {
        // Only the run length and logging targets may change on resume.
        trainer.config().max_iters = cfg.max_iters;
        trainer.config().loss_csv_path = cfg.loss_csv_path;
        trainer.config().checkpoint_path = cfg.checkpoint_path;
        trainer.config().checkpoint_interval = cfg.checkpoint_interval;
      }
      const auto& report = trainer.run();
      models::save_model(trainer.generator(), train_out);
      if (!cfg.checkpoint_path.empty()) trainer.save_checkpoint(cfg.checkpoint_path);
      out << "trained " << trainer.iteration() << " iterations on " << split.train.size()
          << " segments (" << trainer.generator().parameter_count() << " generator parameters)\n";
      if (!report.iterations.empty()) out << "last: " << training::kLossCsvHeader << "\n      "
                                          << training::loss_csv_row(report.iterations.back()) << "\n";
      out << "model " << train_out << " fnv1a64 "
          << hex64(models::fnv1a64(models::read_file_bytes(train_out))) << "\n";
      return 0;
    }

    if (eval_cmd->parsed()) {
      const auto model = load_model(eval_model);
      const auto split = load_split(eval_data, err);
      if (split.test.empty()) throw ConfigError("the split leaves no test segments");
      const std::string sensor = eval_data.data == kToy ? "toy-csn" : eval_data.sensor;
      const auto report = eval::evaluate(model_fn(model), split.test, sensor);
      const std::string csv = eval::eval_csv(report.row);
      if (!eval_segments.empty()) models::write_file_atomic(eval_segments, eval::segment_csv(report));
      // stdout stays machine-readable when the CSV goes there.
      if (eval_out.empty()) {
        out << csv;
        err << eval::pretty_table(report.row);
      } else {
        models::write_file_atomic(eval_out, csv);
        out << eval::pretty_table(report.row);
      }
      return 0;
    }

    if (synth_cmd->parsed()) {
      const auto model = load_model(synth_model);
      const auto r = eval::synthesize(model_fn(model), synth_input,
                                      signal::sensor_from_string(synth_sensor), synth_out);
      for (const auto& w : r.warnings) err << "warning: " << w << "\n";
      out << "wrote " << r.segments << " segments (" << r.segments * signal::kSegmentSamples
          << " samples) to " << synth_out << ", stats in " << r.stats_path << "\n";
      return 0;
    }

    if (plot_cmd->parsed()) {
      const auto model = load_model(plot_model);
      const auto split = load_split(plot_data, err);
      if (plot_index >= split.test.size()) {
        throw ConfigError("--index " + std::to_string(plot_index) + " is past the " +
                          std::to_string(split.test.size()) + " test segments");
      }
      const auto& pair = split.test[plot_index];
      const auto y = model_fn(model)(pair.source);
      const auto scores = eval::plot_triplet(pair.source, y, pair.target, plot_out);
      out << pair.record_id << "#" << pair.segment_index << ": " << eval::triplet_title(scores) << "\n";
      return 0;
    }

    if (gc_cmd->parsed()) {
      std::vector<std::size_t> orders = gc_q ? std::vector<std::size_t>{gc_q}
                                             : std::vector<std::size_t>{1, 2, 3};
      const auto sweep = eval::gradcheck_sweep(orders, gc_cases, gc_seed);
      char buf[96];
      std::snprintf(buf, sizeof buf, "max relative error: %.3e over %zu cases", sweep.max_rel_err,
                    sweep.cases);
      out << buf << "\n" << "worst: " << sweep.worst << "\n" << (sweep.pass() ? "PASS" : "FAIL") << "\n";
      return sweep.pass() ? 0 : 1;
    }

    if (bench_cmd->parsed()) {
      std::optional<models::Generator> g;
      if (bench_model.empty()) {
        auto arch = named_arch(bench_arch);
        arch.order = bench_q;
        arch.seed = bench_seed;
        g.emplace(arch);
      } else {
        g.emplace(models::load_generator(bench_model));
      }
      const auto r = eval::bench_latency(*g, bench_segments);
      char buf[160];
      std::snprintf(buf, sizeof buf, "median %.2f ms, min %.2f ms, max %.2f ms over %zu segments",
                    r.median_ms, r.min_ms, r.max_ms, r.n_segments);
      out << buf << " (" << g->parameter_count() << " parameters)\n";
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace opgan::cli
