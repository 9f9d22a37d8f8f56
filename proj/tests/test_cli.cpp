#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "opgan/cli.hpp"
#include "opgan/serialize.hpp"
#include "opgan/signal.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "opgan");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = opgan::cli::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("opgan_cli_" + std::to_string(::getpid()));
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::vector<std::string> small_train(const std::string& out, const std::string& csv) {
  return {"train", "--data", "toy", "--toy-count", "6", "--iters", "3", "--seed", "7",
          "--arch", "reduced", "--q", "2", "--strict-determinism", "--out", out, "--loss-csv", csv};
}

}  // namespace

TEST_CASE("usage errors exit 2 with usage text") {
  auto r = run({"train", "--bogus", "1", "--out", "x"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: usage: ", 0) == 0);
  CHECK(r.err.find("Usage:") != std::string::npos);
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  r = run({"eval", "--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("--model") != std::string::npos);
}

TEST_CASE("gradcheck subcommand") {
  const auto r = run({"gradcheck", "--q", "3", "--cases", "10"});
  CHECK(r.code == 0);
  CHECK(r.out.find("max relative error: ") != std::string::npos);
  CHECK(r.out.find("PASS") != std::string::npos);
}

TEST_CASE("train is deterministic and resumable") {
  TempDir dir;
  auto a = run(small_train(dir / "a.opgn", dir / "a.csv"));
  REQUIRE(a.code == 0);
  auto b = run(small_train(dir / "b.opgn", dir / "b.csv"));
  REQUIRE(b.code == 0);
  CHECK(read_text(dir / "a.opgn") == read_text(dir / "b.opgn"));
  CHECK(read_text(dir / "a.csv") == read_text(dir / "b.csv"));
  CHECK(read_text(dir / "a.csv").rfind("iter,adv_g,adv_d,time,stft,total,wallclock_ms\n", 0) == 0);

  // 2 iterations + checkpoint, then resume to 3: same model as the straight run.
  auto part = small_train(dir / "p.opgn", dir / "p.csv");
  part[6] = "2";
  part.insert(part.end(), {"--checkpoint", dir / "p.ckpt"});
  REQUIRE(run(part).code == 0);
  auto rest = small_train(dir / "r.opgn", dir / "p.csv");
  rest.insert(rest.end(), {"--resume", dir / "p.ckpt"});
  const auto r = run(rest);
  REQUIRE(r.code == 0);
  CHECK(read_text(dir / "r.opgn") == read_text(dir / "a.opgn"));
  CHECK(read_text(dir / "p.csv") == read_text(dir / "a.csv"));
}

TEST_CASE("config file") {
  TempDir dir;
  std::ofstream(dir / "cfg.json") << R"({"max_iters": 2, "seed": 3, "arch": {"generator_widths": [4, 4, 4, 4, 4], "discriminator_widths": [2, 2, 2, 2, 2], "order": 1}})";
  auto r = run({"train", "--data", "toy", "--toy-count", "4", "--config", dir / "cfg.json", "--out",
                dir / "m.opgn"});
  CHECK(r.code == 0);
  CHECK(r.out.find("trained 2 iterations") != std::string::npos);
  std::ofstream(dir / "bad.json") << R"({"max_iterz": 2})";
  r = run({"train", "--config", dir / "bad.json", "--out", dir / "m.opgn"});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: config: ", 0) == 0);
}

TEST_CASE("eval, plot, synth and bench") {
  TempDir dir;
  REQUIRE(run(small_train(dir / "m.opgn", dir / "m.csv")).code == 0);

  auto r = run({"eval", "--model", "identity", "--toy-count", "10"});
  CHECK(r.code == 0);
  std::istringstream csv(r.out);
  std::string header, in, out;
  std::getline(csv, header);
  std::getline(csv, in);
  std::getline(csv, out);
  CHECK(header == "sensor,side,psnr_time_db,psnr_freq_db,n_segments");
  CHECK(in.substr(in.find(",input,") + 7) == out.substr(out.find(",output,") + 8));

  r = run({"eval", "--model", dir / "m.opgn", "--toy-count", "10", "--out", dir / "e.csv"});
  CHECK(r.code == 0);
  CHECK(read_text(dir / "e.csv").rfind("sensor,side,", 0) == 0);

  r = run({"plot", "--model", dir / "m.opgn", "--toy-count", "10", "--out", dir / "p.svg"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FFT Output PSNR: ") != std::string::npos);
  CHECK(fs::exists(dir / "p.svg"));
  CHECK(run({"plot", "--model", "identity", "--toy-count", "10", "--index", "99", "--out",
             dir / "p.svg"}).code == 1);

  std::vector<double> ramp(300);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = std::sin(0.1 * static_cast<double>(i));
  opgan::signal::write_waveform(dir / "w.txt", ramp, 50.0);
  r = run({"synth", "--model", dir / "m.opgn", "--input", dir / "w.txt", "--out", dir / "o.txt"});
  CHECK(r.code == 0);
  CHECK(r.out.find("1000 samples") != std::string::npos);

  r = run({"bench", "--arch", "reduced", "--segments", "10"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("median ", 0) == 0);

  r = run({"eval", "--model", dir / "missing.opgn"});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: io: ", 0) == 0);
  r = run({"eval", "--model", "identity", "--data", dir / "nowhere"});
  CHECK(r.code == 1);
  r = run({"bench", "--segments", "3", "--arch", "reduced"});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: config: ", 0) == 0);
}
