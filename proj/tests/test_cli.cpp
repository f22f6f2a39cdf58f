#include "fuse4d/io.hpp"
#include "fuse4d/metrics.hpp"
#include "fuse4d/rng.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace fuse4d;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("fuse4d_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path log = scratch / ("log_" + std::to_string(std::random_device{}()) + ".txt");
  const std::string cmd = std::string(FUSE4D_CLI_PATH) + " " + args + " >" + log.string() +
                          " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string tree_digest(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::ostringstream digest;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream content;
    content << in.rdbuf();
    // Cheap stable content hash.
    std::uint64_t h = 1469598103934665603ULL;
    for (const char c : content.str()) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    digest << fs::relative(f, dir).string() << ":" << h << ";";
  }
  return digest.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth is byte-identical for identical flags and seed") {
  TempDir tmp;
  const std::string flags =
      " --scene sphere --frames 4 --size 64 --depth-noise-mm 0.2 --intensity-noise 0.02 --seed 9";
  const auto a =
      run_cli("synth --out " + (tmp.path / "a").string() + flags + " --threads 1", tmp.path);
  const auto b =
      run_cli("synth --out " + (tmp.path / "b").string() + flags + " --threads 2", tmp.path);
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(tree_digest(tmp.path / "a") == tree_digest(tmp.path / "b"));
  CHECK(fs::exists(tmp.path / "a" / "provenance.txt"));
}

TEST_CASE("fuse validates the temporal window parity") {
  TempDir tmp;
  REQUIRE(run_cli("synth --out " + (tmp.path / "seq").string() + " --scene plane --frames 2 --size 32",
                  tmp.path)
              .exit_code == 0);
  const auto r = run_cli("fuse --in " + (tmp.path / "seq").string() + " --out " +
                             (tmp.path / "out").string() + " --frames-fused 4",
                         tmp.path);
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("frames-fused must be odd") != std::string::npos);
}

TEST_CASE("unknown baseline method and unknown experiment exit with code 1") {
  TempDir tmp;
  const auto bad_method = run_cli("baseline --in x --out y --method unknown", tmp.path);
  CHECK(bad_method.exit_code == 1);
  const auto bad_fig =
      run_cli("pipeline --experiment fig9 --out " + (tmp.path / "p").string(), tmp.path);
  CHECK(bad_fig.exit_code == 1);
  const auto bad_scale = run_cli("pipeline --experiment fig4 --scale bench --out " +
                                     (tmp.path / "p2").string(),
                                 tmp.path);
  CHECK(bad_scale.exit_code == 1);
}

TEST_CASE("missing input directory is a data failure (exit 2)") {
  TempDir tmp;
  const auto r = run_cli("fuse --in " + (tmp.path / "nope").string() + " --out " +
                             (tmp.path / "out").string(),
                         tmp.path);
  CHECK(r.exit_code == 2);
}

TEST_CASE("gaussian baseline leaves a constant plane unchanged") {
  TempDir tmp;
  const fs::path seq_dir = tmp.path / "seq";
  REQUIRE(run_cli("synth --out " + seq_dir.string() + " --scene plane --frames 1 --size 32",
                  tmp.path)
              .exit_code == 0);
  const fs::path out_dir = tmp.path / "out";
  REQUIRE(run_cli("baseline --in " + seq_dir.string() + " --out " + out_dir.string() +
                      " --method gaussian",
                  tmp.path)
              .exit_code == 0);
  const Sequence in = io::read_sequence(seq_dir);
  const Sequence out = io::read_sequence(out_dir);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      CHECK(out.frames[0].depth().at(x, y) == in.frames[0].depth().at(x, y));
    }
  }
}

TEST_CASE("eval of a noiseless plane reports zero mean roughness") {
  TempDir tmp;
  const fs::path seq_dir = tmp.path / "seq";
  REQUIRE(run_cli("synth --out " + seq_dir.string() + " --scene plane --frames 1 --size 48",
                  tmp.path)
              .exit_code == 0);
  const fs::path csv = tmp.path / "m.csv";
  REQUIRE(run_cli("eval --in " + seq_dir.string() + " --csv " + csv.string(), tmp.path)
              .exit_code == 0);
  const auto report = io::read_report(csv);
  bool found_summary = false;
  for (const auto& row : report.rows) {
    if (row.kind == "summary") {
      found_summary = true;
      REQUIRE(row.mean_roughness_mm.has_value());
      CHECK(std::abs(*row.mean_roughness_mm) < 1e-6);
    }
  }
  CHECK(found_summary);
}

TEST_CASE("temporal averaging reduces roughness of a noisy static plane") {
  TempDir tmp;
  const fs::path seq_dir = tmp.path / "seq";
  REQUIRE(run_cli("synth --out " + seq_dir.string() +
                      " --scene plane --frames 9 --size 48 --depth-noise-mm 0.3 --seed 4",
                  tmp.path)
              .exit_code == 0);
  const fs::path out_dir = tmp.path / "ta";
  REQUIRE(run_cli("baseline --in " + seq_dir.string() + " --out " + out_dir.string() +
                      " --method temporal_average --temporal-radius 4",
                  tmp.path)
              .exit_code == 0);
  const fs::path csv = tmp.path / "m.csv";
  REQUIRE(run_cli("eval --in " + seq_dir.string() + " --in " + out_dir.string() + " --csv " +
                      csv.string(),
                  tmp.path)
              .exit_code == 0);
  const auto report = io::read_report(csv);
  double raw = -1.0, ta = -1.0;
  for (const auto& row : report.rows) {
    if (row.kind != "summary") continue;
    if (row.method == "raw") raw = *row.mean_roughness_mm;
    if (row.method == "temporal_average") ta = *row.mean_roughness_mm;
  }
  REQUIRE(raw > 0.0);
  REQUIRE(ta > 0.0);
  CHECK(ta < raw);
}

TEST_CASE("eval across three fused window sizes appends a decay fit") {
  TempDir tmp;
  const fs::path seq_dir = tmp.path / "seq";
  REQUIRE(run_cli("synth --out " + seq_dir.string() +
                      " --scene plane --frames 6 --size 32 --depth-noise-mm 0.3 --seed 6",
                  tmp.path)
              .exit_code == 0);
  std::string eval_args = "eval";
  for (const int n : {1, 3, 5}) {
    const fs::path out = tmp.path / ("n" + std::to_string(n));
    REQUIRE(run_cli("fuse --in " + seq_dir.string() + " --out " + out.string() +
                        " --frames-fused " + std::to_string(n) + " --label ours_n" +
                        std::to_string(n),
                    tmp.path)
                .exit_code == 0);
    // Provenance records the fused window for the decay fit.
    CHECK(fs::exists(out / "provenance.txt"));
    eval_args += " --in " + out.string();
  }
  const fs::path csv = tmp.path / "decay.csv";
  eval_args += " --csv " + csv.string();
  REQUIRE(run_cli(eval_args, tmp.path).exit_code == 0);
  const auto report = io::read_report(csv);
  bool has_decay = false;
  for (const auto& row : report.rows) {
    if (row.kind == "decay_fit") {
      has_decay = true;
      CHECK(row.delta_s_mm.has_value());
      CHECK(row.delta_t_mm.has_value());
      CHECK(row.r_squared.has_value());
    }
  }
  CHECK(has_decay);
}

TEST_CASE("pipeline fig4 writes a monotone sweep with a decay fit") {
  TempDir tmp;
  const auto r = run_cli("pipeline --experiment fig4 --scale desk --out " +
                             (tmp.path / "fig4").string() + " --threads 2",
                         tmp.path);
  REQUIRE(r.exit_code == 0);
  const auto report = io::read_report(tmp.path / "fig4" / "fig4.csv");
  double prev = 1e300;
  int sweeps = 0;
  bool decay = false;
  for (const auto& row : report.rows) {
    if (row.kind == "sweep") {
      ++sweeps;
      REQUIRE(row.mean_roughness_mm.has_value());
      CHECK(*row.mean_roughness_mm < prev);
      prev = *row.mean_roughness_mm;
    } else if (row.kind == "decay_fit") {
      decay = true;
      CHECK(*row.r_squared > 0.9);
    }
  }
  CHECK(sweeps == 5);
  CHECK(decay);
  CHECK(fs::exists(tmp.path / "fig4" / "provenance.txt"));
}

TEST_CASE("fuse output carries a complete provenance record") {
  TempDir tmp;
  const fs::path seq_dir = tmp.path / "seq";
  REQUIRE(run_cli("synth --out " + seq_dir.string() + " --scene plane --frames 3 --size 32",
                  tmp.path)
              .exit_code == 0);
  const fs::path out = tmp.path / "fused";
  REQUIRE(run_cli("fuse --in " + seq_dir.string() + " --out " + out.string() +
                      " --frames-fused 3",
                  tmp.path)
              .exit_code == 0);
  std::ifstream in(out / "provenance.txt");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string prov = ss.str();
  for (const char* key : {"command = fuse", "n_fused = 3", "theta_px = 2", "search_radius = 4",
                          "version = "}) {
    CHECK(prov.find(key) != std::string::npos);
  }
}

}  // TEST_SUITE
