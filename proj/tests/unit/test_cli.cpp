#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixture_table.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
namespace ts = tiergraph::testsupport;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args, const std::string& env = "") {
  const fs::path out = fs::temp_directory_path() / "tg_cli_stdout.txt";
  const std::string cmd = (env.empty() ? "" : env + " ") + TIERGRAPH_CLI_PATH + " " + args +
                          " > " + out.string() + " 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(rc);
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::vector<json> json_lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cli groups: one JSON line per fixture molecule") {
  const RunResult r = run_cli("groups " + ts::fixtures_sdf());
  CHECK(r.exit_code == 0);
  const auto lines = json_lines(r.out);
  REQUIRE(lines.size() == ts::fixture_table().size());
  CHECK(lines[0]["cid"] == "712");
  CHECK(lines[0]["fgs"] == json::array({{0, 1}}));
  CHECK(lines[0]["ccg"] == json::array({2, 3}));
}

TEST_CASE("cli groups: empty input file") {
  const fs::path empty = fs::temp_directory_path() / "tg_empty.sdf";
  std::ofstream(empty.string()) << "";
  const RunResult r = run_cli("groups " + empty.string());
  CHECK(r.exit_code == 0);
  CHECK(json_lines(r.out).empty());
}

TEST_CASE("cli groups: lenient mode reports bad records in place") {
  const fs::path mixed = fs::temp_directory_path() / "tg_mixed.sdf";
  {
    std::ifstream fixtures(ts::fixtures_sdf());
    std::string all((std::istreambuf_iterator<char>(fixtures)),
                    std::istreambuf_iterator<char>());
    const auto first_end = all.find("$$$$\n") + 5;
    std::ofstream out(mixed.string());
    out << all.substr(0, first_end);           // formaldehyde
    out << "junk\n\n\nnot a counts line\n$$$$\n";
    out << all.substr(first_end, all.find("$$$$\n", first_end) + 5 - first_end);
  }
  const RunResult strict = run_cli("groups " + mixed.string());
  CHECK(strict.exit_code == 2);

  const RunResult lenient = run_cli("groups --lenient " + mixed.string());
  CHECK(lenient.exit_code == 0);
  const auto lines = json_lines(lenient.out);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0].contains("cid"));
  CHECK(lines[1].contains("error"));
  CHECK(lines[1]["record"] == 1);
  CHECK(lines[2].contains("cid"));
}

TEST_CASE("cli groups: --jobs pool preserves input order") {
  const RunResult serial = run_cli("groups " + ts::fixtures_sdf());
  const RunResult parallel = run_cli("--jobs 4 groups " + ts::fixtures_sdf());
  CHECK(parallel.exit_code == 0);
  CHECK(parallel.out == serial.out);
}

TEST_CASE("cli stats: fixture corpus statistics") {
  const RunResult r = run_cli("stats " + ts::fixtures_sdf());
  CHECK(r.exit_code == 0);
  const auto lines = json_lines(r.out);
  REQUIRE(lines.size() == 1);
  CHECK(lines[0]["molecules"] == 17);
  CHECK(lines[0]["min"] == 1);
  CHECK(lines[0]["max"] == 13);
  CHECK(std::abs(lines[0]["mean"].get<double>() - 87.0 / 17.0) < 1e-12);
}

TEST_CASE("cli pipeline: train-gae, embed, tune-weights") {
  const fs::path dir = fs::temp_directory_path() / "tg_cli_pipe";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string params = (dir / "gae.tgp").string();
  const std::string emb = (dir / "emb.tge").string();

  // epochs 0: params file equals initialization (same seed, no training)
  RunResult r = run_cli("train-gae " + ts::fixtures_sdf() +
                        " --scheme bindingdb --epochs 0 --seed 5 --out " + params);
  CHECK(r.exit_code == 0);
  const std::string init_a = slurp(params);
  r = run_cli("train-gae " + ts::fixtures_sdf() +
              " --scheme bindingdb --epochs 0 --seed 5 --out " + params);
  CHECK(r.exit_code == 0);
  CHECK(slurp(params) == init_a);
  CHECK(fs::exists(params + ".manifest.json"));

  r = run_cli("train-gae " + ts::fixtures_sdf() +
              " --scheme bindingdb --epochs 3 --seed 5 --out " + params);
  CHECK(r.exit_code == 0);
  CHECK(slurp(params) != init_a);  // training moved the parameters

  // embed with default weights; header records them
  r = run_cli("embed " + ts::fixtures_sdf() + " --params " + params + " --out " + emb);
  CHECK(r.exit_code == 0);
  {
    std::ifstream in(emb);
    std::string header;
    std::getline(in, header);
    CHECK(header.find("weights=1,0.5,0.1") != std::string::npos);
  }
  // reruns are byte-identical
  const std::string emb_a = slurp(emb);
  r = run_cli("embed " + ts::fixtures_sdf() + " --params " + params + " --out " + emb);
  CHECK(r.exit_code == 0);
  CHECK(slurp(emb) == emb_a);

  // train-predict on the stored embeddings
  const std::string metrics = (dir / "metrics.json").string();
  r = run_cli("train-predict --embeddings " + emb + " --targets-file " +
              ts::fixture_targets_csv() + " --targets mu --epochs 20 --seed 2 --out " +
              metrics);
  CHECK(r.exit_code == 0);
  const json m = json::parse(slurp(metrics));
  CHECK(m["train_mae"].contains("mu"));
  CHECK(m["val_mae"].contains("mu"));

  // 2x2x2 grid with budget 8 emits 8 trial lines
  const std::string log = (dir / "trials.jsonl").string();
  r = run_cli("tune-weights " + ts::fixtures_sdf() + " --gae-params " + params +
              " --targets-file " + ts::fixture_targets_csv() +
              " --target mu --strategy grid --grid-fg 1,2 --grid-rg 0.4,0.6 "
              "--grid-ccg 0.1,0.2 --budget 8 --epochs 10 --cache-dir " +
              (dir / "cache").string() + " --out " + log);
  CHECK(r.exit_code == 0);
  const auto trials = json_lines(slurp(log));
  REQUIRE(trials.size() == 8);
  for (int i = 0; i < 8; ++i) {
    CHECK(trials[i]["index"] == i);
    CHECK(trials[i].contains("val_mae"));
    CHECK(trials[i].contains("cache_key"));
    CHECK(trials[i].contains("wall_time_s"));
    CHECK(trials[i]["target"] == "mu");
  }
}

TEST_CASE("cli train-predict: trainable kind weights move during training") {
  const fs::path dir = fs::temp_directory_path() / "tg_cli_trainable";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string params = (dir / "gae.tgp").string();
  const std::string emb = (dir / "emb.tge").string();
  REQUIRE(run_cli("train-gae " + ts::fixtures_sdf() +
                  " --scheme bindingdb --epochs 2 --seed 3 --out " + params)
              .exit_code == 0);
  REQUIRE(run_cli("embed " + ts::fixtures_sdf() + " --params " + params + " --out " + emb)
              .exit_code == 0);
  const RunResult r = run_cli("train-predict --embeddings " + emb + " --targets-file " +
                              ts::fixture_targets_csv() +
                              " --targets alpha --weight-mode trainable --sdf " +
                              ts::fixtures_sdf() + " --epochs 30 --seed 9");
  CHECK(r.exit_code == 0);
  const auto lines = json_lines(r.out);
  REQUIRE(lines.size() == 1);
  REQUIRE(lines[0].contains("final_weights"));
  // started from (1, 0.5, 0.1) and trained jointly with the MLP
  CHECK(lines[0]["final_weights"]["fg"].get<double>() != 1.0);
  CHECK(lines[0]["final_weights"]["fg"].get<double>() > 0.5);

  // trainable mode without --sdf cannot recover group kinds
  CHECK(run_cli("train-predict --embeddings " + emb + " --targets-file " +
                ts::fixture_targets_csv() + " --targets alpha --weight-mode trainable")
            .exit_code == 3);
}

TEST_CASE("cli tune-weights: TIERGRAPH_CACHE_DIR supplies the cache directory") {
  const fs::path dir = fs::temp_directory_path() / "tg_cli_envcache";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string params = (dir / "gae.tgp").string();
  REQUIRE(run_cli("train-gae " + ts::fixtures_sdf() +
                  " --scheme bindingdb --epochs 0 --seed 1 --out " + params)
              .exit_code == 0);
  const std::string env_dir = (dir / "cache").string();
  const RunResult r =
      run_cli("tune-weights " + ts::fixtures_sdf() + " --gae-params " + params +
              " --targets-file " + ts::fixture_targets_csv() +
              " --target mu --strategy grid --budget 1 --epochs 5",
              "TIERGRAPH_CACHE_DIR=" + env_dir);
  CHECK(r.exit_code == 0);
  std::size_t files = 0;
  for (auto it : fs::directory_iterator(env_dir)) {
    (void)it;
    ++files;
  }
  CHECK(files == 1);
}

TEST_CASE("cli exit codes") {
  CHECK(run_cli("groups /nonexistent/file.sdf").exit_code != 0);
  CHECK(run_cli("definitely-not-a-command").exit_code == 2);
  CHECK(run_cli("train-gae " + ts::fixtures_sdf() + " --scheme qm9 --epochs 1 --out /tmp/x.tgp")
            .exit_code == 3);  // sulfur outside the QM9 vocabulary -> data error
}
