#include <catch_amalgamated.hpp>

#include <set>

#include "iclprobe/sweep/store.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace iclprobe;
using test::run_cli;
namespace fs = std::filesystem;

namespace {

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(test::read_file(p)); }

std::string samples_dir() { return fs::path(ICLPROBE_TEST_FIXTURES).parent_path().parent_path() / "samples"; }

// Files below `root`, relative path -> bytes; effective_config.json and run.log are excluded.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name == "effective_config.json" || name == "run.log" || name.front() == '.') continue;
    out[fs::relative(e.path(), root).string()] = test::read_file(e.path());
  }
  return out;
}

/// Store with five index-range suites whose accuracy falls with the range start.
void write_monotone_store(const fs::path& root) {
  ResultStore store(root);
  std::vector<CellRecord> records;
  for (int k = 0; k < 5; ++k) {
    for (std::int64_t step : {10, 20}) {
      CellRecord rec;
      rec.suite = "r" + std::to_string(k);
      rec.checkpoint = "m@" + std::to_string(step);
      rec.suite_spec = {{"name", rec.suite},
                        {"task", "lsc"},
                        {"group", "g"},
                        {"pool", {{"kind", "index_range"}, {"lo", 1000 * k}, {"hi", 1000 * (k + 1)}}}};
      rec.checkpoint_spec = {{"model", "m"}, {"step", step}, {"params", 1e8}};
      rec.cell_id = make_cell_id(rec.suite_spec, rec.checkpoint);
      std::vector<SampleResult> results;
      for (int i = 0; i < 10; ++i) {
        SampleResult r;
        r.suite = rec.suite;
        r.checkpoint = rec.checkpoint;
        r.sample_id = static_cast<std::uint64_t>(i);
        r.correct = i < 9 - 2 * k;
        r.answer_logprob = r.correct ? -0.1 : -3.0;
        results.push_back(r);
      }
      store.finalize_cell(rec.cell_id, results);
      fill_metrics(rec, results);
      records.push_back(rec);
    }
  }
  store.merge_index(records);
}

}  // namespace

TEST_CASE("gen writes one line per instance") {
  const auto dir = test::scratch_dir("cli-gen");
  const auto r = run_cli("--out suites gen --task lsc --pattern-len 5 --gap-len 5 --n 1000 --seed 42", dir);
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("suite lsc: 1000 instances") != std::string::npos);
  CHECK(count_lines(test::read_file(dir / "suites" / "lsc.jsonl")) == 1000);
  const auto eff = read_json(dir / "suites" / "effective_config.json");
  CHECK(eff["command"] == "gen");
  CHECK(eff["seed"] == "42");
  CHECK(eff["gen"]["pattern-len"] == "5");
}

TEST_CASE("gen covers every task") {
  const auto dir = test::scratch_dir("cli-gen-all");
  for (const std::string task : {"lsc", "lscg", "wc", "wi", "tt", "cf", "country_capital"}) {
    const auto r = run_cli("gen --task " + task + " --n 50", dir);
    INFO(task << ": " << r.err);
    CHECK(r.code == 0);
    CHECK(count_lines(test::read_file(dir / "out" / (task + ".jsonl"))) == 50);
  }
  const auto ranged = run_cli("gen --task wi --index-range 3000:3500 --name wi_range --n 20", dir);
  CHECK(ranged.code == 0);
  CHECK(test::read_file(dir / "out" / "wi_range.jsonl").find("\"index_range\"") != std::string::npos);
}

TEST_CASE("input and config errors exit with 2") {
  const auto dir = test::scratch_dir("cli-errors");
  const auto missing = run_cli("gen --task lsc --vocab does/not/exist.tsv", dir);
  CHECK(missing.code == 2);
  CHECK(missing.err.find("--vocab") != std::string::npos);

  CHECK(run_cli("gen --task lsc --bogus 1", dir).code == 2);
  CHECK(run_cli("--bogus gen --task lsc", dir).code == 2);
  CHECK(run_cli("", dir).code == 2);
  CHECK(run_cli("gen --task nope", dir).code == 2);
  CHECK(run_cli("gen --task lsc --index-range 10", dir).code == 2);
  CHECK(run_cli("gen --task lsc --pattern-len 0", dir).code == 2);
  CHECK(run_cli("gen", dir).code == 2);
  CHECK(run_cli("--jobs 0 gen --task lsc", dir).code == 2);
  const auto small = run_cli("gen --task lsc --index-range 100:105", dir);
  CHECK(small.code == 2);
  CHECK(small.err.find("PoolTooSmall") != std::string::npos);
  CHECK(run_cli("eval --suite missing.jsonl", dir).code == 2);
  CHECK(run_cli("stats", dir).code == 2);
}

TEST_CASE("every subcommand documents its flags") {
  const auto dir = test::scratch_dir("cli-help");
  const std::map<std::string, std::vector<std::string>> flags{
      {"gen",
       {"--vocab", "--task", "--manifest", "--name", "--n", "--index-range", "--wordlist", "--no-filter-special",
        "--pattern-len", "--gap-len", "--inner-gap-len", "--n-features", "--n-labels", "--n-distractors",
        "--demos-per-feature", "--seq-len", "--target-index", "--n-demos", "--src", "--tgt"}},
      {"eval",
       {"--vocab", "--suite", "--backend", "--backend-json", "--model", "--step", "--params", "--top-k", "--retries",
        "--hidden-out"}},
      {"sweep", {"--manifest", "--top-k", "--retries"}},
      {"stats", {"--store", "--metric", "--window", "--lag-order", "--det-case", "--critical-values"}},
      {"suda", {"--checkpoint", "--suite", "--tau", "--variant"}},
      {"report", {"--store", "--suda", "--metric", "--window"}},
  };
  const auto top = run_cli("--help", dir);
  CHECK(top.code == 0);
  for (const char* global : {"--seed", "--jobs", "--out", "--data-dir", "--config"}) {
    CHECK(top.out.find(global) != std::string::npos);
  }
  for (const auto& [cmd, names] : flags) {
    const auto r = run_cli(cmd + " --help", dir);
    INFO(cmd);
    CHECK(r.code == 0);
    for (const auto& f : names) {
      INFO(f);
      CHECK(r.out.find(f) != std::string::npos);
    }
    CHECK(top.out.find(cmd) != std::string::npos);
  }
}

TEST_CASE("config file values yield to command-line flags") {
  const auto dir = test::scratch_dir("cli-config");
  fs::copy_file(samples_dir() + "/gen_config.json", dir / "cfg.json");
  const auto from_file = run_cli("--config cfg.json gen", dir);
  INFO(from_file.err);
  REQUIRE(from_file.code == 0);
  const auto a = test::read_file(dir / "suites" / "lscg.jsonl");
  CHECK(count_lines(a) == 500);
  const auto eff = read_json(dir / "suites" / "effective_config.json");
  CHECK(eff["seed"] == "7");
  CHECK(eff["gen"]["inner-gap-len"] == "3");

  const auto flags = run_cli("--seed 7 --out direct gen --task lscg --n 500 --pattern-len 4 --gap-len 8 "
                             "--inner-gap-len 3 --index-range 2000:4000",
                             dir);
  REQUIRE(flags.code == 0);
  CHECK(test::read_file(dir / "direct" / "lscg.jsonl") == a);

  const auto over = run_cli("--config cfg.json --seed 8 --out over gen --n 20", dir);
  REQUIRE(over.code == 0);
  CHECK(count_lines(test::read_file(dir / "over" / "lscg.jsonl")) == 20);
  CHECK(read_json(dir / "over" / "effective_config.json")["seed"] == "8");
  const auto first_line = [](const std::string& text) { return text.substr(0, text.find('\n')); };
  CHECK(first_line(test::read_file(dir / "over" / "lscg.jsonl")) != first_line(a));

  test::write_file(dir / "bad.json", "{not json");
  CHECK(run_cli("--config bad.json gen", dir).code == 2);
  test::write_file(dir / "unknown.json", R"({"gen": {"colour": "red"}})");
  CHECK(run_cli("--config unknown.json gen --task lsc", dir).code == 2);
}

TEST_CASE("metadata and induction eval over generated suites") {
  const auto dir = test::scratch_dir("cli-eval");
  REQUIRE(run_cli("--out suites gen --task lsc --n 100", dir).code == 0);
  REQUIRE(run_cli("--out suites gen --task wc --n 100", dir).code == 0);
  const auto r = run_cli("--out store eval --suite suites/lsc.jsonl --suite wc=suites/wc.jsonl --backend metadata", dir);
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("suite lsc @ model@0: accuracy 1 mean_logprob 0") != std::string::npos);
  CHECK(r.out.find("suite wc @ model@0: accuracy 1 mean_logprob 0") != std::string::npos);
  const auto index = read_json(dir / "store" / "index.json")["cells"];
  REQUIRE(index.size() == 2);

  const auto ind = run_cli("--out store eval --suite suites/lsc.jsonl --backend induction --model ind", dir);
  REQUIRE(ind.code == 0);
  CHECK(ind.out.find("accuracy 1 ") != std::string::npos);
  CHECK(read_json(dir / "store" / "index.json")["cells"].size() == 3);

  const auto bad = run_cli("--out store eval --suite suites/lsc.jsonl --backend tensor:missing.tnsa", dir);
  CHECK(bad.code == 2);
  CHECK(run_cli("--out store eval --suite suites/lsc.jsonl --backend carrier-pigeon", dir).code == 2);
}

TEST_CASE("unreachable http backend fails the cell with exit 1") {
  const auto dir = test::scratch_dir("cli-http");
  REQUIRE(run_cli("--out suites gen --task lsc --n 5", dir).code == 0);
  const auto r = run_cli("--out store eval --suite suites/lsc.jsonl --backend http:http://127.0.0.1:9 --retries 0", dir);
  CHECK(r.code == 1);
  CHECK(r.out.find("FAILED") != std::string::npos);
  const auto index = read_json(dir / "store" / "index.json")["cells"];
  REQUIRE(index.size() == 1);
  CHECK(index[0]["status"] == "failed");
}

TEST_CASE("sweep over the sample oracle manifest") {
  const auto dir = test::scratch_dir("cli-sweep");
  const auto r = run_cli("--out store --jobs 2 sweep --manifest '" + samples_dir() + "/oracle_sweep.json'", dir);
  INFO(r.err << r.out);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("cells: 12 complete (0 resumed), 0 failed") != std::string::npos);
  for (const auto& rec : read_json(dir / "store" / "index.json")["cells"]) {
    if (rec["checkpoint"] != "metadata@0") continue;
    CHECK(rec["accuracy"] == 1.0);
    CHECK(rec["mean_logprob"] == 0.0);
  }
  const auto again = run_cli("--out store sweep --manifest '" + samples_dir() + "/oracle_sweep.json'", dir);
  CHECK(again.out.find("cells: 12 complete (12 resumed), 0 failed") != std::string::npos);
}

TEST_CASE("stats over monotone range data") {
  const auto dir = test::scratch_dir("cli-stats");
  write_monotone_store(dir / "store");
  const auto r = run_cli("--out stats stats --store store", dir);
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto rows = detail::read_csv((dir / "stats" / "correlations.csv").string());
  REQUIRE(rows.size() == 5);
  int pearson_rows = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i][8] == "ok");
    CHECK(std::stod(rows[i][6]) == Catch::Approx(-1.0).margin(1e-12));
    pearson_rows += rows[i][4] == "pearson";
  }
  CHECK(pearson_rows == 2);
  for (const char* f : {"gaps.csv", "johansen.csv", "scaling.csv"}) CHECK(fs::exists(dir / "stats" / f));
  CHECK(test::read_file(dir / "stats" / "gaps.csv").find("m,g,accuracy,10,0.8,0.8,") != std::string::npos);

  CHECK(run_cli("--out stats stats --store store --metric bogus", dir).code == 2);
  CHECK(run_cli("--out stats stats --store nowhere", dir).code == 2);
}

TEST_CASE("report over an empty store") {
  const auto dir = test::scratch_dir("cli-report-empty");
  fs::create_directories(dir / "empty");
  const auto r = run_cli("--out rep report --store empty", dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("EmptyStore") != std::string::npos);
}

TEST_CASE("report joins results") {
  const auto dir = test::scratch_dir("cli-report");
  write_monotone_store(dir / "store");
  const auto r = run_cli("--out rep report --store store --window 3", dir);
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto curves = test::read_file(dir / "rep" / "token_index_curves.csv");
  CHECK(count_lines(curves) == 11);
  CHECK(curves.find("m,10,g,r0,0,1000,0.9,") != std::string::npos);
  CHECK(count_lines(test::read_file(dir / "rep" / "task_config_curves.csv")) == 11);
  CHECK(count_lines(test::read_file(dir / "rep" / "gap_curves.csv")) == 3);
  CHECK(fs::exists(dir / "rep" / "scaling_points.csv"));
  CHECK(run_cli("--out rep report --store store --suda nowhere", dir).code == 2);
}

TEST_CASE("full pipeline is byte-reproducible") {
  auto pipeline = [](const fs::path& dir) {
    const auto vocab = static_cast<std::int64_t>(test::desk_vocab().size());
    for (int step : {1, 2, 3}) {
      save_archive((dir / ("ck" + std::to_string(step) + ".tnsa")).string(),
                   test::random_probe_archive(vocab, 8, static_cast<std::uint64_t>(step), step % 2));
    }
    auto ok = [&](const std::string& args) {
      const auto r = run_cli(args, dir);
      INFO(args << "\n" << r.err);
      REQUIRE(r.code == 0);
    };
    ok("--seed 5 --out suites gen --task lsc --index-range 1000:2000 --name a --n 40");
    ok("--seed 5 --out suites gen --task lsc --index-range 2000:3000 --name b --n 40");
    for (int step : {1, 2, 3}) {
      const auto s = std::to_string(step);
      ok("--seed 5 --out store --jobs 2 eval --suite suites/a.jsonl --suite suites/b.jsonl --backend tensor:ck" + s +
         ".tnsa --model m --step " + s + " --hidden-out h" + s + ".tnsa");
    }
    ok("--seed 5 --out stats stats --store store");
    ok("--seed 5 --out suda --jobs 2 suda --suite suites/a.jsonl --suite suites/b.jsonl --checkpoint 1=h1.tnsa "
       "--checkpoint 2=h2.tnsa --checkpoint 3=h3.tnsa --variant rank1 --tau 0");
    ok("--seed 5 --out rep report --store store --suda suda");
  };
  const auto one = test::scratch_dir("cli-repro-1");
  const auto two = test::scratch_dir("cli-repro-2");
  pipeline(one);
  pipeline(two);
  const auto a = snapshot(one);
  const auto b = snapshot(two);
  REQUIRE(a.size() == b.size());
  for (const auto& [name, bytes] : a) {
    INFO(name);
    REQUIRE(b.count(name) == 1);
    CHECK(bytes == b.at(name));
  }
  for (const char* f : {"suda/suda_max_logit.csv", "suda/suda_overlap.csv", "stats/correlations.csv",
                        "rep/suda_series.csv", "h3.tnsa"}) {
    CHECK(a.count(f) == 1);
  }
  CHECK(count_lines(a.at("suda/suda_max_logit.csv")) == 7);
}
