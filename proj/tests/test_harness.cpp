#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "doctest.h"
#include "msfilter/config.hpp"
#include "msfilter/csv.hpp"
#include "msfilter/experiment.hpp"
#include "msfilter/parallel.hpp"

using namespace msf;

TEST_CASE("config parsing: comments, trimming, types") {
  const Config c = Config::from_string(
      "# leading comment\n"
      "a.x = 1.5   # trailing comment\n"
      "  a.y =  hello world \n"
      "a.n = -42\n"
      "flag1 = yes\n"
      "flag2 = off\n"
      "list = 0.1, 0.05,0.02\n",
      "test.cfg");
  CHECK(c.get_double("a.x", 0.0) == doctest::Approx(1.5));
  CHECK(c.get_string("a.y", "") == "hello world");
  CHECK(c.get_int("a.n", 0) == -42);
  CHECK(c.get_bool("flag1", false));
  CHECK_FALSE(c.get_bool("flag2", true));
  const std::vector<double> xs = c.get_doubles("list", {});
  REQUIRE(xs.size() == 3);
  CHECK(xs[1] == doctest::Approx(0.05));
  // fallbacks for absent keys
  CHECK(c.get_double("missing", 7.5) == 7.5);
  CHECK(c.get_string("missing2", "dflt") == "dflt");
  CHECK_NOTHROW(c.check_all_consumed());
}

TEST_CASE("config rejects malformed input") {
  CHECK_THROWS_AS(Config::from_string("a = 1\na = 2\n", "dup.cfg"), ConfigError);
  CHECK_THROWS_AS(Config::from_string("just a token\n", "bad.cfg"), ConfigError);
  const Config c = Config::from_string("x = 1.5abc\nb = maybe\nl = 1, abc\nm = 1,,2\n", "t.cfg");
  CHECK_THROWS_AS(c.get_double("x", 0.0), ConfigError);
  CHECK_THROWS_AS(c.get_bool("b", false), ConfigError);
  CHECK_THROWS_AS(c.get_doubles("l", {}), ConfigError);
  // empty list elements are skipped, not errors
  CHECK(c.get_doubles("m", {}) == std::vector<double>{1.0, 2.0});
}

TEST_CASE("unconsumed keys are reported as unknown") {
  const Config c = Config::from_string("known = 1\nmystery.key = 2\n", "t.cfg");
  (void)c.get_int("known", 0);
  bool thrown = false;
  try {
    c.check_all_consumed();
  } catch (const ConfigError& e) {
    thrown = true;
    CHECK(std::string(e.what()).find("mystery.key") != std::string::npos);
  }
  CHECK(thrown);
  // has() does not consume
  const Config c2 = Config::from_string("k = 1\n", "t.cfg");
  CHECK(c2.has("k"));
  CHECK_THROWS_AS(c2.check_all_consumed(), ConfigError);
}

TEST_CASE("doubles round-trip through the CSV number format") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 3.141592653589793, 1e300, 0.0}) {
    const std::string s = fmt_double(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("line\nbreak") == "\"line\nbreak\"");
}

TEST_CASE("csv tables round-trip through files") {
  CsvTable t;
  t.header = {"a", "b"};
  t.rows = {{"1", "x,y"}, {fmt_double(0.1), "q\"q"}};
  const std::string path = "/tmp/msf_test_table.csv";
  t.save(path);
  const CsvTable u = load_csv(path);
  CHECK(u.header == t.header);
  CHECK(u.rows == t.rows);
  std::remove(path.c_str());
}

TEST_CASE("drift caches persist with full precision") {
  const DriftCache c({-1.0, 0.5, 2.0}, {0.1, 1.0 / 3.0, -0.7}, {0.01, 0.02, 0.03});
  const std::string path = "/tmp/msf_test_cache.csv";
  save_drift_cache(c, path);
  const DriftCache d = load_drift_cache(path);
  CHECK(d.nodes() == c.nodes());
  CHECK(d.values() == c.values());
  CHECK(d.ses() == c.ses());
  std::remove(path.c_str());
}

TEST_CASE("experiment config: per-kind defaults and validation") {
  const Config empty = Config::from_string("", "t.cfg");
  const ExperimentConfig strong = ExperimentConfig::from_config(empty, "strong-convergence");
  CHECK(strong.kind == "strong-convergence");
  CHECK(strong.model_name == "analytic-ou");
  CHECK(strong.eps_list == std::vector<double>{0.1, 0.05, 0.02, 0.01});
  CHECK(strong.dt == doctest::Approx(1e-3));
  CHECK(strong.reps == 200);
  const ExperimentConfig l1 = ExperimentConfig::from_config(empty, "filter-l1");
  CHECK(l1.eps_list == std::vector<double>{0.1, 0.05, 0.02});
  CHECK(l1.np == 5000);
  CHECK(l1.reps == 100);
  CHECK(l1.test_fn == 1);
  const ExperimentConfig weak = ExperimentConfig::from_config(empty, "filter-weak");
  CHECK(weak.model_name == "levy-correlated");
  CHECK(weak.reps == 200);
  // the file's experiment.kind is used when no override is passed
  const Config withkind = Config::from_string("experiment.kind = aux-scaling\n", "t.cfg");
  CHECK(ExperimentConfig::from_config(withkind).kind == "aux-scaling");
  CHECK_THROWS_AS(ExperimentConfig::from_config(empty, "no-such-kind"), ConfigError);
  // eps must be strictly decreasing and inside (0, 1]
  const Config badeps = Config::from_string("sweep.eps = 0.05, 0.1\n", "t.cfg");
  CHECK_THROWS_AS(ExperimentConfig::from_config(badeps, "strong-convergence"), ConfigError);
  // dt guard against the smallest eps
  const Config baddt = Config::from_string("sim.dt = 0.005\nsweep.eps = 0.1, 0.01\n", "t.cfg");
  CHECK_THROWS_AS(ExperimentConfig::from_config(baddt, "strong-convergence"), ConfigError);
  // horizon must be divisible by dt (caught when the grid is built)
  const Config badh = Config::from_string("sim.dt = 3e-4\n", "t.cfg");
  const ExperimentConfig ech = ExperimentConfig::from_config(badh, "strong-convergence");
  CHECK_THROWS_AS(run_experiment(ech), ConfigError);
  // unknown keys are errors
  const Config junk = Config::from_string("mystery = 1\n", "t.cfg");
  CHECK_THROWS_AS(ExperimentConfig::from_config(junk, "strong-convergence"), ConfigError);
}

TEST_CASE("config echo excludes environment-dependent keys") {
  const Config c = Config::from_string("out.dir = /tmp/somewhere\n", "t.cfg");
  const ExperimentConfig ec = ExperimentConfig::from_config(c, "invariant-suite");
  CHECK(ec.out_dir == "/tmp/somewhere");
  CHECK(!ec.echo().empty());
  for (const auto& [k, v] : ec.echo()) {
    CHECK(k != "out.dir");
    CHECK(k != "threads");
  }
}

TEST_CASE("parallel_for covers the range once, in any thread count") {
  for (int threads : {0, 1, 3}) {
    std::vector<int> hits(100, 0);
    parallel_for(100, threads, [&](std::int64_t i) { hits[static_cast<std::size_t>(i)]++; });
    for (int h : hits) CHECK(h == 1);
  }
  // exceptions propagate
  CHECK_THROWS_AS(parallel_for(10, 2,
                               [](std::int64_t i) {
                                 if (i == 5) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("reports are bit-identical across reruns and thread counts") {
  // miniature strong-convergence run (cheap but goes through the full path)
  const Config mini = Config::from_string(
      "sweep.eps = 0.1, 0.05\n"
      "mc.reps = 8\n"
      "sim.dt = 2e-3\n",
      "t.cfg");
  ExperimentConfig ec = ExperimentConfig::from_config(mini, "strong-convergence");
  const std::string a = run_experiment(ec).to_csv().to_string();
  const std::string b = run_experiment(ec).to_csv().to_string();
  CHECK(a == b);
  ExperimentConfig ec4 = ec;
  ec4.threads = 4;
  const std::string c = run_experiment(ec4).to_csv().to_string();
  CHECK(a == c);
  CHECK(a.find("record,key,eps,value,se,n,aborts,note") == 0);
  CHECK(a.find("strong_error") != std::string::npos);
}

TEST_CASE("filter experiment reports are reproducible too") {
  const Config mini = Config::from_string(
      "sweep.eps = 0.1, 0.05\n"
      "mc.reps = 4\n"
      "filter.np = 60\n"
      "sim.dt = 2e-3\n",
      "t.cfg");
  ExperimentConfig ec = ExperimentConfig::from_config(mini, "filter-l1");
  const std::string a = run_experiment(ec).to_csv().to_string();
  ExperimentConfig ec2 = ec;
  ec2.threads = 3;
  CHECK(run_experiment(ec2).to_csv().to_string() == a);
  // a different master seed changes the measured numbers
  ExperimentConfig ec3 = ec;
  ec3.master_seed = 1;
  CHECK(run_experiment(ec3).to_csv().to_string() != a);
}

TEST_CASE("fixed delta rule is honored") {
  const Config c = Config::from_string(
      "sweep.delta_rule = fixed\n"
      "sweep.delta_fixed = 0.25\n"
      "sweep.eps = 0.1\n"
      "mc.reps = 4\n"
      "sim.dt = 2e-3\n",
      "t.cfg");
  ExperimentConfig ec = ExperimentConfig::from_config(c, "strong-convergence");
  const ExperimentReport rep = run_experiment(ec);
  bool found = false;
  for (const ReportRow& r : rep.rows) {
    if (r.record == "metric" && r.key == "delta") {
      found = true;
      CHECK(r.value == doctest::Approx(0.25).epsilon(0.05));  // snapped to the grid
      CHECK(r.note.find("fixed rule") != std::string::npos);
    }
  }
  CHECK(found);
}

TEST_CASE("invariant suite runs clean end to end") {
  const Config empty = Config::from_string("", "t.cfg");
  ExperimentConfig ec = ExperimentConfig::from_config(empty, "invariant-suite");
  const ExperimentReport rep = run_experiment(ec);
  CHECK(rep.pass);
  // every check row passed (value column holds the verdict)
  for (const ReportRow& r : rep.rows)
    if (r.record == "check") CHECK(r.value == 1.0);
}
