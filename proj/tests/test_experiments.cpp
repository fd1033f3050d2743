#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "impspec/experiments.hpp"

using namespace impspec;

namespace {

BenchmarkConfig small_synthetic(int trials) {
  BenchmarkConfig c;
  c.experiment = "synthetic";
  c.trials = trials;
  c.n = 30;
  c.seed = 5;
  c.n_boot = 5;
  c.outer_boot = 40;
  c.sampling_draws = 200;
  c.oracle_draws = 5000;
  return c;
}

double metric_of(const TrialRecord& r, const std::string& name) {
  for (const auto& [k, v] : r.metrics)
    if (k == name) return v;
  throw std::out_of_range("metric not recorded: " + name);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config validation") {
  BenchmarkConfig c = small_synthetic(1);
  c.experiment = "mediation";
  CHECK_THROWS_AS(run_benchmark(c), std::invalid_argument);
  c = small_synthetic(0);
  CHECK_THROWS_AS(run_benchmark(c), std::invalid_argument);
  c = small_synthetic(1);
  c.jobs = 0;
  CHECK_THROWS_AS(run_benchmark(c), std::invalid_argument);
}

TEST_CASE("single-trial aggregates echo the row metrics") {
  const BenchmarkResult r = run_benchmark(small_synthetic(1));
  CHECK(r.total_cells == static_cast<int>(r.methods.size()));
  CHECK(r.failed_cells == 0);
  REQUIRE(r.rows.size() == r.methods.size());

  for (const auto& [key, value] : r.aggregates) {
    const auto last = key.rfind('.');
    const std::string suffix = key.substr(last + 1);
    if (suffix == "std") {
      CHECK(value == 0.0);
    } else if (suffix == "mean") {
      const auto mid = key.rfind('.', last - 1);
      const std::string method = key.substr(0, mid);
      const std::string metric = key.substr(mid + 1, last - mid - 1);
      for (const auto& row : r.rows)
        if (row.method == method)
          CHECK(value == doctest::Approx(metric_of(row, metric)).epsilon(1e-12));
    }
  }
}

TEST_CASE("repeated runs are bitwise identical") {
  const BenchmarkResult a = run_benchmark(small_synthetic(2));
  const BenchmarkResult b = run_benchmark(small_synthetic(2));
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].method == b.rows[i].method);
    REQUIRE(a.rows[i].metrics.size() == b.rows[i].metrics.size());
    for (size_t j = 0; j < a.rows[i].metrics.size(); ++j) {
      CHECK(a.rows[i].metrics[j].first == b.rows[i].metrics[j].first);
      CHECK(a.rows[i].metrics[j].second == b.rows[i].metrics[j].second);
    }
  }
  REQUIRE(a.aggregates.size() == b.aggregates.size());
  for (size_t i = 0; i < a.aggregates.size(); ++i) {
    CHECK(a.aggregates[i].first == b.aggregates[i].first);
    CHECK(a.aggregates[i].second == b.aggregates[i].second);
  }
}

TEST_CASE("early trials do not depend on the trial count") {
  const BenchmarkResult two = run_benchmark(small_synthetic(2));
  const BenchmarkResult three = run_benchmark(small_synthetic(3));
  for (const auto& row : two.rows) {
    for (const auto& other : three.rows) {
      if (other.trial == row.trial && other.method == row.method) {
        REQUIRE(other.metrics.size() == row.metrics.size());
        for (size_t j = 0; j < row.metrics.size(); ++j)
          CHECK(other.metrics[j].second == row.metrics[j].second);
      }
    }
  }
}

TEST_CASE("parallel execution leaves the rows unchanged") {
  BenchmarkConfig c = small_synthetic(3);
  const BenchmarkResult serial = run_benchmark(c);
  c.jobs = 2;
  const BenchmarkResult parallel = run_benchmark(c);
  REQUIRE(serial.rows.size() == parallel.rows.size());
  for (size_t i = 0; i < serial.rows.size(); ++i) {
    CHECK(serial.rows[i].trial == parallel.rows[i].trial);
    CHECK(serial.rows[i].method == parallel.rows[i].method);
    REQUIRE(serial.rows[i].metrics.size() == parallel.rows[i].metrics.size());
    for (size_t j = 0; j < serial.rows[i].metrics.size(); ++j)
      CHECK(serial.rows[i].metrics[j].second ==
            parallel.rows[i].metrics[j].second);
  }
  REQUIRE(serial.aggregates.size() == parallel.aggregates.size());
  for (size_t i = 0; i < serial.aggregates.size(); ++i)
    CHECK(serial.aggregates[i].second == parallel.aggregates[i].second);
}

TEST_CASE("mean aggregates are recomputable from the rows") {
  const BenchmarkResult r = run_benchmark(small_synthetic(3));
  std::map<std::string, std::pair<double, int>> sums;
  for (const auto& row : r.rows) {
    if (row.failed) continue;
    for (const auto& [k, v] : row.metrics) {
      auto& s = sums[row.method + "." + k];
      s.first += v;
      s.second += 1;
    }
  }
  int checked = 0;
  for (const auto& [key, value] : r.aggregates) {
    if (key.size() < 5 || key.substr(key.size() - 5) != ".mean") continue;
    const auto it = sums.find(key.substr(0, key.size() - 5));
    if (it == sums.end()) continue;
    CHECK(std::abs(value - it->second.first / it->second.second) < 1e-9);
    ++checked;
  }
  CHECK(checked > 0);
  CHECK(aggregate_value(r, r.aggregates[0].first) == r.aggregates[0].second);
  CHECK_THROWS_AS(aggregate_value(r, "no.such.key"), std::out_of_range);
}

TEST_CASE("config serialization distinguishes every field") {
  const BenchmarkConfig base = small_synthetic(2);
  CHECK(config_hash(base) == config_hash(small_synthetic(2)));

  std::vector<BenchmarkConfig> variants(13, base);
  variants[0].experiment = "ablation";
  variants[1].trials = 3;
  variants[2].n = 31;
  variants[3].seed = 6;
  variants[4].opt_varsigma = true;
  variants[5].refit_boot = true;
  variants[6].n_boot = 6;
  variants[7].outer_boot = 41;
  variants[8].cbo_iters = 11;
  variants[9].refit_every = 4;
  variants[10].grid_points = 201;
  variants[11].sampling_draws = 201;
  variants[12].oracle_draws = 5001;
  for (const auto& v : variants) CHECK(config_hash(v) != config_hash(base));

  // the worker count cannot change results, so it stays out of the hash
  BenchmarkConfig workers = base;
  workers.jobs = 2;
  CHECK(config_hash(workers) == config_hash(base));

  BenchmarkConfig flip = base;
  flip.calibrate_cbo_prior = !flip.calibrate_cbo_prior;
  CHECK(config_hash(flip) != config_hash(base));

  const std::string js = config_json(base);
  CHECK(js.find("\"experiment\"") != std::string::npos);
  CHECK(js.find("synthetic") != std::string::npos);
}

TEST_CASE("outputs land on disk deterministically") {
  const BenchmarkResult r = run_benchmark(small_synthetic(2));
  const std::string d1 = "/tmp/impspec_test_out_a";
  const std::string d2 = "/tmp/impspec_test_out_b";
  std::system(("rm -rf " + d1 + " " + d2).c_str());
  emit_outputs(r, d1);
  emit_outputs(r, d2);

  for (const char* f : {"/trials.csv", "/aggregates.csv", "/manifest.json"}) {
    const std::string a = slurp(d1 + f);
    CHECK(a == slurp(d2 + f));
    CHECK(!a.empty());
  }

  // trials.csv holds one line per recorded metric plus the header
  const std::string trials = slurp(d1 + "/trials.csv");
  const long lines = std::count(trials.begin(), trials.end(), '\n');
  long expected = 1;
  for (const auto& row : r.rows)
    expected += row.failed ? 1 : static_cast<long>(row.metrics.size());
  CHECK(lines == expected);
  CHECK(trials.find("0,impspec,") != std::string::npos);
  CHECK(trials.find("1,impspec,") != std::string::npos);

  const std::string manifest = slurp(d1 + "/manifest.json");
  CHECK(manifest.find("config") != std::string::npos);

  // an empty result writes the manifest alone
  BenchmarkResult empty;
  empty.config = r.config;
  const std::string d3 = "/tmp/impspec_test_out_c";
  std::system(("rm -rf " + d3).c_str());
  emit_outputs(empty, d3);
  CHECK(std::ifstream(d3 + "/manifest.json").good());
  CHECK(!std::ifstream(d3 + "/trials.csv").good());
  std::system(("rm -rf " + d1 + " " + d2 + " " + d3).c_str());
}

TEST_CASE("calibration experiments record coverage profiles") {
  BenchmarkConfig c = small_synthetic(2);
  const BenchmarkResult r = run_benchmark(c);
  CHECK(!r.profiles.empty());
  for (const auto& [method, profile] : r.profiles) {
    CHECK(!method.empty());
    CHECK(profile.alphas.size() == profile.coverage.size());
    for (Eigen::Index i = 0; i < profile.coverage.size(); ++i) {
      CHECK(profile.coverage[i] >= 0.0);
      CHECK(profile.coverage[i] <= 1.0);
    }
  }
  // profile-backed aggregates exist, split into in-sample and extrapolation
  bool found_in = false, found_ood = false;
  for (const auto& [key, value] : r.aggregates) {
    if (key.find(".cal_in.value") != std::string::npos) found_in = true;
    if (key.find(".cal_ood.value") != std::string::npos) found_ood = true;
    if (key.find(".cal_") != std::string::npos &&
        key.size() > 6 && key.substr(key.size() - 6) == ".value") {
      CHECK(value >= 0.0);
      CHECK(value <= 1.0);
    }
  }
  CHECK(found_in);
  CHECK(found_ood);
}

TEST_CASE("cbo experiments aggregate the regret curves") {
  BenchmarkConfig c;
  c.experiment = "healthcare-cbo";
  c.trials = 1;
  c.n = 40;
  c.seed = 3;
  c.cbo_iters = 3;
  c.grid_points = 12;
  c.oracle_draws = 4000;
  c.calibrate_cbo_prior = false;
  c.n_boot = 4;
  const BenchmarkResult r = run_benchmark(c);

  CHECK(r.methods.size() == 4);
  CHECK(r.total_cells == 4);
  CHECK(r.profiles.empty());
  for (const auto& row : r.rows) {
    CHECK(!row.failed);
    CHECK(metric_of(row, "regret") >= 0.0);
  }
  bool found = false;
  for (const auto& [key, value] : r.aggregates)
    if (key.find("regret.mean") != std::string::npos) {
      found = true;
      CHECK(value >= 0.0);
    }
  CHECK(found);
}
