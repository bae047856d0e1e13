// Random test-case generation and the end-to-end pipeline:
// trace -> dependence graph -> invariants -> crash plans -> images ->
// output-equivalence checks -> clustered report.

#pragma once

#include <filesystem>
#include <optional>

#include "crashwitness/report.hpp"
#include "crashwitness/subjects.hpp"

namespace cw {

struct OpWeight {
  std::string kind;
  std::uint32_t weight = 0;
};

// Deterministic: one config, one test case. The engine is mt19937_64
// seeded with `seed`; bounded draws take the engine output modulo the
// bound, which is portable across platforms (std::uniform_int_distribution
// is not).
struct GenConfig {
  std::size_t num_ops = 200;
  std::uint64_t seed = 1;
  std::uint64_t key_space = 32;    // keys drawn from [1, key_space]
  std::uint64_t value_space = 1000000;  // values drawn from [1, value_space]
  double reuse_bias = 0.7;  // chance a dependent op picks a key used before
  std::vector<OpWeight> mix = {
      {"insert", 40}, {"update", 20}, {"delete", 15}, {"query", 25}};
};

TestCase generate(const GenConfig& config);

struct PipelineConfig {
  std::uint32_t cache_line = 64;
  int jobs = 1;
  bool baselines = false;
  std::optional<std::filesystem::path> out_dir;
};

struct Stats {
  std::uint64_t events = 0;
  std::uint64_t fences = 0;
  std::uint64_t invariants_ordering = 0;
  std::uint64_t invariants_atomicity = 0;
  std::uint64_t skipped_matches = 0;
  std::uint64_t images = 0;
  std::uint64_t divergent = 0;
  std::uint64_t clusters = 0;
};

struct PipelineResult {
  std::string subject;
  TestCase test;
  Trace trace;
  Simulation sim;
  InvariantSet invariants;
  std::vector<CrashPlan> plans;
  std::vector<ValidationResult> verdicts;
  std::vector<BugReport> reports;
  std::vector<Cluster> clusters;
  Stats stats;
  std::optional<BaselineCounts> yat;
  std::optional<BaselineCounts> pmreorder;
};

// Runs every stage. Divergent verdicts are re-validated on a fresh
// execution before they are reported. Writes artifacts when
// config.out_dir is set: trace.txt, invariants.txt, images/*.img|.meta,
// report.txt, report.json, stats.csv.
PipelineResult run_pipeline(const std::string& subject_name, const TestCase& test,
                            const PipelineConfig& config);

void write_artifacts(const PipelineResult& result, const std::filesystem::path& dir);

std::string stats_csv(const Stats& stats);

}  // namespace cw
