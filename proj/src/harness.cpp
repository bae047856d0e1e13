#include "crashwitness/harness.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include "crashwitness/trace_io.hpp"

namespace cw {

namespace {

std::uint64_t draw(std::mt19937_64& rng, std::uint64_t bound) {
  return rng() % bound;
}

}  // namespace

TestCase generate(const GenConfig& config) {
  if (config.reuse_bias < 0.0 || config.reuse_bias > 1.0)
    throw ConfigError("reuse_bias must be in [0,1]");
  if (config.key_space == 0 || config.value_space == 0)
    throw ConfigError("key/value space must be non-empty");
  std::uint64_t total_weight = 0;
  for (const OpWeight& w : config.mix) total_weight += w.weight;
  if (total_weight == 0) throw ConfigError("operation mix has zero weight");

  std::mt19937_64 rng(config.seed);
  // reuse decision: compare a 53-bit draw against the bias
  auto coin = [&](double p) {
    return (rng() >> 11) < p * 9007199254740992.0;  // 2^53
  };

  TestCase test;
  std::vector<std::uint64_t> used;  // distinct keys seen so far, in order

  for (std::size_t i = 0; i < config.num_ops; ++i) {
    std::uint64_t pick = draw(rng, total_weight);
    std::string kind;
    for (const OpWeight& w : config.mix) {
      if (pick < w.weight) {
        kind = w.kind;
        break;
      }
      pick -= w.weight;
    }

    Operation op;
    op.kind = kind;
    bool dependent = kind == "query" || kind == "delete" || kind == "update";
    if (dependent && !used.empty() && coin(config.reuse_bias)) {
      op.key = used[draw(rng, used.size())];
    } else {
      op.key = 1 + draw(rng, config.key_space);
    }
    op.value = 1 + draw(rng, config.value_space);
    if (std::find(used.begin(), used.end(), op.key) == used.end())
      used.push_back(op.key);
    test.ops.push_back(std::move(op));
  }
  return test;
}

PipelineResult run_pipeline(const std::string& subject_name, const TestCase& test,
                            const PipelineConfig& config) {
  SubjectFactory factory = subject_factory(subject_name);
  PipelineResult result;
  result.subject = subject_name;
  result.test = test;

  {
    auto subject = factory();
    result.trace =
        run_subject(*subject, nullptr, test.ops, false, config.cache_line).trace;
  }

  Ppdg ppdg = build_ppdg(result.trace);
  result.invariants = infer_invariants(ppdg, result.trace);

  result.sim = simulate(result.trace);
  result.plans = enumerate_violating_plans(result.sim, result.invariants, config.jobs);

  OracleCache oracles(factory, test, config.cache_line);
  result.verdicts =
      check_plans(factory, test, result.sim, result.plans, oracles, config.jobs);

  // A divergence is only reported if a fresh re-execution reproduces it.
  for (std::size_t i = 0; i < result.verdicts.size(); ++i) {
    ValidationResult& v = result.verdicts[i];
    if (v.verdict != Verdict::Divergent) continue;
    NvmImage image = materialize(result.sim, result.plans[i]);
    auto subject = factory();
    ValidationResult again = check(*subject, test, image,
                                   oracles.at(image.crashed_op_index), config.cache_line);
    if (again.verdict != Verdict::Divergent || again.observed != v.observed) {
      again.plan_index = i;  // unstable outcome: trust the re-run
      v = again;
    }
  }

  result.reports = collect_reports(result.sim, result.plans, result.verdicts, oracles);
  result.clusters = cluster(result.reports);

  if (config.baselines) {
    result.yat = count_exhaustive_yat(result.trace, config.jobs);
    result.pmreorder = count_exhaustive_pmreorder(result.trace);
  }

  RuleCounts rules = invariant_stats(result.invariants);
  result.stats.events = result.trace.events.size();
  result.stats.fences = result.sim.fences.size();
  result.stats.invariants_ordering = rules.ordering();
  result.stats.invariants_atomicity = rules.ra1;
  result.stats.skipped_matches =
      result.invariants.skipped_unbound + result.invariants.skipped_self;
  result.stats.images = result.plans.size();
  result.stats.divergent = result.reports.size();
  result.stats.clusters = result.clusters.size();

  if (config.out_dir) write_artifacts(result, *config.out_dir);
  return result;
}

std::string stats_csv(const Stats& stats) {
  std::string out = "invariants_ordering,invariants_atomicity,images,divergent,clusters\n";
  out += std::to_string(stats.invariants_ordering) + "," +
         std::to_string(stats.invariants_atomicity) + "," +
         std::to_string(stats.images) + "," + std::to_string(stats.divergent) + "," +
         std::to_string(stats.clusters) + "\n";
  return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
}

}  // namespace

void write_artifacts(const PipelineResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "trace.txt", serialize_trace(result.trace));
  write_file(dir / "invariants.txt", format_invariants(result.invariants));
  write_file(dir / "report.txt",
             render_text(result.clusters, result.reports, result.invariants));
  write_file(dir / "report.json",
             render_json(result.clusters, result.reports, result.invariants));
  write_file(dir / "stats.csv", stats_csv(result.stats));

  std::filesystem::path images = dir / "images";
  std::filesystem::create_directories(images);
  for (std::size_t i = 0; i < result.plans.size(); ++i) {
    NvmImage image = materialize(result.sim, result.plans[i]);
    std::string stem = "img_" + std::to_string(i);
    std::ofstream img(images / (stem + ".img"), std::ios::binary);
    if (!img) throw ConfigError("cannot write image " + stem);
    img.write(reinterpret_cast<const char*>(image.bytes.data()),
              static_cast<std::streamsize>(image.bytes.size()));
    write_file(images / (stem + ".meta"), plan_meta_line(result.plans[i]) + "\n");
  }
}

}  // namespace cw
