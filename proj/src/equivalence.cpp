#include "crashwitness/equivalence.hpp"

#include <algorithm>

namespace cw {

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::MatchCommitted: return "MATCH_C";
    case Verdict::MatchRolledBack: return "MATCH_R";
    case Verdict::Divergent: return "DIVERGE";
  }
  return "?";
}

RunResult run_subject(Subject& subject, const std::vector<std::uint8_t>* image,
                      std::span<const Operation> ops, bool recovery,
                      std::uint32_t cache_line) {
  RunResult result;
  Pool pool(subject.pool_bytes(cache_line), cache_line);
  if (image != nullptr) {
    pool.load_image(*image);
    if (recovery) {
      try {
        subject.recover(pool);
      } catch (const SubjectFault&) {
        result.outputs.push_back("FAULT");
        result.faulted = true;
        result.trace = pool.take_trace();
        return result;
      }
    }
  } else {
    subject.init(pool);
  }

  for (const Operation& op : ops) {
    pool.op_begin(op.kind);
    std::string out;
    bool faulted = false;
    try {
      out = subject.apply(pool, op);
    } catch (const SubjectFault&) {
      out = "FAULT";
      faulted = true;
    }
    pool.op_end(out);
    result.outputs.push_back(std::move(out));
    if (faulted) {
      result.faulted = true;
      break;
    }
  }
  result.trace = pool.take_trace();
  return result;
}

OracleSet build_oracles(Subject& subject, const TestCase& test,
                        std::size_t crashed_op_index, std::uint32_t cache_line) {
  if (crashed_op_index >= test.ops.size())
    throw ConfigError("crashed operation index out of range");
  OracleSet oracles;
  oracles.crashed_op_index = crashed_op_index;

  // Committed: the crashed operation fully executed.
  RunResult full = run_subject(subject, nullptr, test.ops, false, cache_line);
  for (std::size_t i = crashed_op_index + 1; i < full.outputs.size(); ++i)
    oracles.committed.push_back(full.outputs[i]);

  // Rolled back: the crashed operation never happened.
  std::vector<Operation> without = test.ops;
  without.erase(without.begin() + static_cast<std::ptrdiff_t>(crashed_op_index));
  RunResult rolled = run_subject(subject, nullptr, without, false, cache_line);
  for (std::size_t i = crashed_op_index; i < rolled.outputs.size(); ++i)
    oracles.rolledback.push_back(rolled.outputs[i]);

  return oracles;
}

OracleCache::OracleCache(const SubjectFactory& factory, const TestCase& test,
                         std::uint32_t cache_line)
    : factory_(factory), test_(test), cache_line_(cache_line) {
  auto subject = factory_();
  full_outputs_ = run_subject(*subject, nullptr, test.ops, false, cache_line_).outputs;
  sets_.resize(test.ops.size());
}

const OracleSet& OracleCache::at(std::size_t crashed_op_index) {
  if (crashed_op_index >= sets_.size())
    throw ConfigError("crashed operation index out of range");
  if (!sets_[crashed_op_index]) {
    auto oracles = std::make_unique<OracleSet>();
    oracles->crashed_op_index = crashed_op_index;
    for (std::size_t i = crashed_op_index + 1; i < full_outputs_.size(); ++i)
      oracles->committed.push_back(full_outputs_[i]);
    std::vector<Operation> without = test_.ops;
    without.erase(without.begin() + static_cast<std::ptrdiff_t>(crashed_op_index));
    auto subject = factory_();
    RunResult rolled = run_subject(*subject, nullptr, without, false, cache_line_);
    for (std::size_t i = crashed_op_index; i < rolled.outputs.size(); ++i)
      oracles->rolledback.push_back(rolled.outputs[i]);
    sets_[crashed_op_index] = std::move(oracles);
  }
  return *sets_[crashed_op_index];
}

ValidationResult check(Subject& subject, const TestCase& test, const NvmImage& image,
                       const OracleSet& oracles, std::uint32_t cache_line) {
  if (image.crashed_op_index != oracles.crashed_op_index)
    throw ConfigError("image and oracles disagree on the crashed operation");

  std::span<const Operation> suffix(test.ops);
  suffix = suffix.subspan(image.crashed_op_index + 1);

  RunResult run = run_subject(subject, &image.bytes, suffix, true, cache_line);

  ValidationResult result;
  result.observed = run.outputs;
  if (run.outputs == oracles.committed) {
    result.verdict = Verdict::MatchCommitted;
  } else if (run.outputs == oracles.rolledback) {
    result.verdict = Verdict::MatchRolledBack;
  } else {
    result.verdict = Verdict::Divergent;
  }
  return result;
}

std::vector<ValidationResult> check_plans(const SubjectFactory& factory,
                                          const TestCase& test, const Simulation& sim,
                                          const std::vector<CrashPlan>& plans,
                                          OracleCache& oracles, int jobs) {
  std::vector<ValidationResult> results(plans.size());

  // Oracles are built lazily and shared read-only afterwards; warm every
  // needed index up front so the parallel section only reads.
  for (const CrashPlan& plan : plans) oracles.at(plan.crashed_op);

  auto run_one = [&](std::size_t i) {
    NvmImage image = materialize(sim, plans[i]);
    auto subject = factory();
    results[i] = check(*subject, test, image, oracles.at(plans[i].crashed_op),
                       sim.trace->cache_line);
    results[i].plan_index = i;
  };

#ifdef _OPENMP
  if (jobs > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
    for (long i = 0; i < static_cast<long>(plans.size()); ++i)
      run_one(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < plans.size(); ++i) run_one(i);
  }
#else
  (void)jobs;
  for (std::size_t i = 0; i < plans.size(); ++i) run_one(i);
#endif
  return results;
}

std::string check_log_line(const CrashPlan& plan, const ValidationResult& result) {
  std::string out = "CHECK fence=" + std::to_string(plan.fence_tid) + " extra=";
  out += plan.extra_store ? std::to_string(*plan.extra_store) : "-";
  out += " verdict=";
  out += verdict_name(result.verdict);
  out += " out=[";
  for (std::size_t i = 0; i < result.observed.size(); ++i) {
    if (i > 0) out += ',';
    out += result.observed[i];
  }
  out += ']';
  return out;
}

std::uint64_t oracle_count(unsigned m) {
  if (m > 20) throw ConfigError("oracle count overflows past 20 concurrent operations");
  // sum_{k=0..m} m!/(m-k)!
  std::uint64_t total = 0;
  for (unsigned k = 0; k <= m; ++k) {
    std::uint64_t perms = 1;
    for (unsigned i = 0; i < k; ++i) perms *= (m - i);
    total += perms;
  }
  return total;
}

std::vector<std::vector<unsigned>> enumerate_oracle_decisions(unsigned m) {
  if (m > 8) throw ConfigError("oracle enumeration is unreasonable past 8 operations");
  std::vector<std::vector<unsigned>> out;
  out.push_back({});  // nothing committed
  std::vector<std::vector<unsigned>> frontier = {{}};
  for (unsigned k = 1; k <= m; ++k) {
    std::vector<std::vector<unsigned>> next;
    for (const std::vector<unsigned>& seq : frontier) {
      for (unsigned op = 0; op < m; ++op) {
        if (std::find(seq.begin(), seq.end(), op) != seq.end()) continue;
        std::vector<unsigned> extended = seq;
        extended.push_back(op);
        next.push_back(extended);
      }
    }
    for (const std::vector<unsigned>& seq : next) out.push_back(seq);
    frontier = std::move(next);
  }
  return out;
}

}  // namespace cw
