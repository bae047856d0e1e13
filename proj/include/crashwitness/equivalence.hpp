// Commit/rollback oracle construction and output-equivalence checking:
// re-executes the subject from each crash image and flags outputs that
// match neither the committed nor the rolled-back crash-free execution.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "crashwitness/crash_enum.hpp"

namespace cw {

struct Operation {
  std::string kind;  // insert / update / delete / query
  std::uint64_t key = 0;
  std::uint64_t value = 0;

  bool operator==(const Operation&) const = default;
};

struct TestCase {
  std::vector<Operation> ops;
};

// A subject keeps all persistent state in the pool and produces one
// canonical output string per operation. Implementations live in
// subjects.cpp.
class Subject {
 public:
  virtual ~Subject() = default;
  virtual const std::string& name() const = 0;
  virtual std::vector<std::string> op_kinds() const = 0;
  virtual std::uint64_t pool_bytes(std::uint32_t cache_line) const = 0;
  virtual void init(Pool& pool) = 0;
  virtual void recover(Pool& pool) = 0;
  virtual std::string apply(Pool& pool, const Operation& op) = 0;
};

using SubjectFactory = std::function<std::unique_ptr<Subject>()>;

struct RunResult {
  std::vector<std::string> outputs;
  Trace trace;
  bool faulted = false;
};

// Executes `ops` in a fresh context. Starting from an image runs the
// subject's recovery hook first when `recovery` is set. A subject fault is
// recorded as output "FAULT" for the faulting operation and stops the run;
// the harness itself survives.
RunResult run_subject(Subject& subject, const std::vector<std::uint8_t>* image,
                      std::span<const Operation> ops, bool recovery,
                      std::uint32_t cache_line);

struct OracleSet {
  std::size_t crashed_op_index = 0;
  std::vector<std::string> committed;   // suffix outputs, crashed op kept
  std::vector<std::string> rolledback;  // suffix outputs, crashed op removed
};

OracleSet build_oracles(Subject& subject, const TestCase& test,
                        std::size_t crashed_op_index, std::uint32_t cache_line);

// Oracle construction amortized over many plans: one full run plus one
// rolled-back run per distinct crashed operation.
class OracleCache {
 public:
  OracleCache(const SubjectFactory& factory, const TestCase& test,
              std::uint32_t cache_line);
  const OracleSet& at(std::size_t crashed_op_index);
  const std::vector<std::string>& full_run_outputs() const { return full_outputs_; }

 private:
  const SubjectFactory& factory_;
  const TestCase& test_;
  std::uint32_t cache_line_;
  std::vector<std::string> full_outputs_;
  std::vector<std::unique_ptr<OracleSet>> sets_;
};

enum class Verdict : std::uint8_t { MatchCommitted, MatchRolledBack, Divergent };

const char* verdict_name(Verdict v);  // MATCH_C / MATCH_R / DIVERGE

struct ValidationResult {
  std::size_t plan_index = 0;
  Verdict verdict = Verdict::MatchCommitted;
  std::vector<std::string> observed;
};

// Runs the suffix after the crashed operation from the image, with
// recovery, and compares against both oracles.
ValidationResult check(Subject& subject, const TestCase& test, const NvmImage& image,
                       const OracleSet& oracles, std::uint32_t cache_line);

// Checks one image per plan. Every check runs in its own fresh subject
// instance and execution context, so `jobs` > 1 fans them out safely; the
// result order is the plan order either way.
std::vector<ValidationResult> check_plans(const SubjectFactory& factory,
                                          const TestCase& test, const Simulation& sim,
                                          const std::vector<CrashPlan>& plans,
                                          OracleCache& oracles, int jobs = 1);

// Verdict log line: CHECK fence=<tid> extra=<tid|-> verdict=... out=[...]
std::string check_log_line(const CrashPlan& plan, const ValidationResult& result);

// Number of legal post-crash output sets when m operations ran
// concurrently at the crash: sum over k of m!/(m-k)!. m = 0 yields 1 (the
// empty oracle).
std::uint64_t oracle_count(unsigned m);

// The oracle decisions themselves: every ordered subset of the m
// concurrent operations taken as committed, the rest rolled back.
std::vector<std::vector<unsigned>> enumerate_oracle_decisions(unsigned m);

}  // namespace cw
