// Straightforward serial reference implementations and brute-force
// oracles. Everything here recomputes results from first principles,
// independently of the optimized paths in crash_enum/ppdg/equivalence, and
// exists so tests and the stage benchmark can compare against them. Not
// linked into the CLI.

#pragma once

#include <set>

#include "crashwitness/report.hpp"

namespace cw::ref {

// Persistence state at one crash point, rebuilt by naive prefix replay.
struct NaiveState {
  std::set<Tid> must;
  // Per line, pending store tids in program order.
  std::vector<std::pair<std::uint64_t, std::vector<Tid>>> pending;
};

NaiveState replay_until(const Trace& trace, std::size_t event_index);

// Every persisted set reachable at the snapshot before the given fence:
// MustPersisted plus an independent program-order prefix per line.
std::vector<std::vector<Tid>> legal_persisted_sets(const Trace& trace,
                                                   std::size_t fence_ordinal);

bool is_legal_persisted_set(const Trace& trace, std::size_t fence_ordinal,
                            const std::vector<Tid>& persisted);

// Serial reference for the plan enumeration kernel.
std::vector<CrashPlan> enumerate_violating_plans_serial(const Trace& trace,
                                                        const InvariantSet& invs);

// Serial reference for the image checking kernel; builds oracles from
// scratch for every plan.
std::vector<ValidationResult> check_plans_serial(const SubjectFactory& factory,
                                                 const TestCase& test,
                                                 const Simulation& sim,
                                                 const std::vector<CrashPlan>& plans,
                                                 std::uint32_t cache_line);

// Recomputes the exhaustive state count per crash point by replaying the
// prefix from scratch each time.
BaselineCounts count_exhaustive_yat_naive(const Trace& trace);

// Path-walking dependence graph reconstruction: transitive reachability
// over the raw dep sets with the same collapsing rule as build_ppdg.
Ppdg build_ppdg_bruteforce(const Trace& trace);

}  // namespace cw::ref
