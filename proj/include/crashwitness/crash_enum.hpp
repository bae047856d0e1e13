// Cache/NVM persistence simulation along a trace, enumeration of
// invariant-violating crash states at each fence, crash-image
// materialization, and the exhaustive-baseline counters.
//
// Simulation rules (x86-style, weakest flush semantics):
//   - a store is Pending on its cache line until flushed and fenced;
//   - flush marks the line's currently-pending stores; a store issued after
//     the flush needs a new flush;
//   - a fence promotes every marked store to MustPersisted;
//   - within one line, persistence choices are program-order prefixes of
//     the pending stores; lines are independent.
//
// Crash points are the instants immediately before each fence executes. A
// crash plan is (fence, at most one extra pending store); the closure of a
// plan additionally persists every earlier pending store on the extra
// store's line.

#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "crashwitness/invariants.hpp"

namespace cw {

using BigInt = boost::multiprecision::cpp_int;

inline constexpr std::size_t kNeverPromoted = SIZE_MAX;

struct StoreRecord {
  Tid tid = 0;
  std::size_t event_index = 0;
  std::uint64_t line = 0;
  std::size_t promoted_at = kNeverPromoted;  // fence ordinal
};

struct FencePoint {
  Tid tid = 0;
  std::size_t ordinal = 0;
  std::size_t event_index = 0;
  std::optional<std::size_t> op_index;  // operation containing the fence
};

struct Simulation {
  const Trace* trace = nullptr;
  std::vector<StoreRecord> stores;  // NVM stores, trace order
  std::vector<FencePoint> fences;
  std::unordered_map<Tid, std::size_t> store_index;
  std::vector<OpSpan> ops;

  // Stores executed but not yet promoted at the snapshot before fence k.
  std::vector<std::size_t> pending_at(std::size_t fence_ordinal) const;
  bool is_pending(std::size_t store, std::size_t fence_ordinal) const;
};

Simulation simulate(const Trace& trace);

// MustPersisted set at the snapshot, plus the extra store's same-line
// pending prefix. Sorted store tids.
std::vector<Tid> persisted_closure(const Simulation& sim, std::size_t fence_ordinal,
                                   std::optional<Tid> extra_store);

struct CrashPlan {
  Tid fence_tid = 0;
  std::optional<Tid> extra_store;
  std::vector<std::size_t> violated;  // indexes into InvariantSet::invariants
  std::size_t fence_ordinal = 0;
  std::size_t crashed_op = 0;  // operation containing the fence

  bool operator==(const CrashPlan&) const = default;
};

// Plans whose closure violates at least one invariant, over every fence
// that falls inside an operation. Deterministic order: by fence, base plan
// first, then extra stores by tid. `jobs` > 1 enumerates fences in
// parallel; the result does not depend on it.
std::vector<CrashPlan> enumerate_violating_plans(const Simulation& sim,
                                                 const InvariantSet& invs,
                                                 int jobs = 1);

struct NvmImage {
  std::vector<std::uint8_t> bytes;
  CrashPlan plan;
  std::size_t crashed_op_index = 0;
  std::vector<Tid> persisted;  // closure, sorted
};

NvmImage materialize(const Simulation& sim, const CrashPlan& plan);

// Image sidecar line: PLAN fence=<tid> extra=<tid|-> violated=<inv ids>
std::string plan_meta_line(const CrashPlan& plan);

struct CountPoint {
  std::size_t event_index = 0;
  Tid tid = 0;
  BigInt states;      // states testable at this crash point
  BigInt cumulative;  // running total
};

struct BaselineCounts {
  std::vector<CountPoint> points;
  BigInt total;

  // Cumulative count over points at or before the event index.
  BigInt cumulative_at_event(std::size_t event_index) const;
};

// Exhaustive per-line-prefix state count after every store/flush/fence.
BaselineCounts count_exhaustive_yat(const Trace& trace, int jobs = 1);

// Subset count of the explicitly flushed stores at each fence, ignoring
// cache-line coupling.
BaselineCounts count_exhaustive_pmreorder(const Trace& trace);

}  // namespace cw
