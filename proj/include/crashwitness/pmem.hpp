// Simulated persistent-memory pool and the instrumentation API subjects
// call. Every access is recorded into an in-memory trace together with
// dynamic data/control provenance.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cw {

using Tid = std::uint64_t;   // trace id, strictly increasing, starts at 1
using Sid = std::string;     // static site id supplied by the subject

// Configuration and trace-shape problems abort the pipeline.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Subject faults (out-of-bounds access and friends) are data, not errors:
// the harness records "FAULT" as the operation output and keeps going.
struct SubjectFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Space : std::uint8_t { Nvm, Dram };

enum class EventKind : std::uint8_t {
  Load,
  Store,
  Flush,
  Fence,
  BranchBegin,
  BranchEnd,
  OpBegin,
  OpEnd,
};

struct TraceEvent {
  Tid tid = 0;
  EventKind kind = EventKind::Load;
  Sid sid;                          // Load/Store/Flush/Fence only
  std::uint64_t addr = 0;           // Load/Store/Flush
  std::uint64_t len = 0;            // Load/Store
  Space space = Space::Nvm;         // Load/Store
  std::vector<std::uint8_t> bytes;  // Store: exact bytes written
  std::vector<Tid> data_deps;       // Store: loads the value was derived from
  std::vector<Tid> ctrl_deps;       // Load/Store/BranchBegin: guarding loads
  std::string text;                 // OpBegin label / OpEnd output

  bool operator==(const TraceEvent&) const = default;
};

struct OpSpan {
  std::size_t begin_index = 0;  // OpBegin event index
  std::size_t end_index = 0;    // OpEnd event index
  Tid begin_tid = 0;
  Tid end_tid = 0;
  std::string label;
  std::string output;
};

struct Trace {
  std::vector<TraceEvent> events;
  std::uint64_t pool_size = 0;
  std::uint32_t cache_line = 64;

  bool operator==(const Trace&) const = default;
};

// Checks tid monotonicity, balanced branch/op scopes, dep references,
// flush alignment and store/byte consistency. Throws TraceError.
void validate_trace(const Trace& trace);

// Operation spans in trace order. Requires balanced OpBegin/OpEnd.
std::vector<OpSpan> op_spans(const Trace& trace);

inline std::uint64_t line_base(std::uint64_t addr, std::uint32_t cache_line) {
  return addr / cache_line * cache_line;
}

// A value together with the loads it was derived from. Constants and
// external test inputs carry empty provenance; combining values unions it.
struct TrackedBytes {
  std::vector<std::uint8_t> bytes;
  std::vector<Tid> provenance;  // sorted, unique
};

TrackedBytes tracked_u64(std::uint64_t value);
TrackedBytes tracked_u8(std::uint8_t value);
std::uint64_t as_u64(const TrackedBytes& value);

// New value whose provenance is the union of the sources' provenance.
TrackedBytes derive(std::vector<std::uint8_t> bytes,
                    std::initializer_list<const TrackedBytes*> sources);
TrackedBytes derive_u64(std::uint64_t value,
                        std::initializer_list<const TrackedBytes*> sources);

std::vector<Tid> merge_tids(const std::vector<Tid>& a, const std::vector<Tid>& b);

class Pool;

// RAII handle for a branch scope; emits BranchEnd when it goes out of scope.
class BranchScope {
 public:
  BranchScope(BranchScope&& other) noexcept;
  BranchScope& operator=(BranchScope&&) = delete;
  BranchScope(const BranchScope&) = delete;
  BranchScope& operator=(const BranchScope&) = delete;
  ~BranchScope();

 private:
  friend class Pool;
  explicit BranchScope(Pool* pool) : pool_(pool) {}
  Pool* pool_;
};

// One execution context: a zero-initialized persistent pool, a volatile
// scratch region, and the trace being recorded. Single-threaded by design;
// one pool per test execution.
class Pool {
 public:
  explicit Pool(std::uint64_t size, std::uint32_t cache_line = 64,
                std::uint64_t scratch_size = 4096);

  // Volatile view: latest stores are visible regardless of flush/fence
  // history. Out-of-bounds access throws SubjectFault.
  TrackedBytes load(std::uint64_t addr, std::uint64_t len, const Sid& sid);
  void store(std::uint64_t addr, const TrackedBytes& value, const Sid& sid);

  // DRAM scratch region: traced, but never part of crash images.
  TrackedBytes scratch_load(std::uint64_t addr, std::uint64_t len, const Sid& sid);
  void scratch_store(std::uint64_t addr, const TrackedBytes& value, const Sid& sid);

  void flush(std::uint64_t addr, const Sid& sid);  // records the line base
  void fence(const Sid& sid);

  // Opens a branch scope guarded by `cond`; events until the scope closes
  // inherit cond's provenance plus all enclosing scopes'.
  [[nodiscard]] BranchScope branch_guard(const TrackedBytes& cond);

  void op_begin(const std::string& label);
  void op_end(const std::string& output);

  // Replaces pool contents with a crash image (size must match).
  void load_image(const std::vector<std::uint8_t>& bytes);

  const std::vector<std::uint8_t>& bytes() const { return data_; }
  std::uint64_t size() const { return data_.size(); }
  std::uint32_t cache_line() const { return cache_line_; }

  const Trace& trace() const { return trace_; }
  // Moves the trace out; scopes and operations must be closed.
  Trace take_trace();

 private:
  friend class BranchScope;

  Tid next_tid() { return tid_counter_++; }
  void branch_end();
  std::vector<Tid> active_ctrl() const;
  TrackedBytes do_load(std::vector<std::uint8_t>& mem, Space space,
                       std::uint64_t addr, std::uint64_t len, const Sid& sid);
  void do_store(std::vector<std::uint8_t>& mem, Space space, std::uint64_t addr,
                const TrackedBytes& value, const Sid& sid);

  std::vector<std::uint8_t> data_;
  std::vector<std::uint8_t> scratch_;
  std::uint32_t cache_line_;
  Tid tid_counter_ = 1;
  Trace trace_;
  std::vector<std::vector<Tid>> branch_stack_;  // cumulative ctrl provenance
  bool in_op_ = false;
};

}  // namespace cw
