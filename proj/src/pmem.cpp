#include "crashwitness/pmem.hpp"

#include <algorithm>
#include <cstring>

namespace cw {

namespace {

void check_sid(const Sid& sid) {
  if (sid.empty()) throw TraceError("empty sid");
  for (char c : sid) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r')
      throw TraceError("sid contains whitespace: '" + sid + "'");
  }
}

void check_token(const std::string& what, const std::string& s) {
  if (s.empty()) throw TraceError("empty " + what);
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r')
      throw TraceError(what + " contains whitespace: '" + s + "'");
  }
}

}  // namespace

TrackedBytes tracked_u64(std::uint64_t value) {
  TrackedBytes t;
  t.bytes.resize(8);
  for (int i = 0; i < 8; ++i) t.bytes[i] = static_cast<std::uint8_t>(value >> (8 * i));
  return t;
}

TrackedBytes tracked_u8(std::uint8_t value) {
  TrackedBytes t;
  t.bytes.push_back(value);
  return t;
}

std::uint64_t as_u64(const TrackedBytes& value) {
  std::uint64_t v = 0;
  std::size_t n = std::min<std::size_t>(value.bytes.size(), 8);
  for (std::size_t i = 0; i < n; ++i)
    v |= static_cast<std::uint64_t>(value.bytes[i]) << (8 * i);
  return v;
}

std::vector<Tid> merge_tids(const std::vector<Tid>& a, const std::vector<Tid>& b) {
  std::vector<Tid> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

TrackedBytes derive(std::vector<std::uint8_t> bytes,
                    std::initializer_list<const TrackedBytes*> sources) {
  TrackedBytes t;
  t.bytes = std::move(bytes);
  for (const TrackedBytes* s : sources) t.provenance = merge_tids(t.provenance, s->provenance);
  return t;
}

TrackedBytes derive_u64(std::uint64_t value,
                        std::initializer_list<const TrackedBytes*> sources) {
  TrackedBytes t = tracked_u64(value);
  for (const TrackedBytes* s : sources) t.provenance = merge_tids(t.provenance, s->provenance);
  return t;
}

BranchScope::BranchScope(BranchScope&& other) noexcept : pool_(other.pool_) {
  other.pool_ = nullptr;
}

BranchScope::~BranchScope() {
  if (pool_ != nullptr) pool_->branch_end();
}

Pool::Pool(std::uint64_t size, std::uint32_t cache_line, std::uint64_t scratch_size)
    : cache_line_(cache_line) {
  if (cache_line == 0) throw ConfigError("cache line size must be positive");
  if (size == 0) throw ConfigError("pool size must be positive");
  if (size % cache_line != 0)
    throw ConfigError("pool size " + std::to_string(size) +
                      " is not a multiple of the cache line size " +
                      std::to_string(cache_line));
  data_.assign(size, 0);
  scratch_.assign(scratch_size, 0);
  trace_.pool_size = size;
  trace_.cache_line = cache_line;
}

std::vector<Tid> Pool::active_ctrl() const {
  if (branch_stack_.empty()) return {};
  return branch_stack_.back();
}

TrackedBytes Pool::do_load(std::vector<std::uint8_t>& mem, Space space,
                           std::uint64_t addr, std::uint64_t len, const Sid& sid) {
  check_sid(sid);
  if (len == 0 || addr + len > mem.size() || addr + len < addr)
    throw SubjectFault("load out of bounds: addr=" + std::to_string(addr) +
                       " len=" + std::to_string(len));
  TraceEvent e;
  e.tid = next_tid();
  e.kind = EventKind::Load;
  e.sid = sid;
  e.addr = addr;
  e.len = len;
  e.space = space;
  e.ctrl_deps = active_ctrl();
  trace_.events.push_back(e);

  TrackedBytes t;
  t.bytes.assign(mem.begin() + addr, mem.begin() + addr + len);
  t.provenance = {e.tid};
  return t;
}

void Pool::do_store(std::vector<std::uint8_t>& mem, Space space, std::uint64_t addr,
                    const TrackedBytes& value, const Sid& sid) {
  check_sid(sid);
  std::uint64_t len = value.bytes.size();
  if (len == 0) throw ConfigError("zero-length store");
  if (addr + len > mem.size() || addr + len < addr)
    throw SubjectFault("store out of bounds: addr=" + std::to_string(addr) +
                       " len=" + std::to_string(len));
  // Spanning a line boundary would make the same-line persistence prefix
  // rule ambiguous; subjects must split such writes.
  if (space == Space::Nvm &&
      line_base(addr, cache_line_) != line_base(addr + len - 1, cache_line_))
    throw ConfigError("store spans cache lines: addr=" + std::to_string(addr) +
                      " len=" + std::to_string(len));

  TraceEvent e;
  e.tid = next_tid();
  e.kind = EventKind::Store;
  e.sid = sid;
  e.addr = addr;
  e.len = len;
  e.space = space;
  e.bytes = value.bytes;
  e.data_deps = value.provenance;
  e.ctrl_deps = active_ctrl();
  trace_.events.push_back(std::move(e));

  std::copy(value.bytes.begin(), value.bytes.end(), mem.begin() + addr);
}

TrackedBytes Pool::load(std::uint64_t addr, std::uint64_t len, const Sid& sid) {
  return do_load(data_, Space::Nvm, addr, len, sid);
}

void Pool::store(std::uint64_t addr, const TrackedBytes& value, const Sid& sid) {
  do_store(data_, Space::Nvm, addr, value, sid);
}

TrackedBytes Pool::scratch_load(std::uint64_t addr, std::uint64_t len, const Sid& sid) {
  return do_load(scratch_, Space::Dram, addr, len, sid);
}

void Pool::scratch_store(std::uint64_t addr, const TrackedBytes& value, const Sid& sid) {
  do_store(scratch_, Space::Dram, addr, value, sid);
}

void Pool::flush(std::uint64_t addr, const Sid& sid) {
  check_sid(sid);
  if (addr >= data_.size())
    throw SubjectFault("flush out of bounds: addr=" + std::to_string(addr));
  TraceEvent e;
  e.tid = next_tid();
  e.kind = EventKind::Flush;
  e.sid = sid;
  e.addr = line_base(addr, cache_line_);
  trace_.events.push_back(std::move(e));
}

void Pool::fence(const Sid& sid) {
  check_sid(sid);
  TraceEvent e;
  e.tid = next_tid();
  e.kind = EventKind::Fence;
  e.sid = sid;
  trace_.events.push_back(std::move(e));
}

BranchScope Pool::branch_guard(const TrackedBytes& cond) {
  TraceEvent e;
  e.tid = next_tid();
  e.kind = EventKind::BranchBegin;
  e.ctrl_deps = merge_tids(cond.provenance, active_ctrl());
  branch_stack_.push_back(e.ctrl_deps);
  trace_.events.push_back(std::move(e));
  return BranchScope(this);
}

void Pool::branch_end() {
  branch_stack_.pop_back();
  TraceEvent e;
  e.tid = next_tid();
  e.kind = EventKind::BranchEnd;
  trace_.events.push_back(std::move(e));
}

void Pool::op_begin(const std::string& label) {
  check_token("operation label", label);
  if (in_op_) throw TraceError("nested operation: " + label);
  in_op_ = true;
  TraceEvent e;
  e.tid = next_tid();
  e.kind = EventKind::OpBegin;
  e.text = label;
  trace_.events.push_back(std::move(e));
}

void Pool::op_end(const std::string& output) {
  check_token("operation output", output);
  if (!in_op_) throw TraceError("op_end without op_begin");
  in_op_ = false;
  TraceEvent e;
  e.tid = next_tid();
  e.kind = EventKind::OpEnd;
  e.text = output;
  trace_.events.push_back(std::move(e));
}

void Pool::load_image(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() != data_.size())
    throw ConfigError("image size " + std::to_string(bytes.size()) +
                      " does not match pool size " + std::to_string(data_.size()));
  data_ = bytes;
}

Trace Pool::take_trace() {
  if (!branch_stack_.empty()) throw TraceError("unbalanced branch scopes at trace end");
  if (in_op_) throw TraceError("unterminated operation at trace end");
  Trace out = std::move(trace_);
  trace_ = Trace{};
  trace_.pool_size = out.pool_size;
  trace_.cache_line = out.cache_line;
  return out;
}

void validate_trace(const Trace& trace) {
  if (trace.pool_size == 0 || trace.cache_line == 0 ||
      trace.pool_size % trace.cache_line != 0)
    throw TraceError("bad pool geometry");

  Tid prev = 0;
  int branch_depth = 0;
  bool in_op = false;
  std::vector<char> is_load;  // indexed by tid, 1-based
  is_load.reserve(trace.events.size() + 1);
  is_load.push_back(0);

  auto check_deps = [&](const std::vector<Tid>& deps, Tid tid) {
    Tid last = 0;
    for (Tid d : deps) {
      if (d <= last && last != 0) throw TraceError("dep set not sorted/unique");
      last = d;
      if (d == 0 || d >= tid || d >= is_load.size() || !is_load[d])
        throw TraceError("dep tid " + std::to_string(d) +
                         " does not refer to an earlier load");
    }
  };

  for (const TraceEvent& e : trace.events) {
    if (e.tid <= prev) throw TraceError("trace ids are not strictly increasing");
    while (is_load.size() < e.tid) is_load.push_back(0);
    prev = e.tid;
    switch (e.kind) {
      case EventKind::Load:
        if (e.len == 0 || e.addr + e.len < e.addr) throw TraceError("bad load range");
        if (e.space == Space::Nvm && e.addr + e.len > trace.pool_size)
          throw TraceError("load outside pool");
        check_deps(e.ctrl_deps, e.tid);
        is_load.push_back(1);
        break;
      case EventKind::Store:
        if (e.len == 0 || e.bytes.size() != e.len) throw TraceError("store bytes/len mismatch");
        if (e.space == Space::Nvm) {
          if (e.addr + e.len > trace.pool_size) throw TraceError("store outside pool");
          if (line_base(e.addr, trace.cache_line) !=
              line_base(e.addr + e.len - 1, trace.cache_line))
            throw TraceError("store spans cache lines");
        }
        check_deps(e.data_deps, e.tid);
        check_deps(e.ctrl_deps, e.tid);
        is_load.push_back(0);
        break;
      case EventKind::Flush:
        if (e.addr % trace.cache_line != 0) throw TraceError("flush target not line-aligned");
        if (e.addr >= trace.pool_size) throw TraceError("flush outside pool");
        is_load.push_back(0);
        break;
      case EventKind::Fence:
        is_load.push_back(0);
        break;
      case EventKind::BranchBegin:
        check_deps(e.ctrl_deps, e.tid);
        ++branch_depth;
        is_load.push_back(0);
        break;
      case EventKind::BranchEnd:
        if (branch_depth == 0) throw TraceError("unbalanced branch end");
        --branch_depth;
        is_load.push_back(0);
        break;
      case EventKind::OpBegin:
        if (in_op) throw TraceError("nested operation");
        if (e.text.empty()) throw TraceError("empty operation label");
        in_op = true;
        is_load.push_back(0);
        break;
      case EventKind::OpEnd:
        if (!in_op) throw TraceError("op end without begin");
        if (e.text.empty()) throw TraceError("empty operation output");
        in_op = false;
        is_load.push_back(0);
        break;
    }
  }
  if (branch_depth != 0) throw TraceError("unbalanced branch scopes");
  if (in_op) throw TraceError("unterminated operation");
}

std::vector<OpSpan> op_spans(const Trace& trace) {
  std::vector<OpSpan> spans;
  std::optional<std::size_t> open;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const TraceEvent& e = trace.events[i];
    if (e.kind == EventKind::OpBegin) {
      if (open) throw TraceError("nested operation");
      open = i;
    } else if (e.kind == EventKind::OpEnd) {
      if (!open) throw TraceError("op end without begin");
      OpSpan s;
      s.begin_index = *open;
      s.end_index = i;
      s.begin_tid = trace.events[*open].tid;
      s.end_tid = e.tid;
      s.label = trace.events[*open].text;
      s.output = e.text;
      spans.push_back(std::move(s));
      open.reset();
    }
  }
  if (open) throw TraceError("unterminated operation");
  return spans;
}

}  // namespace cw
