#include "crashwitness/subjects.hpp"

#include <array>

namespace cw {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t align_up(std::uint64_t x, std::uint64_t a) { return (x + a - 1) / a * a; }

std::string u64_str(const TrackedBytes& v) { return std::to_string(as_u64(v)); }

// ---------------------------------------------------------------------------
// mini-level-hash: kBuckets buckets of kSlots slots. A bucket's slot tokens
// are bytes of one 8-byte word; key and value arrays live on their own
// cache lines so tokens can persist independently of the data they guard.

constexpr unsigned kBuckets = 4;
constexpr unsigned kSlots = 4;

struct LhLayout {
  std::uint64_t tok0, key0, val0, pool;

  explicit LhLayout(std::uint32_t line) {
    tok0 = 0;
    key0 = align_up(tok0 + kBuckets * 8, line);
    val0 = align_up(key0 + std::uint64_t{kBuckets} * kSlots * 8, line);
    pool = align_up(val0 + std::uint64_t{kBuckets} * kSlots * 8, line);
  }

  std::uint64_t tok(unsigned b, unsigned s) const { return tok0 + b * 8 + s; }
  std::uint64_t key(unsigned b, unsigned s) const { return key0 + (b * kSlots + s) * 8; }
  std::uint64_t val(unsigned b, unsigned s) const { return val0 + (b * kSlots + s) * 8; }
};

class MiniLevelHash final : public Subject {
 public:
  explicit MiniLevelHash(bool buggy)
      : buggy_(buggy), name_(buggy ? "mini-level-hash-buggy" : "mini-level-hash-fixed") {}

  const std::string& name() const override { return name_; }
  std::vector<std::string> op_kinds() const override {
    return {"insert", "update", "delete", "query"};
  }
  std::uint64_t pool_bytes(std::uint32_t line) const override {
    return LhLayout(line).pool;
  }
  void init(Pool&) override {}     // zeroed pool: every token empty
  void recover(Pool&) override {}  // log-free design, nothing to replay

  std::string apply(Pool& p, const Operation& op) override {
    if (op.kind == "insert") return insert(p, op.key, op.value);
    if (op.kind == "update") return update(p, op.key, op.value);
    if (op.kind == "delete") return erase(p, op.key);
    if (op.kind == "query") return query(p, op.key);
    throw ConfigError("unknown operation kind: " + op.kind);
  }

 private:
  unsigned bucket(std::uint64_t key) const {
    return static_cast<unsigned>(mix64(key) % kBuckets);
  }

  std::string query(Pool& p, std::uint64_t k) {
    LhLayout lay(p.cache_line());
    unsigned b = bucket(k);
    for (unsigned s = 0; s < kSlots; ++s) {
      TrackedBytes tok = p.load(lay.tok(b, s), 1, "lh.q.tok");
      if (as_u64(tok) != 0) {
        auto guard = p.branch_guard(tok);
        TrackedBytes key = p.load(lay.key(b, s), 8, "lh.q.key");
        if (as_u64(key) == k) {
          auto inner = p.branch_guard(key);
          TrackedBytes val = p.load(lay.val(b, s), 8, "lh.q.val");
          return u64_str(val);
        }
      }
    }
    return "null";
  }

  // Occupied slot holding k, or kSlots. Loads stay guarded by the token.
  unsigned find_slot(Pool& p, std::uint64_t k, const char* tok_sid, const char* key_sid) {
    LhLayout lay(p.cache_line());
    unsigned b = bucket(k);
    for (unsigned s = 0; s < kSlots; ++s) {
      TrackedBytes tok = p.load(lay.tok(b, s), 1, tok_sid);
      if (as_u64(tok) != 0) {
        auto guard = p.branch_guard(tok);
        TrackedBytes key = p.load(lay.key(b, s), 8, key_sid);
        if (as_u64(key) == k) return s;
      }
    }
    return kSlots;
  }

  std::string insert(Pool& p, std::uint64_t k, std::uint64_t v) {
    LhLayout lay(p.cache_line());
    unsigned b = bucket(k);
    if (find_slot(p, k, "lh.i.chk_tok", "lh.i.chk_key") != kSlots) return "dup";
    for (unsigned s = 0; s < kSlots; ++s) {
      TrackedBytes tok = p.load(lay.tok(b, s), 1, "lh.i.probe_tok");
      if (as_u64(tok) == 0) {
        auto guard = p.branch_guard(tok);
        if (buggy_) {
          // Token reaches NVM whenever its line is evicted; nothing orders
          // it after the data it guards.
          p.store(lay.key(b, s), tracked_u64(k), sites::kLhInsertKey);
          p.store(lay.val(b, s), tracked_u64(v), sites::kLhInsertVal);
          p.store(lay.tok(b, s), tracked_u8(1), sites::kLhInsertTok);
          p.flush(lay.key(b, s), "lh.i.flush_key");
          p.flush(lay.val(b, s), "lh.i.flush_val");
          p.fence("lh.i.fence");
        } else {
          p.store(lay.key(b, s), tracked_u64(k), sites::kLhInsertKey);
          p.store(lay.val(b, s), tracked_u64(v), sites::kLhInsertVal);
          p.flush(lay.key(b, s), "lh.i.flush_key");
          p.flush(lay.val(b, s), "lh.i.flush_val");
          p.fence("lh.i.fence");
          p.store(lay.tok(b, s), tracked_u8(1), sites::kLhInsertTok);
          p.flush(lay.tok(b, s), "lh.i.flush_tok");
          p.fence("lh.i.fence_tok");
        }
        return "ok";
      }
    }
    return "full";
  }

  std::string update(Pool& p, std::uint64_t k, std::uint64_t v) {
    LhLayout lay(p.cache_line());
    unsigned b = bucket(k);
    unsigned j = find_slot(p, k, "lh.u.scan_tok", "lh.u.scan_key");
    if (j == kSlots) return "notfound";

    unsigned n = kSlots;
    for (unsigned s = 0; s < kSlots && n == kSlots; ++s) {
      TrackedBytes tok = p.load(lay.tok(b, s), 1, "lh.u.probe_tok");
      if (as_u64(tok) == 0) n = s;
    }
    if (n == kSlots) {
      // Bucket full: 8-byte in-place value overwrite.
      p.store(lay.val(b, j), tracked_u64(v), "lh.u.val_inplace");
      p.flush(lay.val(b, j), "lh.u.flush_inplace");
      p.fence("lh.u.fence_inplace");
      return "ok";
    }

    p.store(lay.key(b, n), tracked_u64(k), "lh.u.key");
    p.store(lay.val(b, n), tracked_u64(v), "lh.u.val");
    p.flush(lay.key(b, n), "lh.u.flush_key");
    p.flush(lay.val(b, n), "lh.u.flush_val");
    p.fence("lh.u.fence_data");

    if (buggy_) {
      // Two independent token flips; a crash between the fences loses the
      // key for good.
      p.store(lay.tok(b, j), tracked_u8(0), sites::kLhUpdateTokOld);
      p.flush(lay.tok(b, j), "lh.u.flush_tok_old");
      p.fence("lh.u.fence_tok_old");
      p.store(lay.tok(b, n), tracked_u8(1), sites::kLhUpdateTokNew);
      p.flush(lay.tok(b, n), "lh.u.flush_tok_new");
      p.fence("lh.u.fence_tok_new");
    } else {
      // Both tokens live in one bucket word: flip them with a single store.
      TrackedBytes word = p.load(lay.tok(b, 0), 8, "lh.u.tokword");
      std::vector<std::uint8_t> bytes = word.bytes;
      bytes[j] = 0;
      bytes[n] = 1;
      p.store(lay.tok(b, 0), derive(std::move(bytes), {&word}), "lh.u.tok_merged");
      p.flush(lay.tok(b, 0), "lh.u.flush_tok");
      p.fence("lh.u.fence_tok");
    }
    return "ok";
  }

  std::string erase(Pool& p, std::uint64_t k) {
    LhLayout lay(p.cache_line());
    unsigned b = bucket(k);
    unsigned j = find_slot(p, k, "lh.d.scan_tok", "lh.d.scan_key");
    if (j == kSlots) return "notfound";
    p.store(lay.tok(b, j), tracked_u8(0), "lh.d.tok");
    p.flush(lay.tok(b, j), "lh.d.flush");
    p.fence("lh.d.fence");
    return "ok";
  }

  bool buggy_;
  std::string name_;
};

// ---------------------------------------------------------------------------
// kv-log: append-only record log guarded by a persisted count. Appends
// persist the record before bumping the count; deletes append tombstones
// (value 0). Correct by construction.

constexpr std::uint64_t kLogCapacity = 256;

struct LogLayout {
  std::uint64_t entries0, pool;

  explicit LogLayout(std::uint32_t line) {
    entries0 = align_up(8, line);
    pool = align_up(entries0 + kLogCapacity * 16, line);
  }

  std::uint64_t key(std::uint64_t i) const { return entries0 + i * 16; }
  std::uint64_t val(std::uint64_t i) const { return entries0 + i * 16 + 8; }
};

class KvLog final : public Subject {
 public:
  const std::string& name() const override { return name_; }
  std::vector<std::string> op_kinds() const override {
    return {"insert", "update", "delete", "query"};
  }
  std::uint64_t pool_bytes(std::uint32_t line) const override {
    return LogLayout(line).pool;
  }
  void init(Pool&) override {}
  void recover(Pool&) override {}

  std::string apply(Pool& p, const Operation& op) override {
    if (op.kind == "insert") {
      std::uint64_t live = find(p, op.key);
      if (live != 0) return "dup";
      return append(p, op.key, op.value);
    }
    if (op.kind == "update") {
      std::uint64_t live = find(p, op.key);
      if (live == 0) return "notfound";
      return append(p, op.key, op.value);
    }
    if (op.kind == "delete") {
      std::uint64_t live = find(p, op.key);
      if (live == 0) return "notfound";
      return append(p, op.key, 0);
    }
    if (op.kind == "query") {
      std::uint64_t live = find(p, op.key);
      return live == 0 ? "null" : std::to_string(live);
    }
    throw ConfigError("unknown operation kind: " + op.kind);
  }

 private:
  // Latest value recorded for k; 0 when absent or tombstoned. The scan is
  // guarded by the count read, and the hit is staged through scratch.
  std::uint64_t find(Pool& p, std::uint64_t k) {
    LogLayout lay(p.cache_line());
    TrackedBytes count = p.load(0, 8, "log.count");
    std::uint64_t n = as_u64(count);
    auto guard = p.branch_guard(count);
    for (std::uint64_t i = n; i-- > 0;) {
      TrackedBytes key = p.load(lay.key(i), 8, "log.scan_key");
      if (as_u64(key) == k) {
        auto inner = p.branch_guard(key);
        TrackedBytes val = p.load(lay.val(i), 8, "log.scan_val");
        p.scratch_store(0, val, "log.buf_w");
        TrackedBytes staged = p.scratch_load(0, 8, "log.buf_r");
        return as_u64(staged);
      }
    }
    return 0;
  }

  std::string append(Pool& p, std::uint64_t k, std::uint64_t v) {
    LogLayout lay(p.cache_line());
    TrackedBytes count = p.load(0, 8, "log.count_rd");
    std::uint64_t n = as_u64(count);
    if (n >= kLogCapacity) return "full";
    p.store(lay.key(n), tracked_u64(k), "log.key");
    p.store(lay.val(n), tracked_u64(v), "log.val");
    p.flush(lay.key(n), "log.flush_key");
    p.flush(lay.val(n), "log.flush_val");
    p.fence("log.fence_data");
    // Count bump staged through a scratch cell, the way a local would be.
    p.scratch_store(8, derive_u64(n + 1, {&count}), "log.cbuf_w");
    TrackedBytes bumped = p.scratch_load(8, 8, "log.cbuf_r");
    p.store(0, bumped, sites::kLogCountWrite);
    p.flush(0, "log.flush_count");
    p.fence("log.fence_count");
    return "ok";
  }

  std::string name_ = "kv-log";
};

// ---------------------------------------------------------------------------
// benign-rewrite: a persisted counter whose write path also re-clears an
// already-zero metadata word, derived from the fresh counter value, without
// flushing it. The rewrite violates an ordering invariant but every crash
// state is byte-identical to a legal one.

struct BenignLayout {
  std::uint64_t count0, pool;

  explicit BenignLayout(std::uint32_t line) {
    count0 = align_up(8, line);
    pool = align_up(count0 + 8, line);
  }
};

class BenignRewrite final : public Subject {
 public:
  const std::string& name() const override { return name_; }
  std::vector<std::string> op_kinds() const override {
    return {"insert", "update", "delete", "query"};
  }
  std::uint64_t pool_bytes(std::uint32_t line) const override {
    return BenignLayout(line).pool;
  }
  void init(Pool&) override {}
  void recover(Pool&) override {}

  std::string apply(Pool& p, const Operation& op) override {
    BenignLayout lay(p.cache_line());
    if (op.kind == "query") {
      TrackedBytes count = p.load(lay.count0, 8, "bn.read");
      return u64_str(count);
    }
    TrackedBytes count = p.load(lay.count0, 8, "bn.count_rd");
    std::uint64_t n = as_u64(count) + 1;
    p.store(lay.count0, derive_u64(n, {&count}), sites::kBenignCountWrite);
    TrackedBytes fresh = p.load(lay.count0, 8, "bn.recheck");
    p.store(0, derive_u64(as_u64(fresh) * 0, {&fresh}), sites::kBenignMetaClear);
    p.flush(lay.count0, "bn.flush_count");
    p.fence("bn.fence");
    return std::to_string(n);
  }

 private:
  std::string name_ = "benign-rewrite";
};

}  // namespace

std::vector<std::string> subject_names() {
  return {"mini-level-hash-buggy", "mini-level-hash-fixed", "kv-log", "benign-rewrite"};
}

std::unique_ptr<Subject> make_subject(const std::string& name) {
  if (name == "mini-level-hash-buggy") return std::make_unique<MiniLevelHash>(true);
  if (name == "mini-level-hash-fixed") return std::make_unique<MiniLevelHash>(false);
  if (name == "kv-log") return std::make_unique<KvLog>();
  if (name == "benign-rewrite") return std::make_unique<BenignRewrite>();
  throw UsageError("unknown subject: " + name);
}

SubjectFactory subject_factory(const std::string& name) {
  make_subject(name);  // fail fast on unknown names
  return [name]() { return make_subject(name); };
}

}  // namespace cw
