#include "crashwitness/crash_enum.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace cw {

std::vector<std::size_t> Simulation::pending_at(std::size_t fence_ordinal) const {
  std::vector<std::size_t> out;
  Tid fence_tid = fences[fence_ordinal].tid;
  for (std::size_t i = 0; i < stores.size(); ++i) {
    if (stores[i].tid >= fence_tid) break;  // stores are in tid order
    if (stores[i].promoted_at >= fence_ordinal) out.push_back(i);
  }
  return out;
}

bool Simulation::is_pending(std::size_t store, std::size_t fence_ordinal) const {
  return stores[store].tid < fences[fence_ordinal].tid &&
         stores[store].promoted_at >= fence_ordinal;
}

Simulation simulate(const Trace& trace) {
  validate_trace(trace);
  Simulation sim;
  sim.trace = &trace;
  sim.ops = op_spans(trace);

  std::vector<char> flush_marked;             // parallel to sim.stores
  std::vector<std::size_t> flush_queue;       // marked, not yet fenced
  std::map<std::uint64_t, std::vector<std::size_t>> line_pending;
  std::optional<std::size_t> current_op;
  std::size_t next_op = 0;

  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const TraceEvent& e = trace.events[i];
    if (next_op < sim.ops.size() && sim.ops[next_op].begin_index == i)
      current_op = next_op;
    if (current_op && sim.ops[*current_op].end_index == i) {
      current_op.reset();
      ++next_op;
    }

    switch (e.kind) {
      case EventKind::Store:
        if (e.space == Space::Nvm) {
          StoreRecord r;
          r.tid = e.tid;
          r.event_index = i;
          r.line = line_base(e.addr, trace.cache_line);
          sim.store_index[e.tid] = sim.stores.size();
          line_pending[r.line].push_back(sim.stores.size());
          sim.stores.push_back(r);
          flush_marked.push_back(0);
        }
        break;
      case EventKind::Flush: {
        auto it = line_pending.find(e.addr);
        if (it != line_pending.end()) {
          for (std::size_t s : it->second) {
            if (!flush_marked[s]) {
              flush_marked[s] = 1;
              flush_queue.push_back(s);
            }
          }
        }
        break;
      }
      case EventKind::Fence: {
        FencePoint f;
        f.tid = e.tid;
        f.ordinal = sim.fences.size();
        f.event_index = i;
        f.op_index = current_op;
        sim.fences.push_back(f);
        for (std::size_t s : flush_queue) {
          sim.stores[s].promoted_at = f.ordinal;
          auto& pend = line_pending[sim.stores[s].line];
          pend.erase(std::remove(pend.begin(), pend.end(), s), pend.end());
        }
        flush_queue.clear();
        break;
      }
      default:
        break;
    }
  }
  return sim;
}

std::vector<Tid> persisted_closure(const Simulation& sim, std::size_t fence_ordinal,
                                   std::optional<Tid> extra_store) {
  std::vector<Tid> out;
  for (const StoreRecord& s : sim.stores)
    if (s.promoted_at < fence_ordinal) out.push_back(s.tid);

  if (extra_store) {
    auto it = sim.store_index.find(*extra_store);
    if (it == sim.store_index.end())
      throw ConfigError("extra store tid " + std::to_string(*extra_store) +
                        " is not an NVM store");
    const StoreRecord& extra = sim.stores[it->second];
    if (!sim.is_pending(it->second, fence_ordinal))
      throw ConfigError("extra store tid " + std::to_string(*extra_store) +
                        " is not pending at the crash point");
    for (std::size_t i = 0; i <= it->second; ++i) {
      const StoreRecord& s = sim.stores[i];
      if (s.line == extra.line && sim.is_pending(i, fence_ordinal))
        out.push_back(s.tid);
    }
    std::sort(out.begin(), out.end());
  }
  return out;
}

namespace {

struct OrderingCheck {
  Tid first = 0;
  Tid second = 0;
  std::size_t invariant = 0;
};

struct AtomicityCheck {
  Tid a = 0;
  Tid b = 0;
  std::size_t op_index = 0;
  std::size_t invariant = 0;
};

// Membership test for Must(k) plus a small extra-prefix delta.
struct ClosureView {
  const Simulation& sim;
  std::size_t k;
  const std::vector<Tid>& delta;  // sorted pending tids added by the plan

  bool contains(Tid store_tid) const {
    auto it = sim.store_index.find(store_tid);
    if (it == sim.store_index.end()) return false;
    if (sim.stores[it->second].promoted_at < k) return true;
    return std::binary_search(delta.begin(), delta.end(), store_tid);
  }
};

std::vector<std::size_t> violations_at(const ClosureView& closure, Tid fence_tid,
                                       std::size_t op_index,
                                       const std::vector<OrderingCheck>& ord,
                                       const std::vector<AtomicityCheck>& atom) {
  std::vector<std::size_t> violated;
  for (const OrderingCheck& c : ord) {
    // second's instance persisted while first's matching instance is
    // executed but lost.
    if (closure.contains(c.second) && c.first < fence_tid && !closure.contains(c.first))
      violated.push_back(c.invariant);
  }
  for (const AtomicityCheck& c : atom) {
    if (c.op_index != op_index) continue;  // pair scope: the crashed operation
    bool a_in = closure.contains(c.a);
    bool b_in = closure.contains(c.b);
    if (a_in != b_in) violated.push_back(c.invariant);
  }
  std::sort(violated.begin(), violated.end());
  violated.erase(std::unique(violated.begin(), violated.end()), violated.end());
  return violated;
}

}  // namespace

std::vector<CrashPlan> enumerate_violating_plans(const Simulation& sim,
                                                 const InvariantSet& invs,
                                                 int jobs) {
  std::vector<OrderingCheck> ord;
  std::vector<AtomicityCheck> atom;
  for (std::size_t i = 0; i < invs.invariants.size(); ++i) {
    const Invariant& inv = invs.invariants[i];
    for (const OrderingWitness& w : inv.ordering_witnesses)
      ord.push_back({w.first_store, w.second_store, i});
    for (const AtomicityWitness& w : inv.atomicity_witnesses)
      atom.push_back({w.store_a, w.store_b, w.op_index, i});
  }

  std::vector<std::vector<CrashPlan>> per_fence(sim.fences.size());

  auto enumerate_fence = [&](std::size_t k) {
    const FencePoint& fence = sim.fences[k];
    if (!fence.op_index) return;  // no operation to rebuild oracles around

    std::vector<std::size_t> pending = sim.pending_at(k);
    std::set<std::vector<Tid>> seen_deltas;

    auto consider = [&](std::optional<Tid> extra, std::vector<Tid> delta) {
      if (!seen_deltas.insert(delta).second) return;  // duplicate persisted set
      ClosureView view{sim, k, delta};
      std::vector<std::size_t> violated =
          violations_at(view, fence.tid, *fence.op_index, ord, atom);
      if (violated.empty()) return;
      CrashPlan plan;
      plan.fence_tid = fence.tid;
      plan.extra_store = extra;
      plan.violated = std::move(violated);
      plan.fence_ordinal = k;
      plan.crashed_op = *fence.op_index;
      per_fence[k].push_back(std::move(plan));
    };

    consider(std::nullopt, {});
    for (std::size_t s : pending) {
      const StoreRecord& extra = sim.stores[s];
      std::vector<Tid> delta;
      for (std::size_t i = 0; i <= s; ++i)
        if (sim.stores[i].line == extra.line && sim.is_pending(i, k))
          delta.push_back(sim.stores[i].tid);
      consider(extra.tid, std::move(delta));
    }
  };

#ifdef _OPENMP
  if (jobs > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
    for (long k = 0; k < static_cast<long>(sim.fences.size()); ++k)
      enumerate_fence(static_cast<std::size_t>(k));
  } else {
    for (std::size_t k = 0; k < sim.fences.size(); ++k) enumerate_fence(k);
  }
#else
  (void)jobs;
  for (std::size_t k = 0; k < sim.fences.size(); ++k) enumerate_fence(k);
#endif

  std::vector<CrashPlan> plans;
  for (std::vector<CrashPlan>& fence_plans : per_fence)
    for (CrashPlan& p : fence_plans) plans.push_back(std::move(p));
  return plans;
}

NvmImage materialize(const Simulation& sim, const CrashPlan& plan) {
  NvmImage img;
  img.plan = plan;
  img.crashed_op_index = plan.crashed_op;
  img.persisted = persisted_closure(sim, plan.fence_ordinal, plan.extra_store);
  img.bytes.assign(sim.trace->pool_size, 0);
  for (Tid tid : img.persisted) {
    const TraceEvent& e = sim.trace->events[sim.stores[sim.store_index.at(tid)].event_index];
    std::copy(e.bytes.begin(), e.bytes.end(), img.bytes.begin() + e.addr);
  }
  return img;
}

std::string plan_meta_line(const CrashPlan& plan) {
  std::string out = "PLAN fence=" + std::to_string(plan.fence_tid) + " extra=";
  out += plan.extra_store ? std::to_string(*plan.extra_store) : "-";
  out += " violated=";
  for (std::size_t i = 0; i < plan.violated.size(); ++i) {
    if (i > 0) out += ',';
    out += invariant_id(plan.violated[i]);
  }
  return out;
}

BigInt BaselineCounts::cumulative_at_event(std::size_t event_index) const {
  BigInt cum = 0;
  for (const CountPoint& p : points) {
    if (p.event_index > event_index) break;
    cum = p.cumulative;
  }
  return cum;
}

BaselineCounts count_exhaustive_yat(const Trace& trace, int jobs) {
  validate_trace(trace);

  // First pass: per-line pending counts after each store/flush/fence.
  // Per-point state counts multiply per-line prefix choices and are
  // independent, so they can be computed in parallel; the cumulative sum
  // is a serial pass at the end.
  struct Point {
    std::size_t event_index;
    Tid tid;
    std::vector<std::size_t> line_pending;  // pending count per touched line
  };
  std::vector<Point> raw;

  std::map<std::uint64_t, std::vector<std::size_t>> line_pending;  // store idx
  std::vector<char> flush_marked;
  std::vector<std::size_t> flush_queue;
  std::vector<std::uint64_t> store_line;

  auto snapshot = [&](std::size_t i, Tid tid) {
    Point p;
    p.event_index = i;
    p.tid = tid;
    for (const auto& [line, pend] : line_pending)
      if (!pend.empty()) p.line_pending.push_back(pend.size());
    raw.push_back(std::move(p));
  };

  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const TraceEvent& e = trace.events[i];
    switch (e.kind) {
      case EventKind::Store:
        if (e.space == Space::Nvm) {
          std::uint64_t line = line_base(e.addr, trace.cache_line);
          line_pending[line].push_back(store_line.size());
          store_line.push_back(line);
          flush_marked.push_back(0);
          snapshot(i, e.tid);
        }
        break;
      case EventKind::Flush: {
        auto it = line_pending.find(e.addr);
        if (it != line_pending.end()) {
          for (std::size_t s : it->second) {
            if (!flush_marked[s]) {
              flush_marked[s] = 1;
              flush_queue.push_back(s);
            }
          }
        }
        snapshot(i, e.tid);
        break;
      }
      case EventKind::Fence: {
        for (std::size_t s : flush_queue) {
          auto& pend = line_pending[store_line[s]];
          pend.erase(std::remove(pend.begin(), pend.end(), s), pend.end());
        }
        flush_queue.clear();
        snapshot(i, e.tid);
        break;
      }
      default:
        break;
    }
  }

  BaselineCounts out;
  out.points.resize(raw.size());

  auto compute = [&](std::size_t p) {
    BigInt states = 1;
    for (std::size_t n : raw[p].line_pending) states *= BigInt(n + 1);
    out.points[p].event_index = raw[p].event_index;
    out.points[p].tid = raw[p].tid;
    out.points[p].states = std::move(states);
  };

#ifdef _OPENMP
  if (jobs > 1) {
#pragma omp parallel for schedule(static) num_threads(jobs)
    for (long p = 0; p < static_cast<long>(raw.size()); ++p)
      compute(static_cast<std::size_t>(p));
  } else {
    for (std::size_t p = 0; p < raw.size(); ++p) compute(p);
  }
#else
  (void)jobs;
  for (std::size_t p = 0; p < raw.size(); ++p) compute(p);
#endif

  BigInt cum = 0;
  for (CountPoint& p : out.points) {
    cum += p.states;
    p.cumulative = cum;
  }
  out.total = cum;
  return out;
}

BaselineCounts count_exhaustive_pmreorder(const Trace& trace) {
  validate_trace(trace);
  BaselineCounts out;

  std::map<std::uint64_t, std::vector<std::size_t>> line_pending;
  std::vector<char> flush_marked;
  std::vector<std::size_t> flush_queue;
  std::vector<std::uint64_t> store_line;
  BigInt cum = 0;

  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const TraceEvent& e = trace.events[i];
    switch (e.kind) {
      case EventKind::Store:
        if (e.space == Space::Nvm) {
          std::uint64_t line = line_base(e.addr, trace.cache_line);
          line_pending[line].push_back(store_line.size());
          store_line.push_back(line);
          flush_marked.push_back(0);
        }
        break;
      case EventKind::Flush: {
        auto it = line_pending.find(e.addr);
        if (it != line_pending.end()) {
          for (std::size_t s : it->second) {
            if (!flush_marked[s]) {
              flush_marked[s] = 1;
              flush_queue.push_back(s);
            }
          }
        }
        break;
      }
      case EventKind::Fence: {
        // Only the explicitly flushed stores are reordered; no line
        // coupling, so 2^n subsets.
        CountPoint p;
        p.event_index = i;
        p.tid = e.tid;
        p.states = BigInt(1) << flush_queue.size();
        cum += p.states;
        p.cumulative = cum;
        out.points.push_back(std::move(p));
        for (std::size_t s : flush_queue) {
          auto& pend = line_pending[store_line[s]];
          pend.erase(std::remove(pend.begin(), pend.end(), s), pend.end());
        }
        flush_queue.clear();
        break;
      }
      default:
        break;
    }
  }
  out.total = cum;
  return out;
}

}  // namespace cw
