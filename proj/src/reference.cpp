#include "crashwitness/reference.hpp"

#include <algorithm>
#include <map>

namespace cw::ref {

NaiveState replay_until(const Trace& trace, std::size_t event_index) {
  NaiveState state;
  std::map<std::uint64_t, std::vector<Tid>> pending;
  std::set<Tid> marked;
  for (std::size_t i = 0; i < event_index && i < trace.events.size(); ++i) {
    const TraceEvent& e = trace.events[i];
    if (e.kind == EventKind::Store && e.space == Space::Nvm) {
      pending[line_base(e.addr, trace.cache_line)].push_back(e.tid);
    } else if (e.kind == EventKind::Flush) {
      auto it = pending.find(e.addr);
      if (it != pending.end())
        for (Tid t : it->second) marked.insert(t);
    } else if (e.kind == EventKind::Fence) {
      for (auto& [line, tids] : pending) {
        std::vector<Tid> keep;
        for (Tid t : tids) {
          if (marked.count(t)) {
            state.must.insert(t);
          } else {
            keep.push_back(t);
          }
        }
        tids = std::move(keep);
      }
      marked.clear();
    }
  }
  for (auto& [line, tids] : pending)
    if (!tids.empty()) state.pending.emplace_back(line, tids);
  return state;
}

namespace {

std::vector<std::size_t> fence_event_indexes(const Trace& trace) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < trace.events.size(); ++i)
    if (trace.events[i].kind == EventKind::Fence) out.push_back(i);
  return out;
}

}  // namespace

std::vector<std::vector<Tid>> legal_persisted_sets(const Trace& trace,
                                                   std::size_t fence_ordinal) {
  std::vector<std::size_t> fences = fence_event_indexes(trace);
  if (fence_ordinal >= fences.size()) throw ConfigError("no such fence");
  NaiveState state = replay_until(trace, fences[fence_ordinal]);

  std::vector<std::vector<Tid>> sets;
  std::vector<std::size_t> choice(state.pending.size(), 0);
  while (true) {
    std::vector<Tid> set(state.must.begin(), state.must.end());
    for (std::size_t l = 0; l < state.pending.size(); ++l)
      for (std::size_t i = 0; i < choice[l]; ++i)
        set.push_back(state.pending[l].second[i]);
    std::sort(set.begin(), set.end());
    sets.push_back(std::move(set));

    std::size_t l = 0;
    for (; l < choice.size(); ++l) {
      if (choice[l] < state.pending[l].second.size()) {
        ++choice[l];
        break;
      }
      choice[l] = 0;
    }
    if (l == choice.size()) break;
  }
  std::sort(sets.begin(), sets.end());
  return sets;
}

bool is_legal_persisted_set(const Trace& trace, std::size_t fence_ordinal,
                            const std::vector<Tid>& persisted) {
  std::vector<std::size_t> fences = fence_event_indexes(trace);
  if (fence_ordinal >= fences.size()) throw ConfigError("no such fence");
  NaiveState state = replay_until(trace, fences[fence_ordinal]);

  std::set<Tid> set(persisted.begin(), persisted.end());
  for (Tid t : state.must)
    if (!set.count(t)) return false;  // must-persisted stores cannot be lost
  std::set<Tid> eligible(state.must);
  for (const auto& [line, tids] : state.pending)
    for (Tid t : tids) eligible.insert(t);
  for (Tid t : set)
    if (!eligible.count(t)) return false;  // unknown or not yet executed
  // Per line, the persisted pending stores must be a program-order prefix.
  for (const auto& [line, tids] : state.pending) {
    bool gap = false;
    for (Tid t : tids) {
      if (set.count(t)) {
        if (gap) return false;
      } else {
        gap = true;
      }
    }
  }
  return true;
}

std::vector<CrashPlan> enumerate_violating_plans_serial(const Trace& trace,
                                                        const InvariantSet& invs) {
  std::vector<OpSpan> ops = op_spans(trace);
  std::vector<std::size_t> fences = fence_event_indexes(trace);

  std::map<Tid, std::size_t> tid_to_event;
  for (std::size_t i = 0; i < trace.events.size(); ++i)
    tid_to_event[trace.events[i].tid] = i;

  std::vector<CrashPlan> plans;
  for (std::size_t k = 0; k < fences.size(); ++k) {
    Tid fence_tid = trace.events[fences[k]].tid;
    std::optional<std::size_t> op_index;
    for (std::size_t o = 0; o < ops.size(); ++o)
      if (ops[o].begin_tid < fence_tid && fence_tid < ops[o].end_tid) op_index = o;
    if (!op_index) continue;

    NaiveState state = replay_until(trace, fences[k]);

    std::vector<std::optional<Tid>> candidates;
    candidates.push_back(std::nullopt);
    std::vector<Tid> all_pending;
    for (const auto& [line, tids] : state.pending)
      for (Tid t : tids) all_pending.push_back(t);
    std::sort(all_pending.begin(), all_pending.end());
    for (Tid t : all_pending) candidates.push_back(t);

    std::set<std::set<Tid>> seen;
    for (const std::optional<Tid>& extra : candidates) {
      std::set<Tid> closure(state.must.begin(), state.must.end());
      if (extra) {
        for (const auto& [line, tids] : state.pending) {
          if (std::find(tids.begin(), tids.end(), *extra) == tids.end()) continue;
          for (Tid t : tids) {
            closure.insert(t);
            if (t == *extra) break;
          }
        }
      }
      if (!seen.insert(closure).second) continue;

      std::vector<std::size_t> violated;
      for (std::size_t inv_i = 0; inv_i < invs.invariants.size(); ++inv_i) {
        const Invariant& inv = invs.invariants[inv_i];
        bool hit = false;
        for (const OrderingWitness& w : inv.ordering_witnesses) {
          if (closure.count(w.second_store) && w.first_store < fence_tid &&
              !closure.count(w.first_store)) {
            hit = true;
            break;
          }
        }
        if (!hit) {
          for (const AtomicityWitness& w : inv.atomicity_witnesses) {
            if (w.op_index != *op_index) continue;
            if (closure.count(w.store_a) != closure.count(w.store_b)) {
              hit = true;
              break;
            }
          }
        }
        if (hit) violated.push_back(inv_i);
      }
      if (violated.empty()) continue;

      CrashPlan plan;
      plan.fence_tid = fence_tid;
      plan.extra_store = extra;
      plan.violated = std::move(violated);
      plan.fence_ordinal = k;
      plan.crashed_op = *op_index;
      plans.push_back(std::move(plan));
    }
  }
  return plans;
}

std::vector<ValidationResult> check_plans_serial(const SubjectFactory& factory,
                                                 const TestCase& test,
                                                 const Simulation& sim,
                                                 const std::vector<CrashPlan>& plans,
                                                 std::uint32_t cache_line) {
  std::vector<ValidationResult> results;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    NvmImage image = materialize(sim, plans[i]);
    auto oracle_subject = factory();
    OracleSet oracles =
        build_oracles(*oracle_subject, test, image.crashed_op_index, cache_line);
    auto subject = factory();
    ValidationResult r = check(*subject, test, image, oracles, cache_line);
    r.plan_index = i;
    results.push_back(std::move(r));
  }
  return results;
}

BaselineCounts count_exhaustive_yat_naive(const Trace& trace) {
  BaselineCounts out;
  BigInt cum = 0;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const TraceEvent& e = trace.events[i];
    bool crash_point = (e.kind == EventKind::Store && e.space == Space::Nvm) ||
                       e.kind == EventKind::Flush || e.kind == EventKind::Fence;
    if (!crash_point) continue;
    NaiveState state = replay_until(trace, i + 1);
    BigInt states = 1;
    for (const auto& [line, tids] : state.pending) states *= BigInt(tids.size() + 1);
    CountPoint p;
    p.event_index = i;
    p.tid = e.tid;
    p.states = states;
    cum += states;
    p.cumulative = cum;
    out.points.push_back(std::move(p));
  }
  out.total = cum;
  return out;
}

namespace {

// All NVM origins of a load by explicit path walking; ctrl marks whether
// any hop so far was a control dependency.
void walk_sources(const Trace& trace,
                  const std::map<Tid, std::size_t>& tid_to_event, Tid load_tid,
                  bool ctrl, std::map<Tid, bool>& acc) {
  const TraceEvent& load = trace.events[tid_to_event.at(load_tid)];
  if (load.space == Space::Nvm) {
    auto [it, inserted] = acc.emplace(load.tid, ctrl);
    if (!inserted) it->second = it->second || ctrl;
    return;
  }
  // Last writer per byte, found by scanning backwards.
  std::set<Tid> writers;
  for (std::uint64_t b = 0; b < load.len; ++b) {
    std::uint64_t addr = load.addr + b;
    for (std::size_t i = tid_to_event.at(load_tid); i-- > 0;) {
      const TraceEvent& w = trace.events[i];
      if (w.kind == EventKind::Store && w.space == Space::Dram && w.addr <= addr &&
          addr < w.addr + w.len) {
        writers.insert(w.tid);
        break;
      }
    }
  }
  for (Tid wt : writers) {
    const TraceEvent& w = trace.events[tid_to_event.at(wt)];
    for (Tid d : w.data_deps) walk_sources(trace, tid_to_event, d, ctrl, acc);
    for (Tid d : w.ctrl_deps) walk_sources(trace, tid_to_event, d, true, acc);
  }
  for (Tid d : load.ctrl_deps) walk_sources(trace, tid_to_event, d, true, acc);
}

}  // namespace

Ppdg build_ppdg_bruteforce(const Trace& trace) {
  validate_trace(trace);
  std::map<Tid, std::size_t> tid_to_event;
  for (std::size_t i = 0; i < trace.events.size(); ++i)
    tid_to_event[trace.events[i].tid] = i;

  Ppdg g;
  for (const TraceEvent& e : trace.events) {
    bool nvm_access = (e.kind == EventKind::Load || e.kind == EventKind::Store) &&
                      e.space == Space::Nvm;
    if (!nvm_access) continue;
    PpdgNode n;
    n.tid = e.tid;
    n.sid = e.sid;
    n.kind = e.kind;
    n.addr = e.addr;
    n.len = e.len;
    g.node_index[e.tid] = g.nodes.size();
    g.nodes.push_back(std::move(n));

    std::map<Tid, bool> acc;
    for (Tid d : e.ctrl_deps) walk_sources(trace, tid_to_event, d, true, acc);
    if (e.kind == EventKind::Store)
      for (Tid d : e.data_deps) walk_sources(trace, tid_to_event, d, false, acc);
    for (const auto& [src, ctrl] : acc) {
      PpdgEdge edge;
      edge.from = e.tid;
      edge.to = src;
      edge.kind = ctrl ? DepKind::Control : DepKind::Data;
      g.edges.push_back(edge);
    }
  }

  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const PpdgEdge& edge = g.edges[i];
    const PpdgNode& from = g.nodes[g.node_index.at(edge.from)];
    const PpdgNode& to = g.nodes[g.node_index.at(edge.to)];
    g.projection[{from.sid, to.sid, edge.kind}].push_back(i);
  }
  return g;
}

}  // namespace cw::ref
