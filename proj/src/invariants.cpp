#include "crashwitness/invariants.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace cw {

const char* rule_name(Rule rule) {
  switch (rule) {
    case Rule::RO1: return "RO1";
    case Rule::RO2: return "RO2";
    case Rule::RO3: return "RO3";
    case Rule::RA1: return "RA1";
  }
  return "?";
}

namespace {

// Last-writer binding for NVM loads: the distinct stores that produced the
// bytes each load observed, in store order.
std::unordered_map<Tid, std::vector<Tid>> bind_last_writers(const Trace& trace) {
  std::unordered_map<Tid, std::vector<Tid>> writers_of_load;
  std::vector<Tid> byte_writer(trace.pool_size, 0);  // 0 = never written
  for (const TraceEvent& e : trace.events) {
    if (e.space != Space::Nvm) continue;
    if (e.kind == EventKind::Load) {
      std::vector<Tid> ws;
      for (std::uint64_t b = 0; b < e.len; ++b) {
        Tid w = byte_writer[e.addr + b];
        if (w != 0) ws.push_back(w);
      }
      std::sort(ws.begin(), ws.end());
      ws.erase(std::unique(ws.begin(), ws.end()), ws.end());
      writers_of_load.emplace(e.tid, std::move(ws));
    } else if (e.kind == EventKind::Store) {
      for (std::uint64_t b = 0; b < e.len; ++b) byte_writer[e.addr + b] = e.tid;
    }
  }
  return writers_of_load;
}

struct Miner {
  const Trace& trace;
  const Ppdg& ppdg;
  std::unordered_map<Tid, std::vector<Tid>> writers_of_load;
  std::unordered_map<Tid, std::size_t> event_index;

  InvariantSet out;
  std::map<std::tuple<Rule, Sid, Sid>, std::size_t> index_of;

  explicit Miner(const Ppdg& g, const Trace& t) : trace(t), ppdg(g) {
    writers_of_load = bind_last_writers(t);
    for (std::size_t i = 0; i < t.events.size(); ++i)
      event_index[t.events[i].tid] = i;
  }

  const TraceEvent& event(Tid tid) const { return trace.events[event_index.at(tid)]; }

  Invariant& invariant_at(Rule rule, const Sid& first, const Sid& second) {
    auto key = std::make_tuple(rule, first, second);
    auto it = index_of.find(key);
    if (it == index_of.end()) {
      Invariant inv;
      inv.rule = rule;
      inv.first_sid = first;
      inv.second_sid = second;
      it = index_of.emplace(key, out.invariants.size()).first;
      out.invariants.push_back(std::move(inv));
    }
    return out.invariants[it->second];
  }

  // first_store persists before second_store's site writes again.
  void emit_ordering(Rule rule, const PpdgEdge& edge, Tid first_store, Tid second_store) {
    const Sid& first = event(first_store).sid;
    const Sid& second = event(second_store).sid;
    if (first == second) {
      ++out.skipped_self;
      return;
    }
    OrderingWitness w{edge.from, edge.to, first_store, second_store};
    invariant_at(rule, first, second).ordering_witnesses.push_back(w);
  }

  void run_ordering() {
    for (const PpdgEdge& edge : ppdg.edges) {
      const PpdgNode& dep = ppdg.nodes[ppdg.node_index.at(edge.from)];
      const TraceEvent& src_load = event(edge.to);
      const std::vector<Tid>& src_writers = writers_of_load.at(src_load.tid);

      if (dep.kind == EventKind::Store) {
        // RO1 / RO2: W(Y) depends on R(X)  =>  P(X) < W(Y).
        Rule rule = edge.kind == DepKind::Data ? Rule::RO1 : Rule::RO2;
        if (src_writers.empty()) {
          ++out.skipped_unbound;
          continue;
        }
        for (Tid xw : src_writers) emit_ordering(rule, edge, xw, dep.tid);
      } else if (edge.kind == DepKind::Control) {
        // RO3: R(Y) control-depends on R(X)  =>  P(Y) < W(X).
        const std::vector<Tid>& dep_writers = writers_of_load.at(dep.tid);
        if (src_writers.empty() || dep_writers.empty()) {
          ++out.skipped_unbound;
          continue;
        }
        bool emitted = false;
        for (Tid yw : dep_writers)
          for (Tid xw : src_writers) {
            std::size_t before = out.skipped_self;
            emit_ordering(Rule::RO3, edge, yw, xw);
            emitted = emitted || out.skipped_self == before;
          }
        if (emitted) note_guard_range(src_load.addr, src_load.len);
      }
      // Data edges between loads cannot occur: loads carry no data deps.
    }
    finish_guardians();
  }

  // --- guardian bookkeeping (RA1 source data) ---

  std::vector<std::pair<std::uint64_t, std::uint64_t>> guard_ranges;

  void note_guard_range(std::uint64_t addr, std::uint64_t len) {
    guard_ranges.emplace_back(addr, len);
  }

  void finish_guardians() {
    std::sort(guard_ranges.begin(), guard_ranges.end());
    guard_ranges.erase(std::unique(guard_ranges.begin(), guard_ranges.end()),
                       guard_ranges.end());
    out.guardian_ranges = guard_ranges;
    std::set<Sid> sites;
    for (const TraceEvent& e : trace.events) {
      if (e.kind == EventKind::Store && e.space == Space::Nvm &&
          intersects_guard(e.addr, e.len))
        sites.insert(e.sid);
    }
    out.guardian_sites.assign(sites.begin(), sites.end());
  }

  bool intersects_guard(std::uint64_t addr, std::uint64_t len) const {
    for (const auto& [ga, gl] : guard_ranges)
      if (addr < ga + gl && ga < addr + len) return true;
    return false;
  }
};

}  // namespace

InvariantSet infer_ordering(const Ppdg& ppdg, const Trace& trace) {
  Miner m(ppdg, trace);
  m.run_ordering();
  return std::move(m.out);
}

std::vector<Invariant> infer_atomicity(const Ppdg& ppdg, const InvariantSet& ordering,
                                       const Trace& trace) {
  (void)ppdg;
  auto intersects = [&](std::uint64_t addr, std::uint64_t len) {
    for (const auto& [ga, gl] : ordering.guardian_ranges)
      if (addr < ga + gl && ga < addr + len) return true;
    return false;
  };

  std::vector<Invariant> out;
  std::map<std::pair<Sid, Sid>, std::size_t> index_of;
  std::vector<OpSpan> spans = op_spans(trace);
  for (std::size_t op = 0; op < spans.size(); ++op) {
    std::vector<const TraceEvent*> guardian_stores;
    for (std::size_t i = spans[op].begin_index + 1; i < spans[op].end_index; ++i) {
      const TraceEvent& e = trace.events[i];
      if (e.kind == EventKind::Store && e.space == Space::Nvm &&
          intersects(e.addr, e.len))
        guardian_stores.push_back(&e);
    }
    for (std::size_t a = 0; a < guardian_stores.size(); ++a)
      for (std::size_t b = a + 1; b < guardian_stores.size(); ++b) {
        const TraceEvent& ea = *guardian_stores[a];
        const TraceEvent& eb = *guardian_stores[b];
        if (ea.sid == eb.sid) continue;  // a pair needs two distinct sites
        std::pair<Sid, Sid> key = std::minmax(ea.sid, eb.sid);
        auto it = index_of.find(key);
        if (it == index_of.end()) {
          Invariant inv;
          inv.rule = Rule::RA1;
          inv.first_sid = key.first;
          inv.second_sid = key.second;
          it = index_of.emplace(key, out.size()).first;
          out.push_back(std::move(inv));
        }
        out[it->second].atomicity_witnesses.push_back(
            AtomicityWitness{ea.tid, eb.tid, op});
      }
  }
  return out;
}

InvariantSet infer_invariants(const Ppdg& ppdg, const Trace& trace) {
  InvariantSet set = infer_ordering(ppdg, trace);
  std::vector<Invariant> atomic = infer_atomicity(ppdg, set, trace);
  for (Invariant& inv : atomic) set.invariants.push_back(std::move(inv));
  return set;
}

RuleCounts invariant_stats(const InvariantSet& invs) {
  RuleCounts c;
  for (const Invariant& inv : invs.invariants) {
    switch (inv.rule) {
      case Rule::RO1: ++c.ro1; break;
      case Rule::RO2: ++c.ro2; break;
      case Rule::RO3: ++c.ro3; break;
      case Rule::RA1: ++c.ra1; break;
    }
  }
  return c;
}

std::string format_invariants(const InvariantSet& invs) {
  std::string out;
  for (const Invariant& inv : invs.invariants) {
    if (inv.rule == Rule::RA1) {
      out += std::string(rule_name(inv.rule)) + " AP(" + inv.first_sid + "," +
             inv.second_sid + ") witnesses=" + std::to_string(inv.witness_count()) + "\n";
    } else {
      out += std::string(rule_name(inv.rule)) + " P(" + inv.first_sid + ") < W(" +
             inv.second_sid + ") witnesses=" + std::to_string(inv.witness_count()) + "\n";
    }
  }
  return out;
}

std::string invariant_id(std::size_t index) { return "I" + std::to_string(index + 1); }

}  // namespace cw
