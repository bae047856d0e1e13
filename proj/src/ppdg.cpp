#include "crashwitness/ppdg.hpp"

#include <algorithm>

namespace cw {

const PpdgNode& Ppdg::node(Tid tid) const {
  auto it = node_index.find(tid);
  if (it == node_index.end())
    throw TraceError("unknown PPDG node tid " + std::to_string(tid));
  return nodes[it->second];
}

namespace {

// Resolved NVM origins of one load: (nvm load tid, reached via a control hop).
using SourceSet = std::vector<std::pair<Tid, bool>>;

void merge_source(std::map<Tid, bool>& acc, Tid tid, bool ctrl) {
  auto [it, inserted] = acc.emplace(tid, ctrl);
  if (!inserted) it->second = it->second || ctrl;
}

}  // namespace

Ppdg build_ppdg(const Trace& trace) {
  validate_trace(trace);

  Ppdg g;
  // Per-byte last writer of the scratch space, by event index. NVM last
  // writers are bound later, by the invariant miner.
  std::unordered_map<std::uint64_t, std::size_t> dram_writer;

  // Memoized collapsed sources for every load, filled in trace order.
  std::unordered_map<Tid, SourceSet> resolved;

  auto resolve = [&](Tid load_tid) -> const SourceSet& {
    auto it = resolved.find(load_tid);
    if (it == resolved.end())
      throw TraceError("dep tid " + std::to_string(load_tid) + " is not a load");
    return it->second;
  };

  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const TraceEvent& e = trace.events[i];

    if (e.kind == EventKind::Load) {
      if (e.space == Space::Nvm) {
        resolved[e.tid] = {{e.tid, false}};
      } else {
        // Collapse: substitute the DRAM load with the sources of the value
        // it observed (via the last writers of its bytes) plus its own
        // guards, the latter always as control.
        std::map<Tid, bool> acc;
        std::vector<std::size_t> writers;
        for (std::uint64_t b = 0; b < e.len; ++b) {
          auto w = dram_writer.find(e.addr + b);
          if (w != dram_writer.end()) writers.push_back(w->second);
        }
        std::sort(writers.begin(), writers.end());
        writers.erase(std::unique(writers.begin(), writers.end()), writers.end());
        for (std::size_t wi : writers) {
          const TraceEvent& w = trace.events[wi];
          for (Tid d : w.data_deps)
            for (const auto& [s, c] : resolve(d)) merge_source(acc, s, c);
          for (Tid d : w.ctrl_deps)
            for (const auto& sc : resolve(d)) merge_source(acc, sc.first, true);
        }
        for (Tid d : e.ctrl_deps)
          for (const auto& sc : resolve(d)) merge_source(acc, sc.first, true);
        SourceSet set(acc.begin(), acc.end());
        resolved[e.tid] = std::move(set);
      }
    }

    bool nvm_access = (e.kind == EventKind::Load || e.kind == EventKind::Store) &&
                      e.space == Space::Nvm;
    if (nvm_access) {
      PpdgNode n;
      n.tid = e.tid;
      n.sid = e.sid;
      n.kind = e.kind;
      n.addr = e.addr;
      n.len = e.len;
      g.node_index[e.tid] = g.nodes.size();
      g.nodes.push_back(std::move(n));

      std::map<Tid, bool> acc;
      for (Tid d : e.ctrl_deps)
        for (const auto& sc : resolve(d)) merge_source(acc, sc.first, true);
      if (e.kind == EventKind::Store) {
        for (Tid d : e.data_deps)
          for (const auto& [s, c] : resolve(d)) merge_source(acc, s, c);
      }
      for (auto [src, ctrl] : acc) {
        PpdgEdge edge;
        edge.from = e.tid;
        edge.to = src;
        edge.kind = ctrl ? DepKind::Control : DepKind::Data;
        g.edges.push_back(edge);
      }
    }

    if (e.kind == EventKind::Store && e.space == Space::Dram) {
      for (std::uint64_t b = 0; b < e.len; ++b) dram_writer[e.addr + b] = i;
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

std::vector<std::pair<Tid, DepKind>> dynamic_sources(const Ppdg& ppdg, Tid tid) {
  ppdg.node(tid);  // throws on unknown tid
  std::vector<std::pair<Tid, DepKind>> out;
  // Edges are sorted by from; a binary search would do, linear is fine at
  // the sizes we run.
  for (const PpdgEdge& e : ppdg.edges)
    if (e.from == tid) out.emplace_back(e.to, e.kind);
  return out;
}

std::string to_dot(const Ppdg& ppdg) {
  std::string out = "digraph ppdg {\n";
  for (const PpdgNode& n : ppdg.nodes) {
    out += "  n" + std::to_string(n.tid) + " [label=\"" + n.sid + "@" +
           std::to_string(n.tid) +
           (n.kind == EventKind::Load ? " load " : " store ") +
           std::to_string(n.addr) + "\"];\n";
  }
  for (const PpdgEdge& e : ppdg.edges) {
    out += "  n" + std::to_string(e.from) + " -> n" + std::to_string(e.to) +
           (e.kind == DepKind::Control ? " [style=dashed];\n" : ";\n");
  }
  out += "}\n";
  return out;
}

}  // namespace cw
