// Persistence dependence graph: data/control dependencies between NVM
// accesses, extracted from the dynamic trace. DRAM accesses are collapsed:
// a dependency that routes through scratch memory is traced back to the
// NVM loads it originated from, turning control if any hop on the way was
// a control dependency.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "crashwitness/pmem.hpp"

namespace cw {

enum class DepKind : std::uint8_t { Data, Control };

struct PpdgNode {
  Tid tid = 0;
  Sid sid;
  EventKind kind = EventKind::Load;  // NVM Load or Store
  std::uint64_t addr = 0;
  std::uint64_t len = 0;
};

// from depends on to; to is always an NVM load and earlier than from.
// When both a control and a data path exist, control wins.
struct PpdgEdge {
  Tid from = 0;
  Tid to = 0;
  DepKind kind = DepKind::Data;

  bool operator==(const PpdgEdge&) const = default;
};

struct Ppdg {
  std::vector<PpdgNode> nodes;  // trace order
  std::vector<PpdgEdge> edges;  // sorted by (from, to)
  // Static projection: (from_sid, to_sid, kind) -> indexes into edges.
  std::map<std::tuple<Sid, Sid, DepKind>, std::vector<std::size_t>> projection;
  std::unordered_map<Tid, std::size_t> node_index;

  const PpdgNode& node(Tid tid) const;
  bool has_node(Tid tid) const { return node_index.count(tid) != 0; }
};

Ppdg build_ppdg(const Trace& trace);

// All outgoing edges of a node. Throws TraceError on an unknown tid.
std::vector<std::pair<Tid, DepKind>> dynamic_sources(const Ppdg& ppdg, Tid tid);

// Graphviz dump for debugging; node label "sid@tid kind addr".
std::string to_dot(const Ppdg& ppdg);

}  // namespace cw
