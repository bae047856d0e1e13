// Likely-invariant mining over the persistence dependence graph.
//
// Ordering rules, matched per dynamic edge and merged at site granularity:
//   RO1  store W(Y) data-dependent on load R(X)     =>  persist X before W(Y)
//   RO2  store W(Y) control-dependent on load R(X)  =>  persist X before W(Y)
//   RO3  load R(Y) control-dependent on load R(X)   =>  persist Y before W(X)
// The "X"/"Y" of a rule is the store site that produced the value the read
// observed (last-writer binding). Reads of never-written memory have no
// writer; those matches are skipped and counted.
//
// Atomicity rule RA1: addresses whose reads guard other reads (the RO3
// guard side) are guardians; two stores that hit guardian addresses inside
// one operation, at distinct sites, should persist atomically.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crashwitness/ppdg.hpp"

namespace cw {

enum class Rule : std::uint8_t { RO1, RO2, RO3, RA1 };

const char* rule_name(Rule rule);

// Dynamic instance behind an ordering invariant: the PPDG edge that matched
// plus the two concrete stores the rule constrains.
struct OrderingWitness {
  Tid edge_from = 0;
  Tid edge_to = 0;
  Tid first_store = 0;   // must be persisted first
  Tid second_store = 0;  // must not be persisted ahead
};

// Dynamic instance behind an atomicity invariant: a pair of guardian
// stores in one operation span.
struct AtomicityWitness {
  Tid store_a = 0;  // earlier
  Tid store_b = 0;
  std::size_t op_index = 0;
};

struct Invariant {
  Rule rule = Rule::RO1;
  // Ordering: first_sid's data persists before second_sid's store lands.
  // RA1: the two guardian sites, lexicographically ordered.
  Sid first_sid;
  Sid second_sid;
  std::vector<OrderingWitness> ordering_witnesses;
  std::vector<AtomicityWitness> atomicity_witnesses;

  std::size_t witness_count() const {
    return ordering_witnesses.size() + atomicity_witnesses.size();
  }
};

struct InvariantSet {
  std::vector<Invariant> invariants;   // deterministic first-seen order
  std::uint64_t skipped_unbound = 0;   // matches on never-written reads
  std::uint64_t skipped_self = 0;      // matches collapsing to one site
  std::vector<Sid> guardian_sites;     // sites storing to guardian addresses
  // Byte ranges observed as RO3 guards; feeds RA1.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> guardian_ranges;  // (addr, len)
};

InvariantSet infer_ordering(const Ppdg& ppdg, const Trace& trace);

// Appends RA1 invariants derived from the ordering pass.
std::vector<Invariant> infer_atomicity(const Ppdg& ppdg, const InvariantSet& ordering,
                                       const Trace& trace);

// Ordering pass followed by the atomicity pass.
InvariantSet infer_invariants(const Ppdg& ppdg, const Trace& trace);

struct RuleCounts {
  std::uint64_t ro1 = 0;
  std::uint64_t ro2 = 0;
  std::uint64_t ro3 = 0;
  std::uint64_t ra1 = 0;

  std::uint64_t ordering() const { return ro1 + ro2 + ro3; }
  bool operator==(const RuleCounts&) const = default;
};

RuleCounts invariant_stats(const InvariantSet& invs);

// One line per invariant:
//   RO3 P(<sid>) < W(<sid>) witnesses=<n>
//   RA1 AP(<sid>,<sid>) witnesses=<n>
std::string format_invariants(const InvariantSet& invs);

// Invariant id used in image metadata and reports: "I<position+1>".
std::string invariant_id(std::size_t index);

}  // namespace cw
