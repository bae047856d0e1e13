// Bug report assembly, root-cause clustering and rendering.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crashwitness/equivalence.hpp"

namespace cw {

struct BugReport {
  std::size_t plan_index = 0;
  CrashPlan plan;
  std::string crashed_op_kind;
  std::size_t crashed_op_index = 0;
  std::vector<Sid> path;  // sids executed in the crashed op before the fence
  std::vector<std::string> observed;
  std::vector<std::string> oracle_committed;
  std::vector<std::string> oracle_rolledback;
  std::vector<Sid> persisted_sids;    // crashed-op store sites in the image
  std::vector<Sid> unpersisted_sids;  // executed but lost
};

// Divergent verdicts assembled into reports, in plan order.
std::vector<BugReport> collect_reports(const Simulation& sim,
                                       const std::vector<CrashPlan>& plans,
                                       const std::vector<ValidationResult>& verdicts,
                                       OracleCache& oracles);

// Reports sharing (operation kind, executed path) collapse into one
// cluster; the representative is the member with the smallest fence tid.
struct Cluster {
  std::string op_kind;
  std::uint64_t path_hash = 0;
  std::vector<std::size_t> members;  // indexes into the report list
  std::size_t representative = 0;
};

std::vector<Cluster> cluster(const std::vector<BugReport>& reports);

std::uint64_t fnv1a64(const std::vector<Sid>& path);

std::string render_text(const std::vector<Cluster>& clusters,
                        const std::vector<BugReport>& reports,
                        const InvariantSet& invs);
std::string render_json(const std::vector<Cluster>& clusters,
                        const std::vector<BugReport>& reports,
                        const InvariantSet& invs);

// format is "text" or "json"; anything else is a usage error.
std::string render(const std::string& format, const std::vector<Cluster>& clusters,
                   const std::vector<BugReport>& reports, const InvariantSet& invs);

}  // namespace cw
