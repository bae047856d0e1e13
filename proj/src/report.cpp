#include "crashwitness/report.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

namespace cw {

std::uint64_t fnv1a64(const std::vector<Sid>& path) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const Sid& sid : path) {
    for (char c : sid) {
      h ^= static_cast<std::uint8_t>(c);
      h *= 0x100000001b3ull;
    }
    h ^= 0x1f;  // separator so ["ab"] != ["a","b"]
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<BugReport> collect_reports(const Simulation& sim,
                                       const std::vector<CrashPlan>& plans,
                                       const std::vector<ValidationResult>& verdicts,
                                       OracleCache& oracles) {
  const Trace& trace = *sim.trace;
  std::vector<BugReport> reports;
  for (const ValidationResult& v : verdicts) {
    if (v.verdict != Verdict::Divergent) continue;
    const CrashPlan& plan = plans[v.plan_index];
    const OpSpan& op = sim.ops[plan.crashed_op];

    BugReport r;
    r.plan_index = v.plan_index;
    r.plan = plan;
    r.crashed_op_kind = op.label;
    r.crashed_op_index = plan.crashed_op;
    r.observed = v.observed;
    const OracleSet& o = oracles.at(plan.crashed_op);
    r.oracle_committed = o.committed;
    r.oracle_rolledback = o.rolledback;

    std::vector<Tid> closure = persisted_closure(sim, plan.fence_ordinal, plan.extra_store);
    std::set<Sid> persisted, unpersisted;
    for (std::size_t i = op.begin_index + 1; i < trace.events.size(); ++i) {
      const TraceEvent& e = trace.events[i];
      if (e.tid >= plan.fence_tid) break;
      if (!e.sid.empty()) r.path.push_back(e.sid);
      if (e.kind == EventKind::Store && e.space == Space::Nvm) {
        if (std::binary_search(closure.begin(), closure.end(), e.tid))
          persisted.insert(e.sid);
        else
          unpersisted.insert(e.sid);
      }
    }
    r.persisted_sids.assign(persisted.begin(), persisted.end());
    r.unpersisted_sids.assign(unpersisted.begin(), unpersisted.end());
    reports.push_back(std::move(r));
  }
  return reports;
}

std::vector<Cluster> cluster(const std::vector<BugReport>& reports) {
  std::map<std::pair<std::string, std::uint64_t>, Cluster> grouped;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const BugReport& r = reports[i];
    std::uint64_t h = fnv1a64(r.path);
    Cluster& c = grouped[{r.crashed_op_kind, h}];
    if (c.members.empty()) {
      c.op_kind = r.crashed_op_kind;
      c.path_hash = h;
      c.representative = i;
    }
    c.members.push_back(i);
    if (r.plan.fence_tid < reports[c.representative].plan.fence_tid)
      c.representative = i;
  }
  std::vector<Cluster> out;
  for (auto& [key, c] : grouped) out.push_back(std::move(c));
  std::sort(out.begin(), out.end(), [&](const Cluster& a, const Cluster& b) {
    if (a.op_kind != b.op_kind) return a.op_kind < b.op_kind;
    if (a.path_hash != b.path_hash) return a.path_hash < b.path_hash;
    return reports[a.representative].plan.fence_tid <
           reports[b.representative].plan.fence_tid;
  });
  return out;
}

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ',';
    out += items[i];
  }
  return out;
}

std::string hex16(std::uint64_t v) {
  static const char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::string describe_invariant(const InvariantSet& invs, std::size_t index) {
  const Invariant& inv = invs.invariants[index];
  std::string out = invariant_id(index);
  out += ' ';
  out += rule_name(inv.rule);
  if (inv.rule == Rule::RA1) {
    out += " AP(" + inv.first_sid + "," + inv.second_sid + ")";
  } else {
    out += " P(" + inv.first_sid + ") < W(" + inv.second_sid + ")";
  }
  return out;
}

}  // namespace

std::string render_text(const std::vector<Cluster>& clusters,
                        const std::vector<BugReport>& reports,
                        const InvariantSet& invs) {
  if (clusters.empty()) return "0 bugs\n";
  std::string out = std::to_string(clusters.size()) + " bug cluster" +
                    (clusters.size() == 1 ? "" : "s") + ", " +
                    std::to_string(reports.size()) + " divergent image" +
                    (reports.size() == 1 ? "" : "s") + "\n";
  for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
    const Cluster& c = clusters[ci];
    const BugReport& r = reports[c.representative];
    out += "\ncluster " + std::to_string(ci + 1) + ": op=" + c.op_kind +
           " path=" + hex16(c.path_hash) + " members=" + std::to_string(c.members.size()) +
           "\n";
    out += "  fence=" + std::to_string(r.plan.fence_tid) + " extra=" +
           (r.plan.extra_store ? std::to_string(*r.plan.extra_store) : "-") + "\n";
    out += "  violated:";
    for (std::size_t idx : r.plan.violated) out += " " + describe_invariant(invs, idx);
    out += "\n";
    out += "  persisted=[" + join(r.persisted_sids) + "] unpersisted=[" +
           join(r.unpersisted_sids) + "]\n";
    out += "  observed=[" + join(r.observed) + "]\n";
    out += "  oracles: committed=[" + join(r.oracle_committed) + "] rolledback=[" +
           join(r.oracle_rolledback) + "]\n";
  }
  return out;
}

std::string render_json(const std::vector<Cluster>& clusters,
                        const std::vector<BugReport>& reports,
                        const InvariantSet& invs) {
  nlohmann::ordered_json doc;
  doc["clusters"] = nlohmann::ordered_json::array();
  for (const Cluster& c : clusters) {
    const BugReport& r = reports[c.representative];
    nlohmann::ordered_json rep;
    rep["fence"] = r.plan.fence_tid;
    rep["extra"] = r.plan.extra_store ? nlohmann::ordered_json(*r.plan.extra_store)
                                      : nlohmann::ordered_json(nullptr);
    rep["violated"] = nlohmann::ordered_json::array();
    for (std::size_t idx : r.plan.violated)
      rep["violated"].push_back(describe_invariant(invs, idx));
    rep["observed"] = r.observed;
    rep["oracles"] = {{"c", r.oracle_committed}, {"r", r.oracle_rolledback}};
    nlohmann::ordered_json jc;
    jc["op"] = c.op_kind;
    jc["path_hash"] = hex16(c.path_hash);
    jc["count"] = c.members.size();
    jc["representative"] = std::move(rep);
    doc["clusters"].push_back(std::move(jc));
  }
  return doc.dump(2) + "\n";
}

std::string render(const std::string& format, const std::vector<Cluster>& clusters,
                   const std::vector<BugReport>& reports, const InvariantSet& invs) {
  if (format == "text") return render_text(clusters, reports, invs);
  if (format == "json") return render_json(clusters, reports, invs);
  throw UsageError("unknown report format: " + format);
}

}  // namespace cw
