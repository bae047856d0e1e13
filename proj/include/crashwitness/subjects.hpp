// Shipped subject corpus:
//   mini-level-hash-buggy  4x4 bucket hash table with per-slot tokens; the
//                          insert persists the token before the key/value
//                          pair and the update flips two tokens one fence
//                          apart.
//   mini-level-hash-fixed  same table with both defects repaired: data is
//                          persisted before the token, and the update
//                          merges a bucket's tokens into one word store.
//   kv-log                 append-only guarded log, correct by design.
//   benign-rewrite         counter whose operations redundantly clear an
//                          already-zero field without flushing it.

#pragma once

#include "crashwitness/equivalence.hpp"

namespace cw {

std::vector<std::string> subject_names();
std::unique_ptr<Subject> make_subject(const std::string& name);
SubjectFactory subject_factory(const std::string& name);

// Store sites the seeded defects live at; tests key on these.
namespace sites {
inline const Sid kLhInsertKey = "lh.i.key";
inline const Sid kLhInsertVal = "lh.i.val";
inline const Sid kLhInsertTok = "lh.i.tok";
inline const Sid kLhUpdateTokOld = "lh.u.tok_old";
inline const Sid kLhUpdateTokNew = "lh.u.tok_new";
inline const Sid kLogCountWrite = "log.count_w";
inline const Sid kBenignMetaClear = "bn.meta_clear";
inline const Sid kBenignCountWrite = "bn.count_w";
}  // namespace sites

// Deterministic 64-bit mix used for bucket selection.
std::uint64_t mix64(std::uint64_t x);

}  // namespace cw
