// Line-oriented text serialization of execution traces.
//
//   POOL <pool_size> <cache_line>
//   S <tid> <sid> <addr> <len> <hex-bytes> NVM|DRAM d=[t1,t2,...] c=[...]
//   L <tid> <sid> <addr> <len> NVM|DRAM c=[...]
//   F <tid> <sid> <line-addr>
//   N <tid> <sid>
//   BB <tid> c=[...]   /  BE <tid>
//   OB <tid> <label>   /  OE <tid> <output>
//
// Hex is lowercase with no separators. The POOL header carries the pool
// geometry so a trace file stands on its own.

#pragma once

#include <string>

#include "crashwitness/pmem.hpp"

namespace cw {

std::string serialize_trace(const Trace& trace);

// Parses and validates. Throws TraceError on malformed input.
Trace parse_trace(const std::string& text);

}  // namespace cw
