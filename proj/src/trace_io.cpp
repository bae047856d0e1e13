#include "crashwitness/trace_io.hpp"

#include <charconv>
#include <sstream>

namespace cw {

namespace {

const char kHexDigits[] = "0123456789abcdef";

void append_tids(std::string& out, char tag, const std::vector<Tid>& tids) {
  out += tag;
  out += "=[";
  for (std::size_t i = 0; i < tids.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(tids[i]);
  }
  out += ']';
}

void append_hex(std::string& out, const std::vector<std::uint8_t>& bytes) {
  for (std::uint8_t b : bytes) {
    out += kHexDigits[b >> 4];
    out += kHexDigits[b & 0xf];
  }
}

class LineParser {
 public:
  LineParser(const std::string& line, std::size_t lineno)
      : line_(line), lineno_(lineno) {}

  std::string token() {
    while (pos_ < line_.size() && line_[pos_] == ' ') ++pos_;
    if (pos_ >= line_.size()) fail("missing token");
    std::size_t start = pos_;
    while (pos_ < line_.size() && line_[pos_] != ' ') ++pos_;
    return line_.substr(start, pos_ - start);
  }

  std::uint64_t number() {
    std::string t = token();
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size()) fail("bad number '" + t + "'");
    return v;
  }

  std::vector<std::uint8_t> hex_bytes(std::uint64_t len) {
    std::string t = token();
    if (t.size() != len * 2) fail("hex length mismatch");
    std::vector<std::uint8_t> out(len);
    for (std::uint64_t i = 0; i < len; ++i) {
      int hi = hex_digit(t[2 * i]);
      int lo = hex_digit(t[2 * i + 1]);
      if (hi < 0 || lo < 0) fail("bad hex byte");
      out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    return out;
  }

  Space space() {
    std::string t = token();
    if (t == "NVM") return Space::Nvm;
    if (t == "DRAM") return Space::Dram;
    fail("bad space '" + t + "'");
  }

  std::vector<Tid> tid_set(char tag) {
    std::string t = token();
    if (t.size() < 4 || t[0] != tag || t[1] != '=' || t[2] != '[' || t.back() != ']')
      fail(std::string("bad ") + tag + "= set");
    std::vector<Tid> out;
    std::size_t i = 3;
    while (i + 1 < t.size()) {
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(t.data() + i, t.data() + t.size() - 1, v);
      if (ec != std::errc{} || p == t.data() + i) fail("bad tid in set");
      out.push_back(v);
      i = static_cast<std::size_t>(p - t.data());
      if (i + 1 < t.size()) {
        if (t[i] != ',') fail("bad separator in tid set");
        ++i;
      }
    }
    return out;
  }

  void done() {
    while (pos_ < line_.size() && line_[pos_] == ' ') ++pos_;
    if (pos_ != line_.size()) fail("trailing garbage");
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw TraceError("trace line " + std::to_string(lineno_) + ": " + why);
  }

 private:
  int hex_digit(char c) const {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  }

  const std::string& line_;
  std::size_t lineno_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_trace(const Trace& trace) {
  std::string out;
  out.reserve(trace.events.size() * 48 + 32);
  out += "POOL " + std::to_string(trace.pool_size) + " " +
         std::to_string(trace.cache_line) + "\n";
  for (const TraceEvent& e : trace.events) {
    switch (e.kind) {
      case EventKind::Store:
        out += "S " + std::to_string(e.tid) + " " + e.sid + " " +
               std::to_string(e.addr) + " " + std::to_string(e.len) + " ";
        append_hex(out, e.bytes);
        out += e.space == Space::Nvm ? " NVM " : " DRAM ";
        append_tids(out, 'd', e.data_deps);
        out += ' ';
        append_tids(out, 'c', e.ctrl_deps);
        break;
      case EventKind::Load:
        out += "L " + std::to_string(e.tid) + " " + e.sid + " " +
               std::to_string(e.addr) + " " + std::to_string(e.len) +
               (e.space == Space::Nvm ? " NVM " : " DRAM ");
        append_tids(out, 'c', e.ctrl_deps);
        break;
      case EventKind::Flush:
        out += "F " + std::to_string(e.tid) + " " + e.sid + " " + std::to_string(e.addr);
        break;
      case EventKind::Fence:
        out += "N " + std::to_string(e.tid) + " " + e.sid;
        break;
      case EventKind::BranchBegin:
        out += "BB " + std::to_string(e.tid) + " ";
        append_tids(out, 'c', e.ctrl_deps);
        break;
      case EventKind::BranchEnd:
        out += "BE " + std::to_string(e.tid);
        break;
      case EventKind::OpBegin:
        out += "OB " + std::to_string(e.tid) + " " + e.text;
        break;
      case EventKind::OpEnd:
        out += "OE " + std::to_string(e.tid) + " " + e.text;
        break;
    }
    out += '\n';
  }
  return out;
}

Trace parse_trace(const std::string& text) {
  Trace trace;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    LineParser p(line, lineno);
    std::string tag = p.token();
    if (tag == "POOL") {
      if (have_header) p.fail("duplicate POOL header");
      trace.pool_size = p.number();
      std::uint64_t cl = p.number();
      if (cl == 0 || cl > 1u << 20) p.fail("bad cache line size");
      trace.cache_line = static_cast<std::uint32_t>(cl);
      p.done();
      have_header = true;
      continue;
    }
    if (!have_header) p.fail("missing POOL header");
    TraceEvent e;
    if (tag == "S") {
      e.kind = EventKind::Store;
      e.tid = p.number();
      e.sid = p.token();
      e.addr = p.number();
      e.len = p.number();
      e.bytes = p.hex_bytes(e.len);
      e.space = p.space();
      e.data_deps = p.tid_set('d');
      e.ctrl_deps = p.tid_set('c');
    } else if (tag == "L") {
      e.kind = EventKind::Load;
      e.tid = p.number();
      e.sid = p.token();
      e.addr = p.number();
      e.len = p.number();
      e.space = p.space();
      e.ctrl_deps = p.tid_set('c');
    } else if (tag == "F") {
      e.kind = EventKind::Flush;
      e.tid = p.number();
      e.sid = p.token();
      e.addr = p.number();
    } else if (tag == "N") {
      e.kind = EventKind::Fence;
      e.tid = p.number();
      e.sid = p.token();
    } else if (tag == "BB") {
      e.kind = EventKind::BranchBegin;
      e.tid = p.number();
      e.ctrl_deps = p.tid_set('c');
    } else if (tag == "BE") {
      e.kind = EventKind::BranchEnd;
      e.tid = p.number();
    } else if (tag == "OB") {
      e.kind = EventKind::OpBegin;
      e.tid = p.number();
      e.text = p.token();
    } else if (tag == "OE") {
      e.kind = EventKind::OpEnd;
      e.tid = p.number();
      e.text = p.token();
    } else {
      p.fail("unknown event tag '" + tag + "'");
    }
    p.done();
    trace.events.push_back(std::move(e));
  }
  if (!have_header) throw TraceError("trace has no POOL header");
  validate_trace(trace);
  return trace;
}

}  // namespace cw
