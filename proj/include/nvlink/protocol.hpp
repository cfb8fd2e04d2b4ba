#pragma once

// Pulse-sequence scripts: the instruction list a shot executes, the two
// standard entanglement sequences, and a small text syntax.
//
//   crc; init_e; mw(pi/2, pi/2, minus); optical_pi(early); mw(pi, 0, minus);
//   optical_pi(late); readout(xx)

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "nvlink/core/error.hpp"
#include "nvlink/nvmodel.hpp"
#include "nvlink/qcore.hpp"

namespace nvlink::protocol {

using nv::ElectronBranch;
using nv::NuclearPair;
using nv::TimeBin;
using qcore::Basis;

enum class Op { Crc, InitE, InitN, Mw, Rf, Cnot, OpticalPi, Wait, Readout };

struct Instruction {
  Op op = Op::InitE;
  double theta = 0.0;
  double phase = 0.0;
  ElectronBranch branch = ElectronBranch::Minus;
  NuclearPair pair = NuclearPair::Memory;
  int cond_ms = 0;   // rf: electron projection the RF line is resonant with
  int control = 0;   // cnot: nuclear m_I that triggers the electron flip
  TimeBin bin = TimeBin::Early;
  double duration = 0.0;
  Basis basis = Basis::ZZ;

  static Instruction crc() { return {Op::Crc}; }
  static Instruction init_e() { return {Op::InitE}; }
  static Instruction init_n() { return {Op::InitN}; }
  static Instruction mw(double theta, double phase, ElectronBranch b = ElectronBranch::Minus) {
    Instruction i{Op::Mw};
    i.theta = theta;
    i.phase = phase;
    i.branch = b;
    return i;
  }
  static Instruction rf(double theta, double phase, NuclearPair pair, int cond_ms) {
    Instruction i{Op::Rf};
    i.theta = theta;
    i.phase = phase;
    i.pair = pair;
    i.cond_ms = cond_ms;
    return i;
  }
  static Instruction cnot(int control, ElectronBranch b = ElectronBranch::Minus) {
    Instruction i{Op::Cnot};
    i.control = control;
    i.branch = b;
    return i;
  }
  static Instruction optical_pi(TimeBin bin) {
    Instruction i{Op::OpticalPi};
    i.bin = bin;
    return i;
  }
  static Instruction wait(double t) {
    Instruction i{Op::Wait};
    i.duration = t;
    return i;
  }
  static Instruction readout(Basis b) {
    Instruction i{Op::Readout};
    i.basis = b;
    return i;
  }
};

struct ProtocolScript {
  std::vector<Instruction> steps;

  bool uses_nuclear() const {
    for (const auto& s : steps) {
      if (s.op == Op::InitN || s.op == Op::Rf || (s.op == Op::Cnot)) return true;
    }
    return false;
  }
  bool has_crc() const { return !steps.empty() && steps.front().op == Op::Crc; }
  Basis basis() const { return steps.back().basis; }

  // Each photon bin at most once, readout last and only there, crc only first.
  void validate() const {
    if (steps.empty() || steps.back().op != Op::Readout) {
      throw ConfigError("protocol script must end with readout");
    }
    bool early = false;
    bool late = false;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const auto& s = steps[i];
      if (s.op == Op::Readout && i + 1 != steps.size()) throw ConfigError("readout must be the last step");
      if (s.op == Op::Crc && i != 0) throw ConfigError("crc may only open the script");
      if (s.op == Op::Wait && !(s.duration >= 0.0)) throw ConfigError("wait duration must be >= 0");
      if (s.op == Op::Rf && !(s.cond_ms >= -1 && s.cond_ms <= 1)) throw ConfigError("rf cond_ms must be -1, 0 or 1");
      if (s.op == Op::Cnot && !(s.control >= -1 && s.control <= 1)) throw ConfigError("cnot control must be -1, 0 or 1");
      if (s.op == Op::OpticalPi) {
        bool& used = s.bin == TimeBin::Early ? early : late;
        if (used) throw ConfigError("each photon time bin may be used only once");
        used = true;
      }
    }
  }

  ProtocolScript with_basis(Basis b) const {
    ProtocolScript out = *this;
    out.steps.back().basis = b;
    return out;
  }
};

// Electron-photon entanglement: ends in (|1,E> + |0,L>)/sqrt2 up to a global phase.
inline ProtocolScript electron_script(Basis basis = Basis::ZZ) {
  constexpr double pi = std::numbers::pi;
  return {{Instruction::crc(), Instruction::init_e(), Instruction::mw(pi / 2, pi / 2),
           Instruction::optical_pi(TimeBin::Early), Instruction::mw(pi, 0.0),
           Instruction::optical_pi(TimeBin::Late), Instruction::readout(basis)}};
}

// Nuclear-photon entanglement through the electron; the closing CNOT leaves the
// electron in |1> and the memory-photon pair in (|1,E> + |0,L>)/sqrt2.
inline ProtocolScript nuclear_script(Basis basis = Basis::ZZ) {
  constexpr double pi = std::numbers::pi;
  return {{Instruction::crc(), Instruction::init_n(), Instruction::init_e(),
           Instruction::rf(pi / 2, pi / 2, NuclearPair::Memory, 0), Instruction::cnot(0),
           Instruction::optical_pi(TimeBin::Early), Instruction::mw(pi, 0.0),
           Instruction::optical_pi(TimeBin::Late), Instruction::cnot(0), Instruction::readout(basis)}};
}

// ---------------------------------------------------------------------------
// Text syntax
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline double parse_number(const std::string& t) {
  double v = 0.0;
  const auto* end = t.data() + t.size();
  auto [p, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError("not a number: '" + t + "'");
  return v;
}

}  // namespace detail

// Angle literal: a number, or [-][k*]pi[/n] such as pi/2, -pi, 2*pi, 0.5pi.
inline double parse_angle(std::string_view text) {
  std::string t = detail::lower(detail::trim(text));
  if (t.empty()) throw ConfigError("empty angle");
  const auto pos = t.find("pi");
  if (pos == std::string::npos) return detail::parse_number(t);
  double sign = 1.0;
  std::string head = t.substr(0, pos);
  if (!head.empty() && head.front() == '-') {
    sign = -1.0;
    head.erase(0, 1);
  }
  if (!head.empty() && head.back() == '*') head.pop_back();
  const double k = head.empty() ? 1.0 : detail::parse_number(head);
  std::string tail = t.substr(pos + 2);
  double n = 1.0;
  if (!tail.empty()) {
    if (tail.front() != '/') throw ConfigError("bad angle: '" + t + "'");
    n = detail::parse_number(tail.substr(1));
    if (n == 0.0) throw ConfigError("angle divides by zero");
  }
  return sign * k * std::numbers::pi / n;
}

inline std::string format_angle(double v) {
  const double r = v / std::numbers::pi;
  for (int n : {1, 2, 4}) {
    const double k = r * n;
    if (std::abs(k - std::round(k)) < 1e-12) {
      const long ki = std::lround(k);
      if (ki == 0) return "0";
      std::string s = ki == 1 ? "pi" : ki == -1 ? "-pi" : fmt::format("{}*pi", ki);
      if (n != 1) s += fmt::format("/{}", n);
      return s;
    }
  }
  return fmt::format("{:.17g}", v);
}

namespace detail {

inline ElectronBranch parse_branch(const std::string& s) {
  if (s == "minus" || s == "-1") return ElectronBranch::Minus;
  if (s == "plus" || s == "+1" || s == "1") return ElectronBranch::Plus;
  throw ConfigError("unknown electron branch '" + s + "' (minus|plus)");
}

inline NuclearPair parse_pair(const std::string& s) {
  if (s == "memory") return NuclearPair::Memory;
  if (s == "upper") return NuclearPair::Upper;
  throw ConfigError("unknown nuclear pair '" + s + "' (memory|upper)");
}

inline int parse_int(const std::string& s) {
  const double v = parse_number(s);
  if (v != std::round(v)) throw ConfigError("expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

}  // namespace detail

inline Instruction parse_instruction(std::string_view text) {
  const std::string t = detail::lower(detail::trim(text));
  std::string name = t;
  std::vector<std::string> args;
  const auto open = t.find('(');
  if (open != std::string::npos) {
    if (t.back() != ')') throw ConfigError("missing ')' in '" + t + "'");
    name = detail::trim(t.substr(0, open));
    const std::string inner = t.substr(open + 1, t.size() - open - 2);
    std::stringstream ss(inner);
    std::string a;
    while (std::getline(ss, a, ',')) args.push_back(detail::trim(a));
    if (args.size() == 1 && args[0].empty()) args.clear();
  }
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (args.size() < lo || args.size() > hi) {
      throw ConfigError(fmt::format("'{}' takes {}..{} arguments, got {}", name, lo, hi, args.size()));
    }
  };
  if (name == "crc") { need(0, 0); return Instruction::crc(); }
  if (name == "init_e") { need(0, 0); return Instruction::init_e(); }
  if (name == "init_n_sequence" || name == "init_n") { need(0, 0); return Instruction::init_n(); }
  if (name == "mw") {
    need(2, 3);
    return Instruction::mw(parse_angle(args[0]), parse_angle(args[1]),
                           args.size() > 2 ? detail::parse_branch(args[2]) : ElectronBranch::Minus);
  }
  if (name == "rf") {
    need(4, 4);
    return Instruction::rf(parse_angle(args[0]), parse_angle(args[1]), detail::parse_pair(args[2]),
                           detail::parse_int(args[3]));
  }
  if (name == "cnot") {
    need(1, 2);
    return Instruction::cnot(detail::parse_int(args[0]),
                             args.size() > 1 ? detail::parse_branch(args[1]) : ElectronBranch::Minus);
  }
  if (name == "optical_pi") {
    need(1, 1);
    if (args[0] == "early") return Instruction::optical_pi(TimeBin::Early);
    if (args[0] == "late") return Instruction::optical_pi(TimeBin::Late);
    throw ConfigError("optical_pi bin must be early or late");
  }
  if (name == "wait") { need(1, 1); return Instruction::wait(detail::parse_number(args[0])); }
  if (name == "readout") {
    need(0, 1);
    if (args.empty() || args[0] == "zz") return Instruction::readout(Basis::ZZ);
    if (args[0] == "xx") return Instruction::readout(Basis::XX);
    throw ConfigError("readout basis must be zz or xx");
  }
  throw ConfigError("unknown instruction '" + name + "'");
}

inline ProtocolScript parse_script(std::string_view text) {
  ProtocolScript s;
  std::string cur;
  for (char c : text) {
    if (c == ';' || c == '\n') {
      if (!detail::trim(cur).empty()) s.steps.push_back(parse_instruction(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!detail::trim(cur).empty()) s.steps.push_back(parse_instruction(cur));
  s.validate();
  return s;
}

inline std::string to_string(const Instruction& i) {
  auto branch = [](ElectronBranch b) { return b == ElectronBranch::Minus ? "minus" : "plus"; };
  switch (i.op) {
    case Op::Crc: return "crc";
    case Op::InitE: return "init_e";
    case Op::InitN: return "init_n_sequence";
    case Op::Mw:
      return fmt::format("mw({}, {}, {})", format_angle(i.theta), format_angle(i.phase), branch(i.branch));
    case Op::Rf:
      return fmt::format("rf({}, {}, {}, {})", format_angle(i.theta), format_angle(i.phase),
                         i.pair == NuclearPair::Memory ? "memory" : "upper", i.cond_ms);
    case Op::Cnot: return fmt::format("cnot({}, {})", i.control, branch(i.branch));
    case Op::OpticalPi: return fmt::format("optical_pi({})", i.bin == TimeBin::Early ? "early" : "late");
    case Op::Wait: return fmt::format("wait({:.17g})", i.duration);
    case Op::Readout: return fmt::format("readout({})", i.basis == Basis::ZZ ? "zz" : "xx");
  }
  return {};
}

inline std::string to_string(const ProtocolScript& s) {
  std::string out;
  for (std::size_t i = 0; i < s.steps.size(); ++i) {
    if (i) out += "; ";
    out += to_string(s.steps[i]);
  }
  return out;
}

}  // namespace nvlink::protocol
