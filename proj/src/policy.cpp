#include "wb/policy.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "wb/errors.hpp"

namespace wb {

namespace {

struct Lexer {
  const std::string& text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }

  bool done() {
    skip_ws();
    return pos >= text.size();
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("policy: " + what + " at position " + std::to_string(pos + 1) +
                     " in '" + text + "'");
  }

  std::string identifier() {
    skip_ws();
    const std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) {
      ++pos;
    }
    if (pos == start) fail("expected a column name");
    return text.substr(start, pos - start);
  }

  PolicyRule::Op op() {
    skip_ws();
    auto two = [&](char a, char b) {
      return pos + 1 < text.size() && text[pos] == a && text[pos + 1] == b;
    };
    if (two('<', '=')) { pos += 2; return PolicyRule::Op::Le; }
    if (two('>', '=')) { pos += 2; return PolicyRule::Op::Ge; }
    if (two('=', '=')) { pos += 2; return PolicyRule::Op::Eq; }
    if (pos < text.size() && text[pos] == '<') { ++pos; return PolicyRule::Op::Lt; }
    if (pos < text.size() && text[pos] == '>') { ++pos; return PolicyRule::Op::Gt; }
    fail("expected a comparison operator (<=, <, >=, >, ==)");
  }

  double number() {
    skip_ws();
    const char* first = text.data() + pos;
    const char* last = text.data() + text.size();
    double value = 0.0;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr == first) fail("expected a numeric constant");
    pos = static_cast<std::size_t>(res.ptr - text.data());
    return value;
  }

  bool consume(char c) {
    skip_ws();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
};

const char* op_text(PolicyRule::Op op) {
  switch (op) {
    case PolicyRule::Op::Le: return "<=";
    case PolicyRule::Op::Lt: return "<";
    case PolicyRule::Op::Ge: return ">=";
    case PolicyRule::Op::Gt: return ">";
    case PolicyRule::Op::Eq: return "==";
  }
  return "?";
}

bool compare(double lhs, PolicyRule::Op op, double rhs) {
  switch (op) {
    case PolicyRule::Op::Le: return lhs <= rhs;
    case PolicyRule::Op::Lt: return lhs < rhs;
    case PolicyRule::Op::Ge: return lhs >= rhs;
    case PolicyRule::Op::Gt: return lhs > rhs;
    case PolicyRule::Op::Eq: return lhs == rhs;
  }
  return false;
}

std::string format_threshold(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

PolicyRule PolicyRule::parse(const std::string& text) {
  Lexer lex{text};
  if (lex.done()) throw ParseError("policy: empty expression");

  PolicyRule rule;
  // "col:binary" form.
  {
    Lexer probe = lex;
    const std::string name = probe.identifier();
    if (probe.consume(':')) {
      const std::string tag = probe.identifier();
      if (tag != "binary") probe.fail("expected 'binary' after ':'");
      if (!probe.done()) probe.fail("unexpected trailing text");
      rule.binary_binding_ = true;
      rule.binary_column_ = name;
      return rule;
    }
  }

  for (;;) {
    Atom atom;
    atom.column = lex.identifier();
    atom.op = lex.op();
    atom.threshold = lex.number();
    rule.atoms_.push_back(atom);
    if (lex.done()) break;
    if (!lex.consume('&')) lex.fail("expected '&' between conditions");
    if (lex.done()) lex.fail("dangling '&'");
  }
  return rule;
}

std::string PolicyRule::pretty_print() const {
  if (binary_binding_) return binary_column_ + ":binary";
  std::string out;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (i > 0) out += " & ";
    out += atoms_[i].column;
    out += " ";
    out += op_text(atoms_[i].op);
    out += " ";
    out += format_threshold(atoms_[i].threshold);
  }
  return out;
}

void PolicyRule::bind(const Dataset& data) {
  if (binary_binding_) {
    binary_index_ = data.x_index(binary_column_);
    for (std::size_t i = 0; i < data.n(); ++i) {
      const double v = data.x_row(i)[binary_index_];
      if (v != 0.0 && v != 1.0) {
        throw DomainError("policy: column '" + binary_column_ +
                          "' is bound as binary but takes value " +
                          std::to_string(v) + " at row " + std::to_string(i + 1));
      }
    }
  } else {
    atom_index_.clear();
    atom_index_.reserve(atoms_.size());
    for (const auto& atom : atoms_) atom_index_.push_back(data.x_index(atom.column));
  }
  bound_ = true;
}

int PolicyRule::evaluate(std::span<const double> x) const {
  if (!bound_) throw ArgumentError("policy: evaluate() before bind()");
  if (binary_binding_) return x[binary_index_] == 1.0 ? 1 : 0;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (!compare(x[atom_index_[i]], atoms_[i].op, atoms_[i].threshold)) return 0;
  }
  return 1;
}

IndicatorVectors policy_indicators(const PolicyPair& pair, const Dataset& data) {
  PolicyPair bound = pair;
  bound.delta_star.bind(data);
  bound.delta.bind(data);
  IndicatorVectors out;
  out.theta10.resize(data.n());
  out.theta01.resize(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto x = data.x_row(i);
    const int a = bound.delta.evaluate(x);
    const int b = bound.delta_star.evaluate(x);
    out.theta10[i] = static_cast<std::uint8_t>(a == 1 && b == 0);
    out.theta01[i] = static_cast<std::uint8_t>(a == 0 && b == 1);
  }
  return out;
}

}  // namespace wb
