#include "tamperled/policy.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace tamperled::policy {

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

bool Principal::matches(const Identity& id) const {
  if (ascii_lower(org) != ascii_lower(id.org)) return false;
  if (role == kAnyRole) return true;
  return role == static_cast<uint8_t>(id.role);
}

std::string Principal::to_string() const {
  std::string r = role == kAnyRole ? "any" : membership::role_name(membership::Role(role));
  return ascii_lower(org) + "." + r;
}

Result<Principal> parse_principal(std::string_view text) {
  auto dot = text.find('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 >= text.size())
    return Error(Err::ParseError, "principal must be org.role: " + std::string(text));
  Principal p;
  p.org = std::string(text.substr(0, dot));
  std::string role = ascii_lower(text.substr(dot + 1));
  if (role == "any") {
    p.role = Principal::kAnyRole;
  } else if (auto r = membership::role_from_name(role); r && *r != membership::Role::orderer) {
    // principal roles: any | admin | peer | client | device
    p.role = static_cast<uint8_t>(*r);
  } else {
    return Error(Err::ParseError, "unknown principal role: " + role);
  }
  return p;
}

EndorsementPolicy EndorsementPolicy::leaf(Principal p) {
  EndorsementPolicy e;
  e.kind = Kind::leaf;
  e.principal = std::move(p);
  return e;
}

EndorsementPolicy EndorsementPolicy::all_of(std::vector<EndorsementPolicy> cs) {
  EndorsementPolicy e;
  e.kind = Kind::all_of;
  e.children = std::move(cs);
  return e;
}

EndorsementPolicy EndorsementPolicy::any_of(std::vector<EndorsementPolicy> cs) {
  EndorsementPolicy e;
  e.kind = Kind::any_of;
  e.children = std::move(cs);
  return e;
}

EndorsementPolicy EndorsementPolicy::out_of(uint32_t n, std::vector<EndorsementPolicy> cs) {
  EndorsementPolicy e;
  e.kind = Kind::out_of;
  e.threshold = n;
  e.children = std::move(cs);
  return e;
}

std::string EndorsementPolicy::to_string() const {
  switch (kind) {
    case Kind::leaf:
      return principal.to_string();
    case Kind::all_of:
    case Kind::any_of:
    case Kind::out_of: {
      std::string s = kind == Kind::all_of ? "and(" : kind == Kind::any_of ? "or(" : "outof(";
      if (kind == Kind::out_of) s += std::to_string(threshold) + ", ";
      for (size_t i = 0; i < children.size(); ++i) {
        if (i > 0) s += ", ";
        s += children[i].to_string();
      }
      return s + ")";
    }
  }
  return "?";
}

namespace {

// Recursive-descent parser for: expr := leaf | and(expr,+) | or(expr,+)
// | outof(N, expr,+) ; leaf := org '.' role
class PolicyParser {
 public:
  explicit PolicyParser(std::string_view text) : text_(text) {}

  Result<EndorsementPolicy> parse() {
    auto e = expr();
    if (!e) return e;
    skip_ws();
    if (pos_ != text_.size())
      return Error(Err::ParseError, "trailing input after policy expression");
    return e;
  }

 private:
  Result<EndorsementPolicy> expr() {
    skip_ws();
    std::string tok = token();
    if (tok.empty()) return Error(Err::ParseError, "expected policy expression");
    std::string low = ascii_lower(tok);
    if (low == "and" || low == "or" || low == "outof") {
      if (!consume('(')) return Error(Err::ParseError, "expected ( after " + low);
      uint32_t n = 0;
      if (low == "outof") {
        skip_ws();
        std::string num = token();
        if (num.empty() || !std::all_of(num.begin(), num.end(),
                                        [](unsigned char c) { return std::isdigit(c); }))
          return Error(Err::ParseError, "outof needs a numeric threshold");
        n = static_cast<uint32_t>(std::stoul(num));
        if (!consume(',')) return Error(Err::ParseError, "expected , after threshold");
      }
      std::vector<EndorsementPolicy> children;
      while (true) {
        auto child = expr();
        if (!child) return child;
        children.push_back(std::move(child).value());
        skip_ws();
        if (consume(',')) continue;
        if (consume(')')) break;
        return Error(Err::ParseError, "expected , or ) in policy list");
      }
      if (children.empty()) return Error(Err::ParseError, low + " needs children");
      if (low == "and") return EndorsementPolicy::all_of(std::move(children));
      if (low == "or") return EndorsementPolicy::any_of(std::move(children));
      if (n < 1 || n > children.size())
        return Error(Err::ParseError, "outof threshold out of range");
      return EndorsementPolicy::out_of(n, std::move(children));
    }
    auto p = parse_principal(tok);
    if (!p) return p.error();
    return EndorsementPolicy::leaf(std::move(p).value());
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string token() {
    skip_ws();
    size_t start = pos_;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '(' || c == ')' || c == ',' || std::isspace(static_cast<unsigned char>(c)))
        break;
      ++pos_;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string_view text_;
  size_t pos_ = 0;
};

bool eval(const EndorsementPolicy& p, const std::vector<Identity>& endorsers) {
  switch (p.kind) {
    case EndorsementPolicy::Kind::leaf:
      return std::any_of(endorsers.begin(), endorsers.end(),
                         [&](const Identity& id) { return p.principal.matches(id); });
    case EndorsementPolicy::Kind::all_of:
      return std::all_of(p.children.begin(), p.children.end(),
                         [&](const EndorsementPolicy& c) { return eval(c, endorsers); });
    case EndorsementPolicy::Kind::any_of:
      return std::any_of(p.children.begin(), p.children.end(),
                         [&](const EndorsementPolicy& c) { return eval(c, endorsers); });
    case EndorsementPolicy::Kind::out_of: {
      uint32_t hits = 0;
      for (const auto& c : p.children)
        if (eval(c, endorsers) && ++hits >= p.threshold) return true;
      return false;
    }
  }
  return false;
}

}  // namespace

Result<EndorsementPolicy> parse_policy(std::string_view text) {
  return PolicyParser(text).parse();
}

bool evaluate_endorsement(const EndorsementPolicy& policy,
                          const std::vector<Identity>& endorsers) {
  // Collapse to one representative per (org, role).
  std::set<std::pair<std::string, membership::Role>> seen;
  std::vector<Identity> distinct;
  for (const auto& id : endorsers)
    if (seen.emplace(ascii_lower(id.org), id.role).second) distinct.push_back(id);
  return eval(policy, distinct);
}

Result<void> ChannelPolicySet::validate() const {
  if (admins.empty()) return Error(Err::InvalidConfig, "channel admins must be non-empty");
  return {};
}

bool check_channel_access(const ChannelPolicySet& policies, const Identity& identity,
                          Action action) {
  auto matches_any = [&](const std::vector<Principal>& ps) {
    return std::any_of(ps.begin(), ps.end(),
                       [&](const Principal& p) { return p.matches(identity); });
  };
  switch (action) {
    case Action::read:
      return matches_any(policies.readers);
    case Action::write:
      // admin implies write
      return matches_any(policies.writers) || matches_any(policies.admins);
    case Action::admin:
      return matches_any(policies.admins);
  }
  return false;
}

}  // namespace tamperled::policy
