#include "ozk/render.hpp"

#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "ozk/ast.hpp"

namespace ozk {

std::string atom_text(const std::string& name) {
  bool plain = !name.empty() && std::islower(static_cast<unsigned char>(name[0]));
  for (char c : name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') plain = false;
  static const std::unordered_set<std::string> reserved = {
      "proc", "fun",    "lazy",    "end",  "if",     "then",   "elseif", "else", "case",
      "of",   "elsecase", "choice", "thread", "local", "in",    "skip",   "fail", "declare",
      "div",  "mod",    "andthen", "orelse"};
  if (plain && !reserved.count(name)) return name;
  std::string out = "'";
  for (char c : name) {
    if (c == '\'' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('\'');
  return out;
}

namespace {

class Renderer {
 public:
  explicit Renderer(const Store& s) : store_(s) {}

  std::string run(Ref t) {
    std::string out;
    term(t, out, false);
    return out;
  }

 private:
  // A proper, acyclic list whose cells are not themselves referenced from
  // inside the chain renders in bracket form.
  bool bracket_list(Ref r, std::vector<Ref>& items) const {
    std::unordered_set<Ref> seen;
    items.clear();
    while (true) {
      r = store_.deref(r);
      if (store_.is_atom(r, atoms::nil())) return true;
      if (store_.tag(r) != Tag::Compound || store_.label(r) != atoms::cons() || store_.arity(r) != 2) return false;
      if (!seen.insert(r).second || on_path_.count(r)) return false;
      items.push_back(store_.arg(r, 0));
      r = store_.arg(r, 1);
    }
  }

  void term(Ref r, std::string& out, bool list_tail) {
    r = store_.deref(r);
    switch (store_.tag(r)) {
      case Tag::Var: {
        if (list_tail) {
          out += "_";
          return;
        }
        auto [it, fresh] = var_names_.emplace(r, var_names_.size() + 1);
        out += "_G" + std::to_string(it->second);
        return;
      }
      case Tag::Atom:
        out += atom_text(atom_name(store_.atom(r)));
        return;
      case Tag::Int: {
        std::int64_t v = store_.int_value(r);
        out += v < 0 ? "~" + std::to_string(-static_cast<std::uint64_t>(v) ) : std::to_string(v);
        return;
      }
      case Tag::Closure: {
        const ClosureData& c = store_.closure(r);
        out += "<P/" + std::to_string(c.arity);
        if (c.code && !c.code->name.empty()) out += " " + c.code->name;
        out += ">";
        return;
      }
      case Tag::Compound:
        break;
    }
    if (on_path_.count(r)) {
      auto [it, fresh] = labels_.emplace(r, labels_.size() + 1);
      out += "@" + std::to_string(it->second);
      return;
    }
    std::string body;
    std::vector<Ref> items;
    bool is_cons = store_.label(r) == atoms::cons() && store_.arity(r) == 2;
    bool done = false;
    if (is_cons && bracket_list(r, items)) {
      std::vector<Ref> cells;
      for (Ref c = r; store_.tag(c) == Tag::Compound; c = store_.deref(store_.arg(c, 1))) cells.push_back(c);
      for (Ref c : cells) on_path_.insert(c);
      body += "[";
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) body += " ";
        term(items[i], body, false);
      }
      body += "]";
      for (Ref c : cells) on_path_.erase(c);
      done = true;
      // An element refers back to a later cell: that cell needs a label.
      for (std::size_t i = 1; i < cells.size(); ++i)
        if (labels_.count(cells[i])) done = false;
      if (!done) body.clear();
    }
    on_path_.insert(r);
    if (done) {
    } else if (is_cons) {
      Ref head = store_.deref(store_.arg(r, 0));
      bool paren = store_.tag(head) == Tag::Compound && store_.label(head) == atoms::cons() &&
                   store_.arity(head) == 2 && !labels_.count(head) && !on_path_.count(head);
      std::vector<Ref> probe;
      if (paren && bracket_list(head, probe)) paren = false;
      if (paren) body += "(";
      term(head, body, false);
      if (paren) body += ")";
      body += "|";
      term(store_.arg(r, 1), body, true);
    } else {
      body += atom_text(atom_name(store_.label(r)));
      body += "(";
      for (std::uint32_t i = 0; i < store_.arity(r); ++i) {
        if (i) body += " ";
        term(store_.arg(r, i), body, false);
      }
      body += ")";
    }
    on_path_.erase(r);
    if (auto it = labels_.find(r); it != labels_.end()) out += "@" + std::to_string(it->second) + "=";
    out += body;
  }

  const Store& store_;
  std::unordered_set<Ref> on_path_;
  std::unordered_map<Ref, std::size_t> labels_;
  std::unordered_map<Ref, std::size_t> var_names_;
};

int rank(Tag t) {
  switch (t) {
    case Tag::Var:
      return 0;
    case Tag::Int:
      return 1;
    case Tag::Atom:
      return 2;
    case Tag::Compound:
      return 3;
    case Tag::Closure:
      return 4;
  }
  return 5;
}

int compare_rec(const Store& s, Ref a, Ref b, std::unordered_set<std::uint64_t>& seen) {
  a = s.deref(a);
  b = s.deref(b);
  if (a == b) return 0;
  Tag ta = s.tag(a), tb = s.tag(b);
  if (ta != tb) return rank(ta) < rank(tb) ? -1 : 1;
  switch (ta) {
    case Tag::Var: {
      VarId x = s.var_id(a), y = s.var_id(b);
      return x < y ? -1 : (y < x ? 1 : 0);
    }
    case Tag::Int: {
      auto x = s.int_value(a), y = s.int_value(b);
      return x < y ? -1 : (x > y ? 1 : 0);
    }
    case Tag::Atom: {
      int c = atom_name(s.atom(a)).compare(atom_name(s.atom(b)));
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    case Tag::Closure:
      return a < b ? -1 : 1;
    case Tag::Compound:
      break;
  }
  if (s.arity(a) != s.arity(b)) return s.arity(a) < s.arity(b) ? -1 : 1;
  if (s.label(a) != s.label(b)) {
    int c = atom_name(s.label(a)).compare(atom_name(s.label(b)));
    return c < 0 ? -1 : 1;
  }
  // Revisiting a pair means the cycles agree so far.
  std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | b;
  if (!seen.insert(key).second) return 0;
  for (std::uint32_t i = 0; i < s.arity(a); ++i) {
    int c = compare_rec(s, s.arg(a, i), s.arg(b, i), seen);
    if (c) return c;
  }
  return 0;
}

}  // namespace

std::string render(const Store& store, Ref term) { return Renderer(store).run(term); }

int compare_terms(const Store& store, Ref a, Ref b) {
  std::unordered_set<std::uint64_t> seen;
  return compare_rec(store, a, b, seen);
}

}  // namespace ozk
