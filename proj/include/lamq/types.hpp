#pragma once

// Type grammars for both systems, sharing one representation: tight
// constants, multisets of value types, arrows, and the monadic layer
// (state, configuration and monadic types) used by the global-state system.
// Multisets are kept canonically sorted so equality is structural.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace lamq {

enum class TightConst { Vr, Ab, Neut };

enum class TypeKind { Tight, MultiT, Arrow, Monadic };

struct Type;
using TypePtr = std::shared_ptr<const Type>;

// Finite multiset of types; elems stay sorted under type_cmp.
struct Multi {
    std::vector<TypePtr> elems;
};

// Partial map from locations to multisets. A location mapped to the empty
// multiset is still in the domain.
struct StateType {
    std::map<std::string, Multi> entries;
};

struct ConfigType {
    TypePtr ty;  // never Monadic
    StateType state;
};

struct Type {
    TypeKind kind;
    TightConst tc{};    // Tight
    Multi multi;        // MultiT, or Arrow domain
    TypePtr cod;        // Arrow codomain
    StateType s_in;     // Monadic input
    ConfigType out;     // Monadic output
};

inline int type_cmp(const TypePtr& x, const TypePtr& y);

inline int multi_cmp(const Multi& a, const Multi& b) {
    size_t n = std::min(a.elems.size(), b.elems.size());
    for (size_t i = 0; i < n; ++i)
        if (int c = type_cmp(a.elems[i], b.elems[i])) return c;
    return a.elems.size() < b.elems.size() ? -1 : a.elems.size() > b.elems.size() ? 1 : 0;
}

inline int state_type_cmp(const StateType& a, const StateType& b) {
    auto ia = a.entries.begin(), ib = b.entries.begin();
    for (; ia != a.entries.end() && ib != b.entries.end(); ++ia, ++ib) {
        if (ia->first != ib->first) return ia->first < ib->first ? -1 : 1;
        if (int c = multi_cmp(ia->second, ib->second)) return c;
    }
    if (ia != a.entries.end()) return 1;
    if (ib != b.entries.end()) return -1;
    return 0;
}

inline int config_type_cmp(const ConfigType& a, const ConfigType& b) {
    if (int c = type_cmp(a.ty, b.ty)) return c;
    return state_type_cmp(a.state, b.state);
}

inline int type_cmp(const TypePtr& x, const TypePtr& y) {
    if (x.get() == y.get()) return 0;
    if (x->kind != y->kind) return (int)x->kind < (int)y->kind ? -1 : 1;
    switch (x->kind) {
        case TypeKind::Tight:
            return (int)x->tc < (int)y->tc ? -1 : (int)x->tc > (int)y->tc ? 1 : 0;
        case TypeKind::MultiT:
            return multi_cmp(x->multi, y->multi);
        case TypeKind::Arrow:
            if (int c = multi_cmp(x->multi, y->multi)) return c;
            return type_cmp(x->cod, y->cod);
        case TypeKind::Monadic:
            if (int c = state_type_cmp(x->s_in, y->s_in)) return c;
            return config_type_cmp(x->out, y->out);
    }
    return 0;
}

inline bool type_eq(const TypePtr& x, const TypePtr& y) { return type_cmp(x, y) == 0; }
inline bool multi_eq(const Multi& a, const Multi& b) { return multi_cmp(a, b) == 0; }
inline bool state_type_eq(const StateType& a, const StateType& b) { return state_type_cmp(a, b) == 0; }
inline bool config_type_eq(const ConfigType& a, const ConfigType& b) { return config_type_cmp(a, b) == 0; }

// ---------------------------------------------------------------------------
// constructors

inline TypePtr ty_tight(TightConst tc) {
    return std::make_shared<Type>(Type{TypeKind::Tight, tc, {}, nullptr, {}, {}});
}
inline TypePtr ty_vr() { return ty_tight(TightConst::Vr); }
inline TypePtr ty_ab() { return ty_tight(TightConst::Ab); }
inline TypePtr ty_neut() { return ty_tight(TightConst::Neut); }

inline Multi mk_multi(std::vector<TypePtr> elems) {
    std::sort(elems.begin(), elems.end(), [](const TypePtr& a, const TypePtr& b) { return type_cmp(a, b) < 0; });
    return Multi{std::move(elems)};
}

inline TypePtr ty_multi(Multi m) {
    return std::make_shared<Type>(Type{TypeKind::MultiT, {}, std::move(m), nullptr, {}, {}});
}
inline TypePtr ty_arrow(Multi dom, TypePtr cod) {
    return std::make_shared<Type>(Type{TypeKind::Arrow, {}, std::move(dom), std::move(cod), {}, {}});
}
inline TypePtr ty_monadic(StateType in, ConfigType out) {
    return std::make_shared<Type>(Type{TypeKind::Monadic, {}, {}, nullptr, std::move(in), std::move(out)});
}

// ---------------------------------------------------------------------------
// multiset algebra

inline Multi multi_union(const Multi& a, const Multi& b) {
    std::vector<TypePtr> elems = a.elems;
    elems.insert(elems.end(), b.elems.begin(), b.elems.end());
    return mk_multi(std::move(elems));
}

inline bool multi_empty(const Multi& m) { return m.elems.empty(); }

// a \ b as multisets; throws if b is not contained in a.
inline Multi multi_minus(const Multi& a, const Multi& b) {
    Multi out = a;
    for (const auto& e : b.elems) {
        auto it = std::find_if(out.elems.begin(), out.elems.end(),
                               [&](const TypePtr& x) { return type_eq(x, e); });
        if (it == out.elems.end()) throw std::runtime_error("multi_minus: element not present");
        out.elems.erase(it);
    }
    return out;
}

inline bool multi_contains(const Multi& a, const Multi& b) {
    Multi rest = a;
    for (const auto& e : b.elems) {
        auto it = std::find_if(rest.elems.begin(), rest.elems.end(),
                               [&](const TypePtr& x) { return type_eq(x, e); });
        if (it == rest.elems.end()) return false;
        rest.elems.erase(it);
    }
    return true;
}

// ---------------------------------------------------------------------------
// typing environments: total maps defaulting to []; only nonempty entries stored

struct TypeEnv {
    std::map<std::string, Multi> m;

    Multi get(const std::string& x) const {
        auto it = m.find(x);
        return it == m.end() ? Multi{} : it->second;
    }
    std::set<std::string> dom() const {
        std::set<std::string> out;
        for (const auto& [k, v] : m) out.insert(k);
        return out;
    }
};

inline bool env_eq(const TypeEnv& a, const TypeEnv& b) {
    if (a.m.size() != b.m.size()) return false;
    auto ia = a.m.begin(), ib = b.m.begin();
    for (; ia != a.m.end(); ++ia, ++ib)
        if (ia->first != ib->first || !multi_eq(ia->second, ib->second)) return false;
    return true;
}

inline TypeEnv env_union(const TypeEnv& a, const TypeEnv& b) {
    TypeEnv out = a;
    for (const auto& [x, mu] : b.m) {
        auto it = out.m.find(x);
        if (it == out.m.end())
            out.m[x] = mu;
        else
            it->second = multi_union(it->second, mu);
    }
    return out;
}

inline TypeEnv env_remove(const TypeEnv& g, const std::string& x) {
    TypeEnv out = g;
    out.m.erase(x);
    return out;
}

inline TypeEnv env_single(const std::string& x, Multi m) {
    TypeEnv out;
    if (!multi_empty(m)) out.m[x] = std::move(m);
    return out;
}

// ---------------------------------------------------------------------------
// state type algebra

inline std::set<std::string> state_type_dom(const StateType& s) {
    std::set<std::string> out;
    for (const auto& [l, m] : s.entries) out.insert(l);
    return out;
}

inline StateType state_type_union(const StateType& a, const StateType& b) {
    StateType out = a;
    for (const auto& [l, m] : b.entries) {
        auto it = out.entries.find(l);
        if (it == out.entries.end())
            out.entries[l] = m;
        else
            it->second = multi_union(it->second, m);
    }
    return out;
}

inline StateType state_type_single(const std::string& l, Multi m) {
    StateType out;
    out.entries[l] = std::move(m);
    return out;
}

inline StateType state_type_remove(const StateType& s, const std::string& l) {
    StateType out = s;
    out.entries.erase(l);
    return out;
}

// ---------------------------------------------------------------------------
// tightness

inline bool is_tight_type(const TypePtr& t) { return t->kind == TypeKind::Tight; }

inline bool is_tight_multi(const Multi& m) {
    for (const auto& e : m.elems)
        if (!is_tight_type(e)) return false;
    return true;
}

inline bool is_tight_env(const TypeEnv& g) {
    for (const auto& [x, m] : g.m)
        if (!is_tight_multi(m)) return false;
    return true;
}

inline bool is_tight_state_type(const StateType& s) {
    for (const auto& [l, m] : s.entries)
        if (!is_tight_multi(m)) return false;
    return true;
}

inline bool is_tight_config_type(const ConfigType& k) {
    return is_tight_type(k.ty) && is_tight_state_type(k.state);
}

// A monadic type S => k is tight iff k is tight.
inline bool is_tight_monadic(const TypePtr& t) {
    return t->kind == TypeKind::Monadic && is_tight_config_type(t->out);
}

// ---------------------------------------------------------------------------
// well-formedness per system

enum class System { V, GS };

// Returns an explanation for the first violation, empty if well formed.
// V types never contain monadic nodes and arrows return types; GS arrows
// return monadic types. In both systems multisets hold value types only,
// so neither `n` nor a monadic type may sit inside a multiset.
inline std::string wf_type(System sys, const TypePtr& t);

inline std::string wf_multi(System sys, const Multi& m) {
    for (const auto& e : m.elems) {
        if (e->kind == TypeKind::Tight && e->tc == TightConst::Neut)
            return "multiset contains the neutral constant";
        if (e->kind == TypeKind::Monadic) return "multiset contains a monadic type";
        if (auto r = wf_type(sys, e); !r.empty()) return r;
    }
    return {};
}

inline std::string wf_state_type(System sys, const StateType& s) {
    if (sys == System::V) return "state type in system V";
    for (const auto& [l, m] : s.entries)
        if (auto r = wf_multi(sys, m); !r.empty()) return r;
    return {};
}

inline std::string wf_type(System sys, const TypePtr& t) {
    switch (t->kind) {
        case TypeKind::Tight:
            return {};
        case TypeKind::MultiT:
            return wf_multi(sys, t->multi);
        case TypeKind::Arrow: {
            if (auto r = wf_multi(sys, t->multi); !r.empty()) return r;
            if (sys == System::GS && t->cod->kind != TypeKind::Monadic)
                return "GS arrow codomain must be monadic";
            if (sys == System::V && t->cod->kind == TypeKind::Monadic)
                return "V arrow codomain cannot be monadic";
            return wf_type(sys, t->cod);
        }
        case TypeKind::Monadic: {
            if (sys == System::V) return "monadic type in system V";
            if (auto r = wf_state_type(sys, t->s_in); !r.empty()) return r;
            if (t->out.ty->kind == TypeKind::Monadic) return "configuration type holds a monadic type";
            if (auto r = wf_type(sys, t->out.ty); !r.empty()) return r;
            return wf_state_type(sys, t->out.state);
        }
    }
    return {};
}

inline std::string wf_env(System sys, const TypeEnv& g) {
    for (const auto& [x, m] : g.m)
        if (auto r = wf_multi(sys, m); !r.empty()) return r;
    return {};
}

// ---------------------------------------------------------------------------
// printing (surface syntax: vr, ab, n, [..], [..] -> d, {l: [..]}, t x S, S => k)

inline std::string print_type(const TypePtr& t);

inline std::string print_multi(const Multi& m) {
    std::string out = "[";
    for (size_t i = 0; i < m.elems.size(); ++i) {
        if (i) out += ", ";
        out += print_type(m.elems[i]);
    }
    return out + "]";
}

inline std::string print_state_type(const StateType& s) {
    std::string out = "{";
    bool first = true;
    for (const auto& [l, m] : s.entries) {
        if (!first) out += ", ";
        first = false;
        out += l + ": " + print_multi(m);
    }
    return out + "}";
}

inline std::string print_config_type(const ConfigType& k) {
    std::string left = print_type(k.ty);
    if (k.ty->kind == TypeKind::Arrow) left = "(" + left + ")";
    return left + " x " + print_state_type(k.state);
}

inline std::string print_type(const TypePtr& t) {
    switch (t->kind) {
        case TypeKind::Tight:
            switch (t->tc) {
                case TightConst::Vr: return "vr";
                case TightConst::Ab: return "ab";
                case TightConst::Neut: return "n";
            }
            return "?";
        case TypeKind::MultiT:
            return print_multi(t->multi);
        case TypeKind::Arrow:
            return print_multi(t->multi) + " -> " + print_type(t->cod);
        case TypeKind::Monadic:
            return print_state_type(t->s_in) + " => " + print_config_type(t->out);
    }
    return "?";
}

// ---------------------------------------------------------------------------
// type parsing

struct TypeParseError : std::runtime_error {
    explicit TypeParseError(const std::string& m) : std::runtime_error("type syntax: " + m) {}
};

namespace detail {

class TypeParser {
public:
    explicit TypeParser(const std::string& src) : src_(src) {}

    // A judgement's assigned entity: plain type, monadic type, state type or
    // configuration type, disambiguated by shape.
    enum class AssignedKind { Plain, StateT, ConfigT };

    struct Assigned {
        AssignedKind kind;
        TypePtr ty;      // Plain (possibly monadic)
        StateType st;    // StateT
        ConfigType cfg;  // ConfigT
    };

    Assigned parse_assigned() {
        skip();
        Assigned out{};
        if (peek() == '{') {
            StateType s = parse_state_type();
            skip();
            if (match("=>")) {
                ConfigType k = parse_config_type();
                out.kind = AssignedKind::Plain;
                out.ty = ty_monadic(std::move(s), std::move(k));
            } else {
                out.kind = AssignedKind::StateT;
                out.st = std::move(s);
            }
        } else {
            TypePtr t = parse_simple();
            skip();
            if (peek_word("x")) {
                consume_word("x");
                StateType s = parse_state_type();
                out.kind = AssignedKind::ConfigT;
                out.cfg = ConfigType{t, std::move(s)};
            } else {
                out.kind = AssignedKind::Plain;
                out.ty = t;
            }
        }
        skip();
        if (pos_ != src_.size()) throw TypeParseError("trailing input in '" + src_ + "'");
        return out;
    }

    TypePtr parse_type_all() {
        TypePtr t = parse_type();
        skip();
        if (pos_ != src_.size()) throw TypeParseError("trailing input in '" + src_ + "'");
        return t;
    }

    Multi parse_multi_all() {
        Multi m = parse_multi();
        skip();
        if (pos_ != src_.size()) throw TypeParseError("trailing input in '" + src_ + "'");
        return m;
    }

private:
    TypePtr parse_type() {
        skip();
        if (peek() == '{') {
            StateType s = parse_state_type();
            skip();
            if (!match("=>")) throw TypeParseError("expected '=>' after state type");
            ConfigType k = parse_config_type();
            return ty_monadic(std::move(s), std::move(k));
        }
        return parse_simple();
    }

    TypePtr parse_simple() {
        skip();
        if (peek() == '[') {
            Multi m = parse_multi();
            skip();
            if (match("->")) {
                TypePtr cod = parse_type();
                return ty_arrow(std::move(m), std::move(cod));
            }
            return ty_multi(std::move(m));
        }
        std::string w = parse_word();
        if (w == "vr") return ty_vr();
        if (w == "ab") return ty_ab();
        if (w == "n") return ty_neut();
        throw TypeParseError("unknown type constant '" + w + "'");
    }

    ConfigType parse_config_type() {
        TypePtr t;
        skip();
        if (peek() == '(') {
            ++pos_;
            t = parse_type();
            skip();
            if (peek() != ')') throw TypeParseError("expected ')'");
            ++pos_;
        } else {
            t = parse_simple();
        }
        skip();
        consume_word("x");
        StateType s = parse_state_type();
        return ConfigType{t, std::move(s)};
    }

    Multi parse_multi() {
        skip();
        if (peek() != '[') throw TypeParseError("expected '['");
        ++pos_;
        std::vector<TypePtr> elems;
        skip();
        if (peek() == ']') {
            ++pos_;
            return mk_multi({});
        }
        for (;;) {
            elems.push_back(parse_type());
            skip();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            break;
        }
        if (peek() != ']') throw TypeParseError("expected ']'");
        ++pos_;
        return mk_multi(std::move(elems));
    }

    StateType parse_state_type() {
        skip();
        if (peek() != '{') throw TypeParseError("expected '{'");
        ++pos_;
        StateType s;
        skip();
        if (peek() == '}') {
            ++pos_;
            return s;
        }
        for (;;) {
            std::string l = parse_word();
            skip();
            if (peek() != ':') throw TypeParseError("expected ':' in state type");
            ++pos_;
            Multi m = parse_multi();
            if (s.entries.count(l)) throw TypeParseError("duplicate location '" + l + "' in state type");
            s.entries[l] = std::move(m);
            skip();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            break;
        }
        skip();
        if (peek() != '}') throw TypeParseError("expected '}'");
        ++pos_;
        return s;
    }

    char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }

    void skip() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n')) ++pos_;
    }

    bool match(const std::string& s) {
        skip();
        if (src_.compare(pos_, s.size(), s) == 0) {
            pos_ += s.size();
            return true;
        }
        return false;
    }

    std::string parse_word() {
        skip();
        size_t start = pos_;
        while (pos_ < src_.size() && (isalnum((unsigned char)src_[pos_]) || src_[pos_] == '_')) ++pos_;
        if (start == pos_) throw TypeParseError("expected identifier in '" + src_ + "'");
        return src_.substr(start, pos_ - start);
    }

    bool peek_word(const std::string& w) {
        size_t save = pos_;
        skip();
        size_t start = pos_;
        while (pos_ < src_.size() && (isalnum((unsigned char)src_[pos_]) || src_[pos_] == '_')) ++pos_;
        bool ok = src_.substr(start, pos_ - start) == w;
        pos_ = save;
        return ok;
    }

    void consume_word(const std::string& w) {
        skip();
        size_t start = pos_;
        while (pos_ < src_.size() && (isalnum((unsigned char)src_[pos_]) || src_[pos_] == '_')) ++pos_;
        if (src_.substr(start, pos_ - start) != w) throw TypeParseError("expected '" + w + "'");
    }

    const std::string src_;
    size_t pos_ = 0;
};

}  // namespace detail

inline TypePtr parse_type(const std::string& src) { return detail::TypeParser(src).parse_type_all(); }
inline Multi parse_multi(const std::string& src) { return detail::TypeParser(src).parse_multi_all(); }

}  // namespace lamq
