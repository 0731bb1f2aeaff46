#pragma once

// JSON interchange: derivations as {rule, conclusion: {env, subject, type,
// counters}, premises: [...]} with terms and types in surface syntax, plus
// trace and certificate encodings for the CLI.

#include <string>

#include "json.hpp"
#include "lamq/synth.hpp"

namespace lamq {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// derivations

inline json counters_to_json(System sys, const Counters& c) {
    if (sys == System::V) return json::array({c.b, c.sz});
    return json::array({c.b, c.m, c.sz});
}

inline json derivation_to_json(System sys, const DerivPtr& d) {
    const Judgement& j = d->conclusion;
    json env = json::object();
    for (const auto& [x, m] : j.env.m) env[x] = print_multi(m);
    json node;
    node["rule"] = rule_name(d->rule);
    node["conclusion"] = {{"env", env},
                          {"subject", print_subject(j.subject)},
                          {"type", print_assigned(j.assigned)},
                          {"counters", counters_to_json(sys, j.counters)}};
    json prems = json::array();
    for (const auto& p : d->premises) prems.push_back(derivation_to_json(sys, p));
    node["premises"] = std::move(prems);
    return node;
}

struct DerivationDocument {
    System system;
    DerivPtr derivation;
};

struct JsonFormatError : std::runtime_error {
    explicit JsonFormatError(const std::string& m) : std::runtime_error("derivation json: " + m) {}
};

namespace detail {

inline Subject subject_from_string(const std::string& s) {
    size_t i = 0;
    while (i < s.size() && isspace((unsigned char)s[i])) ++i;
    if (i < s.size() && s[i] == '[') return parse_state(s);
    Configuration c = parse_config(s);
    if (c.state.binds.empty() && s.find('|') == std::string::npos) return c.term;
    return c;
}

inline Assigned assigned_from_string(const std::string& s) {
    detail::TypeParser p(s);
    auto a = p.parse_assigned();
    switch (a.kind) {
        case detail::TypeParser::AssignedKind::Plain: return a.ty;
        case detail::TypeParser::AssignedKind::StateT: return a.st;
        case detail::TypeParser::AssignedKind::ConfigT: return a.cfg;
    }
    throw JsonFormatError("unparseable type");
}

inline DerivPtr derivation_from_json_rec(System sys, const json& node) {
    if (!node.is_object()) throw JsonFormatError("node must be an object");
    auto rule = rule_from_name(node.at("rule").get<std::string>());
    if (!rule) throw JsonFormatError("unknown rule '" + node.at("rule").get<std::string>() + "'");
    const json& c = node.at("conclusion");
    Judgement j;
    for (const auto& [x, m] : c.at("env").items()) {
        Multi mu = parse_multi(m.get<std::string>());
        if (!multi_empty(mu)) j.env.m[x] = std::move(mu);
    }
    j.subject = subject_from_string(c.at("subject").get<std::string>());
    j.assigned = assigned_from_string(c.at("type").get<std::string>());
    const json& cnt = c.at("counters");
    if (sys == System::V) {
        if (cnt.size() != 2) throw JsonFormatError("V counters must be [b, s]");
        j.counters = {cnt[0].get<std::uint64_t>(), 0, cnt[1].get<std::uint64_t>()};
    } else {
        if (cnt.size() != 3) throw JsonFormatError("GS counters must be [b, m, d]");
        j.counters = {cnt[0].get<std::uint64_t>(), cnt[1].get<std::uint64_t>(), cnt[2].get<std::uint64_t>()};
    }
    std::vector<DerivPtr> prems;
    for (const auto& p : node.at("premises")) prems.push_back(derivation_from_json_rec(sys, p));
    return mk_deriv(*rule, std::move(j), std::move(prems));
}

}  // namespace detail

// The system is read off the root counters: two components for V, three for
// GS.
inline DerivationDocument derivation_from_json(const json& doc) {
    const json& cnt = doc.at("conclusion").at("counters");
    System sys = cnt.size() == 2 ? System::V : System::GS;
    return {sys, detail::derivation_from_json_rec(sys, doc)};
}

inline DerivationDocument derivation_from_json_text(const std::string& text) {
    return derivation_from_json(json::parse(text));
}

// ---------------------------------------------------------------------------
// traces and certificates

inline json trace_to_json(const EvalResultCbv& r) {
    json steps = json::array();
    for (size_t i = 1; i < r.trace.size(); ++i)
        steps.push_back({{"label", "beta"}, {"term", print_term(r.trace[i])}});
    return {{"initial", print_term(r.trace.front())},
            {"steps", std::move(steps)},
            {"result",
             {{"b", r.beta},
              {"m", 0},
              {"size", r.exhausted ? 0 : term_size(r.last)},
              {"final", r.exhausted ? "fuel-exhausted" : "normal"}}}};
}

inline json trace_to_json(const EvalResultGs& r) {
    json steps = json::array();
    for (const auto& s : r.trace.steps)
        steps.push_back({{"label", label_name(s.label)},
                         {"term", print_term(s.after.term)},
                         {"state", print_state(s.after.state)}});
    std::string final = r.exhausted ? "fuel-exhausted" : is_blocked(r.final) ? "blocked" : "normal";
    return {{"initial", print_config(r.trace.initial)},
            {"steps", std::move(steps)},
            {"result",
             {{"b", r.beta}, {"m", r.mem}, {"size", r.exhausted ? 0 : config_size(r.final)}, {"final", final}}}};
}

inline json certificate_to_json(const Certificate& c) {
    json pred = c.system == System::V ? json::array({c.predicted.b, c.predicted.sz})
                                      : json::array({c.predicted.b, c.predicted.m, c.predicted.sz});
    json obs = {{"b", c.observed.b},
                {"size", c.observed.normal_size},
                {"fuel_exhausted", c.observed.fuel_exhausted}};
    if (c.system == System::GS) {
        obs["m"] = c.observed.m;
        obs["blocked"] = c.observed.blocked;
    }
    json out = {{"system", c.system == System::V ? "cbv" : "gs"},
                {"predicted", std::move(pred)},
                {"observed", std::move(obs)},
                {"verdict", c.match ? "match" : "mismatch"}};
    if (!c.match) out["diff"] = c.detail;
    return out;
}

inline std::string certificate_to_text(const Certificate& c) {
    std::string out = "predicted ";
    out += c.system == System::V
               ? "(" + std::to_string(c.predicted.b) + ", " + std::to_string(c.predicted.sz) + ")"
               : "(" + std::to_string(c.predicted.b) + ", " + std::to_string(c.predicted.m) + ", " +
                     std::to_string(c.predicted.sz) + ")";
    out += ", observed b=" + std::to_string(c.observed.b);
    if (c.system == System::GS) out += " m=" + std::to_string(c.observed.m);
    out += " size=" + std::to_string(c.observed.normal_size);
    if (c.observed.fuel_exhausted) out += " (fuel exhausted)";
    if (c.observed.blocked) out += " (blocked)";
    out += c.match ? " -> match" : " -> MISMATCH: " + c.detail;
    return out;
}

}  // namespace lamq
