// Command-line front end: parse, evaluate, check, synthesize, verify and
// fuzz. Exit codes: 0 success/match, 1 check or verification failure,
// 2 usage/parse error, 3 fuel exhaustion.

#include <atomic>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "lamq/golden.hpp"
#include "lamq/harness.hpp"
#include "lamq/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitFuel = 3;

std::string read_input(const std::string& path) {
    if (path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        return ss.str();
    }
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

lamq::System parse_calculus(const std::string& s) {
    if (s == "cbv") return lamq::System::V;
    if (s == "gs") return lamq::System::GS;
    throw CLI::ValidationError("--calculus must be cbv or gs");
}

int cmd_parse(const std::string& file, const std::string& calculus) {
    using namespace lamq;
    std::string src = read_input(file);
    if (parse_calculus(calculus) == System::GS) {
        Configuration c = parse_config(src);
        require_gs_valid(c.term);
        std::cout << print_config(c) << "\n";
    } else {
        std::cout << print_term(parse_term(src)) << "\n";
    }
    return kExitOk;
}

int cmd_eval(const std::string& file, const std::string& calculus, std::uint64_t fuel,
             const std::string& format) {
    using namespace lamq;
    std::string src = read_input(file);
    if (parse_calculus(calculus) == System::V) {
        TermPtr t = parse_term(src);
        EvalResultCbv r = eval_cbv(t, fuel);
        if (format == "json") {
            std::cout << trace_to_json(r).dump(2) << "\n";
        } else {
            for (size_t i = 1; i < r.trace.size(); ++i)
                std::cout << "step " << i << " [beta] " << print_term(r.trace[i]) << "\n";
            if (r.exhausted) {
                std::cout << "RESULT fuel-exhausted after " << r.beta << " steps\n";
                return kExitFuel;
            }
            std::cout << "RESULT b=" << r.beta << " m=0 size=" << term_size(r.last) << " final=normal\n";
        }
        return r.exhausted ? kExitFuel : kExitOk;
    }
    Configuration c = parse_config(src);
    require_gs_valid(c.term);
    EvalResultGs r = eval_gs(c, fuel);
    if (format == "json") {
        std::cout << trace_to_json(r).dump(2) << "\n";
    } else {
        for (size_t i = 0; i < r.trace.steps.size(); ++i) {
            const auto& s = r.trace.steps[i];
            std::cout << "step " << i + 1 << " [" << label_name(s.label) << "] " << print_term(s.after.term)
                      << " | " << print_state(s.after.state) << "\n";
        }
        if (r.exhausted) {
            std::cout << "RESULT fuel-exhausted after " << r.beta + r.mem << " steps\n";
            return kExitFuel;
        }
        std::cout << "RESULT b=" << r.beta << " m=" << r.mem << " size=" << config_size(r.final)
                  << " final=" << (is_blocked(r.final) ? "blocked" : "normal") << "\n";
    }
    return r.exhausted ? kExitFuel : kExitOk;
}

int cmd_check(const std::string& file) {
    using namespace lamq;
    DerivationDocument doc = derivation_from_json_text(read_input(file));
    if (auto r = check_derivation(doc.system, doc.derivation)) {
        std::cerr << "rule violation at [";
        for (size_t i = 0; i < r->path.size(); ++i) std::cerr << (i ? "," : "") << r->path[i];
        std::cerr << "]: " << r->reason << "\n";
        return kExitFail;
    }
    std::cout << "ok (" << (doc.system == System::V ? "cbv" : "gs")
              << (is_tight_derivation(doc.derivation) ? ", tight)" : ", not tight)") << "\n";
    return kExitOk;
}

int cmd_synth(const std::string& file, const std::string& calculus, const std::string& out,
              std::uint64_t fuel, bool quiet) {
    using namespace lamq;
    std::string src = read_input(file);
    System sys = parse_calculus(calculus);
    DerivPtr d;
    if (sys == System::V) {
        SynthResultV r = synthesize_tight_v(parse_term(src), fuel);
        if (r.status == SynthResultV::Status::FuelExhausted) {
            std::cerr << "fuel exhausted; last term: " << print_term(r.last) << "\n";
            return kExitFuel;
        }
        d = r.derivation;
    } else {
        Configuration c = parse_config(src);
        require_gs_valid(c.term);
        SynthResultGs r = synthesize_tight_gs(c, fuel);
        if (r.status == SynthResultGs::Status::FuelExhausted) {
            std::cerr << "fuel exhausted; last configuration: " << print_config(r.last) << "\n";
            return kExitFuel;
        }
        if (r.status == SynthResultGs::Status::BlockedFinal) {
            std::cerr << "evaluation blocks at " << print_config(r.last)
                      << "; blocked configurations have no tight derivation\n";
            return kExitFail;
        }
        d = r.derivation;
    }
    json j = derivation_to_json(sys, d);
    if (out == "-" || out.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::ofstream os(out);
        os << j.dump(2) << "\n";
        if (!quiet) std::cout << render_derivation(sys, d);
    }
    return kExitOk;
}

int cmd_verify(const std::string& file, std::uint64_t fuel, const std::string& format) {
    using namespace lamq;
    DerivationDocument doc = derivation_from_json_text(read_input(file));
    if (auto r = check_derivation(doc.system, doc.derivation)) {
        std::cerr << "rule violation at [";
        for (size_t i = 0; i < r->path.size(); ++i) std::cerr << (i ? "," : "") << r->path[i];
        std::cerr << "]: " << r->reason << "\n";
        return kExitFail;
    }
    if (!is_tight_derivation(doc.derivation)) {
        std::cerr << "derivation is not tight; counters are not exact\n";
        return kExitFail;
    }
    Certificate cert = verify_soundness(doc.system, doc.derivation, fuel);
    if (format == "json")
        std::cout << certificate_to_json(cert).dump(2) << "\n";
    else
        std::cout << certificate_to_text(cert) << "\n";
    if (cert.observed.fuel_exhausted) return kExitFuel;
    return cert.match ? kExitOk : kExitFail;
}

// one fuzz worker: returns a failure description, empty on success
std::string fuzz_worker(lamq::GenConfig cfg, std::uint64_t count, std::uint64_t& discarded) {
    using namespace lamq;
    TermGen gen(cfg);
    for (std::uint64_t i = 0; i < count; ++i) {
        if (cfg.calculus == System::V) {
            TermPtr t = gen.next_term();
            using Pred = std::function<bool(const TermPtr&)>;
            auto diamond_fails = [](const TermPtr& u) {
                auto all = step_all_cbv(u);
                for (size_t a = 0; a < all.size(); ++a)
                    for (size_t b = a + 1; b < all.size(); ++b) {
                        if (term_eq(all[a], all[b])) continue;
                        bool join = false;
                        for (const auto& u1 : step_all_cbv(all[a]))
                            for (const auto& u2 : step_all_cbv(all[b])) join |= alpha_eq(u1, u2);
                        if (!join) return true;
                    }
                return false;
            };
            auto synth_fails = [](const TermPtr& u) {
                if (eval_cbv(u, kDefaultFuel).exhausted) return false;
                SynthResultV r = synthesize_tight_v(u, kDefaultFuel);
                if (r.status != SynthResultV::Status::Ok) return true;
                return check_derivation_v(r.derivation).has_value() ||
                       !verify_soundness(System::V, r.derivation).match ||
                       !validate_metatheory(System::V, r.derivation).all_pass();
            };
            std::vector<std::pair<const char*, Pred>> props = {
                {"print/parse round-trip",
                 [](const TermPtr& u) { return !alpha_eq(parse_term(print_term(u)), u); }},
                {"normal-form characterization",
                 [](const TermPtr& u) { return is_normal_cbv(u) != !step_cbv(u).has_value(); }},
                {"normality oracle",
                 [](const TermPtr& u) { return is_normal_cbv(u) != oracle_normal(u); }},
                {"deterministic step among one-step reducts",
                 [](const TermPtr& u) {
                     auto s = step_cbv(u);
                     if (!s) return false;
                     for (const auto& r : step_all_cbv(u))
                         if (term_eq(r, *s)) return false;
                     return true;
                 }},
                {"diamond property", diamond_fails},
            };
            if (cfg.normalizing_only) props.emplace_back("completeness/soundness round-trip", synth_fails);
            for (const auto& [name, fails] : props)
                if (fails(t))
                    return std::string(name) + " failed on: " + print_term(shrink_term(t, fails));
        } else {
            Configuration c = gen.next_config();
            if (!is_gs_valid(c.term)) return "generator produced a GS-invalid term: " + print_term(c.term);
            EvalResultGs r = eval_gs(c, kDefaultFuel);
            if (!r.exhausted && !is_final(r.final))
                return "evaluation stopped on a non-final configuration: " + print_config(c);
            if (!r.exhausted && step_gs(r.final))
                return "final configuration still steps: " + print_config(c);
            // trace replay
            Configuration cur = r.trace.initial;
            for (const auto& st : r.trace.steps) {
                auto n = step_gs(cur);
                if (!n || n->first != st.label || !alpha_eq(n->second, st.after))
                    return "trace replay diverged on: " + print_config(c);
                cur = st.after;
            }
            if (!r.exhausted) {
                SynthResultGs sr = synthesize_tight_gs(c, kDefaultFuel);
                if (is_blocked(r.final)) {
                    if (sr.status != SynthResultGs::Status::BlockedFinal)
                        return "blocked configuration not refused: " + print_config(c);
                } else if (sr.status == SynthResultGs::Status::Ok) {
                    if (check_derivation_gs(sr.derivation))
                        return "synthesized derivation does not check: " + print_config(c);
                    if (!verify_soundness(System::GS, sr.derivation).match)
                        return "completeness/soundness round-trip failed on: " + print_config(c);
                    if (!validate_metatheory(System::GS, sr.derivation).all_pass())
                        return "metatheory validation failed on: " + print_config(c);
                } else {
                    return "synthesis failed on a finishing configuration: " + print_config(c);
                }
            }
        }
    }
    discarded = gen.discarded();
    return {};
}

int cmd_fuzz(std::uint64_t seed, std::uint64_t count, int max_depth, const std::string& calculus,
             bool normalizing_only, unsigned jobs) {
    using namespace lamq;
    GenConfig base;
    base.seed = seed;
    base.max_depth = max_depth;
    base.calculus = parse_calculus(calculus);
    base.normalizing_only = normalizing_only;
    if (jobs <= 1) {
        std::uint64_t discarded = 0;
        std::string err = fuzz_worker(base, count, discarded);
        if (!err.empty()) {
            std::cerr << "FAIL: " << err << "\n";
            return kExitFail;
        }
        std::cout << "fuzz: " << count << " cases passed (seed " << seed << ", " << discarded
                  << " discarded by the filters)\n";
        return kExitOk;
    }
    std::vector<std::thread> workers;
    std::vector<std::string> errors(jobs);
    std::vector<std::uint64_t> discards(jobs, 0);
    std::uint64_t per = (count + jobs - 1) / jobs;
    for (unsigned w = 0; w < jobs; ++w) {
        GenConfig cfg = base;
        cfg.seed = seed + 0x9e3779b97f4a7c15ULL * (w + 1);
        workers.emplace_back(
            [cfg, per, w, &errors, &discards] { errors[w] = fuzz_worker(cfg, per, discards[w]); });
    }
    for (auto& t : workers) t.join();
    for (const auto& e : errors)
        if (!e.empty()) {
            std::cerr << "FAIL: " << e << "\n";
            return kExitFail;
        }
    std::uint64_t discarded = 0;
    for (auto d : discards) discarded += d;
    std::cout << "fuzz: " << per * jobs << " cases passed across " << jobs << " workers (seed " << seed
              << ", " << discarded << " discarded by the filters)\n";
    return kExitOk;
}

int cmd_selftest() {
    using namespace lamq;
    int failures = 0;
    auto report = [&](const char* name, bool ok) {
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
        if (!ok) ++failures;
    };

    // reference run 1: plain CBV
    TermPtr t1 = parse_term(golden::kExample1Source);
    EvalResultCbv e1 = eval_cbv(t1);
    report("cbv evaluation: two beta steps to a size-2 normal form",
           !e1.exhausted && e1.beta == 2 && term_size(e1.last) == 2 &&
               alpha_eq(e1.last, parse_term("(\\z. z) (y y)")));
    SynthResultV s1 = synthesize_tight_v(t1);
    bool s1ok = s1.status == SynthResultV::Status::Ok && !check_derivation_v(s1.derivation) &&
                is_tight_derivation(s1.derivation) && s1.derivation->conclusion.counters == Counters{2, 0, 2};
    report("cbv synthesis: tight derivation at (2,2)", s1ok);
    report("cbv soundness: certificate matches", verify_soundness(System::V, s1.derivation).match);
    DerivPtr g1 = golden::example1_derivation();
    report("cbv golden derivation checks and is tight",
           !check_derivation_v(g1) && is_tight_derivation(g1) &&
               validate_metatheory(System::V, g1).all_pass());

    // reference run 2: global state
    Configuration c2 = parse_config(golden::kExample2Source);
    EvalResultGs e2 = eval_gs(c2);
    bool labels_ok = e2.trace.steps.size() == 4 && e2.trace.steps[0].label == StepLabel::SetStep &&
                     e2.trace.steps[1].label == StepLabel::Beta &&
                     e2.trace.steps[2].label == StepLabel::GetStep &&
                     e2.trace.steps[3].label == StepLabel::Beta;
    report("gs evaluation: four steps (set, beta, get, beta), b=2 m=2",
           !e2.exhausted && e2.beta == 2 && e2.mem == 2 && labels_ok &&
               alpha_eq(e2.final, parse_config("(z | [l := \\z. z])")));
    SynthResultGs s2 = synthesize_tight_gs(c2);
    bool s2ok = s2.status == SynthResultGs::Status::Ok && !check_derivation_gs(s2.derivation) &&
                is_tight_derivation(s2.derivation) &&
                s2.derivation->conclusion.counters == Counters{2, 2, 0};
    report("gs synthesis: tight derivation at (2,2,0)", s2ok);
    report("gs soundness: certificate matches", verify_soundness(System::GS, s2.derivation).match);
    DerivPtr g2 = golden::example2_derivation();
    report("gs golden derivation checks and is tight",
           !check_derivation_gs(g2) && is_tight_derivation(g2) &&
               validate_metatheory(System::GS, g2).all_pass());

    // a blocked configuration is refused
    Configuration blocked = parse_config("(get(l, x. x) | [])");
    report("blocked configuration yields no derivation",
           synthesize_tight_gs(blocked).status == SynthResultGs::Status::BlockedFinal);

    return failures == 0 ? kExitOk : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantitative typing for call-by-value with global state"};
    app.require_subcommand(1);

    std::string file, calculus = "cbv", format = "text", out;
    std::uint64_t fuel = lamq::kDefaultFuel;
    std::uint64_t seed = 1, count = 100;
    int max_depth = 5;
    bool normalizing_only = false, quiet = false;
    unsigned jobs = 1;

    auto* parse_cmd = app.add_subcommand("parse", "parse a term and echo its canonical form");
    parse_cmd->add_option("file", file, "input file, - for stdin")->required();
    parse_cmd->add_option("--calculus", calculus, "cbv or gs");

    auto* eval_cmd = app.add_subcommand("eval", "run the small-step evaluator and print the trace");
    eval_cmd->add_option("file", file, "input file, - for stdin")->required();
    eval_cmd->add_option("--calculus", calculus, "cbv or gs");
    eval_cmd->add_option("--fuel", fuel, "maximum number of steps");
    eval_cmd->add_option("--format", format, "text or json");

    auto* check_cmd = app.add_subcommand("check-derivation", "check a derivation JSON file");
    check_cmd->add_option("file", file, "derivation file, - for stdin")->required();

    auto* synth_cmd = app.add_subcommand("synth", "synthesize a tight derivation from an execution");
    synth_cmd->add_option("file", file, "input file, - for stdin")->required();
    synth_cmd->add_option("--calculus", calculus, "cbv or gs");
    synth_cmd->add_option("-o,--out", out, "output derivation file, - for stdout");
    synth_cmd->add_option("--fuel", fuel, "maximum number of steps");
    synth_cmd->add_flag("--quiet", quiet, "suppress the proof-tree rendering");

    auto* verify_cmd = app.add_subcommand("verify", "check a derivation and compare against execution");
    verify_cmd->add_option("file", file, "derivation file, - for stdin")->required();
    verify_cmd->add_option("--fuel", fuel, "maximum number of steps");
    verify_cmd->add_option("--format", format, "text or json");

    auto* fuzz_cmd = app.add_subcommand("fuzz", "run the property battery on random terms");
    fuzz_cmd->add_option("--seed", seed, "generator seed");
    fuzz_cmd->add_option("--count", count, "number of cases");
    fuzz_cmd->add_option("--max-depth", max_depth, "generator depth bound");
    fuzz_cmd->add_option("--calculus", calculus, "cbv or gs");
    fuzz_cmd->add_flag("--normalizing-only", normalizing_only, "filter to fuel-bounded normalizing inputs");
    fuzz_cmd->add_option("--jobs", jobs, "worker threads, sharding seeds");

    app.add_subcommand("selftest", "reproduce the reference examples end to end");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (parse_cmd->parsed()) return cmd_parse(file, calculus);
        if (eval_cmd->parsed()) return cmd_eval(file, calculus, fuel, format);
        if (check_cmd->parsed()) return cmd_check(file);
        if (synth_cmd->parsed()) return cmd_synth(file, calculus, out, fuel, quiet);
        if (verify_cmd->parsed()) return cmd_verify(file, fuel, format);
        if (fuzz_cmd->parsed()) return cmd_fuzz(seed, count, max_depth, calculus, normalizing_only, jobs);
        return cmd_selftest();
    } catch (const lamq::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const lamq::TypeParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const lamq::GsValidityError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const lamq::JsonFormatError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "json: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitFail;
    }
}
