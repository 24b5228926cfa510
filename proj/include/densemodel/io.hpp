#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "densemodel/core.hpp"
#include "densemodel/errors.hpp"
#include "densemodel/pipeline.hpp"
#include "densemodel/testkit.hpp"

namespace densemodel::io {

using json = nlohmann::ordered_json;  // fixed field order on output

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "densemodel 0.1.0";

// --- canonical serialization ---------------------------------------------------

/// FNV-1a 64 over the canonical bytes; reports pin the instance they certify.
inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Parsed instance plus the family block exactly as written, so
/// gen → parse → serialize round-trips byte-identically even for
/// generator-spec families.
struct InstanceFile {
    Instance instance;
    json family_block;
    std::vector<std::string> labels;
};

inline json serialize_instance(const InstanceFile& file) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["n"] = file.instance.universe.n;
    j["epsilon"] = file.instance.epsilon;
    j["nu"] = file.instance.nu.values;
    j["g"] = file.instance.g.values;
    j["family"] = file.family_block;
    return j;
}

inline std::string dump_canonical(const json& j) { return j.dump(2) + "\n"; }

inline std::string instance_digest(const InstanceFile& file) {
    return fnv1a_hex(dump_canonical(serialize_instance(file)));
}

namespace parse_detail {
inline const json& require(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(where.empty() ? key : where + "." + key, "missing field");
    return *it;
}

inline double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ParseError(where, "expected a number");
    return j.get<double>();
}

inline std::vector<double> number_array(const json& j, std::size_t expect, const std::string& where) {
    if (!j.is_array()) throw ParseError(where, "expected an array");
    if (expect != 0 && j.size() != expect)
        throw ParseError(where, "expected " + std::to_string(expect) + " entries, found " +
                                    std::to_string(j.size()));
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number())
            throw ParseError(where + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back(j[i].get<double>());
    }
    return out;
}
}  // namespace parse_detail

inline FunctionFamily parse_family_block(const json& fam, std::int64_t n) {
    using parse_detail::number_array;
    if (fam.contains("generator")) {
        const json& gen = fam["generator"];
        std::string id = parse_detail::require(gen, "id", "family.generator").get<std::string>();
        testkit::FamilySpec spec;
        spec.id = id;
        if (id == "random") {
            spec.m = parse_detail::require(gen, "m", "family.generator").get<std::size_t>();
            spec.seed = gen.value("seed", std::uint64_t{0});
        } else if (id == "characters") {
            spec.frequencies =
                parse_detail::require(gen, "frequencies", "family.generator")
                    .get<std::vector<std::int64_t>>();
        } else {
            throw ParseError("family.generator.id", "unknown generator '" + id + "'");
        }
        return testkit::build_family(n, spec);
    }
    if (!fam.contains("members")) throw ParseError("family", "needs 'members' or 'generator'");
    const json& members = fam["members"];
    if (!members.is_array() || members.empty())
        throw ParseError("family.members", "expected a nonempty array");
    std::vector<std::string> labels;
    if (fam.contains("labels")) {
        labels = fam["labels"].get<std::vector<std::string>>();
        if (labels.size() != members.size())
            throw ParseError("family.labels", "label count differs from member count");
    } else {
        for (std::size_t i = 0; i < members.size(); ++i) labels.push_back("f" + std::to_string(i));
    }
    Universe u(n);
    std::vector<BoundedFunction> fs;
    for (std::size_t i = 0; i < members.size(); ++i) {
        std::string where = "family.members[" + std::to_string(i) + "]";
        try {
            fs.emplace_back(u, number_array(members[i], static_cast<std::size_t>(n), where), where);
        } catch (const ValidationError& e) {
            throw ParseError(e.field, e.what());
        }
    }
    return FunctionFamily(u, std::move(fs), std::move(labels));
}

inline InstanceFile parse_instance(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("", std::string("invalid JSON: ") + e.what());
    }
    using parse_detail::number_array;
    using parse_detail::require;

    int version = require(j, "schema_version", "").get<int>();
    if (version != kSchemaVersion)
        throw ParseError("schema_version", "unsupported version " + std::to_string(version));
    auto n = require(j, "n", "").get<std::int64_t>();
    if (n < 1) throw ParseError("n", "universe size must be >= 1");
    double eps = parse_detail::number(require(j, "epsilon", ""), "epsilon");

    InstanceFile file;
    Universe u(n);
    try {
        Measure nu(u, number_array(require(j, "nu", ""), static_cast<std::size_t>(n), "nu"), "nu");
        Measure g(u, number_array(require(j, "g", ""), static_cast<std::size_t>(n), "g"), "g");
        file.family_block = require(j, "family", "");
        FunctionFamily family = parse_family_block(file.family_block, n);
        file.instance = Instance(u, std::move(nu), std::move(g), std::move(family), eps);
    } catch (const ValidationError& e) {
        throw ParseError(e.field, e.what());
    }
    file.labels = file.instance.family.labels;
    return file;
}

inline InstanceFile read_instance(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("", "cannot open instance file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_instance(ss.str());
}

// --- model file (bounded measure values) ----------------------------------------

inline BoundedMeasure read_model(const std::string& path, Universe u) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("", "cannot open model file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("", std::string("invalid JSON: ") + e.what());
    }
    try {
        return BoundedMeasure(
            u, parse_detail::number_array(parse_detail::require(j, "g1", ""),
                                          static_cast<std::size_t>(u.n), "g1"),
            "g1");
    } catch (const ValidationError& e) {
        throw ParseError(e.field, e.what());
    }
}

inline json serialize_model(const BoundedMeasure& g1) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["g1"] = g1.values;
    return j;
}

// --- report file -----------------------------------------------------------------

namespace report_detail {
/// Tiny magnitudes (ε' can be exp(-poly(1/ε))) are carried as
/// {value-or-null, log10}; JSON has no subnormal-safe float contract.
inline json scaled(long double v) {
    json j;
    double d = static_cast<double>(v);
    if (std::isfinite(d) && d != 0.0)
        j["value"] = d;
    else
        j["value"] = nullptr;
    if (v == 0.0L)
        j["log10"] = nullptr;
    else
        j["log10"] = static_cast<double>(log10l(fabsl(v)));
    return j;
}

inline long double read_scaled(const json& j, const std::string& where) {
    if (!j.contains("value")) throw ParseError(where, "missing 'value'");
    if (j["value"].is_number()) return static_cast<long double>(j["value"].get<double>());
    if (j.contains("log10") && j["log10"].is_number())
        return powl(10.0L, static_cast<long double>(j["log10"].get<double>()));
    return 0.0L;
}
}  // namespace report_detail

inline json serialize_report(const InstanceFile& file, const DichotomyResult& result,
                             double elapsed_ms, std::uint64_t seed) {
    const Instance& inst = file.instance;
    json j;
    j["schema_version"] = kSchemaVersion;
    j["tool_version"] = kToolVersion;
    j["instance_digest"] = instance_digest(file);
    j["epsilon"] = inst.epsilon;
    j["delta"] = inst.delta();
    j["gamma_used"] = result.gamma_used;
    j["gamma_halvings"] = result.gamma_halvings;
    j["game"] = {{"lower_bound", result.game.lower_bound},
                 {"upper_bound", result.game.upper_bound},
                 {"rounds_used", result.game.rounds_used}};
    j["result"] = result.is_dense_model ? "dense_model" : "distinguisher";
    if (result.is_dense_model) {
        const auto& m = *result.dense_model;
        j["dense_model"] = {{"mean_gap", m.mean_gap},
                            {"indistinguishability", m.indist},
                            {"g1", m.g1.values}};
    } else {
        const auto& d = *result.distinguisher;
        json dist;
        dist["mixture_weights"] = d.mixture.weights;
        dist["game_lower"] = d.game_lower;
        dist["threshold"] = {{"t", d.witness.t},
                             {"t_shifted", d.witness.t_shifted},
                             {"margin", d.witness.margin},
                             {"transfer_value", d.transfer_value}};
        dist["polynomial"] = {{"degree", d.poly.degree},
                              {"alpha", d.poly.alpha},
                              {"beta", d.poly.beta},
                              {"kernel_d", d.poly.kernel_d},
                              {"kernel_q", d.poly.kernel_q},
                              {"coeff_bound_log10", d.poly.log10_coeff_bound},
                              {"cheb", d.poly.cheb}};
        dist["separation"] = d.separation;
        dist["term"] = {{"index", d.extraction.term_index},
                        {"c_k", report_detail::scaled(d.extraction.c_k)},
                        {"m_k", report_detail::scaled(d.extraction.m_k)},
                        {"value", report_detail::scaled(d.extraction.term_value)}};
        dist["epsilon_prime"] = {{"six", report_detail::scaled(d.extraction.eps_prime)},
                                 {"four", report_detail::scaled(d.extraction.eps_prime4)}};
        json members = json::array();
        json labels = json::array();
        for (std::size_t idx : d.extraction.members) {
            members.push_back(idx);
            labels.push_back(inst.family.labels[idx]);
        }
        dist["witness"] = {{"members", members},
                           {"labels", labels},
                           {"sign", d.extraction.sign},
                           {"factors", d.extraction.k},
                           {"achieved", report_detail::scaled(d.extraction.achieved)},
                           {"exact_confirmed", d.extraction.exact_confirmed},
                           {"conditioning_warning", d.extraction.conditioning_warning}};
        dist["chain"] = {{"threshold_margin", d.witness.margin},
                         {"transfer", d.transfer_value},
                         {"separation", d.separation},
                         {"term_value", report_detail::scaled(d.extraction.term_value)},
                         {"product", report_detail::scaled(d.extraction.achieved)}};
        j["distinguisher"] = std::move(dist);
    }
    j["timing_ms"] = elapsed_ms;
    j["seeds"] = {{"cli_seed", seed}};
    return j;
}

// --- independent re-verification of a report -------------------------------------

struct VerifyOutcome {
    bool ok = true;
    std::vector<std::string> failures;

    void fail(const std::string& link) {
        ok = false;
        failures.push_back(link);
    }
};

/// Recompute every inequality a report claims, from the instance alone.
/// Nothing numeric in the report is trusted: the game lower bound, threshold
/// margin, transfer value, polynomial conditions, separation, term bound and
/// the final product are all re-derived and compared at 1e-9.
inline VerifyOutcome verify_report(const InstanceFile& file, const json& report) {
    VerifyOutcome out;
    const Instance& inst = file.instance;
    const double eps = inst.epsilon;

    if (!report.contains("instance_digest") ||
        report["instance_digest"].get<std::string>() != instance_digest(file)) {
        out.fail("instance_digest");
        return out;
    }
    if (!report.contains("epsilon") ||
        std::fabs(report["epsilon"].get<double>() - eps) > 1e-12) {
        out.fail("epsilon");
        return out;
    }
    std::string kind = report.value("result", "");
    if (kind == "dense_model") {
        if (!report.contains("dense_model")) {
            out.fail("dense_model");
            return out;
        }
        const json& m = report["dense_model"];
        BoundedMeasure g1;
        try {
            g1 = BoundedMeasure(inst.universe,
                                parse_detail::number_array(parse_detail::require(m, "g1", "dense_model"),
                                                           inst.g.size(), "dense_model.g1"),
                                "dense_model.g1");
        } catch (const Error&) {
            out.fail("dense_model.g1");
            return out;
        }
        double mean_gap = std::fabs(mean(g1) - mean(inst.g));
        if (mean_gap > kTol) out.fail("dense_model.mean_gap");
        if (std::fabs(mean_gap - m.value("mean_gap", -1.0)) > kTol)
            out.fail("dense_model.mean_gap_reported");
        std::vector<double> diff(inst.g.values);
        for (std::size_t x = 0; x < diff.size(); ++x) diff[x] -= g1.values[x];
        double indist = family_seminorm(PointFunction(inst.universe, diff), inst.family);
        if (indist > eps) out.fail("dense_model.indistinguishability");
        if (std::fabs(indist - m.value("indistinguishability", -1.0)) > kTol)
            out.fail("dense_model.indistinguishability_reported");
        return out;
    }
    if (kind != "distinguisher") {
        out.fail("result");
        return out;
    }
    if (!report.contains("distinguisher")) {
        out.fail("distinguisher");
        return out;
    }
    const json& d = report["distinguisher"];

    // mixture and the game's lower-bound certificate
    Mixture fbar;
    try {
        FunctionFamily fprime = signed_closure(inst.family);
        fbar = Mixture(fprime, parse_detail::number_array(
                                   parse_detail::require(d, "mixture_weights", "distinguisher"),
                                   2 * inst.family.size(), "distinguisher.mixture_weights"));
    } catch (const Error&) {
        out.fail("distinguisher.mixture_weights");
        return out;
    }
    // the reported <g - g1*, f̄> must match recomputation; the distinguisher's
    // guarantees are carried by the threshold/polynomial/product chain below,
    // which verifies on its own (borderline instances can reach it with the
    // game bound slightly under ε)
    const double delta = inst.delta();
    BoundedMeasure g1 = measure_best_response(fbar, delta);
    double lower = inner(inst.g, fbar.as_point_function()) - inner(g1, fbar.as_point_function());
    if (std::fabs(lower - d.value("game_lower", -1.0)) > kTol)
        out.fail("distinguisher.game_lower_reported");

    // threshold claim at the reported t
    double t = d["threshold"].value("t", 2.0);
    if (!(t >= -1.0 + eps / 3.0 - kTol && t <= 1.0 + kTol)) out.fail("distinguisher.threshold.range");
    BoundedFunction ft = threshold_indicator(fbar.as_point_function(), t);
    BoundedFunction fts = threshold_indicator(fbar.as_point_function(), t - eps / 3.0);
    double margin = inner(inst.g, ft) - inner(g1, fts);
    if (!(margin >= eps / 3.0 - kTol)) out.fail("distinguisher.threshold.margin");
    if (std::fabs(margin - d["threshold"].value("margin", -1.0)) > kTol)
        out.fail("distinguisher.threshold.margin_reported");
    for (std::size_t x = 0; x < inst.g.size(); ++x)
        if (fts.values[x] == 1.0 && g1.values[x] != 1.0) {
            out.fail("distinguisher.threshold.support");
            break;
        }
    double transfer = inner(inst.nu, ft) - inner(constant_one(inst.universe), fts);
    if (!(transfer >= eps / 3.0 - kTol)) out.fail("distinguisher.threshold.transfer");
    if (std::fabs(transfer - d["threshold"].value("transfer_value", -1.0)) > kTol)
        out.fail("distinguisher.threshold.transfer_reported");

    // polynomial: rebuild from the reported kernel parameters and check both
    // the reported coefficients and the three range conditions
    StepPolynomial poly;
    poly.t = t;
    poly.alpha = eps / 3.0;
    poly.beta = eps / 12.0;
    poly.kernel_d = d["polynomial"].value("kernel_d", 0);
    poly.kernel_q = d["polynomial"].value("kernel_q", 0);
    if (poly.kernel_d < 2 || poly.kernel_q < 1) {
        out.fail("distinguisher.polynomial.kernel");
        return out;
    }
    double z0 = std::clamp(t - poly.alpha / 2.0, -1.0 + 1e-12, 1.0 - 1e-12);
    poly.cheb = steppoly_detail::build_cheb(poly.kernel_d, poly.kernel_q, z0);
    poly.degree = static_cast<int>(poly.cheb.size()) - 1;
    if (poly.degree != d["polynomial"].value("degree", -1)) out.fail("distinguisher.polynomial.degree");
    {
        std::vector<double> reported =
            d["polynomial"].value("cheb", std::vector<double>{});
        if (reported.size() != poly.cheb.size()) {
            out.fail("distinguisher.polynomial.cheb");
        } else {
            for (std::size_t i = 0; i < reported.size(); ++i)
                if (std::fabs(reported[i] - poly.cheb[i]) >
                    1e-9 * std::max(1.0, std::fabs(poly.cheb[i]))) {
                    out.fail("distinguisher.polynomial.cheb");
                    break;
                }
        }
    }
    StepVerifyReport vrep = verify_step_polynomial(poly, 20000);
    if (!vrep.pass) out.fail("distinguisher.polynomial.conditions");

    auto mono = steppoly_detail::expand_monomial(poly.cheb);
    poly.coeffs = std::move(mono.rounded);
    poly.coeffs_exact = std::move(mono.exact);

    // separation and the extracted term
    double separation;
    try {
        separation = compose_and_separate(poly, fbar, inst.nu, eps);
    } catch (const Error&) {
        out.fail("distinguisher.separation");
        return out;
    }
    if (std::fabs(separation - d.value("separation", -1.0)) > kTol)
        out.fail("distinguisher.separation_reported");

    int kstar = d["term"].value("index", -1);
    if (kstar < 0 || kstar > poly.degree) {
        out.fail("distinguisher.term.index");
        return out;
    }
    std::vector<long double> pw(inst.g.size(), 1.0L);
    for (int k = 0; k < kstar; ++k)
        for (std::size_t x = 0; x < pw.size(); ++x)
            pw[x] *= static_cast<long double>(fbar.values[x]);
    long double mk = 0.0L;
    for (std::size_t x = 0; x < pw.size(); ++x)
        mk += (static_cast<long double>(inst.nu.values[x]) - 1.0L) * pw[x];
    mk /= static_cast<long double>(pw.size());
    long double ck = poly.coeffs[static_cast<std::size_t>(kstar)];
    long double term_value = fabsl(ck * mk);
    long double term_bound = static_cast<long double>(eps) /
                             (6.0L * static_cast<long double>(poly.degree + 1));
    if (!(term_value >= term_bound - static_cast<long double>(kTol)))
        out.fail("distinguisher.term.value");

    long double eps_prime = static_cast<long double>(eps) /
                            (6.0L * static_cast<long double>(poly.degree + 1) * fabsl(ck));
    long double reported_eps_prime =
        report_detail::read_scaled(d["epsilon_prime"]["six"], "distinguisher.epsilon_prime.six");
    if (fabsl(eps_prime - reported_eps_prime) >
        1e-6L * std::max<long double>(eps_prime, 1e-300L))
        out.fail("distinguisher.epsilon_prime");

    // the product witness itself
    std::vector<std::size_t> members;
    for (const auto& v : d["witness"]["members"]) members.push_back(v.get<std::size_t>());
    if (members.size() > static_cast<std::size_t>(poly.degree)) out.fail("distinguisher.witness.size");
    for (std::size_t idx : members)
        if (idx >= inst.family.size()) {
            out.fail("distinguisher.witness.members");
            return out;
        }
    long double prod_value = 0.0L;
    for (std::size_t x = 0; x < inst.g.size(); ++x) {
        long double term = static_cast<long double>(inst.nu.values[x]) - 1.0L;
        for (std::size_t idx : members)
            term *= static_cast<long double>(inst.family.members[idx].values[x]);
        prod_value += term;
    }
    prod_value /= static_cast<long double>(inst.g.size());
    int sign = d["witness"].value("sign", 0);
    if (sign != 1 && sign != -1) out.fail("distinguisher.witness.sign");
    if (!(fabsl(prod_value) >= eps_prime - static_cast<long double>(kTol)))
        out.fail("distinguisher.witness.achieved");
    if (sign * prod_value < 0.0L) out.fail("distinguisher.witness.sign_consistency");
    long double reported_achieved =
        report_detail::read_scaled(d["witness"]["achieved"], "distinguisher.witness.achieved");
    if (fabsl(fabsl(prod_value) - reported_achieved) >
        1e-6L * std::max<long double>(fabsl(prod_value), 1e-300L))
        out.fail("distinguisher.witness.achieved_reported");
    return out;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("", "cannot open file '" + path + "'");
    try {
        return json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("", std::string("invalid JSON: ") + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream outf(path, std::ios::binary);
    if (!outf) throw Error("cannot write file '" + path + "'");
    outf << text;
}

}  // namespace densemodel::io
