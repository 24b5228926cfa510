// densemodel: run the dense-model-or-distinguisher dichotomy from the shell.
//
// Exit codes for find-model: 0 dense model, 3 distinguisher, 1 usage/parse
// error, 2 internal verification failure — so pipelines can branch on the
// dichotomy itself.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "densemodel/densemodel.hpp"

namespace {

using namespace densemodel;
using io::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitVerifyFailed = 2;
constexpr int kExitDistinguisher = 3;
constexpr int kExitSkipped = 4;

void apply_thread_cap(std::size_t threads) {
    if (threads > 0) {
        util::thread_cap() = threads;
        return;
    }
    if (const char* env = std::getenv("DENSEMODEL_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) util::thread_cap() = static_cast<std::size_t>(v);
    }
}

io::InstanceFile make_hand2() {
    io::InstanceFile file;
    Universe u(2);
    FunctionFamily family(u, {BoundedFunction(u, {1.0, -1.0})}, {"split"});
    file.instance = Instance(u, Measure(u, {2.0, 0.0}, "nu"), Measure(u, {2.0, 0.0}, "g"),
                             family, 0.5);
    file.family_block = {{"labels", {"split"}}, {"members", {{1.0, -1.0}}}};
    file.labels = file.instance.family.labels;
    return file;
}

int cmd_find_model(const std::string& instance_path, double gamma, std::uint64_t seed,
                   const std::string& report_path, bool sample_extraction) {
    io::InstanceFile file;
    try {
        file = io::read_instance(instance_path);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        auto start = std::chrono::steady_clock::now();
        FindModelOptions opts;
        if (gamma > 0.0) opts.gamma = gamma;
        DichotomyResult result = find_dense_model(file.instance, opts);
        double elapsed = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start)
                             .count();
        json report = io::serialize_report(file, result, elapsed, seed);

        if (!result.is_dense_model && sample_extraction) {
            const auto& d = *result.distinguisher;
            SampledExtraction sampled = extract_product_sampled(
                file.instance.nu, d.mixture, d.poly, file.instance.epsilon, seed);
            json sj;
            sj["success"] = sampled.success;
            sj["attempts"] = sampled.attempts;
            sj["members"] = sampled.members;
            sj["sign"] = sampled.sign;
            sj["achieved"] = static_cast<double>(sampled.achieved);
            report["sampled_extraction"] = sj;
        }

        std::string text = io::dump_canonical(report);
        if (!report_path.empty())
            io::write_text_file(report_path, text);
        else
            std::cout << text;

        if (result.is_dense_model) {
            std::cerr << "dense model: indistinguishability " << result.dense_model->indist
                      << " <= eps = " << file.instance.epsilon << "\n";
            return kExitOk;
        }
        const auto& d = *result.distinguisher;
        std::cerr << "distinguisher: " << d.extraction.k << " factor(s), |<nu-1, prod>| = "
                  << static_cast<double>(d.extraction.achieved) << " >= eps' = "
                  << static_cast<double>(d.extraction.eps_prime) << "\n";
        return kExitDistinguisher;
    } catch (const Error& e) {
        std::cerr << "verification failure: " << e.what() << "\n";
        return kExitVerifyFailed;
    }
}

int cmd_verify(const std::string& report_path, const std::string& instance_path) {
    io::InstanceFile file;
    json report;
    try {
        file = io::read_instance(instance_path);
        report = io::read_json_file(report_path);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        io::VerifyOutcome outcome = io::verify_report(file, report);
        if (outcome.ok) {
            std::cout << "report verified: every inequality re-checked against the instance\n";
            return kExitOk;
        }
        std::cerr << "verification failed at:\n";
        for (const auto& link : outcome.failures) std::cerr << "  " << link << "\n";
        return kExitVerifyFailed;
    } catch (const Error& e) {
        std::cerr << "verification failure: " << e.what() << "\n";
        return kExitVerifyFailed;
    }
}

int cmd_round(const std::string& instance_path, const std::string& model_path, std::uint64_t seed,
              std::int64_t trials, const std::string& out_path) {
    if (trials < 1) {
        std::cerr << "usage error: --trials must be >= 1\n";
        return kExitUsage;
    }
    io::InstanceFile file;
    BoundedMeasure g1;
    try {
        file = io::read_instance(instance_path);
        g1 = io::read_model(model_path, file.instance.universe);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitUsage;
    }
    const Instance& inst = file.instance;
    const double delta = mean(g1);
    const double eps = inst.epsilon;

    json trials_json = json::array();
    std::vector<ModelSet> sets(static_cast<std::size_t>(trials));
    util::parallel_chunks(static_cast<std::size_t>(trials),
                          [&](std::size_t lo, std::size_t hi, std::size_t) {
                              for (std::size_t i = lo; i < hi; ++i)
                                  sets[i] = round_to_set(g1, inst, seed + i);
                          });
    double density_sum = 0.0;
    std::int64_t failures = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const ModelSet& set = sets[i];
        density_sum += set.density;
        bool failed = set.density < (1.0 - eps) * delta || set.indist_vs_g > 2.0 * eps;
        failures += failed ? 1 : 0;
        trials_json.push_back({{"seed", seed + i},
                               {"density", set.density},
                               {"indist_vs_g", set.indist_vs_g},
                               {"indist_vs_model", set.indist_vs_model},
                               {"failed", failed}});
    }
    json out;
    out["schema_version"] = io::kSchemaVersion;
    out["tool_version"] = io::kToolVersion;
    out["delta"] = delta;
    out["epsilon"] = eps;
    out["trials"] = trials_json;
    out["summary"] = {
        {"trials", trials},
        {"mean_density", density_sum / static_cast<double>(trials)},
        {"empirical_failure_rate", static_cast<double>(failures) / static_cast<double>(trials)},
        {"chernoff_failure_bound",
         rounding_failure_bound(delta, eps, inst.universe.n, inst.family.size())},
        {"chernoff_constants",
         "exp(-eps^2*delta*n/2) + 2|F|*exp(-n*eps^2/2)"}};
    std::string text = io::dump_canonical(out);
    if (!out_path.empty())
        io::write_text_file(out_path, text);
    else
        std::cout << text;
    return kExitOk;
}

int cmd_check_pr(const std::string& instance_path, int k, double eps_prime, std::int64_t budget) {
    io::InstanceFile file;
    try {
        file = io::read_instance(instance_path);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitUsage;
    }
    const Instance& inst = file.instance;
    double threshold = eps_prime > 0.0 ? eps_prime : inst.epsilon;
    FamilyPowerVerdict verdict = family_power_check(inst.nu, inst.family, k, threshold, budget);
    json out;
    out["k"] = k;
    out["epsilon_prime"] = threshold;
    if (!verdict.definitive) {
        out["verdict"] = "skipped";
        out["reason"] = "enumeration over budget";
        std::cout << io::dump_canonical(out);
        return kExitSkipped;
    }
    out["verdict"] = verdict.pseudorandom ? "pseudorandom" : "distinguished";
    out["worst_value"] = verdict.worst_value;
    json labels = json::array();
    for (std::size_t idx : verdict.worst_product) labels.push_back(inst.family.labels[idx]);
    out["worst_product"] = verdict.worst_product;
    out["worst_product_labels"] = labels;
    std::cout << io::dump_canonical(out);
    return verdict.pseudorandom ? kExitOk : kExitDistinguisher;
}

struct GenOptions {
    std::string kind = "set";
    std::int64_t n = 64;
    double epsilon = 0.1;
    std::uint64_t seed = 1;
    std::size_t r_size = 16;
    std::size_t d_size = 8;
    std::string family = "random";
    std::size_t family_size = 4;
    std::vector<std::int64_t> freqs;
    std::string style = "smooth";
    std::string out;
};

int cmd_gen(const GenOptions& opts) {
    io::InstanceFile file;
    try {
        if (opts.kind == "hand2") {
            file = make_hand2();
        } else if (opts.kind == "set") {
            testkit::FamilySpec fspec;
            fspec.id = opts.family;
            fspec.m = opts.family_size;
            fspec.frequencies = opts.freqs;
            fspec.seed = opts.seed;
            auto spec = testkit::gen_set_spec(opts.n, opts.r_size, opts.d_size, fspec, opts.seed);
            file.instance = testkit::build_set_instance(spec, opts.epsilon);
            json gen;
            gen["id"] = fspec.id;
            if (fspec.id == "random") {
                gen["m"] = fspec.m;
                gen["seed"] = fspec.seed;
            } else {
                gen["frequencies"] = fspec.frequencies;
            }
            file.family_block = {{"generator", gen}};
        } else if (opts.kind == "random") {
            testkit::InstanceStyle style;
            if (opts.style == "smooth")
                style = testkit::InstanceStyle::smooth;
            else if (opts.style == "spiky")
                style = testkit::InstanceStyle::spiky;
            else if (opts.style == "bounded")
                style = testkit::InstanceStyle::bounded;
            else
                throw InvalidParameter("unknown style '" + opts.style + "'");
            file.instance = testkit::gen_random_instance(opts.n, opts.family_size, opts.epsilon,
                                                         style, opts.seed);
            json members = json::array();
            for (const auto& f : file.instance.family.members) members.push_back(f.values);
            file.family_block = {{"labels", file.instance.family.labels}, {"members", members}};
        } else {
            throw InvalidParameter("unknown generator kind '" + opts.kind + "'");
        }
    } catch (const Error& e) {
        std::cerr << "generator error: " << e.what() << "\n";
        return kExitUsage;
    }
    std::string text = io::dump_canonical(io::serialize_instance(file));
    if (!opts.out.empty())
        io::write_text_file(opts.out, text);
    else
        std::cout << text;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Executable dense model dichotomy: construct a bounded dense model of g, or a "
                 "product of test functions witnessing that nu is not pseudorandom"};
    app.set_version_flag("--version", std::string(densemodel::io::kToolVersion));
    std::size_t threads = 0;
    app.add_option("--threads", threads, "cap worker threads (env DENSEMODEL_THREADS)");

    std::string instance_path, report_path, model_path, out_path;
    double gamma = 0.0, eps_prime = 0.0;
    std::uint64_t seed = 1;
    std::int64_t trials = 1, budget = 1000000;
    int k = 1;
    bool sample_extraction = false;

    auto* find = app.add_subcommand("find-model", "run the dichotomy on an instance file");
    find->add_option("instance", instance_path, "instance JSON path")->required();
    find->add_option("--gamma", gamma, "equilibrium accuracy (default eps/10)");
    find->add_option("--seed", seed, "seed recorded in the report; drives --sample-extraction");
    find->add_option("--report", report_path, "write the report here instead of stdout");
    find->add_flag("--sample-extraction", sample_extraction,
                   "also run the sampling extraction for comparison");

    auto* verify = app.add_subcommand("verify", "recompute every inequality in a report");
    verify->add_option("report", report_path, "report JSON path")->required();
    verify->add_option("instance", instance_path, "instance JSON path")->required();

    auto* round = app.add_subcommand("round", "round a bounded measure to model sets");
    round->add_option("instance", instance_path, "instance JSON path")->required();
    round->add_option("model", model_path, "model JSON path ({\"g1\": [...]})")->required();
    round->add_option("--seed", seed, "base seed; trial i uses seed+i");
    round->add_option("--trials", trials, "number of trials")->required();
    round->add_option("--out", out_path, "write the trial report here");

    auto* checkpr = app.add_subcommand("check-pr", "pseudorandomness of nu against F^k");
    checkpr->add_option("instance", instance_path, "instance JSON path")->required();
    checkpr->add_option("--k", k, "family power");
    checkpr->add_option("--eps-prime", eps_prime, "threshold (default: instance epsilon)");
    checkpr->add_option("--budget", budget, "max products to enumerate");

    GenOptions gen_opts;
    auto* gen = app.add_subcommand("gen", "emit a deterministic instance file");
    gen->add_option("--kind", gen_opts.kind, "set | random | hand2");
    gen->add_option("--n", gen_opts.n, "universe size");
    gen->add_option("--epsilon", gen_opts.epsilon, "instance epsilon");
    gen->add_option("--seed", gen_opts.seed, "generator seed");
    gen->add_option("--r-size", gen_opts.r_size, "|R| for set instances");
    gen->add_option("--d-size", gen_opts.d_size, "|D| for set instances");
    gen->add_option("--family", gen_opts.family, "random | characters (set instances)");
    gen->add_option("--family-size", gen_opts.family_size, "member count for random families");
    gen->add_option("--freqs", gen_opts.freqs, "character frequencies");
    gen->add_option("--style", gen_opts.style, "smooth | spiky | bounded (random instances)");
    gen->add_option("--out", gen_opts.out, "write here instead of stdout");

    app.require_subcommand(1);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }
    apply_thread_cap(threads);

    if (find->parsed())
        return cmd_find_model(instance_path, gamma, seed, report_path, sample_extraction);
    if (verify->parsed()) return cmd_verify(report_path, instance_path);
    if (round->parsed()) return cmd_round(instance_path, model_path, seed, trials, out_path);
    if (checkpr->parsed()) return cmd_check_pr(instance_path, k, eps_prime, budget);
    if (gen->parsed()) return cmd_gen(gen_opts);
    return kExitUsage;
}
