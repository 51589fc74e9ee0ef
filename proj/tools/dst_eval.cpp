// dst-eval: evaluate dialogue-state predictions, compare models, trace error
// propagation, calibrate the decay strength, synthesize corpora, and report
// corpus statistics.
//
// Exit codes: 0 success, 1 evaluation failure (parse/schema/metric), 2 usage.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dsteval/dsteval.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitEval = 1;
constexpr int kExitUsage = 2;

std::string read_input(const std::string& path) {
    if (path == "-") {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        return buf.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw dsteval::ParseError("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
}

// Non-negative, duplicates dropped with a warning, empty list falls back to
// the standard column set.
std::vector<dsteval::Lambda> resolve_lambdas(const std::vector<double>& raw) {
    std::vector<double> values = raw;
    if (values.empty()) values = {0.25, 0.5, 0.75, 1.0};
    std::vector<dsteval::Lambda> out;
    bool duplicates = false;
    for (double v : values) {
        dsteval::Lambda lam(v);
        bool seen = false;
        for (const dsteval::Lambda& prior : out) {
            if (prior.value() == lam.value()) {
                seen = true;
                break;
            }
        }
        if (seen) {
            duplicates = true;
        } else {
            out.push_back(lam);
        }
    }
    if (duplicates) std::cerr << "warning: duplicate lambda values ignored\n";
    return out;
}

unsigned resolve_threads(unsigned flag_value) {
    unsigned threads = flag_value;
    if (const char* env = std::getenv("DST_EVAL_THREADS")) {
        char* end = nullptr;
        const unsigned long cap = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && cap > 0) {
            threads = threads == 0 ? static_cast<unsigned>(cap)
                                   : std::min(threads, static_cast<unsigned>(cap));
        }
    }
    return threads;
}

dsteval::ReportFormat parse_report_format(const std::string& name) {
    if (name == "csv") return dsteval::ReportFormat::Csv;
    if (name == "jsonlines") return dsteval::ReportFormat::JsonLines;
    if (name == "markdown") return dsteval::ReportFormat::Markdown;
    return dsteval::ReportFormat::Table;
}

struct EvalFlags {
    std::string predictions;
    std::string ontology;
    std::vector<double> lambdas;
    std::string format = "table";
    unsigned threads = 0;
    std::string model = "model";
};

void add_eval_flags(CLI::App* cmd, EvalFlags& flags, bool with_model) {
    cmd->add_option("--predictions", flags.predictions, "prediction file, or - for standard input")
        ->required()
        ->check(CLI::ExistingFile | CLI::IsMember({"-"}));
    cmd->add_option("--ontology", flags.ontology, "domain-slot ontology file (enables slot accuracy)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--lambdas", flags.lambdas, "decay strengths (default 0.25,0.5,0.75,1)")
        ->delimiter(',');
    cmd->add_option("--format", flags.format, "report format")
        ->check(CLI::IsMember({"table", "csv", "jsonlines", "markdown"}));
    cmd->add_option("--threads", flags.threads, "worker cap (0 = hardware)");
    if (with_model) cmd->add_option("--model", flags.model, "row label for the report");
}

dsteval::MetricConfig build_config(const EvalFlags& flags, const std::vector<dsteval::Lambda>& lambdas) {
    dsteval::MetricConfig config;
    config.lambdas = lambdas;
    config.threads = resolve_threads(flags.threads);
    if (!flags.ontology.empty()) {
        config.ontology = dsteval::parse_ontology(read_input(flags.ontology));
    }
    return config;
}

int cmd_evaluate(const EvalFlags& flags, const std::vector<dsteval::Lambda>& lambdas) {
    try {
        const std::string bytes = read_input(flags.predictions);
        const dsteval::MetricConfig config = build_config(flags, lambdas);
        dsteval::ParseOutcome parsed = dsteval::parse_predictions(bytes, config.policy);
        print_warnings(parsed.warnings);

        dsteval::MetricReport report;
        report.config_echo = dsteval::echo_config(config);
        report.rows.push_back({flags.model, dsteval::evaluate_dataset(parsed.conversations, config),
                               dsteval::content_digest(bytes)});
        std::cout << dsteval::render_report(report, parse_report_format(flags.format));
        return kExitOk;
    } catch (const dsteval::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEval;
    }
}

int cmd_compare(const std::vector<std::string>& entries, const EvalFlags& flags,
                const std::vector<dsteval::Lambda>& lambdas) {
    std::vector<std::pair<std::string, std::string>> models;
    for (const std::string& entry : entries) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == entry.size()) {
            std::cerr << "error: --predictions entries must be name=path, got '" << entry << "'\n";
            return kExitUsage;
        }
        models.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
    }
    if (models.size() < 2) {
        std::cerr << "error: compare needs at least two --predictions name=path entries\n";
        return kExitUsage;
    }
    for (const auto& [name, path] : models) {
        if (path != "-" && !std::filesystem::is_regular_file(path)) {
            std::cerr << "error: " << name << ": no such file: " << path << "\n";
            return kExitUsage;
        }
    }

    try {
        const dsteval::MetricConfig config = build_config(flags, lambdas);
        dsteval::MetricReport report;
        report.config_echo = dsteval::echo_config(config);
        for (const auto& [name, path] : models) {
            const std::string bytes = read_input(path);
            dsteval::ParseOutcome parsed = dsteval::parse_predictions(bytes, config.policy);
            print_warnings(parsed.warnings);
            report.rows.push_back({name, dsteval::evaluate_dataset(parsed.conversations, config),
                                   dsteval::content_digest(bytes)});
        }
        for (std::size_t i = 1; i < report.rows.size(); ++i) {
            if (report.rows[i].metrics.n_turns != report.rows[0].metrics.n_turns) {
                std::cerr << "warning: models disagree on n_turns; rates are not directly comparable\n";
                break;
            }
        }
        std::cout << dsteval::render_report(report, parse_report_format(flags.format));
        return kExitOk;
    } catch (const dsteval::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEval;
    }
}

int cmd_trace(const EvalFlags& flags, const std::string& dialogue_id, const std::string& format,
              const std::vector<dsteval::Lambda>& lambdas) {
    try {
        const std::string bytes = read_input(flags.predictions);
        dsteval::ParseOutcome parsed = dsteval::parse_predictions(bytes);
        print_warnings(parsed.warnings);
        const dsteval::Conversation* conv = nullptr;
        for (const dsteval::Conversation& c : parsed.conversations) {
            if (c.id == dialogue_id) {
                conv = &c;
                break;
            }
        }
        if (!conv) {
            std::cerr << "error: no dialogue with id '" << dialogue_id << "'\n";
            return kExitEval;
        }
        const dsteval::ErrorTrace trace = dsteval::trace_conversation(*conv, lambdas);
        std::cout << dsteval::render_trace(trace, format == "jsonlines" ? dsteval::TraceFormat::JsonLines
                                                                        : dsteval::TraceFormat::Text);
        return kExitOk;
    } catch (const dsteval::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEval;
    }
}

int cmd_lambda(int forget_turns, double forget_fraction) {
    try {
        const dsteval::Lambda lam = dsteval::lambda_from_forgetting(forget_turns, forget_fraction);
        char rounded[32];
        std::snprintf(rounded, sizeof rounded, "%.3f", lam.value());
        std::cout << "lambda " << dsteval::detail::format_double(lam.value()) << "\n"
                  << "rounded " << rounded << "\n";
        return kExitOk;
    } catch (const dsteval::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

int cmd_synth(const dsteval::SynthConfig& config, const std::string& output) {
    std::vector<dsteval::Conversation> convs;
    try {
        convs = dsteval::generate(config);
    } catch (const dsteval::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    const std::string bytes = dsteval::serialize_predictions(convs);
    if (output == "-") {
        std::cout << bytes;
        return kExitOk;
    }
    std::ofstream out(output, std::ios::binary);
    out << bytes;
    if (!out) {
        std::cerr << "error: cannot write " << output << "\n";
        return kExitEval;
    }
    return kExitOk;
}

int cmd_stats(const std::string& predictions) {
    try {
        const std::string bytes = read_input(predictions);
        dsteval::ParseOutcome parsed = dsteval::parse_predictions(bytes);
        print_warnings(parsed.warnings);
        long turns = 0;
        for (const dsteval::Conversation& conv : parsed.conversations) {
            turns += static_cast<long>(conv.turns.size());
        }
        const long convs = static_cast<long>(parsed.conversations.size());
        // Truncated, not rounded, to two decimals.
        const long hundredths = convs > 0 ? turns * 100 / convs : 0;
        std::printf("conversations %ld\n", convs);
        std::printf("turns %ld\n", turns);
        std::printf("avg_turns %ld.%02ld\n", hundredths / 100, hundredths % 100);
        return kExitOk;
    } catch (const dsteval::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEval;
    }
}

// "7..8" or a bare "7".
bool parse_turn_range(const std::string& text, int& lo, int& hi) {
    const auto dots = text.find("..");
    try {
        if (dots == std::string::npos) {
            lo = hi = std::stoi(text);
        } else {
            lo = std::stoi(text.substr(0, dots));
            hi = std::stoi(text.substr(dots + 2));
        }
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dialogue state tracking evaluation toolkit"};
    app.name("dst-eval");
    app.set_version_flag("--version", std::string(dsteval::kToolVersion));
    app.require_subcommand(1);

    EvalFlags eval_flags;
    CLI::App* evaluate = app.add_subcommand("evaluate", "score one prediction file");
    add_eval_flags(evaluate, eval_flags, true);

    EvalFlags compare_flags;
    std::vector<std::string> compare_entries;
    CLI::App* compare = app.add_subcommand("compare", "score several models side by side");
    compare->add_option("--predictions", compare_entries, "model entries as name=path")->required();
    compare->add_option("--ontology", compare_flags.ontology, "domain-slot ontology file")
        ->check(CLI::ExistingFile);
    compare->add_option("--lambdas", compare_flags.lambdas, "decay strengths (default 0.25,0.5,0.75,1)")
        ->delimiter(',');
    compare->add_option("--format", compare_flags.format, "report format")
        ->check(CLI::IsMember({"table", "csv", "jsonlines", "markdown"}));
    compare->add_option("--threads", compare_flags.threads, "worker cap (0 = hardware)");

    EvalFlags trace_flags;
    std::string dialogue_id;
    std::string trace_format = "text";
    CLI::App* trace = app.add_subcommand("trace", "per-turn error classes and credits for one dialogue");
    trace->add_option("--predictions", trace_flags.predictions, "prediction file, or - for standard input")
        ->required()
        ->check(CLI::ExistingFile | CLI::IsMember({"-"}));
    trace->add_option("--dialogue-id", dialogue_id, "dialogue to trace")->required();
    trace->add_option("--lambdas", trace_flags.lambdas, "decay strengths (default 0.25,0.5,0.75,1)")
        ->delimiter(',');
    trace->add_option("--format", trace_format, "trace format")
        ->check(CLI::IsMember({"text", "jsonlines"}));

    int forget_turns = 0;
    double forget_fraction = 0.0;
    CLI::App* lambda = app.add_subcommand("lambda", "calibrate decay strength from a forgetting target");
    lambda->add_option("--tf", forget_turns, "turns after which a mistake is forgotten")->required();
    lambda->add_option("--p", forget_fraction, "forgetting fraction in [0,1)")->required();

    dsteval::SynthConfig synth_config;
    std::string turn_range;
    std::string synth_output = "-";
    CLI::App* synth = app.add_subcommand("synth", "generate a reproducible synthetic prediction file");
    synth->add_option("--seed", synth_config.seed, "generator seed")->required();
    synth->add_option("--conversations", synth_config.conversations, "number of dialogues");
    synth->add_option("--turns", turn_range, "turns per dialogue, as N or MIN..MAX");
    synth->add_option("--domains", synth_config.domain_count, "vocabulary: domain count");
    synth->add_option("--slots", synth_config.slot_count, "vocabulary: slots per domain");
    synth->add_option("--values", synth_config.value_count, "vocabulary: values per slot");
    synth->add_option("--p-type1", synth_config.p_type1, "per-turn chance of a corrupted update");
    synth->add_option("--p-drop", synth_config.p_drop, "per-triplet chance of a dropped update");
    synth->add_option("--p-spurious", synth_config.p_spurious, "per-turn chance of an invented triplet");
    synth->add_option("--p-overwrite", synth_config.p_overwrite, "per-turn chance of a value overwrite");
    synth->add_option("--output", synth_output, "output path, or - for standard output");

    std::string stats_predictions;
    CLI::App* stats = app.add_subcommand("stats", "corpus size statistics");
    stats->add_option("--predictions", stats_predictions, "prediction file, or - for standard input")
        ->required()
        ->check(CLI::ExistingFile | CLI::IsMember({"-"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return kExitUsage;
    }

    std::vector<dsteval::Lambda> lambdas;
    try {
        const std::vector<double>* raw = &eval_flags.lambdas;
        if (compare->parsed()) raw = &compare_flags.lambdas;
        if (trace->parsed()) raw = &trace_flags.lambdas;
        lambdas = resolve_lambdas(*raw);
    } catch (const dsteval::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    if (evaluate->parsed()) return cmd_evaluate(eval_flags, lambdas);
    if (compare->parsed()) return cmd_compare(compare_entries, compare_flags, lambdas);
    if (trace->parsed()) return cmd_trace(trace_flags, dialogue_id, trace_format, lambdas);
    if (lambda->parsed()) return cmd_lambda(forget_turns, forget_fraction);
    if (synth->parsed()) {
        if (!turn_range.empty() &&
            !parse_turn_range(turn_range, synth_config.min_turns, synth_config.max_turns)) {
            std::cerr << "error: --turns wants N or MIN..MAX, got '" << turn_range << "'\n";
            return kExitUsage;
        }
        return cmd_synth(synth_config, synth_output);
    }
    return cmd_stats(stats_predictions);
}
