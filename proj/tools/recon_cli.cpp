// SPDX-License-Identifier: Apache-2.0
// recon: command-line driver for rollouts, training, distillation and reports.
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "recon/config.hpp"
#include "recon/distill.hpp"
#include "recon/evalkit.hpp"
#include "recon/relevance.hpp"
#include "recon/rollout.hpp"
#include "recon/toy.hpp"

namespace fs = std::filesystem;
using namespace recon;
using nlohmann::json;

namespace {

constexpr int kUsageExit = 2;

/// Flags that feed RunConfig. Unset flags leave the file/env value alone.
struct Overrides {
    std::optional<std::string> config_file;
    std::optional<std::string> corpus, index, qa, logs_dir, reports_dir, system_template, policy_script;
    std::optional<std::string> policy_endpoint, summarizer_endpoint, retriever_endpoint;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> sentence_budget;
    std::optional<int> parallel, turns_max, topk, max_prompt_tokens, max_response_tokens;
    std::optional<std::string> aspect;
    bool condense = false;
    bool no_condense = false;
    bool baseline = false;
};

RunConfig effective_config(const Overrides& o)
{
    RunConfig c;
    if (o.config_file)
        apply_config_file(c, *o.config_file);
    apply_environment(c);
    if (o.baseline) {
        auto base = baseline_rollout_config();
        c.rollout.budget = base.budget;
        c.rollout.top_k = base.top_k;
        c.rollout.condense = base.condense;
    }
    auto set = [&](std::string_view key, const std::optional<std::string>& v) {
        if (v)
            apply_config_value(c, key, *v);
    };
    set("corpus", o.corpus);
    set("index", o.index);
    set("qa", o.qa);
    set("logs_dir", o.logs_dir);
    set("reports_dir", o.reports_dir);
    set("system_template", o.system_template);
    set("policy_script", o.policy_script);
    set("policy_endpoint", o.policy_endpoint);
    set("summarizer_endpoint", o.summarizer_endpoint);
    set("retriever_endpoint", o.retriever_endpoint);
    set("rollout.aspect", o.aspect);
    if (o.seed)
        c.seed = *o.seed;
    if (o.sentence_budget)
        c.sentence_budget = *o.sentence_budget;
    if (o.parallel)
        c.parallel = *o.parallel;
    if (o.turns_max)
        c.rollout.budget = *o.turns_max;
    if (o.topk)
        c.rollout.top_k = *o.topk;
    if (o.max_prompt_tokens)
        c.rollout.max_prompt_tokens = *o.max_prompt_tokens;
    if (o.max_response_tokens)
        c.rollout.max_response_tokens = *o.max_response_tokens;
    if (o.condense && o.no_condense)
        throw std::invalid_argument("--condense and --no-condense are mutually exclusive");
    if (o.condense)
        c.rollout.condense = true;
    if (o.no_condense)
        c.rollout.condense = false;
    c.ppo.seed = c.seed;
    c.validate();
    return c;
}

void add_config_flags(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("--config", o.config_file, "key = value run configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "seed for every stochastic component (env: RECON_SEED)");
    cmd->add_option("--logs-dir", o.logs_dir, "directory for the run log");
}

void add_retrieval_flags(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("--index", o.index, "index written by `ingest`");
    cmd->add_option("--corpus", o.corpus, "passage corpus, indexed in memory");
    cmd->add_option("--retriever-endpoint", o.retriever_endpoint, "remote retriever URL");
}

std::string now_iso8601()
{
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void ensure_parent(const std::string& path)
{
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty())
        fs::create_directories(parent);
}

void write_meta(const std::string& artifact, const std::string& command, const RunConfig& config,
                const json& extra = json::object())
{
    json meta{{"artifact", fs::path(artifact).filename().string()},
              {"command", command},
              {"created", now_iso8601()},
              {"config", to_json(config)}};
    meta.update(extra);
    std::ofstream(artifact + ".meta.json") << meta.dump(2) << '\n';
}

void write_json(const std::string& path, const json& j)
{
    ensure_parent(path);
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

std::unique_ptr<Retriever> make_retriever(const RunConfig& c, std::unique_ptr<CorpusIndex>& storage)
{
    if (c.retriever_endpoint)
        return std::make_unique<RemoteRetriever>(*c.retriever_endpoint);
    if (!c.index.empty())
        storage = std::make_unique<CorpusIndex>(load_index(c.index));
    else if (!c.corpus.empty())
        storage = std::make_unique<CorpusIndex>(ingest_corpus(c.corpus));
    else
        throw std::invalid_argument("no retrieval source: pass --index, --corpus or --retriever-endpoint");
    return std::make_unique<LocalRetriever>(*storage);
}

std::string resolve_index_path(const std::string& path)
{
    if (fs::is_directory(path))
        return (fs::path(path) / "index.json").string();
    return path;
}

struct RunRecord {
    std::string command;
    std::optional<RunConfig> config;
    json result = json::object();
};

// ---- ingest ---------------------------------------------------------------

struct IngestArgs {
    Overrides o;
    std::string out;
};

void run_ingest(IngestArgs& a, RunRecord& rec)
{
    auto cfg = effective_config(a.o);
    rec.config = cfg;
    if (cfg.corpus.empty())
        throw std::invalid_argument("ingest needs --corpus");
    const auto index = ingest_corpus(cfg.corpus);
    std::string path = a.out;
    if (path.empty() || path.back() == '/' || fs::is_directory(path) || fs::path(path).extension() != ".json") {
        fs::create_directories(path);
        path = (fs::path(path) / "index.json").string();
    }
    ensure_parent(path);
    save_index(index, path);
    write_meta(path, "ingest", cfg);
    std::cout << "indexed " << index.size() << " documents (" << index.vocabulary_size() << " terms) -> " << path
              << "\n";
    rec.result = {{"documents", index.size()}, {"index", path}};
}

// ---- rollout --------------------------------------------------------------

struct RolloutArgs {
    Overrides o;
    std::string out;
};

void run_rollout_cmd(RolloutArgs& a, RunRecord& rec)
{
    auto o = a.o;
    if (o.index)
        o.index = resolve_index_path(*o.index);
    auto cfg = effective_config(o);
    rec.config = cfg;
    if (cfg.qa.empty())
        throw std::invalid_argument("rollout needs --qa");
    const auto qa = load_qa_file(cfg.qa);

    PolicyFactory factory;
    std::shared_ptr<ScriptBook> book;
    if (!cfg.policy_script.empty() && cfg.policy_endpoint)
        throw std::invalid_argument("choose one of --policy-script and --policy-endpoint");
    if (!cfg.policy_script.empty()) {
        book = std::make_shared<ScriptBook>(ScriptBook::load(cfg.policy_script));
        factory = [book](const std::string& q) -> std::unique_ptr<GenerationBackend> {
            return std::make_unique<ScriptedBackend>(book->script_for(q));
        };
    } else if (cfg.policy_endpoint) {
        const auto ep = *cfg.policy_endpoint;
        factory = [ep](const std::string&) -> std::unique_ptr<GenerationBackend> {
            return std::make_unique<HttpGenerationBackend>(ep);
        };
    } else {
        throw std::invalid_argument("no policy: pass --policy-script or --policy-endpoint");
    }

    std::unique_ptr<CorpusIndex> storage;
    auto retriever = make_retriever(cfg, storage);
    std::unique_ptr<Condenser> condenser;
    if (cfg.summarizer_endpoint)
        condenser = std::make_unique<RemoteCondenser>(*cfg.summarizer_endpoint, cfg.rollout.aspect);
    else
        condenser = std::make_unique<ExtractiveCondenser>(cfg.sentence_budget, cfg.rollout.aspect);

    RolloutContext ctx{*retriever, *condenser};
    if (!cfg.system_template.empty())
        ctx.system_template = load_system_template(cfg.system_template);

    std::vector<std::string> questions;
    for (const auto& e : qa)
        questions.push_back(e.question);
    const auto trajectories = run_batch(questions, factory, ctx, cfg.rollout, cfg.parallel);

    const std::string out = a.out.empty() ? (fs::path(cfg.logs_dir) / "trajectories.jsonl").string() : a.out;
    ensure_parent(out);
    write_trajectory_log(trajectories, out);
    write_meta(out, "rollout", cfg);

    std::size_t failed = 0, answered = 0, tokens = 0;
    for (const auto& t : trajectories) {
        failed += t.failed ? 1 : 0;
        answered += t.final_answer ? 1 : 0;
        tokens += t.total_tokens();
    }
    std::cout << trajectories.size() << " trajectories (" << answered << " answered, " << failed << " failed), mean "
              << std::fixed << std::setprecision(1)
              << (trajectories.empty() ? 0.0 : static_cast<double>(tokens) / trajectories.size())
              << " context tokens -> " << out << "\n";
    rec.result = {{"trajectories", trajectories.size()}, {"failed", failed}, {"out", out}};
    if (failed > 0) {
        for (const auto& t : trajectories) {
            if (t.failed)
                std::cerr << "failed: " << t.question << ": " << t.error << "\n";
        }
    }
}

// ---- train-toy ------------------------------------------------------------

struct ToyArgs {
    Overrides o;
    int iterations = 200;
    int batch_size = 16;
    int minibatches = 2;
    std::size_t facts = 16;
    std::string out;
};

void run_train_toy(ToyArgs& a, RunRecord& rec)
{
    auto cfg = effective_config(a.o);
    rec.config = cfg;
    toy::ToyTrainConfig tc;
    tc.iterations = a.iterations;
    tc.batch_size = a.batch_size;
    tc.minibatches = a.minibatches;
    tc.sentence_budget = a.o.sentence_budget.value_or(1);
    tc.rollout = cfg.rollout;
    tc.ppo = cfg.ppo;

    toy::ToyEnv env({a.facts, cfg.seed});
    const std::string out = a.out.empty() ? (fs::path(cfg.logs_dir) / "toy_curve.jsonl").string() : a.out;
    ensure_parent(out);
    std::ofstream curve(out);
    if (!curve)
        throw std::runtime_error("cannot write " + out);
    auto result = toy::train_toy(env, tc, [&](const toy::IterationLog& log) {
        curve << to_json(log).dump() << '\n';
        if (log.iter % 20 == 0 || log.iter == 1)
            std::cout << "iter " << log.iter << " em " << std::fixed << std::setprecision(3) << log.mean_em
                      << " kl " << log.kl_mean << " ctx " << std::setprecision(1) << log.mean_context_tokens << "\n";
    });
    curve.close();
    write_meta(out, "train-toy", cfg);

    const auto reached = result.first_iteration_reaching(0.9);
    const auto eval = toy::evaluate_policy(env, result.policy, tc);
    std::cout << "first iteration with batch EM >= 0.9: " << (reached ? std::to_string(*reached) : "never") << "\n"
              << "greedy EM " << std::setprecision(3) << eval.mean_em << ", mean context tokens "
              << std::setprecision(1) << eval.mean_context_tokens << ", mean turns " << std::setprecision(2)
              << eval.mean_turns << "\n";
    rec.result = {{"first_iteration_em_0_9", reached ? json(*reached) : json(nullptr)},
                  {"greedy_em", eval.mean_em},
                  {"mean_context_tokens", eval.mean_context_tokens},
                  {"curve", out}};
}

// ---- train-relevance ------------------------------------------------------

struct RelevanceArgs {
    Overrides o;
    std::string data;
    std::string heldout;
    std::string out = "relevance_model.json";
    int epochs = 20;
    double lr = 0.5;
    std::size_t feature_dim = std::size_t{1} << 16;
};

double argmax_accuracy(const RelevanceModel& model, std::span<const RelevanceExample> examples)
{
    if (examples.empty())
        return 0.0;
    std::size_t hits = 0;
    for (const auto& ex : examples)
        hits += score_candidates(model, ex.query, ex.passages).best == *ex.label ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(examples.size());
}

void run_train_relevance(RelevanceArgs& a, RunRecord& rec)
{
    auto cfg = effective_config(a.o);
    rec.config = cfg;
    std::size_t dropped = 0;
    const auto data = load_relevance_dataset(a.data, &dropped);
    if (dropped > 0)
        std::cout << "dropped " << dropped << " unlabeled records\n";
    const auto result = train_relevance(data, {a.lr, a.epochs, cfg.seed}, a.feature_dim);
    ensure_parent(a.out);
    save_relevance_model(result.model, a.out);
    write_meta(a.out, "train-relevance", cfg, {{"epoch_mean_loss", result.epoch_mean_loss}});

    std::cout << std::fixed << std::setprecision(4) << "final mean cross-entropy "
              << result.epoch_mean_loss.back() << ", train accuracy " << argmax_accuracy(result.model, data) << "\n";
    rec.result = {{"final_loss", result.epoch_mean_loss.back()}, {"model", a.out}};
    if (!a.heldout.empty()) {
        const auto held = load_relevance_dataset(a.heldout);
        const double acc = argmax_accuracy(result.model, held);
        std::cout << "held-out accuracy " << acc << "\n";
        rec.result["heldout_accuracy"] = acc;
    }
}

// ---- build-distill --------------------------------------------------------

struct DistillArgs {
    Overrides o;
    std::vector<std::string> logs;
    std::string dataset;
    std::string out = "distill.jsonl";
    std::optional<std::string> teacher_endpoint;
    std::vector<std::string> aspects;
    int max_in_flight = 4;
    int retries = 2;
    std::size_t topk = 5;
};

void run_build_distill(DistillArgs& a, RunRecord& rec)
{
    auto o = a.o;
    if (o.index)
        o.index = resolve_index_path(*o.index);
    auto cfg = effective_config(o);
    rec.config = cfg;

    QueryMap merged;
    for (const auto& log : a.logs) {
        for (auto& [question, queries] : collect_queries_from_log(log)) {
            auto& dst = merged[question];
            dst.insert(dst.end(), queries.begin(), queries.end());
        }
    }
    merged = collect_queries(merged);

    std::unique_ptr<CorpusIndex> storage;
    auto retriever = make_retriever(cfg, storage);
    TripletOptions topts;
    topts.top_k = a.topk;
    for (const auto& key : a.aspects)
        topts.aspects.push_back(parse_aspect(key));
    topts.source_dataset = a.dataset;
    topts.parallel = cfg.parallel;
    auto build = build_triplets(merged, *retriever, topts);

    std::unique_ptr<GenerationBackend> teacher;
    if (a.teacher_endpoint)
        teacher = std::make_unique<HttpGenerationBackend>(Endpoint::parse(*a.teacher_endpoint));
    EmitOptions eopts;
    eopts.max_in_flight = a.max_in_flight;
    eopts.retries = a.retries;
    ensure_parent(a.out);
    const auto stats = emit_dataset(build.triplets, a.out, teacher.get(), eopts);
    write_meta(a.out, "build-distill", cfg, {{"stats", to_json(stats)}, {"queries", query_count(merged)}});

    std::cout << query_count(merged) << " distinct queries over " << merged.size() << " questions\n"
              << format_distill_report(build, stats);
    rec.result = {{"triplets", stats.records}, {"skipped", build.skipped.size()}, {"out", a.out}};
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
    Overrides o;
    std::vector<std::string> logs;
    std::vector<std::string> names;
    std::vector<std::string> qa_files;
    std::string out;
    bool csv = false;
};

void run_eval(EvalArgs& a, RunRecord& rec)
{
    auto cfg = effective_config(a.o);
    rec.config = cfg;
    if (!a.names.empty() && a.names.size() != a.logs.size())
        throw std::invalid_argument("--name must be given once per --log");
    if (a.qa_files.size() != 1 && a.qa_files.size() != a.logs.size())
        throw std::invalid_argument("--qa must be given once, or once per --log");

    std::vector<MetricsRow> rows;
    for (std::size_t i = 0; i < a.logs.size(); ++i) {
        const auto trajectories = load_trajectory_log(a.logs[i]);
        const auto qa = load_qa_file(a.qa_files.size() == 1 ? a.qa_files[0] : a.qa_files[i]);
        const auto name = a.names.empty() ? fs::path(a.logs[i]).stem().string() : a.names[i];
        rows.push_back(accumulate_metrics(name, trajectories, qa));
    }
    const auto report = MetricsReport::from_rows(std::move(rows));
    const std::string out = a.out.empty() ? (fs::path(cfg.reports_dir) / "metrics.json").string() : a.out;
    write_json(out, to_json(report));
    write_meta(out, "eval", cfg);
    std::cout << (a.csv ? format_csv(report) : format_table(report));
    rec.result = {{"rows", report.rows.size()}, {"out", out}};
}

// ---- report ---------------------------------------------------------------

struct ReportArgs {
    Overrides o;
    std::string baseline;
    std::string ours;
    std::string out;
};

void run_report(ReportArgs& a, RunRecord& rec)
{
    auto cfg = effective_config(a.o);
    rec.config = cfg;
    const auto base = load_metrics_report(a.baseline);
    const auto ours = load_metrics_report(a.ours);
    const auto cmp = compare_reports(base, ours);
    std::cout << format_comparison(cmp, base, ours);
    if (!a.out.empty()) {
        write_json(a.out, to_json(cmp));
        write_meta(a.out, "report", cfg, {{"baseline", a.baseline}, {"ours", a.ours}});
    }
    rec.result = {{"context_reduction_pct", cmp.aggregate.context_reduction_pct},
                  {"time_reduction_pct", cmp.aggregate.time_reduction_pct}};
}

void append_run_log(const std::string& logs_dir, const RunRecord& rec, const std::vector<std::string>& argv,
                    int exit_code, const std::string& error)
{
    try {
        fs::create_directories(logs_dir);
        json entry{{"time", now_iso8601()},
                   {"command", rec.command},
                   {"argv", argv},
                   {"exit", exit_code},
                   {"config", rec.config ? to_json(*rec.config) : json(nullptr)},
                   {"result", rec.result}};
        if (!error.empty())
            entry["error"] = error;
        std::ofstream((fs::path(logs_dir) / "runs.jsonl").string(), std::ios::app) << entry.dump() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "warning: could not append to run log: " << e.what() << "\n";
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"recon: retrieval rollouts with in-loop context condensation"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand all help");

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Build a BM25 index from a JSONL corpus");
    add_config_flags(c_ingest, ingest.o);
    c_ingest->add_option("--corpus", ingest.o.corpus, "JSONL corpus {id, title, text}")->required();
    c_ingest->add_option("--out", ingest.out, "output directory or .json file")->required();

    RolloutArgs rollout;
    auto* c_rollout = app.add_subcommand("rollout", "Run a batch of search/answer rollouts");
    add_config_flags(c_rollout, rollout.o);
    add_retrieval_flags(c_rollout, rollout.o);
    c_rollout->add_option("--qa", rollout.o.qa, "JSONL {question, golden_answers}");
    c_rollout->add_option("--out", rollout.out, "trajectory log (default <logs-dir>/trajectories.jsonl)");
    c_rollout->add_flag("--condense", rollout.o.condense, "condense retrieved documents before injection");
    c_rollout->add_flag("--no-condense", rollout.o.no_condense, "inject raw documents");
    c_rollout->add_flag("--baseline", rollout.o.baseline, "three actions, top-3, no condensation");
    c_rollout->add_option("--turns-max", rollout.o.turns_max, "action budget per rollout");
    c_rollout->add_option("--topk", rollout.o.topk, "documents retrieved per search");
    c_rollout->add_option("--aspect", rollout.o.aspect, "summary aspect");
    c_rollout->add_option("--sentence-budget", rollout.o.sentence_budget, "sentences kept by the extractive condenser");
    c_rollout->add_option("--max-prompt-tokens", rollout.o.max_prompt_tokens);
    c_rollout->add_option("--max-response-tokens", rollout.o.max_response_tokens);
    c_rollout->add_option("--parallel", rollout.o.parallel, "concurrent trajectories");
    c_rollout->add_option("--policy-script", rollout.o.policy_script, "JSONL {question, segments}");
    c_rollout->add_option("--policy-endpoint", rollout.o.policy_endpoint, "generation server URL");
    c_rollout->add_option("--summarizer-endpoint", rollout.o.summarizer_endpoint, "summarizer generation server URL");
    c_rollout->add_option("--system-template", rollout.o.system_template, "prompt template with {question}");

    ToyArgs toy_args;
    auto* c_toy = app.add_subcommand("train-toy", "PPO on the synthetic lookup environment");
    add_config_flags(c_toy, toy_args.o);
    c_toy->add_option("--iterations", toy_args.iterations)->check(CLI::PositiveNumber);
    c_toy->add_option("--batch-size", toy_args.batch_size)->check(CLI::PositiveNumber);
    c_toy->add_option("--minibatches", toy_args.minibatches)->check(CLI::PositiveNumber);
    c_toy->add_option("--facts", toy_args.facts)->check(CLI::Range(1, 100));
    c_toy->add_option("--turns-max", toy_args.o.turns_max);
    c_toy->add_option("--topk", toy_args.o.topk);
    c_toy->add_option("--sentence-budget", toy_args.o.sentence_budget);
    c_toy->add_flag("--condense", toy_args.o.condense);
    c_toy->add_flag("--no-condense", toy_args.o.no_condense);
    c_toy->add_option("--out", toy_args.out, "learning curve JSONL (default <logs-dir>/toy_curve.jsonl)");

    RelevanceArgs rel;
    auto* c_rel = app.add_subcommand("train-relevance", "Fit the listwise passage scorer");
    add_config_flags(c_rel, rel.o);
    c_rel->add_option("--data", rel.data, "JSONL {query, passages[10], label}")->required();
    c_rel->add_option("--heldout", rel.heldout, "held-out JSONL for argmax accuracy");
    c_rel->add_option("--out", rel.out);
    c_rel->add_option("--epochs", rel.epochs)->check(CLI::PositiveNumber);
    c_rel->add_option("--lr", rel.lr)->check(CLI::PositiveNumber);
    c_rel->add_option("--feature-dim", rel.feature_dim, "hashed feature width, power of two");

    DistillArgs dist;
    auto* c_dist = app.add_subcommand("build-distill", "Harvest queries and emit summarizer training triplets");
    add_config_flags(c_dist, dist.o);
    add_retrieval_flags(c_dist, dist.o);
    c_dist->add_option("--log", dist.logs, "trajectory log (repeatable)")->required();
    c_dist->add_option("--dataset", dist.dataset, "source dataset label for the stats");
    c_dist->add_option("--out", dist.out);
    c_dist->add_option("--teacher-endpoint", dist.teacher_endpoint, "generation server that writes summaries");
    c_dist->add_option("--aspect", dist.aspects, "restrict to these aspects (repeatable)");
    c_dist->add_option("--topk", dist.topk)->check(CLI::Range(1, 5));
    c_dist->add_option("--max-in-flight", dist.max_in_flight)->check(CLI::PositiveNumber);
    c_dist->add_option("--retries", dist.retries)->check(CLI::NonNegativeNumber);
    c_dist->add_option("--parallel", dist.o.parallel);

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Metrics report from trajectory logs");
    add_config_flags(c_eval, ev.o);
    c_eval->add_option("--log", ev.logs, "trajectory log (repeatable, one row each)")->required();
    c_eval->add_option("--name", ev.names, "row name per --log (default: file stem)");
    c_eval->add_option("--qa", ev.qa_files, "QA file, once or once per --log")->required();
    c_eval->add_option("--out", ev.out, "report JSON (default <reports-dir>/metrics.json)");
    c_eval->add_option("--reports-dir", ev.o.reports_dir);
    c_eval->add_flag("--csv", ev.csv);

    ReportArgs rep;
    auto* c_rep = app.add_subcommand("report", "Compare two metrics reports");
    add_config_flags(c_rep, rep.o);
    c_rep->add_option("--baseline", rep.baseline)->required()->check(CLI::ExistingFile);
    c_rep->add_option("--ours", rep.ours)->required()->check(CLI::ExistingFile);
    c_rep->add_option("--out", rep.out, "comparison JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        if (e.get_exit_code() != 0)
            std::cerr << app.help();
        return e.get_exit_code() == 0 ? 0 : kUsageExit;
    }

    std::vector<std::string> args(argv + 1, argv + argc);
    RunRecord rec;
    rec.command = app.get_subcommands().front()->get_name();
    Overrides* overrides = nullptr;
    int code = 0;
    std::string error;
    try {
        if (*c_ingest)
            overrides = &ingest.o, run_ingest(ingest, rec);
        else if (*c_rollout)
            overrides = &rollout.o, run_rollout_cmd(rollout, rec);
        else if (*c_toy)
            overrides = &toy_args.o, run_train_toy(toy_args, rec);
        else if (*c_rel)
            overrides = &rel.o, run_train_relevance(rel, rec);
        else if (*c_dist)
            overrides = &dist.o, run_build_distill(dist, rec);
        else if (*c_eval)
            overrides = &ev.o, run_eval(ev, rec);
        else if (*c_rep)
            overrides = &rep.o, run_report(rep, rec);
    } catch (const std::exception& e) {
        error = e.what();
        std::cerr << "recon " << rec.command << ": " << error << "\n";
        code = 1;
    }

    std::string logs_dir = rec.config ? rec.config->logs_dir : "logs";
    if (!rec.config && overrides != nullptr && overrides->logs_dir)
        logs_dir = *overrides->logs_dir;
    append_run_log(logs_dir, rec, args, code, error);
    return code;
}
