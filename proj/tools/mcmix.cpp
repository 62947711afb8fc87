// mcmix: sessionize event logs, cluster sessions into a mixture of Markov
// chains, run synthetic recovery experiments, evaluate and export chains.
//
// Every command writes into --out: its result files plus manifest.json.
// Results are computed in memory first; nothing is written on failure.
// Exit codes: 0 ok, 1 usage, 2 I/O, 3 data validation.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mcmix/mcmix.hpp"

namespace fs = std::filesystem;
using namespace mcmix;

namespace {

using Outputs = std::map<std::string, std::string>;  // file name -> contents

std::ifstream open_input(const std::string& path) {
    if (!fs::is_regular_file(path)) throw io_error("cannot open input '" + path + "'");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open input '" + path + "'");
    return in;
}

void write_outputs(const std::string& dir, const Outputs& outputs, ordered_json manifest,
                   std::chrono::steady_clock::time_point started) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory '" + dir + "': " + ec.message());
    ordered_json files = ordered_json::array();
    for (const auto& [name, contents] : outputs) {
        const auto path = fs::path(dir) / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << contents;
        if (!out) throw io_error("cannot write '" + path.string() + "'");
        files.push_back(name);
    }
    manifest["outputs"] = std::move(files);
    manifest["tool_version"] = kVersion;
    manifest["duration_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) throw io_error("cannot write manifest in '" + dir + "'");
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw usage_error(std::string("bad value in ") + what + ": '" + tok + "'");
        }
    }
    if (out.empty()) throw usage_error(std::string(what) + " is empty");
    return out;
}

std::vector<std::size_t> parse_k_range(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw usage_error("--k-range expects LO:HI");
    int lo = 0, hi = 0;
    if (!detail::read_int(std::string_view(text).substr(0, colon), lo) ||
        !detail::read_int(std::string_view(text).substr(colon + 1), hi))
        throw usage_error("--k-range expects LO:HI with nonnegative integers");
    if (lo < 1 || hi < lo) throw usage_error("--k-range needs 1 <= LO <= HI");
    std::vector<std::size_t> ks;
    for (int k = lo; k <= hi; ++k) ks.push_back(std::size_t(k));
    return ks;
}

struct ClusterFlags {
    int k = 0;
    std::string k_range;
    int restarts = 5;
    double convergence_fraction = 0.05;
    int max_iterations = 100;
    double smoothing = 1e-6;
    std::uint64_t seed = kDefaultSeed;

    void add_to(CLI::App* cmd, bool with_k) {
        if (with_k) {
            cmd->add_option("--k", k, "number of chains");
            cmd->add_option("--k-range", k_range, "sweep k over LO:HI inclusive");
        }
        cmd->add_option("--restarts", restarts, "independent runs per k")->capture_default_str();
        cmd->add_option("--convergence-frac", convergence_fraction, "stop when fewer sequences change chain")
            ->capture_default_str();
        cmd->add_option("--max-iters", max_iterations, "iteration cap per run")->capture_default_str();
        cmd->add_option("--smoothing", smoothing, "pseudocount per allowed edge")->capture_default_str();
        cmd->add_option("--seed", seed, "random seed")->capture_default_str();
    }

    ClusterConfig config(std::size_t k_value) const {
        if (restarts < 1) throw usage_error("--restarts must be >= 1");
        if (max_iterations < 1) throw usage_error("--max-iters must be >= 1");
        ClusterConfig c;
        c.k = k_value;
        c.restarts = std::size_t(restarts);
        c.convergence_fraction = convergence_fraction;
        c.max_iterations = std::size_t(max_iterations);
        c.smoothing = smoothing;
        c.rng_seed = seed;
        c.validate();
        return c;
    }

    ordered_json to_json() const {
        ordered_json j;
        if (k) j["k"] = k;
        if (!k_range.empty()) j["k_range"] = k_range;
        j["restarts"] = restarts;
        j["convergence_frac"] = convergence_fraction;
        j["max_iters"] = max_iterations;
        j["smoothing"] = smoothing;
        j["seed"] = seed;
        return j;
    }
};

std::vector<EncodedSequence> sequences_of(const std::vector<SessionRecord>& records) {
    std::vector<EncodedSequence> seqs;
    seqs.reserve(records.size());
    for (const auto& r : records) seqs.push_back(r.sequence);
    return seqs;
}

std::string assignments_csv(const std::vector<SessionRecord>& records, const Assignment& a) {
    std::ostringstream os;
    os << "session_id,chain_index,log_likelihood\n";
    for (std::size_t i = 0; i < records.size(); ++i)
        os << records[i].session_id << ',' << a.chain[i] << ',' << format_double(a.log_likelihood[i]) << '\n';
    return os.str();
}

std::string sweep_csv(const std::vector<SweepEntry>& sweep) {
    std::ostringstream os;
    os << "k,sum_log_likelihood,unsupported_count,iterations_run\n";
    for (const auto& e : sweep)
        os << e.k << ',' << format_double(e.sum_log_likelihood) << ',' << e.unsupported_count << ','
           << e.iterations_run << '\n';
    return os.str();
}

// ------------------------------------------------------------- sessionize

struct SessionizeFlags {
    std::string input;
    std::string out;
    double gap_minutes = 15.0;
    bool header = false;
};

void cmd_sessionize(const SessionizeFlags& f) {
    const auto started = std::chrono::steady_clock::now();
    if (!(f.gap_minutes > 0.0)) throw usage_error("--gap-minutes must be positive");
    const std::chrono::seconds gap{std::llround(f.gap_minutes * 60.0)};
    if (gap.count() < 1) throw usage_error("--gap-minutes must be at least one second");

    auto in = open_input(f.input);
    auto parsed = parse_events(in, f.header);
    const auto sessions = sessionize(std::move(parsed.events), gap);
    const auto stats = corpus_stats(sessions);

    std::vector<SessionRecord> records;
    records.reserve(sessions.size());
    for (const auto& s : sessions) records.push_back({s.session_id(), s.student_id, encode(s)});

    Outputs outputs;
    std::ostringstream sess;
    write_sessions(sess, records);
    outputs["sessions.csv"] = sess.str();

    ordered_json hist = ordered_json::array();
    std::ostringstream hist_csv;
    hist_csv << "length,count\n";
    for (const auto& [len, c] : stats.length_histogram) {
        hist.push_back({len, c});
        hist_csv << len << ',' << c << '\n';
    }
    outputs["length_histogram.csv"] = hist_csv.str();
    ordered_json sj = {{"records", parsed.records},
                       {"malformed_lines", parsed.malformed},
                       {"n_sequences", stats.n_sequences},
                       {"n_actions", stats.n_actions},
                       {"n_lessons", stats.n_lessons},
                       {"n_correct", stats.n_correct},
                       {"n_wrong", stats.n_wrong},
                       {"n_students", stats.n_students()},
                       {"sessions_per_student_mean", stats.mean_sessions_per_student()},
                       {"sessions_per_student_stddev", stats.stddev_sessions_per_student()},
                       {"length_histogram", hist}};
    outputs["stats.json"] = sj.dump(2) + "\n";

    ordered_json manifest = {{"command", "sessionize"},
                             {"flags", {{"gap_minutes", f.gap_minutes}, {"header", f.header}}},
                             {"rng_seed", nullptr},
                             {"inputs", {f.input}},
                             {"output_dir", f.out}};
    write_outputs(f.out, outputs, std::move(manifest), started);
    std::cout << "sessions: " << stats.n_sequences << "  actions: " << stats.n_actions
              << "  malformed lines: " << parsed.malformed << '\n';
}

// ------------------------------------------------------------- cluster

struct ClusterCmdFlags {
    std::string sessions;
    std::string out;
    ClusterFlags cluster;
};

void cmd_cluster(const ClusterCmdFlags& f) {
    const auto started = std::chrono::steady_clock::now();
    const bool single = f.cluster.k != 0;
    if (single == !f.cluster.k_range.empty()) throw usage_error("give exactly one of --k or --k-range");
    if (single && f.cluster.k < 1) throw usage_error("--k must be >= 1");
    const auto ks = single ? std::vector<std::size_t>{std::size_t(f.cluster.k)} : parse_k_range(f.cluster.k_range);
    const auto base = f.cluster.config(ks.front());

    auto in = open_input(f.sessions);
    const auto records = read_sessions(in);
    if (records.empty()) throw data_error("sessions file has no sessions");
    const auto seqs = sequences_of(records);

    Outputs outputs;
    if (single) {
        const auto model = fit(seqs, base);
        Assignment a{model.assignments, model.log_likelihoods, model.sum_log_likelihood, model.unsupported_count};
        outputs["model.json"] = model_json(model).dump(2) + "\n";
        outputs["assignments.csv"] = assignments_csv(records, a);
        outputs["sweep.csv"] =
            sweep_csv({{base.k, model.sum_log_likelihood, model.unsupported_count, model.iterations_run}});
        std::cout << "k=" << base.k << "  sum_log_likelihood=" << format_double(model.sum_log_likelihood)
                  << "  iterations=" << model.iterations_run << "  unsupported_count=" << model.unsupported_count
                  << '\n';
    } else {
        const auto sweep = k_sweep(seqs, ks, base);
        outputs["sweep.csv"] = sweep_csv(sweep);
        for (const auto& e : sweep)
            std::cout << "k=" << e.k << "  sum_log_likelihood=" << format_double(e.sum_log_likelihood)
                      << "  unsupported_count=" << e.unsupported_count << '\n';
    }
    ordered_json manifest = {{"command", "cluster"},
                             {"flags", f.cluster.to_json()},
                             {"rng_seed", f.cluster.seed},
                             {"inputs", {f.sessions}},
                             {"output_dir", f.out}};
    write_outputs(f.out, outputs, std::move(manifest), started);
}

// ------------------------------------------------------------- synth

struct SynthFlags {
    std::string out;
    int k_true = 6;
    int n = 50000;
    double end_prob = 0.05;
    std::string alphas = "0,0.2,0.4,0.6,0.8,1";
    int reps = 10;
    ClusterFlags cluster;
};

void cmd_synth(const SynthFlags& f) {
    const auto started = std::chrono::steady_clock::now();
    const auto alphas = parse_double_list(f.alphas, "--alphas");
    for (double a : alphas)
        if (!(a >= 0.0 && a <= 1.0)) throw usage_error("--alphas values must lie in [0, 1]");
    if (f.k_true < 1 || f.n < 1 || f.reps < 1) throw usage_error("--k-true, --n and --reps must be >= 1");
    SyntheticConfig sc;
    sc.k_true = std::size_t(f.k_true);
    sc.n_sequences = std::size_t(f.n);
    sc.end_probability = f.end_prob;
    sc.repetitions = std::size_t(f.reps);
    sc.rng_seed = f.cluster.seed;
    sc.validate();
    const auto cc = f.cluster.config(sc.k_true);

    Outputs outputs;
    const auto corpus = generate_corpus(sc, 0);
    std::vector<SessionRecord> records;
    std::vector<LabelRecord> labels;
    for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
        const auto& id = corpus.sequences[i].source_id();
        records.push_back({id, id, corpus.sequences[i]});
        labels.push_back({id, corpus.generator_index[i], corpus.labels[i]});
    }
    std::ostringstream sess, lab;
    write_sessions(sess, records);
    write_labels(lab, labels);
    outputs["sessions.csv"] = sess.str();
    outputs["labels.csv"] = lab.str();
    outputs["generators.json"] = chains_json(corpus.generators).dump(2) + "\n";

    const auto sweep = noise_sweep_experiment(sc, alphas, cc);
    std::ostringstream rows, summary;
    rows << "alpha,repetition,purity,purity_generator,sum_log_likelihood\n";
    for (const auto& r : sweep.rows)
        rows << format_double(r.alpha) << ',' << r.repetition << ',' << format_double(r.purity) << ','
             << format_double(r.purity_generator) << ',' << format_double(r.sum_log_likelihood) << '\n';
    summary << "alpha,mean_purity,mean_purity_generator,mean_sum_log_likelihood\n";
    for (const auto& s : sweep.summary) {
        summary << format_double(s.alpha) << ',' << format_double(s.mean_purity) << ','
                << format_double(s.mean_purity_generator) << ',' << format_double(s.mean_sum_log_likelihood)
                << '\n';
        std::cout << "alpha=" << format_double(s.alpha) << "  mean_purity=" << format_double(s.mean_purity)
                  << "  mean_purity_generator=" << format_double(s.mean_purity_generator) << '\n';
    }
    outputs["noise_sweep.csv"] = rows.str();
    outputs["noise_summary.csv"] = summary.str();

    auto flags = f.cluster.to_json();
    flags["k_true"] = f.k_true;
    flags["n"] = f.n;
    flags["end_prob"] = f.end_prob;
    flags["alphas"] = f.alphas;
    flags["reps"] = f.reps;
    ordered_json manifest = {{"command", "synth"},
                             {"flags", flags},
                             {"rng_seed", f.cluster.seed},
                             {"inputs", ordered_json::array()},
                             {"output_dir", f.out}};
    write_outputs(f.out, outputs, std::move(manifest), started);
}

// ------------------------------------------------------------- eval

struct EvalFlags {
    std::string model;
    std::string sessions;
    std::string out;
    std::string truth;
    std::string truth_column = "label";
    bool profiles = false;
    bool permutation_baseline = false;
    ClusterFlags cluster;
};

void cmd_eval(const EvalFlags& f) {
    const auto started = std::chrono::steady_clock::now();
    if (!f.cluster.k_range.empty() && !f.permutation_baseline)
        throw usage_error("--k-range only applies with --permutation-baseline");

    auto model_in = open_input(f.model);
    const auto model = read_model(model_in);
    auto sess_in = open_input(f.sessions);
    const auto records = read_sessions(sess_in);
    if (records.empty()) throw data_error("sessions file has no sessions");
    const auto seqs = sequences_of(records);
    const std::size_t k = model.chains.size();

    std::map<std::string, std::size_t> truth;
    if (!f.truth.empty()) {
        auto truth_in = open_input(f.truth);
        truth = read_label_column(truth_in, f.truth_column);
    }

    const auto a = assign_step(seqs, std::span<const MarkovChain>(model.chains));
    Outputs outputs;
    outputs["assignments.csv"] = assignments_csv(records, a);

    ordered_json report;
    report["k"] = k;
    report["n_sequences"] = seqs.size();
    report["sum_log_likelihood"] = a.sum_log_likelihood;
    report["unsupported_count"] = a.unsupported;

    const auto stats = chain_stats(seqs, a.chain, k);
    std::ostringstream cs;
    cs << "chain,n_sequences,mean_length\n";
    ordered_json cj = ordered_json::array();
    for (const auto& s : stats) {
        cs << s.chain << ',' << s.n_sequences << ',' << format_double(s.mean_length) << '\n';
        cj.push_back({{"chain", s.chain}, {"n_sequences", s.n_sequences}, {"mean_length", s.mean_length}});
    }
    outputs["chain_stats.csv"] = cs.str();
    report["chain_stats"] = std::move(cj);

    if (!f.truth.empty()) {
        std::vector<std::size_t> truth_labels;
        truth_labels.reserve(records.size());
        for (const auto& r : records) {
            const auto it = truth.find(r.session_id);
            if (it == truth.end()) throw data_error("no truth label for session '" + r.session_id + "'");
            truth_labels.push_back(it->second);
        }
        const auto p = average_purity(a.chain, truth_labels);
        std::ostringstream pc;
        pc << "cluster,size,purity\n";
        for (std::size_t i = 0; i < p.cluster_ids.size(); ++i)
            pc << p.cluster_ids[i] << ',' << p.cluster_sizes[i] << ',' << format_double(p.cluster_purity[i]) << '\n';
        outputs["purity.csv"] = pc.str();
        report["purity"] = {{"truth_column", f.truth_column},
                            {"average_purity", p.average_purity},
                            {"weighted_purity", p.weighted_purity},
                            {"n_clusters", p.n_clusters},
                            {"k_true", p.k_true}};
        std::cout << "average_purity=" << format_double(p.average_purity) << '\n';
    }

    if (f.profiles) {
        std::vector<AssignedSession> assigned;
        assigned.reserve(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) assigned.push_back({records[i].student_id, a.chain[i]});
        const auto prof = student_profiles(assigned, k);
        std::ostringstream pc;
        pc << "student_id,n_sessions,support_size";
        for (std::size_t j = 0; j < k; ++j) pc << ",p" << j;
        pc << '\n';
        for (const auto& p : prof.profiles) {
            std::size_t n = 0;
            for (auto c : p.counts) n += c;
            pc << p.student_id << ',' << n << ',' << p.support_size;
            for (double d : p.distribution) pc << ',' << format_double(d);
            pc << '\n';
        }
        outputs["profiles.csv"] = pc.str();
        report["profiles"] = {{"n_students", prof.profiles.size()},
                              {"mean_support_size", prof.mean_support},
                              {"stddev_support_size", prof.stddev_support}};
    }

    if (f.permutation_baseline) {
        const auto ks = f.cluster.k_range.empty() ? std::vector<std::size_t>{k} : parse_k_range(f.cluster.k_range);
        const auto rows = permutation_baseline(seqs, ks, f.cluster.config(ks.front()));
        std::ostringstream pc;
        pc << "k,sum_log_likelihood_real,sum_log_likelihood_permuted\n";
        ordered_json pj = ordered_json::array();
        for (const auto& r : rows) {
            pc << r.k << ',' << format_double(r.real_log_likelihood) << ','
               << format_double(r.permuted_log_likelihood) << '\n';
            pj.push_back({{"k", r.k}, {"real", r.real_log_likelihood}, {"permuted", r.permuted_log_likelihood}});
        }
        outputs["permutation.csv"] = pc.str();
        report["permutation_baseline"] = std::move(pj);
    }

    outputs["report.json"] = report.dump(2) + "\n";
    auto flags = f.cluster.to_json();
    flags["truth_column"] = f.truth_column;
    flags["profiles"] = f.profiles;
    flags["permutation_baseline"] = f.permutation_baseline;
    ordered_json inputs = {f.model, f.sessions};
    if (!f.truth.empty()) inputs.push_back(f.truth);
    ordered_json manifest = {{"command", "eval"},
                             {"flags", flags},
                             {"rng_seed", f.cluster.seed},
                             {"inputs", inputs},
                             {"output_dir", f.out}};
    write_outputs(f.out, outputs, std::move(manifest), started);
    std::cout << "k=" << k << "  sum_log_likelihood=" << format_double(a.sum_log_likelihood) << '\n';
}

// ------------------------------------------------------------- export-dot

struct DotFlags {
    std::string model;
    std::string out;
    double coverage = 0.7;
};

void cmd_export_dot(const DotFlags& f) {
    const auto started = std::chrono::steady_clock::now();
    if (!(f.coverage > 0.0 && f.coverage <= 1.0)) throw usage_error("--coverage must lie in (0, 1]");
    auto in = open_input(f.model);
    const auto model = read_model(in);
    Outputs outputs;
    for (std::size_t i = 0; i < model.chains.size(); ++i)
        outputs["chain_" + std::to_string(i) + ".dot"] = to_dot(model.chains[i], i, f.coverage);
    ordered_json manifest = {{"command", "export-dot"},
                             {"flags", {{"coverage", f.coverage}}},
                             {"rng_seed", nullptr},
                             {"inputs", {f.model}},
                             {"output_dir", f.out}};
    write_outputs(f.out, outputs, std::move(manifest), started);
    std::cout << "wrote " << model.chains.size() << " DOT files\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cluster event sessions into a mixture of Markov chains"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    SessionizeFlags sf;
    auto* sess = app.add_subcommand("sessionize", "split an event log into encoded sessions");
    sess->add_option("--input", sf.input, "event CSV")->required();
    sess->add_option("--out", sf.out, "output directory")->required();
    sess->add_option("--gap-minutes", sf.gap_minutes, "session gap")->capture_default_str();
    sess->add_flag("--header", sf.header, "input has a header line");

    ClusterCmdFlags cf;
    auto* clu = app.add_subcommand("cluster", "fit a mixture of Markov chains");
    clu->add_option("--sessions", cf.sessions, "sessions CSV")->required();
    clu->add_option("--out", cf.out, "output directory")->required();
    cf.cluster.add_to(clu, true);

    SynthFlags yf;
    auto* syn = app.add_subcommand("synth", "synthetic corpus and noisy-prior sweep");
    syn->add_option("--out", yf.out, "output directory")->required();
    syn->add_option("--k-true", yf.k_true, "generator chains")->capture_default_str();
    syn->add_option("--n", yf.n, "sequences per corpus")->capture_default_str();
    syn->add_option("--end-prob", yf.end_prob, "probability of ending from each action state")
        ->capture_default_str();
    syn->add_option("--alphas", yf.alphas, "comma-separated noise levels in [0,1]")->capture_default_str();
    syn->add_option("--reps", yf.reps, "repetitions")->capture_default_str();
    yf.cluster.add_to(syn, false);

    EvalFlags ef;
    auto* ev = app.add_subcommand("eval", "evaluate a model on sessions");
    ev->add_option("--model", ef.model, "model JSON")->required();
    ev->add_option("--sessions", ef.sessions, "sessions CSV")->required();
    ev->add_option("--out", ef.out, "output directory")->required();
    ev->add_option("--truth", ef.truth, "labels CSV for purity");
    ev->add_option("--truth-column", ef.truth_column, "column of the labels CSV to score against")
        ->capture_default_str();
    ev->add_flag("--profiles", ef.profiles, "emit per-student chain distributions");
    ev->add_flag("--permutation-baseline", ef.permutation_baseline, "compare against interior-permuted sessions");
    ef.cluster.add_to(ev, false);
    ev->add_option("--k-range", ef.cluster.k_range, "k values for the permutation baseline, LO:HI");

    DotFlags df;
    auto* dot = app.add_subcommand("export-dot", "write one Graphviz file per chain");
    dot->add_option("--model", df.model, "model JSON")->required();
    dot->add_option("--out", df.out, "output directory")->required();
    dot->add_option("--coverage", df.coverage, "probability mass drawn per state")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*sess) cmd_sessionize(sf);
        else if (*clu) cmd_cluster(cf);
        else if (*syn) cmd_synth(yf);
        else if (*ev) cmd_eval(ef);
        else if (*dot) cmd_export_dot(df);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
