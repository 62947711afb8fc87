#pragma once

/* Modified k-means over Markov chains.
 *
 * A run starts from k priors and alternates
 *   assign:     each sequence goes to the chain under which it is most likely;
 *   re-estimate: each chain becomes the transition-frequency estimate of its
 *               assigned sequences (plus an optional pseudocount per edge);
 * until fewer than `convergence_fraction` of the sequences changed chain
 * relative to the previous assignment, or `max_iterations` is hit. The final
 * chains are re-estimated from the last assignment and every sequence is then
 * reassigned to them, so assignments are always the argmax under the chains.
 */

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mcmix/chain.hpp"
#include "mcmix/error.hpp"
#include "mcmix/random.hpp"
#include "mcmix/sequence.hpp"

namespace mcmix {

struct ClusterConfig {
    std::size_t k = 1;
    std::size_t restarts = 5;
    double convergence_fraction = 0.05;
    std::size_t max_iterations = 100;
    double smoothing = 1e-6;
    std::uint64_t rng_seed = kDefaultSeed;

    void validate() const {
        if (k < 1) throw usage_error("k must be >= 1");
        if (restarts < 1) throw usage_error("restarts must be >= 1");
        if (!(convergence_fraction > 0.0 && convergence_fraction <= 1.0))
            throw usage_error("convergence fraction must lie in (0, 1]");
        if (max_iterations < 1) throw usage_error("max iterations must be >= 1");
        if (!(smoothing >= 0.0) || smoothing == std::numeric_limits<double>::infinity())
            throw usage_error("smoothing must be a finite nonnegative number");
    }
};

struct Assignment {
    std::vector<std::size_t> chain;          // per sequence
    std::vector<double> log_likelihood;      // per sequence, -inf when unsupported
    double sum_log_likelihood = 0.0;         // over supported sequences only
    std::size_t unsupported = 0;
};

struct RunDiagnostics {
    std::size_t iterations = 0;
    std::vector<double> reassignment_history;  // fraction changed per assignment
    std::vector<double> log_likelihood_history;  // objective after each assignment
    std::size_t reseeded_clusters = 0;
    double sum_log_likelihood = 0.0;
    std::size_t unsupported_count = 0;
};

struct ClusterModel {
    ClusterConfig config;
    std::vector<MarkovChain> chains;
    std::vector<std::size_t> assignments;
    std::vector<double> log_likelihoods;
    double sum_log_likelihood = 0.0;
    std::size_t iterations_run = 0;
    std::vector<double> reassignment_history;
    std::vector<double> log_likelihood_history;
    std::size_t unsupported_count = 0;
    std::size_t reseeded_clusters = 0;
    std::size_t selected_restart = 0;
    std::vector<RunDiagnostics> runs;  // one per restart, in restart order
};

/// Independent Uniform(0,1) weight on every allowed edge, rows normalized.
inline MarkovChain random_prior(Rng& rng) {
    TransitionMatrix p{};
    for (auto from : kAllStates) {
        if (from == State::E) continue;
        double sum = 0.0;
        for (auto to : kAllStates)
            if (allowed_edge(from, to)) sum += p[index(from)][index(to)] = uniform01(rng);
        for (auto& v : p[index(from)]) v /= sum;
    }
    return MarkovChain(p);
}

inline Assignment assign_step(std::span<const EncodedSequence> seqs, std::span<const LogChain> chains) {
    if (chains.empty()) throw usage_error("assign_step: empty chain list");
    Assignment a;
    a.chain.resize(seqs.size());
    a.log_likelihood.resize(seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        const auto choice = most_likely_chain(seqs[i], chains);
        a.chain[i] = choice.index;
        a.log_likelihood[i] = choice.log_likelihood.value;
    }
    // Separate pass so the sum is accumulated in sequence order.
    for (double ll : a.log_likelihood) {
        if (ll == -std::numeric_limits<double>::infinity())
            ++a.unsupported;
        else
            a.sum_log_likelihood += ll;
    }
    return a;
}

inline Assignment assign_step(std::span<const EncodedSequence> seqs, std::span<const MarkovChain> chains) {
    if (chains.empty()) throw usage_error("assign_step: empty chain list");
    const auto logs = to_log_chains(chains);
    return assign_step(seqs, std::span<const LogChain>(logs));
}

using TransitionCounts = std::array<std::array<double, kNumStates>, kNumStates>;

inline void add_transitions(TransitionCounts& counts, const EncodedSequence& seq) noexcept {
    const auto& s = seq.states();
    for (std::size_t i = 1; i < s.size(); ++i) counts[index(s[i - 1])][index(s[i])] += 1.0;
}

/// Normalizes counts plus a pseudocount on every allowed edge. A row with
/// zero total becomes uniform over its allowed targets.
inline MarkovChain chain_from_counts(const TransitionCounts& counts, double smoothing) {
    TransitionMatrix p{};
    for (auto from : kAllStates) {
        if (from == State::E) continue;
        const auto r = index(from);
        double total = 0.0;
        for (auto to : kAllStates)
            if (allowed_edge(from, to)) total += counts[r][index(to)] + smoothing;
        const auto deg = double(out_degree(from));
        for (auto to : kAllStates) {
            if (!allowed_edge(from, to)) continue;
            p[r][index(to)] = total > 0.0 ? (counts[r][index(to)] + smoothing) / total : 1.0 / deg;
        }
    }
    return MarkovChain(p);
}

struct Reestimate {
    std::vector<MarkovChain> chains;
    std::vector<std::size_t> reseeded;  // cluster indices that had no sequences
};

inline Reestimate reestimate_step(std::span<const EncodedSequence> seqs, std::span<const std::size_t> assignments,
                                  std::size_t k, double smoothing, Rng& rng) {
    if (assignments.size() != seqs.size()) throw usage_error("reestimate_step: assignment size mismatch");
    std::vector<TransitionCounts> counts(k, TransitionCounts{});
    std::vector<std::size_t> members(k, 0);
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        const auto j = assignments[i];
        if (j >= k) throw usage_error("reestimate_step: assignment index out of range");
        add_transitions(counts[j], seqs[i]);
        ++members[j];
    }
    Reestimate out;
    out.chains.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        if (members[j] == 0) {
            out.chains.push_back(random_prior(rng));
            out.reseeded.push_back(j);
        } else {
            out.chains.push_back(chain_from_counts(counts[j], smoothing));
        }
    }
    return out;
}

struct RunResult {
    std::vector<MarkovChain> chains;
    Assignment assignment;
    RunDiagnostics diagnostics;
};

/// One k-means run from the given priors. `rng` is used only to reseed
/// clusters that end up empty.
inline RunResult run_from_priors(std::span<const EncodedSequence> seqs, std::vector<MarkovChain> priors,
                                 const ClusterConfig& config, Rng& rng) {
    if (priors.empty()) throw usage_error("run_from_priors: no priors");
    const std::size_t k = priors.size();
    RunResult run;
    run.chains = std::move(priors);
    std::optional<std::vector<std::size_t>> previous;
    const double n = double(seqs.size());

    for (std::size_t it = 0; it < config.max_iterations; ++it) {
        auto a = assign_step(seqs, std::span<const MarkovChain>(run.chains));
        double fraction = 1.0;
        if (previous) {
            std::size_t changed = 0;
            for (std::size_t i = 0; i < seqs.size(); ++i) changed += (*previous)[i] != a.chain[i];
            fraction = n > 0 ? double(changed) / n : 0.0;
        }
        run.diagnostics.iterations = it + 1;
        run.diagnostics.reassignment_history.push_back(fraction);
        run.diagnostics.log_likelihood_history.push_back(a.sum_log_likelihood);

        auto re = reestimate_step(seqs, a.chain, k, config.smoothing, rng);
        run.diagnostics.reseeded_clusters += re.reseeded.size();
        run.chains = std::move(re.chains);
        previous = std::move(a.chain);
        if (fraction < config.convergence_fraction) break;
    }

    run.assignment = assign_step(seqs, std::span<const MarkovChain>(run.chains));
    run.diagnostics.sum_log_likelihood = run.assignment.sum_log_likelihood;
    run.diagnostics.unsupported_count = run.assignment.unsupported;
    return run;
}

inline std::vector<MarkovChain> random_priors(std::size_t k, Rng& rng) {
    std::vector<MarkovChain> priors;
    priors.reserve(k);
    for (std::size_t j = 0; j < k; ++j) priors.push_back(random_prior(rng));
    return priors;
}

namespace detail {

inline ClusterModel to_model(const ClusterConfig& config, RunResult run, std::size_t restart,
                             std::vector<RunDiagnostics> all_runs) {
    ClusterModel m;
    m.config = config;
    m.chains = std::move(run.chains);
    m.assignments = std::move(run.assignment.chain);
    m.log_likelihoods = std::move(run.assignment.log_likelihood);
    m.sum_log_likelihood = run.diagnostics.sum_log_likelihood;
    m.iterations_run = run.diagnostics.iterations;
    m.reassignment_history = run.diagnostics.reassignment_history;
    m.log_likelihood_history = run.diagnostics.log_likelihood_history;
    m.unsupported_count = run.diagnostics.unsupported_count;
    m.reseeded_clusters = run.diagnostics.reseeded_clusters;
    m.selected_restart = restart;
    m.runs = std::move(all_runs);
    return m;
}

inline void require_supported(const RunResult& run, std::size_t n) {
    if (n > 0 && run.diagnostics.unsupported_count == n)
        throw data_error("every sequence has zero probability under every chain; use smoothing > 0");
}

} // namespace detail

/// Best of `config.restarts` runs from fresh random priors; the run with the
/// highest sum of log likelihoods wins, earliest restart on ties.
inline ClusterModel fit(std::span<const EncodedSequence> seqs, const ClusterConfig& config) {
    config.validate();
    if (seqs.empty()) throw data_error("fit: no sequences");
    std::optional<RunResult> best;
    std::size_t best_restart = 0;
    std::vector<RunDiagnostics> all;
    bool any_supported = false;
    for (std::size_t r = 0; r < config.restarts; ++r) {
        auto rng = make_rng(config.rng_seed, {config.k, r});
        auto run = run_from_priors(seqs, random_priors(config.k, rng), config, rng);
        any_supported |= run.diagnostics.unsupported_count < seqs.size();
        all.push_back(run.diagnostics);
        if (!best || run.diagnostics.sum_log_likelihood > best->diagnostics.sum_log_likelihood) {
            best = std::move(run);
            best_restart = r;
        }
    }
    if (!any_supported)
        throw data_error("every sequence has zero probability under every chain in every restart");
    return detail::to_model(config, std::move(*best), best_restart, std::move(all));
}

/// Single run seeded with caller-supplied priors; config.k and
/// config.restarts are ignored.
inline ClusterModel fit_from_priors(std::span<const EncodedSequence> seqs, std::vector<MarkovChain> priors,
                                    ClusterConfig config) {
    config.k = priors.size();
    config.restarts = 1;
    config.validate();
    if (seqs.empty()) throw data_error("fit: no sequences");
    auto rng = make_rng(config.rng_seed, {config.k, 0xfeedULL});
    auto run = run_from_priors(seqs, std::move(priors), config, rng);
    detail::require_supported(run, seqs.size());
    std::vector<RunDiagnostics> all{run.diagnostics};
    return detail::to_model(config, std::move(run), 0, std::move(all));
}

struct SweepEntry {
    std::size_t k = 0;
    double sum_log_likelihood = 0.0;
    std::size_t unsupported_count = 0;
    std::size_t iterations_run = 0;
};

/// Fits each k independently, output ordered by k; each fit's randomness depends only on
/// (seed, k), so a repeated k yields an identical entry.
inline std::vector<SweepEntry> k_sweep(std::span<const EncodedSequence> seqs, std::span<const std::size_t> k_values,
                                       const ClusterConfig& config) {
    if (k_values.empty()) throw usage_error("k_sweep: no k values");
    std::vector<std::size_t> ks(k_values.begin(), k_values.end());
    std::stable_sort(ks.begin(), ks.end());
    std::vector<SweepEntry> out;
    for (auto k : ks) {
        auto cfg = config;
        cfg.k = k;
        const auto m = fit(seqs, cfg);
        out.push_back({k, m.sum_log_likelihood, m.unsupported_count, m.iterations_run});
    }
    return out;
}

} // namespace mcmix
