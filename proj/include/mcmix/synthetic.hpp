#pragma once

/* Labelled synthetic corpora and the noisy-prior recovery experiment.
 *
 * Generator chains put a fixed probability on E from every action state, so
 * the number of actions per sequence is geometric with mean 1/end_probability.
 * Each sequence carries two labels: the generator it was sampled from, and
 * the true chain under which it is most likely (they can differ).
 */

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mcmix/clustering.hpp"
#include "mcmix/error.hpp"
#include "mcmix/evaluation.hpp"
#include "mcmix/random.hpp"
#include "mcmix/sequence.hpp"

namespace mcmix {

struct SyntheticConfig {
    std::size_t k_true = 6;
    std::size_t n_sequences = 50000;
    double end_probability = 0.05;
    std::size_t repetitions = 10;
    std::uint64_t rng_seed = kDefaultSeed;

    void validate() const {
        if (k_true < 1) throw usage_error("k_true must be >= 1");
        if (n_sequences < 1) throw usage_error("n_sequences must be >= 1");
        if (!(end_probability > 0.0 && end_probability < 1.0))
            throw usage_error("end probability must lie in (0, 1)");
        if (repetitions < 1) throw usage_error("repetitions must be >= 1");
    }
};

inline constexpr std::size_t kMaxWalkSteps = 100000;

inline MarkovChain random_generator_chain(Rng& rng, double end_probability) {
    if (!(end_probability > 0.0 && end_probability < 1.0))
        throw usage_error("end probability must lie in (0, 1)");
    TransitionMatrix p{};
    for (auto from : kAllStates) {
        if (from == State::E) continue;
        auto& row = p[index(from)];
        const double mass = from == State::S ? 1.0 : 1.0 - end_probability;
        double sum = 0.0;
        for (auto to : kActionStates)
            if (allowed_edge(from, to)) sum += row[index(to)] = uniform01(rng);
        for (auto to : kActionStates) row[index(to)] *= mass / sum;
        if (from != State::S) row[index(State::E)] = end_probability;
    }
    return MarkovChain(p);
}

/// Random walk from S to E.
inline EncodedSequence sample_sequence(const MarkovChain& chain, Rng& rng, std::string source_id = {}) {
    std::vector<State> states{State::S};
    State current = State::S;
    for (std::size_t step = 0; current != State::E; ++step) {
        if (step >= kMaxWalkSteps)
            throw data_error("sampled walk exceeded " + std::to_string(kMaxWalkSteps) + " steps");
        const double u = uniform01(rng);
        double cum = 0.0;
        State next = State::E;
        bool picked = false;
        State last_positive = State::E;
        for (auto to : kAllStates) {
            const double p = chain(current, to);
            if (p <= 0.0) continue;
            last_positive = to;
            cum += p;
            if (u < cum) {
                next = to;
                picked = true;
                break;
            }
        }
        // Rounding can leave cum a hair below u.
        if (!picked) next = last_positive;
        states.push_back(next);
        current = next;
    }
    return EncodedSequence(std::move(states), std::move(source_id));
}

struct LabelledSequence {
    EncodedSequence seq;
    std::size_t generator_index = 0;
    std::size_t label = 0;
};

inline std::vector<LabelledSequence> label_corpus(std::span<const EncodedSequence> seqs,
                                                  std::span<const std::size_t> generator_index,
                                                  std::span<const MarkovChain> true_chains) {
    if (true_chains.empty()) throw usage_error("label_corpus: no true chains");
    if (seqs.size() != generator_index.size()) throw usage_error("label_corpus: size mismatch");
    const auto logs = to_log_chains(true_chains);
    std::vector<LabelledSequence> out;
    out.reserve(seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i)
        out.push_back({seqs[i], generator_index[i],
                       most_likely_chain(seqs[i], std::span<const LogChain>(logs)).index});
    return out;
}

/// (1 - alpha) * truth + alpha * random prior, entrywise.
inline MarkovChain noisy_prior(const MarkovChain& true_chain, Rng& rng, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw usage_error("alpha must lie in [0, 1]");
    const auto noise = random_prior(rng);
    TransitionMatrix p{};
    for (std::size_t i = 0; i < kNumStates; ++i)
        for (std::size_t j = 0; j < kNumStates; ++j)
            p[i][j] = (1.0 - alpha) * true_chain.matrix()[i][j] + alpha * noise.matrix()[i][j];
    return MarkovChain(p);
}

struct SyntheticCorpus {
    std::vector<MarkovChain> generators;
    std::vector<EncodedSequence> sequences;
    std::vector<std::size_t> generator_index;
    std::vector<std::size_t> labels;  // argmax chain under the generators
};

/// Corpus for one repetition; depends only on (config.rng_seed, repetition).
inline SyntheticCorpus generate_corpus(const SyntheticConfig& config, std::size_t repetition) {
    config.validate();
    auto rng = make_rng(config.rng_seed, {repetition, 0xc0ULL});
    SyntheticCorpus c;
    for (std::size_t j = 0; j < config.k_true; ++j)
        c.generators.push_back(random_generator_chain(rng, config.end_probability));
    c.sequences.reserve(config.n_sequences);
    c.generator_index.reserve(config.n_sequences);
    for (std::size_t i = 0; i < config.n_sequences; ++i) {
        const auto g = uniform_index(rng, config.k_true);
        c.generator_index.push_back(g);
        c.sequences.push_back(sample_sequence(c.generators[g], rng, "syn#" + std::to_string(i)));
    }
    const auto logs = to_log_chains(c.generators);
    c.labels.reserve(c.sequences.size());
    for (const auto& s : c.sequences)
        c.labels.push_back(most_likely_chain(s, std::span<const LogChain>(logs)).index);
    return c;
}

struct NoiseSweepRow {
    double alpha = 0.0;
    std::size_t repetition = 0;
    double purity = 0.0;            // vs argmax labels
    double purity_generator = 0.0;  // vs generator labels
    double sum_log_likelihood = 0.0;
};

struct NoiseSweepSummary {
    double alpha = 0.0;
    double mean_purity = 0.0;
    double mean_purity_generator = 0.0;
    double mean_sum_log_likelihood = 0.0;
};

struct NoiseSweep {
    std::vector<NoiseSweepRow> rows;  // repetition-major, then alpha order
    std::vector<NoiseSweepSummary> summary;
};

/// Per repetition: fresh generators and corpus; per alpha: noisy priors
/// around the generators, one clustering run from them, purity scored.
/// Each (repetition, alpha index) cell owns its own RNG stream.
inline NoiseSweep noise_sweep_experiment(const SyntheticConfig& config, std::span<const double> alphas,
                                         const ClusterConfig& cluster_config) {
    config.validate();
    for (double a : alphas)
        if (!(a >= 0.0 && a <= 1.0)) throw usage_error("alpha must lie in [0, 1]");
    NoiseSweep out;
    out.summary.resize(alphas.size());
    for (std::size_t r = 0; r < config.repetitions; ++r) {
        const auto corpus = generate_corpus(config, r);
        for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
            auto rng = make_rng(config.rng_seed, {r, ai, 0xa1ULL});
            std::vector<MarkovChain> priors;
            for (const auto& g : corpus.generators) priors.push_back(noisy_prior(g, rng, alphas[ai]));
            auto cfg = cluster_config;
            cfg.rng_seed = derive_seed(config.rng_seed, {r, ai, 0xa2ULL});
            const auto model = fit_from_priors(corpus.sequences, std::move(priors), cfg);
            NoiseSweepRow row{alphas[ai], r,
                              average_purity(model.assignments, corpus.labels).average_purity,
                              average_purity(model.assignments, corpus.generator_index).average_purity,
                              model.sum_log_likelihood};
            out.rows.push_back(row);
            out.summary[ai].alpha = alphas[ai];
            out.summary[ai].mean_purity += row.purity;
            out.summary[ai].mean_purity_generator += row.purity_generator;
            out.summary[ai].mean_sum_log_likelihood += row.sum_log_likelihood;
        }
    }
    const double reps = double(config.repetitions);
    for (auto& s : out.summary) {
        s.mean_purity /= reps;
        s.mean_purity_generator /= reps;
        s.mean_sum_log_likelihood /= reps;
    }
    return out;
}

} // namespace mcmix
