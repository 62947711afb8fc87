#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mcmix/clustering.hpp"
#include "mcmix/error.hpp"
#include "mcmix/random.hpp"
#include "mcmix/sequence.hpp"

namespace mcmix {

struct PurityReport {
    std::vector<std::size_t> cluster_ids;   // estimated cluster label, ascending
    std::vector<std::size_t> cluster_sizes;
    std::vector<double> cluster_purity;     // max_j |C_j ∩ S_i| / |S_i|
    double average_purity = 0.0;            // unweighted mean over estimated clusters
    double weighted_purity = 0.0;           // fraction of all items in their cluster's majority
    std::size_t n_clusters = 0;
    std::size_t k_true = 0;
};

/// Mean over the nonempty estimated clusters of the share held by each
/// cluster's most common true label. Clusters are weighted equally.
inline PurityReport average_purity(std::span<const std::size_t> estimated, std::span<const std::size_t> truth) {
    if (estimated.size() != truth.size()) throw usage_error("average_purity: label lists differ in length");
    if (estimated.empty()) throw usage_error("average_purity: no labels");

    std::map<std::size_t, std::map<std::size_t, std::size_t>> overlap;
    std::map<std::size_t, bool> true_labels;
    for (std::size_t i = 0; i < estimated.size(); ++i) {
        ++overlap[estimated[i]][truth[i]];
        true_labels[truth[i]] = true;
    }

    PurityReport r;
    r.k_true = true_labels.size();
    r.n_clusters = overlap.size();
    std::size_t majority_total = 0;
    double sum = 0.0;
    for (const auto& [cluster, counts] : overlap) {
        std::size_t size = 0, best = 0;
        for (const auto& [_, c] : counts) {
            size += c;
            best = std::max(best, c);
        }
        r.cluster_ids.push_back(cluster);
        r.cluster_sizes.push_back(size);
        r.cluster_purity.push_back(double(best) / double(size));
        sum += double(best) / double(size);
        majority_total += best;
    }
    r.average_purity = sum / double(r.n_clusters);
    r.weighted_purity = double(majority_total) / double(estimated.size());
    return r;
}

/// Σ log-likelihood of each sequence under its assigned chain; sequences
/// with zero probability are left out.
inline double corpus_log_likelihood(std::span<const EncodedSequence> seqs, std::span<const MarkovChain> chains,
                                    std::span<const std::size_t> assignments) {
    if (seqs.size() != assignments.size()) throw usage_error("corpus_log_likelihood: size mismatch");
    const auto logs = to_log_chains(chains);
    double sum = 0.0;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        if (assignments[i] >= logs.size()) throw usage_error("corpus_log_likelihood: assignment out of range");
        const auto ll = log_likelihood(seqs[i], logs[assignments[i]]);
        if (ll.supported()) sum += ll.value;
    }
    return sum;
}

// Fisher-Yates over the interior; S and E stay in place.
/// Uniform over interior orderings that keep the S edge legal: the first
/// slot is drawn from the non-topic-change states, the rest is shuffled.
inline EncodedSequence permute_interior(const EncodedSequence& seq, Rng& rng) {
    auto states = seq.states();
    const std::size_t n = seq.interior_length();
    std::vector<std::size_t> openers;
    for (std::size_t i = 1; i <= n; ++i)
        if (!is_topic_change(states[i])) openers.push_back(i);
    std::swap(states[1], states[openers[uniform_index(rng, openers.size())]]);
    for (std::size_t i = n; i > 2; --i) {
        const auto j = uniform_index(rng, i - 1);
        std::swap(states[i], states[2 + j]);
    }
    return EncodedSequence(std::move(states), seq.source_id());
}

struct PermutationRow {
    std::size_t k = 0;
    double real_log_likelihood = 0.0;
    double permuted_log_likelihood = 0.0;
};

/// For each k: best-of-restarts fit on the real sequences, and for every
/// restart a freshly permuted copy of the corpus fitted once from fresh
/// priors, keeping the best permuted objective.
inline std::vector<PermutationRow> permutation_baseline(std::span<const EncodedSequence> seqs,
                                                        std::span<const std::size_t> k_values,
                                                        const ClusterConfig& config) {
    if (k_values.empty()) throw usage_error("permutation_baseline: no k values");
    std::vector<std::size_t> ks(k_values.begin(), k_values.end());
    std::stable_sort(ks.begin(), ks.end());
    std::vector<PermutationRow> rows;
    for (auto k : ks) {
        auto cfg = config;
        cfg.k = k;
        const auto real = fit(seqs, cfg);

        double best_perm = -std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < cfg.restarts; ++r) {
            auto perm_rng = make_rng(cfg.rng_seed, {k, r, 0x9e41ULL});
            std::vector<EncodedSequence> permuted;
            permuted.reserve(seqs.size());
            for (const auto& s : seqs) permuted.push_back(permute_interior(s, perm_rng));
            auto single = cfg;
            single.restarts = 1;
            single.rng_seed = derive_seed(cfg.rng_seed, {k, r, 0x9e42ULL});
            const auto m = fit(permuted, single);
            best_perm = std::max(best_perm, m.sum_log_likelihood);
        }
        rows.push_back({k, real.sum_log_likelihood, best_perm});
    }
    return rows;
}

struct ChainStats {
    std::size_t chain = 0;
    std::size_t n_sequences = 0;
    double mean_length = 0.0;  // interior actions per session; 0 for an empty chain
};

inline std::vector<ChainStats> chain_stats(std::span<const EncodedSequence> seqs,
                                           std::span<const std::size_t> assignments, std::size_t k) {
    if (seqs.size() != assignments.size()) throw usage_error("chain_stats: size mismatch");
    std::vector<ChainStats> out(k);
    std::vector<double> total(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) out[j].chain = j;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        const auto j = assignments[i];
        if (j >= k) throw usage_error("chain_stats: assignment out of range");
        ++out[j].n_sequences;
        total[j] += double(seqs[i].interior_length());
    }
    for (std::size_t j = 0; j < k; ++j)
        if (out[j].n_sequences > 0) out[j].mean_length = total[j] / double(out[j].n_sequences);
    return out;
}

struct StudentProfile {
    std::string student_id;
    std::vector<std::size_t> counts;
    std::vector<double> distribution;
    std::size_t support_size = 0;
};

struct ProfileSummary {
    std::vector<StudentProfile> profiles;  // ordered by student id
    double mean_support = 0.0;
    double stddev_support = 0.0;  // population
};

struct AssignedSession {
    std::string student_id;
    std::size_t chain = 0;
};

inline ProfileSummary student_profiles(std::span<const AssignedSession> sessions, std::size_t k) {
    std::map<std::string, std::vector<std::size_t>> counts;
    for (const auto& s : sessions) {
        if (s.chain >= k) throw usage_error("student_profiles: chain index out of range");
        auto& c = counts[s.student_id];
        if (c.empty()) c.assign(k, 0);
        ++c[s.chain];
    }
    ProfileSummary out;
    for (auto& [student, c] : counts) {
        StudentProfile p;
        p.student_id = student;
        std::size_t total = 0;
        for (auto v : c) total += v;
        p.distribution.resize(k);
        for (std::size_t j = 0; j < k; ++j) {
            p.distribution[j] = double(c[j]) / double(total);
            p.support_size += c[j] > 0;
        }
        p.counts = std::move(c);
        out.profiles.push_back(std::move(p));
    }
    if (!out.profiles.empty()) {
        double sum = 0.0;
        for (const auto& p : out.profiles) sum += double(p.support_size);
        out.mean_support = sum / double(out.profiles.size());
        double ss = 0.0;
        for (const auto& p : out.profiles)
            ss += (double(p.support_size) - out.mean_support) * (double(p.support_size) - out.mean_support);
        out.stddev_support = std::sqrt(ss / double(out.profiles.size()));
    }
    return out;
}

} // namespace mcmix
