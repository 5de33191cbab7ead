#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tchand/errors.hpp"
#include "tchand/rng.hpp"

namespace tchand::sampling {

enum class Strategy { Linear, Exponential, Tanh };

Strategy strategy_from_string(const std::string& name);
std::string strategy_name(Strategy s);

struct TemporalWindow {
    int anchor = 0;
    int radius = 1;
    std::vector<int> indices; // {anchor-k .. anchor-1, anchor+1 .. anchor+k} clipped to [0, n)
};

struct PairSample {
    int dataset = 0;
    int sequence = 0;
    std::string seq_id;
    int anchor = 0;
    std::vector<int> positives;
    std::vector<int> negatives;
};

struct BatchSpec {
    int anchors_per_batch = 32; // M
    int n_pos = 2;
    int n_neg = 8;
    int radius = 15; // k
    Strategy strategy = Strategy::Linear;
    double sigma = 0.0; // scale for Exponential/Tanh; 0 selects k/2
    // Uniform in-window / out-of-window draws instead of the distance-
    // weighted ones; the sampling-ablation arm.
    bool uniform = false;

    double effective_sigma() const { return sigma > 0.0 ? sigma : radius / 2.0; }
};

// Frames around an anchor, anchor excluded, clipped to the sequence.
TemporalWindow temporal_window(int anchor, int radius, int seq_len);

// Probability vector over signed distances {-k..-1, 1..k}, symmetric in |d|,
// monotonically non-increasing in |d|, normalized over all 2k entries.
std::vector<double> positive_weights(Strategy strategy, int radius, double sigma);

// Per-side unnormalized profile f(d), d in [1, k].
double positive_profile(Strategy strategy, int distance, double sigma);

// Probability vector over candidate distances beyond the window radius,
// monotonically non-decreasing. Every d must satisfy d > radius.
std::vector<double> negative_weights(Strategy strategy, int radius,
                                     const std::vector<int>& distances, double sigma);

double negative_profile(Strategy strategy, int distance_beyond, double sigma);

// Draws n_pos positives from the (clipped, renormalized) window and n_neg
// negatives from outside it, both without replacement.
PairSample sample_pairs(int seq_len, int anchor, const BatchSpec& spec, Rng& rng);

// k = round(fps / 2), at least 1.
int default_radius(double fps);

// Weighted sampling without replacement; exposed for the audit command and
// the Monte-Carlo tests. Weights need not be normalized.
std::vector<int> draw_without_replacement(const std::vector<double>& weights, int count, Rng& rng);

// One dataset entry the batch builder can sample from.
struct SequenceLengths {
    std::vector<int> lengths;
    std::vector<std::string> ids;
};

// Anchors drawn uniformly inside sequences, split equally across datasets
// (remainder rotates with batch_index). Retries anchors whose sequence is
// too short, up to 100 times each.
std::vector<PairSample> build_batch(const std::vector<SequenceLengths>& datasets,
                                    const BatchSpec& spec, uint64_t batch_index, Rng& rng);

} // namespace tchand::sampling
