#include "tchand/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace tchand::sampling {

Strategy strategy_from_string(const std::string& name) {
    if (name == "linear") return Strategy::Linear;
    if (name == "exponential" || name == "exp") return Strategy::Exponential;
    if (name == "tanh") return Strategy::Tanh;
    throw InvalidStrategy("unknown sampling strategy: " + name);
}

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Linear: return "linear";
        case Strategy::Exponential: return "exponential";
        case Strategy::Tanh: return "tanh";
    }
    throw InvalidStrategy("bad strategy enum");
}

TemporalWindow temporal_window(int anchor, int radius, int seq_len) {
    if (anchor < 0 || anchor >= seq_len)
        throw OutOfRange("anchor index outside sequence");
    if (radius < 1) throw OutOfRange("window radius must be >= 1");
    TemporalWindow w;
    w.anchor = anchor;
    w.radius = radius;
    for (int i = std::max(0, anchor - radius); i <= std::min(seq_len - 1, anchor + radius); ++i)
        if (i != anchor) w.indices.push_back(i);
    return w;
}

double positive_profile(Strategy strategy, int distance, double sigma) {
    // distance >= 1; larger distance never gets more weight
    switch (strategy) {
        case Strategy::Linear: return 0.0; // handled by caller, needs k
        case Strategy::Exponential: return std::exp(-(distance - 1) / sigma);
        case Strategy::Tanh: return 1.0 - std::abs(std::tanh((distance - 1) / sigma));
    }
    throw InvalidStrategy("bad strategy enum");
}

std::vector<double> positive_weights(Strategy strategy, int radius, double sigma) {
    if (radius < 1) throw OutOfRange("radius must be >= 1");
    if (strategy != Strategy::Linear && !(sigma > 0.0))
        throw InvalidStrategy("sigma must be positive for this strategy");
    std::vector<double> w(2 * static_cast<std::size_t>(radius));
    double total = 0.0;
    for (int d = 1; d <= radius; ++d) {
        double f = strategy == Strategy::Linear ? static_cast<double>(radius + 1 - d)
                                                : positive_profile(strategy, d, sigma);
        // entries ordered by signed distance: index 0 is -k, index 2k-1 is +k
        w[radius - d] = f;
        w[radius + d - 1] = f;
        total += 2.0 * f;
    }
    for (double& x : w) x /= total;
    return w;
}

double negative_profile(Strategy strategy, int distance_beyond, double sigma) {
    switch (strategy) {
        case Strategy::Linear: return static_cast<double>(distance_beyond);
        case Strategy::Exponential: return 1.0 - std::exp(-distance_beyond / sigma);
        case Strategy::Tanh: return std::abs(std::tanh(distance_beyond / sigma));
    }
    throw InvalidStrategy("bad strategy enum");
}

std::vector<double> negative_weights(Strategy strategy, int radius,
                                     const std::vector<int>& distances, double sigma) {
    if (distances.empty())
        throw EmptyCandidates("no frame outside the temporal window");
    if (strategy != Strategy::Linear && !(sigma > 0.0))
        throw InvalidStrategy("sigma must be positive for this strategy");
    std::vector<double> w(distances.size());
    double total = 0.0;
    for (std::size_t i = 0; i < distances.size(); ++i) {
        if (distances[i] <= radius)
            throw OutOfRange("negative candidate inside the window");
        w[i] = negative_profile(strategy, distances[i] - radius, sigma);
        total += w[i];
    }
    if (!(total > 0.0)) throw EmptyCandidates("all negative weights are zero");
    for (double& x : w) x /= total;
    return w;
}

std::vector<int> draw_without_replacement(const std::vector<double>& weights, int count, Rng& rng) {
    std::vector<double> w = weights;
    std::vector<int> out;
    out.reserve(count);
    for (int draw = 0; draw < count; ++draw) {
        double total = 0.0;
        for (double x : w) total += x;
        if (!(total > 0.0))
            throw EmptyCandidates("ran out of weighted candidates");
        double u = rng.uniform() * total;
        double acc = 0.0;
        std::size_t pick = w.size() - 1;
        for (std::size_t i = 0; i < w.size(); ++i) {
            acc += w[i];
            if (u < acc) {
                pick = i;
                break;
            }
        }
        // guard against all-zero tail from accumulated rounding
        while (w[pick] == 0.0 && pick > 0) --pick;
        out.push_back(static_cast<int>(pick));
        w[pick] = 0.0;
    }
    return out;
}

PairSample sample_pairs(int seq_len, int anchor, const BatchSpec& spec, Rng& rng) {
    const int k = spec.radius;
    if (seq_len < 2 * k + spec.n_neg + 1)
        throw SequenceTooShort("sequence cannot host window plus negatives");
    TemporalWindow window = temporal_window(anchor, k, seq_len);
    if (static_cast<int>(window.indices.size()) < spec.n_pos)
        throw SequenceTooShort("clipped window smaller than n_pos");

    const double sigma = spec.effective_sigma();

    // positive weights restricted to in-range signed distances
    std::vector<double> pos_w(window.indices.size());
    for (std::size_t i = 0; i < window.indices.size(); ++i) {
        int d = std::abs(window.indices[i] - anchor);
        pos_w[i] = spec.uniform ? 1.0
                   : spec.strategy == Strategy::Linear
                       ? static_cast<double>(k + 1 - d)
                       : positive_profile(spec.strategy, d, sigma);
    }

    PairSample ps;
    ps.anchor = anchor;
    for (int idx : draw_without_replacement(pos_w, spec.n_pos, rng))
        ps.positives.push_back(window.indices[static_cast<std::size_t>(idx)]);

    if (spec.n_neg > 0) {
        std::vector<int> neg_candidates;
        std::vector<int> neg_dist;
        for (int i = 0; i < seq_len; ++i) {
            int d = std::abs(i - anchor);
            if (d > k) {
                neg_candidates.push_back(i);
                neg_dist.push_back(d);
            }
        }
        if (static_cast<int>(neg_candidates.size()) < spec.n_neg)
            throw SequenceTooShort("not enough frames outside the window");

        std::vector<double> neg_w(neg_candidates.size(), 1.0);
        if (!spec.uniform) neg_w = negative_weights(spec.strategy, k, neg_dist, sigma);
        for (int idx : draw_without_replacement(neg_w, spec.n_neg, rng))
            ps.negatives.push_back(neg_candidates[static_cast<std::size_t>(idx)]);
    }
    return ps;
}

int default_radius(double fps) {
    return std::max(1, static_cast<int>(std::lround(fps / 2.0)));
}

std::vector<PairSample> build_batch(const std::vector<SequenceLengths>& datasets,
                                    const BatchSpec& spec, uint64_t batch_index, Rng& rng) {
    if (datasets.empty()) throw EmptyBatch("no datasets to sample from");
    for (const auto& ds : datasets)
        if (ds.lengths.empty()) throw EmptyBatch("empty dataset in batch spec");

    const int n_datasets = static_cast<int>(datasets.size());
    const int M = spec.anchors_per_batch;
    std::vector<int> quota(n_datasets, M / n_datasets);
    // leftover anchors rotate across datasets from batch to batch
    for (int r = 0; r < M % n_datasets; ++r)
        quota[(static_cast<int>(batch_index) + r) % n_datasets] += 1;

    std::vector<PairSample> batch;
    batch.reserve(M);
    for (int ds = 0; ds < n_datasets; ++ds) {
        const auto& lengths = datasets[ds].lengths;
        for (int a = 0; a < quota[ds]; ++a) {
            bool placed = false;
            for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
                int seq = static_cast<int>(rng.uniform_index(lengths.size()));
                int n = lengths[static_cast<std::size_t>(seq)];
                int anchor = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n)));
                try {
                    PairSample ps = sample_pairs(n, anchor, spec, rng);
                    ps.dataset = ds;
                    ps.sequence = seq;
                    if (!datasets[ds].ids.empty())
                        ps.seq_id = datasets[ds].ids[static_cast<std::size_t>(seq)];
                    batch.push_back(std::move(ps));
                    placed = true;
                } catch (const SequenceTooShort&) {
                    // resample a different anchor
                }
            }
            if (!placed)
                throw SequenceTooShort("no usable anchor after 100 attempts");
        }
    }
    return batch;
}

} // namespace tchand::sampling
