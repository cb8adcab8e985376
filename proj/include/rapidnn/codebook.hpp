#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rapidnn {

// Sorted centroid set. Codes are implicit: the code of centroid i is i itself,
// in ceil(log2 k) bits, so unsigned code order equals value order.
struct Codebook {
    std::vector<double> centroids;  // strictly ascending, no duplicates

    std::size_t size() const { return centroids.size(); }

    std::size_t code_width() const {
        std::size_t k = centroids.size(), w = 0;
        while ((std::size_t(1) << w) < k) ++w;
        return w;
    }

    void validate() const {
        if (centroids.empty()) throw std::invalid_argument("codebook has no centroids");
        for (std::size_t i = 1; i < centroids.size(); ++i)
            if (!(centroids[i - 1] < centroids[i]))
                throw std::invalid_argument("codebook centroids must be strictly ascending");
        for (double c : centroids)
            if (!std::isfinite(c)) throw std::invalid_argument("codebook centroid not finite");
    }

    // Index of the nearest centroid by absolute distance; exact midpoints go
    // to the lower index.
    std::size_t nearest(double value) const {
        const auto& c = centroids;
        std::size_t hi = std::lower_bound(c.begin(), c.end(), value) - c.begin();
        if (hi == 0) return 0;
        if (hi == c.size()) return c.size() - 1;
        double d_lo = value - c[hi - 1], d_hi = c[hi] - value;
        return d_hi < d_lo ? hi : hi - 1;
    }

    double snap(double value) const { return centroids[nearest(value)]; }
};

struct KmeansResult {
    Codebook codebook;
    double wcss = 0.0;
    std::vector<double> wcss_trace;          // objective after every Lloyd update
    std::vector<std::size_t> assignment;     // per input sample -> centroid index
};

namespace detail {

// WCSS of sorted points split at `bounds` (cluster j = [bounds[j], bounds[j+1])),
// against the per-cluster means, via prefix sums.
inline double wcss_of_ranges(const std::vector<double>& sorted, const std::vector<double>& px,
                             const std::vector<double>& pxx,
                             const std::vector<std::size_t>& bounds) {
    double total = 0.0;
    for (std::size_t j = 0; j + 1 < bounds.size(); ++j) {
        std::size_t a = bounds[j], b = bounds[j + 1];
        if (a == b) continue;
        double n = static_cast<double>(b - a);
        double sx = px[b] - px[a], sxx = pxx[b] - pxx[a];
        total += sxx - sx * sx / n;
    }
    return std::max(total, 0.0);
}

}  // namespace detail

// Lloyd's algorithm specialized to one dimension: samples are sorted once,
// then every assignment step is a boundary scan (nearest-centroid regions are
// contiguous) and every update step is a prefix-sum mean. Seeding is
// k-means++; a cluster that empties is re-seeded from the point farthest from
// its current centroid, which keeps the objective non-increasing.
inline KmeansResult kmeans(const std::vector<double>& samples, std::size_t k,
                           std::uint64_t seed) {
    if (samples.empty()) throw std::invalid_argument("kmeans: no samples");
    if (k == 0) throw std::invalid_argument("kmeans: k must be at least 1");
    for (double v : samples)
        if (!std::isfinite(v)) throw std::invalid_argument("kmeans: non-finite sample");

    std::size_t n = samples.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return samples[a] < samples[b]; });
    std::vector<double> sorted(n);
    for (std::size_t i = 0; i < n; ++i) sorted[i] = samples[order[i]];

    std::vector<double> distinct = sorted;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    KmeansResult res;
    // Fewer distinct values than clusters: every distinct value becomes its
    // own centroid and the objective is exactly zero.
    if (distinct.size() <= k) {
        res.codebook.centroids = distinct;
        res.wcss = 0.0;
        res.wcss_trace = {0.0};
        res.assignment.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            res.assignment[i] = res.codebook.nearest(samples[i]);
        return res;
    }

    std::vector<double> px(n + 1, 0.0), pxx(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        px[i + 1] = px[i] + sorted[i];
        pxx[i + 1] = pxx[i] + sorted[i] * sorted[i];
    }

    // k-means++ over the sample multiset.
    std::mt19937_64 rng(seed);
    std::vector<double> centers;
    centers.reserve(k);
    {
        std::uniform_int_distribution<std::size_t> first(0, n - 1);
        centers.push_back(sorted[first(rng)]);
        std::vector<double> d2(n);
        while (centers.size() < k) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double best = 1e300;
                for (double c : centers) best = std::min(best, (sorted[i] - c) * (sorted[i] - c));
                d2[i] = best;
                sum += best;
            }
            double pickv;
            if (sum <= 0.0) {
                // All mass already covered (duplicate-heavy data): any point works.
                pickv = sorted[rng() % n];
            } else {
                std::uniform_real_distribution<double> u(0.0, sum);
                double r = u(rng), acc = 0.0;
                std::size_t pick = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += d2[i];
                    if (acc >= r) {
                        pick = i;
                        break;
                    }
                }
                pickv = sorted[pick];
            }
            centers.push_back(pickv);
        }
    }
    std::sort(centers.begin(), centers.end());
    // Duplicate seeds would create permanently empty clusters; nudge them to
    // distinct sample values (we know distinct count > k).
    for (std::size_t j = 1; j < centers.size(); ++j)
        if (centers[j] <= centers[j - 1]) {
            auto it = std::upper_bound(distinct.begin(), distinct.end(), centers[j - 1]);
            centers[j] = it != distinct.end() ? *it : centers[j - 1] + 1.0;
        }

    std::vector<std::size_t> bounds(k + 1);
    const int max_iters = 300;
    for (int iter = 0; iter < max_iters; ++iter) {
        // Assignment: cluster j owns points in (mid_{j-1}, mid_j], where
        // mid_j is the midpoint between centroids j and j+1; a point exactly
        // on a midpoint belongs to the lower cluster.
        bounds[0] = 0;
        bounds[k] = n;
        for (std::size_t j = 0; j + 1 < k; ++j) {
            double mid = 0.5 * (centers[j] + centers[j + 1]);
            // First index with sorted[i] > mid: ties stay in cluster j.
            bounds[j + 1] = std::upper_bound(sorted.begin() + bounds[j], sorted.end(), mid) -
                            sorted.begin();
        }

        // Empty clusters: steal the point farthest from its own centroid.
        bool reseeded = false;
        for (std::size_t j = 0; j < k; ++j) {
            if (bounds[j + 1] > bounds[j]) continue;
            double far_v = sorted[0], far_d = -1.0;
            for (std::size_t jj = 0; jj < k; ++jj) {
                if (bounds[jj + 1] <= bounds[jj]) continue;
                // The farthest member of a contiguous range sits at an end.
                for (std::size_t idx : {bounds[jj], bounds[jj + 1] - 1}) {
                    double d = std::fabs(sorted[idx] - centers[jj]);
                    if (d > far_d) {
                        far_d = d;
                        far_v = sorted[idx];
                    }
                }
            }
            centers[j] = far_v;
            reseeded = true;
        }
        if (reseeded) {
            std::sort(centers.begin(), centers.end());
            for (std::size_t j = 1; j < centers.size(); ++j)
                if (centers[j] <= centers[j - 1]) {
                    auto it = std::upper_bound(distinct.begin(), distinct.end(), centers[j - 1]);
                    centers[j] = it != distinct.end() ? *it : centers[j - 1] + 1.0;
                }
            continue;  // recompute assignment with the repaired centroids
        }

        // Update: centroid = mean of its range.
        bool changed = false;
        for (std::size_t j = 0; j < k; ++j) {
            double m = (px[bounds[j + 1]] - px[bounds[j]]) /
                       static_cast<double>(bounds[j + 1] - bounds[j]);
            if (m != centers[j]) changed = true;
            centers[j] = m;
        }
        res.wcss_trace.push_back(detail::wcss_of_ranges(sorted, px, pxx, bounds));
        if (!changed) break;
    }

    res.codebook.centroids = centers;
    // Converged means of disjoint ranges are ascending; enforce strictness
    // against pathological float coincidences.
    res.codebook.centroids.erase(
        std::unique(res.codebook.centroids.begin(), res.codebook.centroids.end()),
        res.codebook.centroids.end());
    res.codebook.validate();
    res.wcss = res.wcss_trace.empty() ? 0.0 : res.wcss_trace.back();
    res.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        res.assignment[i] = res.codebook.nearest(samples[i]);
    return res;
}

// Hierarchy from recursive 2-way k-means. Level ℓ (1-based) holds up to 2^ℓ
// node slots; a node whose members have fewer than two distinct values stops
// splitting and forwards its centroid to the left child slot (the right slot
// is marked dead). Because every node owns a contiguous value range, sorted
// level order equals tree order and each child's implicit code is its
// parent's code with one bit appended.
struct CodebookTree {
    struct Node {
        double centroid = 0.0;
        bool alive = false;
        std::size_t parent = 0;  // slot index in the previous level
    };
    std::vector<std::vector<Node>> levels;  // levels[l] has 2^(l+1) slots

    std::size_t depth() const { return levels.size(); }

    // The usable codebook of one level (1-based): live slots, deduplicated.
    Codebook level(std::size_t l) const {
        if (l == 0 || l > levels.size())
            throw std::out_of_range("tree level " + std::to_string(l) + " of depth " +
                                    std::to_string(levels.size()));
        Codebook cb;
        for (const Node& nd : levels[l - 1])
            if (nd.alive) cb.centroids.push_back(nd.centroid);
        std::sort(cb.centroids.begin(), cb.centroids.end());
        cb.centroids.erase(std::unique(cb.centroids.begin(), cb.centroids.end()),
                           cb.centroids.end());
        cb.validate();
        return cb;
    }
};

inline CodebookTree build_tree(const std::vector<double>& samples, std::size_t depth,
                               std::uint64_t seed) {
    if (depth == 0) throw std::invalid_argument("tree depth must be at least 1");
    if (samples.empty()) throw std::invalid_argument("build_tree: no samples");

    CodebookTree tree;
    tree.levels.resize(depth);
    for (std::size_t l = 0; l < depth; ++l)
        tree.levels[l].resize(std::size_t(1) << (l + 1));

    // members[slot] at the current level; recursion is breadth-first so the
    // RNG consumption order is fixed.
    std::vector<std::vector<double>> members(2);
    {
        KmeansResult root = kmeans(samples, 2, seed);
        if (root.codebook.size() == 2) {
            tree.levels[0][0] = {root.codebook.centroids[0], true, 0};
            tree.levels[0][1] = {root.codebook.centroids[1], true, 0};
            for (std::size_t i = 0; i < samples.size(); ++i)
                members[root.assignment[i]].push_back(samples[i]);
        } else {
            // All samples identical: single live node.
            tree.levels[0][0] = {root.codebook.centroids[0], true, 0};
            members[0] = samples;
        }
    }

    std::uint64_t salt = 1;
    for (std::size_t l = 1; l < depth; ++l) {
        std::vector<std::vector<double>> next(std::size_t(1) << (l + 1));
        for (std::size_t s = 0; s < tree.levels[l - 1].size(); ++s) {
            const CodebookTree::Node& nd = tree.levels[l - 1][s];
            if (!nd.alive) continue;
            const std::vector<double>& mem = members[s];
            std::size_t left = 2 * s, right = 2 * s + 1;
            bool splittable = false;
            for (std::size_t i = 1; i < mem.size(); ++i)
                if (mem[i] != mem[0]) {
                    splittable = true;
                    break;
                }
            if (!splittable) {
                // Degenerate node: carry the centroid down unchanged.
                tree.levels[l][left] = {nd.centroid, true, s};
                next[left] = mem;
                continue;
            }
            KmeansResult split = kmeans(mem, 2, seed ^ (salt++ * 0x9E3779B97F4A7C15ull));
            tree.levels[l][left] = {split.codebook.centroids[0], true, s};
            tree.levels[l][right] = {split.codebook.centroids[1], true, s};
            for (std::size_t i = 0; i < mem.size(); ++i)
                next[split.assignment[i] == 0 ? left : right].push_back(mem[i]);
        }
        members = std::move(next);
    }
    return tree;
}

// Codebook of up to k centroids (k a power of two) for one value population.
// When the population has at most k distinct values they become the
// centroids directly — a table that can hold every observed value must be
// lossless — otherwise the 2-means tree is cut at level log2(k).
inline Codebook codebook_for(const std::vector<double>& samples, std::size_t k,
                             std::uint64_t seed) {
    if (samples.empty()) throw std::invalid_argument("codebook_for: no samples");
    if (k < 2 || (k & (k - 1)) != 0)
        throw std::invalid_argument("codebook size must be a power of two (at least 2)");
    std::vector<double> distinct = samples;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() <= k) {
        Codebook cb;
        cb.centroids = std::move(distinct);
        cb.validate();
        return cb;
    }
    std::size_t depth = 0;
    while ((std::size_t(1) << depth) < k) ++depth;
    return build_tree(samples, depth, seed).level(depth);
}

}  // namespace rapidnn
