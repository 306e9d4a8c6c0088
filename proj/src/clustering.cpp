#include "genread/clustering.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "genread/rng.hpp"

namespace genread {

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double sum = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = a[d] - b[d];
        sum += diff * diff;
    }
    return sum;
}

void validate_inputs(std::span<const EmbeddingVector> vectors, int k) {
    if (vectors.empty()) {
        throw Error(ErrorCode::TooFewVectors, "no input vectors");
    }
    if (k <= 0) {
        throw Error(ErrorCode::InvalidConfig, "k must be positive");
    }
    if (static_cast<std::size_t>(k) > vectors.size()) {
        throw Error(ErrorCode::TooFewVectors,
                    "k=" + std::to_string(k) + " exceeds " + std::to_string(vectors.size()) +
                        " input vectors");
    }
    const std::size_t dims = vectors.front().dims();
    if (dims == 0) {
        throw Error(ErrorCode::DimensionMismatch, "zero-dimensional input vector");
    }
    for (const EmbeddingVector& vec : vectors) {
        if (vec.dims() != dims) {
            throw Error(ErrorCode::DimensionMismatch,
                        "mixed dimensions: " + std::to_string(vec.dims()) + " vs " +
                            std::to_string(dims));
        }
        for (double value : vec.values) {
            if (!std::isfinite(value)) {
                throw Error(ErrorCode::NonFiniteInput, "input vector contains NaN or infinity");
            }
        }
    }
}

// k-means++ seeding: first centroid uniform, then proportional to the squared
// distance to the nearest chosen centroid.
std::vector<std::vector<double>> seed_centroids(std::span<const EmbeddingVector> points, int k,
                                                std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = points.size();
    std::vector<std::vector<double>> centroids;
    centroids.reserve(static_cast<std::size_t>(k));

    std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
    std::size_t first = static_cast<std::size_t>(uniform_u64(rng, n));
    centroids.push_back(points[first].values);

    while (centroids.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            min_dist[i] = std::min(min_dist[i], squared_distance(points[i].values, centroids.back()));
            total += min_dist[i];
        }
        std::size_t chosen = n - 1;
        if (total > 0.0) {
            const double r = uniform_double(rng) * total;
            double cumulative = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cumulative += min_dist[i];
                if (cumulative > r) {
                    chosen = i;
                    break;
                }
            }
        } else {
            // All points coincide with a chosen centroid (duplicate inputs).
            chosen = static_cast<std::size_t>(uniform_u64(rng, n));
        }
        centroids.push_back(points[chosen].values);
    }
    return centroids;
}

std::vector<std::vector<double>> mean_centroids(std::span<const EmbeddingVector> points,
                                                const std::vector<int>& ids, int k) {
    const std::size_t dims = points.front().dims();
    std::vector<std::vector<double>> centroids(static_cast<std::size_t>(k),
                                               std::vector<double>(dims, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto& centroid = centroids[static_cast<std::size_t>(ids[i])];
        for (std::size_t d = 0; d < dims; ++d) centroid[d] += points[i].values[d];
        ++counts[static_cast<std::size_t>(ids[i])];
    }
    for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0) continue;
        for (double& value : centroids[static_cast<std::size_t>(c)]) {
            value /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
        }
    }
    return centroids;
}

// Reassigns the point farthest from its current centroid to each empty
// cluster, never draining a cluster below one member.
void repair_empty_clusters(std::span<const EmbeddingVector> points,
                           const std::vector<std::vector<double>>& centroids,
                           std::vector<int>& ids, int k) {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int id : ids) ++sizes[static_cast<std::size_t>(id)];

    for (int c = 0; c < k; ++c) {
        if (sizes[static_cast<std::size_t>(c)] > 0) continue;
        std::size_t farthest = points.size();
        double farthest_dist = -1.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (sizes[static_cast<std::size_t>(ids[i])] < 2) continue;
            const double dist =
                squared_distance(points[i].values, centroids[static_cast<std::size_t>(ids[i])]);
            if (dist > farthest_dist) {
                farthest_dist = dist;
                farthest = i;
            }
        }
        if (farthest == points.size()) {
            throw std::logic_error("cannot repair empty cluster: k exceeds distinct points");
        }
        --sizes[static_cast<std::size_t>(ids[farthest])];
        ids[farthest] = c;
        ++sizes[static_cast<std::size_t>(c)];
    }
}

double total_inertia(std::span<const EmbeddingVector> points,
                     const std::vector<std::vector<double>>& centroids,
                     const std::vector<int>& ids) {
    double sum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        sum += squared_distance(points[i].values, centroids[static_cast<std::size_t>(ids[i])]);
    }
    return sum;
}

}  // namespace

std::vector<EmbeddingVector> l2_normalized(std::span<const EmbeddingVector> vectors) {
    std::vector<EmbeddingVector> out(vectors.begin(), vectors.end());
    for (EmbeddingVector& vec : out) {
        double norm_sq = 0.0;
        for (double value : vec.values) norm_sq += value * value;
        if (norm_sq == 0.0) continue;
        const double norm = std::sqrt(norm_sq);
        for (double& value : vec.values) value /= norm;
    }
    return out;
}

std::vector<int> assign(std::span<const EmbeddingVector> vectors,
                        std::span<const std::vector<double>> centroids) {
    if (centroids.empty()) {
        throw Error(ErrorCode::InvalidConfig, "assign: no centroids");
    }
    for (const auto& centroid : centroids) {
        if (!vectors.empty() && centroid.size() != vectors.front().dims()) {
            throw Error(ErrorCode::DimensionMismatch, "centroid and vector dimensions differ");
        }
    }
    std::vector<int> ids(vectors.size(), 0);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].dims() != centroids.front().size()) {
            throw Error(ErrorCode::DimensionMismatch, "centroid and vector dimensions differ");
        }
        double best = std::numeric_limits<double>::infinity();
        int best_id = 0;
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            const double dist = squared_distance(vectors[i].values, centroids[c]);
            if (dist < best) {  // strict: ties go to the lowest index
                best = dist;
                best_id = static_cast<int>(c);
            }
        }
        ids[i] = best_id;
    }
    return ids;
}

double inertia(std::span<const EmbeddingVector> vectors, const ClusterAssignment& assignment) {
    if (assignment.assignments.size() != vectors.size() ||
        assignment.centroids.size() != static_cast<std::size_t>(assignment.k)) {
        throw Error(ErrorCode::InconsistentAssignment,
                    "assignment does not cover the input vectors");
    }
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        const int id = assignment.assignments[i];
        if (id < 0 || id >= assignment.k) {
            throw Error(ErrorCode::InconsistentAssignment,
                        "cluster id " + std::to_string(id) + " out of range");
        }
        if (vectors[i].dims() != assignment.centroids[static_cast<std::size_t>(id)].size()) {
            throw Error(ErrorCode::InconsistentAssignment, "centroid dimension mismatch");
        }
    }
    return total_inertia(vectors, assignment.centroids, assignment.assignments);
}

ClusterAssignment kmeans_from_centroids(std::span<const EmbeddingVector> vectors,
                                        std::vector<std::vector<double>> initial_centroids,
                                        const KMeansConfig& cfg, KMeansTrace* trace) {
    validate_inputs(vectors, cfg.k);
    if (cfg.max_iterations <= 0) {
        throw Error(ErrorCode::InvalidConfig, "max_iterations must be positive");
    }
    if (initial_centroids.size() != static_cast<std::size_t>(cfg.k)) {
        throw Error(ErrorCode::InvalidConfig, "initial centroid count differs from k");
    }

    const std::vector<EmbeddingVector> normalized =
        cfg.normalize ? l2_normalized(vectors) : std::vector<EmbeddingVector>();
    std::span<const EmbeddingVector> points = cfg.normalize ? std::span<const EmbeddingVector>(normalized)
                                                            : vectors;

    std::vector<std::vector<double>> centroids = std::move(initial_centroids);
    std::vector<int> previous_ids;
    double previous_inertia = std::numeric_limits<double>::infinity();
    ClusterAssignment result;
    result.k = cfg.k;

    int iteration = 0;
    bool converged = false;
    std::vector<int> ids;
    double current_inertia = 0.0;
    while (iteration < cfg.max_iterations) {
        ++iteration;
        ids = assign(points, centroids);
        repair_empty_clusters(points, centroids, ids, cfg.k);
        centroids = mean_centroids(points, ids, cfg.k);
        current_inertia = total_inertia(points, centroids, ids);
        if (trace != nullptr) trace->inertia_per_iteration.push_back(current_inertia);
        if (current_inertia > previous_inertia * (1.0 + 1e-12) + 1e-300) {
            throw std::logic_error("inertia increased across a Lloyd iteration");
        }
        if (!previous_ids.empty() && ids == previous_ids) {
            converged = true;  // exact fixed point
            break;
        }
        if (std::isfinite(previous_inertia)) {
            const double improvement =
                (previous_inertia - current_inertia) / std::max(previous_inertia, 1e-300);
            if (improvement < cfg.tolerance) {
                converged = true;
                break;
            }
        }
        previous_ids = ids;
        previous_inertia = current_inertia;
    }

    result.assignments = std::move(ids);
    result.centroids = std::move(centroids);
    result.inertia = current_inertia;
    result.iterations_run = iteration;
    result.converged = converged;
    return result;
}

ClusterAssignment kmeans(std::span<const EmbeddingVector> vectors, const KMeansConfig& cfg,
                         KMeansTrace* trace) {
    validate_inputs(vectors, cfg.k);
    const std::vector<EmbeddingVector> normalized =
        cfg.normalize ? l2_normalized(vectors) : std::vector<EmbeddingVector>();
    std::span<const EmbeddingVector> points = cfg.normalize ? std::span<const EmbeddingVector>(normalized)
                                                            : vectors;
    std::vector<std::vector<double>> centroids = seed_centroids(points, cfg.k, cfg.seed);

    // The Lloyd loop reruns normalization on the original inputs; hand it the
    // already-normalized points with normalize off to avoid double work.
    KMeansConfig inner = cfg;
    inner.normalize = false;
    return kmeans_from_centroids(points, std::move(centroids), inner, trace);
}

}  // namespace genread
