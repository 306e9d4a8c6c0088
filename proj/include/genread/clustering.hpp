#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "genread/datamodel.hpp"

namespace genread {

struct KMeansConfig {
    int k = 1;
    int max_iterations = 100;
    double tolerance = 1e-6;  // relative inertia improvement stop
    std::uint64_t seed = 0;
    bool normalize = true;  // cluster L2-normalized copies of the inputs
};

/// Per-iteration inertia, recorded after each centroid update.
struct KMeansTrace {
    std::vector<double> inertia_per_iteration;
};

/// Lloyd's algorithm with k-means++ initialization, deterministic for fixed
/// inputs and seed. Stops when the assignment is stable (an exact fixed
/// point), when the relative inertia improvement drops below tolerance, or at
/// max_iterations (converged = false). Emptied clusters are repaired by
/// reassigning the point farthest from its current centroid.
ClusterAssignment kmeans(std::span<const EmbeddingVector> vectors, const KMeansConfig& cfg,
                         KMeansTrace* trace = nullptr);

/// Lloyd's from caller-supplied initial centroids; used by kmeans() after
/// seeding and by order-invariance tests.
ClusterAssignment kmeans_from_centroids(std::span<const EmbeddingVector> vectors,
                                        std::vector<std::vector<double>> initial_centroids,
                                        const KMeansConfig& cfg, KMeansTrace* trace = nullptr);

/// Nearest-centroid ids, ties broken toward the lowest centroid index.
std::vector<int> assign(std::span<const EmbeddingVector> vectors,
                        std::span<const std::vector<double>> centroids);

/// Sum of squared distances from each vector to its assigned centroid.
double inertia(std::span<const EmbeddingVector> vectors, const ClusterAssignment& assignment);

std::vector<EmbeddingVector> l2_normalized(std::span<const EmbeddingVector> vectors);

}  // namespace genread
