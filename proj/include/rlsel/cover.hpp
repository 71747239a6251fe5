#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlsel/datahub.hpp"
#include "rlsel/numkit.hpp"
#include "rlsel/surrogate.hpp"

namespace rlsel::cover {

using numkit::Matrix;
using surrogate::FeatureBank;

class DegenerateClusters : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EpsilonCoverQuery {
    double epsilon = 0.0;
};

/// E_c per sample in dataset order plus the member ids of every class.
struct CoverProfile {
    std::size_t epoch = 0;
    std::vector<double> degrees;
    std::vector<std::vector<std::uint64_t>> class_index;
};

/// Distances between the features of class c's members, in member order.
Matrix class_distance_matrix(const FeatureBank& bank, const datahub::LabeledDataset& ds, std::uint32_t c);

/// E_c(x_i) = sum_j D_k(i, j) over i's own class.
CoverProfile cover_degree(const FeatureBank& bank, const datahub::LabeledDataset& ds);

/// Same labels and feature distance <= epsilon.
bool is_covered(const FeatureBank& bank, const datahub::LabeledDataset& ds, std::size_t i, std::size_t j,
                EpsilonCoverQuery query);

/// Per-class distance matrices with a per-class cover radius, built once per
/// epoch and queried per sample.
struct ClassGeometry {
    std::vector<std::vector<std::size_t>> members;
    std::vector<Matrix> distances;
    std::vector<double> epsilon;
    /// Position of each row inside its class's member list.
    std::vector<std::size_t> position;
    std::vector<std::uint32_t> labels;
};

/// epsilon_c = eps_rel * median off-diagonal distance within class c.
ClassGeometry build_geometry(const FeatureBank& bank, const datahub::LabeledDataset& ds, double eps_rel);

/// Soft count of same-class samples with selected[j] != 0 that cover row i:
/// sum over j != i of max(0, 1 - D_ij / epsilon_c).
double soft_cover_count(const ClassGeometry& g, std::size_t i, std::span<const std::uint8_t> selected);

/// max(0, 1 - soft_cover_count): 1 for an uncovered sample, 0 once another
/// selected sample sits on top of it.
double novelty(const ClassGeometry& g, std::size_t i, std::span<const std::uint8_t> selected);

/// Novelty of every row against all of its class mates.
std::vector<double> static_novelty(const ClassGeometry& g);

/// Single-linkage separation over the maximum class compactness (mean
/// intra-class pairwise distance), computed on the masked rows.
double dunn_index(const Matrix& features, std::span<const std::uint32_t> labels, std::span<const std::uint8_t> mask);

/// CSV columns: sample_id, class, e_c.
void write_profile_csv(const CoverProfile& profile, const datahub::LabeledDataset& ds, const std::string& path);

}  // namespace rlsel::cover
