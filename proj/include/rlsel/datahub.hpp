#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rlsel/numkit.hpp"

namespace rlsel::datahub {

enum class DataErrorKind {
    missing_file,
    missing_header,
    missing_label_column,
    ragged_row,
    non_numeric,
    small_class,
    empty_class,
    bad_cache,
    invalid_split,
};

const char* to_string(DataErrorKind kind);

class DataError : public std::runtime_error {
public:
    DataError(DataErrorKind kind, const std::string& what);
    DataErrorKind kind() const { return kind_; }

private:
    DataErrorKind kind_;
};

/// Samples, labels and stable ids. Every class in [0, k) has at least two
/// members; ids are unique and survive filtering.
struct LabeledDataset {
    numkit::Matrix inputs;
    std::vector<std::uint32_t> labels;
    std::vector<std::uint64_t> ids;
    std::size_t k = 0;
    /// Parent id per sample for planted duplicates; empty when unknown.
    std::vector<std::optional<std::uint64_t>> parents;

    std::size_t n() const { return labels.size(); }
    std::size_t d_in() const { return inputs.cols(); }

    /// Members of class c, as row indices in dataset order.
    std::vector<std::size_t> class_members(std::uint32_t c) const;
    std::vector<std::size_t> class_counts() const;

    /// Throws DataError if any invariant is broken.
    void validate(std::size_t min_per_class = 2) const;

    bool operator==(const LabeledDataset&) const = default;
};

/// Keeps rows where mask[i] is true, preserving order, ids, labels and k.
/// Classes may drop below two members; callers that need the invariant
/// call validate() on the result.
LabeledDataset filter(const LabeledDataset& ds, std::span<const std::uint8_t> mask);
LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> rows);

/// CSV with a header row. The named column holds the label (integers are
/// used as class indices; anything else is mapped in first-seen order).
/// All other columns are features. Ids are row numbers.
LabeledDataset load_csv(const std::string& path, const std::string& label_column = "label");
void save_csv(const LabeledDataset& ds, const std::string& path, const std::string& label_column = "label");

/// Binary cache. Layout, little-endian:
///   magic "RLDS" (4 bytes), version u32, n u64, d_in u64, k u64,
///   inputs n*d_in f64 row-major, labels n u32, ids n u64, FNV-1a u64.
void save_cache(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_cache(const std::string& path);

/// Loads a binary cache if the file starts with the cache magic, CSV otherwise.
LabeledDataset load_any(const std::string& path, const std::string& label_column = "label");

struct PlantedRedundancySpec {
    std::size_t n_base = 700;
    double dup_fraction = 0.3;
    double jitter_sigma = 0.0;
    std::size_t k = 5;
    std::size_t d_in = 16;
    std::uint64_t seed = 0;
    /// Per-coordinate std of the class centres; unit within-class spread.
    double center_scale = 1.0;
    /// Shuffle rows so ids carry no information about duplicate status.
    bool shuffle = true;
};

/// Gaussian blobs with planted duplicates. Size is floor(n_base / (1 - dup_fraction));
/// the extra samples copy uniformly chosen base points (same class) plus
/// N(0, jitter_sigma^2) noise and record the parent's id.
LabeledDataset make_blobs(const PlantedRedundancySpec& spec);

/// Fresh, duplicate-free points from the same class centres as make_blobs(spec).
LabeledDataset make_blob_holdout(const PlantedRedundancySpec& spec, std::size_t n);

/// Per-class split; each class contributes round(test_fraction * n_c) rows
/// to the test side. A class that cannot leave two rows on each side throws
/// DataError(invalid_split).
std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& ds, double test_fraction,
                                                           std::uint64_t seed);

}  // namespace rlsel::datahub
