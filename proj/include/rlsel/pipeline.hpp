#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlsel/agent.hpp"
#include "rlsel/datahub.hpp"
#include "rlsel/surrogate.hpp"

namespace rlsel::pipeline {

inline constexpr const char* kToolVersion = "rlsel 1.0.0";

/// The selection could not be brought inside the +-1% band.
class ConstraintError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// How the ratio term enters each sample's reward.
///   literal:     +r1_raw for every sample
///   negated:     -r1_raw for every sample
///   directional: -r1_raw charged to a = 1 above the target, to a = 0 below
enum class R1Mode { literal, negated, directional };
/// What multiplies the degree signal in r2: the continuous score or the sampled action.
enum class R2Input { score, action };
/// Degree signal: raw distance row-sum, novelty against all class mates, or
/// novelty against the currently selected class mates.
enum class DegreeMode { rowsum, static_cover, live };

struct RunConfig {
    double s_r = 0.7;
    std::size_t total_epochs = 200;
    std::size_t batch_size = 32;
    std::vector<std::size_t> hidden{64, 32};
    surrogate::TrainConfig surrogate;
    agent::AgentConfig agent;
    std::uint64_t seed = 0;

    R1Mode r1_mode = R1Mode::directional;
    R2Input r2_input = R2Input::action;
    DegreeMode degree_mode = DegreeMode::live;
    bool state_degree = true;
    double cover_eps_rel = 0.1;
    /// Pay the degree signal relative to its batch mean.
    bool center_degree = true;
    /// Ratio term from the sample's own class instead of the whole set.
    bool class_ratio = true;
    /// Per-epoch min-max scaling of the distance row-sum degrees.
    bool normalize_ec = false;
    /// Ablation ranking signal: distance row-sum degrees (default) or, for static/live,
    /// the negated soft count of covering class mates.
    DegreeMode ablate_mode = DegreeMode::rowsum;
    /// Ablation ranking direction: keep the largest signal (default) or the smallest.
    bool ablate_keep_largest = true;

    std::string trace_path;

    void validate() const;
    /// key=value lines covering every field that influences results.
    std::string canonical() const;
    /// 16 hex digits of FNV-1a over canonical().
    std::string digest() const;
};

const char* to_string(R1Mode m);
const char* to_string(R2Input m);
const char* to_string(DegreeMode m);
R1Mode parse_r1_mode(const std::string& s);
R2Input parse_r2_input(const std::string& s);
DegreeMode parse_degree_mode(const std::string& s);

struct StepTrace {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double mean_r1_raw = 0.0;
    double mean_r2 = 0.0;
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double surrogate_loss = 0.0;
    double current_ratio = 0.0;

    bool operator==(const StepTrace&) const = default;
};

struct SelectionResult {
    std::vector<std::uint8_t> mask;
    std::vector<std::uint64_t> ids;
    std::vector<double> scores;
    double s_r = 0.0;
    double achieved_ratio = 0.0;
    double ratio_before_repair = 0.0;
    bool ratio_repaired = false;
    bool class_collapse = false;
    std::size_t epochs_run = 0;
    std::string config_digest;
    std::vector<StepTrace> trace;
    /// Number of distinct samples visited in each epoch.
    std::vector<std::size_t> touched_per_epoch;
    std::string trace_path;

    std::size_t selected() const;
    std::vector<std::uint64_t> selected_ids() const;
    bool operator==(const SelectionResult&) const = default;
};

struct RunArtifacts {
    SelectionResult result;
    agent::ActorCritic agent;
    surrogate::MlpModel model;
};

/// mask[i] = scores[i] >= 0.5.
std::vector<std::uint8_t> binarize(std::span<const double> scores);

/// Sizes k with |k / n - s_r| <= tol.
std::optional<std::size_t> nearest_band_count(std::size_t current, std::size_t n, double s_r, double tol = 0.01);

/// Top `count` rows by score, ties broken by ascending id.
std::vector<std::uint8_t> top_by_score(std::span<const double> scores, std::span<const std::uint64_t> ids,
                                       std::size_t count);

/// Binarizes; if the ratio misses the band, keeps the top-scoring rows up to
/// the nearest band edge. Throws ConstraintError when no size fits the band.
void finalize_mask(SelectionResult& r, double tol = 0.01);

/// Co-trains the surrogate and the agent for total_epochs and returns the final mask.
RunArtifacts select(const datahub::LabeledDataset& ds, const RunConfig& cfg);

/// Continues from a trained agent (and optionally its surrogate) for
/// fine_tune_epochs at a new target ratio with a fresh all-ones policy.
RunArtifacts transfer_select(const datahub::LabeledDataset& ds, const agent::ActorCritic& source,
                             const surrogate::MlpModel* source_model, double new_s_r, RunConfig cfg,
                             std::size_t fine_tune_epochs = 15);

/// Trains the surrogate alone, then keeps the ceil(s_r * n) samples with
/// the largest (or smallest) final-epoch ablate_mode signal.
RunArtifacts select_without_rl(const datahub::LabeledDataset& ds, const RunConfig& cfg);

/// Protocol for scoring a mask: a fresh model trained full-batch on the
/// selected rows and evaluated on held-out data.
struct RetrainConfig {
    std::vector<std::size_t> hidden{64, 32};
    surrogate::TrainConfig train{300, 0, 0.1, 0.9, 0.05, surrogate::LrSchedule::constant, 0};
    std::uint64_t seed = 0;
};

surrogate::MlpModel retrain(const datahub::LabeledDataset& train, const RetrainConfig& cfg);

struct RetrainReport {
    std::size_t n_selected = 0;
    double acc_full = 0.0;
    double acc_selected = 0.0;
    double acc_random = 0.0;
    /// Full-data model features over all samples.
    double di_full = 0.0;
    /// Selected-data model features over the selected samples.
    double di_selected = 0.0;
    /// Full-data model features over the selected samples.
    double di_selected_full_model = 0.0;
};

/// Retrains on the mask, on a random mask of equal size, and on everything,
/// all with the same retrain seed.
RetrainReport retrain_report(const datahub::LabeledDataset& ds, std::span<const std::uint8_t> mask,
                             const datahub::LabeledDataset& test, const RetrainConfig& cfg, std::uint64_t random_seed);

std::vector<std::uint8_t> random_mask(std::size_t n, std::size_t count, std::uint64_t seed);

/// Fraction of planted copies pruned, divided by the chance rate 1 - ratio.
double duplicate_pruning_rate(const datahub::LabeledDataset& ds, std::span<const std::uint8_t> mask);

/// JSON text: version, config_digest, s_r, achieved_ratio, ratio_repaired,
/// mask (selected ids), scores (id -> score), trace_path and, when
/// non-empty, created_at.
std::string result_json(const SelectionResult& r, const std::string& created_at = "");
void write_trace_csv(const SelectionResult& r, const std::string& path);

}  // namespace rlsel::pipeline
