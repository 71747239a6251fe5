#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlsel/datahub.hpp"
#include "rlsel/numkit.hpp"
#include "rlsel/surrogate.hpp"

namespace rlsel::oracle {

using numkit::Matrix;
using surrogate::MlpModel;

class SingularHessian : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kLastLayer = std::numeric_limits<std::size_t>::max();

/// Gaps between a base point and a copy whose layer-h input is moved by
/// epsilon * direction.
struct CoveredPairReport {
    double epsilon = 0.0;
    std::size_t layer = 0;
    /// ||logits_i - logits_j||
    double output_gap = 0.0;
    /// |L_i - L_j|
    double loss_gap = 0.0;
    /// ||g_W_h(i) - g_W_h(j)||_F
    double grad_gap = 0.0;
    /// ||dg - ((H dx) x_i^T + g_z dx^T)||_F, with g_z and H = J^T S J W_h taken at the base point
    double lemma1_residual = 0.0;
};

/// `layer` selects the weight matrix whose input is perturbed; kLastLayer
/// means the penultimate features. `corrupt_gradient` scales g_z in the
/// first-order term (1 = exact); anything else is a negative control.
CoveredPairReport probe_covered_pair(const MlpModel& m, std::span<const double> x_base, std::span<const double> direction,
                                     double epsilon, std::uint32_t label = 0, std::size_t layer = kLastLayer,
                                     double corrupt_gradient = 1.0);

struct BoundCheck {
    bool holds = false;
    double gap = 0.0;
    double bound_spectral = 0.0;
    double bound_frobenius = 0.0;
    /// bound_spectral - gap
    double margin = 0.0;
};

/// ||W_L (f_i - f_j)|| <= ||f_i - f_j|| * ||W_L||_2 for two penultimate feature vectors.
BoundCheck prop1_bound_check(const MlpModel& m, std::span<const double> feat_i, std::span<const double> feat_j);

/// Exact Hessian of the mean cross-entropy of a single-layer softmax model
/// plus l2 * I, in MlpModel::flat() parameter order.
Matrix softmax_head_hessian(const MlpModel& head, const Matrix& x, std::span<const std::uint32_t> y, double l2 = 0.0);

/// Gradient of one sample's loss (no regularizer), flat.
std::vector<double> sample_grad(const MlpModel& head, std::span<const double> x, std::uint32_t y);
double sample_loss(const MlpModel& head, std::span<const double> x, std::uint32_t y);

struct InfluenceReport {
    Matrix hessian;
    double lambda = 0.0;
    std::vector<double> influence_i;
    std::vector<double> influence_j;
    double param_gap = 0.0;
    double grad_gap = 0.0;
    double hinv_norm = 0.0;
    double bound = 0.0;
    double test_loss_gap = 0.0;
};

/// I_up,params = -H^-1 g for two points and the inequality
/// ||I_i - I_j|| <= ||H^-1|| ||g_i - g_j||. H is the training Hessian plus
/// lambda I with lambda = 1e-6 * mean |diag H|.
InfluenceReport influence_gap(const MlpModel& head, const datahub::LabeledDataset& train, std::span<const double> x_i,
                              std::uint32_t y_i, std::span<const double> x_j, std::uint32_t y_j,
                              std::span<const double> x_test, std::uint32_t y_test, double l2 = 0.0);

/// Minimizer of mean cross-entropy + l2/2 ||theta||^2 by damped Newton.
/// `weights` (0 or 1 per row) drop samples while keeping the 1/n scale.
MlpModel fit_softmax_head(const datahub::LabeledDataset& train, double l2, std::span<const double> weights = {});

struct LooResult {
    std::size_t removed = 0;
    double predicted = 0.0;
    double actual = 0.0;
};

/// predicted = -(1/n) I_loss(test, x_r); actual = retrained difference in test loss.
std::vector<LooResult> leave_one_out_check(const datahub::LabeledDataset& train, std::span<const double> x_test,
                                           std::uint32_t y_test, double l2, std::span<const std::size_t> removals);

/// Least-squares slope of log(values) against log(epsilons).
double loglog_slope(std::span<const double> epsilons, std::span<const double> values);

struct OracleOptions {
    std::vector<double> epsilons{1e-1, 1e-2, 1e-3, 1e-4};
    double corrupt_gradient = 1.0;
    std::uint64_t seed = 0;
    std::size_t random_pairs = 100;
    std::size_t influence_probes = 100;
    std::size_t loo_n = 60;
    double loo_l2 = 0.01;
};

struct Check {
    std::string name;
    bool passed = false;
    double value = 0.0;
    std::string window;
};

struct SweepRow {
    std::string fixture;
    std::string quantity;
    double epsilon = 0.0;
    double gap = 0.0;
    double ratio = 0.0;
};

struct SuiteReport {
    std::vector<Check> checks;
    std::vector<SweepRow> sweep;
    bool passed() const;
    std::vector<std::string> failures() const;
    void append(const SuiteReport& other);
};

/// Output, loss and gradient gaps are first order, the gradient-change
/// residual second order, on the 2-4-3 and 4-8-8-3 fixtures.
SuiteReport covered_pair_sweeps(const OracleOptions& opt);
/// Output gap <= epsilon ||W_L|| over random covered pairs.
SuiteReport prop1_checks(const OracleOptions& opt);
/// Influence inequality over random probes plus the epsilon sweep of the gap.
SuiteReport influence_checks(const OracleOptions& opt);
/// Influence-predicted vs retrained test-loss change on a logistic fixture.
SuiteReport loo_checks(const OracleOptions& opt);
SuiteReport run_theory_suite(const OracleOptions& opt);

std::string suite_json(const SuiteReport& r, const std::string& config_digest);
void write_sweep_csv(const SuiteReport& r, const std::string& path);

/// The fixed fixture models used by the sweeps.
MlpModel fixture_model(const std::vector<std::size_t>& dims, std::uint64_t seed);

}  // namespace rlsel::oracle
