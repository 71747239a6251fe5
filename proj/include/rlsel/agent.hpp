#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rlsel/numkit.hpp"
#include "rlsel/surrogate.hpp"

namespace rlsel::agent {

using numkit::Matrix;
using surrogate::Grads;
using surrogate::MlpModel;

struct AgentConfig {
    double gamma = 0.99;
    double lr = 3e-4;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
};

struct AdamState {
    Grads m;
    Grads v;
    std::uint64_t step = 0;

    bool operator==(const AdamState& o) const { return step == o.step && m.flat() == o.m.flat() && v.flat() == o.v.flat(); }
};

/// Actor (sigmoid head) and critic (linear head), both
/// [d_state, width, width/2, 1] ReLU MLPs, each with its own Adam state.
struct ActorCritic {
    MlpModel actor;
    MlpModel critic;
    AdamState actor_opt;
    AdamState critic_opt;

    /// width defaults to d_state.
    static ActorCritic init(std::size_t d_state, std::uint64_t seed, std::size_t width = 0);
    std::size_t d_state() const { return actor.d_in(); }

    bool operator==(const ActorCritic&) const = default;
};

/// Selection probabilities sigmoid(actor(s)).
std::vector<double> actor_scores(const ActorCritic& ac, const Matrix& states);
std::vector<double> critic_values(const ActorCritic& ac, const Matrix& states);

struct RatioReward {
    double rho = 0.0;
    double r1_raw = 0.0;
    double r1_signed = 0.0;
};

/// rho = #(scores >= 0.5) / N. r1_raw = |rho - s_r| / s_r below the target,
/// |rho - s_r| / (1 - s_r) at or above it; r1_signed = -r1_raw.
RatioReward ratio_reward(std::span<const double> policy, double s_r);
RatioReward ratio_reward_from_count(std::size_t selected, std::size_t n, double s_r);

/// Element-wise E_c * pi.
std::vector<double> selection_reward(std::span<const double> ec, std::span<const double> pi);

/// A = r + gamma V(s') - V(s) per row.
std::vector<double> advantage(const ActorCritic& ac, const Matrix& states, const Matrix& next_states,
                              std::span<const double> rewards, double gamma);

/// Mean over the batch of -[a log p + (1 - a) log(1 - p)] * A with A held
/// constant, and its gradient for the actor.
surrogate::LossGrads actor_loss_grads(const MlpModel& actor, const Matrix& states, std::span<const double> actions,
                                      std::span<const double> advantages);

/// Mean (target - V(s))^2 with the target held constant.
surrogate::LossGrads critic_loss_grads(const MlpModel& critic, const Matrix& states, std::span<const double> targets);

void adam_step(MlpModel& m, const Grads& g, AdamState& state, const AgentConfig& cfg);

struct UpdateReport {
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double mean_advantage = 0.0;
};

/// One synchronous A2C step: advantages from the current critic, then one
/// Adam step each on the critic and the actor.
UpdateReport update(ActorCritic& ac, const Matrix& states, const Matrix& next_states, std::span<const double> actions,
                    std::span<const double> rewards, const AgentConfig& cfg);

/// Checkpoint: magic "RLSA", version u32, actor and critic models, both
/// Adam states (step u64, m and v flattened f64), FNV-1a u64 trailer.
void save_agent(const ActorCritic& ac, const std::string& path);
ActorCritic load_agent(const std::string& path);

}  // namespace rlsel::agent
