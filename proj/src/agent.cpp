#include "rlsel/agent.hpp"

#include <algorithm>
#include <cmath>

#include "rlsel/binio.hpp"

namespace rlsel::agent {

namespace {

constexpr unsigned char kAgentMagic[4] = {'R', 'L', 'S', 'A'};
constexpr std::uint32_t kAgentVersion = 1;

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

std::vector<double> head(const MlpModel& m, const Matrix& states) {
    if (states.cols() != m.d_in())
        throw ContractViolation("agent: state width " + std::to_string(states.cols()) + ", network expects " +
                                std::to_string(m.d_in()));
    const Matrix z = surrogate::forward(m, states).second;
    return z.data();
}

void check_len(std::size_t got, std::size_t want, const char* what) {
    if (got != want) throw ContractViolation(std::string(what) + ": length mismatch");
}

}  // namespace

void AgentConfig::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractViolation("AgentConfig: gamma must lie in [0, 1]");
    if (!(lr > 0.0)) throw ContractViolation("AgentConfig: lr must be positive");
    if (!(weight_decay >= 0.0)) throw ContractViolation("AgentConfig: weight_decay must be nonnegative");
}

ActorCritic ActorCritic::init(std::size_t d_state, std::uint64_t seed, std::size_t width) {
    if (d_state == 0) throw ContractViolation("ActorCritic: state width must be positive");
    if (width == 0) width = d_state;
    const std::vector<std::size_t> dims{d_state, width, std::max<std::size_t>(1, width / 2), 1};
    ActorCritic ac;
    ac.actor = MlpModel::init(dims, numkit::derive_seed(seed, 0xac7021));
    ac.critic = MlpModel::init(dims, numkit::derive_seed(seed, 0xc217c));
    return ac;
}

std::vector<double> actor_scores(const ActorCritic& ac, const Matrix& states) {
    auto z = head(ac.actor, states);
    for (auto& v : z) v = sigmoid(v);
    return z;
}

std::vector<double> critic_values(const ActorCritic& ac, const Matrix& states) { return head(ac.critic, states); }

RatioReward ratio_reward_from_count(std::size_t selected, std::size_t n, double s_r) {
    if (!(s_r > 0.0 && s_r < 1.0)) throw ContractViolation("ratio_reward: s_r must lie in (0, 1)");
    if (n == 0) throw ContractViolation("ratio_reward: empty policy");
    RatioReward r;
    r.rho = static_cast<double>(selected) / static_cast<double>(n);
    const double gap = std::abs(r.rho - s_r);
    r.r1_raw = r.rho < s_r ? gap / s_r : gap / (1.0 - s_r);
    r.r1_signed = -r.r1_raw;
    return r;
}

RatioReward ratio_reward(std::span<const double> policy, double s_r) {
    const auto selected = static_cast<std::size_t>(std::count_if(policy.begin(), policy.end(), [](double p) { return p >= 0.5; }));
    return ratio_reward_from_count(selected, policy.size(), s_r);
}

std::vector<double> selection_reward(std::span<const double> ec, std::span<const double> pi) {
    check_len(ec.size(), pi.size(), "selection_reward");
    std::vector<double> r(ec.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = ec[i] * pi[i];
    return r;
}

std::vector<double> advantage(const ActorCritic& ac, const Matrix& states, const Matrix& next_states,
                              std::span<const double> rewards, double gamma) {
    check_len(rewards.size(), states.rows(), "advantage");
    check_len(next_states.rows(), states.rows(), "advantage");
    const auto v = critic_values(ac, states);
    const auto v2 = critic_values(ac, next_states);
    std::vector<double> a(rewards.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = rewards[i] + gamma * v2[i] - v[i];
    return a;
}

surrogate::LossGrads actor_loss_grads(const MlpModel& actor, const Matrix& states, std::span<const double> actions,
                                      std::span<const double> advantages) {
    check_len(actions.size(), states.rows(), "actor_loss_grads");
    check_len(advantages.size(), states.rows(), "actor_loss_grads");
    if (states.rows() == 0) throw ContractViolation("actor_loss_grads: empty batch");
    const auto cache = surrogate::forward_cache(actor, states);
    const Matrix& z = cache.logits();
    const double inv_b = 1.0 / static_cast<double>(states.rows());
    Matrix dz(z.rows(), 1);
    double loss = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const double a = actions[i];
        const double log_p = -softplus(-z(i, 0));
        const double log_q = -softplus(z(i, 0));
        loss -= advantages[i] * (a * log_p + (1.0 - a) * log_q);
        dz(i, 0) = -advantages[i] * (a - sigmoid(z(i, 0))) * inv_b;
    }
    return {loss * inv_b, surrogate::backward(actor, cache, dz)};
}

surrogate::LossGrads critic_loss_grads(const MlpModel& critic, const Matrix& states, std::span<const double> targets) {
    check_len(targets.size(), states.rows(), "critic_loss_grads");
    if (states.rows() == 0) throw ContractViolation("critic_loss_grads: empty batch");
    const auto cache = surrogate::forward_cache(critic, states);
    const Matrix& v = cache.logits();
    const double inv_b = 1.0 / static_cast<double>(states.rows());
    Matrix dv(v.rows(), 1);
    double loss = 0.0;
    for (std::size_t i = 0; i < v.rows(); ++i) {
        const double err = targets[i] - v(i, 0);
        loss += err * err;
        dv(i, 0) = -2.0 * err * inv_b;
    }
    return {loss * inv_b, surrogate::backward(critic, cache, dv)};
}

void adam_step(MlpModel& m, const Grads& g, AdamState& st, const AgentConfig& cfg) {
    if (g.w.size() != m.n_layers()) throw ContractViolation("adam_step: gradient layer count mismatch");
    if (st.m.w.empty()) {
        st.m = Grads::zeros_like(m);
        st.v = Grads::zeros_like(m);
    }
    ++st.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    auto update = [&](std::span<double> w, std::span<const double> grad, std::span<double> mm, std::span<double> vv) {
        if (grad.size() != w.size()) throw ContractViolation("adam_step: gradient shape mismatch");
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double d = grad[i] + cfg.weight_decay * w[i];
            mm[i] = cfg.beta1 * mm[i] + (1.0 - cfg.beta1) * d;
            vv[i] = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * d * d;
            w[i] -= cfg.lr * (mm[i] / c1) / (std::sqrt(vv[i] / c2) + cfg.adam_eps);
        }
    };
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        update(m.weights[l].data(), g.w[l].data(), st.m.w[l].data(), st.v.w[l].data());
        update(m.biases[l], g.b[l], st.m.b[l], st.v.b[l]);
    }
}

UpdateReport update(ActorCritic& ac, const Matrix& states, const Matrix& next_states, std::span<const double> actions,
                    std::span<const double> rewards, const AgentConfig& cfg) {
    check_len(actions.size(), states.rows(), "update");
    const auto v = critic_values(ac, states);
    const auto v2 = critic_values(ac, next_states);
    check_len(rewards.size(), v.size(), "update");
    std::vector<double> targets(v.size()), adv(v.size());
    UpdateReport rep;
    for (std::size_t i = 0; i < v.size(); ++i) {
        targets[i] = rewards[i] + cfg.gamma * v2[i];
        adv[i] = targets[i] - v[i];
        rep.mean_advantage += adv[i] / static_cast<double>(v.size());
    }
    auto critic = critic_loss_grads(ac.critic, states, targets);
    auto actor = actor_loss_grads(ac.actor, states, actions, adv);
    adam_step(ac.critic, critic.grads, ac.critic_opt, cfg);
    adam_step(ac.actor, actor.grads, ac.actor_opt, cfg);
    rep.actor_loss = actor.loss;
    rep.critic_loss = critic.loss;
    return rep;
}

namespace {

void write_adam(binio::Writer& w, const AdamState& st) {
    w.u64(st.step);
    w.u64(st.m.w.empty() ? 0 : 1);
    if (st.m.w.empty()) return;
    w.f64s(st.m.flat());
    w.f64s(st.v.flat());
}

// Unflattens into the shapes of `m`.
Grads grads_from_flat(const MlpModel& m, std::span<const double> p) {
    MlpModel tmp = m;
    tmp.set_flat(p);
    Grads g;
    g.w = std::move(tmp.weights);
    g.b = std::move(tmp.biases);
    return g;
}

AdamState read_adam(binio::Reader& r, const MlpModel& m) {
    AdamState st;
    st.step = r.u64();
    if (r.u64() == 0) return st;
    std::vector<double> buf(m.n_params());
    r.f64s(buf);
    st.m = grads_from_flat(m, buf);
    r.f64s(buf);
    st.v = grads_from_flat(m, buf);
    return st;
}

}  // namespace

void save_agent(const ActorCritic& ac, const std::string& path) {
    binio::Writer w;
    w.bytes(kAgentMagic);
    w.u32(kAgentVersion);
    surrogate::write_model(w, ac.actor);
    surrogate::write_model(w, ac.critic);
    write_adam(w, ac.actor_opt);
    write_adam(w, ac.critic_opt);
    w.seal();
    binio::write_file(path, w.buffer());
}

ActorCritic load_agent(const std::string& path) {
    const auto bytes = binio::read_file(path);
    binio::Reader r(bytes);
    r.verify_seal();
    auto magic = r.bytes(4);
    if (!std::equal(magic.begin(), magic.end(), kAgentMagic)) throw binio::FormatError("not a policy checkpoint");
    if (r.u32() != kAgentVersion) throw binio::FormatError("unsupported policy checkpoint version");
    ActorCritic ac;
    ac.actor = surrogate::read_model(r);
    ac.critic = surrogate::read_model(r);
    if (ac.actor.dims != ac.critic.dims) throw binio::FormatError("actor and critic shapes disagree");
    ac.actor_opt = read_adam(r, ac.actor);
    ac.critic_opt = read_adam(r, ac.critic);
    if (r.remaining() != 8) throw binio::FormatError("trailing bytes in policy checkpoint");
    return ac;
}

}  // namespace rlsel::agent
