#pragma once

// Central finite-difference checks shared by the unit tests and the
// acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "rlsel/agent.hpp"
#include "rlsel/surrogate.hpp"

namespace gradcheck {

struct Report {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
};

/// |a - b| / max(|a|, |b|, floor).
inline double rel_error(double a, double b, double floor = 1e-3) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// True when every ReLU unit keeps its on/off state between the two passes.
inline bool same_relu_pattern(const rlsel::surrogate::ForwardCache& a, const rlsel::surrogate::ForwardCache& b) {
    for (std::size_t l = 1; l + 1 < a.acts.size(); ++l)
        for (std::size_t i = 0; i < a.acts[l].size(); ++i)
            if ((a.acts[l].data()[i] > 0.0) != (b.acts[l].data()[i] > 0.0)) return false;
    return true;
}

/// Checks every parameter of `m` against central differences of `loss`,
/// skipping entries whose perturbation flips a ReLU.
inline Report check_params(const rlsel::surrogate::MlpModel& m, const rlsel::numkit::Matrix& x,
                           const std::vector<double>& analytic,
                           const std::function<double(const rlsel::surrogate::MlpModel&)>& loss, double h = 1e-5,
                           double floor = 1e-3) {
    Report r;
    const auto base = m.flat();
    const auto cache = rlsel::surrogate::forward_cache(m, x);
    auto probe = m;
    for (std::size_t i = 0; i < base.size(); ++i) {
        auto p = base;
        p[i] = base[i] + h;
        probe.set_flat(p);
        const double up = loss(probe);
        const bool up_ok = same_relu_pattern(cache, rlsel::surrogate::forward_cache(probe, x));
        p[i] = base[i] - h;
        probe.set_flat(p);
        const double down = loss(probe);
        const bool down_ok = same_relu_pattern(cache, rlsel::surrogate::forward_cache(probe, x));
        if (!up_ok || !down_ok) {
            ++r.skipped;
            continue;
        }
        const double fd = (up - down) / (2.0 * h);
        r.max_rel_error = std::max(r.max_rel_error, rel_error(analytic[i], fd, floor));
        ++r.checked;
    }
    return r;
}

inline Report surrogate_check(const rlsel::surrogate::MlpModel& m, const rlsel::numkit::Matrix& x,
                              const std::vector<std::uint32_t>& y) {
    const auto analytic = rlsel::surrogate::loss_and_grads(m, x, y).grads.flat();
    return check_params(m, x, analytic,
                        [&](const rlsel::surrogate::MlpModel& mm) { return rlsel::surrogate::loss_and_grads(mm, x, y).loss; });
}

inline Report actor_check(const rlsel::surrogate::MlpModel& actor, const rlsel::numkit::Matrix& s,
                          const std::vector<double>& a, const std::vector<double>& adv) {
    const auto analytic = rlsel::agent::actor_loss_grads(actor, s, a, adv).grads.flat();
    return check_params(actor, s, analytic, [&](const rlsel::surrogate::MlpModel& mm) {
        return rlsel::agent::actor_loss_grads(mm, s, a, adv).loss;
    });
}

inline Report critic_check(const rlsel::surrogate::MlpModel& critic, const rlsel::numkit::Matrix& s,
                           const std::vector<double>& targets) {
    const auto analytic = rlsel::agent::critic_loss_grads(critic, s, targets).grads.flat();
    return check_params(critic, s, analytic, [&](const rlsel::surrogate::MlpModel& mm) {
        return rlsel::agent::critic_loss_grads(mm, s, targets).loss;
    });
}

}  // namespace gradcheck
