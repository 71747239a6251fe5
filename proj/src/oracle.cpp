#include "rlsel/oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rlsel/pipeline.hpp"

namespace rlsel::oracle {

namespace {

using Vec = std::vector<double>;

Vec matvec(const Matrix& w, std::span<const double> v) {
    Vec out(w.rows(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) out[r] = numkit::dot(w.row(r), v);
    return out;
}

Vec matvec_t(const Matrix& w, std::span<const double> v) {
    Vec out(w.cols(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        auto row = w.row(r);
        for (std::size_t c = 0; c < w.cols(); ++c) out[c] += row[c] * v[r];
    }
    return out;
}

double cross_entropy(std::span<const double> logits, std::uint32_t y) { return numkit::log_sum_exp(logits) - logits[y]; }

// Forward pass starting at the input of layer h.
struct Tail {
    std::vector<Vec> inputs;  // inputs[t] feeds layer h + t
    std::vector<Vec> pre;     // pre[t] = z of layer h + t
    Vec logits;
};

Tail tail_forward(const MlpModel& m, std::size_t h, std::span<const double> v) {
    Tail t;
    Vec cur(v.begin(), v.end());
    for (std::size_t l = h; l < m.n_layers(); ++l) {
        Vec z = matvec(m.weights[l], cur);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += m.biases[l][i];
        t.inputs.push_back(cur);
        t.pre.push_back(z);
        if (l + 1 < m.n_layers())
            for (auto& x : z) x = std::max(0.0, x);
        cur = std::move(z);
    }
    t.logits = cur;
    return t;
}

// dL/dz_h and dlogits/dz_h (k x out_h) for the tail pass.
void tail_backward(const MlpModel& m, std::size_t h, const Tail& t, std::uint32_t y, Vec& delta, Matrix& jac) {
    const std::size_t L = m.n_layers();
    auto p = numkit::stable_softmax(t.logits);
    delta = p;
    delta[y] -= 1.0;
    jac = Matrix::identity(m.d_out());
    for (std::size_t l = L - 1; l > h; --l) {
        const auto& zprev = t.pre[l - 1 - h];
        Vec u = matvec_t(m.weights[l], delta);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = zprev[i] > 0.0 ? u[i] : 0.0;
        delta = std::move(u);
        Matrix j2 = numkit::matmul(jac, m.weights[l]);
        for (std::size_t r = 0; r < j2.rows(); ++r)
            for (std::size_t c = 0; c < j2.cols(); ++c)
                if (!(zprev[c] > 0.0)) j2(r, c) = 0.0;
        jac = std::move(j2);
    }
}

Matrix outer(std::span<const double> a, std::span<const double> b) {
    Matrix o(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) o(i, j) = a[i] * b[j];
    return o;
}

bool same_pattern(const Tail& a, const Tail& b) {
    for (std::size_t t = 0; t + 1 < a.pre.size(); ++t)
        for (std::size_t i = 0; i < a.pre[t].size(); ++i)
            if ((a.pre[t][i] > 0.0) != (b.pre[t][i] > 0.0)) return false;
    return true;
}

Vec layer_input(const MlpModel& m, std::span<const double> x, std::size_t h) {
    Matrix xm(1, x.size(), Vec(x.begin(), x.end()));
    auto cache = surrogate::forward_cache(m, xm);
    return cache.acts[h].data();
}

struct EigenInverse {
    Eigen::MatrixXd inv;
    double min_eig = 0.0;
};

EigenInverse sym_inverse(const Matrix& a) {
    const auto n = static_cast<Eigen::Index>(a.rows());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = a(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw SingularHessian("Hessian eigendecomposition failed");
    const auto& ev = es.eigenvalues();
    const double lo = ev.minCoeff();
    if (!(lo > 0.0) || !std::isfinite(ev.maxCoeff())) throw SingularHessian("Hessian is not positive definite after regularization");
    EigenInverse out;
    out.min_eig = lo;
    out.inv = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    return out;
}

Vec apply(const Eigen::MatrixXd& m, const Vec& v) {
    Eigen::Map<const Eigen::VectorXd> ev(v.data(), static_cast<Eigen::Index>(v.size()));
    Eigen::VectorXd r = m * ev;
    return Vec(r.data(), r.data() + r.size());
}

Vec unit_vector(numkit::Rng& rng, std::size_t d) {
    Vec v(d);
    for (auto& x : v) x = rng.normal();
    const double n = numkit::l2_norm(v);
    for (auto& x : v) x /= n;
    return v;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

Check window_check(const std::string& name, double value, double lo, double hi) {
    return {name, value >= lo && value <= hi, value, "[" + fmt(lo) + ", " + fmt(hi) + "]"};
}

datahub::PlantedRedundancySpec blob_spec(std::size_t n, std::size_t k, std::size_t d, double scale, std::uint64_t seed) {
    datahub::PlantedRedundancySpec spec;
    spec.n_base = n;
    spec.dup_fraction = 0.0;
    spec.k = k;
    spec.d_in = d;
    spec.center_scale = scale;
    spec.seed = seed;
    spec.shuffle = false;
    return spec;
}

datahub::LabeledDataset blob_fixture(std::size_t n, std::size_t k, std::size_t d, double scale, std::uint64_t seed) {
    auto ds = datahub::make_blobs(blob_spec(n, k, d, scale, seed));
    ds.parents.clear();
    return ds;
}

}  // namespace

CoveredPairReport probe_covered_pair(const MlpModel& m, std::span<const double> x_base, std::span<const double> direction,
                                     double epsilon, std::uint32_t label, std::size_t layer, double corrupt_gradient) {
    const std::size_t h = layer == kLastLayer ? m.n_layers() - 1 : layer;
    if (h >= m.n_layers()) throw ContractViolation("probe_covered_pair: layer out of range");
    if (label >= m.d_out()) throw ContractViolation("probe_covered_pair: label out of range");
    if (!(epsilon >= 0.0)) throw ContractViolation("probe_covered_pair: epsilon must be nonnegative");
    const Vec vj = layer_input(m, x_base, h);
    if (direction.size() != vj.size()) throw ContractViolation("probe_covered_pair: direction has the wrong width");
    if (std::abs(numkit::l2_norm(direction) - 1.0) > 1e-9) throw ContractViolation("probe_covered_pair: direction must be a unit vector");

    Vec dx(vj.size()), vi(vj.size());
    for (std::size_t t = 0; t < vj.size(); ++t) {
        dx[t] = epsilon * direction[t];
        vi[t] = vj[t] + dx[t];
    }
    const Tail tj = tail_forward(m, h, vj);
    const Tail ti = tail_forward(m, h, vi);
    Vec dj, di;
    Matrix jac_j, jac_i;
    tail_backward(m, h, tj, label, dj, jac_j);
    tail_backward(m, h, ti, label, di, jac_i);

    CoveredPairReport r;
    r.epsilon = epsilon;
    r.layer = h;
    r.output_gap = numkit::l2_distance(ti.logits, tj.logits);
    r.loss_gap = std::abs(cross_entropy(ti.logits, label) - cross_entropy(tj.logits, label));

    const Matrix gi = outer(di, vi), gj = outer(dj, vj);
    const Matrix dg = gi - gj;
    r.grad_gap = dg.frobenius_norm();

    // S = diag(p) - p p^T at the base point; H_z = J^T S J; H_x = H_z W_h.
    const auto p = numkit::stable_softmax(tj.logits);
    Matrix s(p.size(), p.size());
    for (std::size_t a = 0; a < p.size(); ++a)
        for (std::size_t b = 0; b < p.size(); ++b) s(a, b) = (a == b ? p[a] : 0.0) - p[a] * p[b];
    const Matrix hz = numkit::matmul_at(jac_j, numkit::matmul(s, jac_j));
    const Matrix hx = numkit::matmul(hz, m.weights[h]);
    Vec g_scaled = dj;
    for (auto& v : g_scaled) v *= corrupt_gradient;
    const Matrix first = outer(matvec(hx, dx), vi) + outer(g_scaled, dx);
    r.lemma1_residual = (dg - first).frobenius_norm();
    return r;
}

BoundCheck prop1_bound_check(const MlpModel& m, std::span<const double> feat_i, std::span<const double> feat_j) {
    const Matrix& w = m.weights.back();
    if (feat_i.size() != w.cols() || feat_j.size() != w.cols())
        throw ContractViolation("prop1_bound_check: features do not match the final layer width");
    Vec diff(feat_i.size());
    for (std::size_t t = 0; t < diff.size(); ++t) diff[t] = feat_i[t] - feat_j[t];
    const double eps = numkit::l2_norm(diff);
    BoundCheck c;
    c.gap = numkit::l2_norm(matvec(w, diff));
    c.bound_spectral = eps * numkit::spectral_norm(w);
    c.bound_frobenius = eps * w.frobenius_norm();
    c.margin = c.bound_spectral - c.gap;
    c.holds = c.gap <= c.bound_spectral + 1e-9;
    return c;
}

double sample_loss(const MlpModel& head, std::span<const double> x, std::uint32_t y) {
    Matrix xm(1, x.size(), Vec(x.begin(), x.end()));
    return cross_entropy(surrogate::forward(head, xm).second.row(0), y);
}

std::vector<double> sample_grad(const MlpModel& head, std::span<const double> x, std::uint32_t y) {
    Matrix xm(1, x.size(), Vec(x.begin(), x.end()));
    const std::uint32_t label[1] = {y};
    return surrogate::loss_and_grads(head, xm, label).grads.flat();
}

Matrix softmax_head_hessian(const MlpModel& head, const Matrix& x, std::span<const std::uint32_t> y, double l2) {
    if (head.n_layers() != 1) throw ContractViolation("softmax_head_hessian: model must be a single linear layer");
    if (x.rows() != y.size() || x.rows() == 0) throw ContractViolation("softmax_head_hessian: bad batch");
    const std::size_t k = head.d_out(), d = head.d_in(), np = head.n_params();
    // flat order: W(c, f) at c * d + f, then b(c) at k * d + c
    auto widx = [d](std::size_t c, std::size_t f) { return c * d + f; };
    auto bidx = [k, d](std::size_t c) { return k * d + c; };
    Matrix hmat(np, np);
    const Matrix logits = surrogate::forward(head, x).second;
    const double inv_n = 1.0 / static_cast<double>(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto p = numkit::stable_softmax(logits.row(r));
        const auto xr = x.row(r);
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) {
                const double sab = ((a == b) ? p[a] : 0.0) - p[a] * p[b];
                if (sab == 0.0) continue;
                const double w = sab * inv_n;
                for (std::size_t f = 0; f < d; ++f) {
                    for (std::size_t g = 0; g < d; ++g) hmat(widx(a, f), widx(b, g)) += w * xr[f] * xr[g];
                    hmat(widx(a, f), bidx(b)) += w * xr[f];
                    hmat(bidx(a), widx(b, f)) += w * xr[f];
                }
                hmat(bidx(a), bidx(b)) += w;
            }
    }
    for (std::size_t i = 0; i < np; ++i) hmat(i, i) += l2;
    return hmat;
}

InfluenceReport influence_gap(const MlpModel& head, const datahub::LabeledDataset& train, std::span<const double> x_i,
                              std::uint32_t y_i, std::span<const double> x_j, std::uint32_t y_j,
                              std::span<const double> x_test, std::uint32_t y_test, double l2) {
    if (head.n_params() > 500) throw ContractViolation("influence_gap: model too large for an exact Hessian");
    InfluenceReport r;
    r.hessian = softmax_head_hessian(head, train.inputs, train.labels, l2);
    double diag = 0.0;
    for (std::size_t i = 0; i < r.hessian.rows(); ++i) diag += std::abs(r.hessian(i, i));
    r.lambda = 1e-6 * diag / static_cast<double>(r.hessian.rows());
    Matrix reg = r.hessian;
    for (std::size_t i = 0; i < reg.rows(); ++i) reg(i, i) += r.lambda;
    const auto inv = sym_inverse(reg);

    const Vec gi = sample_grad(head, x_i, y_i), gj = sample_grad(head, x_j, y_j);
    r.influence_i = apply(inv.inv, gi);
    r.influence_j = apply(inv.inv, gj);
    for (auto& v : r.influence_i) v = -v;
    for (auto& v : r.influence_j) v = -v;
    r.param_gap = numkit::l2_distance(r.influence_i, r.influence_j);
    r.grad_gap = numkit::l2_distance(gi, gj);
    r.hinv_norm = 1.0 / inv.min_eig;
    r.bound = r.hinv_norm * r.grad_gap;
    const Vec gt = sample_grad(head, x_test, y_test);
    // I_loss(test, z) = -g_test^T H^-1 g_z = g_test^T I_up,params(z)
    r.test_loss_gap = std::abs(numkit::dot(gt, r.influence_i) - numkit::dot(gt, r.influence_j));
    return r;
}

MlpModel fit_softmax_head(const datahub::LabeledDataset& train, double l2, std::span<const double> weights) {
    if (!(l2 > 0.0)) throw ContractViolation("fit_softmax_head: l2 must be positive");
    const std::size_t n = train.n();
    Vec w(n, 1.0);
    if (!weights.empty()) {
        if (weights.size() != n) throw ContractViolation("fit_softmax_head: weight count mismatch");
        w.assign(weights.begin(), weights.end());
    }
    MlpModel head = MlpModel::zeros({train.d_in(), train.k});
    const double inv_n = 1.0 / static_cast<double>(n);
    auto objective = [&](const MlpModel& m) {
        const Matrix z = surrogate::forward(m, train.inputs).second;
        double f = 0.0;
        for (std::size_t r = 0; r < n; ++r)
            if (w[r] != 0.0) f += w[r] * cross_entropy(z.row(r), train.labels[r]);
        const auto p = m.flat();
        return f * inv_n + 0.5 * l2 * numkit::dot(p, p);
    };
    auto gradient = [&](const MlpModel& m) {
        Vec g(m.n_params(), 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            if (w[r] == 0.0) continue;
            const auto gr = sample_grad(m, train.inputs.row(r), train.labels[r]);
            for (std::size_t t = 0; t < g.size(); ++t) g[t] += w[r] * gr[t] * inv_n;
        }
        const auto p = m.flat();
        for (std::size_t t = 0; t < g.size(); ++t) g[t] += l2 * p[t];
        return g;
    };

    for (int it = 0; it < 100; ++it) {
        const Vec g = gradient(head);
        if (numkit::l2_norm(g) < 1e-13) break;
        std::vector<std::size_t> keep;
        for (std::size_t r = 0; r < n; ++r)
            if (w[r] != 0.0) keep.push_back(r);
        Matrix hmat = softmax_head_hessian(head, train.inputs.gather_rows(keep),
                                           [&] {
                                               std::vector<std::uint32_t> y;
                                               for (auto r : keep) y.push_back(train.labels[r]);
                                               return y;
                                           }(),
                                           0.0);
        const double scale = static_cast<double>(keep.size()) * inv_n;
        for (auto& v : hmat.data()) v *= scale;
        for (std::size_t i = 0; i < hmat.rows(); ++i) hmat(i, i) += l2;
        const auto inv = sym_inverse(hmat);
        const Vec step = apply(inv.inv, g);
        const Vec p0 = head.flat();
        const double f0 = objective(head);
        double t = 1.0;
        MlpModel trial = head;
        for (int ls = 0; ls < 50; ++ls) {
            Vec p = p0;
            for (std::size_t i = 0; i < p.size(); ++i) p[i] -= t * step[i];
            trial.set_flat(p);
            if (objective(trial) <= f0 - 1e-4 * t * numkit::dot(g, step) || t < 1e-10) break;
            t *= 0.5;
        }
        head = trial;
    }
    return head;
}

std::vector<LooResult> leave_one_out_check(const datahub::LabeledDataset& train, std::span<const double> x_test,
                                           std::uint32_t y_test, double l2, std::span<const std::size_t> removals) {
    const std::size_t n = train.n();
    const MlpModel full = fit_softmax_head(train, l2);
    const Matrix hmat = softmax_head_hessian(full, train.inputs, train.labels, l2);
    const auto inv = sym_inverse(hmat);
    const Vec gt = sample_grad(full, x_test, y_test);
    const Vec hinv_gt = apply(inv.inv, gt);
    const double base_loss = sample_loss(full, x_test, y_test);
    std::vector<LooResult> out;
    for (auto r : removals) {
        if (r >= n) throw ContractViolation("leave_one_out_check: removal index out of range");
        const Vec gr = sample_grad(full, train.inputs.row(r), train.labels[r]);
        LooResult res;
        res.removed = r;
        // -(1/n) I_loss with I_loss = -g_test^T H^-1 g_r
        res.predicted = numkit::dot(hinv_gt, gr) / static_cast<double>(n);
        Vec w(n, 1.0);
        w[r] = 0.0;
        const MlpModel loo = fit_softmax_head(train, l2, w);
        res.actual = sample_loss(loo, x_test, y_test) - base_loss;
        out.push_back(res);
    }
    return out;
}

double loglog_slope(std::span<const double> epsilons, std::span<const double> values) {
    if (epsilons.size() != values.size() || epsilons.size() < 2) throw ContractViolation("loglog_slope: need >= 2 points");
    double mx = 0, my = 0;
    const double n = static_cast<double>(epsilons.size());
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > 0.0) || !(values[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        mx += std::log(epsilons[i]) / n;
        my += std::log(values[i]) / n;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        const double dx = std::log(epsilons[i]) - mx;
        sxy += dx * (std::log(values[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

bool SuiteReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::vector<std::string> SuiteReport::failures() const {
    std::vector<std::string> out;
    for (const auto& c : checks)
        if (!c.passed) out.push_back(c.name + " = " + fmt(c.value) + " outside " + c.window);
    return out;
}

void SuiteReport::append(const SuiteReport& other) {
    checks.insert(checks.end(), other.checks.begin(), other.checks.end());
    sweep.insert(sweep.end(), other.sweep.begin(), other.sweep.end());
}

MlpModel fixture_model(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    return MlpModel::init(dims, numkit::derive_seed(seed, 0x4649585455524531ULL));
}

SuiteReport covered_pair_sweeps(const OracleOptions& opt) {
    SuiteReport rep;
    if (opt.epsilons.size() < 2) throw ContractViolation("covered_pair_sweeps: need at least two epsilons");
    const double eps_max = *std::max_element(opt.epsilons.begin(), opt.epsilons.end());
    struct Case {
        std::vector<std::size_t> dims;
        std::size_t layer;
    };
    const std::vector<Case> cases{{{2, 4, 3}, kLastLayer}, {{2, 4, 3}, 0}, {{4, 8, 8, 3}, kLastLayer}, {{4, 8, 8, 3}, 1}};
    numkit::Rng rng(numkit::derive_seed(opt.seed, 0x5357454550ULL));
    for (const auto& cs : cases) {
        const MlpModel m = fixture_model(cs.dims, opt.seed);
        const std::size_t h = cs.layer == kLastLayer ? m.n_layers() - 1 : cs.layer;
        std::string name;
        for (std::size_t i = 0; i < cs.dims.size(); ++i) name += (i ? "-" : "") + std::to_string(cs.dims[i]);
        name += "/layer" + std::to_string(h);

        // A base point and direction whose ReLU pattern is stable over the sweep.
        Vec x, dir;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            x.assign(m.d_in(), 0.0);
            for (auto& v : x) v = rng.normal();
            const Vec v0 = layer_input(m, x, h);
            dir = unit_vector(rng, v0.size());
            Vec v1 = v0;
            for (std::size_t t = 0; t < v1.size(); ++t) v1[t] += eps_max * dir[t];
            if (same_pattern(tail_forward(m, h, v0), tail_forward(m, h, v1))) break;
        }
        const std::uint32_t label = static_cast<std::uint32_t>(rng.below(m.d_out()));

        std::vector<CoveredPairReport> rows;
        for (double e : opt.epsilons) rows.push_back(probe_covered_pair(m, x, dir, e, label, cs.layer, opt.corrupt_gradient));
        const auto zero = probe_covered_pair(m, x, dir, 0.0, label, cs.layer, opt.corrupt_gradient);
        const bool zero_ok = zero.output_gap == 0.0 && zero.loss_gap == 0.0 && zero.grad_gap == 0.0 && zero.lemma1_residual == 0.0;
        rep.checks.push_back({name + "/zero_epsilon_gaps", zero_ok, zero.output_gap + zero.loss_gap + zero.grad_gap, "= 0"});

        auto column = [&](auto field) {
            Vec v;
            for (const auto& r : rows) v.push_back(r.*field);
            return v;
        };
        const std::vector<std::pair<std::string, double CoveredPairReport::*>> fields{
            {"output_gap", &CoveredPairReport::output_gap},
            {"loss_gap", &CoveredPairReport::loss_gap},
            {"grad_gap", &CoveredPairReport::grad_gap},
            {"lemma1_residual", &CoveredPairReport::lemma1_residual}};
        for (const auto& [q, field] : fields) {
            const Vec vals = column(field);
            for (std::size_t t = 0; t < rows.size(); ++t) {
                const double order = q == "lemma1_residual" ? 2.0 : 1.0;
                rep.sweep.push_back({name, q, rows[t].epsilon, vals[t], vals[t] / std::pow(rows[t].epsilon, order)});
            }
            const double slope = loglog_slope(opt.epsilons, vals);
            if (q == "lemma1_residual")
                rep.checks.push_back(window_check(name + "/lemma1_residual_slope", slope, 1.8, 2.2));
            else
                rep.checks.push_back(window_check(name + "/" + q + "_slope", slope, 0.9, 1.1));
            // Smaller epsilon never gives a larger gap.
            std::vector<std::size_t> order(rows.size());
            for (std::size_t t = 0; t < order.size(); ++t) order[t] = t;
            std::sort(order.begin(), order.end(), [&](auto a, auto b) { return rows[a].epsilon < rows[b].epsilon; });
            bool mono = true;
            for (std::size_t t = 1; t < order.size(); ++t) mono &= vals[order[t - 1]] <= vals[order[t]] + 1e-12;
            rep.checks.push_back({name + "/" + q + "_monotone", mono, mono ? 1.0 : 0.0, "non-decreasing in epsilon"});
        }
    }
    return rep;
}

SuiteReport prop1_checks(const OracleOptions& opt) {
    SuiteReport rep;
    numkit::Rng rng(numkit::derive_seed(opt.seed, 0x50524f5031ULL));
    std::size_t held = 0, ordered = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < opt.random_pairs; ++t) {
        // Fresh random 3-class head each time, pair covered at eps = 1e-3.
        const MlpModel m = MlpModel::init({4, 8, 3}, rng.next_u64());
        Vec x(4);
        for (auto& v : x) v = rng.normal();
        const Vec fi = layer_input(m, x, 1);
        const Vec dir = unit_vector(rng, fi.size());
        Vec fj = fi;
        for (std::size_t c = 0; c < fj.size(); ++c) fj[c] += 1e-3 * dir[c];
        const auto b = prop1_bound_check(m, fi, fj);
        held += b.holds;
        ordered += b.bound_spectral <= b.bound_frobenius + 1e-15;
        worst_margin = std::min(worst_margin, b.margin);
    }
    const double n = static_cast<double>(opt.random_pairs);
    rep.checks.push_back({"output_bound/bound_holds_fraction", held == opt.random_pairs, static_cast<double>(held) / n, "= 1"});
    rep.checks.push_back({"output_bound/spectral_le_frobenius_fraction", ordered == opt.random_pairs, static_cast<double>(ordered) / n, "= 1"});
    rep.checks.push_back({"output_bound/worst_margin", worst_margin >= -1e-9, worst_margin, ">= -1e-9"});

    const MlpModel zero = MlpModel::zeros({4, 8, 3});
    const Vec a{1, 2, 3, 4, 5, 6, 7, 8}, b{1, 2, 3, 4, 5, 6, 7, 8.001};
    const auto z = prop1_bound_check(zero, a, b);
    rep.checks.push_back({"output_bound/zero_head", z.holds && z.gap == 0.0 && z.bound_spectral == 0.0, z.gap, "gap = bound = 0"});
    return rep;
}

SuiteReport influence_checks(const OracleOptions& opt) {
    SuiteReport rep;
    const auto train = blob_fixture(80, 4, 8, 1.5, numkit::derive_seed(opt.seed, 0x494e464cULL));
    const MlpModel head = fit_softmax_head(train, 1e-3);
    numkit::Rng rng(numkit::derive_seed(opt.seed, 0x50524f4245ULL));

    std::size_t held = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < opt.influence_probes; ++t) {
        const auto i = static_cast<std::size_t>(rng.below(train.n()));
        const auto j = static_cast<std::size_t>(rng.below(train.n()));
        const auto s = static_cast<std::size_t>(rng.below(train.n()));
        Vec xj(train.inputs.row(j).begin(), train.inputs.row(j).end());
        // Half the probes use a nearby copy of x_i instead of another training point.
        std::uint32_t yj = train.labels[j];
        if (t % 2 == 1) {
            const Vec dir = unit_vector(rng, train.d_in());
            xj.assign(train.inputs.row(i).begin(), train.inputs.row(i).end());
            const double eps = std::pow(10.0, -rng.uniform(0.0, 4.0));
            for (std::size_t c = 0; c < xj.size(); ++c) xj[c] += eps * dir[c];
            yj = train.labels[i];
        }
        const auto r = influence_gap(head, train, train.inputs.row(i), train.labels[i], xj, yj, train.inputs.row(s),
                                     train.labels[s]);
        held += r.param_gap <= r.bound + 1e-9;
        worst = std::min(worst, r.bound - r.param_gap);
    }
    rep.checks.push_back({"influence/inequality_holds_fraction", held == opt.influence_probes,
                          static_cast<double>(held) / static_cast<double>(opt.influence_probes), "= 1"});
    rep.checks.push_back({"influence/worst_slack", worst >= -1e-9, worst, ">= -1e-9"});

    const auto same = influence_gap(head, train, train.inputs.row(0), train.labels[0], train.inputs.row(0), train.labels[0],
                                    train.inputs.row(1), train.labels[1]);
    rep.checks.push_back({"influence/identical_sample_gap", same.param_gap == 0.0 && same.test_loss_gap == 0.0,
                          same.param_gap, "= 0"});

    // Median slope over five directions.
    Vec param_slopes, loss_slopes;
    for (int dnum = 0; dnum < 5; ++dnum) {
        const Vec dir = unit_vector(rng, train.d_in());
        Vec gaps, loss_gaps;
        for (double e : opt.epsilons) {
            Vec xj(train.inputs.row(3).begin(), train.inputs.row(3).end());
            for (std::size_t c = 0; c < xj.size(); ++c) xj[c] += e * dir[c];
            const auto r = influence_gap(head, train, train.inputs.row(3), train.labels[3], xj, train.labels[3],
                                         train.inputs.row(7), train.labels[7]);
            gaps.push_back(r.param_gap);
            loss_gaps.push_back(r.test_loss_gap);
            if (dnum == 0) {
                rep.sweep.push_back({"softmax-head", "influence_param_gap", e, r.param_gap, r.param_gap / e});
                rep.sweep.push_back({"softmax-head", "influence_test_loss_gap", e, r.test_loss_gap, r.test_loss_gap / e});
            }
        }
        param_slopes.push_back(loglog_slope(opt.epsilons, gaps));
        loss_slopes.push_back(loglog_slope(opt.epsilons, loss_gaps));
    }
    auto median = [](Vec v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    rep.checks.push_back(window_check("influence/param_gap_slope", median(param_slopes), 0.9, 1.1));
    rep.checks.push_back(window_check("influence/test_loss_gap_slope", median(loss_slopes), 0.9, 1.1));
    return rep;
}

SuiteReport loo_checks(const OracleOptions& opt) {
    SuiteReport rep;
    const auto spec = blob_spec(opt.loo_n, 2, 2, 1.0, numkit::derive_seed(opt.seed, 0x4c4f4fULL));
    const auto train = datahub::make_blobs(spec);
    const auto test = datahub::make_blob_holdout(spec, 1);
    std::vector<std::size_t> all(train.n());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto res = leave_one_out_check(train, test.inputs.row(0), test.labels[0], opt.loo_l2, all);
    std::size_t good = 0;
    for (const auto& r : res) good += std::abs(r.predicted - r.actual) / (std::abs(r.actual) + 1e-8) <= 0.25;
    const double frac = static_cast<double>(good) / static_cast<double>(res.size());
    rep.checks.push_back(window_check("loo/within_25pct_fraction", frac, 0.8, 1.0));
    return rep;
}

SuiteReport run_theory_suite(const OracleOptions& opt) {
    SuiteReport rep = covered_pair_sweeps(opt);
    rep.append(prop1_checks(opt));
    rep.append(influence_checks(opt));
    rep.append(loo_checks(opt));
    return rep;
}

std::string suite_json(const SuiteReport& r, const std::string& config_digest) {
    nlohmann::ordered_json j;
    j["version"] = pipeline::kToolVersion;
    j["config_digest"] = config_digest;
    j["passed"] = r.passed();
    auto checks = nlohmann::ordered_json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"window", c.window}});
    j["checks"] = std::move(checks);
    auto sweep = nlohmann::ordered_json::array();
    for (const auto& s : r.sweep)
        sweep.push_back({{"fixture", s.fixture}, {"quantity", s.quantity}, {"epsilon", s.epsilon}, {"gap", s.gap}, {"ratio", s.ratio}});
    j["sweep"] = std::move(sweep);
    return j.dump(2) + "\n";
}

void write_sweep_csv(const SuiteReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "fixture,quantity,epsilon,gap,ratio\n";
    char buf[128];
    for (const auto& s : r.sweep) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g", s.epsilon, s.gap, s.ratio);
        out << s.fixture << ',' << s.quantity << ',' << buf << '\n';
    }
}

}  // namespace rlsel::oracle
