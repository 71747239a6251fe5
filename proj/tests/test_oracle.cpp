#include <cmath>

#include "doctest.h"
#include "rlsel/oracle.hpp"

namespace orc = rlsel::oracle;
using rlsel::numkit::Matrix;

namespace {

std::vector<double> unit(std::vector<double> v) {
    const double n = rlsel::numkit::l2_norm(v);
    for (auto& x : v) x /= n;
    return v;
}

rlsel::datahub::LabeledDataset small_blobs(std::size_t n, std::size_t k, std::size_t d, std::uint64_t seed) {
    rlsel::datahub::PlantedRedundancySpec spec;
    spec.n_base = n;
    spec.dup_fraction = 0.0;
    spec.k = k;
    spec.d_in = d;
    spec.center_scale = 1.0;
    spec.seed = seed;
    auto ds = rlsel::datahub::make_blobs(spec);
    ds.parents.clear();
    return ds;
}

}  // namespace

TEST_CASE("covered pair at zero epsilon") {
    auto m = orc::fixture_model({2, 4, 3}, 0);
    std::vector<double> x{0.3, -0.7};
    auto r = orc::probe_covered_pair(m, x, unit({1.0, 2.0, -1.0, 0.5}), 0.0, 1);
    CHECK(r.output_gap == 0.0);
    CHECK(r.loss_gap == 0.0);
    CHECK(r.grad_gap == 0.0);
    CHECK(r.lemma1_residual == 0.0);
    CHECK_THROWS_AS(orc::probe_covered_pair(m, x, std::vector<double>{1, 1, 0, 0}, 0.1), rlsel::ContractViolation);
    CHECK_THROWS_AS(orc::probe_covered_pair(m, x, std::vector<double>{1, 0}, 0.1), rlsel::ContractViolation);
}

TEST_CASE("covered pair gaps are symmetric in the pair") {
    auto m = orc::fixture_model({2, 4, 3}, 1);
    const double eps = 1e-3;
    std::vector<double> x{0.4, 0.9}, d = unit({0.6, -0.8}), xi{x[0] + eps * d[0], x[1] + eps * d[1]};
    auto a = orc::probe_covered_pair(m, x, d, eps, 2, 0);
    auto b = orc::probe_covered_pair(m, xi, std::vector<double>{-d[0], -d[1]}, eps, 2, 0);
    CHECK(a.output_gap == doctest::Approx(b.output_gap).epsilon(1e-9));
    CHECK(a.loss_gap == doctest::Approx(b.loss_gap).epsilon(1e-9));
    CHECK(a.grad_gap == doctest::Approx(b.grad_gap).epsilon(1e-9));
}

TEST_CASE("loglog_slope") {
    std::vector<double> e{1e-1, 1e-2, 1e-3}, lin{3e-1, 3e-2, 3e-3}, quad{2e-2, 2e-4, 2e-6};
    CHECK(orc::loglog_slope(e, lin) == doctest::Approx(1.0));
    CHECK(orc::loglog_slope(e, quad) == doctest::Approx(2.0));
    CHECK(std::isnan(orc::loglog_slope(e, std::vector<double>{1, 0, 1})));
}

TEST_CASE("covered pair sweeps scale with the expected order") {
    orc::OracleOptions opt;
    auto rep = orc::covered_pair_sweeps(opt);
    CHECK(rep.passed());
    for (const auto& f : rep.failures()) MESSAGE(f);
    CHECK(rep.sweep.size() == 4 * 4 * opt.epsilons.size());

    opt.epsilons = {1e-1, 1e-2, 1e-3};
    CHECK(orc::covered_pair_sweeps(opt).sweep.size() == 4 * 4 * 3);
}

TEST_CASE("corrupted gradient fails the residual check") {
    orc::OracleOptions opt;
    opt.corrupt_gradient = 0.5;
    auto rep = orc::covered_pair_sweeps(opt);
    CHECK_FALSE(rep.passed());
    bool named = false;
    for (const auto& f : rep.failures()) named |= f.find("lemma1_residual_slope") != std::string::npos;
    CHECK(named);
}

TEST_CASE("output gap bound") {
    auto zero = rlsel::surrogate::MlpModel::zeros({4, 8, 3});
    std::vector<double> a(8, 1.0), b(8, 1.0);
    b[3] = 1.001;
    auto z = orc::prop1_bound_check(zero, a, b);
    CHECK(z.holds);
    CHECK(z.gap == 0.0);
    CHECK(z.bound_spectral == 0.0);

    auto m = orc::fixture_model({4, 8, 3}, 2);
    auto c = orc::prop1_bound_check(m, a, b);
    CHECK(c.holds);
    CHECK(c.margin > 0.0);
    CHECK(c.bound_spectral <= c.bound_frobenius);
    CHECK(orc::prop1_checks(orc::OracleOptions{}).passed());
}

TEST_CASE("softmax head hessian matches finite differences of the gradient") {
    auto ds = small_blobs(12, 3, 2, 3);
    auto head = rlsel::surrogate::MlpModel::init({2, 3}, 4);
    auto h = orc::softmax_head_hessian(head, ds.inputs, ds.labels, 0.0);
    auto mean_grad = [&](const rlsel::surrogate::MlpModel& m) {
        return rlsel::surrogate::loss_and_grads(m, ds.inputs, ds.labels).grads.flat();
    };
    const auto p0 = head.flat();
    const double step = 1e-6;
    for (std::size_t c = 0; c < p0.size(); ++c) {
        auto hi = head, lo = head;
        auto pp = p0, pm = p0;
        pp[c] += step;
        pm[c] -= step;
        hi.set_flat(pp);
        lo.set_flat(pm);
        auto gp = mean_grad(hi), gm = mean_grad(lo);
        for (std::size_t r = 0; r < p0.size(); ++r) CHECK(h(r, c) == doctest::Approx((gp[r] - gm[r]) / (2 * step)).epsilon(1e-5));
    }
}

TEST_CASE("influence gap") {
    auto ds = small_blobs(40, 3, 4, 5);
    auto head = orc::fit_softmax_head(ds, 1e-3);
    auto same = orc::influence_gap(head, ds, ds.inputs.row(2), ds.labels[2], ds.inputs.row(2), ds.labels[2],
                                   ds.inputs.row(5), ds.labels[5]);
    CHECK(same.param_gap == 0.0);
    CHECK(same.test_loss_gap == 0.0);
    CHECK(same.lambda > 0.0);

    auto r = orc::influence_gap(head, ds, ds.inputs.row(2), ds.labels[2], ds.inputs.row(9), ds.labels[9],
                                ds.inputs.row(5), ds.labels[5]);
    CHECK(r.param_gap <= r.bound + 1e-9);
    CHECK(r.hessian.rows() == head.n_params());

    // saturated softmax on zero inputs: the Hessian is exactly zero
    auto flat = rlsel::surrogate::MlpModel::zeros({4, 3});
    flat.biases[0][0] = 1000.0;
    auto empty = ds;
    empty.inputs = Matrix(ds.n(), 4);
    CHECK_THROWS_AS(orc::influence_gap(flat, empty, empty.inputs.row(0), 0, empty.inputs.row(1), 1, empty.inputs.row(2), 2),
                    orc::SingularHessian);
    CHECK(orc::influence_checks(orc::OracleOptions{}).passed());
}

TEST_CASE("fit_softmax_head reaches a stationary point") {
    auto ds = small_blobs(30, 2, 2, 6);
    const double l2 = 0.01;
    auto head = orc::fit_softmax_head(ds, l2);
    auto g = rlsel::surrogate::loss_and_grads(head, ds.inputs, ds.labels).grads.flat();
    auto p = head.flat();
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(g[i] + l2 * p[i]) < 1e-9);
}

TEST_CASE("leave one out") {
    auto ds = small_blobs(30, 2, 2, 7);
    std::vector<double> x_test{0.1, -0.2};

    SUBCASE("duplicated sample pair") {
        auto dup = ds;
        std::vector<std::size_t> rows(ds.n());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        rows.push_back(4);
        dup.inputs = ds.inputs.gather_rows(rows);
        dup.labels.push_back(ds.labels[4]);
        dup.ids.push_back(ds.n());
        std::vector<std::size_t> rem{4, ds.n()};
        auto res = orc::leave_one_out_check(dup, x_test, 0, 0.01, rem);
        CHECK(std::abs(res[0].actual - res[1].actual) <= 1e-6);
        CHECK(res[0].predicted == doctest::Approx(res[1].predicted).epsilon(1e-12));
    }

    SUBCASE("far, confidently classified sample") {
        auto far = ds;
        auto head = orc::fit_softmax_head(ds, 0.01);
        // push one row far along its own class direction
        const std::size_t r = 0;
        const std::uint32_t y = ds.labels[r];
        std::vector<double> dir(2);
        for (std::size_t f = 0; f < 2; ++f) dir[f] = head.weights[0](y, f) - head.weights[0](1 - y, f);
        dir = unit(dir);
        for (std::size_t f = 0; f < 2; ++f) far.inputs(r, f) = 40.0 * dir[f];
        std::vector<std::size_t> rem{r};
        auto res = orc::leave_one_out_check(far, x_test, 0, 0.01, rem);
        CHECK(std::abs(res[0].predicted) < 1e-6);
        CHECK(std::abs(res[0].actual) < 1e-6);
    }

    CHECK(orc::loo_checks(orc::OracleOptions{}).passed());
}

TEST_CASE("suite report output") {
    orc::SuiteReport r;
    r.checks.push_back({"a", true, 1.0, "= 1"});
    r.checks.push_back({"b", false, 2.0, "[0, 1]"});
    r.sweep.push_back({"f", "output_gap", 0.1, 0.2, 2.0});
    CHECK_FALSE(r.passed());
    REQUIRE(r.failures().size() == 1);
    CHECK(r.failures()[0].find("b") == 0);
    auto j = orc::suite_json(r, "0123456789abcdef");
    CHECK(j.find("\"config_digest\": \"0123456789abcdef\"") != std::string::npos);
    CHECK(j.find("\"version\"") != std::string::npos);
    CHECK(j.find("\"output_gap\"") != std::string::npos);
}
