#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gradcheck.hpp"
#include "rlsel/datahub.hpp"
#include "rlsel/surrogate.hpp"

namespace sg = rlsel::surrogate;
namespace dh = rlsel::datahub;
using rlsel::numkit::Matrix;

namespace {

Matrix random_batch(std::size_t n, std::size_t d, std::uint64_t seed) {
    rlsel::numkit::Rng rng(seed);
    Matrix x(n, d);
    for (auto& v : x.data()) v = rng.normal();
    return x;
}

dh::LabeledDataset separable_blobs(std::uint64_t seed) {
    dh::PlantedRedundancySpec spec;
    spec.n_base = 200;
    spec.dup_fraction = 0.0;
    spec.k = 3;
    spec.d_in = 4;
    spec.center_scale = 6.0;
    spec.seed = seed;
    return dh::make_blobs(spec);
}

}  // namespace

TEST_CASE("forward with zero weights gives uniform predictions") {
    auto m = sg::MlpModel::zeros({3, 5, 4});
    auto [feats, logits] = sg::forward(m, random_batch(6, 3, 1));
    for (double v : logits.data()) CHECK(v == 0.0);
    std::vector<std::uint32_t> y{0, 1, 2, 3, 0, 1};
    CHECK(sg::loss_and_grads(m, random_batch(6, 3, 1), y).loss == doctest::Approx(std::log(4.0)).epsilon(1e-14));
}

TEST_CASE("single-layer model uses inputs as features") {
    auto m = sg::MlpModel::init({3, 2}, 4);
    auto x = random_batch(5, 3, 2);
    auto [feats, logits] = sg::forward(m, x);
    CHECK(feats == x);
    CHECK(logits.rows() == 5);
    CHECK(logits.cols() == 2);
    CHECK(logits.all_finite());
}

TEST_CASE("forward rejects wrong input width") {
    auto m = sg::MlpModel::init({3, 2}, 4);
    CHECK_THROWS_AS(sg::forward(m, Matrix(2, 4)), rlsel::ContractViolation);
}

TEST_CASE("forward is permutation equivariant over the batch") {
    auto m = sg::MlpModel::init({4, 6, 5, 3}, 9);
    auto x = random_batch(7, 4, 3);
    std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
    auto a = sg::forward(m, x).second.gather_rows(perm);
    auto b = sg::forward(m, x.gather_rows(perm)).second;
    CHECK(a == b);
}

TEST_CASE("analytic gradients match central differences on a 2-2-2 net") {
    auto m = sg::MlpModel::init({2, 2, 2}, 12);
    auto x = random_batch(4, 2, 13);
    std::vector<std::uint32_t> y{0, 1, 1, 0};
    auto report = gradcheck::surrogate_check(m, x, y);
    CHECK(report.checked > 0);
    CHECK(report.max_rel_error <= 1e-6);
}

TEST_CASE("analytic gradients match central differences on a deeper net") {
    auto m = sg::MlpModel::init({4, 8, 6, 3}, 21);
    auto x = random_batch(10, 4, 22);
    std::vector<std::uint32_t> y{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
    auto report = gradcheck::surrogate_check(m, x, y);
    CHECK(report.checked > 0);
    CHECK(report.max_rel_error <= 1e-6);
}

TEST_CASE("input gradient matches central differences") {
    auto m = sg::MlpModel::init({3, 5, 2}, 31);
    auto x = random_batch(1, 3, 32);
    Matrix upstream = Matrix::from_rows({{0.3, -1.1}});
    Matrix dx;
    sg::backward(m, sg::forward_cache(m, x), upstream, &dx);
    for (std::size_t j = 0; j < 3; ++j) {
        auto f = [&](double h) {
            Matrix xp = x;
            xp(0, j) += h;
            auto z = sg::forward(m, xp).second;
            return 0.3 * z(0, 0) - 1.1 * z(0, 1);
        };
        const double fd = (f(1e-6) - f(-1e-6)) / 2e-6;
        CHECK(dx(0, j) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("per-sample gradients are independent of the rest of the batch") {
    auto m = sg::MlpModel::init({3, 4, 3}, 5);
    auto x = random_batch(3, 3, 6);
    std::vector<std::uint32_t> y{0, 2, 1};
    auto g = sg::per_sample_grads(m, x, y);
    std::vector<std::size_t> rows{0, 1, 1, 2};
    std::vector<std::uint32_t> y2{0, 2, 2, 1};
    auto g2 = sg::per_sample_grads(m, x.gather_rows(rows), y2);
    CHECK(g[0].flat() == g2[0].flat());
    CHECK(g[2].flat() == g2[3].flat());
    CHECK(g[1].flat() == g2[2].flat());

    // Mean of per-sample grads equals the batch gradient.
    auto batch = sg::loss_and_grads(m, x, y).grads.flat();
    auto sum = g[0];
    sum.add_scaled(g[1], 1.0);
    sum.add_scaled(g[2], 1.0);
    auto s = sum.flat();
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(s[i] / 3.0 - batch[i]) < 1e-14);
}

TEST_CASE("sgd_step special cases") {
    auto m = sg::MlpModel::init({3, 4, 2}, 7);
    auto x = random_batch(5, 3, 8);
    std::vector<std::uint32_t> y{0, 1, 0, 1, 1};
    auto g = sg::loss_and_grads(m, x, y).grads;

    sg::TrainConfig cfg;
    cfg.lr = 0.0;
    sg::SgdState st;
    auto same = m;
    sg::sgd_step(same, g, st, cfg, 0);
    CHECK(same == m);

    cfg.lr = 0.1;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    sg::SgdState st2;
    auto stepped = m;
    sg::sgd_step(stepped, g, st2, cfg, 0);
    auto before = m.flat(), after = stepped.flat(), gf = g.flat();
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i] == before[i] - 0.1 * gf[i]);
}

TEST_CASE("cosine schedule decays from lr to zero") {
    sg::TrainConfig cfg;
    cfg.epochs = 10;
    cfg.lr = 0.2;
    cfg.lr_schedule = sg::LrSchedule::cosine;
    CHECK(sg::lr_at(cfg, 0) == doctest::Approx(0.2));
    CHECK(sg::lr_at(cfg, 5) == doctest::Approx(0.1));
    CHECK(sg::lr_at(cfg, 10) == doctest::Approx(0.0));
}

TEST_CASE("training is deterministic and reduces the loss") {
    auto ds = separable_blobs(2);
    sg::TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch_size = 32;
    cfg.seed = 11;
    auto a = sg::MlpModel::init({4, 16, 8, 3}, 1);
    auto b = a;
    auto la = sg::train(a, ds, cfg);
    cfg.epochs = 5;
    auto c = sg::MlpModel::init({4, 16, 8, 3}, 1), d = c;
    sg::train(c, ds, cfg);
    sg::train(d, ds, cfg);
    CHECK(c == d);
    CHECK(la.back() < 0.1 * la.front());
    CHECK(a.all_finite());
    CHECK(sg::accuracy(a, ds) > 0.95);
    (void)b;
}

TEST_CASE("feature bank properties") {
    auto ds = separable_blobs(3);
    auto m = sg::MlpModel::init({4, 8, 6, 3}, 2);
    auto b1 = sg::extract_feature_bank(m, ds, 4);
    auto b2 = sg::extract_feature_bank(m, ds, 4);
    CHECK(b1.features == b2.features);
    CHECK(b1.epoch == 4);
    CHECK(b1.features.rows() == ds.n());
    CHECK(b1.features.cols() == 6);

    const std::size_t row[1] = {17};
    auto single = sg::forward(m, ds.inputs.gather_rows(row)).first;
    for (std::size_t j = 0; j < 6; ++j) CHECK(single(0, j) == b1.features(17, j));

    sg::TrainConfig cfg;
    sg::SgdState st;
    std::vector<std::size_t> idx{0, 1, 2, 3};
    std::vector<std::uint32_t> y;
    for (auto i : idx) y.push_back(ds.labels[i]);
    sg::sgd_step(m, sg::loss_and_grads(m, ds.inputs.gather_rows(idx), y).grads, st, cfg, 0);
    CHECK(!(sg::extract_feature_bank(m, ds).features == b1.features));
}

TEST_CASE("model checkpoint round trip and corruption") {
    auto m = sg::MlpModel::init({5, 7, 3}, 99);
    auto dir = std::filesystem::temp_directory_path() / "rlsel_tests";
    std::filesystem::create_directories(dir);
    auto path = (dir / "model.rlsm").string();
    sg::save_model(m, path);
    CHECK(sg::load_model(path) == m);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(60);
        f.put('\x01');
    }
    CHECK_THROWS_WITH_AS(sg::load_model(path), "checksum mismatch: file is corrupted", rlsel::binio::FormatError);
}
