#include "rlsel/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rlsel::surrogate {

namespace {

void check_dims(const std::vector<std::size_t>& dims) {
    if (dims.size() < 2) throw ContractViolation("MlpModel: need at least input and output dims");
    for (auto d : dims)
        if (d == 0) throw ContractViolation("MlpModel: zero-width layer");
}

constexpr unsigned char kModelMagic[4] = {'R', 'L', 'S', 'M'};
constexpr std::uint32_t kModelVersion = 1;

}  // namespace

MlpModel MlpModel::zeros(std::vector<std::size_t> dims) {
    check_dims(dims);
    MlpModel m;
    m.dims = std::move(dims);
    for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
        m.weights.emplace_back(m.dims[l + 1], m.dims[l]);
        m.biases.emplace_back(m.dims[l + 1], 0.0);
    }
    return m;
}

MlpModel MlpModel::init(std::vector<std::size_t> dims, std::uint64_t seed) {
    MlpModel m = zeros(std::move(dims));
    numkit::Rng rng(seed);
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(m.dims[l]));
        for (auto& w : m.weights[l].data()) w = rng.uniform(-bound, bound);
        for (auto& b : m.biases[l]) b = rng.uniform(-bound, bound);
    }
    return m;
}

std::size_t MlpModel::n_params() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < n_layers(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

bool MlpModel::all_finite() const {
    for (std::size_t l = 0; l < n_layers(); ++l) {
        if (!weights[l].all_finite()) return false;
        for (double b : biases[l])
            if (!std::isfinite(b)) return false;
    }
    return true;
}

std::vector<double> MlpModel::flat() const {
    std::vector<double> p;
    p.reserve(n_params());
    for (std::size_t l = 0; l < n_layers(); ++l) {
        p.insert(p.end(), weights[l].data().begin(), weights[l].data().end());
        p.insert(p.end(), biases[l].begin(), biases[l].end());
    }
    return p;
}

void MlpModel::set_flat(std::span<const double> p) {
    if (p.size() != n_params()) throw ContractViolation("MlpModel::set_flat: wrong parameter count");
    std::size_t off = 0;
    for (std::size_t l = 0; l < n_layers(); ++l) {
        auto& w = weights[l].data();
        std::copy(p.begin() + off, p.begin() + off + w.size(), w.begin());
        off += w.size();
        std::copy(p.begin() + off, p.begin() + off + biases[l].size(), biases[l].begin());
        off += biases[l].size();
    }
}

Grads Grads::zeros_like(const MlpModel& m) {
    Grads g;
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        g.w.emplace_back(m.weights[l].rows(), m.weights[l].cols());
        g.b.emplace_back(m.biases[l].size(), 0.0);
    }
    return g;
}

std::vector<double> Grads::flat() const {
    std::vector<double> p;
    for (std::size_t l = 0; l < w.size(); ++l) {
        p.insert(p.end(), w[l].data().begin(), w[l].data().end());
        p.insert(p.end(), b[l].begin(), b[l].end());
    }
    return p;
}

void Grads::add_scaled(const Grads& other, double s) {
    if (other.w.size() != w.size()) throw ContractViolation("Grads::add_scaled: layer count mismatch");
    for (std::size_t l = 0; l < w.size(); ++l) {
        auto& dst = w[l].data();
        const auto& src = other.w[l].data();
        if (dst.size() != src.size()) throw ContractViolation("Grads::add_scaled: shape mismatch");
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
        for (std::size_t i = 0; i < b[l].size(); ++i) b[l][i] += s * other.b[l][i];
    }
}

ForwardCache forward_cache(const MlpModel& m, const Matrix& x) {
    if (x.cols() != m.d_in())
        throw ContractViolation("forward: batch has " + std::to_string(x.cols()) + " columns, model expects " +
                                std::to_string(m.d_in()));
    ForwardCache c;
    c.acts.reserve(m.n_layers() + 1);
    c.acts.push_back(x);
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        Matrix z = numkit::matmul_bt(c.acts.back(), m.weights[l]);
        const bool hidden = l + 1 < m.n_layers();
        for (std::size_t r = 0; r < z.rows(); ++r) {
            auto row = z.row(r);
            for (std::size_t j = 0; j < row.size(); ++j) {
                row[j] += m.biases[l][j];
                if (hidden && row[j] < 0.0) row[j] = 0.0;
            }
        }
        c.acts.push_back(std::move(z));
    }
    return c;
}

std::pair<Matrix, Matrix> forward(const MlpModel& m, const Matrix& x) {
    auto c = forward_cache(m, x);
    Matrix logits = std::move(c.acts.back());
    Matrix feats = std::move(c.acts[c.acts.size() - 2]);
    return {std::move(feats), std::move(logits)};
}

Grads backward(const MlpModel& m, const ForwardCache& cache, const Matrix& dlogits, Matrix* d_input) {
    if (dlogits.rows() != cache.logits().rows() || dlogits.cols() != cache.logits().cols())
        throw ContractViolation("backward: upstream gradient shape mismatch");
    Grads g = Grads::zeros_like(m);
    Matrix delta = dlogits;
    for (std::size_t l = m.n_layers(); l-- > 0;) {
        const Matrix& in = cache.acts[l];
        g.w[l] = numkit::matmul_at(delta, in);
        for (std::size_t r = 0; r < delta.rows(); ++r) {
            auto row = delta.row(r);
            for (std::size_t j = 0; j < row.size(); ++j) g.b[l][j] += row[j];
        }
        if (l == 0 && d_input == nullptr) break;
        Matrix up = numkit::matmul(delta, m.weights[l]);
        if (l > 0) {
            // ReLU mask of the layer below.
            for (std::size_t i = 0; i < up.size(); ++i)
                if (in.data()[i] <= 0.0) up.data()[i] = 0.0;
        }
        delta = std::move(up);
    }
    if (d_input) *d_input = std::move(delta);
    return g;
}

LossGrads loss_and_grads(const MlpModel& m, const Matrix& x, std::span<const std::uint32_t> labels) {
    if (labels.size() != x.rows()) throw ContractViolation("loss_and_grads: label count != batch size");
    if (x.rows() == 0) throw ContractViolation("loss_and_grads: empty batch");
    auto cache = forward_cache(m, x);
    const Matrix& z = cache.logits();
    Matrix dz(z.rows(), z.cols());
    const double inv_b = 1.0 / static_cast<double>(z.rows());
    double loss = 0.0;
    for (std::size_t r = 0; r < z.rows(); ++r) {
        if (labels[r] >= z.cols()) throw ContractViolation("loss_and_grads: label out of range");
        loss += numkit::log_sum_exp(z.row(r)) - z(r, labels[r]);
        auto p = numkit::stable_softmax(z.row(r));
        for (std::size_t j = 0; j < p.size(); ++j) dz(r, j) = (p[j] - (j == labels[r] ? 1.0 : 0.0)) * inv_b;
    }
    return {loss * inv_b, backward(m, cache, dz)};
}

std::vector<Grads> per_sample_grads(const MlpModel& m, const Matrix& x, std::span<const std::uint32_t> labels) {
    if (labels.size() != x.rows()) throw ContractViolation("per_sample_grads: label count != batch size");
    std::vector<Grads> out;
    out.reserve(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const std::size_t idx[1] = {i};
        out.push_back(loss_and_grads(m, x.gather_rows(idx), labels.subspan(i, 1)).grads);
    }
    return out;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ContractViolation("TrainConfig: epochs must be >= 1");
    if (batch_size < 2) throw ContractViolation("TrainConfig: batch_size must be >= 2");
    if (!(lr >= 0.0)) throw ContractViolation("TrainConfig: lr must be nonnegative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ContractViolation("TrainConfig: momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ContractViolation("TrainConfig: weight_decay must be nonnegative");
}

double lr_at(const TrainConfig& cfg, std::size_t epoch) {
    if (cfg.lr_schedule == LrSchedule::constant) return cfg.lr;
    const double t = static_cast<double>(std::min(epoch, cfg.epochs)) / static_cast<double>(cfg.epochs);
    return 0.5 * cfg.lr * (1.0 + std::cos(std::numbers::pi * t));
}

void sgd_step(MlpModel& m, const Grads& g, SgdState& state, const TrainConfig& cfg, std::size_t epoch) {
    if (g.w.size() != m.n_layers()) throw ContractViolation("sgd_step: gradient layer count mismatch");
    if (state.velocity.w.empty()) state.velocity = Grads::zeros_like(m);
    const double lr = lr_at(cfg, epoch);
    auto update = [&](std::span<double> w, std::span<const double> grad, std::span<double> v) {
        if (grad.size() != w.size()) throw ContractViolation("sgd_step: gradient shape mismatch");
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double d = grad[i] + cfg.weight_decay * w[i];
            v[i] = cfg.momentum * v[i] + d;
            w[i] -= lr * v[i];
        }
    };
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        update(m.weights[l].data(), g.w[l].data(), state.velocity.w[l].data());
        update(m.biases[l], g.b[l], state.velocity.b[l]);
    }
}

FeatureBank extract_feature_bank(const MlpModel& m, const datahub::LabeledDataset& ds, std::size_t epoch) {
    return {forward(m, ds.inputs).first, epoch};
}

std::vector<std::uint32_t> predict(const MlpModel& m, const Matrix& x) {
    const Matrix z = forward(m, x).second;
    std::vector<std::uint32_t> out(z.rows());
    for (std::size_t r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        out[r] = static_cast<std::uint32_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

double accuracy(const MlpModel& m, const datahub::LabeledDataset& ds) {
    if (ds.n() == 0) return 0.0;
    const auto pred = predict(m, ds.inputs);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < ds.n(); ++i) hit += pred[i] == ds.labels[i];
    return static_cast<double>(hit) / static_cast<double>(ds.n());
}

std::vector<double> train(MlpModel& m, const datahub::LabeledDataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    if (ds.n() == 0) throw ContractViolation("train: empty dataset");
    numkit::Rng rng(cfg.seed);
    SgdState state;
    std::vector<double> losses;
    const std::size_t n = ds.n();
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = cfg.batch_size >= n ? std::vector<std::size_t>() : rng.permutation(n);
        double total = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            std::vector<std::size_t> idx(stop - start);
            for (std::size_t t = 0; t < idx.size(); ++t) idx[t] = order.empty() ? start + t : order[start + t];
            std::vector<std::uint32_t> y(idx.size());
            for (std::size_t t = 0; t < idx.size(); ++t) y[t] = ds.labels[idx[t]];
            auto lg = loss_and_grads(m, ds.inputs.gather_rows(idx), y);
            total += lg.loss * static_cast<double>(idx.size());
            sgd_step(m, lg.grads, state, cfg, epoch);
        }
        losses.push_back(total / static_cast<double>(n));
    }
    return losses;
}

void write_model(binio::Writer& w, const MlpModel& m) {
    w.u64(m.dims.size());
    for (auto d : m.dims) w.u64(d);
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        w.matrix(m.weights[l]);
        w.f64s(m.biases[l]);
    }
}

MlpModel read_model(binio::Reader& r) {
    const auto n_dims = r.u64();
    if (n_dims < 2 || n_dims > 64) throw binio::FormatError("implausible layer count");
    std::vector<std::size_t> dims(n_dims);
    for (auto& d : dims) {
        d = r.u64();
        if (d == 0 || d > (1u << 20)) throw binio::FormatError("implausible layer width");
    }
    MlpModel m = MlpModel::zeros(dims);
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        r.f64s(m.weights[l].data());
        r.f64s(m.biases[l]);
    }
    return m;
}

void save_model(const MlpModel& m, const std::string& path) {
    binio::Writer w;
    w.bytes(kModelMagic);
    w.u32(kModelVersion);
    write_model(w, m);
    w.seal();
    binio::write_file(path, w.buffer());
}

MlpModel load_model(const std::string& path) {
    const auto bytes = binio::read_file(path);
    binio::Reader r(bytes);
    r.verify_seal();
    auto magic = r.bytes(4);
    if (!std::equal(magic.begin(), magic.end(), kModelMagic)) throw binio::FormatError("not a model checkpoint");
    if (r.u32() != kModelVersion) throw binio::FormatError("unsupported model checkpoint version");
    MlpModel m = read_model(r);
    if (r.remaining() != 8) throw binio::FormatError("trailing bytes in model checkpoint");
    return m;
}

}  // namespace rlsel::surrogate
