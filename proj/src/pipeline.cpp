#include "rlsel/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "rlsel/cover.hpp"

namespace rlsel::pipeline {

namespace {

using numkit::Matrix;

constexpr std::uint64_t kSeedSurrogate = 0x5355525247ULL;
constexpr std::uint64_t kSeedAgent = 0x4147454e54ULL;
constexpr std::uint64_t kSeedLoop = 0x4c4f4f50ULL;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::size_t> model_dims(const datahub::LabeledDataset& ds, const std::vector<std::size_t>& hidden) {
    std::vector<std::size_t> dims{ds.d_in()};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(ds.k);
    return dims;
}

std::size_t ceil_count(double s_r, std::size_t n) {
    return static_cast<std::size_t>(std::ceil(s_r * static_cast<double>(n) - 1e-9));
}

// Degree signal for the whole epoch when it does not depend on the live policy.
std::vector<double> epoch_degrees(const RunConfig& cfg, const surrogate::FeatureBank& bank,
                                  const datahub::LabeledDataset& ds, const cover::ClassGeometry* geo) {
    if (cfg.degree_mode == DegreeMode::static_cover) return cover::static_novelty(*geo);
    auto e = cover::cover_degree(bank, ds).degrees;
    if (cfg.normalize_ec) {
        const auto [lo, hi] = std::minmax_element(e.begin(), e.end());
        const double a = *lo, span = *hi - *lo;
        for (auto& v : e) v = span > 0.0 ? (v - a) / span : 0.0;
    }
    return e;
}

Matrix state_rows(const Matrix& feats, std::span<const double> degree, bool with_degree) {
    if (!with_degree) return feats;
    Matrix s(feats.rows(), feats.cols() + 1);
    for (std::size_t r = 0; r < feats.rows(); ++r) {
        auto src = feats.row(r);
        std::copy(src.begin(), src.end(), s.row(r).begin());
        s(r, feats.cols()) = degree[r];
    }
    return s;
}

struct Loop {
    const datahub::LabeledDataset& ds;
    const RunConfig& cfg;
    surrogate::MlpModel model;
    surrogate::SgdState sgd;
    agent::ActorCritic ac;
    numkit::Rng rng;
};

SelectionResult run_loop(Loop& L, std::size_t epochs) {
    const auto& ds = L.ds;
    const auto& cfg = L.cfg;
    const std::size_t n = ds.n();
    auto train_cfg = cfg.surrogate;
    train_cfg.epochs = epochs;

    SelectionResult res;
    res.s_r = cfg.s_r;
    res.ids = ds.ids;
    res.scores.assign(n, 1.0);
    res.config_digest = cfg.digest();
    res.trace_path = cfg.trace_path;
    std::vector<std::uint8_t> selected(n, 1);
    std::size_t n_selected = n;
    const auto class_n = ds.class_counts();
    auto class_sel = class_n;

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        const auto bank = surrogate::extract_feature_bank(L.model, ds, epoch);
        std::optional<cover::ClassGeometry> geo;
        if (cfg.degree_mode != DegreeMode::rowsum) geo = cover::build_geometry(bank, ds, cfg.cover_eps_rel);
        std::vector<double> degrees;
        if (cfg.degree_mode != DegreeMode::live) degrees = epoch_degrees(cfg, bank, ds, geo ? &*geo : nullptr);

        const auto order = L.rng.permutation(n);
        std::vector<std::uint8_t> touched(n, 0);
        for (std::size_t start = 0; start < n; start += cfg.batch_size, ++step) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(stop));
            const std::size_t b = idx.size();

            std::vector<double> eb(b);
            for (std::size_t t = 0; t < b; ++t)
                eb[t] = cfg.degree_mode == DegreeMode::live ? cover::novelty(*geo, idx[t], selected) : degrees[idx[t]];

            const Matrix states = state_rows(bank.features.gather_rows(idx), eb, cfg.state_degree);
            const auto p = agent::actor_scores(L.ac, states);
            std::vector<double> actions(b);
            for (std::size_t t = 0; t < b; ++t) {
                const auto i = idx[t];
                touched[i] = 1;
                res.scores[i] = p[t];
                const std::uint8_t now = p[t] >= 0.5;
                n_selected = n_selected - selected[i] + now;
                class_sel[ds.labels[i]] = class_sel[ds.labels[i]] - selected[i] + now;
                selected[i] = now;
            }
            for (std::size_t t = 0; t < b; ++t) actions[t] = L.rng.bernoulli(p[t]) ? 1.0 : 0.0;

            const auto rr_all = agent::ratio_reward_from_count(n_selected, n, cfg.s_r);
            std::vector<double> ebr = eb;
            if (cfg.center_degree) {
                const double mean = std::accumulate(eb.begin(), eb.end(), 0.0) / static_cast<double>(b);
                for (auto& v : ebr) v -= mean;
            }
            const auto r2 = agent::selection_reward(ebr, cfg.r2_input == R2Input::action ? actions : p);
            std::vector<double> reward(b);
            for (std::size_t t = 0; t < b; ++t) {
                const auto c = ds.labels[idx[t]];
                const auto rr = cfg.class_ratio ? agent::ratio_reward_from_count(class_sel[c], class_n[c], cfg.s_r) : rr_all;
                double r1 = 0.0;
                switch (cfg.r1_mode) {
                    case R1Mode::literal: r1 = rr.r1_raw; break;
                    case R1Mode::negated: r1 = rr.r1_signed; break;
                    case R1Mode::directional:
                        r1 = rr.rho < cfg.s_r ? -rr.r1_raw * (1.0 - actions[t]) : -rr.r1_raw * actions[t];
                        break;
                }
                reward[t] = r1 + r2[t];
            }

            std::vector<std::uint32_t> y(b);
            for (std::size_t t = 0; t < b; ++t) y[t] = ds.labels[idx[t]];
            const Matrix x = ds.inputs.gather_rows(idx);
            const auto lg = surrogate::loss_and_grads(L.model, x, y);
            surrogate::sgd_step(L.model, lg.grads, L.sgd, train_cfg, epoch);

            const Matrix next_states = state_rows(surrogate::forward(L.model, x).first, eb, cfg.state_degree);
            const auto rep = agent::update(L.ac, states, next_states, actions, reward, cfg.agent);

            StepTrace tr;
            tr.epoch = epoch;
            tr.step = step;
            tr.mean_r1_raw = rr_all.r1_raw;
            tr.mean_r2 = std::accumulate(r2.begin(), r2.end(), 0.0) / static_cast<double>(b);
            tr.actor_loss = rep.actor_loss;
            tr.critic_loss = rep.critic_loss;
            tr.surrogate_loss = lg.loss;
            tr.current_ratio = rr_all.rho;
            res.trace.push_back(tr);
        }
        res.touched_per_epoch.push_back(static_cast<std::size_t>(std::count(touched.begin(), touched.end(), 1)));
    }
    res.epochs_run = epochs;
    finalize_mask(res);
    return res;
}

void check_class_collapse(SelectionResult& r, const datahub::LabeledDataset& ds) {
    std::vector<std::size_t> kept(ds.k, 0);
    for (std::size_t i = 0; i < ds.n(); ++i)
        if (r.mask[i]) ++kept[ds.labels[i]];
    r.class_collapse = std::any_of(kept.begin(), kept.end(), [](std::size_t c) { return c == 0; });
}

}  // namespace

void RunConfig::validate() const {
    if (!(s_r > 0.0 && s_r < 1.0)) throw ContractViolation("s_r must lie in (0, 1)");
    if (total_epochs < 1) throw ContractViolation("total_epochs must be >= 1");
    if (batch_size < 2) throw ContractViolation("batch_size must be >= 2");
    if (!(cover_eps_rel > 0.0)) throw ContractViolation("cover_eps_rel must be positive");
    for (auto h : hidden)
        if (h == 0) throw ContractViolation("hidden widths must be positive");
    auto t = surrogate;
    t.epochs = std::max<std::size_t>(1, t.epochs);
    t.batch_size = batch_size;
    t.validate();
    agent.validate();
}

std::string RunConfig::canonical() const {
    std::ostringstream o;
    o << "tool=" << kToolVersion << '\n';
    o << "s_r=" << fmt(s_r) << '\n';
    o << "total_epochs=" << total_epochs << '\n';
    o << "batch_size=" << batch_size << '\n';
    o << "hidden=";
    for (std::size_t i = 0; i < hidden.size(); ++i) o << (i ? "," : "") << hidden[i];
    o << '\n';
    o << "surrogate.lr=" << fmt(surrogate.lr) << '\n';
    o << "surrogate.momentum=" << fmt(surrogate.momentum) << '\n';
    o << "surrogate.weight_decay=" << fmt(surrogate.weight_decay) << '\n';
    o << "surrogate.lr_schedule=" << (surrogate.lr_schedule == surrogate::LrSchedule::cosine ? "cosine" : "constant")
      << '\n';
    o << "agent.gamma=" << fmt(agent.gamma) << '\n';
    o << "agent.lr=" << fmt(agent.lr) << '\n';
    o << "agent.weight_decay=" << fmt(agent.weight_decay) << '\n';
    o << "agent.beta1=" << fmt(agent.beta1) << '\n';
    o << "agent.beta2=" << fmt(agent.beta2) << '\n';
    o << "agent.adam_eps=" << fmt(agent.adam_eps) << '\n';
    o << "seed=" << seed << '\n';
    o << "r1_mode=" << to_string(r1_mode) << '\n';
    o << "r2_input=" << to_string(r2_input) << '\n';
    o << "degree_mode=" << to_string(degree_mode) << '\n';
    o << "state_degree=" << (state_degree ? 1 : 0) << '\n';
    o << "cover_eps_rel=" << fmt(cover_eps_rel) << '\n';
    o << "center_degree=" << (center_degree ? 1 : 0) << '\n';
    o << "class_ratio=" << (class_ratio ? 1 : 0) << '\n';
    o << "normalize_ec=" << (normalize_ec ? 1 : 0) << '\n';
    o << "ablate_mode=" << to_string(ablate_mode) << '\n';
    o << "ablate_keep_largest=" << (ablate_keep_largest ? 1 : 0) << '\n';
    return o.str();
}

std::string RunConfig::digest() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(numkit::fnv1a64(canonical())));
    return buf;
}

const char* to_string(R1Mode m) {
    switch (m) {
        case R1Mode::literal: return "literal";
        case R1Mode::negated: return "negated";
        case R1Mode::directional: return "directional";
    }
    return "?";
}

const char* to_string(R2Input m) { return m == R2Input::score ? "score" : "action"; }

const char* to_string(DegreeMode m) {
    switch (m) {
        case DegreeMode::rowsum: return "rowsum";
        case DegreeMode::static_cover: return "static";
        case DegreeMode::live: return "live";
    }
    return "?";
}

R1Mode parse_r1_mode(const std::string& s) {
    if (s == "literal") return R1Mode::literal;
    if (s == "negated") return R1Mode::negated;
    if (s == "directional") return R1Mode::directional;
    throw ContractViolation("unknown r1 mode '" + s + "' (literal|negated|directional)");
}

R2Input parse_r2_input(const std::string& s) {
    if (s == "score") return R2Input::score;
    if (s == "action") return R2Input::action;
    throw ContractViolation("unknown r2 input '" + s + "' (score|action)");
}

DegreeMode parse_degree_mode(const std::string& s) {
    if (s == "rowsum") return DegreeMode::rowsum;
    if (s == "static") return DegreeMode::static_cover;
    if (s == "live") return DegreeMode::live;
    throw ContractViolation("unknown degree mode '" + s + "' (rowsum|static|live)");
}

std::size_t SelectionResult::selected() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

std::vector<std::uint64_t> SelectionResult::selected_ids() const {
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) out.push_back(ids[i]);
    return out;
}

std::vector<std::uint8_t> binarize(std::span<const double> scores) {
    std::vector<std::uint8_t> m(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) m[i] = scores[i] >= 0.5;
    return m;
}

std::optional<std::size_t> nearest_band_count(std::size_t current, std::size_t n, double s_r, double tol) {
    if (n == 0) return std::nullopt;
    const double slack = 1e-12;
    auto in_band = [&](std::size_t k) {
        return std::abs(static_cast<double>(k) / static_cast<double>(n) - s_r) <= tol + slack;
    };
    if (in_band(current)) return current;
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k <= n; ++k) {
        if (!in_band(k)) continue;
        const auto dist = k > current ? k - current : current - k;
        if (!best || dist < (*best > current ? *best - current : current - *best)) best = k;
    }
    return best;
}

std::vector<std::uint8_t> top_by_score(std::span<const double> scores, std::span<const std::uint64_t> ids,
                                       std::size_t count) {
    if (scores.size() != ids.size()) throw ContractViolation("top_by_score: scores/ids length mismatch");
    if (count > scores.size()) throw ContractViolation("top_by_score: count exceeds n");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return ids[a] < ids[b];
    });
    std::vector<std::uint8_t> m(scores.size(), 0);
    for (std::size_t t = 0; t < count; ++t) m[order[t]] = 1;
    return m;
}

void finalize_mask(SelectionResult& r, double tol) {
    const std::size_t n = r.scores.size();
    r.mask = binarize(r.scores);
    const std::size_t current = r.selected();
    r.ratio_before_repair = n ? static_cast<double>(current) / static_cast<double>(n) : 0.0;
    const auto target = nearest_band_count(current, n, r.s_r, tol);
    if (!target)
        throw ConstraintError("no selection size of " + std::to_string(n) + " samples lies within " + fmt(tol) +
                              " of ratio " + fmt(r.s_r));
    if (*target != current) {
        r.mask = top_by_score(r.scores, r.ids, *target);
        r.ratio_repaired = true;
    }
    r.achieved_ratio = static_cast<double>(r.selected()) / static_cast<double>(n);
}

RunArtifacts select(const datahub::LabeledDataset& ds, const RunConfig& cfg) {
    cfg.validate();
    ds.validate();
    auto model = surrogate::MlpModel::init(model_dims(ds, cfg.hidden), numkit::derive_seed(cfg.seed, kSeedSurrogate));
    const std::size_t d_state = model.d_feat() + (cfg.state_degree ? 1 : 0);
    // Hidden widths follow the surrogate's feature width.
    auto ac = agent::ActorCritic::init(d_state, numkit::derive_seed(cfg.seed, kSeedAgent), model.d_feat());
    Loop L{ds, cfg, std::move(model), {}, std::move(ac), numkit::Rng(numkit::derive_seed(cfg.seed, kSeedLoop))};
    auto res = run_loop(L, cfg.total_epochs);
    check_class_collapse(res, ds);
    return {std::move(res), std::move(L.ac), std::move(L.model)};
}

RunArtifacts transfer_select(const datahub::LabeledDataset& ds, const agent::ActorCritic& source,
                             const surrogate::MlpModel* source_model, double new_s_r, RunConfig cfg,
                             std::size_t fine_tune_epochs) {
    cfg.s_r = new_s_r;
    cfg.total_epochs = fine_tune_epochs;
    cfg.validate();
    ds.validate();
    surrogate::MlpModel model = source_model ? *source_model
                                             : surrogate::MlpModel::init(model_dims(ds, cfg.hidden),
                                                                         numkit::derive_seed(cfg.seed, kSeedSurrogate));
    if (model.d_in() != ds.d_in() || model.d_out() != ds.k)
        throw ContractViolation("transfer: surrogate checkpoint does not match the dataset's shape");
    const std::size_t d_state = model.d_feat() + (cfg.state_degree ? 1 : 0);
    if (source.d_state() != d_state)
        throw ContractViolation("transfer: policy expects state width " + std::to_string(source.d_state()) +
                                ", surrogate provides " + std::to_string(d_state));
    Loop L{ds, cfg, std::move(model), {}, source, numkit::Rng(numkit::derive_seed(cfg.seed, kSeedLoop))};
    auto res = run_loop(L, fine_tune_epochs);
    check_class_collapse(res, ds);
    return {std::move(res), std::move(L.ac), std::move(L.model)};
}

RunArtifacts select_without_rl(const datahub::LabeledDataset& ds, const RunConfig& cfg) {
    cfg.validate();
    ds.validate();
    auto model = surrogate::MlpModel::init(model_dims(ds, cfg.hidden), numkit::derive_seed(cfg.seed, kSeedSurrogate));
    // Same minibatch stream and step rule as the co-trained surrogate in select().
    numkit::Rng rng(numkit::derive_seed(cfg.seed, kSeedLoop));
    auto train_cfg = cfg.surrogate;
    train_cfg.epochs = cfg.total_epochs;
    surrogate::SgdState sgd;
    const std::size_t n = ds.n();
    SelectionResult res;
    res.s_r = cfg.s_r;
    res.ids = ds.ids;
    res.config_digest = cfg.digest();
    res.trace_path = cfg.trace_path;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.total_epochs; ++epoch) {
        const auto order = rng.permutation(n);
        for (std::size_t start = 0; start < n; start += cfg.batch_size, ++step) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(stop));
            std::vector<std::uint32_t> y(idx.size());
            for (std::size_t t = 0; t < idx.size(); ++t) y[t] = ds.labels[idx[t]];
            const auto lg = surrogate::loss_and_grads(model, ds.inputs.gather_rows(idx), y);
            surrogate::sgd_step(model, lg.grads, sgd, train_cfg, epoch);
            StepTrace tr;
            tr.epoch = epoch;
            tr.step = step;
            tr.surrogate_loss = lg.loss;
            res.trace.push_back(tr);
        }
        res.touched_per_epoch.push_back(n);
    }
    const auto bank = surrogate::extract_feature_bank(model, ds, cfg.total_epochs);
    std::vector<double> signal;
    if (cfg.ablate_mode == DegreeMode::rowsum) {
        signal = cover::cover_degree(bank, ds).degrees;
    } else {
        // Fewer covering class mates ranks higher.
        const auto geo = cover::build_geometry(bank, ds, cfg.cover_eps_rel);
        const std::vector<std::uint8_t> all(n, 1);
        signal.resize(n);
        for (std::size_t i = 0; i < n; ++i) signal[i] = -cover::soft_cover_count(geo, i, all);
    }
    if (!cfg.ablate_keep_largest)
        for (auto& v : signal) v = -v;
    res.scores = signal;
    res.mask = top_by_score(signal, ds.ids, ceil_count(cfg.s_r, n));
    res.ratio_before_repair = res.achieved_ratio = static_cast<double>(res.selected()) / static_cast<double>(n);
    res.epochs_run = cfg.total_epochs;
    check_class_collapse(res, ds);
    return {std::move(res), {}, std::move(model)};
}

surrogate::MlpModel retrain(const datahub::LabeledDataset& train, const RetrainConfig& cfg) {
    auto model = surrogate::MlpModel::init(model_dims(train, cfg.hidden), cfg.seed);
    auto tc = cfg.train;
    if (tc.batch_size == 0) tc.batch_size = std::max<std::size_t>(2, train.n());
    tc.seed = numkit::derive_seed(cfg.seed, 0x5245);
    surrogate::train(model, train, tc);
    return model;
}

std::vector<std::uint8_t> random_mask(std::size_t n, std::size_t count, std::uint64_t seed) {
    if (count > n) throw ContractViolation("random_mask: count exceeds n");
    numkit::Rng rng(seed);
    const auto perm = rng.permutation(n);
    std::vector<std::uint8_t> m(n, 0);
    for (std::size_t t = 0; t < count; ++t) m[perm[t]] = 1;
    return m;
}

RetrainReport retrain_report(const datahub::LabeledDataset& ds, std::span<const std::uint8_t> mask,
                             const datahub::LabeledDataset& test, const RetrainConfig& cfg, std::uint64_t random_seed) {
    if (mask.size() != ds.n()) throw ContractViolation("retrain: mask length does not match the dataset");
    if (test.d_in() != ds.d_in() || test.k != ds.k) throw ContractViolation("retrain: test set shape mismatch");
    RetrainReport rep;
    rep.n_selected = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
    const auto sel = datahub::filter(ds, mask);
    const auto rnd_mask = random_mask(ds.n(), rep.n_selected, random_seed);
    const auto rnd = datahub::filter(ds, rnd_mask);

    const auto m_full = retrain(ds, cfg);
    const auto m_sel = retrain(sel, cfg);
    const auto m_rnd = retrain(rnd, cfg);
    rep.acc_full = surrogate::accuracy(m_full, test);
    rep.acc_selected = surrogate::accuracy(m_sel, test);
    rep.acc_random = surrogate::accuracy(m_rnd, test);

    const std::vector<std::uint8_t> all(ds.n(), 1), all_sel(sel.n(), 1);
    const auto f_full = surrogate::forward(m_full, ds.inputs).first;
    rep.di_full = cover::dunn_index(f_full, ds.labels, all);
    rep.di_selected_full_model = cover::dunn_index(f_full, ds.labels, mask);
    rep.di_selected = cover::dunn_index(surrogate::forward(m_sel, sel.inputs).first, sel.labels, all_sel);
    return rep;
}

double duplicate_pruning_rate(const datahub::LabeledDataset& ds, std::span<const std::uint8_t> mask) {
    if (mask.size() != ds.n() || ds.parents.size() != ds.n())
        throw ContractViolation("duplicate_pruning_rate: need a mask and parent annotations for every sample");
    std::size_t dups = 0, pruned = 0;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        if (!ds.parents[i]) continue;
        ++dups;
        pruned += mask[i] == 0;
    }
    const double ratio = static_cast<double>(std::count(mask.begin(), mask.end(), 1)) / static_cast<double>(ds.n());
    if (dups == 0 || ratio >= 1.0) return 0.0;
    return (static_cast<double>(pruned) / static_cast<double>(dups)) / (1.0 - ratio);
}

std::string result_json(const SelectionResult& r, const std::string& created_at) {
    nlohmann::ordered_json j;
    j["version"] = kToolVersion;
    j["config_digest"] = r.config_digest;
    j["s_r"] = r.s_r;
    j["achieved_ratio"] = r.achieved_ratio;
    j["ratio_before_repair"] = r.ratio_before_repair;
    j["ratio_repaired"] = r.ratio_repaired;
    j["class_collapse"] = r.class_collapse;
    j["epochs_run"] = r.epochs_run;
    j["n"] = r.ids.size();
    j["mask"] = r.selected_ids();
    nlohmann::ordered_json scores = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < r.ids.size(); ++i) scores[std::to_string(r.ids[i])] = r.scores[i];
    j["scores"] = std::move(scores);
    j["trace_path"] = r.trace_path;
    if (!created_at.empty()) j["created_at"] = created_at;
    return j.dump(2) + "\n";
}

void write_trace_csv(const SelectionResult& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "epoch,step,mean_r1_raw,mean_r2,actor_loss,critic_loss,surrogate_loss,current_ratio\n";
    for (const auto& t : r.trace)
        out << t.epoch << ',' << t.step << ',' << fmt(t.mean_r1_raw) << ',' << fmt(t.mean_r2) << ','
            << fmt(t.actor_loss) << ',' << fmt(t.critic_loss) << ',' << fmt(t.surrogate_loss) << ','
            << fmt(t.current_ratio) << '\n';
}

}  // namespace rlsel::pipeline
