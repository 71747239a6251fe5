// Acceptance runner: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <algorithm>
#include <tuple>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "rlsel/oracle.hpp"
#include "rlsel/pipeline.hpp"

namespace fs = std::filesystem;
namespace pl = rlsel::pipeline;
namespace dh = rlsel::datahub;
namespace orc = rlsel::oracle;
using Clock = std::chrono::steady_clock;

namespace {

// Seeds, fixtures and tolerances are fixed here.
const std::vector<std::uint64_t> kSeeds{0, 1, 2, 3, 4};
constexpr double kRatioTol = 0.01;
constexpr double kDupRate = 1.5;
constexpr double kTransferDupRate = 1.25;
constexpr std::size_t kMajority = 4;
constexpr double kSurrogateGradTol = 1e-6;
constexpr double kAgentGradTol = 1e-5;
constexpr std::size_t kHoldout = 5000;
constexpr std::uint64_t kSeedRetrain = 0x524554524149ULL;
constexpr std::uint64_t kSeedRandomMask = 0x524e444d534bULL;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

dh::PlantedRedundancySpec planted_spec(std::uint64_t seed) {
    dh::PlantedRedundancySpec s;
    s.n_base = 350;
    s.dup_fraction = 0.3;
    s.k = 5;
    s.d_in = 16;
    s.center_scale = 0.5;
    s.seed = seed;
    return s;
}

dh::PlantedRedundancySpec blob_spec(std::uint64_t seed) {
    dh::PlantedRedundancySpec s;
    s.n_base = 1000;
    s.dup_fraction = 0.0;
    s.k = 5;
    s.d_in = 16;
    s.seed = seed;
    return s;
}

pl::RetrainConfig retrain_cfg(std::uint64_t seed) {
    pl::RetrainConfig rc;
    rc.seed = rlsel::numkit::derive_seed(seed, kSeedRetrain);
    return rc;
}

struct Planted {
    dh::LabeledDataset train, test;
};

struct Timed {
    pl::RunArtifacts art;
    double seconds = 0.0;
};

class Runs {
public:
    const Planted& planted(std::uint64_t seed) {
        auto it = planted_.find(seed);
        if (it == planted_.end()) {
            const auto spec = planted_spec(seed);
            it = planted_.emplace(seed, Planted{dh::make_blobs(spec), dh::make_blob_holdout(spec, kHoldout)}).first;
        }
        return it->second;
    }

    const Timed& select(std::uint64_t seed, double s_r) {
        const auto key = std::make_pair(seed, s_r);
        auto it = select_.find(key);
        if (it == select_.end()) {
            const auto t0 = Clock::now();
            pl::RunConfig cfg;
            cfg.s_r = s_r;
            cfg.seed = seed;
            auto art = pl::select(planted(seed).train, cfg);
            it = select_.emplace(key, Timed{std::move(art), seconds_since(t0)}).first;
        }
        return it->second;
    }

    const Timed& ablate(std::uint64_t seed, double s_r, pl::DegreeMode mode) {
        const auto key = std::make_tuple(seed, s_r, mode);
        auto it = ablate_.find(key);
        if (it == ablate_.end()) {
            const auto t0 = Clock::now();
            pl::RunConfig cfg;
            cfg.s_r = s_r;
            cfg.seed = seed;
            cfg.ablate_mode = mode;
            auto art = pl::select_without_rl(planted(seed).train, cfg);
            it = ablate_.emplace(key, Timed{std::move(art), seconds_since(t0)}).first;
        }
        return it->second;
    }

private:
    std::map<std::uint64_t, Planted> planted_;
    std::map<std::pair<std::uint64_t, double>, Timed> select_;
    std::map<std::tuple<std::uint64_t, double, pl::DegreeMode>, Timed> ablate_;
};

double retrain_accuracy(const Planted& p, std::span<const std::uint8_t> mask, std::uint64_t seed) {
    return rlsel::surrogate::accuracy(pl::retrain(dh::filter(p.train, mask), retrain_cfg(seed)), p.test);
}

struct Outcome {
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    double budget = 0.0;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + v[i];
    return s;
}

// 1-4: theory suite pieces.
Outcome suite_outcome(const std::function<orc::SuiteReport()>& run, double budget) {
    const auto t0 = Clock::now();
    const auto rep = run();
    Outcome o;
    o.seconds = seconds_since(t0);
    o.budget = budget;
    std::size_t ok = 0;
    for (const auto& c : rep.checks) ok += c.passed;
    o.pass = rep.passed();
    o.detail = std::to_string(ok) + "/" + std::to_string(rep.checks.size()) + " checks";
    for (const auto& f : rep.failures()) o.detail += "; " + f;
    return o;
}

Outcome slopes(const orc::OracleOptions& opt) {
    const auto t0 = Clock::now();
    const auto rep = orc::covered_pair_sweeps(opt);
    Outcome o;
    o.seconds = seconds_since(t0);
    o.budget = 10.0;
    double lo1 = 1e9, hi1 = -1e9, lo2 = 1e9, hi2 = -1e9;
    for (const auto& c : rep.checks) {
        if (c.name.find("_slope") == std::string::npos) continue;
        if (c.name.find("residual") != std::string::npos) {
            lo2 = std::min(lo2, c.value);
            hi2 = std::max(hi2, c.value);
        } else {
            lo1 = std::min(lo1, c.value);
            hi1 = std::max(hi1, c.value);
        }
    }
    o.pass = rep.passed();
    o.detail = "first-order slopes in [" + fmt("%.4f", lo1) + ", " + fmt("%.4f", hi1) + "], residual slopes in [" +
               fmt("%.4f", lo2) + ", " + fmt("%.4f", hi2) + "]";
    for (const auto& f : rep.failures()) o.detail += "; " + f;
    return o;
}

Outcome ratio_constraint() {
    Outcome o;
    o.budget = 600.0;
    const auto t0 = Clock::now();
    std::size_t ok = 0, total = 0, collapsed = 0;
    double worst = 0.0;
    for (double s_r : {0.3, 0.5, 0.7, 0.9})
        for (auto seed : kSeeds) {
            const auto ds = dh::make_blobs(blob_spec(seed));
            pl::RunConfig cfg;
            cfg.s_r = s_r;
            cfg.seed = seed;
            const auto r = pl::select(ds, cfg).result;
            const double dev = std::abs(r.achieved_ratio - s_r);
            worst = std::max(worst, dev);
            collapsed += r.class_collapse;
            ok += dev <= kRatioTol + 1e-12 && !r.class_collapse;
            ++total;
        }
    o.seconds = seconds_since(t0);
    o.pass = ok == total;
    o.detail = std::to_string(ok) + "/" + std::to_string(total) + " runs in band, worst |ratio - s_r| = " +
               fmt("%.4f", worst) + ", class collapse in " + std::to_string(collapsed);
    return o;
}

Outcome redundancy_removal(Runs& runs) {
    Outcome o;
    o.budget = 300.0;
    double sum = 0.0;
    std::vector<std::string> per;
    for (auto seed : kSeeds) {
        const auto& t = runs.select(seed, 0.7);
        const double rate = pl::duplicate_pruning_rate(runs.planted(seed).train, t.art.result.mask);
        sum += rate;
        per.push_back(fmt("%.2f", rate));
        o.seconds += t.seconds;
    }
    const double mean = sum / static_cast<double>(kSeeds.size());
    o.pass = mean >= kDupRate;
    o.detail = "mean duplicate pruning " + fmt("%.3f", mean) + "x chance (per seed " + join(per) + ")";
    return o;
}

Outcome dunn_direction(Runs& runs) {
    Outcome o;
    o.budget = 120.0;
    std::size_t wins = 0;
    std::vector<std::string> per;
    for (auto seed : kSeeds) {
        const auto& t = runs.select(seed, 0.9);
        const auto t0 = Clock::now();
        const auto& p = runs.planted(seed);
        const auto rep = pl::retrain_report(p.train, t.art.result.mask, p.test, retrain_cfg(seed),
                                            rlsel::numkit::derive_seed(retrain_cfg(seed).seed, kSeedRandomMask));
        const double di_full = rep.di_full, di_sel = rep.di_selected;
        o.seconds += t.seconds + seconds_since(t0);
        wins += di_sel > di_full;
        per.push_back(fmt("%.4g", di_sel) + "/" + fmt("%.4g", di_full));
    }
    o.pass = wins >= kMajority;
    o.detail = std::to_string(wins) + "/5 seeds with DI(selected) > DI(full) (selected/full: " + join(per) + ")";
    return o;
}

struct Versus {
    std::size_t wins = 0;
    std::vector<std::string> per;
};

Versus rl_vs_ablation(Runs& runs, double s_r, pl::DegreeMode mode, double& seconds) {
    Versus v;
    for (auto seed : kSeeds) {
        const auto& rl = runs.select(seed, s_r);
        const auto& ab = runs.ablate(seed, s_r, mode);
        const auto t0 = Clock::now();
        const auto& p = runs.planted(seed);
        const double a_rl = retrain_accuracy(p, rl.art.result.mask, seed);
        const double a_ab = retrain_accuracy(p, ab.art.result.mask, seed);
        seconds += rl.seconds + ab.seconds + seconds_since(t0);
        v.wins += a_rl > a_ab;
        v.per.push_back(fmt("%.4f", a_rl) + "/" + fmt("%.4f", a_ab));
    }
    return v;
}

Outcome rl_beats_ablation(Runs& runs, std::string& info) {
    Outcome o;
    o.budget = 900.0;
    const auto v6 = rl_vs_ablation(runs, 0.6, pl::DegreeMode::rowsum, o.seconds);
    const auto v7 = rl_vs_ablation(runs, 0.7, pl::DegreeMode::rowsum, o.seconds);
    o.pass = v6.wins >= kMajority && v7.wins >= kMajority;
    o.detail = "vs one-shot E_c ranking: s_r=0.6 " + std::to_string(v6.wins) + "/5, s_r=0.7 " + std::to_string(v7.wins) +
               "/5 (acc rl/ablate 0.6: " + join(v6.per) + "; 0.7: " + join(v7.per) + ")";
    double unused = 0.0;
    const auto s6 = rl_vs_ablation(runs, 0.6, pl::DegreeMode::static_cover, unused);
    const auto s7 = rl_vs_ablation(runs, 0.7, pl::DegreeMode::static_cover, unused);
    info = "vs one-shot soft-cover-count ranking: s_r=0.6 " + std::to_string(s6.wins) + "/5, s_r=0.7 " +
           std::to_string(s7.wins) + "/5 (acc rl/ablate 0.6: " + join(s6.per) + "; 0.7: " + join(s7.per) + ")";
    return o;
}

Outcome beats_random(Runs& runs) {
    Outcome o;
    o.budget = 600.0;
    std::size_t wins = 0;
    std::vector<std::string> per;
    for (auto seed : kSeeds) {
        const auto& t = runs.select(seed, 0.5);
        const auto t0 = Clock::now();
        const auto& p = runs.planted(seed);
        const auto& mask = t.art.result.mask;
        const auto count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
        const auto rnd = pl::random_mask(p.train.n(), count, rlsel::numkit::derive_seed(retrain_cfg(seed).seed, kSeedRandomMask));
        const double a_sel = retrain_accuracy(p, mask, seed);
        const double a_rnd = retrain_accuracy(p, rnd, seed);
        o.seconds += t.seconds + seconds_since(t0);
        wins += a_sel >= a_rnd;
        per.push_back(fmt("%.4f", a_sel) + "/" + fmt("%.4f", a_rnd));
    }
    o.pass = wins >= kMajority;
    o.detail = std::to_string(wins) + "/5 seeds with acc(selected) >= acc(random) (" + join(per) + ")";
    return o;
}

Outcome transfer(Runs& runs) {
    Outcome o;
    o.budget = 120.0;
    std::size_t in_band = 0;
    double sum = 0.0;
    std::vector<std::string> per;
    for (auto seed : kSeeds) {
        const auto& src = runs.select(seed, 0.7);
        const auto t0 = Clock::now();
        pl::RunConfig cfg;
        cfg.seed = seed;
        const auto t = pl::transfer_select(runs.planted(seed).train, src.art.agent, &src.art.model, 0.9, cfg, 15);
        o.seconds += seconds_since(t0);
        const auto& r = t.result;
        in_band += std::abs(r.achieved_ratio - 0.9) <= kRatioTol + 1e-12 && r.epochs_run == 15 && !r.class_collapse;
        const double rate = pl::duplicate_pruning_rate(runs.planted(seed).train, r.mask);
        sum += rate;
        per.push_back(fmt("%.2f", rate));
    }
    const double mean = sum / static_cast<double>(kSeeds.size());
    o.pass = in_band == kSeeds.size() && mean >= kTransferDupRate;
    o.detail = std::to_string(in_band) + "/5 in band after 15 epochs, mean duplicate pruning " + fmt("%.3f", mean) +
               "x chance (per seed " + join(per) + ")";
    return o;
}

// Runs every CLI command twice into separate directories and compares bytes.
Outcome determinism(Runs& runs) {
    Outcome o;
    o.budget = 300.0;
    const auto t0 = Clock::now();
    std::vector<std::string> bad;

    const auto& a = runs.select(0, 0.7);
    pl::RunConfig cfg;
    cfg.s_r = 0.7;
    cfg.seed = 0;
    const auto b = pl::select(runs.planted(0).train, cfg);
    if (!(a.art.result == b.result) || !(a.art.agent == b.agent) || !(a.art.model == b.model)) bad.push_back("library select");

    const fs::path root = fs::temp_directory_path() / "rlsel_acceptance";
    fs::remove_all(root);
    const std::string cli = RLSEL_CLI;
    for (const char* run : {"a", "b"}) {
        const fs::path d = root / run;
        fs::create_directories(d);
        const std::string q = "'" + d.string() + "'";
        const std::vector<std::string> cmds{
            "gen-blobs --n-base 140 --k 4 --d-in 8 --seed 3 --out " + q + "/data.csv --parents-out " + q +
                "/parents.csv --holdout 400 --holdout-out " + q + "/test.csv",
            "select --data " + q + "/data.csv --ratio 0.7 --seed 7 --epochs 20 --no-timestamp --out " + q + "/select",
            "transfer --data " + q + "/data.csv --from " + q + "/select --ratio 0.9 --epochs 5 --no-timestamp --out " + q +
                "/transfer",
            "ablate --data " + q + "/data.csv --ratio 0.7 --seed 7 --epochs 20 --no-timestamp --out " + q + "/ablate",
            "retrain --data " + q + "/data.csv --test " + q + "/test.csv --result " + q + "/select/result.json --parents " +
                q + "/parents.csv --seed 7 --no-timestamp --out " + q + "/retrain.json",
            "verify-theory --epsilons 1e-1,1e-2,1e-3 --out " + q + "/theory"};
        for (const auto& c : cmds)
            if (std::system((cli + " " + c + " > /dev/null 2>&1").c_str()) != 0) bad.push_back("exit status: " + c.substr(0, c.find(' ')));
    }
    auto bytes = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    };
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), root / "a");
        ++files;
        if (!fs::exists(root / "b" / rel) || bytes(e.path()) != bytes(root / "b" / rel)) bad.push_back(rel.string());
    }
    o.seconds = seconds_since(t0) + a.seconds;
    o.pass = bad.empty() && files > 0;
    o.detail = std::to_string(files) + " CLI artifacts compared byte for byte, plus a library rerun";
    if (!bad.empty()) o.detail += "; differing: " + join(bad);
    return o;
}

Outcome gradients() {
    Outcome o;
    o.budget = 10.0;
    const auto t0 = Clock::now();
    rlsel::numkit::Rng rng(12);
    rlsel::numkit::Matrix x(8, 6), s(6, 9);
    for (auto& v : x.data()) v = rng.normal();
    for (auto& v : s.data()) v = rng.normal();
    const std::vector<std::uint32_t> y{0, 1, 2, 0, 1, 2, 2, 1};
    const auto m = rlsel::surrogate::MlpModel::init({6, 16, 8, 3}, 5);
    const auto rs = gradcheck::surrogate_check(m, x, y);
    const auto ac = rlsel::agent::ActorCritic::init(9, 6);
    const auto ra = gradcheck::actor_check(ac.actor, s, {1, 0, 1, 1, 0, 0}, {0.8, -1.1, 0.3, 2.0, -0.4, 0.05});
    const auto rc = gradcheck::critic_check(ac.critic, s, {0.5, -1.0, 2.0, 0.1, 0.0, 1.5});
    o.seconds = seconds_since(t0);
    o.pass = rs.checked > 0 && ra.checked > 0 && rc.checked > 0 && rs.max_rel_error <= kSurrogateGradTol &&
             ra.max_rel_error <= kAgentGradTol && rc.max_rel_error <= kAgentGradTol;
    o.detail = "max relative error surrogate " + fmt("%.2e", rs.max_rel_error) + " (" + std::to_string(rs.checked) +
               " params), actor " + fmt("%.2e", ra.max_rel_error) + " (" + std::to_string(ra.checked) + "), critic " +
               fmt("%.2e", rc.max_rel_error) + " (" + std::to_string(rc.checked) + ")";
    return o;
}

}  // namespace

int main() {
    Runs runs;
    const orc::OracleOptions opt;
    std::size_t passed = 0;
    auto report = [&](int id, const char* name, Outcome o) {
        const bool in_time = o.seconds <= o.budget;
        const bool ok = o.pass && in_time;
        passed += ok;
        std::printf("criterion %2d %s  %s: %s [%.1f s of %.0f s]\n", id, ok ? "PASS" : "FAIL", name, o.detail.c_str(),
                    o.seconds, o.budget);
        std::fflush(stdout);
    };

    report(1, "covered-pair scaling", slopes(opt));
    report(2, "output gap bound", suite_outcome([&] { return orc::prop1_checks(opt); }, 5.0));
    report(3, "influence inequality", suite_outcome([&] { return orc::influence_checks(opt); }, 30.0));
    report(4, "leave-one-out fidelity", suite_outcome([&] { return orc::loo_checks(opt); }, 60.0));
    report(5, "ratio constraint", ratio_constraint());
    report(6, "redundancy removal", redundancy_removal(runs));
    report(7, "Dunn index direction", dunn_direction(runs));
    std::string info;
    report(8, "RL vs ablation", rl_beats_ablation(runs, info));
    std::printf("   info     RL vs same-signal ablation: %s\n", info.c_str());
    report(9, "selection vs random", beats_random(runs));
    report(10, "transfer", transfer(runs));
    report(11, "determinism", determinism(runs));
    report(12, "gradient correctness", gradients());

    std::printf("%zu/12 criteria passed\n", passed);
    return passed == 12 ? 0 : 1;
}
