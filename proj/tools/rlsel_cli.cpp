#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>

#include "CLI11.hpp"
#include "json.hpp"
#include "rlsel/cover.hpp"
#include "rlsel/oracle.hpp"
#include "rlsel/pipeline.hpp"

namespace fs = std::filesystem;
namespace pl = rlsel::pipeline;
namespace dh = rlsel::datahub;
namespace sg = rlsel::surrogate;
using nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kOther = 1, kUsage = 2, kData = 3, kConstraint = 4, kTheory = 5 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr std::uint64_t kSeedRetrain = 0x524554524149ULL;
constexpr std::uint64_t kSeedRandomMask = 0x524e444d534bULL;

struct Settings {
    pl::RunConfig run;
    pl::RetrainConfig retrain;
    rlsel::oracle::OracleOptions theory;
    bool retrain_seed_set = false;
};

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw UsageError(key + ": expected a number, got '" + v + "'");
    }
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const auto u = std::stoull(v, &pos);
        if (pos != v.size() || v.find('-') != std::string::npos) throw std::invalid_argument(v);
        return u;
    } catch (const std::exception&) {
        throw UsageError(key + ": expected a nonnegative integer, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw UsageError(key + ": expected a boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(v);
    while (std::getline(ss, item, ',')) {
        const auto a = item.find_first_not_of(" \t[]");
        const auto b = item.find_last_not_of(" \t[]");
        if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
    }
    return out;
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    for (const auto& s : split_list(v)) out.push_back(to_uint(key, s));
    return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& s : split_list(v)) out.push_back(to_double(key, s));
    return out;
}

template <class F>
F parse_enum(const std::string& key, F (*parse)(const std::string&), const std::string& v) {
    try {
        return parse(v);
    } catch (const rlsel::ContractViolation& e) {
        throw UsageError(key + ": " + e.what());
    }
}

sg::LrSchedule to_schedule(const std::string& key, const std::string& v) {
    if (v == "constant") return sg::LrSchedule::constant;
    if (v == "cosine") return sg::LrSchedule::cosine;
    throw UsageError(key + ": expected constant or cosine, got '" + v + "'");
}

void apply_key(Settings& s, const std::string& key, const std::string& v) {
    auto& r = s.run;
    if (key == "run.tool") return;
    if (key == "run.s_r" || key == "run.ratio") r.s_r = to_double(key, v);
    else if (key == "run.total_epochs" || key == "run.epochs") r.total_epochs = to_uint(key, v);
    else if (key == "run.batch_size") r.batch_size = to_uint(key, v);
    else if (key == "run.hidden") r.hidden = to_sizes(key, v);
    else if (key == "run.seed") r.seed = to_uint(key, v);
    else if (key == "run.r1_mode") r.r1_mode = parse_enum(key, pl::parse_r1_mode, v);
    else if (key == "run.r2_input") r.r2_input = parse_enum(key, pl::parse_r2_input, v);
    else if (key == "run.degree_mode") r.degree_mode = parse_enum(key, pl::parse_degree_mode, v);
    else if (key == "run.state_degree") r.state_degree = to_bool(key, v);
    else if (key == "run.cover_eps_rel") r.cover_eps_rel = to_double(key, v);
    else if (key == "run.center_degree") r.center_degree = to_bool(key, v);
    else if (key == "run.class_ratio") r.class_ratio = to_bool(key, v);
    else if (key == "run.normalize_ec") r.normalize_ec = to_bool(key, v);
    else if (key == "run.ablate_mode") r.ablate_mode = parse_enum(key, pl::parse_degree_mode, v);
    else if (key == "run.ablate_keep_largest") r.ablate_keep_largest = to_bool(key, v);
    else if (key == "surrogate.lr") r.surrogate.lr = to_double(key, v);
    else if (key == "surrogate.momentum") r.surrogate.momentum = to_double(key, v);
    else if (key == "surrogate.weight_decay") r.surrogate.weight_decay = to_double(key, v);
    else if (key == "surrogate.lr_schedule") r.surrogate.lr_schedule = to_schedule(key, v);
    else if (key == "agent.gamma") r.agent.gamma = to_double(key, v);
    else if (key == "agent.lr") r.agent.lr = to_double(key, v);
    else if (key == "agent.weight_decay") r.agent.weight_decay = to_double(key, v);
    else if (key == "agent.beta1") r.agent.beta1 = to_double(key, v);
    else if (key == "agent.beta2") r.agent.beta2 = to_double(key, v);
    else if (key == "agent.adam_eps") r.agent.adam_eps = to_double(key, v);
    else if (key == "retrain.hidden") s.retrain.hidden = to_sizes(key, v);
    else if (key == "retrain.epochs") s.retrain.train.epochs = to_uint(key, v);
    else if (key == "retrain.batch_size") s.retrain.train.batch_size = to_uint(key, v);
    else if (key == "retrain.lr") s.retrain.train.lr = to_double(key, v);
    else if (key == "retrain.momentum") s.retrain.train.momentum = to_double(key, v);
    else if (key == "retrain.weight_decay") s.retrain.train.weight_decay = to_double(key, v);
    else if (key == "retrain.lr_schedule") s.retrain.train.lr_schedule = to_schedule(key, v);
    else if (key == "retrain.seed") {
        s.retrain.seed = to_uint(key, v);
        s.retrain_seed_set = true;
    }
    else if (key == "theory.epsilons") s.theory.epsilons = to_doubles(key, v);
    else if (key == "theory.seed") s.theory.seed = to_uint(key, v);
    else if (key == "theory.random_pairs") s.theory.random_pairs = to_uint(key, v);
    else if (key == "theory.influence_probes") s.theory.influence_probes = to_uint(key, v);
    else if (key == "theory.loo_n") s.theory.loo_n = to_uint(key, v);
    else if (key == "theory.loo_l2") s.theory.loo_l2 = to_double(key, v);
    else throw UsageError("unknown config key '" + key + "'");
}

void load_config(Settings& s, const std::string& path) {
    if (!fs::exists(path)) throw UsageError("config file not found: " + path);
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_file(path);
    } catch (const std::exception& e) {
        throw UsageError("cannot parse config '" + path + "': " + e.what());
    }
    for (const auto& it : items) {
        if (it.name == "++" || it.name == "--") continue;
        std::string key = it.fullname();
        if (it.parents.empty()) key = "run." + key;
        std::string value;
        for (std::size_t i = 0; i < it.inputs.size(); ++i) value += (i ? "," : "") + it.inputs[i];
        apply_key(s, key, value);
    }
}

std::string retrain_canonical(const pl::RetrainConfig& rc) {
    std::ostringstream o;
    o << "tool=" << pl::kToolVersion << "\nretrain.hidden=";
    for (std::size_t i = 0; i < rc.hidden.size(); ++i) o << (i ? "," : "") << rc.hidden[i];
    o << "\nretrain.epochs=" << rc.train.epochs << "\nretrain.batch_size=" << rc.train.batch_size
      << "\nretrain.lr=" << rc.train.lr << "\nretrain.momentum=" << rc.train.momentum
      << "\nretrain.weight_decay=" << rc.train.weight_decay
      << "\nretrain.lr_schedule=" << (rc.train.lr_schedule == sg::LrSchedule::cosine ? "cosine" : "constant")
      << "\nretrain.seed=" << rc.seed << '\n';
    return o.str();
}

std::string digest_of(const std::string& text) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(rlsel::numkit::fnv1a64(text)));
    return buf;
}

std::string now_utc() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    out << text;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw dh::DataError(dh::DataErrorKind::missing_file, "cannot open '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// CSV artifacts carry the tool version and digest as a leading comment line.
void stamp_csv(const fs::path& p, const std::string& digest) {
    const auto body = read_text(p);
    write_text(p, std::string("# ") + pl::kToolVersion + " config_digest=" + digest + "\n" + body);
}

fs::path prepare_out(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
    return p;
}

void write_run_outputs(const fs::path& out, const pl::RunArtifacts& art, const pl::RunConfig& cfg, bool timestamp,
                       bool with_agent) {
    const auto& r = art.result;
    write_text(out / "result.json", pl::result_json(r, timestamp ? now_utc() : ""));
    pl::write_trace_csv(r, (out / "trace.csv").string());
    stamp_csv(out / "trace.csv", r.config_digest);
    write_text(out / "config.ini", "# " + std::string(pl::kToolVersion) + " config_digest=" + r.config_digest + "\n" +
                                       cfg.canonical());
    sg::save_model(art.model, (out / "surrogate.rlsm").string());
    if (with_agent) rlsel::agent::save_agent(art.agent, (out / "agent.rlsa").string());
}

void print_summary(const pl::SelectionResult& r, const fs::path& out) {
    std::printf("selected %zu/%zu (ratio %.4f, target %.4f%s) in %zu epochs; digest %s -> %s\n", r.selected(),
                r.mask.size(), r.achieved_ratio, r.s_r, r.ratio_repaired ? ", repaired" : "", r.epochs_run,
                r.config_digest.c_str(), out.string().c_str());
    if (r.class_collapse) std::fprintf(stderr, "warning: at least one class has no selected samples\n");
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "Flat INI file with [run], [surrogate], [agent], [retrain], [theory] sections");
    app->add_option("--seed", c.seed, "Root seed");
    app->add_option("--set", c.sets, "Override a config key, e.g. --set agent.lr=1e-3")->take_all();
}

Settings resolve(const Common& c) {
    Settings s;
    if (!c.config.empty()) load_config(s, c.config);
    for (const auto& kv : c.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
        apply_key(s, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (c.seed) {
        s.run.seed = *c.seed;
        s.theory.seed = *c.seed;
    }
    if (!s.retrain_seed_set) s.retrain.seed = rlsel::numkit::derive_seed(s.run.seed, kSeedRetrain);
    return s;
}

void check_run(const pl::RunConfig& cfg) {
    try {
        cfg.validate();
    } catch (const rlsel::ContractViolation& e) {
        throw UsageError(e.what());
    }
}

std::vector<std::uint8_t> mask_from_result(const ordered_json& j, const dh::LabeledDataset& ds) {
    if (!j.contains("mask") || !j["mask"].is_array())
        throw dh::DataError(dh::DataErrorKind::bad_cache, "result file has no mask");
    if (j.contains("n") && j["n"].get<std::size_t>() != ds.n())
        throw dh::DataError(dh::DataErrorKind::bad_cache, "result was produced for " + std::to_string(j["n"].get<std::size_t>()) +
                                                              " samples but the dataset has " + std::to_string(ds.n()));
    std::unordered_map<std::uint64_t, std::size_t> row;
    for (std::size_t i = 0; i < ds.n(); ++i) row[ds.ids[i]] = i;
    std::vector<std::uint8_t> mask(ds.n(), 0);
    for (const auto& v : j["mask"]) {
        const auto id = v.get<std::uint64_t>();
        const auto it = row.find(id);
        if (it == row.end()) throw dh::DataError(dh::DataErrorKind::bad_cache, "mask id " + std::to_string(id) + " is not in the dataset");
        mask[it->second] = 1;
    }
    return mask;
}

void read_parents(dh::LabeledDataset& ds, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw dh::DataError(dh::DataErrorKind::missing_file, "cannot open '" + path + "'");
    std::unordered_map<std::uint64_t, std::size_t> row;
    for (std::size_t i = 0; i < ds.n(); ++i) row[ds.ids[i]] = i;
    ds.parents.assign(ds.n(), std::nullopt);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw dh::DataError(dh::DataErrorKind::ragged_row, "parents file: bad row '" + line + "'");
        const auto id = std::stoull(line.substr(0, comma));
        const auto parent = line.substr(comma + 1);
        const auto it = row.find(id);
        if (it == row.end()) throw dh::DataError(dh::DataErrorKind::bad_cache, "parents file: unknown id " + std::to_string(id));
        if (!parent.empty()) ds.parents[it->second] = std::stoull(parent);
    }
}

int error_exit(int code, const std::string& kind, const std::string& msg) {
    ordered_json e;
    e["error"] = kind;
    e["message"] = msg;
    std::cerr << e.dump() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reinforcement-learning data selection with epsilon-cover rewards"};
    app.set_version_flag("--version", pl::kToolVersion);
    app.require_subcommand(1);

    // select
    Common sel_c;
    std::string sel_data, sel_out = "run", sel_label = "label";
    std::optional<double> sel_ratio;
    std::optional<std::size_t> sel_epochs;
    bool no_ts = false;
    auto* sel = app.add_subcommand("select", "Co-train surrogate and agent, then write the selection");
    add_common(sel, sel_c);
    sel->add_option("--data", sel_data, "CSV or cache file")->required();
    sel->add_option("--label-column", sel_label, "Label column of a CSV file");
    sel->add_option("--ratio", sel_ratio, "Target selection ratio in (0, 1)");
    sel->add_option("--epochs", sel_epochs, "Total epochs");
    sel->add_option("--out", sel_out, "Output directory");
    sel->add_flag("--no-timestamp", no_ts, "Leave created_at out of the result file");

    // transfer
    Common tr_c;
    std::string tr_data, tr_from, tr_out = "transfer", tr_label = "label";
    std::optional<double> tr_ratio;
    std::size_t tr_epochs = 15;
    auto* tr = app.add_subcommand("transfer", "Fine-tune a trained agent to a new ratio");
    add_common(tr, tr_c);
    tr->add_option("--data", tr_data, "CSV or cache file")->required();
    tr->add_option("--label-column", tr_label, "Label column of a CSV file");
    tr->add_option("--from", tr_from, "Output directory of a completed select run")->required();
    tr->add_option("--ratio", tr_ratio, "New target ratio")->required();
    tr->add_option("--epochs", tr_epochs, "Fine-tune epochs");
    tr->add_option("--out", tr_out, "Output directory");
    tr->add_flag("--no-timestamp", no_ts, "Leave created_at out of the result file");

    // ablate
    Common ab_c;
    std::string ab_data, ab_out = "ablate", ab_label = "label";
    std::optional<double> ab_ratio;
    std::optional<std::size_t> ab_epochs;
    bool ab_smallest = false;
    std::string ab_signal;
    auto* ab = app.add_subcommand("ablate", "Train the surrogate alone and keep the top-ranked samples");
    add_common(ab, ab_c);
    ab->add_option("--data", ab_data, "CSV or cache file")->required();
    ab->add_option("--label-column", ab_label, "Label column of a CSV file");
    ab->add_option("--ratio", ab_ratio, "Target selection ratio in (0, 1)");
    ab->add_option("--epochs", ab_epochs, "Surrogate epochs");
    ab->add_option("--signal", ab_signal, "rowsum (distance row-sum) or static (soft count of covering class mates)");
    ab->add_flag("--keep-smallest", ab_smallest, "Keep the smallest degree signal instead of the largest");
    ab->add_option("--out", ab_out, "Output directory");
    ab->add_flag("--no-timestamp", no_ts, "Leave created_at out of the result file");

    // retrain
    Common rt_c;
    std::string rt_data, rt_test, rt_result, rt_parents, rt_out = "retrain.json", rt_label = "label";
    auto* rt = app.add_subcommand("retrain", "Train a fresh model on a selection and evaluate it");
    add_common(rt, rt_c);
    rt->add_option("--data", rt_data, "Training CSV or cache file the selection refers to")->required();
    rt->add_option("--test", rt_test, "Held-out CSV or cache file")->required();
    rt->add_option("--result", rt_result, "result.json from select, ablate or transfer")->required();
    rt->add_option("--parents", rt_parents, "id,parent CSV from gen-blobs, adds the duplicate pruning rate");
    rt->add_option("--label-column", rt_label, "Label column of CSV files");
    rt->add_option("--out", rt_out, "Report file");
    rt->add_flag("--no-timestamp", no_ts, "Leave created_at out of the report");

    // verify-theory
    Common th_c;
    std::string th_out = "theory", th_eps;
    double th_corrupt = 1.0;
    auto* th = app.add_subcommand("verify-theory", "Run the numerical checks of the covered-pair and influence results");
    add_common(th, th_c);
    th->add_option("--epsilons", th_eps, "Comma-separated sweep, e.g. 1e-1,1e-2,1e-3");
    th->add_option("--out", th_out, "Output directory");
    th->add_option("--corrupt-gradient", th_corrupt, "Scale the gradient term of the first-order prediction (test hook)")
        ->group("");

    // gen-blobs
    dh::PlantedRedundancySpec gb;
    std::string gb_out, gb_parents, gb_holdout_out;
    std::size_t gb_holdout = 0;
    auto* gbc = app.add_subcommand("gen-blobs", "Write a Gaussian-blob fixture with planted duplicates");
    gbc->add_option("--n-base", gb.n_base, "Distinct base points");
    gbc->add_option("--dup", gb.dup_fraction, "Fraction of the output that are copies")->check(CLI::Range(0.0, 0.99));
    gbc->add_option("--jitter", gb.jitter_sigma, "Noise std added to copies");
    gbc->add_option("--k", gb.k, "Classes");
    gbc->add_option("--d-in", gb.d_in, "Input width");
    gbc->add_option("--center-scale", gb.center_scale, "Std of the class centres");
    gbc->add_option("--seed", gb.seed, "Seed");
    gbc->add_option("--out", gb_out, "Output file (.csv, or .rlds for the binary cache)")->required();
    gbc->add_option("--parents-out", gb_parents, "Write id,parent for every row");
    gbc->add_option("--holdout", gb_holdout, "Also draw this many fresh points");
    gbc->add_option("--holdout-out", gb_holdout_out, "Where to write the fresh points");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (sel->parsed()) {
            auto s = resolve(sel_c);
            if (sel_ratio) s.run.s_r = *sel_ratio;
            if (sel_epochs) s.run.total_epochs = *sel_epochs;
            s.run.trace_path = "trace.csv";
            check_run(s.run);
            const auto ds = dh::load_any(sel_data, sel_label);
            const auto out = prepare_out(sel_out);
            const auto art = pl::select(ds, s.run);
            write_run_outputs(out, art, s.run, !no_ts, true);
            print_summary(art.result, out);
        } else if (tr->parsed()) {
            auto s = resolve(tr_c);
            s.run.s_r = *tr_ratio;
            s.run.total_epochs = tr_epochs;
            s.run.trace_path = "trace.csv";
            check_run(s.run);
            const fs::path from(tr_from);
            if (!fs::exists(from / "agent.rlsa"))
                throw dh::DataError(dh::DataErrorKind::missing_file, "no agent checkpoint in '" + tr_from + "'");
            const auto source = rlsel::agent::load_agent((from / "agent.rlsa").string());
            std::optional<sg::MlpModel> model;
            if (fs::exists(from / "surrogate.rlsm")) model = sg::load_model((from / "surrogate.rlsm").string());
            // The source run's architecture and reward settings carry over.
            if (fs::exists(from / "config.ini") && tr_c.config.empty()) {
                Settings src;
                load_config(src, (from / "config.ini").string());
                const auto keep = s.run;
                s.run = src.run;
                s.run.s_r = keep.s_r;
                s.run.total_epochs = keep.total_epochs;
                s.run.trace_path = keep.trace_path;
                if (tr_c.seed) s.run.seed = *tr_c.seed;
                for (const auto& kv : tr_c.sets) apply_key(s, kv.substr(0, kv.find('=')), kv.substr(kv.find('=') + 1));
                check_run(s.run);
            }
            const auto ds = dh::load_any(tr_data, tr_label);
            const auto out = prepare_out(tr_out);
            const auto art = pl::transfer_select(ds, source, model ? &*model : nullptr, s.run.s_r, s.run, tr_epochs);
            write_run_outputs(out, art, s.run, !no_ts, true);
            print_summary(art.result, out);
        } else if (ab->parsed()) {
            auto s = resolve(ab_c);
            if (ab_ratio) s.run.s_r = *ab_ratio;
            if (ab_epochs) s.run.total_epochs = *ab_epochs;
            if (ab_smallest) s.run.ablate_keep_largest = false;
            if (!ab_signal.empty()) apply_key(s, "run.ablate_mode", ab_signal);
            s.run.trace_path = "trace.csv";
            check_run(s.run);
            const auto ds = dh::load_any(ab_data, ab_label);
            const auto out = prepare_out(ab_out);
            const auto art = pl::select_without_rl(ds, s.run);
            write_run_outputs(out, art, s.run, !no_ts, false);
            const auto bank = sg::extract_feature_bank(art.model, ds, s.run.total_epochs);
            rlsel::cover::write_profile_csv(rlsel::cover::cover_degree(bank, ds), ds, (out / "profile.csv").string());
            stamp_csv(out / "profile.csv", art.result.config_digest);
            print_summary(art.result, out);
        } else if (rt->parsed()) {
            auto s = resolve(rt_c);
            auto ds = dh::load_any(rt_data, rt_label);
            const auto test = dh::load_any(rt_test, rt_label);
            if (!rt_parents.empty()) read_parents(ds, rt_parents);
            ordered_json src;
            try {
                src = ordered_json::parse(read_text(rt_result));
            } catch (const nlohmann::json::exception& e) {
                throw dh::DataError(dh::DataErrorKind::bad_cache, "cannot parse '" + rt_result + "': " + e.what());
            }
            const auto mask = mask_from_result(src, ds);
            const auto rep = pl::retrain_report(ds, mask, test, s.retrain,
                                                rlsel::numkit::derive_seed(s.retrain.seed, kSeedRandomMask));
            const std::string source_digest = src.value("config_digest", "");
            ordered_json j;
            j["version"] = pl::kToolVersion;
            j["config_digest"] = digest_of(retrain_canonical(s.retrain) + "source=" + source_digest + "\n");
            j["source_config_digest"] = source_digest;
            j["retrain_seed"] = s.retrain.seed;
            j["n"] = ds.n();
            j["n_selected"] = rep.n_selected;
            j["ratio"] = static_cast<double>(rep.n_selected) / static_cast<double>(ds.n());
            j["acc_full"] = rep.acc_full;
            j["acc_selected"] = rep.acc_selected;
            j["acc_random"] = rep.acc_random;
            j["di_full"] = rep.di_full;
            j["di_selected"] = rep.di_selected;
            j["di_selected_full_model"] = rep.di_selected_full_model;
            if (!ds.parents.empty()) j["duplicate_pruning_rate"] = pl::duplicate_pruning_rate(ds, mask);
            if (!no_ts) j["created_at"] = now_utc();
            write_text(rt_out, j.dump(2) + "\n");
            std::printf("acc selected %.4f random %.4f full %.4f; DI selected %.4g full %.4g -> %s\n", rep.acc_selected,
                        rep.acc_random, rep.acc_full, rep.di_selected, rep.di_full, rt_out.c_str());
        } else if (th->parsed()) {
            auto s = resolve(th_c);
            if (!th_eps.empty()) s.theory.epsilons = to_doubles("--epsilons", th_eps);
            if (s.theory.epsilons.size() < 2) throw UsageError("--epsilons needs at least two values");
            for (double e : s.theory.epsilons)
                if (!(e > 0.0)) throw UsageError("--epsilons must be positive");
            s.theory.corrupt_gradient = th_corrupt;
            std::ostringstream canon;
            canon << "tool=" << pl::kToolVersion << "\ntheory.epsilons=";
            for (std::size_t i = 0; i < s.theory.epsilons.size(); ++i) canon << (i ? "," : "") << s.theory.epsilons[i];
            canon << "\ntheory.seed=" << s.theory.seed << "\ntheory.random_pairs=" << s.theory.random_pairs
                  << "\ntheory.influence_probes=" << s.theory.influence_probes << "\ntheory.loo_n=" << s.theory.loo_n
                  << "\ntheory.loo_l2=" << s.theory.loo_l2 << "\ncorrupt_gradient=" << th_corrupt << '\n';
            const auto digest = digest_of(canon.str());
            const auto rep = rlsel::oracle::run_theory_suite(s.theory);
            const auto out = prepare_out(th_out);
            write_text(out / "theory.json", rlsel::oracle::suite_json(rep, digest));
            rlsel::oracle::write_sweep_csv(rep, (out / "sweep.csv").string());
            stamp_csv(out / "sweep.csv", digest);
            std::size_t ok = 0;
            for (const auto& c : rep.checks) ok += c.passed;
            std::printf("%zu/%zu checks passed -> %s\n", ok, rep.checks.size(), out.string().c_str());
            if (!rep.passed()) {
                for (const auto& f : rep.failures()) std::fprintf(stderr, "FAILED %s\n", f.c_str());
                return kTheory;
            }
        } else if (gbc->parsed()) {
            const auto ds = dh::make_blobs(gb);
            if (fs::path(gb_out).extension() == ".rlds") dh::save_cache(ds, gb_out);
            else dh::save_csv(ds, gb_out);
            if (!gb_parents.empty()) {
                std::ostringstream o;
                o << "id,parent\n";
                for (std::size_t i = 0; i < ds.n(); ++i) {
                    o << ds.ids[i] << ',';
                    if (ds.parents[i]) o << *ds.parents[i];
                    o << '\n';
                }
                write_text(gb_parents, o.str());
            }
            if (gb_holdout > 0) {
                if (gb_holdout_out.empty()) throw UsageError("--holdout needs --holdout-out");
                const auto hold = dh::make_blob_holdout(gb, gb_holdout);
                if (fs::path(gb_holdout_out).extension() == ".rlds") dh::save_cache(hold, gb_holdout_out);
                else dh::save_csv(hold, gb_holdout_out);
            }
            std::printf("wrote %zu samples (%zu classes, %zu features) -> %s\n", ds.n(), ds.k, ds.d_in(), gb_out.c_str());
        }
    } catch (const UsageError& e) {
        return error_exit(kUsage, "usage", e.what());
    } catch (const dh::DataError& e) {
        return error_exit(kData, std::string("data.") + dh::to_string(e.kind()), e.what());
    } catch (const rlsel::binio::FormatError& e) {
        return error_exit(kData, "checkpoint", e.what());
    } catch (const pl::ConstraintError& e) {
        return error_exit(kConstraint, "constraint", e.what());
    } catch (const rlsel::oracle::SingularHessian& e) {
        return error_exit(kTheory, "theory", e.what());
    } catch (const rlsel::ContractViolation& e) {
        return error_exit(kData, "contract", e.what());
    } catch (const std::exception& e) {
        return error_exit(kOther, "internal", e.what());
    }
    return kOk;
}
