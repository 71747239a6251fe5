#include "rlsel/datahub.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "rlsel/binio.hpp"

namespace rlsel::datahub {

const char* to_string(DataErrorKind kind) {
    switch (kind) {
        case DataErrorKind::missing_file: return "missing_file";
        case DataErrorKind::missing_header: return "missing_header";
        case DataErrorKind::missing_label_column: return "missing_label_column";
        case DataErrorKind::ragged_row: return "ragged_row";
        case DataErrorKind::non_numeric: return "non_numeric";
        case DataErrorKind::small_class: return "small_class";
        case DataErrorKind::empty_class: return "empty_class";
        case DataErrorKind::bad_cache: return "bad_cache";
        case DataErrorKind::invalid_split: return "invalid_split";
    }
    return "unknown";
}

DataError::DataError(DataErrorKind kind, const std::string& what)
    : std::runtime_error(what), kind_(kind) {}

std::vector<std::size_t> LabeledDataset::class_members(std::uint32_t c) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == c) out.push_back(i);
    return out;
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
    std::vector<std::size_t> counts(k, 0);
    for (auto l : labels)
        if (l < k) ++counts[l];
    return counts;
}

void LabeledDataset::validate(std::size_t min_per_class) const {
    if (inputs.rows() != labels.size() || ids.size() != labels.size())
        throw DataError(DataErrorKind::ragged_row, "dataset: inputs, labels and ids disagree in length");
    for (auto l : labels)
        if (l >= k) throw DataError(DataErrorKind::empty_class, "dataset: label outside [0, k)");
    const auto counts = class_counts();
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0)
            throw DataError(DataErrorKind::empty_class, "class " + std::to_string(c) + " has no samples");
        if (counts[c] < min_per_class)
            throw DataError(DataErrorKind::small_class,
                            "class with fewer than " + std::to_string(min_per_class) + " samples (class " +
                                std::to_string(c) + ")");
    }
    std::vector<std::uint64_t> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw DataError(DataErrorKind::ragged_row, "dataset: duplicate sample ids");
}

LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> rows) {
    LabeledDataset out;
    out.k = ds.k;
    out.inputs = ds.inputs.gather_rows(rows);
    out.labels.reserve(rows.size());
    out.ids.reserve(rows.size());
    for (auto r : rows) {
        out.labels.push_back(ds.labels[r]);
        out.ids.push_back(ds.ids[r]);
        if (!ds.parents.empty()) out.parents.push_back(ds.parents[r]);
    }
    return out;
}

LabeledDataset filter(const LabeledDataset& ds, std::span<const std::uint8_t> mask) {
    if (mask.size() != ds.n()) throw ContractViolation("filter: mask length != n");
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) rows.push_back(i);
    return subset(ds, rows);
}

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<std::uint32_t> parse_label_index(const std::string& s) {
    std::uint32_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

constexpr unsigned char kCacheMagic[4] = {'R', 'L', 'D', 'S'};
constexpr std::uint32_t kCacheVersion = 1;

}  // namespace

LabeledDataset load_csv(const std::string& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw DataError(DataErrorKind::missing_file, "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || trim(line).empty())
        throw DataError(DataErrorKind::missing_header, "'" + path + "': missing header row");
    const auto header = split_csv_line(trim(line));
    const auto label_it = std::find(header.begin(), header.end(), label_column);
    if (label_it == header.end())
        throw DataError(DataErrorKind::missing_label_column, "'" + path + "': no column named '" + label_column + "'");
    const std::size_t label_col = static_cast<std::size_t>(label_it - header.begin());
    const std::size_t d = header.size() - 1;

    std::vector<double> values;
    std::vector<std::string> raw_labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError(DataErrorKind::ragged_row, "'" + path + "' line " + std::to_string(line_no) + ": expected " +
                                                           std::to_string(header.size()) + " cells, got " +
                                                           std::to_string(cells.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c == label_col) {
                raw_labels.push_back(cells[c]);
                continue;
            }
            auto v = parse_double(cells[c]);
            if (!v)
                throw DataError(DataErrorKind::non_numeric, "'" + path + "' line " + std::to_string(line_no) +
                                                                ": non-numeric feature '" + cells[c] + "'");
            values.push_back(*v);
        }
    }

    LabeledDataset ds;
    const std::size_t n = raw_labels.size();
    ds.inputs = numkit::Matrix(n, d, std::move(values));
    ds.labels.resize(n);
    ds.ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) ds.ids[i] = i;

    const bool integer_labels =
        std::all_of(raw_labels.begin(), raw_labels.end(), [](const std::string& s) { return parse_label_index(s).has_value(); });
    if (integer_labels) {
        std::uint32_t max_label = 0;
        for (std::size_t i = 0; i < n; ++i) {
            ds.labels[i] = *parse_label_index(raw_labels[i]);
            max_label = std::max(max_label, ds.labels[i]);
        }
        ds.k = n == 0 ? 0 : static_cast<std::size_t>(max_label) + 1;
    } else {
        std::map<std::string, std::uint32_t> index;
        for (std::size_t i = 0; i < n; ++i) {
            auto [it, inserted] = index.try_emplace(raw_labels[i], static_cast<std::uint32_t>(index.size()));
            ds.labels[i] = it->second;
        }
        ds.k = index.size();
    }
    ds.validate();
    return ds;
}

void save_csv(const LabeledDataset& ds, const std::string& path, const std::string& label_column) {
    std::ofstream out(path);
    if (!out) throw DataError(DataErrorKind::missing_file, "cannot write '" + path + "'");
    for (std::size_t c = 0; c < ds.d_in(); ++c) out << 'f' << c << ',';
    out << label_column << '\n';
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (double v : ds.inputs.row(i)) out << format_double(v) << ',';
        out << ds.labels[i] << '\n';
    }
}

void save_cache(const LabeledDataset& ds, const std::string& path) {
    binio::Writer w;
    w.bytes(kCacheMagic);
    w.u32(kCacheVersion);
    w.u64(ds.n());
    w.u64(ds.d_in());
    w.u64(ds.k);
    w.matrix(ds.inputs);
    for (auto l : ds.labels) w.u32(l);
    for (auto id : ds.ids) w.u64(id);
    w.seal();
    binio::write_file(path, w.buffer());
}

LabeledDataset load_cache(const std::string& path) {
    std::vector<unsigned char> bytes;
    try {
        bytes = binio::read_file(path);
    } catch (const std::exception& e) {
        throw DataError(DataErrorKind::missing_file, e.what());
    }
    try {
        binio::Reader r(bytes);
        r.verify_seal();
        auto magic = r.bytes(4);
        if (!std::equal(magic.begin(), magic.end(), kCacheMagic)) throw binio::FormatError("bad magic");
        if (r.u32() != kCacheVersion) throw binio::FormatError("unsupported cache version");
        const auto n = r.u64();
        const auto d = r.u64();
        LabeledDataset ds;
        ds.k = r.u64();
        ds.inputs = numkit::Matrix(n, d);
        r.f64s(ds.inputs.data());
        ds.labels.resize(n);
        for (auto& l : ds.labels) l = r.u32();
        ds.ids.resize(n);
        for (auto& id : ds.ids) id = r.u64();
        if (r.remaining() != 8) throw binio::FormatError("trailing bytes");
        ds.validate();
        return ds;
    } catch (const binio::FormatError& e) {
        throw DataError(DataErrorKind::bad_cache, "'" + path + "': " + e.what());
    }
}

LabeledDataset load_any(const std::string& path, const std::string& label_column) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataErrorKind::missing_file, "cannot open '" + path + "'");
    char head[4] = {};
    in.read(head, 4);
    if (in.gcount() == 4 && std::equal(head, head + 4, kCacheMagic)) return load_cache(path);
    return load_csv(path, label_column);
}

namespace {

std::vector<double> draw_centers(const PlantedRedundancySpec& spec, numkit::Rng& rng) {
    std::vector<double> centers(spec.k * spec.d_in);
    for (auto& c : centers) c = rng.normal(0.0, spec.center_scale);
    return centers;
}

void validate_spec(const PlantedRedundancySpec& spec) {
    if (spec.k < 1 || spec.d_in < 1) throw ContractViolation("make_blobs: k and d_in must be positive");
    if (!(spec.dup_fraction >= 0.0 && spec.dup_fraction < 1.0))
        throw ContractViolation("make_blobs: dup_fraction must lie in [0, 1)");
    if (!(spec.jitter_sigma >= 0.0)) throw ContractViolation("make_blobs: jitter_sigma must be nonnegative");
    if (spec.n_base < 2 * spec.k) throw ContractViolation("make_blobs: need at least two base points per class");
}

}  // namespace

LabeledDataset make_blobs(const PlantedRedundancySpec& spec) {
    validate_spec(spec);
    numkit::Rng rng(spec.seed);
    const auto centers = draw_centers(spec, rng);
    const std::size_t d = spec.d_in;
    const auto n = static_cast<std::size_t>(
        std::floor(static_cast<double>(spec.n_base) / (1.0 - spec.dup_fraction) + 1e-9));

    numkit::Matrix x(n, d);
    std::vector<std::uint32_t> y(n);
    std::vector<std::optional<std::uint64_t>> parent(n);
    for (std::size_t i = 0; i < spec.n_base; ++i) {
        y[i] = static_cast<std::uint32_t>(i % spec.k);
        for (std::size_t c = 0; c < d; ++c) x(i, c) = centers[y[i] * d + c] + rng.normal();
    }
    for (std::size_t i = spec.n_base; i < n; ++i) {
        const auto p = static_cast<std::size_t>(rng.below(spec.n_base));
        y[i] = y[p];
        parent[i] = p;
        for (std::size_t c = 0; c < d; ++c)
            x(i, c) = x(p, c) + (spec.jitter_sigma > 0.0 ? rng.normal(0.0, spec.jitter_sigma) : 0.0);
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (spec.shuffle) rng.shuffle(order);
    // new_id[old_row] = position after shuffling
    std::vector<std::uint64_t> new_id(n);
    for (std::size_t pos = 0; pos < n; ++pos) new_id[order[pos]] = pos;

    LabeledDataset ds;
    ds.k = spec.k;
    ds.inputs = x.gather_rows(order);
    ds.labels.resize(n);
    ds.ids.resize(n);
    ds.parents.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
        const auto old = order[pos];
        ds.labels[pos] = y[old];
        ds.ids[pos] = pos;
        if (parent[old]) ds.parents[pos] = new_id[*parent[old]];
    }
    return ds;
}

LabeledDataset make_blob_holdout(const PlantedRedundancySpec& spec, std::size_t n) {
    validate_spec(spec);
    numkit::Rng center_rng(spec.seed);
    const auto centers = draw_centers(spec, center_rng);
    numkit::Rng rng(numkit::derive_seed(spec.seed, 0x484f4c444f5554ULL));
    LabeledDataset ds;
    ds.k = spec.k;
    ds.inputs = numkit::Matrix(n, spec.d_in);
    ds.labels.resize(n);
    ds.ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        ds.labels[i] = static_cast<std::uint32_t>(i % spec.k);
        ds.ids[i] = i;
        for (std::size_t c = 0; c < spec.d_in; ++c)
            ds.inputs(i, c) = centers[ds.labels[i] * spec.d_in + c] + rng.normal();
    }
    return ds;
}

std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& ds, double test_fraction,
                                                           std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ContractViolation("stratified_split: test_fraction must lie in (0, 1)");
    numkit::Rng rng(seed);
    std::vector<std::uint8_t> is_test(ds.n(), 0);
    for (std::uint32_t c = 0; c < ds.k; ++c) {
        auto members = ds.class_members(c);
        const auto nc = members.size();
        const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(nc)));
        if (n_test < 2 || nc - n_test < 2)
            throw DataError(DataErrorKind::invalid_split,
                            "class " + std::to_string(c) + " with " + std::to_string(nc) +
                                " samples is too small to split at test_fraction " + std::to_string(test_fraction));
        rng.shuffle(members);
        for (std::size_t t = 0; t < n_test; ++t) is_test[members[t]] = 1;
    }
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < ds.n(); ++i) (is_test[i] ? test_rows : train_rows).push_back(i);
    return {subset(ds, train_rows), subset(ds, test_rows)};
}

}  // namespace rlsel::datahub

namespace rlsel::binio {

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const unsigned char> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace rlsel::binio
