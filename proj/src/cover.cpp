#include "rlsel/cover.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

namespace rlsel::cover {

namespace {

void check_bank(const FeatureBank& bank, const datahub::LabeledDataset& ds) {
    if (bank.features.rows() != ds.n())
        throw ContractViolation("feature bank has " + std::to_string(bank.features.rows()) + " rows, dataset has " +
                                std::to_string(ds.n()));
}

}  // namespace

Matrix class_distance_matrix(const FeatureBank& bank, const datahub::LabeledDataset& ds, std::uint32_t c) {
    check_bank(bank, ds);
    const auto members = ds.class_members(c);
    if (members.size() < 2)
        throw ContractViolation("class_distance_matrix: class " + std::to_string(c) + " has fewer than 2 members");
    return numkit::pairwise_l2(bank.features.gather_rows(members));
}

CoverProfile cover_degree(const FeatureBank& bank, const datahub::LabeledDataset& ds) {
    check_bank(bank, ds);
    CoverProfile p;
    p.epoch = bank.epoch;
    p.degrees.assign(ds.n(), 0.0);
    p.class_index.resize(ds.k);
    for (std::uint32_t c = 0; c < ds.k; ++c) {
        const auto members = ds.class_members(c);
        for (auto r : members) p.class_index[c].push_back(ds.ids[r]);
        const Matrix d = class_distance_matrix(bank, ds, c);
        for (std::size_t a = 0; a < members.size(); ++a) {
            double s = 0.0;
            for (double v : d.row(a)) s += v;
            p.degrees[members[a]] = s;
        }
    }
    return p;
}

bool is_covered(const FeatureBank& bank, const datahub::LabeledDataset& ds, std::size_t i, std::size_t j,
                EpsilonCoverQuery query) {
    check_bank(bank, ds);
    if (i == j) throw ContractViolation("is_covered: i and j must differ");
    if (!(query.epsilon > 0.0)) throw ContractViolation("is_covered: epsilon must be positive");
    if (ds.labels[i] != ds.labels[j]) return false;
    return numkit::l2_distance(bank.features.row(i), bank.features.row(j)) <= query.epsilon;
}

ClassGeometry build_geometry(const FeatureBank& bank, const datahub::LabeledDataset& ds, double eps_rel) {
    check_bank(bank, ds);
    if (!(eps_rel > 0.0)) throw ContractViolation("build_geometry: eps_rel must be positive");
    ClassGeometry g;
    g.labels = ds.labels;
    g.position.assign(ds.n(), 0);
    for (std::uint32_t c = 0; c < ds.k; ++c) {
        auto members = ds.class_members(c);
        Matrix d = class_distance_matrix(bank, ds, c);
        std::vector<double> off;
        off.reserve(members.size() * (members.size() - 1) / 2);
        for (std::size_t a = 0; a < members.size(); ++a)
            for (std::size_t b = a + 1; b < members.size(); ++b) off.push_back(d(a, b));
        // Lower median for an even count.
        auto mid = off.begin() + static_cast<std::ptrdiff_t>((off.size() - 1) / 2);
        std::nth_element(off.begin(), mid, off.end());
        double eps = eps_rel * *mid;
        if (!(eps > 0.0)) eps = std::numeric_limits<double>::min();
        for (std::size_t a = 0; a < members.size(); ++a) g.position[members[a]] = a;
        g.members.push_back(std::move(members));
        g.distances.push_back(std::move(d));
        g.epsilon.push_back(eps);
    }
    return g;
}

double soft_cover_count(const ClassGeometry& g, std::size_t i, std::span<const std::uint8_t> selected) {
    const auto c = g.labels[i];
    const auto& members = g.members[c];
    const auto row = g.distances[c].row(g.position[i]);
    const double eps = g.epsilon[c];
    double count = 0.0;
    for (std::size_t a = 0; a < members.size(); ++a) {
        const auto j = members[a];
        if (j == i || !selected[j]) continue;
        const double w = 1.0 - row[a] / eps;
        if (w > 0.0) count += w;
    }
    return count;
}

double novelty(const ClassGeometry& g, std::size_t i, std::span<const std::uint8_t> selected) {
    return std::max(0.0, 1.0 - soft_cover_count(g, i, selected));
}

std::vector<double> static_novelty(const ClassGeometry& g) {
    const std::vector<std::uint8_t> all(g.labels.size(), 1);
    std::vector<double> out(g.labels.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = novelty(g, i, all);
    return out;
}

double dunn_index(const Matrix& features, std::span<const std::uint32_t> labels, std::span<const std::uint8_t> mask) {
    if (labels.size() != features.rows() || mask.size() != features.rows())
        throw ContractViolation("dunn_index: features, labels and mask disagree in length");
    std::map<std::uint32_t, std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) clusters[labels[i]].push_back(i);
    if (clusters.size() < 2) throw DegenerateClusters("dunn_index: need at least two clusters");

    double max_compactness = 0.0;
    for (const auto& [c, rows] : clusters) {
        if (rows.size() < 2)
            throw DegenerateClusters("dunn_index: cluster " + std::to_string(c) + " has fewer than 2 samples");
        double sum = 0.0;
        for (std::size_t a = 0; a < rows.size(); ++a)
            for (std::size_t b = a + 1; b < rows.size(); ++b)
                sum += numkit::l2_distance(features.row(rows[a]), features.row(rows[b]));
        const double pairs = 0.5 * static_cast<double>(rows.size()) * static_cast<double>(rows.size() - 1);
        max_compactness = std::max(max_compactness, sum / pairs);
    }
    if (max_compactness == 0.0) throw DegenerateClusters("zero compactness");

    double separation = std::numeric_limits<double>::infinity();
    for (auto it = clusters.begin(); it != clusters.end(); ++it)
        for (auto jt = std::next(it); jt != clusters.end(); ++jt)
            for (auto a : it->second)
                for (auto b : jt->second)
                    separation = std::min(separation, numkit::l2_distance(features.row(a), features.row(b)));
    return separation / max_compactness;
}

void write_profile_csv(const CoverProfile& profile, const datahub::LabeledDataset& ds, const std::string& path) {
    if (profile.degrees.size() != ds.n()) throw ContractViolation("write_profile_csv: profile/dataset size mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "sample_id,class,e_c\n";
    char buf[64];
    for (std::size_t i = 0; i < ds.n(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", profile.degrees[i]);
        out << ds.ids[i] << ',' << ds.labels[i] << ',' << buf << '\n';
    }
}

}  // namespace rlsel::cover
