#include "pulsegrid/cluster.hpp"

#include <algorithm>
#include <cstdlib>
#include <unordered_map>

namespace pulsegrid {

namespace {

class DisjointSet {
  public:
    explicit DisjointSet(std::size_t n) : parent_(n) {
        for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
    }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

  private:
    std::vector<std::size_t> parent_;
};

bool better_representative(const Candidate& a, const Candidate& b) {
    if (a.snr != b.snr) return a.snr > b.snr;
    if (a.peak_sample != b.peak_sample) return a.peak_sample < b.peak_sample;
    return a.dm_trial < b.dm_trial;
}

std::vector<ClusterResult> collect(std::span<const Candidate> cands, DisjointSet& dsu) {
    std::unordered_map<std::size_t, std::size_t> root_to_cluster;
    std::vector<ClusterResult> clusters;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const std::size_t root = dsu.find(i);
        auto [it, inserted] = root_to_cluster.try_emplace(root, clusters.size());
        if (inserted) {
            ClusterResult r;
            r.representative = cands[i];
            r.members = 1;
            r.begin_sample = cands[i].begin_sample;
            r.end_sample = cands[i].end_sample;
            r.dm_lo = r.dm_hi = cands[i].dm;
            r.member_ids.push_back(i);
            clusters.push_back(std::move(r));
        } else {
            ClusterResult& r = clusters[it->second];
            if (better_representative(cands[i], r.representative)) r.representative = cands[i];
            ++r.members;
            r.begin_sample = std::min(r.begin_sample, cands[i].begin_sample);
            r.end_sample = std::max(r.end_sample, cands[i].end_sample);
            r.dm_lo = std::min(r.dm_lo, cands[i].dm);
            r.dm_hi = std::max(r.dm_hi, cands[i].dm);
            r.member_ids.push_back(i);
        }
    }
    std::sort(clusters.begin(), clusters.end(), [](const ClusterResult& a, const ClusterResult& b) {
        if (a.representative.peak_sample != b.representative.peak_sample)
            return a.representative.peak_sample < b.representative.peak_sample;
        if (a.representative.dm_trial != b.representative.dm_trial)
            return a.representative.dm_trial < b.representative.dm_trial;
        return a.representative.width_index < b.representative.width_index;
    });
    return clusters;
}

}  // namespace

bool linked(const Candidate& a, const Candidate& b, const LinkRadii& radii) {
    const std::uint64_t dt = a.peak_sample > b.peak_sample ? a.peak_sample - b.peak_sample
                                                           : b.peak_sample - a.peak_sample;
    const std::uint64_t wmax = std::max(a.width_samples, b.width_samples);
    if (dt > radii.sep_time * wmax) return false;
    const std::uint32_t ddm =
        a.dm_trial > b.dm_trial ? a.dm_trial - b.dm_trial : b.dm_trial - a.dm_trial;
    if (ddm > radii.sep_dm_trials) return false;
    const std::uint32_t dw =
        a.width_index > b.width_index ? a.width_index - b.width_index : b.width_index - a.width_index;
    return dw <= radii.sep_width;
}

std::vector<ClusterResult> link_reference(std::span<const Candidate> cands,
                                          const LinkRadii& radii) {
    DisjointSet dsu(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i)
        for (std::size_t j = i + 1; j < cands.size(); ++j)
            if (linked(cands[i], cands[j], radii)) dsu.unite(i, j);
    return collect(cands, dsu);
}

std::vector<ClusterResult> link_grid(std::span<const Candidate> cands, const LinkRadii& radii) {
    if (cands.empty()) return {};

    std::uint64_t wmax = 1;
    for (const auto& c : cands) wmax = std::max(wmax, c.width_samples);
    // Cell edges = maximal linking distance per axis; any linked pair then
    // lands in the same or an adjacent cell.
    const std::uint64_t cell_t = std::max<std::uint64_t>(1, radii.sep_time * wmax);
    const std::uint32_t cell_dm = std::max<std::uint32_t>(1, radii.sep_dm_trials);
    const std::uint32_t cell_w = std::max<std::uint32_t>(1, radii.sep_width);

    auto cell_key = [&](std::uint64_t t, std::uint32_t dm, std::uint32_t w) {
        const std::uint64_t kt = t / cell_t;
        const std::uint64_t kd = dm / cell_dm;
        const std::uint64_t kw = w / cell_w;
        return (kt << 24) ^ (kd << 8) ^ kw;
    };

    std::unordered_map<std::uint64_t, std::vector<std::size_t>> grid;
    grid.reserve(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i)
        grid[cell_key(cands[i].peak_sample, cands[i].dm_trial, cands[i].width_index)].push_back(i);

    DisjointSet dsu(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const auto& a = cands[i];
        const std::int64_t kt = std::int64_t(a.peak_sample / cell_t);
        const std::int64_t kd = std::int64_t(a.dm_trial / cell_dm);
        const std::int64_t kw = std::int64_t(a.width_index / cell_w);
        for (std::int64_t dt = -1; dt <= 1; ++dt) {
            if (kt + dt < 0) continue;
            for (std::int64_t dd = -1; dd <= 1; ++dd) {
                if (kd + dd < 0) continue;
                for (std::int64_t dw = -1; dw <= 1; ++dw) {
                    if (kw + dw < 0) continue;
                    const std::uint64_t key = (std::uint64_t(kt + dt) << 24) ^
                                              (std::uint64_t(kd + dd) << 8) ^
                                              std::uint64_t(kw + dw);
                    auto it = grid.find(key);
                    if (it == grid.end()) continue;
                    for (std::size_t j : it->second)
                        if (j > i && linked(a, cands[j], radii)) dsu.unite(i, j);
                }
            }
        }
    }
    return collect(cands, dsu);
}

}  // namespace pulsegrid
