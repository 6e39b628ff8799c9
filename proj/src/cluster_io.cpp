#include "pulsegrid/cluster_io.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace pulsegrid {

std::size_t write_candidates(std::span<const ClusterResult> clusters, std::ostream& out) {
    std::vector<const ClusterResult*> order;
    order.reserve(clusters.size());
    for (const auto& c : clusters) order.push_back(&c);
    std::sort(order.begin(), order.end(), [](const ClusterResult* a, const ClusterResult* b) {
        if (a->representative.peak_sample != b->representative.peak_sample)
            return a->representative.peak_sample < b->representative.peak_sample;
        return a->representative.dm_trial < b->representative.dm_trial;
    });

    char line[256];
    for (const auto* c : order) {
        const Candidate& r = c->representative;
        std::snprintf(line, sizeof(line),
                      "%.2f\t%llu\t%.9f\t%u\t%u\t%.3f\t%llu\t%llu\t%llu\n", double(r.snr),
                      static_cast<unsigned long long>(r.peak_sample), r.time_s, r.width_index,
                      r.dm_trial, r.dm, static_cast<unsigned long long>(c->members),
                      static_cast<unsigned long long>(c->begin_sample),
                      static_cast<unsigned long long>(c->end_sample));
        out << line;
    }
    if (!out) throw error("candidate write failed");
    return order.size();
}

std::vector<CandLine> parse_candidates(std::istream& in) {
    std::vector<CandLine> lines;
    std::string raw;
    while (std::getline(in, raw)) {
        if (raw.empty()) continue;
        std::istringstream ls(raw);
        CandLine c;
        ls >> c.snr >> c.peak_sample >> c.time_s >> c.width_index >> c.dm_trial >> c.dm >>
            c.members >> c.begin_sample >> c.end_sample;
        if (!ls) throw malformed_file_error("bad .cand line: " + raw);
        lines.push_back(c);
    }
    return lines;
}

}  // namespace pulsegrid
