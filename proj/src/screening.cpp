#include "mminfer/fit_single.hpp"

#include <algorithm>
#include <numeric>

namespace mminfer {

std::vector<VarianceSpec> default_candidates() {
    return {VarianceSpec::constant(), VarianceSpec::log_shift(), VarianceSpec::power(0.5),
            VarianceSpec::power(1.0 / 3.0)};
}

std::vector<ScreenEntry> screen_models(const Dataset& data, const std::vector<VarianceSpec>& candidates,
                                       const FitConfig& config) {
    if (candidates.empty()) throw Error(ErrorCode::InvalidInput, "candidate list is empty");

    std::vector<ScreenEntry> entries;
    entries.reserve(candidates.size());
    for (const auto& spec : candidates) {
        ScreenEntry e;
        e.spec = spec;
        try {
            e.fit = fit_single(data, spec, config);
        } catch (const Error& err) {
            e.error_code = err.code();
            e.error = err.what();
        }
        entries.push_back(std::move(e));
    }

    std::vector<std::size_t> order(entries.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& fa = entries[a].fit;
        const auto& fb = entries[b].fit;
        if (fa.has_value() != fb.has_value()) return fa.has_value();
        if (!fa) return false;
        if (fa->aic != fb->aic) return fa->aic < fb->aic;
        return fa->bic < fb->bic;
    });

    std::vector<ScreenEntry> ranked;
    ranked.reserve(entries.size());
    int rank = 0;
    for (std::size_t idx : order) {
        ScreenEntry e = std::move(entries[idx]);
        e.rank = e.fit ? ++rank : 0;
        ranked.push_back(std::move(e));
    }
    if (rank == 0) {
        throw Error(ErrorCode::AllCandidatesFailed, "no candidate variance model produced a converged fit");
    }
    return ranked;
}

GroupFitResult group_fit(const std::map<std::string, Dataset>& panel, const std::vector<VarianceSpec>& candidates,
                         const FitConfig& config) {
    if (panel.empty()) throw Error(ErrorCode::InvalidInput, "group panel is empty");

    GroupFitResult out;
    for (const auto& [label, data] : panel) {
        GroupOutcome g;
        try {
            // Panels may be assembled from relaxed datasets; validate here so
            // the failure stays with this label.
            const Dataset checked(std::vector<double>(data.s().begin(), data.s().end()),
                                  std::vector<double>(data.y().begin(), data.y().end()));
            g.ranked = screen_models(checked, candidates, config);
        } catch (const Error& err) {
            g.error_code = err.code();
            g.error = err.what();
        }
        out.groups.emplace(label, std::move(g));
    }

    for (const auto& spec : candidates) {
        SpecSummary row;
        row.spec = spec;
        for (const auto& [label, g] : out.groups) {
            for (const auto& e : g.ranked) {
                if (!(e.spec == spec) || !e.fit) continue;
                row.mean_aic += e.fit->aic;
                row.mean_bic += e.fit->bic;
                row.mean_vmax += e.fit->params.vmax();
                row.mean_km += e.fit->params.km();
                ++row.groups;
                if (e.rank == 1) ++row.wins;
                break;
            }
        }
        if (row.groups > 0) {
            const double k = row.groups;
            row.mean_aic /= k;
            row.mean_bic /= k;
            row.mean_vmax /= k;
            row.mean_km /= k;
        }
        out.summary.push_back(row);
    }
    return out;
}

} // namespace mminfer
