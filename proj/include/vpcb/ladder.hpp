#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <vector>

#include "vpcb/core.hpp"

namespace vpcb {

// JND-spaced ladder search.
//
// Targets run from the quality at the lowest rate parameter (Qtop) down in
// `jnd_step`-sized steps, clipped so the lowest target never falls below the
// quality floor; spacing compresses evenly when the floor is close. For each
// target, integer bisection brackets the target on the sampled quality
// envelope and the bracket endpoint whose quality is closest to the target is
// chosen (ties go to the larger parameter, i.e. the lower bitrate).

struct LadderSearchResult {
    std::vector<int> rate_params;  // ascending, deduplicated
    std::vector<double> targets;
    bool monotonicity_warning = false;
};

inline LadderSearchResult build_jnd_ladder(int rate_min, int rate_max,
                                           const std::function<double(int)>& quality_fn,
                                           double jnd_step, double quality_floor, int points) {
    if (points < 2) throw RangeError("ladder needs at least 2 points");
    if (jnd_step <= 0) throw RangeError("jnd step must be positive");
    if (rate_min > rate_max) throw RangeError("empty rate parameter range");

    std::map<int, double> cache;
    auto q = [&](int p) {
        auto it = cache.find(p);
        if (it != cache.end()) return it->second;
        double v = quality_fn(p);
        cache.emplace(p, v);
        return v;
    };

    LadderSearchResult result;
    const double q_top = q(rate_min);
    const double q_bottom = q(rate_max);
    result.monotonicity_warning = q_bottom > q_top;

    if (q_top < quality_floor)
        throw UnreachableError("quality " + std::to_string(q_top) + " at the lowest rate param is below the floor " +
                               std::to_string(quality_floor));

    const double lowest = std::max(q_top - (points - 1) * jnd_step, quality_floor);
    for (int i = 0; i < points; ++i)
        result.targets.push_back(q_top - (q_top - lowest) * i / (points - 1));

    std::vector<int> chosen;
    for (double target : result.targets) {
        int pick;
        if (q(rate_max) >= target) {
            pick = rate_max;
        } else {
            int lo = rate_min, hi = rate_max;  // q(lo) >= target > q(hi)
            while (hi - lo > 1) {
                int mid = lo + (hi - lo) / 2;
                if (q(mid) >= target)
                    lo = mid;
                else
                    hi = mid;
            }
            double err_lo = std::abs(q(lo) - target);
            double err_hi = std::abs(q(hi) - target);
            pick = err_hi <= err_lo ? hi : lo;
        }
        chosen.push_back(pick);
    }
    std::sort(chosen.begin(), chosen.end());
    chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
    result.rate_params = std::move(chosen);
    return result;
}

}  // namespace vpcb
