// stub-metric: a hermetic stand-in for external perceptual metric tools.
//
// Speaks the runner protocol: `stub-metric <ref.y4m> <dist.y4m> <out.json>`
// writes {"metric": ..., "frames": [{"score": ...}]}. The score is a
// luma-PSNR-derived 0..100 value (100 for identical frames), monotone in
// distortion, so it stands in for VMAF when wiring up ladders and reports.
// Real tools plug into the same template slot.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "vpcb/metrics.hpp"
#include "vpcb/y4m.hpp"

int main(int argc, char** argv) {
    if (argc < 4) {
        std::cerr << "usage: stub-metric <ref.y4m> <dist.y4m> <out.json> [metric-name]\n";
        return 1;
    }
    try {
        vpcb::Y4mClip ref = vpcb::read_y4m_file(argv[1]);
        vpcb::Y4mClip dist = vpcb::read_y4m_file(argv[2]);
        if (ref.frames.size() != dist.frames.size()) {
            std::cerr << "stub-metric: frame count mismatch (" << ref.frames.size() << " vs "
                      << dist.frames.size() << ")\n";
            return 1;
        }
        std::string name = argc > 4 ? argv[4] : "vmafstub";

        nlohmann::json out;
        out["metric"] = name;
        auto frames = nlohmann::json::array();
        for (size_t i = 0; i < ref.frames.size(); ++i) {
            double psnr = vpcb::psnr_frame(ref.frames[i], dist.frames[i]);
            // 45 dB and above maps to the top of the scale; 2 points per dB
            // below that, clamped to [0, 100].
            double score = psnr >= 45.0 ? 100.0 : 100.0 - 2.0 * (45.0 - psnr);
            if (psnr >= vpcb::kPsnrCap) score = 100.0;
            if (score < 0) score = 0;
            frames.push_back({{"score", score}});
        }
        out["frames"] = frames;

        std::ofstream of(argv[3], std::ios::binary);
        of << out.dump(2) << "\n";
        if (!of) {
            std::cerr << "stub-metric: cannot write " << argv[3] << "\n";
            return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "stub-metric: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
