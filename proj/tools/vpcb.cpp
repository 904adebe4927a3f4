// vpcb - virtual production codec bench.
//
// Subcommands expose the pipeline stages: mark, encode-ladder, simulate,
// align, score, report, run. See README.md for the manifest format.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>

#include "vpcb/experiment.hpp"
#include "vpcb/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPartial = 2;
constexpr int kExitFatal = 3;

vpcb::MarkerGeometry geometry_from(int marker_size, int marker_inset) {
    return vpcb::MarkerGeometry::from_marker_size(marker_size, marker_inset);
}

int cmd_mark(const std::string& input, const std::string& output, int clip_id, int marker_size,
             int marker_inset) {
    auto geometry = geometry_from(marker_size, marker_inset);
    vpcb::Y4mClip clip = vpcb::read_y4m_file(input);
    std::vector<vpcb::FrameBuffer> out;
    out.reserve(clip.frames.size());
    for (size_t i = 0; i < clip.frames.size(); ++i)
        out.push_back(vpcb::embed_markers(
            clip.frames[i],
            vpcb::MarkerPayload::make(static_cast<uint16_t>(clip_id), static_cast<uint32_t>(i)),
            geometry));
    vpcb::write_y4m_file(output, clip.spec, out);
    std::cout << "marked " << out.size() << " frames -> " << output << "\n";
    return kExitOk;
}

int cmd_align(const std::string& captured, int clip_id, int marker_size, int marker_inset) {
    auto geometry = geometry_from(marker_size, marker_inset);
    vpcb::Y4mClip clip = vpcb::read_y4m_file(captured);
    vpcb::AlignmentMap map =
        vpcb::build_alignment_map(clip.frames, static_cast<uint16_t>(clip_id), geometry);

    nlohmann::json j;
    j["clip_id"] = map.clip_id;
    auto entries = nlohmann::json::array();
    for (const auto& e : map.entries)
        entries.push_back({{"captured_index", e.captured_index},
                           {"source_index", e.source_index},
                           {"agreement", e.agreement}});
    j["entries"] = entries;
    auto events = nlohmann::json::array();
    for (const auto& e : map.events)
        events.push_back({{"kind", vpcb::to_string(e.kind)},
                          {"captured_index", e.captured_index},
                          {"detail", e.detail}});
    j["events"] = events;
    j["trimmed_leading"] = map.trimmed_leading;
    j["trimmed_trailing"] = map.trimmed_trailing;
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_score(const std::string& metric, const std::string& ref, const std::string& dist,
              const std::string& mask_name, int marker_size, int marker_inset,
              const std::string& manifest_path) {
    if (metric == "psnr") {
        vpcb::Y4mClip a = vpcb::read_y4m_file(ref);
        vpcb::Y4mClip b = vpcb::read_y4m_file(dist);
        vpcb::RegionMask mask;
        if (mask_name == "exclude-markers")
            mask = vpcb::RegionMask::exclude_markers(geometry_from(marker_size, marker_inset));
        else if (mask_name != "full")
            throw vpcb::Error("unknown mask \"" + mask_name + "\" (full | exclude-markers)");
        vpcb::QualityRecord rec = vpcb::psnr_sequence(a.frames, b.frames, mask);
        std::printf("%.4f\n", rec.pooled);
        return kExitOk;
    }
    if (manifest_path.empty())
        throw vpcb::Error("external metric \"" + metric + "\" needs --manifest for the runner");
    vpcb::ExperimentManifest m = vpcb::load_manifest(manifest_path);
    const vpcb::MetricRunner* runner = m.find_runner(metric);
    if (!runner) throw vpcb::Error("metric \"" + metric + "\" is not declared in the manifest");
    auto out = std::filesystem::temp_directory_path() /
               ("vpcb_score_" + std::to_string(::getpid()) + ".json");
    vpcb::QualityRecord rec = vpcb::run_external_metric(*runner, ref, dist, out);
    std::filesystem::remove(out);
    std::printf("%.4f\n", rec.pooled);
    return kExitOk;
}

int cmd_simulate(const std::string& input, const std::string& output,
                 const std::string& manifest_path, const std::string& profile, double noise_sigma,
                 uint64_t seed, double dup_prob, double skip_prob) {
    vpcb::ChannelConfig cfg;
    if (!profile.empty()) {
        if (manifest_path.empty()) throw vpcb::Error("--channel needs --manifest");
        vpcb::ExperimentManifest m = vpcb::load_manifest(manifest_path);
        auto it = m.channels.find(profile);
        if (it == m.channels.end())
            throw vpcb::Error("channel profile \"" + profile + "\" is not declared");
        cfg = it->second;
    }
    if (noise_sigma > 0) cfg.noise_sigma = noise_sigma;
    cfg.jitter.duplicate_prob = dup_prob > 0 ? dup_prob : cfg.jitter.duplicate_prob;
    cfg.jitter.skip_prob = skip_prob > 0 ? skip_prob : cfg.jitter.skip_prob;
    cfg.seed = seed;

    vpcb::Y4mClip clip = vpcb::read_y4m_file(input);
    vpcb::ChannelOutput out = vpcb::apply_channel(clip.frames, cfg);
    vpcb::VideoSpec spec = clip.spec;
    if (!out.frames.empty()) {
        spec = vpcb::VideoSpec::for_frames(out.frames.front().fmt, clip.spec.frame_rate,
                                           static_cast<int64_t>(out.frames.size()));
    }
    vpcb::write_y4m_file(output, spec, out.frames);
    std::cout << "captured " << out.frames.size() << " frames -> " << output << "\n";
    return kExitOk;
}

int cmd_encode_ladder(const std::string& manifest_path, const std::string& clip_name,
                      const std::string& codec_name) {
    vpcb::ExperimentManifest m = vpcb::load_manifest(manifest_path);
    std::vector<vpcb::ClipSource> clips;
    for (const auto& c : m.clips)
        if (clip_name.empty() || c.name == clip_name) clips.push_back(c);
    if (clips.empty()) throw vpcb::Error("no clip named \"" + clip_name + "\" in manifest");
    std::vector<vpcb::CodecConfig> codecs;
    for (const auto& c : m.codecs)
        if (codec_name.empty() || c.codec_name == codec_name) codecs.push_back(c);
    if (codecs.empty()) throw vpcb::Error("no codec named \"" + codec_name + "\" in manifest");

    vpcb::ExperimentManifest sub = m;
    sub.clips = clips;
    sub.codecs = codecs;
    sub.modes = {"direct"};
    if (sub.reference_codec != codecs.front().codec_name && codecs.size() == 1)
        sub.reference_codec = codecs.front().codec_name;
    vpcb::ExperimentRunner runner(sub);
    vpcb::ExperimentSummary s = runner.run();

    nlohmann::json j;
    for (const auto* rec : runner.store().records_of_kind("ladder_point")) {
        nlohmann::json pt;
        pt["clip"] = rec->value("clip", "");
        pt["codec"] = rec->value("codec", "");
        pt["gop"] = rec->value("gop", "");
        pt["rate_param"] = rec->value("rate_param", 0);
        pt["bitrate_mbps"] = rec->value("bitrate_mbps", 0.0);
        j.push_back(pt);
    }
    std::cout << j.dump(2) << "\n";
    if (s.all_failed()) return kExitFatal;
    return s.failed > 0 ? kExitPartial : kExitOk;
}

int cmd_run(const std::string& manifest_path, const std::vector<std::string>& mode_override,
            int workers_override) {
    vpcb::ExperimentManifest m = vpcb::load_manifest(manifest_path);
    if (!mode_override.empty()) {
        for (const auto& mode : mode_override)
            if (mode != "direct" && !m.channels.count(mode))
                throw vpcb::Error("channel profile \"" + mode + "\" is not declared");
        m.modes = mode_override;
    }
    if (workers_override > 0) m.workers = workers_override;

    vpcb::ExperimentSummary s = vpcb::run_experiment(m);
    std::cout << "planned " << s.planned << ", completed " << s.completed << ", skipped "
              << s.skipped << ", failed " << s.failed << "\n";
    for (const auto& f : s.failures) std::cerr << "  " << f << "\n";
    if (s.planned == 0) return kExitOk;
    if (s.all_failed()) return kExitFatal;
    return s.failed > 0 ? kExitPartial : kExitOk;
}

int cmd_report(const std::string& manifest_path) {
    vpcb::ExperimentManifest m = vpcb::load_manifest(manifest_path);
    vpcb::ExperimentRunner runner(m);
    auto curves = runner.collect_curves();
    if (curves.empty()) throw vpcb::Error("store has no completed curves to report");
    vpcb::ReportFiles files =
        vpcb::emit_report(curves, m.reference_codec, m.threshold, m.output_dir / "report");
    std::cout << files.csv.string() << "\n" << files.curves_json.string() << "\n";
    for (const auto& p : files.svgs) std::cout << p.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"virtual production codec bench"};
    app.set_version_flag("--version", vpcb::kVersion);
    app.require_subcommand(1);

    // mark
    auto* mark = app.add_subcommand("mark", "burn frame-sync markers into a clip");
    std::string mark_in, mark_out;
    int mark_clip_id = 0, marker_size = 90, marker_inset = 2;
    mark->add_option("--input", mark_in)->required();
    mark->add_option("--output", mark_out)->required();
    mark->add_option("--clip-id", mark_clip_id)->required();
    mark->add_option("--marker-size", marker_size, "marker side in pixels (multiple of 10)");
    mark->add_option("--marker-inset", marker_inset, "pixels from the frame corner");

    // align
    auto* align = app.add_subcommand("align", "decode markers and print the alignment map");
    std::string align_captured;
    int align_clip_id = 0, align_marker_size = 90, align_marker_inset = 2;
    align->add_option("--captured", align_captured)->required();
    align->add_option("--clip-id", align_clip_id)->required();
    align->add_option("--marker-size", align_marker_size);
    align->add_option("--marker-inset", align_marker_inset);

    // score
    auto* score = app.add_subcommand("score", "score a distorted clip against a reference");
    std::string score_metric = "psnr", score_ref, score_dist, score_mask = "exclude-markers";
    std::string score_manifest;
    int score_marker_size = 90, score_marker_inset = 2;
    score->add_option("--metric", score_metric, "psnr or a runner declared in --manifest");
    score->add_option("--ref", score_ref)->required();
    score->add_option("--dist", score_dist)->required();
    score->add_option("--mask", score_mask, "full | exclude-markers");
    score->add_option("--marker-size", score_marker_size);
    score->add_option("--marker-inset", score_marker_inset);
    score->add_option("--manifest", score_manifest);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "run a clip through the display/capture chain");
    std::string sim_in, sim_out, sim_manifest, sim_profile;
    double sim_sigma = 0, sim_dup = 0, sim_skip = 0;
    uint64_t sim_seed = 0;
    simulate->add_option("--input", sim_in)->required();
    simulate->add_option("--output", sim_out)->required();
    simulate->add_option("--manifest", sim_manifest);
    simulate->add_option("--channel", sim_profile, "channel profile from the manifest");
    simulate->add_option("--noise-sigma", sim_sigma);
    simulate->add_option("--duplicate-prob", sim_dup);
    simulate->add_option("--skip-prob", sim_skip);
    simulate->add_option("--seed", sim_seed);

    // encode-ladder
    auto* ladder = app.add_subcommand("encode-ladder", "build and encode the rate ladder");
    std::string ladder_manifest, ladder_clip, ladder_codec;
    ladder->add_option("--manifest", ladder_manifest)->required();
    ladder->add_option("--clip", ladder_clip, "restrict to one clip");
    ladder->add_option("--codec", ladder_codec, "restrict to one codec");

    // run
    auto* run = app.add_subcommand("run", "run the full experiment from a manifest");
    std::string run_manifest;
    std::vector<std::string> run_modes;
    int run_workers = 0;
    run->add_option("--manifest", run_manifest)->required();
    run->add_option("--mode", run_modes, "override modes: direct and/or channel profiles");
    run->add_option("--workers", run_workers, "worker threads (or env VPCB_WORKERS)");

    // report
    auto* report = app.add_subcommand("report", "emit CSV/JSON/SVG from a completed store");
    std::string report_manifest;
    report->add_option("--manifest", report_manifest)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (mark->parsed()) return cmd_mark(mark_in, mark_out, mark_clip_id, marker_size, marker_inset);
        if (align->parsed())
            return cmd_align(align_captured, align_clip_id, align_marker_size, align_marker_inset);
        if (score->parsed())
            return cmd_score(score_metric, score_ref, score_dist, score_mask, score_marker_size,
                             score_marker_inset, score_manifest);
        if (simulate->parsed())
            return cmd_simulate(sim_in, sim_out, sim_manifest, sim_profile, sim_sigma, sim_seed,
                                sim_dup, sim_skip);
        if (ladder->parsed()) return cmd_encode_ladder(ladder_manifest, ladder_clip, ladder_codec);
        if (run->parsed()) return cmd_run(run_manifest, run_modes, run_workers);
        if (report->parsed()) return cmd_report(report_manifest);
    } catch (const vpcb::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFatal;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitUsage;
}
