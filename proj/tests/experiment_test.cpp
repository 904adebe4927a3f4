#include <gtest/gtest.h>

#include <fstream>

#include "oracle.hpp"
#include "vpcb/experiment.hpp"

using namespace vpcb;

namespace {

// Toy-codec manifest: 1 clip, 2 GOP modes, explicit 3-point ladder,
// direct + identity + noisy channel modes, native PSNR only.
const char* kManifest = R"json({
  "seed": 7,
  "output_dir": "out",
  "threshold": 36.0,
  "reference_codec": "toy",
  "clips": [
    {"name": "bars", "clip_id": 1,
     "synthetic": {"kind": "moving_bar", "width": 96, "height": 64,
                   "bit_depth": 8, "chroma": "420", "fps": "30:1", "frames": 12}}
  ],
  "codecs": [{"name": "toy", "backend": "toy"}],
  "gop_modes": ["all_intra", "single_intra"],
  "ladder": {"mode": "explicit", "points": {"toy": [0, 12, 32]}},
  "channels": {
    "identity": {},
    "noisy": {"noise_sigma": 2.0}
  },
  "channel": ["direct", "identity", "noisy"],
  "metrics": {"psnr": true},
  "markers": {"size": 30, "inset": 1}
})json";

std::filesystem::path write_manifest(const std::filesystem::path& dir,
                                     const std::string& text = kManifest) {
    std::filesystem::create_directories(dir);
    oracle::write_text(dir / "manifest.json", text);
    return dir / "manifest.json";
}

std::vector<nlohmann::json> read_store(const std::filesystem::path& store) {
    std::vector<nlohmann::json> out;
    std::ifstream in(store);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    return out;
}

std::vector<std::string> stripped_lines(const std::filesystem::path& store) {
    std::vector<std::string> out;
    for (auto j : read_store(store)) {
        j.erase("volatile");
        out.push_back(j.dump());
    }
    return out;
}

const nlohmann::json* find_key(const std::vector<nlohmann::json>& records,
                               const std::string& key) {
    for (const auto& j : records)
        if (j.value("key", "") == key) return &j;
    return nullptr;
}

TEST(Experiment, FullRunProducesExpectedRecords) {
    auto dir = oracle::test_dir("exp_run");
    ExperimentManifest m = load_manifest(write_manifest(dir));
    ExperimentSummary s = run_experiment(m);
    EXPECT_EQ(s.planned, 18);  // 2 gops x 3 params x 3 modes
    EXPECT_EQ(s.completed, 18);
    EXPECT_EQ(s.failed, 0);
    EXPECT_EQ(s.skipped, 0);

    auto records = read_store(m.output_dir / "store.jsonl");
    size_t ladder = 0, quality = 0, alignment = 0, curve = 0;
    for (const auto& j : records) {
        std::string kind = j.value("kind", "");
        if (kind == "ladder_point") ++ladder;
        if (kind == "quality") ++quality;
        if (kind == "alignment") ++alignment;
        if (kind == "curve") ++curve;
        EXPECT_EQ(j.value("manifest_hash", ""), m.manifest_hash);
        EXPECT_EQ(j.value("tool_version", ""), kVersion);
        EXPECT_TRUE(j.contains("volatile"));
        EXPECT_TRUE(j["volatile"].contains("timestamp"));
    }
    EXPECT_EQ(ladder, 6u);     // 2 gops x 3 params
    EXPECT_EQ(quality, 18u);   // one psnr record per tuple
    // Per channel mode: one refcam map + 6 degdeccam maps.
    EXPECT_EQ(alignment, 14u);
    EXPECT_EQ(curve, 6u);  // 2 gops x 3 modes, psnr

    // qp 0 direct-mode score sits at the lossless cap.
    const auto* q0 = find_key(records, "quality:bars/toy/gop0/0/direct/psnr");
    ASSERT_NE(q0, nullptr);
    EXPECT_DOUBLE_EQ((*q0)["pooled"].get<double>(), 99.0);
}

TEST(Experiment, IdentityChannelMatchesDirectScores) {
    auto dir = oracle::test_dir("exp_identity");
    ExperimentManifest m = load_manifest(write_manifest(dir));
    run_experiment(m);
    auto records = read_store(m.output_dir / "store.jsonl");
    for (const std::string gop : {"gop0", "gop-1"})
        for (const std::string param : {"0", "12", "32"}) {
            const auto* direct =
                find_key(records, "quality:bars/toy/" + gop + "/" + param + "/direct/psnr");
            const auto* cam =
                find_key(records, "quality:bars/toy/" + gop + "/" + param + "/identity/psnr");
            ASSERT_NE(direct, nullptr);
            ASSERT_NE(cam, nullptr);
            EXPECT_DOUBLE_EQ((*direct)["pooled"].get<double>(), (*cam)["pooled"].get<double>())
                << gop << " qp " << param;
        }
}

TEST(Experiment, StoredCurvesAreParetoValid) {
    auto dir = oracle::test_dir("exp_curves");
    ExperimentManifest m = load_manifest(write_manifest(dir));
    run_experiment(m);
    auto records = read_store(m.output_dir / "store.jsonl");
    size_t checked = 0;
    for (const auto& j : records) {
        if (j.value("kind", "") != "curve") continue;
        const auto& pts = j["points"];
        ASSERT_GE(pts.size(), 1u);
        for (size_t i = 1; i < pts.size(); ++i) {
            EXPECT_LT(pts[i - 1]["bitrate_mbps"].get<double>(),
                      pts[i]["bitrate_mbps"].get<double>());
            EXPECT_LT(pts[i - 1]["quality"].get<double>(), pts[i]["quality"].get<double>());
        }
        ++checked;
    }
    EXPECT_EQ(checked, 6u);
}

TEST(Experiment, RerunIsNoOp) {
    auto dir = oracle::test_dir("exp_noop");
    ExperimentManifest m = load_manifest(write_manifest(dir));
    run_experiment(m);
    auto before = read_text_file(m.output_dir / "store.jsonl", 10 << 20);

    ExperimentSummary again = run_experiment(m);
    EXPECT_EQ(again.skipped, 18);
    EXPECT_EQ(again.completed, 0);
    EXPECT_EQ(read_text_file(m.output_dir / "store.jsonl", 10 << 20), before);
}

TEST(Experiment, DeletedRecordIsTheOnlyThingRecomputed) {
    auto dir = oracle::test_dir("exp_resume");
    ExperimentManifest m = load_manifest(write_manifest(dir));
    run_experiment(m);
    auto store_path = m.output_dir / "store.jsonl";
    auto lines = stripped_lines(store_path);

    // Drop one quality record from the middle of the store.
    const std::string victim = "quality:bars/toy/gop-1/12/noisy/psnr";
    {
        auto records = read_store(store_path);
        std::ofstream out(store_path, std::ios::trunc | std::ios::binary);
        for (const auto& j : records)
            if (j.value("key", "") != victim) out << j.dump() << "\n";
    }

    ExperimentSummary s = run_experiment(m);
    EXPECT_EQ(s.completed, 1);
    EXPECT_EQ(s.skipped, 17);

    auto after = stripped_lines(store_path);
    ASSERT_EQ(after.size(), lines.size());
    // The recomputed record lands at the end with identical content.
    auto records = read_store(store_path);
    const auto* recomputed = find_key(records, victim);
    ASSERT_NE(recomputed, nullptr);
    nlohmann::json expected;
    for (const auto& line : lines) {
        auto j = nlohmann::json::parse(line);
        if (j.value("key", "") == victim) expected = j;
    }
    nlohmann::json got = *recomputed;
    got.erase("volatile");
    EXPECT_EQ(got.dump(), expected.dump());
}

TEST(Experiment, FixedSeedGivesByteIdenticalStoresAcrossDirectories) {
    auto dir_a = oracle::test_dir("exp_det_a");
    auto dir_b = oracle::test_dir("exp_det_b");
    ExperimentManifest ma = load_manifest(write_manifest(dir_a));
    ExperimentManifest mb = load_manifest(write_manifest(dir_b));
    ASSERT_EQ(ma.manifest_hash, mb.manifest_hash);
    run_experiment(ma);
    run_experiment(mb);
    EXPECT_EQ(stripped_lines(ma.output_dir / "store.jsonl"),
              stripped_lines(mb.output_dir / "store.jsonl"));
}

TEST(Experiment, WorkerCountDoesNotChangeStoreContent) {
    auto dir_a = oracle::test_dir("exp_w1");
    auto dir_b = oracle::test_dir("exp_w4");
    ExperimentManifest ma = load_manifest(write_manifest(dir_a));
    ExperimentManifest mb = load_manifest(write_manifest(dir_b));
    mb.workers = 4;
    run_experiment(ma);
    run_experiment(mb);
    EXPECT_EQ(stripped_lines(ma.output_dir / "store.jsonl"),
              stripped_lines(mb.output_dir / "store.jsonl"));
}

TEST(Experiment, NoisyModeDetectsNoGenlockEventsWithoutJitter) {
    auto dir = oracle::test_dir("exp_align");
    ExperimentManifest m = load_manifest(write_manifest(dir));
    run_experiment(m);
    auto records = read_store(m.output_dir / "store.jsonl");
    for (const auto& j : records) {
        if (j.value("kind", "") != "alignment") continue;
        EXPECT_TRUE(j["events"].empty()) << j.dump();
        EXPECT_EQ(j["entries"].size(), 12u);
    }
}

TEST(Experiment, FailingBackendIsIsolatedPerTuple) {
    auto dir = oracle::test_dir("exp_fail");
    std::string manifest = R"json({
      "seed": 7,
      "output_dir": "out",
      "reference_codec": "toy",
      "clips": [
        {"name": "bars", "clip_id": 1,
         "synthetic": {"kind": "moving_bar", "width": 96, "height": 64, "frames": 6}}
      ],
      "codecs": [
        {"name": "toy", "backend": "toy"},
        {"name": "broken", "backend": {"encode": "exit 9", "decode": "true"}, "range": [0, 63]}
      ],
      "gop_modes": ["all_intra"],
      "ladder": {"mode": "explicit", "points": {"toy": [0, 16], "broken": [0, 16]}},
      "channel": "direct",
      "metrics": {"psnr": true},
      "markers": {"size": 30, "inset": 1}
    })json";
    ExperimentManifest m = load_manifest(write_manifest(dir, manifest));
    ExperimentSummary s = run_experiment(m);
    EXPECT_EQ(s.planned, 4);
    EXPECT_EQ(s.completed, 2);
    EXPECT_EQ(s.failed, 2);
    ASSERT_GE(s.failures.size(), 2u);
    EXPECT_NE(s.failures[0].find("broken"), std::string::npos);
    // The toy tuples still landed in the store.
    auto records = read_store(m.output_dir / "store.jsonl");
    EXPECT_NE(find_key(records, "quality:bars/toy/gop0/0/direct/psnr"), nullptr);
    EXPECT_NE(find_key(records, "quality:bars/toy/gop0/16/direct/psnr"), nullptr);
}

TEST(Experiment, EnvVarOverridesWorkerCount) {
    auto dir = oracle::test_dir("exp_env");
    ExperimentManifest m = load_manifest(write_manifest(dir));
    ::setenv("VPCB_WORKERS", "4", 1);
    ExperimentSummary s = run_experiment(m);
    ::unsetenv("VPCB_WORKERS");
    EXPECT_EQ(s.failed, 0);
    EXPECT_EQ(s.completed, 18);
}

// ---- CLI surface ----------------------------------------------------------

struct CliResult {
    int exit_code;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const std::filesystem::path& dir) {
    auto out_path = dir / "cli.out";
    auto err_path = dir / "cli.err";
    CommandResult r = run_command(oracle::tool_path("vpcb").string() + " " + args, out_path,
                                  err_path);
    return {r.exit_code, read_text_file(out_path, 1 << 20), read_text_file(err_path, 1 << 20)};
}

TEST(Cli, ScoreSelfComparisonHitsCap) {
    auto dir = oracle::test_dir("cli_score");
    VideoSpec spec{64, 64, 8, Chroma::C420, {30, 1}, 3};
    auto frames = generate_synthetic_clip(SyntheticKind::Gradient, spec, 1);
    write_y4m_file(dir / "a.y4m", spec, frames);
    CliResult r = run_cli("score --metric psnr --ref " + (dir / "a.y4m").string() + " --dist " +
                              (dir / "a.y4m").string() + " --mask full",
                          dir);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NEAR(std::stod(r.out), 99.0, 1e-6);
}

TEST(Cli, MarkThenAlignRoundtrip) {
    auto dir = oracle::test_dir("cli_mark");
    VideoSpec spec{96, 64, 8, Chroma::C420, {30, 1}, 5};
    auto frames = generate_synthetic_clip(SyntheticKind::Gradient, spec, 1);
    write_y4m_file(dir / "plain.y4m", spec, frames);

    CliResult mark = run_cli("mark --input " + (dir / "plain.y4m").string() + " --output " +
                                 (dir / "marked.y4m").string() +
                                 " --clip-id 3 --marker-size 30 --marker-inset 1",
                             dir);
    ASSERT_EQ(mark.exit_code, 0) << mark.err;

    CliResult align = run_cli("align --captured " + (dir / "marked.y4m").string() +
                                  " --clip-id 3 --marker-size 30 --marker-inset 1",
                              dir);
    ASSERT_EQ(align.exit_code, 0) << align.err;
    auto j = nlohmann::json::parse(align.out);
    EXPECT_EQ(j["clip_id"], 3);
    EXPECT_EQ(j["entries"].size(), 5u);
    EXPECT_TRUE(j["events"].empty());
}

TEST(Cli, UsageErrorsExitOne) {
    auto dir = oracle::test_dir("cli_usage");
    CliResult r = run_cli("score --nonsense", dir);
    EXPECT_EQ(r.exit_code, 1);
    CliResult r2 = run_cli("", dir);
    EXPECT_EQ(r2.exit_code, 1);
}

TEST(Cli, PartialFailureExitsTwo) {
    auto dir = oracle::test_dir("cli_partial");
    std::string manifest = R"json({
      "seed": 7,
      "output_dir": "out",
      "reference_codec": "toy",
      "clips": [
        {"name": "bars", "clip_id": 1,
         "synthetic": {"kind": "moving_bar", "width": 96, "height": 64, "frames": 6}}
      ],
      "codecs": [
        {"name": "toy", "backend": "toy"},
        {"name": "broken", "backend": {"encode": "exit 9", "decode": "true"}, "range": [0, 63]}
      ],
      "gop_modes": ["all_intra"],
      "ladder": {"mode": "explicit", "points": {"toy": [0], "broken": [0]}},
      "channel": "direct",
      "metrics": {"psnr": true},
      "markers": {"size": 30, "inset": 1}
    })json";
    CliResult r = run_cli("run --manifest " + write_manifest(dir, manifest).string(), dir);
    EXPECT_EQ(r.exit_code, 2) << r.out << r.err;
    EXPECT_NE(r.err.find("broken"), std::string::npos);
}

TEST(Cli, TotalFailureExitsThree) {
    auto dir = oracle::test_dir("cli_total");
    std::string manifest = R"json({
      "seed": 7,
      "output_dir": "out",
      "reference_codec": "broken",
      "clips": [
        {"name": "bars", "clip_id": 1,
         "synthetic": {"kind": "moving_bar", "width": 96, "height": 64, "frames": 6}}
      ],
      "codecs": [
        {"name": "broken", "backend": {"encode": "exit 9", "decode": "true"}, "range": [0, 63]}
      ],
      "gop_modes": ["all_intra"],
      "ladder": {"mode": "explicit", "points": {"broken": [0, 1]}},
      "channel": "direct",
      "metrics": {"psnr": true},
      "markers": {"size": 30, "inset": 1}
    })json";
    CliResult r = run_cli("run --manifest " + write_manifest(dir, manifest).string(), dir);
    EXPECT_EQ(r.exit_code, 3) << r.out << r.err;
}

TEST(Cli, EncodeLadderPrintsPoints) {
    auto dir = oracle::test_dir("cli_ladder");
    CliResult r = run_cli("encode-ladder --manifest " + write_manifest(dir).string() +
                              " --clip bars --codec toy",
                          dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j.size(), 6u);  // 2 gops x 3 explicit params
    for (const auto& pt : j) {
        EXPECT_EQ(pt["codec"], "toy");
        EXPECT_GT(pt["bitrate_mbps"].get<double>(), 0.0);
    }
}

TEST(Cli, RunModeOverrideRestrictsModes) {
    auto dir = oracle::test_dir("cli_mode");
    auto manifest = write_manifest(dir);
    CliResult r = run_cli("run --manifest " + manifest.string() + " --mode direct", dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.out.find("planned 6"), std::string::npos) << r.out;  // 2 gops x 3 params, direct only
}

TEST(Cli, SimulateAppliesChannel) {
    auto dir = oracle::test_dir("cli_sim");
    VideoSpec spec{64, 64, 8, Chroma::C420, {30, 1}, 4};
    auto frames = generate_synthetic_clip(SyntheticKind::Gradient, spec, 1);
    write_y4m_file(dir / "in.y4m", spec, frames);
    CliResult r = run_cli("simulate --input " + (dir / "in.y4m").string() + " --output " +
                              (dir / "out.y4m").string() + " --noise-sigma 2 --seed 5",
                          dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    Y4mClip out = read_y4m_file(dir / "out.y4m");
    ASSERT_EQ(out.frames.size(), 4u);
    EXPECT_NE(out.frames[0], frames[0]);
}

}  // namespace
