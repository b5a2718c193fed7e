#include "moco/config.hpp"
#include "moco/io.hpp"
#include "moco/pipeline.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace moco;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// config small enough for end-to-end pipeline tests
Config tiny_config() {
    Config cfg = default_config();
    cfg.name = "tiny";
    cfg.seed = 5;
    cfg.geometry.n_views = 48;
    cfg.geometry.detector = {90, 40, 4.0, 4.0, 44.5, 19.5};
    cfg.volume_grid = GridSpec::centered(48, 48, 9, {2.0, 2.0, 2.0});
    cfg.simulate.amplitude_mm = 3.0;
    cfg.simulate.amplitude_deg = 1.0;
    cfg.simulate.n_nodes = 5;
    cfg.simulate.supersample = 1;
    cfg.estimate.n_nodes = 4;
    cfg.estimate.block_size = 2;
    cfg.estimate.max_sweeps = 2;
    cfg.estimate.nm = {1e-4, 60};
    cfg.estimate.active = family_mask(MotionFamily::in_plane);
    cfg.ecc.n_kappa = 16;
    cfg.methods = {MethodConfig{"oracle", IqmKind::oracle_rpe, -1.0}};
    return cfg;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_SUITE("io_cli") {

TEST_CASE("stack and volume files round trip bit for bit") {
    TempDir dir("moco_io_test");
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(-1.f, 1.f);

    ProjectionStack stack(3, DetectorSpec{16, 8, 1.5, 2.0, 7.5, 3.5});
    for (auto& x : stack.v) x = u(rng);
    std::string sp = (dir.path / "a.rawp").string();
    save_stack(sp, stack);
    ProjectionStack s2 = load_stack(sp);
    CHECK(s2.n_views == 3);
    CHECK(s2.nu == 16);
    CHECK(s2.nv == 8);
    CHECK(s2.detector.du == doctest::Approx(1.5));
    CHECK(s2.v == stack.v);

    Volume vol(GridSpec::centered(5, 6, 7, {1.0, 2.0, 3.0}));
    for (auto& x : vol.v) x = u(rng);
    std::string vp = (dir.path / "a.rawv").string();
    save_volume(vp, vol);
    Volume v2 = load_volume(vp);
    CHECK(v2.nx == 5);
    CHECK(v2.spacing.z() == doctest::Approx(3.0));
    CHECK(v2.origin.x() == doctest::Approx(vol.origin.x()));
    CHECK(v2.v == vol.v);
}

TEST_CASE("pgm16 writes the documented window/level mapping") {
    TempDir dir("moco_pgm_test");
    Image2D img(2, 1);
    img.at(0, 0) = 0.0f;
    img.at(1, 0) = 1.0f;
    std::string p = (dir.path / "x.pgm").string();
    save_pgm16(p, img, 0.5, 1.0); // window [0, 1]
    std::string bytes = slurp(p);
    // header "P5\n2 1\n65535\n" then big-endian u16 pixels 0 and 65535
    REQUIRE(bytes.size() >= 4);
    CHECK(static_cast<unsigned char>(bytes[bytes.size() - 4]) == 0x00);
    CHECK(static_cast<unsigned char>(bytes[bytes.size() - 3]) == 0x00);
    CHECK(static_cast<unsigned char>(bytes[bytes.size() - 2]) == 0xff);
    CHECK(static_cast<unsigned char>(bytes[bytes.size() - 1]) == 0xff);
}

TEST_CASE("config json round trip and validation") {
    TempDir dir("moco_cfg_test");
    Config cfg = tiny_config();
    std::string path = (dir.path / "cfg.json").string();
    {
        std::ofstream f(path);
        f << config_to_json(cfg);
    }
    Config back = load_config(path);
    CHECK(back.name == "tiny");
    CHECK(back.geometry.n_views == 48);
    CHECK(back.estimate.active == family_mask(MotionFamily::in_plane));
    CHECK(back.methods.size() == 1);
    CHECK(back.methods[0].iqm == IqmKind::oracle_rpe);
    CHECK(config_hash(back) == config_hash(cfg));

    SUBCASE("validation errors carry the field") {
        std::string bad = (dir.path / "bad.json").string();
        {
            std::ofstream f(bad);
            f << R"({"train": {"n_samples": 10}})";
        }
        CHECK_THROWS_WITH_AS(load_config(bad), doctest::Contains("n_samples"), std::invalid_argument);
    }
}

TEST_CASE("cmd_simulate") {
    TempDir dir("moco_sim_test");
    Config cfg = tiny_config();

    SUBCASE("zero amplitude gives bit-identical stacks") {
        cfg.simulate.amplitude_mm = 0.0;
        cfg.simulate.amplitude_deg = 0.0;
        cmd_simulate(cfg, dir.path.string());
        CHECK(slurp(dir.path / "stack_motionfree.rawp") == slurp(dir.path / "stack_motion.rawp"));
    }
    SUBCASE("same seed reproduces every artifact; amplitude > 0 changes the stack") {
        cmd_simulate(cfg, dir.path.string());
        std::string a = slurp(dir.path / "stack_motion.rawp");
        std::string free_a = slurp(dir.path / "stack_motionfree.rawp");
        TempDir dir2("moco_sim_test2");
        cmd_simulate(cfg, dir2.path.string());
        CHECK(a == slurp(dir2.path / "stack_motion.rawp"));
        CHECK(slurp(dir.path / "motion_true.csv") == slurp(dir2.path / "motion_true.csv"));
        CHECK(a != free_a);
    }
}

TEST_CASE("cmd_compensate requires a model for regressor methods") {
    TempDir dir("moco_comp_err_test");
    Config cfg = tiny_config();
    cmd_simulate(cfg, dir.path.string());
    cfg.methods = {MethodConfig{"proposed", IqmKind::regressor, -1.0}};
    CHECK_THROWS_WITH_AS(cmd_compensate(cfg, dir.path.string()), doctest::Contains("model"),
                         std::runtime_error);
}

TEST_CASE("pipeline end to end: oracle method, metrics, evaluation, determinism") {
    TempDir dir("moco_e2e_test");
    Config cfg = tiny_config();

    cmd_simulate(cfg, dir.path.string());
    cmd_compensate(cfg, dir.path.string());
    cmd_evaluate(cfg, dir.path.string());

    SUBCASE("artifacts exist and carry one metrics row per method") {
        CHECK(fs::exists(dir.path / "compensated_oracle.rawv"));
        CHECK(fs::exists(dir.path / "report_oracle.json"));
        CHECK(fs::exists(dir.path / "slice_oracle.pgm"));
        CHECK(fs::exists(dir.path / "diff_oracle.pgm"));
        std::string csv = slurp(dir.path / "metrics.csv");
        CHECK(csv.find("dataset,family,method,") != std::string::npos);
        CHECK(csv.find("tiny,in_plane,oracle,") != std::string::npos);
    }
    SUBCASE("the whole pipeline is bit-reproducible in deterministic mode") {
        std::string metrics_a = slurp(dir.path / "metrics.csv");
        std::string volume_a = slurp(dir.path / "compensated_oracle.rawv");
        TempDir dir2("moco_e2e_test2");
        cmd_simulate(cfg, dir2.path.string());
        cmd_compensate(cfg, dir2.path.string());
        cmd_evaluate(cfg, dir2.path.string());
        CHECK(metrics_a == slurp(dir2.path / "metrics.csv"));
        CHECK(volume_a == slurp(dir2.path / "compensated_oracle.rawv"));
    }
    SUBCASE("two methods produce two metric rows") {
        Config two = cfg;
        two.methods.push_back(MethodConfig{"entropy", IqmKind::entropy, 0.0});
        TempDir dir3("moco_e2e_test3");
        cmd_simulate(two, dir3.path.string());
        cmd_compensate(two, dir3.path.string());
        cmd_evaluate(two, dir3.path.string());
        std::string csv = slurp(dir3.path / "metrics.csv");
        CHECK(csv.find(",oracle,") != std::string::npos);
        CHECK(csv.find(",entropy,") != std::string::npos);
    }
}

TEST_CASE("identical volumes evaluate to an all-zero difference image") {
    TempDir dir("moco_eval_diff_test");
    Config cfg = tiny_config();
    cmd_simulate(cfg, dir.path.string());
    // fabricate a "compensated" volume identical to the reference
    cmd_compensate(cfg, dir.path.string());
    Volume ref = load_volume((dir.path / "reference.rawv").string());
    save_volume((dir.path / "compensated_oracle.rawv").string(), ref);
    cmd_evaluate(cfg, dir.path.string());
    std::string diff = slurp(dir.path / "diff_oracle.pgm");
    // all pixels must map to the window center 0 -> 32768
    size_t header_end = diff.find("65535\n") + 6;
    for (size_t i = header_end; i + 1 < diff.size(); i += 2) {
        CHECK(static_cast<unsigned char>(diff[i]) == 0x80);
        CHECK(static_cast<unsigned char>(diff[i + 1]) == 0x00);
    }
}

} // TEST_SUITE
