#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "volmap/error.hpp"
#include "volmap/runconfig.hpp"

using namespace volmap;
using nlohmann::json;

TEST_SUITE("runconfig") {

TEST_CASE("empty object resolves to pure defaults") {
    RunConfig cfg = run_config_from_json(json::object());
    CHECK(cfg.seed == 1);
    CHECK(cfg.grid.x_range.first == -30.0);
    CHECK(cfg.grid.n_layers == 10);
    CHECK(cfg.net.in_channels == 10);
    CHECK(cfg.net.n_classes == 6);
    CHECK(cfg.net.base_channels == 16);
    CHECK(cfg.train.epochs == 300);
    CHECK(cfg.train.lr == 1e-4);
    CHECK(cfg.train.batch == 16);
    CHECK(cfg.train.momentum == 0.0);
    CHECK(cfg.spherical.n_layers == 80);
    CHECK(cfg.spherical.n_angles == 600);
    CHECK(cfg.data.frames_dir.empty());
    CHECK(!cfg.class_frequencies.has_value());
}

TEST_CASE("unknown keys are rejected with their pointer") {
    json j = {{"grid", {{"res_z", 0.4}}}};
    CHECK_THROWS_WITH_AS(run_config_from_json(j),
                         doctest::Contains("/grid/res_z"), ConfigError);
    json top = {{"gird", json::object()}};
    CHECK_THROWS_WITH_AS(run_config_from_json(top), doctest::Contains("/gird"),
                         ConfigError);
    json deep = {{"train", {{"lr", 1e-3}, {"decay", 0.1}}}};
    CHECK_THROWS_WITH_AS(run_config_from_json(deep),
                         doctest::Contains("/train/decay"), ConfigError);
}

TEST_CASE("type mismatches carry the offending path") {
    json j = {{"grid", {{"res_x", "fast"}}}};
    CHECK_THROWS_WITH_AS(run_config_from_json(j),
                         doctest::Contains("/grid/res_x"), ConfigError);
    json arr = {{"grid", {{"x_range", {1.0}}}}};
    CHECK_THROWS_WITH_AS(run_config_from_json(arr),
                         doctest::Contains("/grid/x_range"), ConfigError);
    json frac = {{"net", {{"n_classes", 2.5}}}};
    CHECK_THROWS_WITH_AS(run_config_from_json(frac),
                         doctest::Contains("/net/n_classes"), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(json::array()), ConfigError);
}

TEST_CASE("invalid values are rejected where validation fires") {
    json j = {{"grid", {{"res_x", -0.4}}}};
    CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
    json m = {{"train", {{"momentum", 1.0}}}};
    CHECK_THROWS_WITH_AS(run_config_from_json(m),
                         doctest::Contains("/train/momentum"), ConfigError);
    json s = {{"seed", -3}};
    CHECK_THROWS_WITH_AS(run_config_from_json(s), doctest::Contains("/seed"),
                         ConfigError);
}

TEST_CASE("net input width is coupled to the grid layer count") {
    json agree = {{"grid", {{"n_layers", 4}}},
                  {"net", {{"in_channels", 4}, {"n_classes", 3}}}};
    RunConfig cfg = run_config_from_json(agree);
    CHECK(cfg.net.in_channels == 4);

    json silent = {{"grid", {{"n_layers", 7}}}};
    CHECK(run_config_from_json(silent).net.in_channels == 7);

    json conflict = {{"grid", {{"n_layers", 4}}}, {"net", {{"in_channels", 10}}}};
    CHECK_THROWS_WITH_AS(run_config_from_json(conflict),
                         doctest::Contains("/net/in_channels"), ConfigError);
}

TEST_CASE("class frequency list must match the class count") {
    json ok = {{"net", {{"n_classes", 3}}},
               {"class_frequencies", {0.9, 0.07, 0.03}}};
    RunConfig cfg = run_config_from_json(ok);
    REQUIRE(cfg.class_frequencies.has_value());
    CHECK(cfg.class_frequencies->size() == 3);
    CHECK((*cfg.class_frequencies)[1] == 0.07);

    json wrong = {{"net", {{"n_classes", 3}}}, {"class_frequencies", {0.9, 0.1}}};
    CHECK_THROWS_WITH_AS(run_config_from_json(wrong),
                         doctest::Contains("/class_frequencies"), ConfigError);

    json bad_entry = {{"class_frequencies", {0.9, "x", 0.03, 0, 0, 0}}};
    CHECK_THROWS_WITH_AS(run_config_from_json(bad_entry),
                         doctest::Contains("/class_frequencies/1"), ConfigError);

    json null_freq = {{"class_frequencies", nullptr}};
    CHECK(!run_config_from_json(null_freq).class_frequencies.has_value());
}

TEST_CASE("grid overrides parse and null clears the shape override") {
    json j = {{"grid",
               {{"x_range", {-30.0, 30.0}},
                {"y_range", {-22.5, 22.5}},
                {"n_layers", 10},
                {"shape_override", {160, 112}}}}};
    RunConfig cfg = run_config_from_json(j);
    REQUIRE(cfg.grid.shape_override.has_value());
    CHECK(cfg.grid.rows() == 160);
    CHECK(cfg.grid.cols() == 112);

    json cleared = {{"grid", {{"shape_override", nullptr}}}};
    CHECK(!run_config_from_json(cleared).grid.shape_override.has_value());

    json bad = {{"grid", {{"shape_override", {160.5, 112}}}}};
    CHECK_THROWS_WITH_AS(run_config_from_json(bad),
                         doctest::Contains("/grid/shape_override"), ConfigError);
}

TEST_CASE("resolved echo reparses to the identical echo") {
    json j = {{"seed", 17},
              {"grid", {{"n_layers", 4}, {"res_x", 0.2}, {"shape_override", {16, 16}}}},
              {"net", {{"n_classes", 3}, {"base_channels", 8}}},
              {"train", {{"epochs", 5}, {"lr", 1e-3}, {"batch", 2}, {"momentum", 0.9}}},
              {"spherical", {{"n_layers", 16}, {"n_angles", 120}}},
              {"data", {{"frames_dir", "frames"}, {"elev_range", {-0.3, 0.1}}}},
              {"class_frequencies", {0.5, 0.25, 0.25}}};
    RunConfig cfg = run_config_from_json(j);
    const json echo = resolved_json(cfg);
    CHECK(echo.at("seed") == 17);
    CHECK(echo.at("net").at("in_channels") == 4);
    CHECK(echo.at("train").at("momentum") == 0.9);
    CHECK(echo.at("spherical").at("n_angles") == 120);

    RunConfig reparsed = run_config_from_json(echo);
    CHECK(resolved_json(reparsed) == echo);

    // Defaults materialize fully: the echo of an empty config carries every key.
    const json full = resolved_json(run_config_from_json(json::object()));
    for (const char* key :
         {"seed", "grid", "net", "train", "spherical", "data", "class_frequencies"})
        CHECK(full.contains(key));
    CHECK(resolved_json(run_config_from_json(full)) == full);
}

TEST_CASE("config files load from disk with parse errors wrapped") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "volmap_runconfig_tests";
    fs::create_directories(dir);

    const fs::path good = dir / "good.json";
    std::ofstream(good) << R"({"seed": 9, "grid": {"n_layers": 4}})";
    RunConfig cfg = load_run_config(good.string());
    CHECK(cfg.seed == 9);
    CHECK(cfg.net.in_channels == 4);

    const fs::path bad = dir / "bad.json";
    std::ofstream(bad) << "{ not json";
    CHECK_THROWS_AS(load_run_config(bad.string()), ParseError);
    CHECK_THROWS_AS(load_run_config((dir / "absent.json").string()), Error);
}

}  // TEST_SUITE
