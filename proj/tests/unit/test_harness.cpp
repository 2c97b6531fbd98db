#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "acmloc/checkpoint.hpp"
#include "acmloc/pipeline.hpp"
#include "acmloc/plot.hpp"
#include "acmloc/synthetic.hpp"

using namespace acmloc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

SyntheticSpec small_spec() {
    SyntheticSpec s;
    s.num_videos = 24;
    s.num_test_videos = 8;
    s.num_classes = 3;
    s.half_dim = 8;
    s.min_length = 40;
    s.max_length = 50;
    s.max_instances = 1;
    s.min_instance_length = 6;
    s.max_instance_length = 10;
    s.min_context = 3;
    s.max_context = 6;
    s.seed = 21;
    return s;
}

const SyntheticDataset& small_data() {
    static const SyntheticDataset d = generate_synthetic(small_spec());
    return d;
}

TrainConfig small_config() {
    TrainConfig cfg = TrainConfig::for_profile("thumos");
    cfg.hyper.T = 32;
    cfg.hyper.C = 3;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 3;
    cfg.seed = 4;
    return cfg;
}

bool same_params(const Network<float>& a, const Network<float>& b) {
    const auto ta = a.params().tensors();
    const auto tb = b.params().tensors();
    for (std::size_t i = 0; i < ta.size(); ++i)
        if (*ta[i] != *tb[i]) return false;
    return true;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("acmloc_harness_" + name);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("config profiles, overrides and validation") {
    const auto th = TrainConfig::for_profile("thumos");
    CHECK(th.hyper.T == 750);
    CHECK(th.batch_size == 16);
    const auto an = TrainConfig::for_profile("activitynet");
    CHECK(an.hyper.T == 75);
    CHECK(an.batch_size == 64);
    CHECK_THROWS_AS(TrainConfig::for_profile("kinetics"), ValidationError);

    json doc = json::object();
    apply_override(doc, "hyper.margin=7.5");
    apply_override(doc, "losses.feat=false");
    apply_override(doc, "data.feature_dir=/tmp/x");
    apply_override(doc, "train.epochs=12");
    const TrainConfig cfg = config_from_json(doc);
    CHECK(cfg.hyper.margin == 7.5);
    CHECK_FALSE(cfg.flags.feat);
    CHECK(cfg.feature_dir == "/tmp/x");
    CHECK(cfg.epochs == 12);
    CHECK_THROWS_AS(apply_override(doc, "novalue"), ValidationError);
    CHECK_THROWS_AS(apply_override(doc, "a..b=1"), ValidationError);

    // Serialized config reproduces itself.
    CHECK(config_to_json(config_from_json(config_to_json(cfg))) == config_to_json(cfg));

    CHECK_THROWS_AS(config_from_json(json{{"train", {{"learning_rate", 0}}}}), ValidationError);
    CHECK_THROWS_AS(config_from_json(json{{"hyper", {{"r_ins", 0}}}}), ValidationError);
    CHECK_THROWS_AS(config_from_json(json{{"train", {{"epochs", "many"}}}}), ParseError);
    CHECK_THROWS_AS(config_from_json(json{{"arch", {{"padding", "reflect"}}}}), ParseError);
    CHECK_THROWS_AS(config_from_json(json::array()), ParseError);
}

TEST_CASE("one epoch over 16 videos with batch 16 is one step") {
    TrainConfig cfg = small_config();
    cfg.epochs = 1;
    const Dataset train_set = small_data().dataset.subset("train");
    REQUIRE(train_set.size() == 16);
    const auto r = train(cfg, train_set);
    REQUIRE(r.steps.size() == 1);
    CHECK(r.steps[0].batch_videos == 16);
    cfg.batch_size = 5;
    CHECK(train(cfg, train_set).steps.size() == 4);
}

TEST_CASE("training is deterministic and the loss goes down") {
    TrainConfig cfg = small_config();
    cfg.epochs = 20;
    const Dataset train_set = small_data().dataset.subset("train");
    std::ostringstream log1, log2;
    const auto a = train(cfg, train_set, &log1);
    const auto b = train(cfg, train_set, &log2);
    CHECK(same_params(a.network, b.network));
    CHECK(log1.str() == log2.str());
    REQUIRE(a.epoch_loss.size() == 20);
    CHECK(a.epoch_loss.back().total < a.epoch_loss.front().total);

    // Every log line is a JSON object carrying the step and the total.
    std::istringstream lines(log1.str());
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        const auto j = json::parse(line);
        CHECK(j.contains("step"));
        ++n;
    }
    CHECK(n == static_cast<int>(a.steps.size()));

    cfg.seed = 5;
    CHECK_FALSE(same_params(train(cfg, train_set).network, a.network));
}

TEST_CASE("non-finite loss raises a training error") {
    Dataset bad = small_data().dataset.subset("train");
    bad.features[3].features(2, 1) = std::numeric_limits<float>::quiet_NaN();
    TrainConfig cfg = small_config();
    cfg.epochs = 1;
    CHECK_THROWS_AS(train(cfg, bad), TrainingError);
}

TEST_CASE("checkpoint round trip gives bit-identical inference") {
    TrainConfig cfg = small_config();
    const auto r = train(cfg, small_data().dataset.subset("train"));
    const fs::path path = scratch("ckpt") / "m.acmc";
    save_checkpoint(path, {r.network, 6, config_to_json(cfg)});
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.step == 6);
    CHECK(back.config == config_to_json(cfg));
    CHECK(same_params(back.network, r.network));

    const Dataset test_set = small_data().dataset.subset("test");
    const auto d1 = detections_to_json(infer(r.network, cfg.hyper, test_set), test_set.class_names);
    const auto d2 = detections_to_json(infer(back.network, cfg.hyper, test_set), test_set.class_names);
    CHECK(d1.dump() == d2.dump());

    std::ofstream(path, std::ios::binary | std::ios::app) << "x";
    CHECK_THROWS_AS(load_checkpoint(path), LoadError);
    std::ofstream(path, std::ios::binary) << "ACMX";
    CHECK_THROWS_AS(load_checkpoint(path), LoadError);
    CHECK_THROWS_AS(load_checkpoint(scratch("ckpt") / "missing.acmc"), LoadError);
}

TEST_CASE("inference: detections per test video, alpha changes confidences") {
    TrainConfig cfg = small_config();
    cfg.epochs = 10;
    const auto r = train(cfg, small_data().dataset.subset("train"));
    const Dataset test_set = small_data().dataset.subset("test");
    HyperParams hp = cfg.hyper;
    hp.alpha = 0.0;
    const auto a0 = infer(r.network, hp, test_set);
    hp.alpha = 0.5;
    const auto a5 = infer(r.network, hp, test_set);
    CHECK(a0.size() == test_set.size());
    std::size_t total = 0;
    bool differs = false;
    for (const auto& [vid, dets] : a5) {
        total += dets.size();
        for (const auto& d : dets) {
            CHECK(d.start_s >= 0.0);
            CHECK(d.end_s > d.start_s);
            CHECK(d.end_s <= test_set.records[*test_set.find(vid)].duration_s + 1e-9);
        }
        const auto& other = a0.at(vid);
        if (other.size() != dets.size()) differs = true;
        for (std::size_t i = 0; i < std::min(other.size(), dets.size()); ++i)
            differs = differs || other[i].confidence != dets[i].confidence;
    }
    CHECK(total > 0);
    CHECK(differs);
    CHECK(detections_to_json(infer(r.network, hp, test_set), test_set.class_names) ==
          detections_to_json(a5, test_set.class_names));
}

TEST_CASE("run_experiment evaluates the trained model") {
    TrainConfig cfg = small_config();
    const auto res = run_experiment(cfg, small_data().dataset.subset("train"), small_data().dataset.subset("test"));
    CHECK(res.report.map_at.size() == cfg.hyper.tiou_grid.size());
    CHECK(res.training.epoch_loss.size() == 3);
}

TEST_CASE("ablation presets and matrices") {
    CHECK(matrix_preset("table3").cells.size() == 5);
    CHECK(matrix_preset("table4").cells.size() == 4);
    CHECK(matrix_preset("table5").cells.size() == 6);
    const auto t6 = matrix_preset("table6");
    REQUIRE(t6.cells.size() == 5);
    std::vector<int> Ts;
    for (const auto& c : t6.cells) Ts.push_back(*c.T);
    CHECK(Ts == std::vector<int>{250, 500, 750, 900, 1000});
    CHECK_THROWS_AS(matrix_preset("table9"), ValidationError);
    CHECK(matrix_from_json(json{{"preset", "table4"}}).cells.size() == 4);

    const auto m = matrix_from_json(json::parse(R"({"cells":[{"name":"a","losses":{"feat":false}},
                                                             {"name":"a again","losses":{"feat":false}},
                                                             {"name":"short","T":16}]})"));
    REQUIRE(m.cells.size() == 3);
    CHECK_FALSE(m.cells[0].flags.feat);
    CHECK(m.cells[0].flags.cls_con);
    CHECK(*m.cells[2].T == 16);

    TrainConfig cfg = small_config();
    cfg.epochs = 2;
    const Dataset tr = small_data().dataset.subset("train"), te = small_data().dataset.subset("test");
    const auto rows = run_ablation_matrix(cfg, m, tr, te);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].name == "a");
    CHECK(rows[0].report.to_json({}).dump() == rows[1].report.to_json({}).dump());
    const std::string table = ablation_table(rows);
    CHECK(table.find("a again") != std::string::npos);
    CHECK(ablation_json(rows, te.class_names).size() == 3);

    CHECK(run_ablation_matrix(cfg, MatrixSpec{}, tr, te).empty());
}

TEST_CASE("traces: T rows, zero-init attention is uniform") {
    const auto& data = small_data();
    const Dataset test_set = data.dataset.subset("test");
    HyperParams hp = small_config().hyper;
    const Network<float> net = Network<float>::create(test_set.feature_dim(), 3, ArchConfig{}, 1, InitScheme::zero);
    const Traces tr = collect_traces(net, hp, test_set.features[0].features, test_set.records[0], test_set.class_names);
    CHECK(tr.time_s.size() == 32);
    const TraceSeries* att = nullptr;
    for (const auto& s : tr.series)
        if (s.name == "att_ins") att = &s;
    REQUIRE(att != nullptr);
    for (double v : att->values) CHECK(v == doctest::Approx(1.0 / 3.0));
    CHECK(tr.series.front().name.rfind("cas_", 0) == 0);
    for (std::size_t i = 1; i < tr.time_s.size(); ++i) CHECK(tr.time_s[i] > tr.time_s[i - 1]);

    const fs::path dir = scratch("plot");
    write_traces_csv(dir / "t.csv", tr);
    write_traces_svg(dir / "t.svg", tr, "video");
    std::ifstream csv(dir / "t.csv");
    std::string line;
    int rows = 0;
    std::getline(csv, line);
    CHECK(line.rfind("time_s,", 0) == 0);
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 32);
    std::ifstream svg(dir / "t.svg");
    std::getline(svg, line);
    CHECK(line.find("<svg") != std::string::npos);
}
