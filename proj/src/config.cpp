#include "acmloc/config.hpp"

#include <fstream>

namespace acmloc {

using nlohmann::json;

void TrainConfig::validate() const {
    hyper.validate();
    if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
    if (!(learning_rate > 0)) throw ValidationError("config: learning_rate must be > 0");
    if (!(weight_decay >= 0)) throw ValidationError("config: weight_decay must be >= 0");
    if (epochs < 0) throw ValidationError("config: epochs must be >= 0");
    if (checkpoint_every < 0) throw ValidationError("config: checkpoint_every must be >= 0");
}

TrainConfig TrainConfig::for_profile(const std::string& profile) {
    TrainConfig cfg;
    cfg.profile = profile;
    if (profile == "thumos") {
        cfg.hyper = HyperParams::thumos();
        cfg.batch_size = 16;
        cfg.weight_decay = 5e-4;
    } else if (profile == "activitynet") {
        cfg.hyper = HyperParams::activitynet();
        cfg.batch_size = 64;
        cfg.weight_decay = 1e-3;
    } else {
        throw ValidationError("config: unknown profile '" + profile + "'");
    }
    cfg.learning_rate = 1e-4;
    return cfg;
}

namespace {

template <class T>
void read(const json& obj, const char* key, T& dst, const std::string& section) {
    if (!obj.contains(key)) return;
    try {
        dst = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError("config: bad value for '" + section + "." + key + "': " + e.what());
    }
}

const json& section(const json& doc, const char* name) {
    static const json kEmpty = json::object();
    if (!doc.contains(name)) return kEmpty;
    const json& s = doc.at(name);
    if (!s.is_object()) throw ParseError(std::string("config: section '") + name + "' must be an object");
    return s;
}

Padding padding_from(const std::string& s) {
    if (s == "zero") return Padding::zero;
    if (s == "circular") return Padding::circular;
    throw ParseError("config: unknown padding '" + s + "'");
}

ResampleMode resample_from(const std::string& s) {
    if (s == "linear") return ResampleMode::linear;
    if (s == "nearest") return ResampleMode::nearest;
    throw ParseError("config: unknown resample mode '" + s + "'");
}

InitScheme init_from(const std::string& s) {
    if (s == "fan_in_uniform") return InitScheme::fan_in_uniform;
    if (s == "zero") return InitScheme::zero;
    throw ParseError("config: unknown init scheme '" + s + "'");
}

}  // namespace

TrainConfig config_from_json(const json& doc) {
    if (!doc.is_object()) throw ParseError("config: top level must be an object");
    std::string profile = "thumos";
    read(doc, "profile", profile, "<root>");
    TrainConfig cfg = TrainConfig::for_profile(profile);

    const json& h = section(doc, "hyper");
    HyperParams& hp = cfg.hyper;
    read(h, "T", hp.T, "hyper");
    read(h, "C", hp.C, "hyper");
    read(h, "r_ins", hp.r_ins, "hyper");
    read(h, "r_con", hp.r_con, "hyper");
    read(h, "r_bak", hp.r_bak, "hyper");
    read(h, "lambda_guide", hp.lambda_guide, "hyper");
    read(h, "lambda_feat", hp.lambda_feat, "hyper");
    read(h, "lambda_sparse", hp.lambda_sparse, "hyper");
    read(h, "margin", hp.margin, "hyper");
    read(h, "alpha", hp.alpha, "hyper");
    read(h, "class_threshold", hp.class_threshold, "hyper");
    read(h, "proposal_thresholds", hp.proposal_thresholds, "hyper");
    read(h, "nms_iou", hp.nms_iou, "hyper");
    read(h, "tiou_grid", hp.tiou_grid, "hyper");

    const json& a = section(doc, "arch");
    read(a, "embed_kernel", cfg.arch.embed_kernel, "arch");
    read(a, "hidden_kernel", cfg.arch.hidden_kernel, "arch");
    read(a, "hidden_width", cfg.arch.hidden_width, "arch");
    read(a, "dropout", cfg.arch.dropout, "arch");
    std::string padding = "zero";
    read(a, "padding", padding, "arch");
    cfg.arch.padding = padding_from(padding);

    const json& l = section(doc, "losses");
    read(l, "cls_ins", cfg.flags.cls_ins, "losses");
    read(l, "cls_con", cfg.flags.cls_con, "losses");
    read(l, "cls_bak", cfg.flags.cls_bak, "losses");
    read(l, "guide", cfg.flags.guide, "losses");
    read(l, "feat", cfg.flags.feat, "losses");
    read(l, "sparse", cfg.flags.sparse, "losses");

    const json& t = section(doc, "train");
    read(t, "batch_size", cfg.batch_size, "train");
    read(t, "learning_rate", cfg.learning_rate, "train");
    read(t, "weight_decay", cfg.weight_decay, "train");
    read(t, "epochs", cfg.epochs, "train");
    read(t, "seed", cfg.seed, "train");
    read(t, "checkpoint_every", cfg.checkpoint_every, "train");
    std::string resample = "linear", init = "fan_in_uniform";
    read(t, "resample", resample, "train");
    read(t, "init", init, "train");
    cfg.resample = resample_from(resample);
    cfg.init = init_from(init);

    const json& d = section(doc, "data");
    read(d, "feature_dir", cfg.feature_dir, "data");
    read(d, "annotation_file", cfg.annotation_file, "data");
    read(d, "train_subset", cfg.train_subset, "data");
    read(d, "test_subset", cfg.test_subset, "data");

    const json& o = section(doc, "output");
    read(o, "checkpoint", cfg.checkpoint_path, "output");
    read(o, "log", cfg.log_path, "output");
    read(o, "detections", cfg.detections_path, "output");
    read(o, "report", cfg.report_path, "output");

    cfg.validate();
    return cfg;
}

json config_to_json(const TrainConfig& cfg) {
    const HyperParams& hp = cfg.hyper;
    return {
        {"profile", cfg.profile},
        {"hyper",
         {{"T", hp.T},
          {"C", hp.C},
          {"r_ins", hp.r_ins},
          {"r_con", hp.r_con},
          {"r_bak", hp.r_bak},
          {"lambda_guide", hp.lambda_guide},
          {"lambda_feat", hp.lambda_feat},
          {"lambda_sparse", hp.lambda_sparse},
          {"margin", hp.margin},
          {"alpha", hp.alpha},
          {"class_threshold", hp.class_threshold},
          {"proposal_thresholds", hp.proposal_thresholds},
          {"nms_iou", hp.nms_iou},
          {"tiou_grid", hp.tiou_grid}}},
        {"arch",
         {{"embed_kernel", cfg.arch.embed_kernel},
          {"hidden_kernel", cfg.arch.hidden_kernel},
          {"hidden_width", cfg.arch.hidden_width},
          {"dropout", cfg.arch.dropout},
          {"padding", cfg.arch.padding == Padding::zero ? "zero" : "circular"}}},
        {"losses",
         {{"cls_ins", cfg.flags.cls_ins},
          {"cls_con", cfg.flags.cls_con},
          {"cls_bak", cfg.flags.cls_bak},
          {"guide", cfg.flags.guide},
          {"feat", cfg.flags.feat},
          {"sparse", cfg.flags.sparse}}},
        {"train",
         {{"batch_size", cfg.batch_size},
          {"learning_rate", cfg.learning_rate},
          {"weight_decay", cfg.weight_decay},
          {"epochs", cfg.epochs},
          {"seed", cfg.seed},
          {"checkpoint_every", cfg.checkpoint_every},
          {"resample", cfg.resample == ResampleMode::linear ? "linear" : "nearest"},
          {"init", cfg.init == InitScheme::zero ? "zero" : "fan_in_uniform"}}},
        {"data",
         {{"feature_dir", cfg.feature_dir},
          {"annotation_file", cfg.annotation_file},
          {"train_subset", cfg.train_subset},
          {"test_subset", cfg.test_subset}}},
        {"output",
         {{"checkpoint", cfg.checkpoint_path},
          {"log", cfg.log_path},
          {"detections", cfg.detections_path},
          {"report", cfg.report_path}}},
    };
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &doc;
    std::size_t pos = 0;
    while (true) {
        const auto dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (part.empty()) throw ValidationError("override '" + assignment + "' has an empty path component");
        if (!node->is_object()) *node = json::object();
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        pos = dot + 1;
    }
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("'" + path.string() + "': " + e.what());
    }
}

TrainConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    json doc = path.empty() ? json::object() : read_json_file(path);
    for (const auto& o : overrides) apply_override(doc, o);
    return config_from_json(doc);
}

}  // namespace acmloc
