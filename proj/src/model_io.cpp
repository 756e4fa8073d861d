#include "foclab/model_io.hpp"

#include <fstream>
#include <json.hpp>

#include "foclab/errors.hpp"

namespace foclab {

namespace {

using nlohmann::json;

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
    }
    return "identity";
}

Activation activation_from(const std::string& s) {
    if (s == "identity") return Activation::Identity;
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    throw ConfigError("model json: unknown activation '" + s + "'");
}

json layer_to_json(const Layer& l) {
    json j;
    j["in_width"] = l.spec.in_width;
    j["out_width"] = l.spec.out_width;
    j["activation"] = activation_name(l.spec.activation);
    if (l.spec.residual_from) j["residual_from"] = *l.spec.residual_from;
    j["w"] = l.w;
    j["b"] = l.b;
    return j;
}

Layer layer_from_json(const json& j) {
    Layer l;
    l.spec.in_width = j.at("in_width").get<int>();
    l.spec.out_width = j.at("out_width").get<int>();
    l.spec.activation = activation_from(j.at("activation").get<std::string>());
    if (j.contains("residual_from")) {
        l.spec.residual_from = j.at("residual_from").get<int>();
    }
    l.w = j.at("w").get<std::vector<double>>();
    l.b = j.at("b").get<std::vector<double>>();
    return l;
}

}  // namespace

std::string model_to_json(const TinyFCModel& model) {
    json j;
    j["arch_version"] = model.arch_version;
    json branches = json::array();
    for (const auto& br : model.branches) {
        json jb = json::array();
        for (const auto& l : br) jb.push_back(layer_to_json(l));
        branches.push_back(jb);
    }
    j["branches"] = branches;
    j["merge"] = layer_to_json(model.merge);
    j["input_norm"] = {{"mean", model.input_norm.mean},
                       {"std", model.input_norm.std},
                       {"fitted", model.input_norm.fitted}};
    j["target_scale"] = model.target_scale;
    j["param_count"] = model.param_count();
    return j.dump(2) + "\n";
}

TinyFCModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model json: parse error: ") + e.what());
    }
    TinyFCModel m;
    try {
        m.arch_version = j.at("arch_version").get<std::string>();
        for (const auto& jb : j.at("branches")) {
            std::vector<Layer> br;
            for (const auto& jl : jb) br.push_back(layer_from_json(jl));
            m.branches.push_back(std::move(br));
        }
        m.merge = layer_from_json(j.at("merge"));
        const auto& n = j.at("input_norm");
        m.input_norm.mean = n.at("mean").get<std::array<double, 3>>();
        m.input_norm.std = n.at("std").get<std::array<double, 3>>();
        m.input_norm.fitted = n.at("fitted").get<bool>();
        m.target_scale = j.at("target_scale").get<double>();
        const auto stored = j.at("param_count").get<std::size_t>();
        if (stored != m.param_count()) {
            throw ConfigError("model json: param_count does not match weights");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model json: missing field: ") + e.what());
    }
    m.validate();
    return m;
}

namespace {

json act_quant_to_json(const ActQuant& a) {
    return {{"scale", a.scale},
            {"zero_point", a.zero_point},
            {"min", a.min},
            {"max", a.max}};
}

ActQuant act_quant_from_json(const json& j) {
    ActQuant a;
    a.scale = j.at("scale").get<double>();
    a.zero_point = j.at("zero_point").get<int>();
    a.min = j.at("min").get<double>();
    a.max = j.at("max").get<double>();
    return a;
}

json qlayer_to_json(const QuantLayer& l) {
    json j;
    j["in_width"] = l.spec.in_width;
    j["out_width"] = l.spec.out_width;
    j["activation"] = activation_name(l.spec.activation);
    if (l.spec.residual_from) j["residual_from"] = *l.spec.residual_from;
    j["w"] = std::vector<int>(l.weights.codes.begin(), l.weights.codes.end());
    j["w_scale"] = l.weights.scale;
    j["bias"] = l.bias;
    j["out_quant"] = act_quant_to_json(l.out);
    return j;
}

QuantLayer qlayer_from_json(const json& j) {
    QuantLayer l;
    l.spec.in_width = j.at("in_width").get<int>();
    l.spec.out_width = j.at("out_width").get<int>();
    l.spec.activation = activation_from(j.at("activation").get<std::string>());
    if (j.contains("residual_from")) {
        l.spec.residual_from = j.at("residual_from").get<int>();
    }
    for (int v : j.at("w").get<std::vector<int>>()) {
        if (v < -128 || v > 127) throw ConfigError("qmodel json: weight code out of range");
        l.weights.codes.push_back(static_cast<std::int8_t>(v));
    }
    l.weights.scale = j.at("w_scale").get<double>();
    l.bias = j.at("bias").get<std::vector<std::int32_t>>();
    l.out = act_quant_from_json(j.at("out_quant"));
    return l;
}

}  // namespace

std::string qmodel_to_json(const QuantizedModel& model) {
    json j;
    j["arch_version"] = model.arch_version;
    j["input_norm"] = {{"mean", model.input_norm.mean},
                       {"std", model.input_norm.std},
                       {"fitted", model.input_norm.fitted}};
    j["input_quant"] = act_quant_to_json(model.input_q);
    json branches = json::array();
    for (const auto& br : model.branches) {
        json jb = json::array();
        for (const auto& l : br) jb.push_back(qlayer_to_json(l));
        branches.push_back(jb);
    }
    j["branches"] = branches;
    j["merge"] = qlayer_to_json(model.merge);
    j["target_scale"] = model.target_scale;
    j["original_param_count"] = model.original_param_count;
    j["float_error_bound"] = model.float_error_bound;
    return j.dump(2) + "\n";
}

QuantizedModel qmodel_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("qmodel json: parse error: ") + e.what());
    }
    QuantizedModel m;
    try {
        m.arch_version = j.at("arch_version").get<std::string>();
        const auto& n = j.at("input_norm");
        m.input_norm.mean = n.at("mean").get<std::array<double, 3>>();
        m.input_norm.std = n.at("std").get<std::array<double, 3>>();
        m.input_norm.fitted = n.at("fitted").get<bool>();
        m.input_q = act_quant_from_json(j.at("input_quant"));
        for (const auto& jb : j.at("branches")) {
            std::vector<QuantLayer> br;
            for (const auto& jl : jb) br.push_back(qlayer_from_json(jl));
            m.branches.push_back(std::move(br));
        }
        m.merge = qlayer_from_json(j.at("merge"));
        m.target_scale = j.at("target_scale").get<double>();
        m.original_param_count = j.at("original_param_count").get<std::size_t>();
        m.float_error_bound = j.at("float_error_bound").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("qmodel json: missing field: ") + e.what());
    }
    return m;
}

void save_qmodel(const QuantizedModel& model, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for writing: " + path.string());
    f << qmodel_to_json(model);
    if (!f.good()) throw Error("write failed: " + path.string());
}

QuantizedModel load_qmodel(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for reading: " + path.string());
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    return qmodel_from_json(text);
}

void save_model(const TinyFCModel& model, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for writing: " + path.string());
    f << model_to_json(model);
    if (!f.good()) throw Error("write failed: " + path.string());
}

TinyFCModel load_model(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for reading: " + path.string());
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    return model_from_json(text);
}

}  // namespace foclab
