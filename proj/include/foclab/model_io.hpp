#pragma once

#include <filesystem>
#include <string>

#include "foclab/quant.hpp"
#include "foclab/tinyfc.hpp"

namespace foclab {

// JSON model files round-trip bit-exactly: doubles are emitted in shortest
// round-trip form and keys are emitted in sorted order, so save(load(x))
// reproduces x byte for byte.
std::string model_to_json(const TinyFCModel& model);
TinyFCModel model_from_json(const std::string& text);

void save_model(const TinyFCModel& model, const std::filesystem::path& path);
TinyFCModel load_model(const std::filesystem::path& path);

std::string qmodel_to_json(const QuantizedModel& model);
QuantizedModel qmodel_from_json(const std::string& text);

void save_qmodel(const QuantizedModel& model, const std::filesystem::path& path);
QuantizedModel load_qmodel(const std::filesystem::path& path);

}  // namespace foclab
