#include "dismax/checkpoint.hpp"

#include <json.hpp>

#include "dismax/errors.hpp"
#include "dismax/io_util.hpp"
#include "dismax/serialize_util.hpp"

namespace dismax {

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json j;
  j["format_version"] = ckpt.format_version;
  j["loss_kind"] = ckpt.loss_kind;
  j["layer_dims"] = ckpt.extractor.layer_dims;
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < ckpt.extractor.layer_count(); ++l) {
    nlohmann::json layer;
    layer["w"] = tensor_to_json(ckpt.extractor.weights[l]);
    layer["b"] = tensor_to_json(ckpt.extractor.biases[l]);
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  if (ckpt.is_dismax()) {
    j["head"] = {
        {"prototypes", tensor_to_json(ckpt.head.prototypes)},
        {"distance_scale", ckpt.head.distance_scale},
        {"entropic_scale", ckpt.head.entropic_scale},
        {"temperature", ckpt.head.temperature},
    };
  } else {
    j["classifier"] = {
        {"w", tensor_to_json(ckpt.classifier_w)},
        {"b", tensor_to_json(ckpt.classifier_b)},
    };
  }
  if (ckpt.calibration) {
    j["calibration"] = {
        {"t_star", ckpt.calibration->t_star},
        {"ece_before", ckpt.calibration->ece_before},
        {"ece_after", ckpt.calibration->ece_after},
        {"evaluations", ckpt.calibration->evaluations},
        {"bins", ckpt.calibration->bins},
    };
  }
  j["meta"] = {
      {"seed", ckpt.seed},
      {"epochs", ckpt.epochs},
      {"config_hash", ckpt.config_hash},
  };
  write_file_atomic(path, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw format_error(path + ": " + e.what());
  }
  try {
    Checkpoint ckpt;
    ckpt.format_version = j.at("format_version").get<int>();
    if (ckpt.format_version != 1) {
      throw format_error(path + ": unsupported format_version");
    }
    ckpt.loss_kind = j.at("loss_kind").get<std::string>();
    ckpt.extractor.layer_dims =
        j.at("layer_dims").get<std::vector<std::size_t>>();
    for (const auto& layer : j.at("layers")) {
      ckpt.extractor.weights.push_back(tensor_from_json(layer.at("w")));
      ckpt.extractor.biases.push_back(tensor_from_json(layer.at("b")));
    }
    if (ckpt.is_dismax()) {
      const auto& h = j.at("head");
      ckpt.head.prototypes = tensor_from_json(h.at("prototypes"));
      ckpt.head.distance_scale = h.at("distance_scale").get<double>();
      ckpt.head.entropic_scale = h.at("entropic_scale").get<double>();
      ckpt.head.temperature = h.at("temperature").get<double>();
    } else {
      const auto& c = j.at("classifier");
      ckpt.classifier_w = tensor_from_json(c.at("w"));
      ckpt.classifier_b = tensor_from_json(c.at("b"));
    }
    if (j.contains("calibration")) {
      const auto& c = j.at("calibration");
      CalibrationResult cal;
      cal.t_star = c.at("t_star").get<double>();
      cal.ece_before = c.at("ece_before").get<double>();
      cal.ece_after = c.at("ece_after").get<double>();
      cal.evaluations = c.at("evaluations").get<std::size_t>();
      cal.bins = c.at("bins").get<std::size_t>();
      ckpt.calibration = cal;
    }
    const auto& meta = j.at("meta");
    ckpt.seed = meta.at("seed").get<std::uint64_t>();
    ckpt.epochs = meta.at("epochs").get<std::size_t>();
    ckpt.config_hash = meta.at("config_hash").get<std::string>();
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw format_error(path + ": " + e.what());
  }
}

}  // namespace dismax
