#include "dismax/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "dismax/errors.hpp"
#include "dismax/io_util.hpp"
#include "dismax/rng.hpp"
#include "dismax/serialize_util.hpp"

namespace dismax {

namespace {

constexpr std::uint64_t kCenterStream = 0x63656e746572ull;
constexpr std::uint64_t kPointStream = 0x706f696e7473ull;
constexpr std::uint64_t kDirectionStream = 0x646972ull;
constexpr std::uint64_t kGlyphGeometry = 0x676c797068ull;

std::uint32_t read_be32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) |
         static_cast<std::uint32_t>(p[3]);
}

void append_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

struct IdxPayload {
  std::vector<std::uint32_t> dims;
  const std::uint8_t* bytes;
  std::size_t count;
};

IdxPayload parse_idx(const std::string& blob, const std::string& path,
                     std::size_t expected_rank) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(blob.data());
  if (blob.size() < 4) throw format_error(path + ": magic truncated");
  if (p[0] != 0 || p[1] != 0) throw format_error(path + ": bad magic bytes");
  if (p[2] != 0x08) {
    throw format_error(path + ": type byte is not unsigned byte (0x08)");
  }
  const std::size_t rank = p[3];
  if (rank != expected_rank) {
    throw format_error(path + ": rank " + std::to_string(rank) +
                       ", expected " + std::to_string(expected_rank));
  }
  if (blob.size() < 4 + 4 * rank) {
    throw format_error(path + ": dims truncated");
  }
  IdxPayload out;
  std::size_t total = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    out.dims.push_back(read_be32(p + 4 + 4 * i));
    total *= out.dims.back();
  }
  if (blob.size() != 4 + 4 * rank + total) {
    throw format_error(path + ": payload truncated (expected " +
                       std::to_string(total) + " bytes, got " +
                       std::to_string(blob.size() - 4 - 4 * rank) + ")");
  }
  out.bytes = p + 4 + 4 * rank;
  out.count = total;
  return out;
}

}  // namespace

Dataset synth_blobs(std::size_t n_classes, std::size_t dim,
                    std::size_t n_per_class, double spread,
                    std::uint64_t seed) {
  if (n_classes < 2) throw config_error("synth_blobs: need >= 2 classes");
  if (dim < 2) throw config_error("synth_blobs: need dim >= 2");
  if (n_per_class < 1) throw config_error("synth_blobs: nonpositive count");
  Rng center_rng = Rng::fork(seed, kCenterStream);
  std::vector<Tensor> centers;
  for (std::size_t c = 0; c < n_classes; ++c) {
    Tensor center({dim});
    for (std::size_t i = 0; i < dim; ++i) {
      center[i] = center_rng.uniform(-2.0, 2.0);
    }
    centers.push_back(std::move(center));
  }
  Dataset ds;
  ds.name = "blobs";
  Rng rng = Rng::fork(seed, kPointStream);
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t k = 0; k < n_per_class; ++k) {
      Tensor x({dim});
      for (std::size_t i = 0; i < dim; ++i) {
        x[i] = centers[c][i] + spread * rng.normal();
      }
      ds.examples.push_back(std::move(x));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

Dataset synth_ood(std::size_t dim, std::size_t n, double offset,
                  std::uint64_t seed) {
  if (dim < 2) throw config_error("synth_ood: need dim >= 2");
  if (n < 1) throw config_error("synth_ood: nonpositive count");
  if (offset < 0.0) throw config_error("synth_ood: offset must be >= 0");
  Rng dir_rng = Rng::fork(seed, kDirectionStream);
  std::vector<double> direction(dim);
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    direction[i] = dir_rng.normal();
    norm_sq += direction[i] * direction[i];
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& d : direction) d *= inv;

  Dataset ds;
  ds.name = "synth-ood";
  ds.split_tag = "ood";
  Rng rng = Rng::fork(seed, kPointStream);
  for (std::size_t k = 0; k < n; ++k) {
    Tensor x({dim});
    for (std::size_t i = 0; i < dim; ++i) {
      x[i] = rng.normal() + offset * direction[i];
    }
    ds.examples.push_back(std::move(x));
  }
  return ds;
}

namespace {

struct Stroke {
  double cx, cy, angle, sigma_long, sigma_short;
};

// Class geometry depends only on (family, class) so separate seeds draw new
// examples of the same classes.
std::vector<Stroke> class_strokes(std::uint64_t family, std::size_t cls,
                                  std::size_t h, std::size_t w) {
  Rng rng = Rng::fork(kGlyphGeometry ^ (family * 0x9e3779b97f4a7c15ull), cls);
  const double scale = static_cast<double>(std::min(h, w));
  std::vector<Stroke> strokes(2);
  for (Stroke& s : strokes) {
    s.cx = rng.uniform(0.30, 0.70) * static_cast<double>(w);
    s.cy = rng.uniform(0.30, 0.70) * static_cast<double>(h);
    s.angle = rng.uniform(0.0, 3.14159265358979323846);
    s.sigma_long = rng.uniform(0.18, 0.30) * scale;
    s.sigma_short = rng.uniform(0.045, 0.085) * scale;
  }
  return strokes;
}

}  // namespace

Dataset synth_images(std::size_t n_classes, std::size_t height,
                     std::size_t width, std::size_t n_per_class,
                     std::uint64_t seed, std::uint64_t family) {
  if (n_classes < 2) throw config_error("synth_images: need >= 2 classes");
  if (height < 4 || width < 4) throw config_error("synth_images: image too small");
  if (n_per_class < 1) throw config_error("synth_images: nonpositive count");
  Dataset ds;
  ds.name = "glyphs";
  Rng rng = Rng::fork(seed, kPointStream ^ family);
  for (std::size_t c = 0; c < n_classes; ++c) {
    const std::vector<Stroke> strokes = class_strokes(family, c, height, width);
    for (std::size_t k = 0; k < n_per_class; ++k) {
      Tensor img({height, width, 1});
      for (const Stroke& base : strokes) {
        Stroke s = base;
        s.cx += rng.normal() * 0.035 * static_cast<double>(width);
        s.cy += rng.normal() * 0.035 * static_cast<double>(height);
        s.angle += rng.normal() * 0.06;
        const double amp = rng.uniform(0.75, 1.0);
        const double ca = std::cos(s.angle), sa = std::sin(s.angle);
        const double inv_l = 1.0 / (2.0 * s.sigma_long * s.sigma_long);
        const double inv_s = 1.0 / (2.0 * s.sigma_short * s.sigma_short);
        for (std::size_t y = 0; y < height; ++y) {
          for (std::size_t x = 0; x < width; ++x) {
            const double dx = static_cast<double>(x) - s.cx;
            const double dy = static_cast<double>(y) - s.cy;
            const double u = ca * dx + sa * dy;
            const double v = -sa * dx + ca * dy;
            img.at(y, x, 0) += amp * std::exp(-(u * u * inv_l + v * v * inv_s));
          }
        }
      }
      for (std::size_t i = 0; i < img.size(); ++i) {
        img[i] += rng.uniform(0.0, 0.06);
        if (img[i] > 1.0) img[i] = 1.0;
      }
      ds.examples.push_back(std::move(img));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  const std::string blob = read_file(images_path);
  const IdxPayload images = parse_idx(blob, images_path, 3);
  const std::size_t n = images.dims[0];
  const std::size_t h = images.dims[1];
  const std::size_t w = images.dims[2];

  Dataset ds;
  ds.name = images_path;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor img({h, w, 1});
    const std::uint8_t* src = images.bytes + i * h * w;
    for (std::size_t p = 0; p < h * w; ++p) {
      img[p] = static_cast<double>(src[p]) / 255.0;
    }
    ds.examples.push_back(std::move(img));
  }

  if (!labels_path.empty()) {
    const std::string lblob = read_file(labels_path);
    const IdxPayload labels = parse_idx(lblob, labels_path, 1);
    if (labels.dims[0] != n) {
      throw format_error(labels_path + ": label count " +
                         std::to_string(labels.dims[0]) +
                         " does not match image count " + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      ds.labels.push_back(labels.bytes[i]);
    }
  }
  return ds;
}

void write_idx(const std::string& images_path, const std::string& labels_path,
               const Dataset& dataset) {
  if (dataset.examples.empty()) throw data_error("write_idx: empty dataset");
  const Tensor& first = dataset.examples.front();
  if (first.rank() != 3 || first.dim(2) != 1) {
    throw data_error("write_idx: expected rank-3 single-channel images");
  }
  const std::size_t h = first.dim(0), w = first.dim(1);
  std::string blob;
  blob.reserve(16 + dataset.size() * h * w);
  blob.push_back(0);
  blob.push_back(0);
  blob.push_back(0x08);
  blob.push_back(3);
  append_be32(blob, static_cast<std::uint32_t>(dataset.size()));
  append_be32(blob, static_cast<std::uint32_t>(h));
  append_be32(blob, static_cast<std::uint32_t>(w));
  for (const Tensor& img : dataset.examples) {
    if (!img.same_shape(first)) {
      throw data_error("write_idx: examples have differing shapes");
    }
    for (std::size_t p = 0; p < img.size(); ++p) {
      double v = img[p];
      if (v < 0.0) v = 0.0;
      if (v > 1.0) v = 1.0;
      blob.push_back(static_cast<char>(
          static_cast<std::uint8_t>(std::lround(v * 255.0))));
    }
  }
  write_file_atomic(images_path, blob);

  if (!labels_path.empty()) {
    if (!dataset.has_labels()) {
      throw data_error("write_idx: dataset has no labels");
    }
    std::string lblob;
    lblob.push_back(0);
    lblob.push_back(0);
    lblob.push_back(0x08);
    lblob.push_back(1);
    append_be32(lblob, static_cast<std::uint32_t>(dataset.labels.size()));
    for (std::size_t label : dataset.labels) {
      if (label > 255) throw data_error("write_idx: label exceeds one byte");
      lblob.push_back(static_cast<char>(static_cast<std::uint8_t>(label)));
    }
    write_file_atomic(labels_path, lblob);
  }
}

void save_dataset(const std::string& path, const Dataset& dataset) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = "dataset";
  j["name"] = dataset.name;
  j["split_tag"] = dataset.split_tag;
  if (dataset.examples.empty()) {
    j["example_shape"] = std::vector<std::size_t>{};
    j["examples_b64"] = "";
  } else {
    const Tensor& first = dataset.examples.front();
    std::vector<double> flat;
    flat.reserve(dataset.size() * first.size());
    for (const Tensor& t : dataset.examples) {
      if (!t.same_shape(first)) {
        throw data_error("save_dataset: examples have differing shapes");
      }
      flat.insert(flat.end(), t.data(), t.data() + t.size());
    }
    j["example_shape"] = first.shape();
    j["examples_b64"] = doubles_to_b64(flat.data(), flat.size());
  }
  if (dataset.has_labels()) j["labels"] = dataset.labels;
  write_file_atomic(path, j.dump(2) + "\n");
}

Dataset load_dataset(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw format_error(path + ": " + e.what());
  }
  try {
    if (j.value("kind", "") != "dataset") {
      throw format_error(path + ": not a dataset file");
    }
    Dataset ds;
    ds.name = j.value("name", "");
    ds.split_tag = j.value("split_tag", "");
    const std::vector<std::size_t> shape =
        j.at("example_shape").get<std::vector<std::size_t>>();
    std::vector<double> flat =
        doubles_from_b64(j.at("examples_b64").get<std::string>());
    std::size_t per = 1;
    for (std::size_t d : shape) per *= d;
    if (shape.empty()) {
      if (!flat.empty()) throw format_error(path + ": payload without shape");
    } else {
      if (per == 0 || flat.size() % per != 0) {
        throw format_error(path + ": payload size mismatch");
      }
      const std::size_t n = flat.size() / per;
      for (std::size_t i = 0; i < n; ++i) {
        Tensor t = Tensor::from_vector(std::vector<double>(
            flat.begin() + static_cast<std::ptrdiff_t>(i * per),
            flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * per)));
        ds.examples.push_back(t.reshaped(shape));
      }
    }
    if (j.contains("labels")) {
      ds.labels = j.at("labels").get<std::vector<std::size_t>>();
      if (ds.labels.size() != ds.examples.size()) {
        throw format_error(path + ": label count mismatch");
      }
    }
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw format_error(path + ": " + e.what());
  }
}

}  // namespace dismax
