#include "corrsim/export.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "corrsim/error.hpp"
#include "corrsim/serialize.hpp"

namespace corrsim {

CanvasMapping canvas_mapping(int native_width, int native_height, int size) {
  if (size <= 0) return {native_width, native_height, 0, 0};
  return {size, size, (size - native_width) / 2, (size - native_height) / 2};
}

Camera canvas_camera(const Camera& camera, const CanvasMapping& m) {
  Camera c = camera;
  c.width = m.width;
  c.height = m.height;
  // Keep pixel_origin(u + offset_u, v + offset_v) equal to the native origin.
  const double du = 0.5 * m.width - m.offset_u - 0.5 * camera.width;
  const double dv = 0.5 * m.height - m.offset_v - 0.5 * camera.height;
  c.frame_center = camera.frame_center + du * camera.pixel_size * camera.right() -
                   dv * camera.pixel_size * camera.up;
  return c;
}

Observation to_canvas(const Observation& obs, const CanvasMapping& m) {
  Observation out;
  out.camera = canvas_camera(obs.camera, m);
  out.depth = Grid<double>(m.width, m.height, kBackgroundDepth);
  out.part_id = Grid<int>(m.width, m.height, -1);
  out.mask_layer = BoolGrid(m.width, m.height, 0);
  for (int v = 0; v < m.height; ++v) {
    for (int u = 0; u < m.width; ++u) {
      const Pixel n = m.to_native({u, v});
      if (!obs.part_id.contains(n)) continue;
      out.depth(u, v) = obs.depth[n];
      out.part_id(u, v) = obs.part_id[n];
      if (obs.mask_layer.contains(n)) out.mask_layer(u, v) = obs.mask_layer[n];
    }
  }
  return out;
}

void write_pgm16(const std::filesystem::path& path, const Grid<std::uint16_t>& image) {
  std::string out = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) +
                    "\n65535\n";
  out.reserve(out.size() + image.size() * 2);
  for (auto px : image.data()) {
    out.push_back(static_cast<char>(px >> 8));
    out.push_back(static_cast<char>(px & 0xff));
  }
  write_text(path, out);
}

Grid<std::uint16_t> read_pgm16(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string magic;
  int w = 0;
  int h = 0;
  int maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  if (magic != "P5" || maxval != 65535 || w <= 0 || h <= 0) {
    throw Error(ErrorCode::kParseFailure, path.string() + ": not a 16-bit binary PGM");
  }
  Grid<std::uint16_t> g(w, h, 0);
  for (auto& px : g.data()) {
    const int hi = in.get();
    const int lo = in.get();
    if (!in) throw Error(ErrorCode::kParseFailure, path.string() + ": truncated");
    px = static_cast<std::uint16_t>((hi << 8) | lo);
  }
  return g;
}

ExportedObservation export_observation(const Observation& observation,
                                       const std::filesystem::path& directory,
                                       const std::string& stem, int size) {
  const CanvasMapping m = canvas_mapping(observation.part_id.width(), observation.part_id.height(), size);
  const Observation canvas = to_canvas(observation, m);

  double dmin = std::numeric_limits<double>::infinity();
  double dmax = -dmin;
  for (std::size_t i = 0; i < canvas.depth.size(); ++i) {
    if (canvas.part_id.data()[i] < 0) continue;
    dmin = std::min(dmin, canvas.depth.data()[i]);
    dmax = std::max(dmax, canvas.depth.data()[i]);
  }
  const double span = dmax > dmin ? dmax - dmin : 1.0;

  Grid<std::uint16_t> depth(m.width, m.height, 65535);
  Grid<std::uint16_t> mask(m.width, m.height, 0);
  std::string ppm = "P6\n" + std::to_string(m.width) + " " + std::to_string(m.height) + "\n255\n";
  for (std::size_t i = 0; i < depth.size(); ++i) {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    if (canvas.part_id.data()[i] >= 0) {
      const double t = (canvas.depth.data()[i] - dmin) / span;
      depth.data()[i] = static_cast<std::uint16_t>(std::lround(t * 65534.0));
      const auto shade = static_cast<std::uint8_t>(std::lround(230.0 - 160.0 * t));
      r = g = b = shade;
    }
    if (canvas.mask_layer.data()[i]) {
      mask.data()[i] = 65535;
      r = 255;
      g = b = 0;
    }
    ppm.push_back(static_cast<char>(r));
    ppm.push_back(static_cast<char>(g));
    ppm.push_back(static_cast<char>(b));
  }

  ExportedObservation out;
  out.mapping = m;
  out.image = directory / (stem + ".ppm");
  out.depth = directory / (stem + "_depth.pgm");
  out.mask = directory / (stem + "_mask.pgm");
  out.sidecar = directory / (stem + ".json");
  write_text(out.image, ppm);
  write_pgm16(out.depth, depth);
  write_pgm16(out.mask, mask);
  const Json sidecar = {
      {"format", "corrsim-observation"},
      {"version", 1},
      {"width", m.width},
      {"height", m.height},
      {"offset", {m.offset_u, m.offset_v}},
      {"native_size", {observation.part_id.width(), observation.part_id.height()}},
      {"depth_range", std::isfinite(dmin) ? Json::array({dmin, dmax}) : Json()},
      {"camera", to_json(canvas.camera)},
  };
  write_text(out.sidecar, sidecar.dump(2) + "\n");
  return out;
}

}  // namespace corrsim
