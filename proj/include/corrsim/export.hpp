#pragma once

// Observation export for external models: 16-bit PGM depth and mask, an
// 8-bit PPM preview with the red mask drawn in, and a JSON sidecar.
//
// Images are centered on a fixed-size canvas (padding or cropping). A native
// pixel (u, v) appears at (u + offset_u, v + offset_v) in every exported file.

#include <cstdint>
#include <filesystem>
#include <string>

#include "corrsim/grid.hpp"
#include "corrsim/scene.hpp"

namespace corrsim {

inline constexpr int kDefaultExportSize = 336;

struct CanvasMapping {
  int width = 0;
  int height = 0;
  int offset_u = 0;
  int offset_v = 0;

  Pixel to_canvas(Pixel p) const { return {p.u + offset_u, p.v + offset_v}; }
  Pixel to_native(Pixel p) const { return {p.u - offset_u, p.v - offset_v}; }
  friend bool operator==(const CanvasMapping&, const CanvasMapping&) = default;
};

/// Centered placement of a native image on a `size` x `size` canvas;
/// size <= 0 keeps the native frame.
CanvasMapping canvas_mapping(int native_width, int native_height, int size);

/// Camera whose pixel grid is the canvas: canvas pixel p sees exactly what
/// native pixel to_native(p) sees.
Camera canvas_camera(const Camera& camera, const CanvasMapping& mapping);

/// Moves an observation onto the canvas (background outside the native frame).
Observation to_canvas(const Observation& observation, const CanvasMapping& mapping);

struct ExportedObservation {
  std::filesystem::path image;    ///< 8-bit PPM preview
  std::filesystem::path depth;    ///< 16-bit PGM
  std::filesystem::path mask;     ///< 16-bit PGM, 0 / 65535
  std::filesystem::path sidecar;  ///< JSON
  CanvasMapping mapping;
};

/// Foreground depth is quantized linearly from [min, max] to [0, 65534];
/// background is 65535. The sidecar records the range, camera and mapping.
ExportedObservation export_observation(const Observation& observation,
                                       const std::filesystem::path& directory,
                                       const std::string& stem, int size = kDefaultExportSize);

void write_pgm16(const std::filesystem::path& path, const Grid<std::uint16_t>& image);
Grid<std::uint16_t> read_pgm16(const std::filesystem::path& path);

}  // namespace corrsim
