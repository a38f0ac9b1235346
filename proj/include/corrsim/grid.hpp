#pragma once

#include <cstdint>
#include <vector>

namespace corrsim {

/// Integer pixel coordinate; `u` is the column, `v` the row.
struct Pixel {
  int u = 0;
  int v = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Row-major H x W image of T.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  bool contains(Pixel p) const {
    return p.u >= 0 && p.v >= 0 && p.u < width_ && p.v < height_;
  }
  bool same_shape(const auto& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  T& operator()(int u, int v) { return data_[index(u, v)]; }
  const T& operator()(int u, int v) const { return data_[index(u, v)]; }
  T& operator[](Pixel p) { return data_[index(p.u, p.v)]; }
  const T& operator[](Pixel p) const { return data_[index(p.u, p.v)]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(u);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Boolean images are stored as bytes (0/1) to avoid std::vector<bool>.
using BoolGrid = Grid<std::uint8_t>;

inline bool any(const BoolGrid& g) {
  for (auto b : g.data()) {
    if (b) return true;
  }
  return false;
}

inline std::size_t count(const BoolGrid& g) {
  std::size_t n = 0;
  for (auto b : g.data()) n += b ? 1 : 0;
  return n;
}

}  // namespace corrsim
