#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "ccodec/common.hpp"
#include "ccodec/edge.hpp"
#include "ccodec/image.hpp"
#include "ccodec/resample.hpp"
#include "ccodec/tensor.hpp"

namespace ccodec {

// ---- procedural toy corpus: colored shapes with analytic edge maps ----

namespace toyshapes {

struct Rgb {
  double r, g, b;
};

inline Rgb hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  double i = std::floor(h * 6.0);
  double f = h * 6.0 - i;
  double p = v * (1 - s), q = v * (1 - f * s), t = v * (1 - (1 - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

struct Shape {
  bool is_ellipse = true;
  double cx = 0, cy = 0, rx = 0, ry = 0, rot = 0;
  std::vector<double> poly;  // x0,y0,x1,y1,... (simple polygon)
  Rgb color{0.5, 0.5, 0.5};
  bool striped = false;
  double stripe_angle = 0, stripe_freq = 0;
  Rgb stripe_color{0.5, 0.5, 0.5};

  bool contains(double x, double y) const {
    if (is_ellipse) {
      double dx = x - cx, dy = y - cy;
      double u = dx * std::cos(rot) + dy * std::sin(rot);
      double v = -dx * std::sin(rot) + dy * std::cos(rot);
      return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
    }
    // even-odd crossing test
    bool in = false;
    std::size_t n = poly.size() / 2;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      double xi = poly[2 * i], yi = poly[2 * i + 1];
      double xj = poly[2 * j], yj = poly[2 * j + 1];
      if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) in = !in;
    }
    return in;
  }

  // smooth per-shape luminance gradient (texture, not structure: it does not
  // show up in the edge map)
  double grad_amp = 0, grad_angle = 0;

  Rgb shade(double x, double y) const {
    Rgb c = color;
    if (striped) {
      double t = x * std::cos(stripe_angle) + y * std::sin(stripe_angle);
      if (static_cast<long long>(std::floor(t * stripe_freq)) % 2 != 0) c = stripe_color;
    }
    double l = 1.0 + grad_amp * ((x - cx) * std::cos(grad_angle) + (y - cy) * std::sin(grad_angle));
    return {c.r * l, c.g * l, c.b * l};
  }
};

struct Scene {
  Rgb background;
  std::vector<Shape> shapes;  // draw order; later shapes occlude earlier
  // background gradient + global low-frequency sinusoidal shading. These are
  // deliberately smooth: they give every region nonzero local variance (so
  // the texture layer has something to model) without adding edges.
  double bg_grad_ax = 0, bg_grad_ay = 0;
  double tex_amp = 0, tex_fx = 0, tex_fy = 0, tex_phase = 0;
  double inv_size = 1;

  // 0 = background, 1.. = shape index + 1 (topmost wins)
  int label(double x, double y) const {
    for (int i = static_cast<int>(shapes.size()) - 1; i >= 0; --i)
      if (shapes[static_cast<std::size_t>(i)].contains(x, y)) return i + 1;
    return 0;
  }

  Rgb shade(double x, double y) const {
    int l = label(x, y);
    Rgb c;
    if (l == 0) {
      double lum = 1.0 + bg_grad_ax * (x * inv_size - 0.5) + bg_grad_ay * (y * inv_size - 0.5);
      c = {background.r * lum, background.g * lum, background.b * lum};
    } else {
      c = shapes[static_cast<std::size_t>(l - 1)].shade(x, y);
    }
    double w = 1.0 + tex_amp * std::sin(2 * 3.14159265358979 * (tex_fx * x + tex_fy * y) *
                                            inv_size +
                                        tex_phase);
    auto clamp01 = [](double v) { return v < 0 ? 0.0 : v > 1 ? 1.0 : v; };
    return {clamp01(c.r * w), clamp01(c.g * w), clamp01(c.b * w)};
  }
};

inline Scene random_scene(nn::Rng& rng, int size) {
  Scene sc;
  sc.inv_size = 1.0 / size;
  sc.background = hsv_to_rgb(rng.uniform(), rng.uniform(0.2, 0.7), rng.uniform(0.3, 0.9));
  sc.bg_grad_ax = rng.uniform(-0.6, 0.6);
  sc.bg_grad_ay = rng.uniform(-0.6, 0.6);
  sc.tex_amp = rng.uniform(0.2, 0.35);
  double ang = rng.uniform(0.0, 3.14159265), freq = rng.uniform(1.0, 2.5);
  sc.tex_fx = freq * std::cos(ang);
  sc.tex_fy = freq * std::sin(ang);
  sc.tex_phase = rng.uniform(0.0, 2 * 3.14159265358979);
  int nshapes = 1 + static_cast<int>(rng.uniform_int(3));
  double s = static_cast<double>(size);
  for (int i = 0; i < nshapes; ++i) {
    Shape sh;
    sh.color = hsv_to_rgb(rng.uniform(), rng.uniform(0.4, 1.0), rng.uniform(0.3, 1.0));
    sh.cx = rng.uniform(0.2, 0.8) * s;
    sh.cy = rng.uniform(0.2, 0.8) * s;
    if (rng.uniform() < 0.5) {
      sh.is_ellipse = true;
      sh.rx = rng.uniform(0.08, 0.3) * s;
      sh.ry = rng.uniform(0.08, 0.3) * s;
      sh.rot = rng.uniform(0.0, 3.14159265);
    } else {
      sh.is_ellipse = false;
      int nv = 3 + static_cast<int>(rng.uniform_int(4));
      double base_r = rng.uniform(0.1, 0.3) * s;
      std::vector<double> angles(static_cast<std::size_t>(nv));
      for (auto& a : angles) a = rng.uniform(0.0, 2 * 3.14159265358979);
      std::sort(angles.begin(), angles.end());
      for (double a : angles) {
        double r = base_r * rng.uniform(0.7, 1.3);
        sh.poly.push_back(sh.cx + r * std::cos(a));
        sh.poly.push_back(sh.cy + r * std::sin(a));
      }
    }
    if (rng.uniform() < 0.15) {
      sh.striped = true;
      sh.stripe_angle = rng.uniform(0.0, 3.14159265);
      sh.stripe_freq = rng.uniform(0.1, 0.4);
      sh.stripe_color = hsv_to_rgb(rng.uniform(), rng.uniform(0.4, 1.0), rng.uniform(0.3, 1.0));
    }
    sh.grad_amp = rng.uniform(-0.03, 0.03);  // per-pixel slope of the shading
    sh.grad_angle = rng.uniform(0.0, 2 * 3.14159265358979);
    sc.shapes.push_back(std::move(sh));
  }
  return sc;
}

// 4x4 supersampled render plus exact boundary edge map from the label field.
inline std::pair<Image, StructuralMap> render(const Scene& sc, int size) {
  const int ss = 4;
  Image img(size, size, 3);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double r = 0, g = 0, b = 0;
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx) {
          Rgb c = sc.shade(x + (sx + 0.5) / ss, y + (sy + 0.5) / ss);
          r += c.r;
          g += c.g;
          b += c.b;
        }
      img.at(y, x, 0) = r / (ss * ss);
      img.at(y, x, 1) = g / (ss * ss);
      img.at(y, x, 2) = b / (ss * ss);
    }

  std::vector<int> labels(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      labels[static_cast<std::size_t>(y) * size + x] = sc.label(x + 0.5, y + 0.5);

  StructuralMap map(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      int l = labels[static_cast<std::size_t>(y) * size + x];
      bool edge = (x + 1 < size && labels[static_cast<std::size_t>(y) * size + x + 1] != l) ||
                  (y + 1 < size && labels[static_cast<std::size_t>(y + 1) * size + x] != l);
      map.at(y, x) = edge ? 1 : 0;
    }
  return {std::move(img), std::move(map)};
}

}  // namespace toyshapes

inline std::pair<Image, StructuralMap> make_toy_sample(std::uint64_t seed, std::uint64_t index,
                                                       int size) {
  nn::Rng rng(seed * 0x9e3779b97f4a7c15ull + index + 1);
  return toyshapes::render(toyshapes::random_scene(rng, size), size);
}

// Writes n (img_XXXX.png, map_XXXX.png) pairs; deterministic per seed.
inline void generate_toy_dataset(const std::string& out_dir, int n, std::uint64_t seed,
                                 int size = 64) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  char buf[32];
  for (int i = 0; i < n; ++i) {
    auto [img, map] = make_toy_sample(seed, static_cast<std::uint64_t>(i), size);
    std::snprintf(buf, sizeof buf, "img_%04d.png", i);
    save_image(img, (fs::path(out_dir) / buf).string());
    std::snprintf(buf, sizeof buf, "map_%04d.png", i);
    save_image(map_to_image(map), (fs::path(out_dir) / buf).string());
  }
}

// ---- dataset ingestion ----

struct Dataset {
  std::vector<Image> images;
  std::vector<StructuralMap> maps;

  std::size_t size() const { return images.size(); }
};

// Loads every img_*.png (with its map_*.png when present) or, failing that,
// any *.png in the directory; images are resized to `size` square and maps
// derived with Canny when not provided.
inline Dataset load_dataset(const std::string& dir, int size, const EdgeConfig& edge_cfg = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError("dataset directory not found: " + dir);
  std::vector<fs::path> img_paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".png") continue;
    std::string name = e.path().filename().string();
    if (name.rfind("map_", 0) == 0) continue;
    img_paths.push_back(e.path());
  }
  std::sort(img_paths.begin(), img_paths.end());
  if (img_paths.empty()) throw ConfigError("dataset directory has no images: " + dir);

  Dataset ds;
  for (const auto& p : img_paths) {
    Image img = load_image(p.string());
    if (img.channels == 1) {
      Image rgb(img.height, img.width, 3);
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
          for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = img.at(y, x, 0);
      img = std::move(rgb);
    }
    std::string name = p.filename().string();
    fs::path map_path = p.parent_path() / ("map_" + name.substr(4));
    bool have_map = name.rfind("img_", 0) == 0 && fs::exists(map_path);
    if (img.height != size || img.width != size) {
      img = lanczos_resize(img, size, size);
      have_map = have_map && false;  // resized images get re-derived maps
    }
    StructuralMap map = have_map
                            ? binarize(load_image(map_path.string()), 0.5)
                            : extract_edges(img, edge_cfg);
    ds.images.push_back(std::move(img));
    ds.maps.push_back(std::move(map));
  }
  return ds;
}

}  // namespace ccodec
