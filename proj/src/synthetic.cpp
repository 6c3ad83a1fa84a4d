#include <algorithm>
#include <cmath>
#include <vector>

#include "sparselab/data.hpp"

// Stroke-skeleton digit renderer. Each digit is a handful of polylines /
// elliptic arcs in a unit box; every sample gets its own affine transform,
// a smooth low-frequency wobble of the stroke points, stroke width and
// contrast jitter, optional clutter arcs and pixel noise. The result is
// quantized to bytes so a round
// trip through save_idx/load_idx is exact.

namespace sparselab {

namespace {

constexpr std::size_t kSide = 28;
constexpr double kPi = 3.14159265358979323846;

struct Point {
  double x, y;
};

using Polyline = std::vector<Point>;

Polyline arc(double cx, double cy, double rx, double ry, double deg0, double deg1, int n = 20) {
  Polyline p;
  p.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double a = (deg0 + (deg1 - deg0) * i / n) * kPi / 180.0;
    p.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return p;
}

// variant index selects between handwriting styles per digit
std::vector<Polyline> glyph_strokes(int digit, int variant) {
  switch (digit) {
    case 0:
      if (variant == 0) return {arc(0.50, 0.50, 0.30, 0.42, 90, 450, 30)};
      if (variant == 1) return {arc(0.50, 0.50, 0.22, 0.44, 90, 450, 30)};
      if (variant == 2) {
        return {arc(0.48, 0.52, 0.32, 0.38, 70, 430, 30),
                Polyline{{0.66, 0.78}, {0.74, 0.88}}};
      }
      return {arc(0.50, 0.46, 0.28, 0.38, 90, 450, 30)};
    case 1: {
      if (variant == 0) return {Polyline{{0.38, 0.70}, {0.58, 0.93}, {0.58, 0.05}}};
      if (variant == 1) {
        return {Polyline{{0.38, 0.70}, {0.58, 0.93}, {0.58, 0.05}},
                Polyline{{0.40, 0.05}, {0.76, 0.05}}};
      }
      if (variant == 2) return {Polyline{{0.52, 0.92}, {0.52, 0.06}}};
      return {Polyline{{0.42, 0.78}, {0.56, 0.90}, {0.50, 0.06}}};
    }
    case 2: {
      if (variant == 3) {
        Polyline top = arc(0.48, 0.74, 0.26, 0.18, 150, -10, 14);
        top.push_back({0.70, 0.50});
        top.push_back({0.38, 0.30});
        top.push_back({0.24, 0.08});
        top.push_back({0.78, 0.10});
        return {top};
      }
      if (variant == 2) {
        // angular style: flat top, straight diagonal
        return {Polyline{{0.26, 0.78}, {0.40, 0.92}, {0.68, 0.90}, {0.74, 0.70},
                         {0.26, 0.08}, {0.80, 0.08}}};
      }
      Polyline top = arc(0.50, 0.72, variant == 0 ? 0.28 : 0.24, 0.21, 160, 0, 16);
      top.push_back({0.76, 0.55});
      top.push_back({0.24, 0.06});
      top.push_back({0.80, 0.06});
      return {top};
    }
    case 3: {
      if (variant == 3) {
        Polyline upper = arc(0.47, 0.74, 0.20, 0.17, 140, -80, 16);
        Polyline lower = arc(0.47, 0.30, 0.22, 0.22, 80, -140, 18);
        return {upper, lower};
      }
      if (variant == 2) {
        // flat-top style
        Polyline head{{0.26, 0.92}, {0.74, 0.92}, {0.48, 0.58}};
        Polyline lower = arc(0.45, 0.32, 0.31, 0.25, 85, -140, 18);
        return {head, lower};
      }
      const double spread = variant == 0 ? 0.28 : 0.23;
      Polyline upper = arc(0.45, 0.72, spread, 0.19, 140, -80, 16);
      Polyline lower = arc(0.45, 0.31, spread + 0.03, 0.23, 80, -140, 18);
      return {upper, lower};
    }
    case 4: {
      if (variant == 0) {
        return {Polyline{{0.62, 0.93}, {0.22, 0.42}, {0.84, 0.42}},
                Polyline{{0.66, 0.68}, {0.66, 0.05}}};
      }
      if (variant == 1) {
        return {Polyline{{0.58, 0.93}, {0.24, 0.45}, {0.82, 0.45}},
                Polyline{{0.58, 0.93}, {0.58, 0.05}}};
      }
      if (variant == 2) {
        return {Polyline{{0.70, 0.93}, {0.24, 0.38}, {0.86, 0.38}},
                Polyline{{0.62, 0.60}, {0.62, 0.05}}};
      }
      return {Polyline{{0.52, 0.93}, {0.30, 0.50}, {0.80, 0.50}},
              Polyline{{0.64, 0.70}, {0.64, 0.05}, {0.52, 0.05}}};
    }
    case 5: {
      if (variant == 3) {
        Polyline head{{0.70, 0.90}, {0.32, 0.90}, {0.34, 0.60}};
        Polyline bowl = arc(0.50, 0.34, 0.24, 0.28, 120, -115, 18);
        return {head, bowl};
      }
      if (variant == 2) {
        Polyline head{{0.78, 0.92}, {0.26, 0.92}, {0.30, 0.52}};
        Polyline bowl = arc(0.48, 0.30, 0.27, 0.24, 100, -125, 18);
        return {head, bowl};
      }
      Polyline head{{0.74, 0.92}, {0.30, 0.92}, {variant == 0 ? 0.27 : 0.32, 0.56}};
      Polyline bowl = arc(0.46, 0.32, variant == 0 ? 0.29 : 0.25, 0.26, 112, -125, 18);
      return {head, bowl};
    }
    case 6: {
      if (variant == 3) {
        Polyline spine{{0.58, 0.92}, {0.34, 0.52}, {0.30, 0.30}};
        Polyline loop = arc(0.46, 0.22, 0.18, 0.16, 160, -200, 20);
        return {spine, loop};
      }
      if (variant == 2) {
        Polyline spine{{0.62, 0.93}, {0.40, 0.62}, {0.31, 0.36}};
        Polyline loop = arc(0.50, 0.24, 0.24, 0.19, 160, -200, 22);
        return {spine, loop};
      }
      Polyline spine{{0.68, 0.93}, {0.50, 0.78}, {0.35, 0.56}, {0.29, 0.38}};
      Polyline loop = arc(0.48, 0.26, variant == 0 ? 0.21 : 0.18, 0.20, 160, -200, 22);
      return {spine, loop};
    }
    case 7: {
      Polyline main{{0.22, 0.90}, {0.80, 0.90}, {variant >= 2 ? 0.32 : 0.42, 0.05}};
      if (variant == 0 || variant == 2) return {main};
      return {main, Polyline{{0.34, 0.48}, {0.66, 0.48}}};
    }
    case 8: {
      if (variant == 3) {
        return {arc(0.46, 0.70, 0.19, 0.17, 90, 450, 22),
                arc(0.54, 0.28, 0.23, 0.20, 90, 450, 24)};
      }
      if (variant == 2) {
        return {arc(0.52, 0.71, 0.17, 0.16, 90, 450, 22),
                arc(0.48, 0.27, 0.26, 0.22, 90, 450, 24)};
      }
      const double waist = variant == 0 ? 0.20 : 0.23;
      return {arc(0.50, 0.69, waist, 0.18, 90, 450, 22),
              arc(0.50, 0.29, waist + 0.03, 0.21, 90, 450, 24)};
    }
    case 9: {
      Polyline loop = arc(0.52, 0.70, 0.22, 0.19, 0, 360, 22);
      if (variant == 0) return {loop, Polyline{{0.74, 0.68}, {0.70, 0.38}, {0.56, 0.05}}};
      if (variant == 1) return {loop, Polyline{{0.73, 0.66}, {0.73, 0.06}}};
      if (variant == 2) {
        Polyline tail{{0.74, 0.68}, {0.72, 0.30}, {0.58, 0.08}, {0.40, 0.10}};
        return {loop, tail};
      }
      return {loop, Polyline{{0.74, 0.68}, {0.64, 0.34}, {0.46, 0.06}}};
    }
    default:
      throw ShapeError("glyph_strokes: digit out of range");
  }
}

struct SampleStyle {
  double box;
  double rot, shear, sx, sy, tx, ty;
  double wob_amp, wob_fx, wob_fy, wob_p1, wob_p2;
  double halfwidth, contrast;
};

Point distort(const Point& p, const SampleStyle& s) {
  // wobble in unit space, then affine about the glyph centre
  double x = p.x + (s.wob_amp / s.box) * std::sin(2.0 * kPi * (s.wob_fx * p.y + s.wob_p1));
  double y = p.y + (s.wob_amp / s.box) * std::sin(2.0 * kPi * (s.wob_fy * p.x + s.wob_p2));
  x -= 0.5;
  y -= 0.5;
  x += s.shear * y;
  const double c = std::cos(s.rot), sn = std::sin(s.rot);
  const double xr = c * x - sn * y, yr = sn * x + c * y;
  return {0.5 + s.sx * xr, 0.5 + s.sy * yr};
}

void stamp_segment(std::vector<double>& canvas, Point a, Point b, const SampleStyle& s,
                   double intensity) {
  // unit coords -> pixel coords (row axis points down), glyph centred
  const double box = s.box;
  const double margin = (kSide - box) / 2.0;
  const auto to_px = [&](const Point& p) {
    return Point{margin + box * p.x + s.tx, (kSide - margin) - box * p.y + s.ty};
  };
  const Point pa = to_px(a), pb = to_px(b);
  const double len = std::hypot(pb.x - pa.x, pb.y - pa.y);
  const int steps = std::max(1, static_cast<int>(len / 0.35));
  constexpr double aa = 0.55;  // anti-aliasing band, px
  const double reach = s.halfwidth + aa;
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const double px = pa.x + t * (pb.x - pa.x);
    const double py = pa.y + t * (pb.y - pa.y);
    const int r0 = std::max(0, static_cast<int>(std::floor(py - reach)));
    const int r1 = std::min<int>(kSide - 1, static_cast<int>(std::ceil(py + reach)));
    const int c0 = std::max(0, static_cast<int>(std::floor(px - reach)));
    const int c1 = std::min<int>(kSide - 1, static_cast<int>(std::ceil(px + reach)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double d = std::hypot(c - px, r - py);
        const double v = intensity * std::clamp((reach - d) / (2.0 * aa), 0.0, 1.0);
        double& cell = canvas[r * kSide + c];
        cell = std::max(cell, v);
      }
    }
  }
}

void render_digit(std::vector<double>& canvas, int digit, Rng& rng,
                  const SyntheticDigitsConfig& cfg) {
  SampleStyle s;
  s.box = cfg.glyph_box_px;
  s.rot = rng.next_gaussian() * cfg.rotation_std_degrees * kPi / 180.0;
  s.shear = (2.0 * rng.next_double() - 1.0) * cfg.shear_range;
  s.sx = cfg.scale_low + rng.next_double() * (cfg.scale_high - cfg.scale_low);
  s.sy = cfg.scale_low + rng.next_double() * (cfg.scale_high - cfg.scale_low);
  s.tx = (2.0 * rng.next_double() - 1.0) * cfg.translate_range;
  s.ty = (2.0 * rng.next_double() - 1.0) * cfg.translate_range;
  s.wob_amp = rng.next_double() * cfg.elastic_amplitude;
  s.wob_fx = 0.6 + rng.next_double();
  s.wob_fy = 0.6 + rng.next_double();
  s.wob_p1 = rng.next_double();
  s.wob_p2 = rng.next_double();
  s.halfwidth = cfg.stroke_halfwidth_low +
                rng.next_double() * (cfg.stroke_halfwidth_high - cfg.stroke_halfwidth_low);
  s.contrast = cfg.contrast_low + rng.next_double() * (cfg.contrast_high - cfg.contrast_low);

  const int variant = static_cast<int>(rng.next_below(4));
  for (const Polyline& stroke : glyph_strokes(digit, variant)) {
    for (std::size_t i = 0; i + 1 < stroke.size(); ++i) {
      stamp_segment(canvas, distort(stroke[i], s), distort(stroke[i + 1], s), s, 1.0);
    }
  }

  // occasional distractor arc that is not part of the glyph
  if (rng.next_double() < cfg.clutter_rate) {
    const double cx = rng.next_double(), cy = rng.next_double();
    const double r = 0.06 + 0.08 * rng.next_double();
    const double a0 = 360.0 * rng.next_double();
    const double strength = 0.25 + 0.35 * rng.next_double();
    Polyline blob = arc(cx, cy, r, r, a0, a0 + 120 + 180 * rng.next_double(), 8);
    for (std::size_t i = 0; i + 1 < blob.size(); ++i) {
      stamp_segment(canvas, blob[i], blob[i + 1], s, strength);
    }
  }

  for (double& v : canvas) {
    v *= s.contrast;
    v += cfg.noise_std * rng.next_gaussian();
    v = std::clamp(v, 0.0, 1.0);
    v = std::round(v * 255.0) / 255.0;  // byte-exact, matches IDX round trip
  }
}

}  // namespace

Dataset synth_digits(std::size_t count, std::uint64_t seed, const SyntheticDigitsConfig& cfg) {
  Dataset data;
  data.images = Tensor::zeros(count, kSide * kSide);
  data.labels.resize(count);
  data.num_classes = 10;
  Rng base(seed);
  std::vector<double> canvas(kSide * kSide);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = base.fork(i);
    const int digit = static_cast<int>(rng.next_below(10));
    std::fill(canvas.begin(), canvas.end(), 0.0);
    render_digit(canvas, digit, rng, cfg);
    std::copy(canvas.begin(), canvas.end(), data.images.data() + i * canvas.size());
    data.labels[i] = digit;
  }
  return data;
}

void generate_synthetic_idx(const std::filesystem::path& out_dir,
                            const SyntheticDigitsConfig& cfg) {
  std::filesystem::create_directories(out_dir);
  const Dataset train = synth_digits(cfg.train_count, cfg.seed, cfg);
  const Dataset test = synth_digits(cfg.test_count, cfg.seed ^ 0x7465737473706c74ULL, cfg);
  save_idx(out_dir / "train-images-idx3-ubyte", out_dir / "train-labels-idx1-ubyte", train);
  save_idx(out_dir / "t10k-images-idx3-ubyte", out_dir / "t10k-labels-idx1-ubyte", test);
}

}  // namespace sparselab
