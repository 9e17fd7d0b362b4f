// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include "eqscene/warp/affine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "eqscene/core/error.hpp"

namespace eqscene::warp {

std::string to_string(CoordFrame f) { return f == CoordFrame::pixel ? "pixel" : "normalized"; }

AffineParams AffineParams::from_coefficients(const std::array<double, 6>& c, CoordFrame frame) {
  return {c[0], c[1], c[2], c[3], c[4], c[5], frame};
}

AffineParams make_rotation(double degrees, Point center, CoordFrame frame) {
  const double rad = degrees * std::numbers::pi / 180.0;
  double c = std::cos(rad);
  double s = std::sin(rad);
  // Exact values at quarter turns so that make_rotation(90) has no 6e-17 residue.
  const double q = degrees / 90.0;
  if (q == std::round(q)) {
    const long k = ((static_cast<long>(std::round(q)) % 4) + 4) % 4;
    constexpr double cs[4][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    c = cs[k][0];
    s = cs[k][1];
  }
  AffineParams a{c, -s, 0.0, s, c, 0.0, frame};
  // p -> R (p - center) + center
  a.tx = center.x - (c * center.x - s * center.y);
  a.ty = center.y - (s * center.x + c * center.y);
  return a;
}

AffineParams make_translation(double dx, double dy, CoordFrame frame) {
  AffineParams a = AffineParams::identity(frame);
  a.tx = dx;
  a.ty = dy;
  return a;
}

AffineParams compose(const AffineParams& o, const AffineParams& i) {
  if (o.frame != i.frame) {
    throw ContractError("compose: frame mismatch (" + to_string(o.frame) + " vs " +
                        to_string(i.frame) + ")");
  }
  AffineParams r;
  r.frame = o.frame;
  r.a11 = o.a11 * i.a11 + o.a12 * i.a21;
  r.a12 = o.a11 * i.a12 + o.a12 * i.a22;
  r.a21 = o.a21 * i.a11 + o.a22 * i.a21;
  r.a22 = o.a21 * i.a12 + o.a22 * i.a22;
  r.tx = o.a11 * i.tx + o.a12 * i.ty + o.tx;
  r.ty = o.a21 * i.tx + o.a22 * i.ty + o.ty;
  return r;
}

AffineParams invert(const AffineParams& a) {
  const double det = a.determinant();
  if (std::abs(det) < 1e-9) {
    throw SingularTransformError("invert: singular affine transform (|det| < 1e-9)");
  }
  AffineParams r;
  r.frame = a.frame;
  r.a11 = a.a22 / det;
  r.a12 = -a.a12 / det;
  r.a21 = -a.a21 / det;
  r.a22 = a.a11 / det;
  r.tx = -(r.a11 * a.tx + r.a12 * a.ty);
  r.ty = -(r.a21 * a.tx + r.a22 * a.ty);
  return r;
}

namespace {

// Pixel -> normalized: u = (2x + 1) / W - 1.
AffineParams canvas_scaling(int width, int height) {
  if (width <= 0 || height <= 0) {
    throw ContractError("pixel/normalized conversion needs positive canvas dimensions");
  }
  AffineParams s;
  s.a11 = 2.0 / width;
  s.a22 = 2.0 / height;
  s.tx = 1.0 / width - 1.0;
  s.ty = 1.0 / height - 1.0;
  return s;
}

}  // namespace

AffineParams pixel_to_normalized(const AffineParams& a, int width, int height) {
  if (a.frame != CoordFrame::pixel) throw ContractError("pixel_to_normalized: input is not in pixel frame");
  const AffineParams s = canvas_scaling(width, height);
  AffineParams r = compose(s, compose(a, invert(s)));
  r.frame = CoordFrame::normalized;
  return r;
}

AffineParams normalized_to_pixel(const AffineParams& a, int width, int height) {
  if (a.frame != CoordFrame::normalized) throw ContractError("normalized_to_pixel: input is not in normalized frame");
  const AffineParams s = canvas_scaling(width, height);
  AffineParams as_pixel = a;
  as_pixel.frame = CoordFrame::pixel;
  return compose(invert(s), compose(as_pixel, s));
}

double max_abs_diff(const AffineParams& a, const AffineParams& b) {
  if (a.frame != b.frame) throw ContractError("max_abs_diff: frame mismatch");
  const auto ca = a.coefficients();
  const auto cb = b.coefficients();
  double m = 0.0;
  for (std::size_t k = 0; k < ca.size(); ++k) m = std::max(m, std::abs(ca[k] - cb[k]));
  return m;
}

}  // namespace eqscene::warp
